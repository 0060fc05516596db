//! Task runners: each turns a validated scenario into result rows, ordered
//! by index and input regardless of how the work was scheduled.

use indiff::models::transaction::{default_b_nodes, psi_at_spot};
use indiff::models::{
    basis_risk_limit_curve, default_bond_limit_curve, gaussian_limit_curve, transaction_limit_curve, BasisRiskModel,
    DefaultBondModel, GaussianModel, GaussianResidualParams, TransCostParams,
};
use indiff::position::brute_force_sale_quantity;
use indiff::{
    estimate_limit_curve, optimal_position, optimal_sale_quantity, pepq_limit_study, pepq_solve, probe_delta,
    rate_ratio_sequence, validate_price_curve, LimitCurve, MarketSequenceModel, PriceCurve, RateSchedule, RiskAversionSchedule,
    Schedules,
};
use rayon::prelude::*;

use crate::config::{ModelConfig, ScenarioConfig, Task};
use crate::report::{keyed, Row};

pub type TaskResult = Result<Vec<Row>, indiff::Error>;

/// Market-sequence model of a non-transaction family, with the seed
/// applied to Monte Carlo configurations.
fn build_model(model: &ModelConfig, seed: Option<u64>) -> Box<dyn MarketSequenceModel> {
    match model {
        ModelConfig::Gaussian { d, gamma2, .. } => {
            Box::new(GaussianModel::new(GaussianResidualParams::new(d.clone(), gamma2.clone())))
        }
        ModelConfig::BasisRisk { method, params } => {
            let mut params = params.clone();
            if let Some(seed) = seed {
                params.mc.seed = seed;
            }
            Box::new(BasisRiskModel::new(params, *method))
        }
        ModelConfig::DefaultBond { params } => Box::new(DefaultBondModel::new(params.clone())),
        ModelConfig::Transaction { .. } => unreachable!("transaction scenarios are validated to use task pde"),
    }
}

fn schedules(cfg: &ScenarioConfig, model: &dyn MarketSequenceModel) -> Schedules {
    let defaults = model.default_schedules();
    Schedules::new(
        cfg.schedules
            .risk_aversion
            .clone()
            .map(RiskAversionSchedule::new)
            .unwrap_or(defaults.risk_aversion),
        cfg.schedules.rate.clone().map(RateSchedule::new).unwrap_or(defaults.rate),
    )
}

/// Analytic limit curve of the family at risk aversion `a`, if known.
fn analytic_limit(model: &ModelConfig, a: f64) -> Option<Result<LimitCurve, indiff::Error>> {
    match model {
        ModelConfig::Gaussian { limit_d, .. } => limit_d.map(|d| Ok(gaussian_limit_curve(d, a))),
        ModelConfig::BasisRisk { params, .. } => Some(basis_risk_limit_curve(params, a)),
        ModelConfig::DefaultBond { .. } => Some(Ok(default_bond_limit_curve(a))),
        ModelConfig::Transaction { .. } => None,
    }
}

pub fn run(cfg: &ScenarioConfig, seed: Option<u64>) -> TaskResult {
    if let ModelConfig::Transaction { params } = &cfg.model {
        return pde(cfg, params);
    }
    let model = build_model(&cfg.model, seed);
    let scheds = schedules(cfg, model.as_ref());
    match cfg.task {
        Task::Price => price(cfg, model.as_ref(), &scheds),
        Task::Curve => curve(cfg, model.as_ref(), &scheds),
        Task::Limit => limit(cfg, model.as_ref(), &scheds),
        Task::Rates => rates(cfg, model.as_ref(), &scheds),
        Task::Position => position(cfg, model.as_ref(), &scheds),
        Task::Equilibrium => equilibrium(cfg, model.as_ref(), &scheds),
        Task::Sweep => sweep(cfg, model.as_ref(), &scheds),
        Task::Pde => unreachable!("checked at parse time"),
    }
}

/// `r_n` and `a_n` rows for each index.
fn scaling_rows(n: u64, scheds: &Schedules) -> Result<Vec<Row>, indiff::Error> {
    Ok(vec![
        Row::at(n, "r_n", scheds.rate.eval(n)?),
        Row::at(n, "a_n", scheds.risk_aversion.eval(n)?),
    ])
}

/// Runs `f` over the index list in parallel and concatenates in index order.
fn per_index<F>(n_list: &[u64], f: F) -> TaskResult
where
    F: Fn(u64) -> TaskResult + Sync,
{
    let blocks = n_list.par_iter().map(|&n| f(n)).collect::<Result<Vec<_>, _>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

fn price_rows(n: u64, scheds: &Schedules, c: &PriceCurve, qs: &[f64]) -> TaskResult {
    let mut rows = scaling_rows(n, scheds)?;
    for &q in qs {
        let e = c.eval(q)?;
        rows.push(Row::at(n, keyed("price", "q", q), e.value));
        if let Some(se) = e.stderr {
            rows.push(Row::at(n, keyed("stderr", "q", q), se));
        }
    }
    Ok(rows)
}

fn price(cfg: &ScenarioConfig, model: &dyn MarketSequenceModel, scheds: &Schedules) -> TaskResult {
    per_index(&cfg.grid.n, |n| {
        let c = model.curve(n, scheds.risk_aversion.eval(n)?)?;
        price_rows(n, scheds, &c, &cfg.grid.q)
    })
}

fn curve(cfg: &ScenarioConfig, model: &dyn MarketSequenceModel, scheds: &Schedules) -> TaskResult {
    per_index(&cfg.grid.n, |n| {
        let c = model.curve(n, scheds.risk_aversion.eval(n)?)?;
        let mut rows = price_rows(n, scheds, &c, &cfg.grid.q)?;
        if cfg.grid.q.len() >= 3 {
            let report = validate_price_curve(&c, &cfg.grid.q, cfg.tolerances.validation)?;
            for (name, check) in [("monotone", report.monotone), ("concave", report.concave), ("bounds", report.bounds)] {
                rows.push(Row::at(n, format!("{name}_ok"), check.ok));
                rows.push(Row::at(n, format!("{name}_worst"), check.worst));
            }
        }
        Ok(rows)
    })
}

fn limit(cfg: &ScenarioConfig, model: &dyn MarketSequenceModel, scheds: &Schedules) -> TaskResult {
    let n_list = &cfg.grid.n;
    let tol = cfg.tolerances.cauchy;
    let est = estimate_limit_curve(model, scheds, &cfg.grid.ell, n_list, tol)?;
    let mut rows = Vec::new();
    for (i, &n) in n_list.iter().enumerate() {
        rows.extend(scaling_rows(n, scheds)?);
        for (ell, d) in est.ells.iter().zip(&est.diagnostics) {
            rows.push(Row::at(n, keyed("scaled_price", "ell", *ell), d.values[i]));
            if d.stderrs[i] > 0.0 {
                rows.push(Row::at(n, keyed("stderr", "ell", *ell), d.stderrs[i]));
            }
        }
    }
    for (ell, d) in est.ells.iter().zip(&est.diagnostics) {
        rows.push(Row::summary(keyed("p_inf", "ell", *ell), d.limit_estimate));
        rows.push(Row::summary(keyed("error_bar", "ell", *ell), d.error_bar));
        rows.push(Row::summary(keyed("cauchy_ok", "ell", *ell), d.cauchy_ok));
    }
    rows.push(Row::summary("continuity_gap", est.continuity_gap));
    let probe = probe_delta(model, scheds, &cfg.grid.ell, n_list, tol)?;
    rows.push(Row::summary("delta_minus_est", probe.delta_minus_est));
    rows.push(Row::summary("delta_plus_est", probe.delta_plus_est));
    if let Some(w) = probe.warning {
        rows.push(Row::summary("warning", w));
    }
    Ok(rows)
}

fn rates(cfg: &ScenarioConfig, model: &dyn MarketSequenceModel, scheds: &Schedules) -> TaskResult {
    let p_tilde = cfg.schedules.p_tilde.as_ref().expect("checked at parse time");
    let n_list = &cfg.grid.n;
    let last = *n_list.last().expect("checked at parse time");
    let v = rate_ratio_sequence(model, scheds, p_tilde, n_list, None, cfg.tolerances.optimizer)?;
    let mut rows = Vec::new();
    for (i, &n) in n_list.iter().enumerate() {
        rows.extend(scaling_rows(n, scheds)?);
        rows.push(Row::at(n, "p_tilde", p_tilde.eval(n)?));
        rows.push(Row::at(n, "q_hat", v.q_hats[i]));
        rows.push(Row::at(n, "ratio", v.ratios[i]));
    }
    rows.push(Row::summary("liminf_proxy", v.liminf_proxy));
    rows.push(Row::summary("limsup_proxy", v.limsup_proxy));
    rows.push(Row::summary("verdict", v.verdict.as_str()));
    if let Some(curve) = analytic_limit(&cfg.model, scheds.risk_aversion.eval(last)?) {
        match curve.and_then(|c| indiff::corollary_limit(&c, p_tilde.eval(last)?)) {
            Ok(ell) => rows.push(Row::summary("ell_star", ell)),
            Err(e) => rows.push(Row::summary("ell_star_error", e.name())),
        }
    }
    Ok(rows)
}

fn position(cfg: &ScenarioConfig, model: &dyn MarketSequenceModel, scheds: &Schedules) -> TaskResult {
    let p_tilde = cfg.schedules.p_tilde.as_ref().expect("checked at parse time");
    per_index(&cfg.grid.n, |n| {
        let mut rows = scaling_rows(n, scheds)?;
        let c = model.curve(n, scheds.risk_aversion.eval(n)?)?;
        let p = p_tilde.eval(n)?;
        let res = optimal_position(&c, p, cfg.tolerances.optimizer)?;
        rows.push(Row::at(n, "p_tilde", p));
        rows.push(Row::at(n, "q_hat", res.q_hat));
        rows.push(Row::at(n, "side", res.side.as_str()));
        rows.push(Row::at(n, "objective", res.objective));
        rows.push(Row::at(n, "locally_optimal", res.locally_optimal));
        Ok(rows)
    })
}

fn equilibrium(cfg: &ScenarioConfig, model: &dyn MarketSequenceModel, scheds: &Schedules) -> TaskResult {
    let eq = cfg.equilibrium.as_ref().expect("checked at parse time");
    let tol = cfg.tolerances.equilibrium;
    let n_list = &cfg.grid.n;
    let mut rows = Vec::new();
    if n_list.len() >= 2 {
        let study = pepq_limit_study(model, scheds, &eq.investor1, &eq.investor2, n_list, tol)?;
        for (i, &n) in n_list.iter().enumerate() {
            rows.extend(scaling_rows(n, scheds)?);
            rows.extend(equilibrium_rows(n, &study.results[i], study.ratio.values[i]));
            rows.push(Row::at(n, "d_n", study.d_values[i]));
        }
        rows.push(Row::summary("p_star_limit", study.p_star.limit_estimate));
        rows.push(Row::summary("ratio_limit", study.ratio.limit_estimate));
        rows.push(Row::summary("price_shift", study.price_shift));
    } else {
        let n = n_list[0];
        let c = model.curve(n, scheds.risk_aversion.eval(n)?)?;
        let res = pepq_solve(&c, &eq.investor1.at(n)?, &eq.investor2.at(n)?, tol)?;
        let r = scheds.rate.eval(n)?;
        rows.extend(scaling_rows(n, scheds)?);
        rows.extend(equilibrium_rows(n, &res, res.q_star / r));
        rows.push(Row::at(n, "d_n", c.d_n()));
    }
    Ok(rows)
}

fn equilibrium_rows(n: u64, res: &indiff::EquilibriumResult, ratio: f64) -> Vec<Row> {
    let mut rows = vec![
        Row::at(n, "p_star", res.p_star),
        Row::at(n, "q_star", res.q_star),
        Row::at(n, "ratio", ratio),
        Row::at(n, "residual", res.residual),
    ];
    if let Some(w) = &res.warning {
        rows.push(Row::at(n, "warning", w.clone()));
    }
    rows
}

fn sweep(cfg: &ScenarioConfig, model: &dyn MarketSequenceModel, scheds: &Schedules) -> TaskResult {
    per_index(&cfg.grid.n, |n| {
        let mut rows = scaling_rows(n, scheds)?;
        let r = scheds.rate.eval(n)?;
        let c = model.curve(n, scheds.risk_aversion.eval(n)?)?;
        for &ell in &cfg.grid.ell {
            let e = c.eval(ell * r)?;
            rows.push(Row::at(n, keyed("scaled_price", "ell", ell), e.value));
            if let Some(se) = e.stderr {
                rows.push(Row::at(n, keyed("stderr", "ell", ell), se));
            }
        }
        Ok(rows)
    })
}

fn pde(cfg: &ScenarioConfig, params: &TransCostParams) -> TaskResult {
    let mut rows = vec![Row::summary("black_scholes", params.black_scholes()?)];
    let psi = psi_at_spot(params, &cfg.grid.b)?;
    for (b, v) in cfg.grid.b.iter().zip(psi) {
        rows.push(Row::summary(keyed("psi", "b", *b), v));
    }
    if let Some(p_tilde) = &cfg.schedules.p_tilde {
        let a = match &cfg.schedules.risk_aversion {
            Some(s) => s.eval(1)?,
            None => 1.0,
        };
        let p = p_tilde.eval(1)?;
        let pde_cfg = &cfg.pde;
        let curve = transaction_limit_curve(params, a, &default_b_nodes(pde_cfg.b_max, pde_cfg.b_nodes))?;
        let res = optimal_sale_quantity(&curve, p, cfg.tolerances.optimizer)?;
        let scan = brute_force_sale_quantity(&curve, p, pde_cfg.scan_max, pde_cfg.scan_points)?;
        rows.push(Row::summary("sale_p_tilde", p));
        rows.push(Row::summary("sale_q_hat", res.q_hat));
        rows.push(Row::summary("sale_ask_price", curve.eval(res.q_hat)?));
        rows.push(Row::summary("sale_q_scan", scan));
    }
    Ok(rows)
}
