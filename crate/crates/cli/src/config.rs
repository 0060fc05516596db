//! Scenario configuration: a TOML document validated against the types
//! below, with unknown keys rejected.

use std::path::PathBuf;

use indiff::models::{BasisRiskMethod, BasisRiskParams, DefaultBondParams, TransCostParams};
use indiff::{InvestorSchedule, Schedule};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Price,
    Curve,
    Limit,
    Rates,
    Position,
    Equilibrium,
    Pde,
    Sweep,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Price => "price",
            Task::Curve => "curve",
            Task::Limit => "limit",
            Task::Rates => "rates",
            Task::Position => "position",
            Task::Equilibrium => "equilibrium",
            Task::Pde => "pde",
            Task::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub task: Task,
    #[serde(default)]
    pub seed: Option<u64>,
    pub model: ModelConfig,
    #[serde(default)]
    pub schedules: ScheduleConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub equilibrium: Option<EquilibriumConfig>,
    #[serde(default)]
    pub pde: PdeTaskConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Gaussian {
        d: Schedule,
        gamma2: Schedule,
        /// `lim d_n`, enabling the analytic limit curve.
        #[serde(default)]
        limit_d: Option<f64>,
    },
    BasisRisk {
        #[serde(default = "quadrature")]
        method: BasisRiskMethod,
        params: BasisRiskParams,
    },
    DefaultBond {
        params: DefaultBondParams,
    },
    Transaction {
        params: TransCostParams,
    },
}

fn quadrature() -> BasisRiskMethod {
    BasisRiskMethod::Quadrature
}

impl ModelConfig {
    pub fn family(&self) -> &'static str {
        match self {
            ModelConfig::Gaussian { .. } => "gaussian",
            ModelConfig::BasisRisk { .. } => "basis_risk",
            ModelConfig::DefaultBond { .. } => "default_bond",
            ModelConfig::Transaction { .. } => "transaction",
        }
    }
}

/// Overrides of the model's default schedules, and the exogenous price.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub risk_aversion: Option<Schedule>,
    pub rate: Option<Schedule>,
    pub p_tilde: Option<Schedule>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub n: Vec<u64>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub ell: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub cauchy: f64,
    pub optimizer: f64,
    pub equilibrium: f64,
    pub validation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cauchy: 1e-4,
            optimizer: 1e-8,
            equilibrium: 1e-10,
            validation: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumConfig {
    pub investor1: InvestorSchedule,
    pub investor2: InvestorSchedule,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeTaskConfig {
    /// Largest `b` of the cached limit curve used for the sale quantity.
    pub b_max: f64,
    pub b_nodes: usize,
    /// Upper end of the grid scan cross-checking the sale quantity.
    pub scan_max: f64,
    pub scan_points: usize,
}

impl Default for PdeTaskConfig {
    fn default() -> Self {
        PdeTaskConfig {
            b_max: 10.0,
            b_nodes: 17,
            scan_max: 100.0,
            scan_points: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Option<Format>,
    pub path: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Cross-field checks the type system does not express.
    fn check(&self) -> Result<(), String> {
        let needs_n = !matches!(self.task, Task::Pde);
        if needs_n && self.grid.n.is_empty() {
            return Err(format!("task `{}` needs a non-empty `grid.n`", self.task.as_str()));
        }
        if self.grid.n.contains(&0) {
            return Err("`grid.n` entries must be positive".into());
        }
        if self.grid.n.windows(2).any(|w| w[1] <= w[0]) {
            return Err("`grid.n` must be strictly increasing".into());
        }
        let transaction = matches!(self.model, ModelConfig::Transaction { .. });
        match self.task {
            Task::Pde if !transaction => {
                return Err("task `pde` needs `model.family = \"transaction\"`".into());
            }
            Task::Pde => {
                if self.grid.b.is_empty() {
                    return Err("task `pde` needs a non-empty `grid.b`".into());
                }
            }
            _ if transaction => {
                return Err(format!(
                    "family `transaction` supports only task `pde`, not `{}`",
                    self.task.as_str()
                ));
            }
            Task::Price | Task::Curve if self.grid.q.is_empty() => {
                return Err(format!("task `{}` needs a non-empty `grid.q`", self.task.as_str()));
            }
            Task::Limit | Task::Sweep if self.grid.ell.is_empty() => {
                return Err(format!("task `{}` needs a non-empty `grid.ell`", self.task.as_str()));
            }
            Task::Limit | Task::Rates if self.grid.n.len() < 2 => {
                return Err(format!("task `{}` needs at least two `grid.n` entries", self.task.as_str()));
            }
            Task::Rates | Task::Position if self.schedules.p_tilde.is_none() => {
                return Err(format!("task `{}` needs `schedules.p_tilde`", self.task.as_str()));
            }
            Task::Equilibrium if self.equilibrium.is_none() => {
                return Err("task `equilibrium` needs an `[equilibrium]` section".into());
            }
            _ => {}
        }
        let t = &self.tolerances;
        if [t.cauchy, t.optimizer, t.equilibrium, t.validation].iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err("tolerances must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scenario_id = "g"
task = "price"
[model]
family = "gaussian"
d = { kind = "constant", value = 1.0 }
gamma2 = { kind = "power", coef = 1.0, exponent = -1.0 }
[grid]
n = [1]
q = [0.0]
"#;

    #[test]
    fn parses_minimal() {
        let cfg = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.task, Task::Price);
        assert_eq!(cfg.model.family(), "gaussian");
        assert_eq!(cfg.tolerances.cauchy, 1e-4);
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = ScenarioConfig::parse(&MINIMAL.replace("q = [0.0]", "q = [0.0]\nqq = 1")).unwrap_err();
        assert!(err.contains("qq"), "{err}");
        let err = ScenarioConfig::parse(&MINIMAL.replace("d = {", "dd = 2\nd = {")).unwrap_err();
        assert!(err.contains("dd"), "{err}");
    }

    #[test]
    fn missing_family_is_named() {
        let err = ScenarioConfig::parse(&MINIMAL.replace("family = \"gaussian\"\n", "")).unwrap_err();
        assert!(err.contains("family"), "{err}");
    }

    #[test]
    fn cross_field_checks() {
        assert!(ScenarioConfig::parse(&MINIMAL.replace("task = \"price\"", "task = \"rates\"")).is_err());
        assert!(ScenarioConfig::parse(&MINIMAL.replace("task = \"price\"", "task = \"pde\"")).is_err());
        assert!(ScenarioConfig::parse(&MINIMAL.replace("n = [1]", "n = [3, 2]")).is_err());
    }
}
