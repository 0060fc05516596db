use thiserror::Error;

/// Errors raised by pricing, optimization and numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("market index {n} outside declared range [{lo}, {hi}]")]
    IndexOutOfRange { n: u64, lo: u64, hi: u64 },

    #[error("unbounded objective: no bracket found after {doublings} doublings")]
    UnboundedObjective { doublings: u32 },

    #[error("ODE blow-up at t = {t}")]
    OdeBlowUp { t: f64 },

    #[error("S-table construction failed: {0}")]
    STableFailed(String),

    #[error("model assumption violated: {0}")]
    ModelAssumption(String),

    #[error("quadrature unavailable: {0}")]
    QuadratureUnavailable(String),

    #[error("positivity lost in ODE solve at t = {t}; increase the step count")]
    PositivityLost { t: f64 },

    #[error("PDE step failure: {0}")]
    PdeStepFailure(String),

    #[error("ell = {ell} outside effective domain of the rate function")]
    OutsideEffectiveDomain { ell: f64 },

    #[error("price {price} not arbitrage-free: outside ({lower}, {upper})")]
    NotArbitrageFree { price: f64, lower: f64, upper: f64 },

    #[error("no interior optimum: {0}")]
    NoInteriorOptimum(String),

    #[error("price {price} outside sellable range ({lower}, {upper})")]
    OutsideSellableRange { price: f64, lower: f64, upper: f64 },

    #[error("non-unique limit candidates: {0}")]
    NonUniqueLimit(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Stable short name, used by the CLI when reporting failures.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain_error",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::UnboundedObjective { .. } => "unbounded_objective",
            Error::OdeBlowUp { .. } => "ode_blow_up",
            Error::STableFailed(_) => "s_table_failed",
            Error::ModelAssumption(_) => "model_assumption_violated",
            Error::QuadratureUnavailable(_) => "quadrature_unavailable",
            Error::PositivityLost { .. } => "positivity_lost",
            Error::PdeStepFailure(_) => "pde_step_failure",
            Error::OutsideEffectiveDomain { .. } => "outside_effective_domain",
            Error::NotArbitrageFree { .. } => "price_not_arbitrage_free",
            Error::NoInteriorOptimum(_) => "no_interior_optimum",
            Error::OutsideSellableRange { .. } => "price_outside_sellable_range",
            Error::NonUniqueLimit(_) => "non_unique_limit_candidates",
            Error::Config(_) => "invalid_configuration",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
