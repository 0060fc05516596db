//! Concrete market-sequence families and reference prices.

pub mod basis_risk;
pub mod black_scholes;
pub mod default_bond;
pub mod gaussian;
pub mod ldp;
pub mod transaction;

pub use basis_risk::{
    basis_risk_limit, basis_risk_limit_curve, basis_risk_price_mc, basis_risk_price_quadrature, BasisRiskMethod,
    BasisRiskModel, BasisRiskParams, Coefficient, McConfig, Payoff,
};
pub use black_scholes::black_scholes_price;
pub use default_bond::{
    default_bond_f, default_bond_limit_curve, default_bond_log_f, default_bond_price, DefaultBondModel,
    DefaultBondParams, FixedPoint,
};
pub use gaussian::{gaussian_limit_curve, gaussian_optimal_position, gaussian_price, GaussianModel, GaussianResidualParams};
pub use ldp::{ldp_limit_price, RateFunction};
pub use transaction::{transaction_limit_curve, transaction_psi, PdeConfig, TransCostParams};
