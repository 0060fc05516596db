//! Exponential-utility indifference prices across sequences of incomplete
//! markets: price curves, optimal positions, their large-position scaling
//! limits and two-investor partial equilibria.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod curve;
pub mod equilibrium;
pub mod error;
pub mod models;
pub mod numerics;
pub mod position;
pub mod schedule;

pub use curve::{
    ra_switch_gap, total_price, verify_ra_switch, Bound, EvalMode, Extent, IndexRange, LimitCurve, MarketSequenceModel,
    Orientation, PriceCurve, PriceEval,
};
pub use error::{Error, Result};
pub use schedule::{RateSchedule, RiskAversionSchedule, Schedule, Schedules};
pub use asymptotics::{
    check_strict_concavity, corollary_limit, estimate_limit_curve, probe_delta, rate_ratio_sequence,
    scaled_price_sequence, ConvergenceDiagnostic, DeltaProbe, RateVerdict, Verdict,
};
pub use equilibrium::{
    endowed_total_price, pepq_closed_form, pepq_limit_study, pepq_solve, Endowment, EquilibriumResult,
    InvestorSchedule, InvestorSpec,
};
pub use position::{
    brute_force_position, brute_force_sale_quantity, optimal_position, optimal_sale_quantity, validate_limit_curve,
    validate_price_curve, OptimalPositionResult, Side,
};
