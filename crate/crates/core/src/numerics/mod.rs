//! Numerical kernels shared by the models and solvers.

pub mod interp;
pub mod lambert;
pub mod minimize;
pub mod ode;
pub mod quadrature;
pub mod sfunc;
pub mod tridiag;

pub use interp::MonotoneCubic;
pub use lambert::{solve_x_exp_x, solve_x_exp_x_log};
pub use minimize::{minimize_unimodal, secant_polish, Minimum};
pub use ode::{rk4_integrate, rk4_step};
pub use quadrature::{gauss_hermite_expectation, NormalRule};
pub use sfunc::{build_s_table, SFunctionTable};
pub use tridiag::solve_tridiagonal;
