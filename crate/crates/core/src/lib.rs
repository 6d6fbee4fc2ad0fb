//! Annealed spin models with continuous single-spin measures on
//! generalized random graphs.
//!
//! The thermodynamic limit reduces to a mean-field fixed point. For a
//! rank-2 kernel c + θ g(σ)g(σ') this is the scalar equation
//! m/θ = E^{sb}[ν_{Wm+h}(g)]; general kernels go through the functional
//! map V ↦ K ν̄. Around θ_c the order parameter follows power laws whose
//! exponents depend on the first negative cumulant of g and on the weight
//! tail, and [`critical`] fits them. [`simulate`] gives finite-N ground
//! truth by enumeration and Monte Carlo.
//!
//! ```
//! use annealed_grg::{theta_c, solve_m, ModelSpec, Observable, SpinMeasure, WeightModel};
//!
//! let w = WeightModel::deterministic(1.0).unwrap();
//! let model = ModelSpec::rank2(SpinMeasure::ising(), Observable::identity(), 10.0, 2.0, w, 0.0).unwrap();
//! assert!((theta_c(&model).unwrap() - 1.0).abs() < 1e-12);
//! let fp = solve_m(&model, 1e-12).unwrap();
//! assert!((fp.m_plus - 2.0 * fp.m_plus.tanh()).abs() < 1e-10);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod measures;
pub mod quadrature;
pub mod weights;
pub mod kernels;
pub mod meanfield;
pub mod critical;
pub mod simulate;
pub mod cli;

pub use critical::{fit_beta, fit_delta, magnetization_curve, predicted_exponents, Control, ExponentFit};
pub use error::{Error, Result};
pub use kernels::{ising_to_rank2, rank2_to_ising, uniqueness_bound, GridKernel, Kernel, Rank2Kernel};
pub use meanfield::{
    phi, pressure_general, pressure_rank2, solve_m, solve_v_general, theta_c, ModelSpec, PicardOptions, Start,
};
pub use measures::{concavity_scan, cumulant, detect_k, MeasureSpec, Observable, SpinMeasure};
pub use simulate::{exact_annealed, run_mc, GrgInstance, McOptions};
pub use weights::{TailRegime, WeightModel, WeightSpec};
