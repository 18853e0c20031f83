//! Wrapped Gaussian process regression for angular responses.
//!
//! Angles `y` in `[0, 2pi)` are modelled as a latent Gaussian process `z`
//! with a linear mean, unwrapped by integer wrapping numbers `k` that are
//! non-decreasing in the input: `y = (z - 2pi k + eps) mod 2pi` with
//! Student-t noise. The wrapping numbers are a step function whose jump
//! locations are sampled directly, and `z` is updated by elliptical slice
//! sampling.

// Negated comparisons are deliberate: they reject NaN along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod ess;
pub mod experiment;
pub mod fit;
pub mod gp;
pub mod hier;
pub mod hyper;
pub mod io;
pub mod likelihood;
pub mod metrics;
pub mod partition;
pub mod predict;
pub mod synthetic;

pub use baselines::{fit_coupled, fit_ordinary, BaselineConfig};
pub use data::{wrap_angle, Dataset, Rescale, TestGroup};
pub use error::{Error, Result};
pub use experiment::{run_benchmark, BenchConfig, BenchFunction, BenchRow};
pub use fit::{fit, initialize, FitConfig, Method, ModelState, Noise, SampleRecord, Trace};
pub use gp::{CovMatrix, KernelParams};
pub use hier::{hier_fit, predict_delta, HierConfig, HierTrace};
pub use hyper::{MeanParams, PriorConfig, StepSizes};
pub use likelihood::TLikParams;
pub use metrics::{circ_residual, crps, rmse_circular, rmse_circular_sqrt, ScoreReport};
pub use partition::WrapPartition;
pub use predict::{predict, PredictionResult};
