//! Neural and conventional INGARCH models for count time series.
//!
//! The conditional mean of `y_t` is a response function of a constant,
//! lagged counts, lagged conditional means and optional covariates. The
//! response is either a single-hidden-layer network or a "degenerate"
//! network with the hidden layer removed, which recovers conventional
//! log-linear or softplus INGARCH models. Conditional distributions are
//! Poisson, generalized Poisson, binomial and zero-inflated binomial.
//!
//! ```
//! use ningarch::{Activation, CountSeries, Family, FitOptions, ModelSpec, Response};
//!
//! let y = vec![0, 1, 3, 2, 0, 1, 4, 2, 1, 0, 2, 3, 1, 0, 1, 2, 0, 0, 1, 3];
//! let series = CountSeries::new(y).unwrap();
//! let spec = ModelSpec::new(1, 0, Response::degenerate(Activation::Softplus), Family::Poisson);
//! let fit = ningarch::fit(&series, &spec, &FitOptions::default().with_restarts(4)).unwrap();
//! assert_eq!(fit.k_params, 2);
//! ```

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod activations;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod model;
pub mod network;
pub mod optim;
pub mod series;
pub mod simulation;

pub use activations::Activation;
pub use diagnostics::{Covariance, EffectCurve, ResidualSummary};
pub use distributions::{CountDistribution, Family};
pub use error::{Error, Result};
pub use estimation::{evaluate, fit, FitOptions, FitResult, RestartRecord, SampleAlignment};
pub use model::{CovariateScaling, ModelSpec};
pub use network::{Network, Response};
pub use series::{CountSeries, IngestOptions};
pub use simulation::{simulate, SimConfig};
