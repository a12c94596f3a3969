//! Higher-order Allan variance for atomic clock models of arbitrary order.
//!
//! The clock reading deviation of an `n`-th order clock is the output of a
//! chain of `n` integrators driven by independent white Gaussian noises. Its
//! `N`-th order difference, normalized by `r_0 tau^2`, generalizes the Allan
//! (`N = 2`) and Hadamard (`N = 3`) variances. This crate provides
//!
//! * [`model`]: the continuous model and its exact discrete-time equivalent;
//! * [`coeffs`]: every combinatorial constant, in exact rational arithmetic;
//! * [`analytic`]: the closed-form variance `sigma2_N(tau; t)`;
//! * [`simulate`]: exact sampled paths with reproducible seeding;
//! * [`estimate`]: the block estimator and stationarity diagnostics;
//! * [`verify`]: a suite that checks the theory against independent routes.
//!
//! ```
//! use avar::{analytic, estimate, simulate, ClockModel, SimulationConfig};
//!
//! // Random-walk frequency on top of white frequency noise.
//! let model = ClockModel::from_noise(vec![1.0, 0.01]).unwrap();
//! let exact = analytic::allan_variance_analytic(&model, 2, 1.0, 0.0).unwrap();
//! assert!((exact.value - (1.0 + 0.01 / 3.0)).abs() < 1e-15);
//!
//! let path = simulate::simulate_realization(&SimulationConfig::new(model, 1.0, 20_001, 1), 0).unwrap();
//! let est = estimate::empirical_allan(&path, 2, 1).unwrap();
//! assert!((est.value / exact.value - 1.0).abs() < 0.1);
//! ```

pub mod analytic;
pub mod coeffs;
mod error;
pub mod estimate;
pub mod io;
pub mod model;
pub mod simulate;
pub mod verify;

pub use analytic::{AllanExpression, CurveKind, VarianceCurve, VariancePoint};
pub use error::{Error, Result};
pub use estimate::{AggregatedSeries, StationarityReport, Verdict};
pub use model::{ClockModel, DiscreteModel};
pub use simulate::{SimulationConfig, TimeSeries};

// The guide's code listings compile and run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/clock-model.md")]
    mod clock_model {}
    #[doc = include_str!("../../../book/src/coefficients.md")]
    mod coefficients {}
    #[doc = include_str!("../../../book/src/analytic.md")]
    mod analytic {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
