//! Local regularity estimation and adaptive local-polynomial denoising for
//! samples of noisy, irregularly observed curves.

pub mod bench;
pub mod curve;
pub mod cv;
pub mod io;
pub mod kernel;
pub mod regularity;
pub mod simulate;
pub mod smoother;

pub use curve::{Curve, CurveError, FunctionalSample, K0Rule};
pub use kernel::{Epanechnikov, Kernel};
pub use regularity::{estimate_regularity, RegularityConfig, RegularityError, RegularityEstimate};
pub use smoother::{fit_at, smooth_online, SmootherError, SmootherSpec};
