//! Numerical laboratory for phase retrieval under adversarial sparse outliers.
//!
//! The crate is organised around the pipeline that the experiments drive:
//!
//! * [`specfn`] — scalar special functions (`erf`, `erfc`, the modified
//!   Bessel function `K0`) that the closed-form densities need.
//! * [`dist_amp`] — density/CDF/quantile of `||X| - |Y||` for correlated
//!   Gaussians `X ~ N(0,1)`, `Y ~ N(0, alpha^2)`.
//! * [`dist_int`] — density/CDF/quantile of `|X * Y|` for correlated standard
//!   Gaussians.
//! * [`balance`] — balance functions of both distributions, their minima over
//!   the parameter square, and root-finding for the sharp corruption
//!   thresholds (~0.2043 for amplitude, ~0.1185 for intensity measurements).
//! * [`measure`] — Gaussian sampling ensembles, amplitude/intensity forward
//!   maps, sign-invariant metrics, corruption assembly and the adaptive
//!   adversary constructions.
//! * [`solver`] — nonlinear least-absolute-deviation solvers with spectral
//!   initialization and a geometrically decaying subgradient method.
//! * [`verify`] — exact worst-subset margins, DKW quantile sandwiches,
//!   stability corridors and Monte-Carlo cross-validation utilities.

pub mod balance;
pub mod dist_amp;
pub mod dist_int;
pub mod error;
pub mod measure;
pub(crate) mod numerics;
pub mod solver;
pub mod specfn;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use types::{derive_seed, MeasurementKind};

#[cfg(test)]
pub(crate) mod test_support {
    use crate::balance::{sharp_threshold, ThresholdResult};
    use crate::types::MeasurementKind;
    use std::sync::OnceLock;

    /// Threshold computations are the slow part of several suites; share one
    /// per kind across the whole test binary.
    pub fn cached_threshold(kind: MeasurementKind) -> &'static ThresholdResult {
        static AMP: OnceLock<ThresholdResult> = OnceLock::new();
        static INT: OnceLock<ThresholdResult> = OnceLock::new();
        match kind {
            MeasurementKind::Amplitude => {
                AMP.get_or_init(|| sharp_threshold(kind).expect("amplitude threshold"))
            }
            MeasurementKind::Intensity => {
                INT.get_or_init(|| sharp_threshold(kind).expect("intensity threshold"))
            }
        }
    }
}
