//! Distribution of `|Z| = ||X| - |Y||` for correlated Gaussians
//! `X ~ N(0,1)`, `Y ~ N(0, alpha^2)` with correlation `rho`.
//!
//! For `|rho| < 1` and `alpha != 0` the density is a two-term erf-bracketed
//! expression over `Lambda_+ = alpha^2 + 2 rho alpha + 1` and
//! `Lambda_- = alpha^2 - 2 rho alpha + 1`; the `rho = 1` and `alpha = 0`
//! parameter edges degenerate to scaled half-normal laws, which are handled
//! in closed form.

use crate::error::{Error, Result};
use crate::numerics;
use crate::specfn::{erf, erf_inv, erfc};
use serde::{Deserialize, Serialize};

/// Parameter switch below which the closed-form degenerate branches are used;
/// the general branch carries a `1/sqrt(1 - rho^2)` factor that destroys
/// quadrature accuracy closer to the edge.
const BRANCH_EPS: f64 = 1e-7;

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Correlation/scale pair `(rho, alpha)` of the amplitude discrepancy
/// distribution, both restricted to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpDistParams {
    rho: f64,
    alpha: f64,
}

impl AmpDistParams {
    pub fn new(rho: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) || !rho.is_finite() {
            return Err(Error::domain(format!("rho must lie in [0, 1], got {rho}")));
        }
        if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
            return Err(Error::domain(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(Self { rho, alpha })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `Lambda_+ = alpha^2 + 2 rho alpha + 1`.
    pub fn lambda_plus(&self) -> f64 {
        self.alpha * self.alpha + 2.0 * self.rho * self.alpha + 1.0
    }

    /// `Lambda_- = alpha^2 - 2 rho alpha + 1`.
    pub fn lambda_minus(&self) -> f64 {
        self.alpha * self.alpha - 2.0 * self.rho * self.alpha + 1.0
    }

    /// `sqrt(1 + alpha^2 - 2 alpha rho)`: the sign-invariant distance between
    /// the unit vectors realizing these parameters.
    pub fn dist1_normalizer(&self) -> f64 {
        self.lambda_minus().sqrt()
    }

    /// Selects the `rho = 1` closed-form branch.
    pub fn degenerate_rho(&self) -> bool {
        1.0 - self.rho < BRANCH_EPS
    }

    /// Selects the `alpha = 0` closed-form branch.
    pub fn degenerate_alpha(&self) -> bool {
        self.alpha < BRANCH_EPS
    }

    /// The `(rho, alpha) = (1, 1)` corner is a point mass at zero and is
    /// rejected by every evaluation.
    pub fn is_point_mass(&self) -> bool {
        self.degenerate_rho() && 1.0 - self.alpha < BRANCH_EPS
    }

    /// Upper integration cutoff: mass beyond `12 sqrt(Lambda_+)` is below
    /// 1e-30.
    pub fn z_max(&self) -> f64 {
        12.0 * self.lambda_plus().sqrt()
    }

    fn reject_point_mass(&self) -> Result<()> {
        if self.is_point_mass() {
            Err(Error::degenerate(
                "(rho, alpha) = (1, 1) is a point mass at zero".to_string(),
            ))
        } else {
            Ok(())
        }
    }

    /// Scale of the half-normal closed-form branch, when one applies.
    fn half_normal_scale(&self) -> Option<f64> {
        if self.degenerate_alpha() {
            Some(1.0)
        } else if self.degenerate_rho() {
            Some(1.0 - self.alpha)
        } else {
            None
        }
    }
}

/// Density of `||X| - |Y||` at `z >= 0`.
pub fn pdf_abs_diff(z: f64, p: AmpDistParams) -> Result<f64> {
    p.reject_point_mass()?;
    if !(z >= 0.0) {
        return Err(Error::domain(format!("density requires z >= 0, got {z}")));
    }
    if let Some(c) = p.half_normal_scale() {
        return Ok(SQRT_2_OVER_PI / c * (-z * z / (2.0 * c * c)).exp());
    }
    Ok(pdf_general(z, &p))
}

/// General-branch density. The paper-form brackets `2 - erf(..) - erf(..)`
/// are evaluated as `erfc(..) + erfc(..)` so the near-degenerate regimes do
/// not cancel; the second erf argument is simplified to
/// `z (alpha +- rho) / sqrt(2 Lambda_+- (1 - rho^2))` (same algebra).
fn pdf_general(z: f64, p: &AmpDistParams) -> f64 {
    let (rho, alpha) = (p.rho, p.alpha);
    let q = 1.0 - rho * rho;
    let mut acc = 0.0;
    for sign in [1.0, -1.0] {
        let lambda = alpha * alpha + sign * 2.0 * rho * alpha + 1.0;
        let scale = (2.0 * lambda * q).sqrt();
        let a = z * (1.0 + sign * rho * alpha) / (alpha * scale);
        let b = z * (alpha + sign * rho) / scale;
        acc += (-z * z / (2.0 * lambda)).exp()
            / (2.0 * std::f64::consts::PI * lambda).sqrt()
            * (erfc(a) + erfc(b));
    }
    acc
}

/// Mass of the distribution on `[a, b]` (general branch only), by adaptive
/// quadrature.
fn mass_segment(p: &AmpDistParams, a: f64, b: f64, tol: f64) -> f64 {
    numerics::integrate(|z| pdf_general(z, p), a, b, tol)
}

/// CDF `G(t)`, absolute error below 1e-9; monotone nondecreasing in `t`.
pub fn cdf_abs_diff(t: f64, p: AmpDistParams) -> Result<f64> {
    p.reject_point_mass()?;
    if !(t >= 0.0) {
        return Err(Error::domain(format!("CDF requires t >= 0, got {t}")));
    }
    if let Some(c) = p.half_normal_scale() {
        return Ok(erf(t / (c * std::f64::consts::SQRT_2)));
    }
    let upper = t.min(p.z_max());
    let mass = mass_segment(&p, 0.0, upper, 1e-11);
    Ok(mass.clamp(0.0, 1.0))
}

/// Quantile `G^{-1}(prob)` for `prob` in (0, 1), by bracketing bisection on
/// the monotone CDF to `|G(t) - prob| <= 1e-9`.
pub fn quantile_abs_diff(prob: f64, p: AmpDistParams) -> Result<f64> {
    p.reject_point_mass()?;
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::domain(format!(
            "quantile requires prob in (0, 1), got {prob}"
        )));
    }
    if let Some(c) = p.half_normal_scale() {
        return Ok(c * std::f64::consts::SQRT_2 * erf_inv(prob)?);
    }
    numerics::quantile_bisect(
        |a, b| mass_segment(&p, a, b, 1e-12),
        p.z_max(),
        prob,
        1e-9,
    )
}

/// Partial first moment `int_0^t z g(z) dz`; pass `t = f64::INFINITY` for the
/// full first moment `E||X| - |Y||`.
pub fn partial_first_moment_amp(t: f64, p: AmpDistParams) -> Result<f64> {
    p.reject_point_mass()?;
    if !(t >= 0.0) {
        return Err(Error::domain(format!(
            "partial moment requires t >= 0, got {t}"
        )));
    }
    if let Some(c) = p.half_normal_scale() {
        let tail = if t.is_infinite() {
            0.0
        } else {
            (-t * t / (2.0 * c * c)).exp()
        };
        return Ok(c * SQRT_2_OVER_PI * (1.0 - tail));
    }
    let upper = t.min(p.z_max());
    Ok(numerics::integrate(|z| z * pdf_general(z, &p), 0.0, upper, 1e-11).max(0.0))
}
