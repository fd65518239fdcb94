//! Distribution of `|Z| = |X * Y|` for correlated standard Gaussians with
//! correlation `rho`.
//!
//! For `0 <= rho < 1` the density is
//! `(2 / (pi sqrt(1-rho^2))) cosh(rho z / (1-rho^2)) K0(z / (1-rho^2))`,
//! which diverges logarithmically at the origin; at `rho = 1` the law is
//! chi-square with one degree of freedom (`z^{-1/2}` singularity).

use crate::error::{Error, Result};
use crate::numerics;
use crate::specfn::{bessel_k0_scaled, erf, erf_inv};
use serde::{Deserialize, Serialize};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Width (in units of `w = z / (1 - rho^2)`) of the leading interval on which
/// the CDF integrates the log singularity analytically.
const SINGULAR_W: f64 = 1e-4;

/// Correlation parameter `rho` in `[0, 1]` of the intensity discrepancy
/// distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntDistParams {
    rho: f64,
}

impl IntDistParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) || !rho.is_finite() {
            return Err(Error::domain(format!("rho must lie in [0, 1], got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Selects the chi-square branch at `rho = 1`.
    pub fn degenerate(&self) -> bool {
        1.0 - self.rho < 1e-12
    }

    /// Upper integration cutoff `60 (1 - rho^2) + 60`; the residual mass is
    /// below 1e-12 for every `rho`.
    pub fn z_max(&self) -> f64 {
        let q = 1.0 - self.rho * self.rho;
        60.0 * q + 60.0
    }
}

/// Density of `|X * Y|` at `z > 0`.
///
/// Evaluated as `(1/(pi sqrt(q))) K0e(w) (exp(-(1-rho) w) + exp(-(1+rho) w))`
/// with `w = z / q`, `q = 1 - rho^2` and `K0e` the exponentially scaled
/// Bessel function, so the `cosh * K0` product never overflows.
pub fn pdf_abs_prod(z: f64, p: IntDistParams) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::domain(format!("density requires z > 0, got {z}")));
    }
    if p.degenerate() {
        return Ok((-0.5 * z).exp() / (2.0 * std::f64::consts::PI * z).sqrt());
    }
    Ok(pdf_general(z, &p))
}

fn pdf_general(z: f64, p: &IntDistParams) -> f64 {
    let q = 1.0 - p.rho * p.rho;
    let w = z / q;
    let k0e = bessel_k0_scaled(w).expect("w > 0");
    let damp = (-(1.0 - p.rho) * w).exp() + (-(1.0 + p.rho) * w).exp();
    k0e * damp / (std::f64::consts::PI * q.sqrt())
}

/// Probability mass on `[a, b]` for the general branch. A leading interval of
/// the distribution (in `w` units) is integrated analytically via the
/// small-argument expansion `K0(w) ~ -ln(w/2) - gamma`, the remainder by
/// adaptive quadrature.
fn mass_segment(p: &IntDistParams, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let q = 1.0 - p.rho * p.rho;
    let mut total = 0.0;
    let mut lo = a;
    if a == 0.0 {
        let delta = (SINGULAR_W * q).min(b);
        let w0 = delta / q;
        total += 2.0 * q.sqrt() / std::f64::consts::PI
            * (w0 - w0 * (0.5 * w0).ln() - EULER_GAMMA * w0);
        lo = delta;
    }
    if b > lo {
        total += numerics::integrate(|z| pdf_general(z, p), lo, b, tol);
    }
    total
}

/// CDF `F(t)`, absolute error below 1e-9.
pub fn cdf_abs_prod(t: f64, p: IntDistParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("CDF requires t >= 0, got {t}")));
    }
    if p.degenerate() {
        // chi-square(1): P(|Z| <= t) = erf(sqrt(t/2))
        return Ok(erf((0.5 * t).sqrt()));
    }
    let upper = t.min(p.z_max());
    Ok(mass_segment(&p, 0.0, upper, 1e-11).clamp(0.0, 1.0))
}

/// Quantile `F^{-1}(prob)` for `prob` in (0, 1), bisection on the monotone
/// CDF to `|F(t) - prob| <= 1e-9`.
pub fn quantile_abs_prod(prob: f64, p: IntDistParams) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::domain(format!(
            "quantile requires prob in (0, 1), got {prob}"
        )));
    }
    if p.degenerate() {
        let x = erf_inv(prob)?;
        return Ok(2.0 * x * x);
    }
    numerics::quantile_bisect(
        |a, b| mass_segment(&p, a, b, 1e-12),
        p.z_max(),
        prob,
        1e-9,
    )
}

/// Partial first moment `int_0^t z f(z) dz`; `t = f64::INFINITY` yields the
/// full first moment `E|X * Y| = (2/pi)(sqrt(1-rho^2) + rho arcsin rho)`.
pub fn partial_first_moment_int(t: f64, p: IntDistParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!(
            "partial moment requires t >= 0, got {t}"
        )));
    }
    if p.degenerate() {
        if t.is_infinite() {
            return Ok(1.0);
        }
        let a = t.sqrt();
        // int_0^t z f = erf(a/sqrt(2)) - a sqrt(2/pi) exp(-a^2/2)
        return Ok(erf(a / std::f64::consts::SQRT_2)
            - a * SQRT_2_OVER_PI * (-0.5 * a * a).exp());
    }
    let upper = t.min(p.z_max());
    // z * f(z) vanishes at the origin, so plain adaptive quadrature applies
    Ok(numerics::integrate(|z| z * pdf_general(z, &p), 0.0, upper, 1e-11).max(0.0))
}

/// Closed-form full first moment, `(2/pi)(sqrt(1-rho^2) + rho arcsin rho)`.
pub fn full_first_moment_int(p: IntDistParams) -> f64 {
    let rho = p.rho;
    2.0 / std::f64::consts::PI * ((1.0 - rho * rho).sqrt() + rho * rho.asin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_rho() {
        assert!(IntDistParams::new(-0.1).is_err());
        assert!(IntDistParams::new(1.01).is_err());
        assert!(IntDistParams::new(f64::NAN).is_err());
    }

    #[test]
    fn pdf_independent_case_is_k0_over_half_pi() {
        // f(1; rho=0) = (2/pi) K0(1)
        let p = IntDistParams::new(0.0).unwrap();
        assert!((pdf_abs_prod(1.0, p).unwrap() - 0.268_032_482_033_988_55).abs() < 1e-12);
    }

    #[test]
    fn pdf_chi_square_branch() {
        let p = IntDistParams::new(1.0).unwrap();
        assert!((pdf_abs_prod(1.0, p).unwrap() - 0.241_970_724_519_143_35).abs() < 1e-12);
    }

    #[test]
    fn pdf_rejects_nonpositive_z() {
        let p = IntDistParams::new(0.4).unwrap();
        assert!(pdf_abs_prod(0.0, p).is_err());
        assert!(pdf_abs_prod(-1.0, p).is_err());
    }

    #[test]
    fn branch_continuity_near_rho_one() {
        let near = IntDistParams::new(0.9999).unwrap();
        let edge = IntDistParams::new(1.0).unwrap();
        for &z in &[0.5, 1.0, 2.0] {
            let a = pdf_abs_prod(z, near).unwrap();
            let b = pdf_abs_prod(z, edge).unwrap();
            assert!((a - b).abs() <= 1e-2, "continuity at z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn cdf_endpoints() {
        let p = IntDistParams::new(0.9).unwrap();
        assert_eq!(cdf_abs_prod(0.0, p).unwrap(), 0.0);
        assert!((cdf_abs_prod(60.0, p).unwrap() - 1.0).abs() < 1e-8);
        assert!(cdf_abs_prod(-0.5, p).is_err());
    }

    #[test]
    fn cdf_chi_square_value() {
        let p = IntDistParams::new(1.0).unwrap();
        // P(chi2(1) <= 1) = erf(1/sqrt(2))
        assert!((cdf_abs_prod(1.0, p).unwrap() - 0.682_689_492_137_085_9).abs() < 1e-12);
    }

    #[test]
    fn normalization_over_rho_grid() {
        for i in 0..=10 {
            let rho = (i as f64 / 10.0).min(0.99);
            let p = IntDistParams::new(rho).unwrap();
            let total = cdf_abs_prod(p.z_max(), p).unwrap();
            assert!(
                (total - 1.0).abs() < 1e-6,
                "normalization off at rho={rho}: {total}"
            );
        }
        let p = IntDistParams::new(1.0).unwrap();
        assert!((cdf_abs_prod(p.z_max(), p).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quantile_round_trips() {
        let p = IntDistParams::new(0.3).unwrap();
        for &prob in &[0.2, 0.5, 0.95] {
            let t = quantile_abs_prod(prob, p).unwrap();
            let back = cdf_abs_prod(t, p).unwrap();
            assert!((back - prob).abs() < 2e-9, "round trip at {prob}: {back}");
        }
        assert!(quantile_abs_prod(0.0, p).is_err());
        assert!(quantile_abs_prod(1.0, p).is_err());
    }

    #[test]
    fn quantile_chi_square_matches_erf_inversion() {
        let p = IntDistParams::new(1.0).unwrap();
        let got = quantile_abs_prod(0.6827, p).unwrap();
        let x = erf_inv(0.6827).unwrap();
        let want = 2.0 * x * x; // slightly above 1.0
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        assert!((got - 1.0).abs() < 1e-4);
    }

    #[test]
    fn partial_moment_edges_and_closed_form() {
        let p0 = IntDistParams::new(0.0).unwrap();
        assert_eq!(partial_first_moment_int(0.0, p0).unwrap(), 0.0);
        for &(rho, want) in &[
            (0.0, 2.0 / std::f64::consts::PI),
            (0.5, 0.717_995_562_088_458_7),
            (1.0, 1.0),
        ] {
            let p = IntDistParams::new(rho).unwrap();
            let got = partial_first_moment_int(f64::INFINITY, p).unwrap();
            assert!(
                (got - want).abs() < 1e-6,
                "full moment at rho={rho}: {got} vs {want}"
            );
            assert!((full_first_moment_int(p) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn full_moment_closed_form_on_grid() {
        for i in 0..=11 {
            let rho = (i as f64 / 11.0).min(0.99);
            let p = IntDistParams::new(rho).unwrap();
            let got = partial_first_moment_int(f64::INFINITY, p).unwrap();
            let want = full_first_moment_int(p);
            assert!(
                (got - want).abs() < 1e-6,
                "moment identity off at rho={rho}: {got} vs {want}"
            );
        }
    }
}
