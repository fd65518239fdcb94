//! Balance functions of the amplitude and intensity discrepancy
//! distributions, their minima over the parameter region, and the
//! root-finding that produces the sharp corruption thresholds.
//!
//! The balance function splits the first moment of the discrepancy variable
//! at the `(1-s)`-quantile: `lower_part` integrates the smallest
//! `(1-s)`-fraction, `upper_part` the largest `s`-fraction, and
//! `value = lower_part - upper_part`. Its unique zero in `s` (the balance
//! point) marks where the corrupted mass starts to dominate; minimizing over
//! the distribution parameters gives the sharp thresholds `~0.2043`
//! (amplitude) and `~0.1185` (intensity).

use crate::dist_amp::{self, AmpDistParams};
use crate::dist_int::{self, IntDistParams};
use crate::error::{Error, Result};
use crate::numerics;
use crate::types::MeasurementKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Exclusion radius around the degenerate `(rho, alpha) = (1, 1)` corner in
/// the amplitude minimization (the dist1 normalizer vanishes there).
const CORNER_RADIUS: f64 = 1e-4;

/// Coarse grid step of the parameter scan that precedes local refinement.
const GRID_STEP: f64 = 0.02;

/// Parameter tolerance of the local refinement stage.
const REFINE_TOL: f64 = 1e-5;

/// Distribution parameters a balance value refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceParams {
    Amplitude(AmpDistParams),
    Intensity(IntDistParams),
}

impl BalanceParams {
    pub fn rho(&self) -> f64 {
        match self {
            BalanceParams::Amplitude(p) => p.rho(),
            BalanceParams::Intensity(p) => p.rho(),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            BalanceParams::Amplitude(p) => Some(p.alpha()),
            BalanceParams::Intensity(_) => None,
        }
    }
}

/// One evaluation of a balance function at fixed parameters and fraction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BalanceEvaluation {
    pub kind: MeasurementKind,
    pub params: BalanceParams,
    pub fraction: f64,
    /// `M1` or `J1`: first moment of the smallest `(1-s)`-fraction.
    pub lower_part: f64,
    /// `M2` or `J2`: first moment of the largest `s`-fraction.
    pub upper_part: f64,
    /// `lower_part - upper_part`, by construction.
    pub value: f64,
}

fn check_fraction(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::domain(format!("fraction s must lie in [0,1], got {s}")));
    }
    Ok(())
}

/// Amplitude balance function `M(rho, alpha, s)`, normalized by
/// `sqrt(1 + alpha^2 - 2 alpha rho)`.
pub fn balance_amplitude(p: AmpDistParams, s: f64) -> Result<BalanceEvaluation> {
    check_fraction(s)?;
    if p.is_point_mass() {
        return Err(Error::degenerate(
            "balance undefined at (rho, alpha) = (1, 1): normalizer vanishes".to_string(),
        ));
    }
    let norm = p.dist1_normalizer();
    let full = dist_amp::partial_first_moment_amp(f64::INFINITY, p)?;
    let partial = if s <= 0.0 {
        full
    } else if s >= 1.0 {
        0.0
    } else {
        let t = dist_amp::quantile_abs_diff(1.0 - s, p)?;
        dist_amp::partial_first_moment_amp(t, p)?
    };
    let lower = partial / norm;
    let upper = (full - partial) / norm;
    Ok(BalanceEvaluation {
        kind: MeasurementKind::Amplitude,
        params: BalanceParams::Amplitude(p),
        fraction: s,
        lower_part: lower,
        upper_part: upper,
        value: lower - upper,
    })
}

/// Intensity balance function `J(rho, s)`; the dist2 scaling is already
/// factored out, so no normalizer applies.
pub fn balance_intensity(p: IntDistParams, s: f64) -> Result<BalanceEvaluation> {
    check_fraction(s)?;
    let full = dist_int::partial_first_moment_int(f64::INFINITY, p)?;
    let partial = if s <= 0.0 {
        full
    } else if s >= 1.0 {
        0.0
    } else {
        let t = dist_int::quantile_abs_prod(1.0 - s, p)?;
        dist_int::partial_first_moment_int(t, p)?
    };
    Ok(BalanceEvaluation {
        kind: MeasurementKind::Intensity,
        params: BalanceParams::Intensity(p),
        fraction: s,
        lower_part: partial,
        upper_part: full - partial,
        value: partial - (full - partial),
    })
}

fn inside_corner(rho: f64, alpha: f64) -> bool {
    (1.0 - rho).hypot(1.0 - alpha) < CORNER_RADIUS
}

fn amp_balance_value(rho: f64, alpha: f64, s: f64) -> f64 {
    if inside_corner(rho, alpha) {
        return f64::INFINITY;
    }
    let p = AmpDistParams::new(rho, alpha).expect("clamped parameters");
    balance_amplitude(p, s).map(|e| e.value).unwrap_or(f64::INFINITY)
}

/// Minimum of the balance function over the parameter region at fixed `s`:
/// `(rho, alpha) in [0,1]^2` minus the degenerate corner for amplitude,
/// `rho in [0,1]` for intensity. Coarse 0.02-step scan, then local
/// refinement to parameter tolerance 1e-5. Ties break toward the smallest
/// `rho`, then the smallest `alpha`.
pub fn min_balance(kind: MeasurementKind, s: f64) -> Result<(f64, BalanceParams)> {
    check_fraction(s)?;
    let steps = (1.0 / GRID_STEP).round() as usize;
    match kind {
        MeasurementKind::Amplitude => {
            let cells: Vec<(usize, usize)> = (0..=steps)
                .flat_map(|i| (0..=steps).map(move |j| (i, j)))
                .collect();
            let best = cells
                .par_iter()
                .map(|&(i, j)| {
                    let rho = (i as f64 * GRID_STEP).min(1.0);
                    let alpha = (j as f64 * GRID_STEP).min(1.0);
                    (amp_balance_value(rho, alpha, s), rho, alpha)
                })
                .reduce(
                    || (f64::INFINITY, 2.0, 2.0),
                    |a, b| {
                        if (b.0, b.1, b.2) < (a.0, a.1, a.2) {
                            b
                        } else {
                            a
                        }
                    },
                );
            let clamp = |v: f64| v.clamp(0.0, 1.0);
            let (point, value) = numerics::nelder_mead_2d(
                |p| amp_balance_value(clamp(p[0]), clamp(p[1]), s),
                [best.1, best.2],
                GRID_STEP,
                REFINE_TOL,
                300,
            );
            let (rho, alpha) = (clamp(point[0]), clamp(point[1]));
            if value <= best.0 {
                let p = AmpDistParams::new(rho, alpha)?;
                Ok((value, BalanceParams::Amplitude(p)))
            } else {
                let p = AmpDistParams::new(best.1, best.2)?;
                Ok((best.0, BalanceParams::Amplitude(p)))
            }
        }
        MeasurementKind::Intensity => {
            let value_at = |rho: f64| -> f64 {
                let p = IntDistParams::new(rho.clamp(0.0, 1.0)).expect("clamped");
                balance_intensity(p, s).map(|e| e.value).unwrap_or(f64::INFINITY)
            };
            let best = (0..=steps)
                .into_par_iter()
                .map(|i| {
                    let rho = (i as f64 * GRID_STEP).min(1.0);
                    (value_at(rho), rho)
                })
                .reduce(
                    || (f64::INFINITY, 2.0),
                    |a, b| if (b.0, b.1) < (a.0, a.1) { b } else { a },
                );
            let lo = (best.1 - GRID_STEP).max(0.0);
            let hi = (best.1 + GRID_STEP).min(1.0);
            let (rho, value) = numerics::golden_min(value_at, lo, hi, REFINE_TOL);
            let (value, rho) = if value <= best.0 {
                (value, rho)
            } else {
                (best.0, best.1)
            };
            Ok((value, BalanceParams::Intensity(IntDistParams::new(rho)?)))
        }
    }
}

/// A sharp threshold with the parameters that attain it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub kind: MeasurementKind,
    /// Root of `s -> min_balance(kind, s)`.
    pub threshold: f64,
    /// Minimizing parameters at the root; the adversary constructions reuse
    /// them.
    pub argmin: BalanceParams,
    /// Half-width of the final bisection bracket.
    pub tolerance: f64,
    /// Step of the coarse parameter scan.
    pub grid_resolution: f64,
}

impl ThresholdResult {
    fn corridor(kind: MeasurementKind) -> (f64, f64) {
        match kind {
            MeasurementKind::Amplitude => (0.19, 0.21),
            MeasurementKind::Intensity => (0.11, 0.13),
        }
    }

    fn new(
        kind: MeasurementKind,
        threshold: f64,
        argmin: BalanceParams,
        tolerance: f64,
    ) -> Result<Self> {
        let (lo, hi) = Self::corridor(kind);
        if !(threshold > lo && threshold < hi) {
            return Err(Error::Convergence(format!(
                "{kind} threshold {threshold} fell outside the sanity corridor ({lo}, {hi})"
            )));
        }
        Ok(Self {
            kind,
            threshold,
            argmin,
            tolerance,
            grid_resolution: GRID_STEP,
        })
    }
}

/// Sharp corruption threshold: the unique zero of the (strictly decreasing)
/// minimum balance function, found by bisection on `[0.01, 0.4]` to
/// tolerance 5e-4 or better.
pub fn sharp_threshold(kind: MeasurementKind) -> Result<ThresholdResult> {
    let (mut lo, mut hi) = (0.01_f64, 0.4_f64);
    let f_lo = min_balance(kind, lo)?.0;
    let f_hi = min_balance(kind, hi)?.0;
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::Bracket(format!(
            "minimum balance does not change sign on [{lo}, {hi}] \
             (got {f_lo} and {f_hi}); balance implementation is broken"
        )));
    }
    let target_tol = 5e-4;
    while hi - lo > target_tol {
        let mid = 0.5 * (lo + hi);
        let v = min_balance(kind, mid)?.0;
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let threshold = 0.5 * (lo + hi);
    let (_, argmin) = min_balance(kind, threshold)?;
    ThresholdResult::new(kind, threshold, argmin, 0.5 * (hi - lo))
}

/// One cell of the balance-point surface.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub rho: f64,
    /// `None` for the intensity surface (one-parameter family).
    pub alpha: Option<f64>,
    /// Balance point `s` solving `balance(params, s) = 0`; `None` at the
    /// degenerate corner where the balance has no sign change.
    pub s_balance: Option<f64>,
}

/// Balance point of a single parameter choice, or `None` where degenerate.
fn balance_point(kind: MeasurementKind, rho: f64, alpha: f64) -> Option<f64> {
    let eval = |s: f64| -> f64 {
        match kind {
            MeasurementKind::Amplitude => amp_balance_value(rho, alpha, s),
            MeasurementKind::Intensity => {
                let p = IntDistParams::new(rho).expect("grid rho");
                balance_intensity(p, s).map(|e| e.value).unwrap_or(f64::NAN)
            }
        }
    };
    if kind == MeasurementKind::Amplitude && inside_corner(rho, alpha) {
        return None;
    }
    numerics::bisect_root(eval, 1e-9, 1.0 - 1e-9, 1e-6, 200).ok()
}

/// Balance-point surface over the parameter grid with the given step.
///
/// Amplitude: cells span `(rho, alpha) in [0,1]^2`; intensity: `rho in [0,1]`.
pub fn threshold_surface(kind: MeasurementKind, grid_step: f64) -> Result<Vec<SurfacePoint>> {
    if !(grid_step > 0.0 && grid_step <= 0.25) {
        return Err(Error::domain(format!(
            "grid_step must lie in (0, 0.25], got {grid_step}"
        )));
    }
    let steps = (1.0 / grid_step).round() as usize;
    let coord = |i: usize| (i as f64 * grid_step).min(1.0);
    match kind {
        MeasurementKind::Amplitude => {
            let cells: Vec<(usize, usize)> = (0..=steps)
                .flat_map(|i| (0..=steps).map(move |j| (i, j)))
                .collect();
            Ok(cells
                .par_iter()
                .map(|&(i, j)| {
                    let (rho, alpha) = (coord(i), coord(j));
                    SurfacePoint {
                        rho,
                        alpha: Some(alpha),
                        s_balance: balance_point(kind, rho, alpha),
                    }
                })
                .collect())
        }
        MeasurementKind::Intensity => Ok((0..=steps)
            .into_par_iter()
            .map(|i| {
                let rho = coord(i);
                SurfacePoint {
                    rho,
                    alpha: None,
                    s_balance: balance_point(kind, rho, 0.0),
                }
            })
            .collect()),
    }
}

/// Renders a surface as CSV (`rho,alpha,s_balance` or `rho,s_balance`);
/// degenerate cells leave the balance column empty.
pub fn surface_to_csv(kind: MeasurementKind, points: &[SurfacePoint]) -> String {
    let mut out = String::new();
    match kind {
        MeasurementKind::Amplitude => {
            out.push_str("rho,alpha,s_balance\n");
            for p in points {
                let s = p.s_balance.map(|v| format!("{v:.6}")).unwrap_or_default();
                out.push_str(&format!(
                    "{:.6},{:.6},{}\n",
                    p.rho,
                    p.alpha.unwrap_or(f64::NAN),
                    s
                ));
            }
        }
        MeasurementKind::Intensity => {
            out.push_str("rho,s_balance\n");
            for p in points {
                let s = p.s_balance.map(|v| format!("{v:.6}")).unwrap_or_default();
                out.push_str(&format!("{:.6},{}\n", p.rho, s));
            }
        }
    }
    out
}
