//! Nonlinear least-absolute-deviation solvers for the amplitude objective
//! `(1/m) || |A x| - b ||_1` and the intensity objective
//! `(1/m) || |A x|^2 - b ||_1`, over the full space.
//!
//! Each run performs Polyak-style subgradient descent with a geometrically
//! decaying step length along the normalized subgradient direction; the
//! objectives are sharp, so this converges linearly inside a basin. Restarts
//! start from the two leading eigenvectors of the outlier-trimmed weighted
//! covariance (the corruption mixes at most two signal directions, and both
//! candidate basins live in that eigenspace) and from random directions at
//! the estimated signal scale; the run with the lowest final objective wins.

use crate::error::{Error, Result};
use crate::measure::{dist1, dist2, forward, GaussianEnsemble, Signal};
use crate::types::{derive_seed, MeasurementKind};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Median of `|N(0,1)|`.
const HALF_NORMAL_MEDIAN: f64 = 0.674_489_750_196_081_7;
/// Median of `N(0,1)^2` (chi-square with one degree of freedom).
const CHI2_MEDIAN: f64 = 0.454_936_423_119_572_85;

/// Options of [`solve`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Subgradient iterations per restart.
    pub max_iters: usize,
    /// Initial step length as a multiple of the starting-point norm.
    pub step_init: f64,
    /// Geometric decay factor of the step length, in (0, 1).
    pub step_decay: f64,
    /// Number of restarts (>= 1); the first starts from the spectral
    /// initializer.
    pub restarts: usize,
    /// Stop a run once the objective falls to this value.
    pub tol_obj: f64,
    /// Stop a run once the step length falls below this value.
    pub tol_step: f64,
    /// Base seed for the randomized restarts.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 3000,
            step_init: 1.0,
            step_decay: 0.995,
            restarts: 5,
            tol_obj: 0.0,
            tol_step: 1e-12,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::domain("max_iters must be >= 1"));
        }
        if !(self.step_decay > 0.0 && self.step_decay < 1.0) {
            return Err(Error::domain("step_decay must lie in (0, 1)"));
        }
        if self.restarts < 1 {
            return Err(Error::domain("restarts must be >= 1"));
        }
        if !(self.step_init > 0.0) {
            return Err(Error::domain("step_init must be positive"));
        }
        Ok(())
    }
}

/// Result of a solve, with enough bookkeeping to audit the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub estimate: Signal,
    /// Final `(1/m)` l1 loss at the estimate.
    pub objective: f64,
    /// `dist1` to the supplied truth, when one was given.
    pub dist1_to_truth: Option<f64>,
    /// `dist2` to the supplied truth, when one was given.
    pub dist2_to_truth: Option<f64>,
    /// Iterations used by the winning run.
    pub iterations: usize,
    /// Index of the winning restart.
    pub restart_index: usize,
    /// Best-so-far objective per iteration of the winning run (nonincreasing).
    pub objective_trace: Vec<f64>,
}

impl SolveReport {
    /// JSON form with the trace downsampled to at most 200 points.
    pub fn to_json(&self) -> serde_json::Value {
        let trace: Vec<f64> = if self.objective_trace.len() <= 200 {
            self.objective_trace.clone()
        } else {
            let n = self.objective_trace.len();
            (0..200)
                .map(|i| self.objective_trace[i * (n - 1) / 199])
                .collect()
        };
        serde_json::json!({
            "estimate": self.estimate.entries(),
            "objective": self.objective,
            "dist1_to_truth": self.dist1_to_truth,
            "dist2_to_truth": self.dist2_to_truth,
            "iterations": self.iterations,
            "restart_index": self.restart_index,
            "objective_trace": trace,
        })
    }
}

/// `(1/m) || |A x|^k - b ||_1`.
pub fn objective(
    a: &GaussianEnsemble,
    b: &[f64],
    x: &Signal,
    kind: MeasurementKind,
) -> Result<f64> {
    if b.len() != a.m() {
        return Err(Error::Dimension(format!(
            "observation has length {}, ensemble has {} rows",
            b.len(),
            a.m()
        )));
    }
    let fx = forward(a, x, kind)?;
    Ok(fx.iter().zip(b).map(|(f, o)| (f - o).abs()).sum::<f64>() / a.m() as f64)
}

/// Subgradient of the objective at `x`; `sign(0) = 0`.
fn subgradient(
    a: &GaussianEnsemble,
    b: &[f64],
    x: &Signal,
    kind: MeasurementKind,
) -> Result<Vec<f64>> {
    let ax = a.apply(x)?;
    let weights: Vec<f64> = match kind {
        MeasurementKind::Amplitude => ax
            .iter()
            .zip(b)
            .map(|(&v, &o)| sign(v.abs() - o) * sign(v))
            .collect(),
        MeasurementKind::Intensity => ax
            .iter()
            .zip(b)
            .map(|(&v, &o)| sign(v * v - o) * 2.0 * v)
            .collect(),
    };
    a.adjoint_mean(&weights)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Weighted covariance `(1/m) sum w_i a_i a_i^T` with the largest weights
/// trimmed away, and its two leading eigenvectors.
struct SpectralDirections {
    primary: Vec<f64>,
    secondary: Option<Vec<f64>>,
    norm_estimate: f64,
}

fn spectral_directions(
    a: &GaussianEnsemble,
    b: &[f64],
    kind: MeasurementKind,
) -> Result<SpectralDirections> {
    if b.len() != a.m() {
        return Err(Error::Dimension(format!(
            "observation has length {}, ensemble has {} rows",
            b.len(),
            a.m()
        )));
    }
    let n = a.n();
    // dense noise can push observations slightly negative; weights clamp at
    // zero so the covariance stays positive semidefinite
    let mut weights: Vec<f64> = match kind {
        MeasurementKind::Intensity => b.iter().map(|v| v.max(0.0)).collect(),
        MeasurementKind::Amplitude => b.iter().map(|v| v * v).collect(),
    };
    // trim weights at the 95th percentile so adversarial rows cannot
    // dominate the covariance
    let mut sorted = weights.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let idx = ((0.95 * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1);
    let cutoff = sorted[idx];
    for w in &mut weights {
        if *w > cutoff {
            *w = cutoff;
        }
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(Error::degenerate(
            "all observations are zero; spectral initialization undefined",
        ));
    }
    let mut cov = vec![0.0; n * n];
    for i in 0..a.m() {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let row = a.row(i);
        for p in 0..n {
            let wp = w * row[p];
            for q in p..n {
                cov[p * n + q] += wp * row[q];
            }
        }
    }
    let inv_m = 1.0 / a.m() as f64;
    for p in 0..n {
        for q in p..n {
            let v = cov[p * n + q] * inv_m;
            cov[p * n + q] = v;
            cov[q * n + p] = v;
        }
    }
    let (vals, vecs) = jacobi_eigen(&mut cov, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let column = |k: usize| -> Vec<f64> { (0..n).map(|r| vecs[r * n + k]).collect() };
    let primary = column(order[0]);
    let secondary = if n >= 2 { Some(column(order[1])) } else { None };

    // median-based norm estimate is robust to the corrupted fraction
    let mut med = b.to_vec();
    let mid = med.len() / 2;
    med.select_nth_unstable_by(mid, f64::total_cmp);
    let median = med[mid];
    let norm_estimate = match kind {
        MeasurementKind::Amplitude => median / HALF_NORMAL_MEDIAN,
        MeasurementKind::Intensity => (median.max(0.0) / CHI2_MEDIAN).sqrt(),
    };
    Ok(SpectralDirections {
        primary,
        secondary,
        norm_estimate,
    })
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major,
/// overwritten). Returns eigenvalues and the orthogonal matrix of
/// eigenvectors in columns.
fn jacobi_eigen(mat: &mut [f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut vecs = vec![0.0; n * n];
    for i in 0..n {
        vecs[i * n + i] = 1.0;
    }
    for _sweep in 0..500 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += mat[p * n + q] * mat[p * n + q];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(mat)) {
            let vals = (0..n).map(|i| mat[i * n + i]).collect();
            return Ok((vals, vecs));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = mat[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = 0.5 * (mat[q * n + q] - mat[p * n + p]) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = mat[k * n + p];
                    let akq = mat[k * n + q];
                    mat[k * n + p] = c * akp - s * akq;
                    mat[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = mat[p * n + k];
                    let aqk = mat[q * n + k];
                    mat[p * n + k] = c * apk - s * aqk;
                    mat[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = vecs[k * n + p];
                    let vkq = vecs[k * n + q];
                    vecs[k * n + p] = c * vkp - s * vkq;
                    vecs[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Convergence(
        "eigensolver did not converge within 500 sweeps".to_string(),
    ))
}

fn frobenius(mat: &[f64]) -> f64 {
    mat.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Spectral initializer: the leading eigenvector of the trimmed weighted
/// covariance, scaled to the median-based norm estimate. Requires
/// nonnegative observations (amplitude observations are squared into
/// weights internally).
pub fn spectral_init(
    a: &GaussianEnsemble,
    b: &[f64],
    kind: MeasurementKind,
) -> Result<Signal> {
    if b.iter().any(|v| *v < 0.0) {
        return Err(Error::domain(
            "spectral initialization requires nonnegative observations",
        ));
    }
    let dirs = spectral_directions(a, b, kind)?;
    if dirs.norm_estimate <= 0.0 || !dirs.norm_estimate.is_finite() {
        return Err(Error::degenerate(
            "norm estimate degenerate (all-zero observations?)",
        ));
    }
    Signal::new(
        dirs.primary
            .iter()
            .map(|v| v * dirs.norm_estimate)
            .collect(),
    )
}

struct RunOutcome {
    estimate: Vec<f64>,
    objective: f64,
    iterations: usize,
    trace: Vec<f64>,
}

/// One subgradient run from `start`; returns `None` if the iterates left the
/// finite range.
fn run_from(
    a: &GaussianEnsemble,
    b: &[f64],
    kind: MeasurementKind,
    opts: &SolveOptions,
    start: &Signal,
) -> Result<Option<RunOutcome>> {
    let mut x = start.entries().to_vec();
    let norm0 = start.norm();
    let mut step = opts.step_init * if norm0 > 0.0 { norm0 } else { 1.0 };
    let mut best = x.clone();
    let mut best_obj = objective(a, b, start, kind)?;
    let mut trace = Vec::with_capacity(opts.max_iters);
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        let xs = Signal::new(x.clone()).map_err(|_| Error::Convergence("iterate left the finite range".into()));
        let xs = match xs {
            Ok(s) => s,
            Err(_) => return Ok(None), // diverged run is discarded
        };
        let g = subgradient(a, b, &xs, kind)?;
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-15 {
            break; // subdifferential contains zero; stationary
        }
        let scale = step / gnorm;
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= scale * gi;
        }
        step *= opts.step_decay;
        iterations += 1;
        if !x.iter().all(|v| v.is_finite()) {
            return Ok(None);
        }
        let obj = objective(a, b, &Signal::new(x.clone()).expect("finite"), kind)?;
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&x);
        }
        trace.push(best_obj);
        if best_obj <= opts.tol_obj || step < opts.tol_step {
            break;
        }
    }
    Ok(Some(RunOutcome {
        estimate: best,
        objective: best_obj,
        iterations,
        trace,
    }))
}

/// Full solve: spectral-eigenspace starts plus randomized restarts, best
/// final objective wins (ties go to the lower restart index).
pub fn solve(
    a: &GaussianEnsemble,
    b: &[f64],
    kind: MeasurementKind,
    opts: &SolveOptions,
    truth: Option<&Signal>,
) -> Result<SolveReport> {
    opts.validate()?;
    let dirs = spectral_directions(a, b, kind)?;
    let scale = if dirs.norm_estimate > 0.0 && dirs.norm_estimate.is_finite() {
        dirs.norm_estimate
    } else {
        1.0
    };
    let mut starts: Vec<Signal> = Vec::with_capacity(opts.restarts);
    starts.push(Signal::new(
        dirs.primary.iter().map(|v| v * scale).collect(),
    )?);
    if opts.restarts > 1 {
        if let Some(sec) = &dirs.secondary {
            starts.push(Signal::new(sec.iter().map(|v| v * scale).collect())?);
        }
    }
    while starts.len() < opts.restarts {
        let idx = starts.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 0x7265_7374 ^ idx));
        let dir: Vec<f64> = (0..a.n()).map(|_| rng.sample(StandardNormal)).collect();
        let dnorm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        starts.push(Signal::new(
            dir.iter().map(|v| v / dnorm * scale).collect(),
        )?);
    }

    let mut winner: Option<(usize, RunOutcome)> = None;
    for (i, start) in starts.iter().enumerate() {
        if let Some(run) = run_from(a, b, kind, opts, start)? {
            let better = match &winner {
                None => true,
                Some((_, w)) => run.objective < w.objective,
            };
            if better {
                winner = Some((i, run));
            }
        }
    }
    let (restart_index, run) =
        winner.ok_or_else(|| Error::Convergence("all restarts diverged".to_string()))?;
    let estimate = Signal::new(run.estimate)?;
    // recompute so the report is self-consistent to the last bit
    let final_obj = objective(a, b, &estimate, kind)?;
    let (d1, d2) = match truth {
        Some(t) => (Some(dist1(&estimate, t)?), Some(dist2(&estimate, t)?)),
        None => (None, None),
    };
    Ok(SolveReport {
        estimate,
        objective: final_obj,
        dist1_to_truth: d1,
        dist2_to_truth: d2,
        iterations: run.iterations,
        restart_index,
        objective_trace: run.trace,
    })
}

/// Single run from an explicit starting point (first restart semantics).
pub fn solve_from(
    a: &GaussianEnsemble,
    b: &[f64],
    kind: MeasurementKind,
    opts: &SolveOptions,
    start: &Signal,
    truth: Option<&Signal>,
) -> Result<SolveReport> {
    opts.validate()?;
    let run = run_from(a, b, kind, opts, start)?
        .ok_or_else(|| Error::Convergence("run diverged".to_string()))?;
    let estimate = Signal::new(run.estimate)?;
    let final_obj = objective(a, b, &estimate, kind)?;
    let (d1, d2) = match truth {
        Some(t) => (Some(dist1(&estimate, t)?), Some(dist2(&estimate, t)?)),
        None => (None, None),
    };
    Ok(SolveReport {
        estimate,
        objective: final_obj,
        dist1_to_truth: d1,
        dist2_to_truth: d2,
        iterations: run.iterations,
        restart_index: 0,
        objective_trace: run.trace,
    })
}
