//! Gaussian measurement ensembles, amplitude/intensity forward maps, the
//! sign-invariant metrics, corruption assembly (dense noise plus sparse
//! outliers) and the adaptive adversary constructions.

use crate::balance::{BalanceParams, ThresholdResult};
use crate::error::{Error, Result};
use crate::types::{derive_seed, MeasurementKind};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Hard cap on `m * n` when sampling an ensemble.
const MAX_ENTRIES: u64 = 1_000_000_000;

/// A real signal vector (ground truth, iterate or decoy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signal {
    entries: Vec<f64>,
}

impl Signal {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("signal must have dimension >= 1"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("signal entries must all be finite"));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Signal) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Signal {
        Signal {
            entries: self.entries.iter().map(|v| c * v).collect(),
        }
    }

    pub fn negated(&self) -> Signal {
        self.scaled(-1.0)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Signal) -> Signal {
        Signal {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }
}

/// An `m x n` sampling matrix with i.i.d. standard Gaussian entries,
/// regenerable bit-exactly from `(seed, m, n)`.
#[derive(Debug, Clone)]
pub struct GaussianEnsemble {
    rows: Vec<f64>, // row-major m*n
    m: usize,
    n: usize,
    seed: u64,
}

impl GaussianEnsemble {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    /// `A x` as a plain vector of inner products.
    pub fn apply(&self, x: &Signal) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "signal has dimension {}, ensemble expects {}",
                x.len(),
                self.n
            )));
        }
        let xe = x.entries();
        Ok((0..self.m)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(xe)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect())
    }

    /// `A^T v / m`: adjoint applied to a length-`m` vector, averaged.
    pub fn adjoint_mean(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.m {
            return Err(Error::Dimension(format!(
                "vector has length {}, ensemble has {} rows",
                v.len(),
                self.m
            )));
        }
        let mut out = vec![0.0; self.n];
        for i in 0..self.m {
            let w = v[i];
            if w == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += w * a;
            }
        }
        let inv = 1.0 / self.m as f64;
        for o in &mut out {
            *o *= inv;
        }
        Ok(out)
    }
}

/// Samples an `m x n` ensemble of i.i.d. `N(0,1)` entries from a
/// counter-mode generator; the same `(m, n, seed)` always reproduces the
/// same matrix.
pub fn sample_ensemble(m: usize, n: usize, seed: u64) -> Result<GaussianEnsemble> {
    if n < 1 || m < n {
        return Err(Error::domain(format!(
            "ensemble requires m >= n >= 1, got m={m}, n={n}"
        )));
    }
    if (m as u64).saturating_mul(n as u64) > MAX_ENTRIES {
        return Err(Error::SizeLimit(format!(
            "m * n = {} exceeds the {MAX_ENTRIES} entry cap",
            m as u64 * n as u64
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(GaussianEnsemble { rows, m, n, seed })
}

/// Forward measurement map: entry `i` is `|<a_i, x>|` (amplitude) or
/// `<a_i, x>^2` (intensity).
pub fn forward(a: &GaussianEnsemble, x: &Signal, kind: MeasurementKind) -> Result<Vec<f64>> {
    let mut v = a.apply(x)?;
    match kind {
        MeasurementKind::Amplitude => {
            for e in &mut v {
                *e = e.abs();
            }
        }
        MeasurementKind::Intensity => {
            for e in &mut v {
                *e *= *e;
            }
        }
    }
    Ok(v)
}

fn check_same_dim(x: &Signal, y: &Signal) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "signals have dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Sign-invariant metric `min(||x - y||, ||x + y||)`.
pub fn dist1(x: &Signal, y: &Signal) -> Result<f64> {
    check_same_dim(x, y)?;
    let (mut dm, mut dp) = (0.0, 0.0);
    for (a, b) in x.entries().iter().zip(y.entries()) {
        dm += (a - b) * (a - b);
        dp += (a + b) * (a + b);
    }
    Ok(dm.min(dp).sqrt())
}

/// Product metric `||x - y|| * ||x + y||`.
pub fn dist2(x: &Signal, y: &Signal) -> Result<f64> {
    check_same_dim(x, y)?;
    let (mut dm, mut dp) = (0.0, 0.0);
    for (a, b) in x.entries().iter().zip(y.entries()) {
        dm += (a - b) * (a - b);
        dp += (a + b) * (a + b);
    }
    Ok((dm.sqrt()) * (dp.sqrt()))
}

/// Metric matching the measurement kind: `dist1` for amplitude, `dist2` for
/// intensity.
pub fn dist_for_kind(x: &Signal, y: &Signal, kind: MeasurementKind) -> Result<f64> {
    match kind {
        MeasurementKind::Amplitude => dist1(x, y),
        MeasurementKind::Intensity => dist2(x, y),
    }
}

/// Dense-noise specification for [`corrupt`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OmegaSpec {
    None,
    /// i.i.d. uniform on `[-sigma, sigma]`.
    Uniform { sigma: f64 },
    /// i.i.d. `N(0, sigma^2)`.
    Gaussian { sigma: f64 },
}

/// Sparse-outlier source for [`corrupt`].
#[derive(Debug, Clone, Copy)]
pub enum OutlierSource<'a> {
    None,
    /// Adversarial outlier from a prebuilt plan.
    Plan(&'a AdversaryPlan),
    /// Oblivious random outlier: `floor(fraction * m)` entries on a random
    /// support, values `scale * N(0,1)`.
    Random { fraction: f64, scale: f64 },
}

/// An observation vector together with its full decomposition, kept for
/// audit and replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorruptedObservation {
    pub kind: MeasurementKind,
    pub b: Vec<f64>,
    pub clean: Vec<f64>,
    pub omega: Vec<f64>,
    pub z: Vec<f64>,
    pub support: Vec<usize>,
    pub fraction: f64,
}

impl CorruptedObservation {
    /// Largest entrywise residual of `b - clean - omega - z`; zero by
    /// construction.
    pub fn decomposition_residual(&self) -> f64 {
        (0..self.b.len())
            .map(|i| (self.b[i] - self.clean[i] - self.omega[i] - self.z[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Assembles `b = clean + omega + z` and records the decomposition.
pub fn corrupt(
    kind: MeasurementKind,
    clean: &[f64],
    omega_spec: OmegaSpec,
    outlier: OutlierSource<'_>,
    seed: u64,
) -> Result<CorruptedObservation> {
    if clean.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::domain(
            "clean observations must be finite and nonnegative",
        ));
    }
    let m = clean.len();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6f6d_6567));
    let omega: Vec<f64> = match omega_spec {
        OmegaSpec::None => vec![0.0; m],
        OmegaSpec::Uniform { sigma } => {
            if sigma < 0.0 {
                return Err(Error::domain("uniform noise level must be nonnegative"));
            }
            (0..m).map(|_| rng.gen_range(-sigma..=sigma)).collect()
        }
        OmegaSpec::Gaussian { sigma } => {
            if sigma < 0.0 {
                return Err(Error::domain("gaussian noise level must be nonnegative"));
            }
            (0..m)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
    };
    let (z, support) = match outlier {
        OutlierSource::None => (vec![0.0; m], Vec::new()),
        OutlierSource::Plan(plan) => {
            if plan.kind != kind {
                return Err(Error::Inconsistent(format!(
                    "plan is for {} measurements, observation is {}",
                    plan.kind, kind
                )));
            }
            if plan.z.len() != m {
                return Err(Error::Dimension(format!(
                    "plan covers {} measurements, observation has {m}",
                    plan.z.len()
                )));
            }
            (plan.z.clone(), plan.support.clone())
        }
        OutlierSource::Random { fraction, scale } => {
            if !(0.0..1.0).contains(&fraction) {
                return Err(Error::domain("outlier fraction must lie in [0, 1)"));
            }
            let k = (fraction * m as f64).floor() as usize;
            let mut rng_z = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7a65_726f));
            let mut support = rand::seq::index::sample(&mut rng_z, m, k).into_vec();
            support.sort_unstable();
            let mut z = vec![0.0; m];
            for &i in &support {
                z[i] = scale * rng_z.sample::<f64, _>(StandardNormal);
            }
            (z, support)
        }
    };
    let b: Vec<f64> = (0..m).map(|i| clean[i] + omega[i] + z[i]).collect();
    let fraction = support.len() as f64 / m as f64;
    Ok(CorruptedObservation {
        kind,
        b,
        clean: clean.to_vec(),
        omega,
        z,
        support,
        fraction,
    })
}

/// An adaptive adversary: decoy signal, corruption support and outlier
/// values that make the decoy explain the corrupted entries exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversaryPlan {
    pub kind: MeasurementKind,
    /// The decoy `x_star`.
    pub x_star: Signal,
    /// Indices of the `floor(s m)` largest discrepancies, ascending.
    pub support: Vec<usize>,
    /// Outlier vector: `forward(x_star) - forward(x0)` on the support, zero
    /// elsewhere.
    pub z: Vec<f64>,
    /// Threshold-minimizing parameters the decoy was built from.
    pub params_used: BalanceParams,
}

/// Deterministic unit vector orthogonal to `x0`: Gram-Schmidt applied to the
/// first standard basis vector that is not parallel to `x0`.
pub fn orthogonal_unit(x0: &Signal) -> Result<Signal> {
    if x0.len() < 2 {
        return Err(Error::degenerate(
            "an orthogonal direction needs dimension >= 2",
        ));
    }
    let norm = x0.norm();
    if norm == 0.0 {
        return Err(Error::degenerate("x0 must be nonzero"));
    }
    for j in 0..x0.len() {
        let coord = x0.entries()[j] / norm;
        let residual_sq = 1.0 - coord * coord;
        if residual_sq > 1e-18 {
            let mut v = vec![0.0; x0.len()];
            v[j] = 1.0;
            for (vi, xi) in v.iter_mut().zip(x0.entries()) {
                *vi -= coord * xi / norm;
            }
            let vnorm = v.iter().map(|e| e * e).sum::<f64>().sqrt();
            for vi in &mut v {
                *vi /= vnorm;
            }
            return Signal::new(v);
        }
    }
    Err(Error::degenerate("no basis vector independent of x0"))
}

/// Builds the adaptive adversary for corruption fraction `s`.
///
/// Amplitude: the decoy is
/// `x_star = rho alpha x0 + sqrt(1 - rho^2) alpha ||x0|| x0_perp` with
/// `(rho, alpha)` the threshold-minimizing pair. Intensity: the decoy is
/// chosen so the correlation of `(x0 - x_star, x0 + x_star)` equals the
/// minimizing `rho`; with the orthogonal parameterization
/// `x_star = beta ||x0|| x0_perp` that correlation is
/// `(1 - beta^2)/(1 + beta^2)`, solved in closed form (equal norms would
/// force correlation zero, so the scale carries the constraint). The support
/// collects the `floor(s m)` largest absolute discrepancies, ties broken by
/// lower index.
pub fn build_adversary(
    a: &GaussianEnsemble,
    x0: &Signal,
    s: f64,
    kind: MeasurementKind,
    threshold: &ThresholdResult,
) -> Result<AdversaryPlan> {
    if threshold.kind != kind {
        return Err(Error::Inconsistent(format!(
            "threshold parameters are for {}, adversary requested for {}",
            threshold.kind, kind
        )));
    }
    if !(0.0..1.0).contains(&s) || s <= 0.0 {
        return Err(Error::domain(format!("fraction s must lie in (0, 1), got {s}")));
    }
    let k = (s * a.m() as f64).floor() as usize;
    if k == 0 {
        return Err(Error::degenerate(format!(
            "floor(s m) = 0 at s={s}, m={}: empty adversary",
            a.m()
        )));
    }
    if x0.norm() == 0.0 {
        return Err(Error::degenerate("x0 must be nonzero"));
    }
    let perp = orthogonal_unit(x0)?;
    let x_star = match (kind, &threshold.argmin) {
        (MeasurementKind::Amplitude, BalanceParams::Amplitude(p)) => {
            let (rho, alpha) = (p.rho(), p.alpha());
            x0.scaled(rho * alpha)
                .axpy((1.0 - rho * rho).sqrt() * alpha * x0.norm(), &perp)
        }
        (MeasurementKind::Intensity, BalanceParams::Intensity(p)) => {
            let rho = p.rho();
            if 1.0 - rho < 1e-9 {
                // collinear decoy attains correlation one
                x0.scaled(0.5)
            } else {
                let beta = ((1.0 - rho) / (1.0 + rho)).sqrt();
                perp.scaled(beta * x0.norm())
            }
        }
        _ => {
            return Err(Error::Inconsistent(
                "threshold argmin parameters do not match the measurement kind".to_string(),
            ))
        }
    };
    let fx0 = forward(a, x0, kind)?;
    let fxs = forward(a, &x_star, kind)?;
    let d: Vec<f64> = fxs.iter().zip(&fx0).map(|(s, c)| s - c).collect();
    let mut order: Vec<usize> = (0..a.m()).collect();
    order.sort_unstable_by(|&i, &j| d[j].abs().total_cmp(&d[i].abs()).then(i.cmp(&j)));
    let mut support: Vec<usize> = order[..k].to_vec();
    support.sort_unstable();
    let mut z = vec![0.0; a.m()];
    for &i in &support {
        z[i] = d[i];
    }
    Ok(AdversaryPlan {
        kind,
        x_star,
        support,
        z,
        params_used: threshold.argmin,
    })
}

/// One JSON-lines audit record for a plan: enough to replay the experiment.
pub fn plan_audit_record(
    plan: &AdversaryPlan,
    ensemble_seed: u64,
    s: f64,
) -> serde_json::Value {
    serde_json::json!({
        "kind": plan.kind,
        "seed": ensemble_seed,
        "s": s,
        "support": plan.support,
        "decoy": plan.x_star.entries(),
    })
}
