//! Empirical verification engines: exact worst-subset margins of the robust
//! outlier bound, DKW quantile sandwiches, stability corridors, and
//! Monte-Carlo samplers that cross-validate the closed-form distributions.

use crate::dist_amp::AmpDistParams;
use crate::dist_int::IntDistParams;
use crate::error::{Error, Result};
use crate::measure::{dist_for_kind, forward, GaussianEnsemble, Signal};
use crate::types::{derive_seed, MeasurementKind};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Exact worst-case margin of the robust outlier bound for one signal pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobMargin {
    pub kind: MeasurementKind,
    pub s: f64,
    pub x: Signal,
    pub y: Signal,
    /// `(1/m) [ l1 off the worst set - l1 on it ] / dist_k(x, y)`.
    pub margin: f64,
}

/// Per-pair margin row for reporting.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairMargin {
    pub rho: f64,
    /// `None` for intensity pairs (no scale parameter).
    pub alpha: Option<f64>,
    pub margin: f64,
}

/// Worst-subset margin, computed exactly by sorting: the minimizing
/// corruption set is the top-`floor(s m)` set of per-row discrepancies, so no
/// subset enumeration is needed.
pub fn worst_margin(
    a: &GaussianEnsemble,
    x: &Signal,
    y: &Signal,
    s: f64,
    kind: MeasurementKind,
) -> Result<RobMargin> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::domain(format!("s must lie in [0, 1), got {s}")));
    }
    let dist = dist_for_kind(x, y, kind)?;
    if dist <= 0.0 {
        return Err(Error::degenerate(
            "x and y coincide up to sign; margin undefined",
        ));
    }
    let fx = forward(a, x, kind)?;
    let fy = forward(a, y, kind)?;
    let v: Vec<f64> = fx.iter().zip(&fy).map(|(p, q)| (p - q).abs()).collect();
    let m = v.len();
    let k = (s * m as f64).floor() as usize;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_unstable_by(|&i, &j| v[j].total_cmp(&v[i]).then(i.cmp(&j)));
    let mut top: Vec<usize> = order[..k].to_vec();
    top.sort_unstable();
    // both sums run in ascending index order so the sorted route and a
    // brute-force enumeration agree bit for bit
    let total: f64 = v.iter().sum();
    let top_sum: f64 = top.iter().map(|&i| v[i]).sum();
    let margin = (total - 2.0 * top_sum) / (m as f64 * dist);
    Ok(RobMargin {
        kind,
        s,
        x: x.clone(),
        y: y.clone(),
        margin,
    })
}

/// Builds a unit vector pair with prescribed geometry for amplitude
/// (`<x^, y^> = rho`, `||y||/||x|| = alpha`) or intensity (correlation of
/// `(x - y, x + y)` equal to `rho`).
fn pair_for_params(
    n: usize,
    kind: MeasurementKind,
    rho: f64,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Option<(Signal, Signal, f64, Option<f64>)> {
    let unit = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|e| e * e).sum::<f64>().sqrt();
            if norm > 1e-9 {
                return v.iter().map(|e| e / norm).collect();
            }
        }
    };
    let orth_unit = |base: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let v = unit(rng);
            let proj: f64 = v.iter().zip(base).map(|(a, b)| a * b).sum();
            let mut w: Vec<f64> = v.iter().zip(base).map(|(a, b)| a - proj * b).collect();
            let norm = w.iter().map(|e| e * e).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for e in &mut w {
                    *e /= norm;
                }
                return w;
            }
        }
    };
    match kind {
        MeasurementKind::Amplitude => {
            if rho > 1.0 - 1e-9 && alpha > 1.0 - 1e-9 {
                return None; // y = x: degenerate pair
            }
            let x = unit(rng);
            let p = orth_unit(&x, rng);
            let c = (1.0 - rho * rho).max(0.0).sqrt();
            let y: Vec<f64> = x
                .iter()
                .zip(&p)
                .map(|(xi, pi)| alpha * (rho * xi + c * pi))
                .collect();
            Some((
                Signal::new(x).ok()?,
                Signal::new(y).ok()?,
                rho,
                Some(alpha),
            ))
        }
        MeasurementKind::Intensity => {
            let u = unit(rng);
            let w = orth_unit(&u, rng);
            let c = (1.0 - rho * rho).max(0.0).sqrt();
            let v: Vec<f64> = u
                .iter()
                .zip(&w)
                .map(|(ui, wi)| rho * ui + c * wi)
                .collect();
            let x: Vec<f64> = u.iter().zip(&v).map(|(ui, vi)| 0.5 * (ui + vi)).collect();
            let y: Vec<f64> = u.iter().zip(&v).map(|(ui, vi)| 0.5 * (vi - ui)).collect();
            Some((Signal::new(x).ok()?, Signal::new(y).ok()?, rho, None))
        }
    }
}

/// Stratified pair stream: alternates a 0.1-step parameter grid (the
/// adversarial minimum lives at specific parameters and uniform sampling
/// would miss it) with fully random pairs.
fn pair_stream(
    n: usize,
    kind: MeasurementKind,
    num_pairs: usize,
    seed: u64,
) -> Vec<(Signal, Signal, f64, Option<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7061_6972));
    let mut grid: Vec<(f64, f64)> = Vec::new();
    for i in 0..=10 {
        let rho = i as f64 / 10.0;
        match kind {
            MeasurementKind::Amplitude => {
                for j in 0..=10 {
                    grid.push((rho, j as f64 / 10.0));
                }
            }
            MeasurementKind::Intensity => grid.push((rho, 1.0)),
        }
    }
    let mut out = Vec::with_capacity(num_pairs);
    let mut g = 0usize;
    while out.len() < num_pairs {
        let stratified = out.len() % 2 == 0;
        let (rho, alpha) = if stratified {
            let cell = grid[g % grid.len()];
            g += 1;
            cell
        } else {
            (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0))
        };
        if let Some(pair) = pair_for_params(n, kind, rho, alpha, &mut rng) {
            out.push(pair);
        } else {
            g += 1; // skip degenerate cells like (1, 1)
        }
    }
    out
}

/// Minimum worst-subset margin over a stratified-plus-random family of
/// signal pairs. Returns the worst pair's margin and every per-pair row.
pub fn empirical_min_margin(
    a: &GaussianEnsemble,
    s: f64,
    kind: MeasurementKind,
    num_pairs: usize,
    seed: u64,
) -> Result<(RobMargin, Vec<PairMargin>)> {
    if num_pairs < 1 {
        return Err(Error::domain("num_pairs must be >= 1"));
    }
    let pairs = pair_stream(a.n(), kind, num_pairs, seed);
    let mut rows = Vec::with_capacity(pairs.len());
    let mut worst: Option<RobMargin> = None;
    for (x, y, rho, alpha) in pairs {
        let margin = worst_margin(a, &x, &y, s, kind)?;
        rows.push(PairMargin {
            rho,
            alpha,
            margin: margin.margin,
        });
        let is_worse = worst
            .as_ref()
            .map(|w| margin.margin < w.margin)
            .unwrap_or(true);
        if is_worse {
            worst = Some(margin);
        }
    }
    Ok((worst.expect("at least one pair"), rows))
}

/// Outcome of a DKW quantile-sandwich check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DkwOutcome {
    /// Reference quantile at `eta - eps`.
    pub lower: f64,
    /// Empirical quantile at `eta`.
    pub empirical: f64,
    /// Reference quantile at `eta + eps`.
    pub upper: f64,
    pub holds: bool,
}

/// Tests the Dvoretzky-Kiefer-Wolfowitz sandwich
/// `F^{-1}(eta - eps) < Fhat^{-1}(eta) < F^{-1}(eta + eps)` against a
/// reference quantile function.
pub fn dkw_check<Q: Fn(f64) -> Result<f64>>(
    samples: &[f64],
    quantile: Q,
    eta: f64,
    eps: f64,
) -> Result<DkwOutcome> {
    if samples.is_empty() {
        return Err(Error::domain("sample set must be nonempty"));
    }
    if !(0.0..=1.0).contains(&(eta - eps)) || !(0.0..=1.0).contains(&(eta + eps)) {
        return Err(Error::domain(format!(
            "eta +- eps must stay in [0, 1]; got eta={eta}, eps={eps}"
        )));
    }
    let n = samples.len();
    let rank = ((eta * n as f64).ceil() as usize).clamp(1, n);
    let mut work = samples.to_vec();
    let (_, pivot, _) = work.select_nth_unstable_by(rank - 1, f64::total_cmp);
    let empirical = *pivot;
    let lower = quantile(eta - eps)?;
    let upper = quantile(eta + eps)?;
    Ok(DkwOutcome {
        lower,
        empirical,
        upper,
        holds: lower < empirical && empirical < upper,
    })
}

/// Stability-corridor report over random pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub kind: MeasurementKind,
    /// Theoretical lower bound of the normalized discrepancy.
    pub lower_bound: f64,
    /// Theoretical upper bound.
    pub upper_bound: f64,
    pub slack: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub num_pairs: usize,
    pub all_within: bool,
}

/// Corridor bounds of the normalized l1 discrepancy:
/// `[sqrt(2/pi)(2 - sqrt 2), sqrt(2/pi)]` for amplitude and `[2/pi, 1]` for
/// intensity.
pub fn stability_bounds(kind: MeasurementKind) -> (f64, f64) {
    match kind {
        MeasurementKind::Amplitude => (0.467_389_954_510_218_14, 0.797_884_560_802_865_4),
        MeasurementKind::Intensity => (2.0 / std::f64::consts::PI, 1.0),
    }
}

/// Checks that `(1/m) || |A x|^k - |A y|^k ||_1 / dist_k(x, y)` stays inside
/// the widened stability corridor over a family of random pairs.
pub fn stability_check(
    a: &GaussianEnsemble,
    num_pairs: usize,
    kind: MeasurementKind,
    slack: f64,
    seed: u64,
) -> Result<StabilityReport> {
    if num_pairs < 1 {
        return Err(Error::domain("num_pairs must be >= 1"));
    }
    let (lo, hi) = stability_bounds(kind);
    let pairs = pair_stream(a.n(), kind, num_pairs, seed);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    for (x, y, _, _) in &pairs {
        // s = 0 margin is exactly the stability statistic
        let ratio = worst_margin(a, x, y, 0.0, kind)?.margin;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
    }
    Ok(StabilityReport {
        kind,
        lower_bound: lo,
        upper_bound: hi,
        slack,
        min_ratio,
        max_ratio,
        num_pairs,
        all_within: min_ratio >= lo - slack && max_ratio <= hi + slack,
    })
}

/// Draws `||X| - |Y||` samples by transforming correlated Gaussian pairs
/// (Cholesky of `[[1, rho alpha], [rho alpha, alpha^2]]`).
pub fn mc_sample_abs_diff(p: AmpDistParams, n_samples: usize, seed: u64) -> Vec<f64> {
    let (rho, alpha) = (p.rho(), p.alpha());
    let c = (1.0 - rho * rho).max(0.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| {
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let x = g1;
            let y = alpha * (rho * g1 + c * g2);
            (x.abs() - y.abs()).abs()
        })
        .collect()
}

/// Draws `|X * Y|` samples for correlated standard Gaussian pairs.
pub fn mc_sample_abs_prod(p: IntDistParams, n_samples: usize, seed: u64) -> Vec<f64> {
    let rho = p.rho();
    let c = (1.0 - rho * rho).max(0.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| {
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            (g1 * (rho * g1 + c * g2)).abs()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist_amp;
    use crate::dist_int;
    use crate::measure::sample_ensemble;

    fn random_unit(n: usize, seed: u64) -> Signal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|e| e * e).sum::<f64>().sqrt();
        Signal::new(v.iter().map(|e| e / norm).collect()).unwrap()
    }

    /// Exhaustive minimum over all corruption subsets of size <= k, summing
    /// the subset in ascending index order exactly like the implementation.
    fn brute_force_margin(
        a: &GaussianEnsemble,
        x: &Signal,
        y: &Signal,
        s: f64,
        kind: MeasurementKind,
    ) -> f64 {
        let fx = forward(a, x, kind).unwrap();
        let fy = forward(a, y, kind).unwrap();
        let v: Vec<f64> = fx.iter().zip(&fy).map(|(p, q)| (p - q).abs()).collect();
        let m = v.len();
        let k = (s * m as f64).floor() as usize;
        let dist = dist_for_kind(x, y, kind).unwrap();
        let total: f64 = v.iter().sum();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << m) {
            if (mask.count_ones() as usize) > k {
                continue;
            }
            let mut sum = 0.0;
            for (i, vi) in v.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    sum += vi;
                }
            }
            best = best.min(total - 2.0 * sum);
        }
        best / (m as f64 * dist)
    }

    #[test]
    fn margin_at_zero_fraction_is_normalized_discrepancy() {
        let a = sample_ensemble(100, 4, 3).unwrap();
        let x = random_unit(4, 1);
        let y = random_unit(4, 2);
        let m = worst_margin(&a, &x, &y, 0.0, MeasurementKind::Amplitude).unwrap();
        assert!(m.margin >= 0.0);
        let fx = forward(&a, &x, MeasurementKind::Amplitude).unwrap();
        let fy = forward(&a, &y, MeasurementKind::Amplitude).unwrap();
        let direct: f64 = fx.iter().zip(&fy).map(|(p, q)| (p - q).abs()).sum::<f64>()
            / (100.0 * crate::measure::dist1(&x, &y).unwrap());
        assert_eq!(m.margin, direct);
    }

    #[test]
    fn margin_matches_brute_force_small() {
        for seed in 0..20 {
            let a = sample_ensemble(12, 3, 100 + seed).unwrap();
            let x = random_unit(3, 2 * seed);
            let y = random_unit(3, 2 * seed + 1);
            for kind in [MeasurementKind::Amplitude, MeasurementKind::Intensity] {
                let fast = worst_margin(&a, &x, &y, 0.25, kind).unwrap().margin;
                let slow = brute_force_margin(&a, &x, &y, 0.25, kind);
                assert_eq!(fast, slow, "seed {seed} {kind}");
            }
        }
    }

    #[test]
    fn margin_nonincreasing_in_s() {
        let a = sample_ensemble(200, 4, 9).unwrap();
        let x = random_unit(4, 5);
        let y = random_unit(4, 6);
        let mut prev = f64::INFINITY;
        for i in 0..8 {
            let s = i as f64 * 0.1;
            let m = worst_margin(&a, &x, &y, s, MeasurementKind::Amplitude)
                .unwrap()
                .margin;
            assert!(m <= prev + 1e-15);
            prev = m;
        }
    }

    #[test]
    fn margin_rejects_degenerate_pair_and_bad_s() {
        let a = sample_ensemble(20, 3, 1).unwrap();
        let x = random_unit(3, 1);
        assert!(worst_margin(&a, &x, &x, 0.1, MeasurementKind::Amplitude).is_err());
        let y = random_unit(3, 2);
        assert!(worst_margin(&a, &x, &y, 1.0, MeasurementKind::Amplitude).is_err());
    }

    #[test]
    fn empirical_min_margin_single_pair_reduces_to_worst_margin() {
        let a = sample_ensemble(50, 4, 11).unwrap();
        let (worst, rows) =
            empirical_min_margin(&a, 0.1, MeasurementKind::Amplitude, 1, 3).unwrap();
        assert_eq!(rows.len(), 1);
        let again = worst_margin(&a, &worst.x, &worst.y, 0.1, MeasurementKind::Amplitude).unwrap();
        assert_eq!(worst.margin, again.margin);
        assert_eq!(rows[0].margin, worst.margin);
    }

    #[test]
    fn dkw_sandwich_on_half_normal() {
        // reference: half-normal via the amplitude distribution at (1, 0)
        let p = AmpDistParams::new(1.0, 0.0).unwrap();
        let samples = mc_sample_abs_diff(p, 200_000, 77);
        let out = dkw_check(
            &samples,
            |q| dist_amp::quantile_abs_diff(q, p),
            0.5,
            0.01,
        )
        .unwrap();
        assert!(out.holds, "{out:?}");
        assert!((out.empirical - 0.674_489_750_196_081_7).abs() < 0.01);

        // negative control: shifted samples must violate the sandwich
        let shifted: Vec<f64> = samples.iter().map(|v| v + 1.0).collect();
        let out = dkw_check(
            &shifted,
            |q| dist_amp::quantile_abs_diff(q, p),
            0.5,
            0.01,
        )
        .unwrap();
        assert!(!out.holds);
    }

    #[test]
    fn dkw_validates_inputs() {
        let p = AmpDistParams::new(0.5, 0.5).unwrap();
        assert!(dkw_check(&[], |q| dist_amp::quantile_abs_diff(q, p), 0.5, 0.01).is_err());
        let samples = vec![1.0, 2.0];
        assert!(
            dkw_check(&samples, |q| dist_amp::quantile_abs_diff(q, p), 0.005, 0.01).is_err()
        );
    }

    #[test]
    fn stability_ratios_concentrate_in_corridor() {
        let a = sample_ensemble(4000, 5, 31).unwrap();
        for kind in [MeasurementKind::Amplitude, MeasurementKind::Intensity] {
            let report = stability_check(&a, 60, kind, 0.05, 13).unwrap();
            assert!(
                report.all_within,
                "{kind}: ratios [{}, {}] left corridor [{}, {}]",
                report.min_ratio, report.max_ratio, report.lower_bound, report.upper_bound
            );
            assert!(report.min_ratio > 0.0);
            assert!(report.max_ratio > report.min_ratio);
        }
    }

    #[test]
    fn mc_samplers_are_deterministic_and_match_moments() {
        let p = AmpDistParams::new(0.4, 0.7).unwrap();
        let a = mc_sample_abs_diff(p, 1000, 5);
        let b = mc_sample_abs_diff(p, 1000, 5);
        assert_eq!(a, b);

        let n = 1_000_000;
        let samples = mc_sample_abs_diff(p, n, 123);
        let mean: f64 = samples.iter().sum::<f64>() / n as f64;
        let want = dist_amp::partial_first_moment_amp(f64::INFINITY, p).unwrap();
        let sd: f64 = (samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(
            (mean - want).abs() <= 3.0 * sd / (n as f64).sqrt(),
            "amp sampler mean {mean} vs {want}"
        );

        let pi = IntDistParams::new(0.6).unwrap();
        let samples = mc_sample_abs_prod(pi, n, 321);
        let mean: f64 = samples.iter().sum::<f64>() / n as f64;
        let want = dist_int::full_first_moment_int(pi);
        let sd: f64 = (samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(
            (mean - want).abs() <= 3.0 * sd / (n as f64).sqrt(),
            "int sampler mean {mean} vs {want}"
        );
    }

    #[test]
    fn mc_sampler_point_mass_corner() {
        let p = AmpDistParams::new(1.0, 1.0).unwrap();
        let samples = mc_sample_abs_diff(p, 100, 9);
        assert!(samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pair_stream_hits_requested_geometry() {
        let pairs = pair_stream(5, MeasurementKind::Amplitude, 40, 3);
        assert_eq!(pairs.len(), 40);
        for (x, y, rho, alpha) in &pairs {
            let alpha = alpha.unwrap();
            assert!((x.norm() - 1.0).abs() < 1e-12);
            if alpha > 1e-9 {
                let got_alpha = y.norm() / x.norm();
                assert!((got_alpha - alpha).abs() < 1e-10);
                let got_rho = x.dot(y) / (x.norm() * y.norm());
                assert!((got_rho - rho).abs() < 1e-9, "{got_rho} vs {rho}");
            }
        }
        let pairs = pair_stream(5, MeasurementKind::Intensity, 20, 4);
        for (x, y, rho, _) in &pairs {
            let um = x.axpy(-1.0, y);
            let up = x.axpy(1.0, y);
            let got = um.dot(&up) / (um.norm() * up.norm());
            assert!((got - rho).abs() < 1e-9);
        }
    }
}
