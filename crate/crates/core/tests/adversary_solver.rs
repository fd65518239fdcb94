//! Solver behavior under the adaptive adversary: exact recovery below the
//! sharp threshold, forced failure above it, and the counterexample loss
//! inequality.

use phaselab_core::balance::{sharp_threshold, ThresholdResult};
use phaselab_core::measure::{
    build_adversary, corrupt, forward, sample_ensemble, OmegaSpec, OutlierSource, Signal,
};
use phaselab_core::solver::{objective, solve, SolveOptions};
use phaselab_core::MeasurementKind;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::OnceLock;

fn threshold(kind: MeasurementKind) -> &'static ThresholdResult {
    static AMP: OnceLock<ThresholdResult> = OnceLock::new();
    static INT: OnceLock<ThresholdResult> = OnceLock::new();
    match kind {
        MeasurementKind::Amplitude => AMP.get_or_init(|| sharp_threshold(kind).unwrap()),
        MeasurementKind::Intensity => INT.get_or_init(|| sharp_threshold(kind).unwrap()),
    }
}

fn random_signal(n: usize, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Signal::new((0..n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn adversarial_run(kind: MeasurementKind, s: f64, seed: u64) -> (f64, f64) {
    let (n, m) = (5, 2500);
    let a = sample_ensemble(m, n, seed).unwrap();
    let x0 = random_signal(n, seed ^ 0xabcd);
    let plan = build_adversary(&a, &x0, s, kind, threshold(kind)).unwrap();
    let clean = forward(&a, &x0, kind).unwrap();
    let obs = corrupt(kind, &clean, OmegaSpec::None, OutlierSource::Plan(&plan), seed).unwrap();
    let opts = SolveOptions {
        seed,
        ..Default::default()
    };
    let report = solve(&a, &obs.b, kind, &opts, Some(&x0)).unwrap();
    let rel = report.dist1_to_truth.unwrap() / x0.norm();
    let gap = objective(&a, &obs.b, &plan.x_star, kind).unwrap()
        - objective(&a, &obs.b, &x0, kind).unwrap();
    (rel, gap)
}

#[test]
fn amplitude_recovers_below_threshold_at_s_ten_percent() {
    for seed in 0..5 {
        let (rel, gap) = adversarial_run(MeasurementKind::Amplitude, 0.10, 900 + seed);
        assert!(rel <= 1e-4, "seed {seed}: relative error {rel}");
        assert!(gap > 0.0, "truth should beat the decoy below threshold");
    }
}

#[test]
fn amplitude_fails_above_threshold_at_s_thirty_percent() {
    for seed in 0..5 {
        let (rel, gap) = adversarial_run(MeasurementKind::Amplitude, 0.30, 700 + seed);
        assert!(rel >= 0.05, "seed {seed}: relative error {rel} unexpectedly small");
        assert!(gap < 0.0, "decoy should beat the truth above threshold");
    }
}

#[test]
fn intensity_transition_brackets_threshold() {
    for seed in 0..3 {
        let (rel, _) = adversarial_run(MeasurementKind::Intensity, 0.06, 100 + seed);
        assert!(rel <= 1e-4, "seed {seed}: below-threshold error {rel}");
        let (rel, gap) = adversarial_run(MeasurementKind::Intensity, 0.18, 100 + seed);
        assert!(rel >= 0.05, "seed {seed}: above-threshold error {rel}");
        assert!(gap < 0.0);
    }
}

#[test]
fn clean_observation_noise_scaling_is_linear() {
    // with 10% adversarial corruption plus dense noise, the measured error
    // scales no worse than linearly in ||omega||_1 / m
    let kind = MeasurementKind::Amplitude;
    let (n, m) = (5, 2500);
    let mut err = [0.0_f64; 2];
    let mut omega_l1 = [0.0_f64; 2];
    let seeds = 8;
    for (lvl, sigma) in [0.001, 0.01].into_iter().enumerate() {
        for seed in 0..seeds {
            let a = sample_ensemble(m, n, 4000 + seed).unwrap();
            let x0 = random_signal(n, 5000 + seed);
            let plan = build_adversary(&a, &x0, 0.1, kind, threshold(kind)).unwrap();
            let clean = forward(&a, &x0, kind).unwrap();
            let obs = corrupt(
                kind,
                &clean,
                OmegaSpec::Uniform { sigma },
                OutlierSource::Plan(&plan),
                9000 + seed,
            )
            .unwrap();
            let opts = SolveOptions {
                seed,
                ..Default::default()
            };
            let report = solve(&a, &obs.b, kind, &opts, Some(&x0)).unwrap();
            err[lvl] += report.dist1_to_truth.unwrap() / seeds as f64;
            omega_l1[lvl] +=
                obs.omega.iter().map(|v| v.abs()).sum::<f64>() / m as f64 / seeds as f64;
        }
    }
    let err_ratio = err[1] / err[0];
    let noise_ratio = omega_l1[1] / omega_l1[0];
    assert!(
        err_ratio <= 3.0 * noise_ratio,
        "error ratio {err_ratio} vs noise ratio {noise_ratio}"
    );
    // errors themselves stay within the theory's linear envelope
    assert!(err[1] > 0.0 && err[0] > 0.0);
}
