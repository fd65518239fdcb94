//! `phaselab`: sharp corruption thresholds, phase-transition experiments and
//! verification suites for robust phase retrieval.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 failed
//! verification check.

use clap::{Parser, Subcommand, ValueEnum};
use phaselab_cli::config::{parse_noise, ConfigFile, ExperimentConfig, Flags, KindChoice};
use phaselab_cli::experiments::{
    gaussian_width_estimate, run_dkw, run_surface, run_threshold, run_transition,
    run_verify_rob, run_verify_stability, WidthSet,
};
use phaselab_cli::output;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Amplitude,
    Intensity,
    Both,
}

impl From<KindArg> for KindChoice {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Amplitude => KindChoice::Amplitude,
            KindArg::Intensity => KindChoice::Intensity,
            KindArg::Both => KindChoice::Both,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "phaselab",
    version,
    about = "Sharp adversarial-corruption thresholds and phase-transition experiments for nonlinear least-absolute-deviation phase retrieval"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Measurement kind(s) the experiment covers.
    #[arg(long, global = true, value_enum)]
    kind: Option<KindArg>,

    /// Signal dimension (default 5).
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Number of measurements (default 500 n; 100 n under --quick).
    #[arg(long, global = true)]
    m: Option<usize>,

    /// First corruption fraction of the grid.
    #[arg(long = "s-start", global = true)]
    s_start: Option<f64>,

    /// Last corruption fraction of the grid.
    #[arg(long = "s-stop", global = true)]
    s_stop: Option<f64>,

    /// Grid step between corruption fractions.
    #[arg(long = "s-step", global = true)]
    s_step: Option<f64>,

    /// Comma-separated seed list (default 0..9).
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,

    /// Dense-noise spec: none, uniform:SIGMA or gaussian:SIGMA.
    #[arg(long, global = true)]
    noise: Option<String>,

    /// Output directory for CSV/JSON/gnuplot artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Desk-quick mode: m = 100 n and a reduced iteration budget.
    #[arg(long, global = true)]
    quick: bool,

    /// Suppress timestamp headers so re-runs are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,

    /// JSON config file; its fields override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Compute the sharp corruption thresholds for both measurement kinds.
    Threshold,
    /// Balance-point surface over the distribution parameters.
    Surface {
        /// Parameter grid step in (0, 0.25].
        #[arg(long, default_value_t = 0.05)]
        grid_step: f64,
    },
    /// Phase-transition curves: relative error vs corruption fraction.
    Transition,
    /// Verify the robust outlier bound empirically (exit 3 on failure).
    VerifyRob {
        /// Corruption fraction (default: threshold - 0.05).
        #[arg(long)]
        s: Option<f64>,
        /// Number of probed signal pairs.
        #[arg(long, default_value_t = 200)]
        pairs: usize,
    },
    /// Verify the stability corridors (exit 3 on failure).
    VerifyStability {
        #[arg(long, default_value_t = 500)]
        pairs: usize,
        /// Corridor widening applied to both ends.
        #[arg(long, default_value_t = 0.05)]
        slack: f64,
    },
    /// DKW quantile-sandwich experiment (exit 3 on failure).
    Dkw {
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Scale ratio of the amplitude distribution (unused for intensity).
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value_t = 0.8)]
        eta: f64,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        reps: usize,
    },
    /// Monte-Carlo Gaussian width of the unit sphere or a sparse set.
    Width {
        /// `full` or `sparse:K`.
        #[arg(long, default_value = "full")]
        set: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successful exits
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}

fn run(cli: Cli) -> phaselab_core::Result<ExitCode> {
    let file = match &cli.config {
        Some(path) => match ConfigFile::load(path) {
            Ok(f) => Some(f),
            Err(e) => {
                eprintln!("error: {e}");
                return Ok(ExitCode::from(EXIT_USAGE));
            }
        },
        None => None,
    };
    let noise = match cli.noise.as_deref().map(parse_noise).transpose() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
    };
    let flags = Flags {
        kind: cli.kind.map(Into::into),
        n: cli.n,
        m: cli.m,
        s_start: cli.s_start,
        s_stop: cli.s_stop,
        s_step: cli.s_step,
        seeds: cli.seeds.clone(),
        noise,
        out: cli.out.clone(),
        quick: cli.quick,
        deterministic: cli.deterministic,
    };
    let cfg = match ExperimentConfig::resolve(flags, file) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
    };

    match cli.cmd {
        Cmd::Threshold => {
            let t0 = std::time::Instant::now();
            let summary = run_threshold(cfg.output_dir.as_deref())?;
            let elapsed = t0.elapsed().as_secs_f64();
            println!(
                "amplitude threshold: {:.4} +- {:.1e} at (rho, alpha) = ({:.4}, {:.4})",
                summary.amplitude.threshold,
                summary.amplitude.tolerance,
                summary.amplitude.argmin.rho(),
                summary.amplitude.argmin.alpha().unwrap_or(f64::NAN),
            );
            println!(
                "intensity threshold: {:.4} +- {:.1e} at rho = {:.4}",
                summary.intensity.threshold,
                summary.intensity.tolerance,
                summary.intensity.argmin.rho(),
            );
            println!("computed in {elapsed:.1}s");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Surface { grid_step } => {
            for kind in cfg.kind.kinds() {
                let points = run_surface(kind, grid_step)?;
                let csv = output::surface_csv(kind, &points, cfg.deterministic);
                let min = points
                    .iter()
                    .filter_map(|p| p.s_balance)
                    .fold(f64::INFINITY, f64::min);
                println!("{kind} surface: {} cells, minimum balance point {min:.4}", points.len());
                if let Some(dir) = &cfg.output_dir {
                    let csv_name = format!("surface_{kind}.csv");
                    output::write_text(&dir.join(&csv_name), &csv)?;
                    output::write_text(
                        &dir.join(format!("surface_{kind}.gp")),
                        &output::surface_gnuplot(kind, &csv_name),
                    )?;
                } else {
                    print!("{csv}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Transition => {
            let table = run_transition(&cfg)?;
            print!("{}", output::transition_summary(&table));
            if let Some(dir) = &cfg.output_dir {
                let csv = output::transition_csv(&table, cfg.deterministic);
                output::write_text(&dir.join("transition.csv"), &csv)?;
                output::write_text(
                    &dir.join("transition.gp"),
                    &output::transition_gnuplot("transition.csv"),
                )?;
                output::write_jsonl(&dir.join("plans.jsonl"), &table.audit)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::VerifyRob { s, pairs } => {
            let mut all_pass = true;
            for kind in cfg.kind.kinds() {
                let report = run_verify_rob(&cfg, kind, s, pairs)?;
                println!(
                    "{kind} rob check at s={:.4}: min margin {:.5} over {} pairs -> {}",
                    report.s,
                    report.min_margin,
                    report.pairs.len(),
                    if report.pass { "PASS" } else { "FAIL" }
                );
                if let Some(dir) = &cfg.output_dir {
                    output::write_text(
                        &dir.join(format!("rob_margins_{kind}.csv")),
                        &output::margins_csv(report.s, &report.pairs, cfg.deterministic),
                    )?;
                    output::write_json(&dir.join(format!("rob_summary_{kind}.json")), &report)?;
                }
                all_pass &= report.pass;
            }
            Ok(exit_check(all_pass))
        }
        Cmd::VerifyStability { pairs, slack } => {
            let mut all_pass = true;
            for kind in cfg.kind.kinds() {
                let report = run_verify_stability(&cfg, kind, pairs, slack)?;
                println!(
                    "{kind} stability: ratios in [{:.4}, {:.4}], corridor [{:.4}, {:.4}] + {:.2} -> {}",
                    report.min_ratio,
                    report.max_ratio,
                    report.lower_bound,
                    report.upper_bound,
                    report.slack,
                    if report.all_within { "PASS" } else { "FAIL" }
                );
                if let Some(dir) = &cfg.output_dir {
                    output::write_json(&dir.join(format!("stability_{kind}.json")), &report)?;
                }
                all_pass &= report.all_within;
            }
            Ok(exit_check(all_pass))
        }
        Cmd::Dkw {
            rho,
            alpha,
            eta,
            eps,
            samples,
            reps,
        } => {
            let mut all_pass = true;
            for kind in cfg.kind.kinds() {
                let report = run_dkw(kind, rho, alpha, eta, eps, samples, reps, cfg.seeds[0])?;
                println!(
                    "{kind} dkw sandwich: {}/{} repetitions held -> {}",
                    report.holds,
                    report.repetitions,
                    if report.pass { "PASS" } else { "FAIL" }
                );
                if let Some(dir) = &cfg.output_dir {
                    output::write_json(&dir.join(format!("dkw_{kind}.json")), &report)?;
                }
                all_pass &= report.pass;
            }
            Ok(exit_check(all_pass))
        }
        Cmd::Width { set, trials } => {
            let set_kind = match set.as_str() {
                "full" => WidthSet::FullSpace,
                other => match other.strip_prefix("sparse:").and_then(|k| k.parse().ok()) {
                    Some(k) => WidthSet::Sparse(k),
                    None => {
                        eprintln!("error: --set must be 'full' or 'sparse:K', got '{other}'");
                        return Ok(ExitCode::from(EXIT_USAGE));
                    }
                },
            };
            let est = gaussian_width_estimate(set_kind, cfg.n, trials, cfg.seeds[0])?;
            println!(
                "gaussian width of {:?} at n={}: {:.5} ({} trials)",
                est.set_kind, est.n, est.value, est.trials
            );
            if let Some(dir) = &cfg.output_dir {
                output::write_json(&dir.join("width.json"), &est)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_check(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
