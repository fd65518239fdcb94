//! CSV, JSON and gnuplot emission. CSV files are UTF-8 with a header row and
//! `.` decimal separator; a timestamp comment line is prepended unless the
//! run is `--deterministic`, so deterministic re-runs are byte-identical.

use crate::experiments::{TransitionRow, TransitionTable};
use phaselab_core::balance::{surface_to_csv, SurfacePoint};
use phaselab_core::verify::PairMargin;
use phaselab_core::{Error, MeasurementKind, Result};
use std::path::Path;

fn timestamp_comment(deterministic: bool) -> String {
    if deterministic {
        String::new()
    } else {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("# generated-unix-seconds: {secs}\n")
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::Domain(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, text)
        .map_err(|e| Error::Domain(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Domain(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

/// JSON-lines writer for audit records.
pub fn write_jsonl(path: &Path, records: &[serde_json::Value]) -> Result<()> {
    let mut text = String::new();
    for rec in records {
        text.push_str(&rec.to_string());
        text.push('\n');
    }
    write_text(path, &text)
}

/// Transition table CSV: one row per `(kind, s)` cell with the per-seed
/// errors in trailing columns.
pub fn transition_csv(table: &TransitionTable, deterministic: bool) -> String {
    let seeds = table.rows.first().map(|r| r.per_seed.len()).unwrap_or(0);
    let mut out = timestamp_comment(deterministic);
    out.push_str("kind,s,mean_rel_err,std_rel_err,mean_decoy_gap,failures");
    for i in 0..seeds {
        out.push_str(&format!(",err_seed{i}"));
    }
    out.push('\n');
    for row in &table.rows {
        out.push_str(&format!(
            "{},{:.6},{:.9e},{:.9e},{:.9e},{}",
            row.kind, row.s, row.mean_rel_err, row.std_rel_err, row.mean_decoy_gap, row.failures
        ));
        for v in &row.per_seed {
            out.push_str(&format!(",{v:.9e}"));
        }
        out.push('\n');
    }
    out
}

/// Surface CSV with the module's canonical schema plus the optional
/// timestamp comment.
pub fn surface_csv(
    kind: MeasurementKind,
    points: &[SurfacePoint],
    deterministic: bool,
) -> String {
    format!(
        "{}{}",
        timestamp_comment(deterministic),
        surface_to_csv(kind, points)
    )
}

/// Margin CSV: one row per probed pair.
pub fn margins_csv(s: f64, pairs: &[PairMargin], deterministic: bool) -> String {
    let mut out = timestamp_comment(deterministic);
    out.push_str("rho,alpha,s,margin\n");
    for p in pairs {
        let alpha = p
            .alpha
            .map(|a| format!("{a:.6}"))
            .unwrap_or_default();
        out.push_str(&format!("{:.6},{},{:.6},{:.9e}\n", p.rho, alpha, s, p.margin));
    }
    out
}

/// gnuplot script rendering a transition CSV.
pub fn transition_gnuplot(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key top left\n\
         set xlabel 'corruption fraction s'\n\
         set ylabel 'mean relative error'\n\
         set logscale y\n\
         plot '{csv_name}' using 2:($1 eq 'amplitude' ? $3 : 1/0) with linespoints title 'amplitude', \\\n\
         \x20    '{csv_name}' using 2:($1 eq 'intensity' ? $3 : 1/0) with linespoints title 'intensity'\n"
    )
}

/// gnuplot script rendering a surface CSV as a heat map.
pub fn surface_gnuplot(kind: MeasurementKind, csv_name: &str) -> String {
    match kind {
        MeasurementKind::Amplitude => format!(
            "set datafile separator ','\n\
             set xlabel 'rho'\n\
             set ylabel 'alpha'\n\
             set view map\n\
             splot '{csv_name}' using 1:2:3 with points pointtype 5 palette title 'balance point s'\n"
        ),
        MeasurementKind::Intensity => format!(
            "set datafile separator ','\n\
             set xlabel 'rho'\n\
             set ylabel 'balance point s'\n\
             plot '{csv_name}' using 1:2 with linespoints title 'intensity'\n"
        ),
    }
}

fn mean_err_line(r: &TransitionRow) -> String {
    format!("  {} s={:.3}: mean={:.3e}", r.kind, r.s, r.mean_rel_err)
}

/// Human-readable transition summary for the terminal.
pub fn transition_summary(table: &TransitionTable) -> String {
    let mut out = String::new();
    for kind in [MeasurementKind::Amplitude, MeasurementKind::Intensity] {
        let rows = table.rows_for(kind);
        if rows.is_empty() {
            continue;
        }
        out.push_str(&format!("{kind}:\n"));
        for r in rows {
            out.push_str(&mean_err_line(r));
            out.push('\n');
        }
        match table.transition_point(kind) {
            Some(s) => out.push_str(&format!("  transition point: s = {s:.3}\n")),
            None => out.push_str("  transition point: not crossed on this grid\n"),
        }
    }
    out
}
