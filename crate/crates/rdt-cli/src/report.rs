//! Report rendering and verification.
//!
//! Two views of one experiment: a machine-readable line file (deterministic,
//! byte-identical across reruns of the same config) and a human table on
//! stdout mirroring the accuracy-table layout with one line per (W, D) and
//! one column per method. Wall-clock timings appear only in the human view.

use crate::config::Method;
use crate::error::{CliError, Result};
use crate::experiment::ExperimentOutput;
use crate::formats::REPORT_MAGIC;
use std::fmt::Write as _;

pub fn render_machine(out: &ExperimentOutput) -> String {
    let cfg = &out.config;
    let mut s = String::new();
    let _ = writeln!(s, "{REPORT_MAGIC}");
    let _ = writeln!(
        s,
        "dataset classes={} per_class={} seed={} sigma_min={} sigma_max={} mean_min={} mean_max={}",
        cfg.classes,
        cfg.per_class,
        cfg.data_seed,
        cfg.sigma_range.0,
        cfg.sigma_range.1,
        cfg.mean_bounds.0,
        cfg.mean_bounds.1
    );
    let join = |xs: &[String]| xs.join(",");
    let _ = writeln!(
        s,
        "protocol runs={} master_seed={} loss={} lr_grid={} m_grid={} epochs={} chunk_epochs={} \
         restarts={} init_scale={} baseline={} depth_scaled={} stochastic_samples={}",
        cfg.runs,
        cfg.master_seed,
        cfg.loss.name(),
        join(&cfg.lr_grid.iter().map(|v| v.to_string()).collect::<Vec<_>>()),
        join(&cfg.m_grid.iter().map(|v| v.to_string()).collect::<Vec<_>>()),
        cfg.epochs,
        cfg.chunk_epochs,
        cfg.restarts,
        cfg.init_scale,
        if cfg.baseline { "on" } else { "off" },
        if cfg.depth_scaled { "on" } else { "off" },
        cfg.stochastic_samples
    );
    for row in &out.rows {
        let _ = write!(
            s,
            "row method={} width={} depth={} leaves={} lr={} m={} ok_runs={} acc_mean={} \
             acc_var={} acc_std={} coverage_mean={}",
            row.method.as_str(),
            row.width,
            row.depth,
            row.leaves,
            row.chosen_lr,
            row.chosen_m,
            row.ok_count(),
            row.acc_mean(),
            row.acc_var(),
            row.acc_std(),
            row.coverage_mean()
        );
        if let (Some(sm), Some(sv)) = (row.stoch_mean(), row.stoch_var()) {
            let _ = write!(s, " stoch_mean={sm} stoch_var={sv}");
        }
        let _ = writeln!(s);
        for run in &row.runs {
            let _ = write!(
                s,
                "run method={} width={} depth={} run={} seed={}",
                row.method.as_str(),
                row.width,
                row.depth,
                run.run_index,
                run.seed
            );
            match &run.result {
                Ok(m) => {
                    let _ = write!(
                        s,
                        " status=ok acc={} val_acc={} coverage={}",
                        m.accuracy, m.val_accuracy, m.coverage
                    );
                    if let Some((sa, se)) = m.stochastic {
                        let _ = write!(s, " stoch_acc={sa} stoch_se={se}");
                    }
                }
                Err(msg) => {
                    let _ = write!(s, " status=error message={:?}", msg);
                }
            }
            let _ = writeln!(s);
        }
    }
    s.push_str("end\n");
    s
}

/// Accuracy table in the familiar row layout, one method per column, with
/// mean +/- standard deviation (the machine file carries the variance too).
pub fn render_table(out: &ExperimentOutput) -> String {
    let mut s = String::new();
    let methods = &out.config.methods;
    let _ = write!(s, "  W   D     L");
    for m in methods {
        let name = match m {
            Method::Rdt => "RDT",
            Method::RandomTree => "Random Trees",
        };
        let _ = write!(s, " | {name:<15}");
    }
    let _ = writeln!(s);
    let mut seen = Vec::new();
    for row in &out.rows {
        let key = (row.width, row.depth);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let _ = write!(s, "{:>3} {:>3} {:>5}", row.width, row.depth, row.leaves);
        for m in methods {
            let cell = out
                .rows
                .iter()
                .find(|r| r.method == *m && (r.width, r.depth) == key)
                .map(|r| {
                    if r.ok_count() == 0 {
                        "failed".to_string()
                    } else {
                        format!("{:.2} +/- {:.2}", r.acc_mean(), r.acc_std())
                    }
                })
                .unwrap_or_else(|| "-".to_string());
            let _ = write!(s, " | {cell:<15}");
        }
        let _ = writeln!(s);
    }
    let _ = writeln!(s);
    for row in &out.rows {
        let _ = writeln!(
            s,
            "{} ({},{}): lr={} M={} wall={:.1}s",
            row.method.as_str(),
            row.width,
            row.depth,
            row.chosen_lr,
            row.chosen_m,
            row.wall_secs
        );
    }
    s
}

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

/// Re-derives every row's mean/variance from its run lines and checks them
/// against the row line. The report embeds enough to audit itself.
pub fn verify_report(text: &str) -> Result<()> {
    let fail = |msg: String| Err(CliError::Runtime(format!("report self-check: {msg}")));
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_MAGIC) {
        return fail("missing header".into());
    }
    if text.lines().last() != Some("end") {
        return fail("missing `end` line".into());
    }

    // Group run accuracies under a key identifying the row.
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    let mut runs: Vec<(String, f64)> = Vec::new();
    for line in text.lines() {
        if line.starts_with("row ") {
            let key = format!(
                "{}/{}/{}",
                field(line, "method").unwrap_or(""),
                field(line, "width").unwrap_or(""),
                field(line, "depth").unwrap_or("")
            );
            let mean: f64 = field(line, "acc_mean")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Runtime("report self-check: row without acc_mean".into()))?;
            let var: f64 = field(line, "acc_var")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Runtime("report self-check: row without acc_var".into()))?;
            rows.push((key, mean, var));
        } else if line.starts_with("run ") && field(line, "status") == Some("ok") {
            let key = format!(
                "{}/{}/{}",
                field(line, "method").unwrap_or(""),
                field(line, "width").unwrap_or(""),
                field(line, "depth").unwrap_or("")
            );
            let acc: f64 = field(line, "acc")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Runtime("report self-check: run without acc".into()))?;
            runs.push((key, acc));
        }
    }
    if rows.is_empty() {
        return fail("no rows".into());
    }
    for (key, mean, var) in &rows {
        let accs: Vec<f64> =
            runs.iter().filter(|(k, _)| k == key).map(|(_, a)| *a).collect();
        if accs.is_empty() {
            if !mean.is_nan() {
                return fail(format!("row {key} has no ok runs but a finite mean"));
            }
            continue;
        }
        let m = accs.iter().sum::<f64>() / accs.len() as f64;
        let v = accs.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / accs.len() as f64;
        if (m - mean).abs() > 1e-12 {
            return fail(format!("row {key}: mean {mean} but runs give {m}"));
        }
        if (v - var).abs() > 1e-12 {
            return fail(format!("row {key}: variance {var} but runs give {v}"));
        }
    }
    Ok(())
}
