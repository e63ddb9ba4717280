//! Configuration, deterministic Monte Carlo runners and result files.

mod config;
mod deploy;
pub mod plot;
mod runners;
mod table;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

pub use config::{
    ExperimentConfig, ExperimentKind, ModelOptions, NetworkOptions, OutputOptions, Overrides,
    PhysicalParams, QosSpec, Sweep, DEFAULT_SEED,
};
pub use deploy::{deploy_in_disk, deploy_in_rect, deploy_users, trial_rng};
pub use runners::{
    network_scene, run, run_fig2, run_fig3, run_fig4, run_maxmin_example, run_network_demo,
    RunOutput,
};
pub use table::{
    describe, histogram, write_csv, AssignmentRow, HistogramRow, NetworkSummaryRow, ResultRow,
    ResultTable, SummaryRow, TimingRow, TraceRow, AUDIT_TOL,
};

use crate::error::Result;
use plot::{line_chart, Series};

/// Writes every table of `out` (and plots, when enabled) into the output
/// directory as `<experiment>_<table>.csv|svg`, skipping empty tables.
/// Returns the paths written.
pub fn write_outputs(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let name = out.experiment.name();
    let path = |table: &str, ext: &str| dir.join(format!("{name}_{table}.{ext}"));
    let mut written = Vec::new();

    let p = path("results", "csv");
    out.table.write_csv(&p)?;
    written.push(p);
    write_nonempty(&mut written, path("summary", "csv"), &out.summary)?;
    write_nonempty(&mut written, path("histogram", "csv"), &out.histogram)?;
    if cfg.output.trace {
        write_nonempty(&mut written, path("trace", "csv"), &out.traces)?;
    }
    if cfg.output.timing {
        write_nonempty(&mut written, path("timing", "csv"), &out.timings)?;
    }
    write_nonempty(&mut written, path("assignment", "csv"), &out.assignments)?;
    write_nonempty(
        &mut written,
        path("network_summary", "csv"),
        &out.network_summary,
    )?;
    if cfg.output.plots {
        if let Some(svg) = chart(out) {
            let p = path("plot", "svg");
            std::fs::write(&p, svg)?;
            written.push(p);
        }
    }
    Ok(written)
}

fn write_nonempty<T: Serialize>(
    written: &mut Vec<PathBuf>,
    path: PathBuf,
    rows: &[T],
) -> Result<()> {
    if !rows.is_empty() {
        write_csv(&path, rows)?;
        written.push(path);
    }
    Ok(())
}

fn chart(out: &RunOutput) -> Option<String> {
    match out.experiment {
        ExperimentKind::Fig2 => {
            let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            let total: f64 = out
                .summary
                .iter()
                .map(|s| s.feasible)
                .max()
                .unwrap_or(1)
                .max(1) as f64;
            for h in &out.histogram {
                let key = format!("TSNR {} dB, eps {}, K {}", h.tsnr_db, h.epsilon, h.k);
                let series = groups.entry(key).or_default();
                series.push((h.bin_lo, h.count as f64 / total));
                series.push((h.bin_hi, h.count as f64 / total));
            }
            let series: Vec<Series> = groups
                .into_iter()
                .map(|(label, points)| Series { label, points })
                .collect();
            Some(line_chart(
                "Sum rate distribution",
                "sum rate (b/s/Hz)",
                "fraction of trials",
                &series,
            ))
        }
        ExperimentKind::Fig3 | ExperimentKind::Fig4 => {
            let mut groups: BTreeMap<(usize, String, String), Vec<(f64, f64)>> = BTreeMap::new();
            for s in &out.summary {
                if let Some(mean) = s.mean {
                    groups
                        .entry((s.k, format!("{:.4}", s.epsilon), s.qos.clone()))
                        .or_default()
                        .push((s.tsnr_db, mean));
                }
            }
            let series: Vec<Series> = groups
                .into_iter()
                .map(|((k, eps, qos), points)| Series {
                    label: format!("K {k}, eps {}, T {qos}", eps.trim_end_matches('0')),
                    points,
                })
                .collect();
            let (title, y) = if out.experiment == ExperimentKind::Fig3 {
                ("Mean max-sum rate", "sum rate (b/s/Hz)")
            } else {
                ("Mean max-min rate", "min rate (b/s/Hz)")
            };
            Some(line_chart(title, "TSNR (dB)", y, &series))
        }
        ExperimentKind::MaxminExample | ExperimentKind::NetworkDemo => None,
    }
}
