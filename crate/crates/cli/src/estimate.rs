use crate::config::Manifest;
use crate::error::{CliError, Result};
use crate::output::write_json;
use qsdc_core::estimation::{estimate, per_mode_report, EstimationInput, PerModeReport};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Deserialize)]
struct DataRow {
    mode_index: usize,
    slot_index: usize,
    x: f64,
    y: f64,
}

#[derive(Debug, Deserialize)]
struct CalibrationRow {
    #[allow(dead_code)]
    slot_index: usize,
    y0: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Modes in ascending `mode_index`, each sorted by `slot_index`.
fn group(rows: Vec<DataRow>) -> BTreeMap<usize, (Vec<f64>, Vec<f64>)> {
    let mut by_mode: BTreeMap<usize, Vec<DataRow>> = BTreeMap::new();
    for r in rows {
        by_mode.entry(r.mode_index).or_default().push(r);
    }
    by_mode
        .into_iter()
        .map(|(m, mut v)| {
            v.sort_by_key(|r| r.slot_index);
            (m, (v.iter().map(|r| r.x).collect(), v.iter().map(|r| r.y).collect()))
        })
        .collect()
}

/// Per-mode reports plus a pooled report. The vacuum calibration is shared,
/// so the pooled report uses it once.
pub fn estimate_files(data: &Path, calibration: &Path, epsilon_pe: f64, eta: f64, v_el: f64) -> Result<PerModeReport> {
    let rows: Vec<DataRow> = read_rows(data)?;
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", data.display())));
    }
    let y0: Vec<f64> = read_rows::<CalibrationRow>(calibration)?.into_iter().map(|r| r.y0).collect();
    let modes = group(rows);
    let inputs: Vec<EstimationInput> = modes
        .values()
        .map(|(x, y)| EstimationInput { x: x.clone(), y: y.clone(), y0: y0.clone(), epsilon_pe })
        .collect();
    let fail = |e: qsdc_core::estimation::EstimationError| CliError::Input(e.to_string());
    let mut report = per_mode_report(&inputs, eta, v_el).map_err(fail)?;
    let pooled = EstimationInput {
        x: inputs.iter().flat_map(|i| i.x.iter().copied()).collect(),
        y: inputs.iter().flat_map(|i| i.y.iter().copied()).collect(),
        y0,
        epsilon_pe,
    };
    report.merged = estimate(&pooled, eta, v_el).map_err(fail)?;
    Ok(report)
}

pub fn cmd_estimate(manifest: &Manifest, out: &Path) -> Result<()> {
    let section = manifest.estimate_section()?;
    let channel = manifest.channel()?;
    if !(section.epsilon_pe > 0.0 && section.epsilon_pe < 1.0) {
        return Err(CliError::Config(format!("[estimate] epsilon_pe = {} must lie in (0, 1)", section.epsilon_pe)));
    }
    let report = estimate_files(
        &manifest.resolve(&section.data),
        &manifest.resolve(&section.calibration),
        section.epsilon_pe,
        channel.eta,
        channel.v_el,
    )?;
    std::fs::create_dir_all(out)?;
    write_json(&out.join("estimate.json"), &report)?;
    println!("{:>6} {:>10} {:>12} {:>12} {:>12}", "mode", "N", "T_hat", "eps_hat", "t_hat");
    for (i, r) in report.modes.iter().enumerate() {
        println!("{:>6} {:>10} {:>12.6} {:>12.6} {:>12.6}", i, r.n, r.transmittance_hat, r.excess_noise_hat, r.t_hat);
    }
    let m = &report.merged;
    println!("{:>6} {:>10} {:>12.6} {:>12.6} {:>12.6}", "all", m.n, m.transmittance_hat, m.excess_noise_hat, m.t_hat);
    Ok(())
}
