use crate::config::{Manifest, Sweep, SweepKey};
use crate::error::{CliError, Result};
use crate::output::{num, write_atomic, write_json, Csv};
use qsdc_core::channel_model::noise_budget;
use qsdc_core::security_capacity::{secrecy_capacity, CapacityParams, CapacityReport};
use rayon::prelude::*;
use serde_json::json;
use std::path::Path;

pub const HEADER: &[&str] = &[
    "distance_km",
    "T",
    "chi_line",
    "chi_tot",
    "i_ab",
    "chi_be",
    "c_single",
    "c_mux",
    "c_mux_bps",
    "c_single_effective",
    "c_mux_effective",
    "c_mux_bps_effective",
    "ratio",
    "negative",
    "reference_point",
    "sweep_value",
];

/// Distance at which the reference operating point is marked.
pub const REFERENCE_DISTANCE_KM: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct CapacityRow {
    pub params: CapacityParams,
    pub report: CapacityReport,
    pub sweep_value: f64,
}

fn row_cells(r: &CapacityRow, marked: bool) -> Vec<String> {
    let nb = noise_budget(&r.params.channel);
    let rep = &r.report;
    vec![
        num(r.params.channel.distance_km),
        num(r.params.channel.transmittance),
        num(nb.chi_line),
        num(nb.chi_tot),
        num(rep.i_ab),
        num(rep.chi_be),
        num(rep.c_single),
        num(rep.c_mux),
        num(rep.c_mux_bps),
        num(rep.c_single_effective),
        num(rep.c_mux_effective),
        num(rep.c_mux_bps_effective),
        num(rep.c_mux / rep.c_single),
        u8::from(rep.c_single < 0.0).to_string(),
        u8::from(marked).to_string(),
        num(r.sweep_value),
    ]
}

/// The grid: an explicit sweep, else the `[capacity]` distance range, else
/// the configured channel alone.
fn grid(manifest: &Manifest, sweep: Option<&Sweep>) -> Result<(Option<Sweep>, Vec<f64>)> {
    if let Some(s) = sweep {
        return Ok((Some(s.clone()), s.values()));
    }
    let c = manifest.capacity_section()?;
    match (c.distance_start_km, c.distance_stop_km, c.distance_step_km) {
        (Some(start), Some(stop), Some(step)) => {
            let s = Sweep::new("channel.distance_km", start, stop, step)
                .map_err(|e| CliError::Config(format!("[capacity] distance range: {e}")))?;
            let v = s.values();
            Ok((Some(s), v))
        }
        (None, None, None) => Ok((None, vec![f64::NAN])),
        _ => Err(CliError::Config("[capacity] distance_start_km, distance_stop_km, distance_step_km go together".into())),
    }
}

/// Evaluates every grid point for `n_modes` modes.
pub fn sweep_rows(manifest: &Manifest, sweep: Option<&Sweep>, n_modes: usize) -> Result<Vec<CapacityRow>> {
    let (sweep, values) = grid(manifest, sweep)?;
    values
        .par_iter()
        .map(|&v| {
            let m = match &sweep {
                Some(s) => manifest.with_value(&s.key, v)?,
                None => manifest.clone(),
            };
            let params = m.capacity(n_modes)?;
            let report = secrecy_capacity(&params)?;
            let sweep_value = if v.is_nan() { params.channel.distance_km } else { v };
            Ok(CapacityRow { params, report, sweep_value })
        })
        .collect()
}

/// Index of the row to flag as the reference point, if the distance range
/// covers it.
pub fn reference_index(rows: &[CapacityRow]) -> Option<usize> {
    let d: Vec<f64> = rows.iter().map(|r| r.params.channel.distance_km).collect();
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo <= REFERENCE_DISTANCE_KM && REFERENCE_DISTANCE_KM <= hi) {
        return None;
    }
    (0..d.len()).min_by(|&a, &b| {
        (d[a] - REFERENCE_DISTANCE_KM).abs().total_cmp(&(d[b] - REFERENCE_DISTANCE_KM).abs())
    })
}

fn write_sweep(rows: &[CapacityRow], parts: &Path, tag: &str, path: &Path) -> Result<()> {
    let mark = reference_index(rows);
    rows.par_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut c = Csv::default();
            c.row(row_cells(r, mark == Some(i)));
            write_atomic(&parts.join(format!("{tag}_{i:05}.csv")), c.as_str().as_bytes())
        })
        .collect::<Result<Vec<()>>>()?;
    let mut csv = Csv::new(HEADER);
    for i in 0..rows.len() {
        csv.append_raw(&std::fs::read_to_string(parts.join(format!("{tag}_{i:05}.csv")))?);
    }
    csv.write(path)
}

pub fn cmd_capacity(manifest: &Manifest, out: &Path, sweep: Option<&Sweep>) -> Result<()> {
    let n = manifest.oam()?.n_modes;
    let mut counts: Vec<usize> = vec![n];
    if n != 1 {
        counts.push(1);
    }
    let parts = out.join(".capacity_parts");
    std::fs::create_dir_all(&parts)?;
    let mut series = Vec::new();
    for &modes in &counts {
        let rows = sweep_rows(manifest, sweep, modes)?;
        let name = format!("capacity_n{modes}.csv");
        write_sweep(&rows, &parts, &format!("n{modes}"), &out.join(&name))?;
        series.push(json!({ "file": name, "column": "c_mux_bps_effective", "label": format!("N = {modes}") }));
    }
    std::fs::remove_dir_all(&parts)?;

    let key = match sweep {
        Some(s) => s.key.clone(),
        None => SweepKey("channel.distance_km".into()),
    };
    let fixed = manifest.capacity(n)?;
    write_json(
        &out.join("capacity_params.json"),
        &json!({
            "seed": manifest.file.seed,
            "swept_key": key.0,
            "modulation_variance": fixed.modulation_variance,
            "q_b": fixed.q_b,
            "q_e": fixed.q_e,
            "rep_rate_hz": fixed.rep_rate_hz,
            "n_modes": counts,
            "channel": manifest.file.channel,
            "reference_distance_km": REFERENCE_DISTANCE_KM,
        }),
    )?;
    write_json(
        &out.join("plot_manifest.json"),
        &json!({
            "title": "Secrecy capacity with OAM multiplexing",
            "kind": "line",
            "x": { "column": "sweep_value", "label": key.0 },
            "y": { "label": "Secrecy capacity (bit/s)", "scale": "log" },
            "series": series,
            "marker": { "column": "reference_point", "label": "Reference operating point" }
        }),
    )?;
    println!("capacity sweep for N in {counts:?} written to {}", out.display());
    Ok(())
}
