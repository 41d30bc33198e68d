use crate::config::{Manifest, Sweep};
use crate::error::{CliError, Result};
use crate::output::{num, opt_num, write_atomic, write_json, Csv};
use qsdc_core::protocol_engine::{run_session, Phase, SessionStatus, SessionTranscript};
use rayon::prelude::*;
use serde_json::json;
use std::path::Path;

const SLOT_HEADER: &[&str] = &["phase", "mode", "slot", "d_true", "x_m", "p_m", "d_hat", "block_id"];
const BLOCK_HEADER: &[&str] = &[
    "block_id",
    "channel_bits",
    "channel_bit_errors",
    "channel_ber",
    "symbol_errors",
    "message_bits",
    "message_bit_errors",
    "message_ber",
];
const SUMMARY_HEADER: &[&str] = &[
    "index",
    "sweep_value",
    "status",
    "security_statistic",
    "auth_statistic",
    "gain_estimate",
    "transmittance_hat",
    "excess_noise_hat",
    "effective_noise_variance",
    "oracle_symbol_error",
    "oracle_bit_error",
    "symbol_error_rate",
    "channel_ber",
    "message_ber",
];

fn status_name(s: SessionStatus) -> &'static str {
    match s {
        SessionStatus::Completed => "COMPLETED",
        SessionStatus::SecurityAbort => "SECURITY_ABORT",
        SessionStatus::AuthAbort => "AUTH_ABORT",
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Check => "check",
        Phase::Auth => "auth",
        Phase::Payload => "payload",
    }
}

fn slot_csv(t: &SessionTranscript) -> Csv {
    let mut csv = Csv::new(SLOT_HEADER);
    let opt_usize = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in &t.slots {
        csv.row([
            phase_name(s.phase).to_string(),
            opt_usize(s.mode),
            s.slot.to_string(),
            opt_num(s.d_true),
            opt_num(s.x_m),
            opt_num(s.p_m),
            opt_num(s.d_hat),
            opt_usize(s.block_id),
        ]);
    }
    csv
}

fn block_csv(t: &SessionTranscript) -> Csv {
    let mut csv = Csv::new(BLOCK_HEADER);
    for b in &t.blocks {
        csv.row([
            b.block_id.to_string(),
            b.channel_bits.to_string(),
            b.channel_bit_errors.to_string(),
            num(b.channel_bit_errors as f64 / b.channel_bits as f64),
            b.symbol_errors.to_string(),
            b.message_bits.to_string(),
            b.message_bit_errors.to_string(),
            num(b.message_bit_errors as f64 / b.message_bits as f64),
        ]);
    }
    csv
}

fn summary_row(index: usize, sweep_value: Option<f64>, t: &SessionTranscript) -> Vec<String> {
    let est = t.estimation.as_ref();
    let payload = t.payload.as_ref();
    vec![
        index.to_string(),
        opt_num(sweep_value),
        status_name(t.status).to_string(),
        num(t.security.statistic),
        opt_num(t.authentication.map(|a| a.statistic)),
        opt_num(t.gain_estimate),
        opt_num(est.map(|e| e.transmittance_hat)),
        opt_num(t.excess_noise_source_corrected),
        num(t.effective_noise_variance),
        num(t.oracle.symbol_error),
        num(t.oracle.bit_error),
        opt_num(payload.map(|p| p.symbol_error_rate)),
        opt_num(payload.map(|p| p.channel_ber)),
        opt_num(payload.map(|p| p.message_ber)),
    ]
}

fn plot_manifest() -> serde_json::Value {
    json!({
        "title": "Bit error rate per information block",
        "kind": "scatter",
        "x": { "file": "blocks.csv", "column": "block_id", "label": "Block index" },
        "y": { "label": "Bit error rate" },
        "series": [
            { "file": "blocks.csv", "column": "channel_ber", "label": "Channel BER" },
            { "file": "blocks.csv", "column": "message_ber", "label": "Decoded message BER" }
        ],
        "reference_lines": [
            { "file": "transcript.json", "field": "oracle.bit_error", "label": "Oracle BER" }
        ]
    })
}

/// Runs one session and writes its artefacts into `dir`.
pub fn run_point(manifest: &Manifest, dir: &Path) -> Result<SessionTranscript> {
    let config = manifest.protocol()?;
    let t = run_session(&config)?;
    if t.status == SessionStatus::Completed && t.decoded.len() != config.blocks {
        return Err(CliError::Internal(format!("{} decoded blocks, {} configured", t.decoded.len(), config.blocks)));
    }
    if t.slots.len() != t.counts.total {
        return Err(CliError::Internal("slot records do not cover the session".into()));
    }
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("transcript.json"), &t)?;
    write_json(&dir.join("codec_seed.json"), &t.codec)?;
    write_json(&dir.join("config.json"), &config)?;
    block_csv(&t).write(&dir.join("blocks.csv"))?;
    if manifest.write_slots() {
        slot_csv(&t).write(&dir.join("slots.csv"))?;
    }
    write_json(&dir.join("plot_manifest.json"), &plot_manifest())?;
    Ok(t)
}

fn describe(t: &SessionTranscript) -> String {
    match &t.payload {
        Some(p) => format!(
            "{}: channel BER {:.6} (oracle {:.6}), message BER {:.6}, {} of {} blocks with errors",
            status_name(t.status),
            p.channel_ber,
            t.oracle.bit_error,
            p.message_ber,
            p.blocks_with_errors,
            t.blocks.len()
        ),
        None => format!("{}: security statistic {:.6}", status_name(t.status), t.security.statistic),
    }
}

pub fn cmd_session(manifest: &Manifest, out: &Path, sweep: Option<&Sweep>) -> Result<()> {
    let Some(sweep) = sweep else {
        let t = run_point(manifest, out)?;
        let mut csv = Csv::new(SUMMARY_HEADER);
        csv.row(summary_row(0, None, &t));
        csv.write(&out.join("summary.csv"))?;
        println!("{}", describe(&t));
        return Ok(());
    };
    let values = sweep.values();
    let points: Vec<Manifest> = values.iter().map(|&v| manifest.with_value(&sweep.key, v)).collect::<Result<_>>()?;
    let dirs: Vec<_> = (0..values.len()).map(|i| out.join(format!("point_{i:04}"))).collect();
    points
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let t = run_point(m, &dirs[i])?;
            let mut row = Csv::default();
            row.row(summary_row(i, Some(values[i]), &t));
            write_atomic(&dirs[i].join("summary_row.csv"), row.as_str().as_bytes())
        })
        .collect::<Result<Vec<()>>>()?;
    let mut merged = Csv::new(SUMMARY_HEADER);
    for d in &dirs {
        merged.append_raw(&std::fs::read_to_string(d.join("summary_row.csv"))?);
    }
    merged.write(&out.join("ber_sweep.csv"))?;
    write_json(
        &out.join("plot_manifest.json"),
        &json!({
            "title": "Bit error rate sweep",
            "kind": "line",
            "x": { "file": "ber_sweep.csv", "column": "sweep_value", "label": sweep.key.0 },
            "y": { "label": "Bit error rate" },
            "series": [
                { "file": "ber_sweep.csv", "column": "channel_ber", "label": "Session channel BER" },
                { "file": "ber_sweep.csv", "column": "oracle_bit_error", "label": "Oracle BER" }
            ]
        }),
    )?;
    println!("{} sweep points written to {}", values.len(), out.display());
    Ok(())
}
