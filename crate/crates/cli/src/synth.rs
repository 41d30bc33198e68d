//! Synthetic estimation inputs: Gaussian displacements through the
//! classical-displacement channel view, plus a vacuum calibration run.

use crate::config::Manifest;
use crate::error::{CliError, Result};
use crate::output::{num, Csv};
use qsdc_core::channel_model::{transmit_pulse, ChannelParams};
use qsdc_core::gaussian_core::QuadraturePair;
use qsdc_core::rng::{Purpose, RngSeed};
use rand::Rng;
use rand_distr::{Normal, StandardNormal};
use std::path::Path;

/// Stream index of the calibration run, above any mode index.
const CALIBRATION_STREAM: u32 = u32::MAX;

pub struct SynthData {
    pub data: Csv,
    pub calibration: Csv,
}

pub fn synthesize(
    channel: &ChannelParams,
    modes: usize,
    samples_per_mode: usize,
    calibration_samples: usize,
    modulation_variance: f64,
    seed: RngSeed,
) -> Result<SynthData> {
    let normal = Normal::new(0.0, modulation_variance.sqrt())
        .map_err(|e| CliError::Config(format!("[synth] modulation_variance: {e}")))?;
    let mut data = Csv::new(&["mode_index", "slot_index", "x", "y"]);
    for m in 0..modes {
        let mut rng = seed.stream(Purpose::Synthesis, m as u32);
        for s in 0..samples_per_mode {
            let x: f64 = rng.sample(normal);
            let y = transmit_pulse(channel, QuadraturePair::new(x, 0.0), &mut rng).x;
            data.row([m.to_string(), s.to_string(), num(x), num(y)]);
        }
    }
    let mut calibration = Csv::new(&["slot_index", "y0"]);
    let mut rng = seed.stream(Purpose::Synthesis, CALIBRATION_STREAM);
    for s in 0..calibration_samples {
        let y0: f64 = rng.sample(StandardNormal);
        calibration.row([s.to_string(), num(y0)]);
    }
    Ok(SynthData { data, calibration })
}

pub fn cmd_synth(manifest: &Manifest, out: &Path) -> Result<()> {
    let s = manifest.synth_section()?;
    let channel = manifest.channel()?;
    let modes = manifest.oam()?.n_modes;
    let d = synthesize(&channel, modes, s.samples_per_mode, s.calibration_samples, s.modulation_variance, RngSeed(manifest.file.seed))?;
    d.data.write(&out.join("data.csv"))?;
    d.calibration.write(&out.join("calibration.csv"))?;
    println!("{modes} modes x {} samples written to {}", s.samples_per_mode, out.display());
    Ok(())
}
