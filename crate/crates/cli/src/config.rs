//! TOML experiment manifests.
//!
//! A manifest carries `config_version`, `seed` and one table per module.
//! Every command checks for the tables it needs; unknown keys are rejected.

use crate::error::{CliError, Result};
use qsdc_core::channel_model::{ChannelParams, EveStrategy, DEFAULT_ALPHA_DB_PER_KM};
use qsdc_core::gaussian_core::SqueezingParams;
use qsdc_core::oam_mux::OamConfig;
use qsdc_core::protocol_engine::{MappingParams, ProtocolConfig, QuadraturePolicy};
use qsdc_core::rng::RngSeed;
use qsdc_core::security_capacity::{CapacityParams, SignPair, DEFAULT_MIN_SLOTS};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CONFIG_VERSION: u32 = 1;
pub const SEED_ENV: &str = "QSDC_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub config_version: u32,
    pub seed: u64,
    pub source: Option<SourceSection>,
    pub channel: Option<ChannelSection>,
    pub eve: Option<EveStrategy>,
    pub oam: Option<OamConfig>,
    pub mapping: Option<MappingParams>,
    pub codec: Option<CodecSection>,
    pub session: Option<SessionSection>,
    pub capacity: Option<CapacitySection>,
    pub estimate: Option<EstimateSection>,
    pub synth: Option<SynthSection>,
    pub output: Option<OutputSection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub r: f64,
}

/// Exactly one of `distance_km` and `transmittance` is given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub distance_km: Option<f64>,
    pub transmittance: Option<f64>,
    pub alpha_db_per_km: Option<f64>,
    pub excess_noise: f64,
    pub eta: f64,
    pub v_el: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecSection {
    pub k: usize,
    pub n: usize,
    /// Random frames checked by `codec`.
    pub random_frames: Option<usize>,
    /// Seeds per `(k, n)` in the exhaustive small-code check.
    pub exhaustive_seeds: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSection {
    pub blocks: usize,
    pub block_bits: usize,
    pub check_fraction: f64,
    pub auth_fraction: f64,
    pub epsilon_pe: f64,
    pub min_check_slots: Option<usize>,
    pub quadrature: Option<QuadraturePolicy>,
    pub sign_pair: Option<SignPair>,
    pub impostor: Option<bool>,
    pub whitening: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    pub q_b: f64,
    pub q_e: f64,
    pub rep_rate_hz: f64,
    pub distance_start_km: Option<f64>,
    pub distance_stop_km: Option<f64>,
    pub distance_step_km: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    /// CSV with `mode_index, slot_index, x, y`.
    pub data: PathBuf,
    /// CSV with `slot_index, y0`.
    pub calibration: PathBuf,
    pub epsilon_pe: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub samples_per_mode: usize,
    pub calibration_samples: usize,
    pub modulation_variance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Write the per-slot CSV (large for full-size sessions).
    pub slots: Option<bool>,
}

/// A loaded manifest together with the raw table used for sweeps.
#[derive(Clone, Debug)]
pub struct Manifest {
    pub file: ConfigFile,
    pub table: toml::Table,
    pub base_dir: PathBuf,
}

fn need<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
    section.as_ref().ok_or_else(|| CliError::Config(format!("missing section [{name}]")))
}

fn check_version(file: &ConfigFile) -> Result<()> {
    if file.config_version != CONFIG_VERSION {
        return Err(CliError::Config(format!(
            "config_version = {} is not supported (expected {CONFIG_VERSION})",
            file.config_version
        )));
    }
    Ok(())
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Manifest> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        check_version(&file)?;
        let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Manifest { file, table, base_dir: base_dir.to_path_buf() })
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Manifest::parse(&text, &base).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Seed precedence: explicit flag, then `QSDC_SEED`, then the file.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> Result<()> {
        let seed = match flag {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
                Err(_) => self.file.seed,
            },
        };
        self.set_seed(seed);
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.file.seed = seed;
    }

    /// Copy of the manifest with one numeric key replaced.
    pub fn with_value(&self, key: &SweepKey, value: f64) -> Result<Manifest> {
        let mut table = self.table.clone();
        let (section, field) = key.path();
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(t) = entry else {
            return Err(CliError::Config(format!("[{section}] is not a table")));
        };
        let v = if key.is_integer() {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(CliError::Config(format!("{} needs non-negative integer values, got {value}", key.0)));
            }
            toml::Value::Integer(value as i64)
        } else {
            toml::Value::Float(value)
        };
        t.insert(field.to_string(), v);
        if key.0 == "oam.n_modes" {
            let charges = OamConfig::with_modes(value as usize).topological_charges;
            t.insert(
                "topological_charges".into(),
                toml::Value::Array(charges.into_iter().map(|c| toml::Value::Integer(c.into())).collect()),
            );
        }
        let mut file: ConfigFile =
            table.clone().try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        file.seed = self.file.seed;
        Ok(Manifest { file, table, base_dir: self.base_dir.clone() })
    }

    pub fn channel(&self) -> Result<ChannelParams> {
        let c = need(&self.file.channel, "channel")?;
        let alpha = c.alpha_db_per_km.unwrap_or(DEFAULT_ALPHA_DB_PER_KM);
        let params = match (c.distance_km, c.transmittance) {
            (Some(d), None) => ChannelParams::fiber(d, alpha, c.excess_noise, c.eta, c.v_el),
            (None, Some(t)) => ChannelParams::with_transmittance(t, c.excess_noise, c.eta, c.v_el),
            _ => return Err(CliError::Config("[channel] needs exactly one of distance_km and transmittance".into())),
        };
        params.map_err(|e| CliError::Config(format!("[channel] {e}")))
    }

    pub fn oam(&self) -> Result<OamConfig> {
        let o = need(&self.file.oam, "oam")?.clone();
        o.validate().map_err(|e| CliError::Config(format!("[oam] {e}")))?;
        Ok(o)
    }

    pub fn mapping(&self) -> Result<MappingParams> {
        need(&self.file.mapping, "mapping").copied()
    }

    pub fn protocol(&self) -> Result<ProtocolConfig> {
        let source = need(&self.file.source, "source")?;
        let codec = need(&self.file.codec, "codec")?;
        let s = need(&self.file.session, "session")?;
        let squeezing = SqueezingParams::new(source.r).map_err(|e| CliError::Config(format!("[source] {e}")))?;
        let config = ProtocolConfig {
            squeezing,
            channel: self.channel()?,
            eve: self.file.eve.unwrap_or_default(),
            oam: self.oam()?,
            mapping: self.mapping()?,
            codec_k: codec.k,
            codec_n: codec.n,
            blocks: s.blocks,
            block_bits: s.block_bits,
            check_fraction: s.check_fraction,
            auth_fraction: s.auth_fraction,
            epsilon_pe: s.epsilon_pe,
            min_check_slots: s.min_check_slots.unwrap_or(DEFAULT_MIN_SLOTS),
            quadrature: s.quadrature.unwrap_or_default(),
            sign_pair: s.sign_pair.unwrap_or_default(),
            impostor: s.impostor.unwrap_or(false),
            whitening: s.whitening.unwrap_or(true),
            seed: RngSeed(self.file.seed),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn capacity(&self, n_modes: usize) -> Result<CapacityParams> {
        let c = need(&self.file.capacity, "capacity")?;
        let params = CapacityParams {
            modulation_variance: self.mapping()?.modulation_variance,
            channel: self.channel()?,
            q_b: c.q_b,
            q_e: c.q_e,
            n_modes,
            rep_rate_hz: c.rep_rate_hz,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn capacity_section(&self) -> Result<&CapacitySection> {
        need(&self.file.capacity, "capacity")
    }

    pub fn estimate_section(&self) -> Result<&EstimateSection> {
        need(&self.file.estimate, "estimate")
    }

    pub fn synth_section(&self) -> Result<&SynthSection> {
        need(&self.file.synth, "synth")
    }

    pub fn write_slots(&self) -> bool {
        self.file.output.and_then(|o| o.slots).unwrap_or(true)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

const SWEEP_KEYS: &[(&str, bool)] = &[
    ("source.r", false),
    ("channel.distance_km", false),
    ("channel.transmittance", false),
    ("channel.alpha_db_per_km", false),
    ("channel.excess_noise", false),
    ("channel.eta", false),
    ("channel.v_el", false),
    ("eve.fraction", false),
    ("oam.n_modes", true),
    ("oam.crosstalk", false),
    ("mapping.bits_per_block", true),
    ("mapping.modulation_variance", false),
    ("mapping.clamp_sigmas", false),
    ("codec.k", true),
    ("codec.n", true),
    ("session.blocks", true),
    ("session.block_bits", true),
    ("session.check_fraction", false),
    ("session.auth_fraction", false),
    ("session.epsilon_pe", false),
    ("session.min_check_slots", true),
    ("capacity.q_b", false),
    ("capacity.q_e", false),
    ("capacity.rep_rate_hz", false),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SweepKey(pub String);

impl SweepKey {
    fn path(&self) -> (&str, &str) {
        self.0.split_once('.').expect("validated key")
    }

    fn is_integer(&self) -> bool {
        SWEEP_KEYS.iter().any(|(k, int)| *k == self.0 && *int)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    pub key: SweepKey,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    /// Parses `KEY=START:STOP:STEP`.
    pub fn parse(s: &str) -> Result<Sweep> {
        let bad = |m: &str| CliError::Config(format!("--sweep {s:?}: {m}"));
        let (key, range) = s.split_once('=').ok_or_else(|| bad("expected KEY=START:STOP:STEP"))?;
        let parts: Vec<&str> = range.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(bad("expected START:STOP:STEP"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(&format!("{t:?} is not a number")));
        Sweep::new(key, num(a)?, num(b)?, num(c)?).map_err(|e| match e {
            CliError::Config(m) => bad(&m),
            other => other,
        })
    }

    pub fn new(key: &str, start: f64, stop: f64, step: f64) -> Result<Sweep> {
        if !SWEEP_KEYS.iter().any(|(k, _)| *k == key) {
            let known: Vec<&str> = SWEEP_KEYS.iter().map(|(k, _)| *k).collect();
            return Err(CliError::Config(format!("unknown key {key:?}; sweepable keys: {}", known.join(", "))));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(CliError::Config("step must be > 0".into()));
        }
        if !(stop >= start && start.is_finite() && stop.is_finite()) {
            return Err(CliError::Config("need START <= STOP".into()));
        }
        Ok(Sweep { key: SweepKey(key.to_string()), start, stop, step })
    }

    /// Grid values `start + i·step` up to `stop` (inclusive within 1e-9 steps).
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
config_version = 1
seed = 3

[channel]
transmittance = 0.5
excess_noise = 0.01
eta = 0.5
v_el = 0.01
"#;

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("eta = 0.5\n", "");
        let Err(CliError::Config(msg)) = Manifest::parse(&text, Path::new(".")) else {
            panic!("expected config error")
        };
        assert!(msg.contains("eta"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = format!("{MINIMAL}bogus = 1\n");
        assert!(matches!(Manifest::parse(&text, Path::new(".")), Err(CliError::Config(_))));
    }

    #[test]
    fn version_is_checked() {
        let text = MINIMAL.replace("config_version = 1", "config_version = 9");
        assert!(matches!(Manifest::parse(&text, Path::new(".")), Err(CliError::Config(_))));
    }

    #[test]
    fn sweep_grid() {
        let s = Sweep::parse("channel.distance_km=0:100:1").unwrap();
        let v = s.values();
        assert_eq!(v.len(), 101);
        assert_eq!(v[100], 100.0);
        assert_eq!(Sweep::parse("source.r=0:1:0.1").unwrap().values().len(), 11);
        assert!(Sweep::parse("nope.key=0:1:1").is_err());
        assert!(Sweep::parse("source.r=0:1:0").is_err());
        assert!(Sweep::parse("source.r=1:0:0.1").is_err());
        assert!(Sweep::parse("source.r=0:1").is_err());
    }

    #[test]
    fn sweep_overrides_value() {
        let m = Manifest::parse(MINIMAL, Path::new(".")).unwrap();
        let key = Sweep::parse("channel.eta=0:1:1").unwrap().key;
        let m2 = m.with_value(&key, 0.25).unwrap();
        assert_eq!(m2.file.channel.unwrap().eta, 0.25);
        assert_eq!(m.file.channel.unwrap().eta, 0.5);
        let both = m.with_value(&SweepKey("channel.distance_km".into()), 5.0).unwrap();
        assert!(both.channel().is_err());
    }

    #[test]
    fn seed_flag_wins() {
        let mut m = Manifest::parse(MINIMAL, Path::new(".")).unwrap();
        m.resolve_seed(Some(99)).unwrap();
        assert_eq!(m.file.seed, 99);
        let key = Sweep::parse("channel.eta=0:1:1").unwrap().key;
        assert_eq!(m.with_value(&key, 0.3).unwrap().file.seed, 99);
        m.set_seed(u64::MAX);
        assert_eq!(m.with_value(&key, 0.3).unwrap().file.seed, u64::MAX);
    }
}
