//! End-to-end session: entangled source, security and authentication
//! gates, mask coding, Gaussian mapping, OAM multiplexing, channel, CV Bell
//! detection and decoding.
//!
//! Slot schedule. The session needs `S` payload symbols, which round-robin
//! multiplexing pads to `P = ⌈S/N⌉·N` payload pulses. With check fraction
//! `f_c` and authentication fraction `f_a` the session runs
//! `⌈P/(1 − f_c − f_a)⌉` slots; the check and authentication slots are
//! `round(f·total)` each and the remainder are payload slots. Slot phases are
//! shuffled before anything is transmitted.
//!
//! Check slots. Alice keeps `S_M` and reads both of its quadratures, Bob
//! reads `S_C` after the channel. From these pairs Bob's gain `√(ηT̂)` is
//! estimated by regressing his outcome on `tanh(2r)·x_A` (the conditional
//! mean of the partner mode), and the weighted entanglement statistic uses
//! `a² = √(ηT̂)`. Without squeezing there is nothing to regress on and the
//! session ends at the security gate whatever the statistic says.
//!
//! Payload slots. The block's balanced bits are cut into `b`-bit symbols and
//! mapped to displacements on `S_M`. Both beams cross the channel, crosstalk
//! is applied to the multiplexed `S_M` at demultiplexing, and Bob forms
//! `d̂ = √2·x_m/√(ηT̂)` (or `√2·p_m/√(ηT̂)` for `p` slots).

use crate::channel_model::{eavesdropper_tap, transmit_state, ChannelError, ChannelParams, EveStrategy};
use crate::estimation::{estimate, EstimationInput, EstimationReport};
use crate::gaussian_core::{make_two_mode_entangled, QuadraturePair, SqueezingParams, TwoModeState};
use crate::gaussian_map::{block_error_oracle, MapError, MappingTable, TailMode, DEFAULT_CLAMP_SIGMAS};
use crate::gf2::BitVec;
use crate::mask_codec::{build_random_codec, CodecError, CodecSeedRecord, MaskCodec, Whitener};
use crate::oam_mux::{demux, mux, FrameHeader, Leak, ModeFrame, MuxError, OamConfig};
use crate::rng::{Purpose, RngSeed, SimRng};
use crate::security_capacity::{security_check_weighted, SecurityCheckResult, SecurityError, SignPair, DEFAULT_MIN_SLOTS};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Mapping(#[from] MapError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Mux(#[from] MuxError),
    #[error(transparent)]
    Security(#[from] SecurityError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuadraturePolicy {
    /// Every payload symbol displaces `x`.
    #[default]
    X,
    /// Even serial positions displace `x`, odd positions `p`.
    Alternate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingParams {
    pub bits_per_block: u32,
    pub modulation_variance: f64,
    #[serde(default)]
    pub tail: TailMode,
    #[serde(default = "default_clamp_sigmas")]
    pub clamp_sigmas: f64,
}

fn default_clamp_sigmas() -> f64 {
    DEFAULT_CLAMP_SIGMAS
}

impl Default for MappingParams {
    fn default() -> Self {
        MappingParams { bits_per_block: 3, modulation_variance: 8.0, tail: TailMode::Clamp, clamp_sigmas: DEFAULT_CLAMP_SIGMAS }
    }
}

impl MappingParams {
    pub fn table(&self) -> Result<MappingTable, MapError> {
        MappingTable::with_tail(self.bits_per_block, self.modulation_variance, self.tail, self.clamp_sigmas)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub squeezing: SqueezingParams,
    pub channel: ChannelParams,
    pub eve: EveStrategy,
    pub oam: OamConfig,
    pub mapping: MappingParams,
    pub codec_k: usize,
    pub codec_n: usize,
    pub blocks: usize,
    pub block_bits: usize,
    pub check_fraction: f64,
    pub auth_fraction: f64,
    pub epsilon_pe: f64,
    pub min_check_slots: usize,
    pub quadrature: QuadraturePolicy,
    pub sign_pair: SignPair,
    /// Replace Bob by a party without access to `S_C` during authentication.
    pub impostor: bool,
    /// XOR-whiten the masked bits before mapping.
    pub whitening: bool,
    pub seed: RngSeed,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            squeezing: SqueezingParams::new(1.0).expect("valid"),
            channel: ChannelParams::with_transmittance(0.6275, 0.0184, 0.5, 0.01).expect("valid"),
            eve: EveStrategy::None,
            oam: OamConfig::default(),
            mapping: MappingParams::default(),
            codec_k: 655,
            codec_n: 1310,
            blocks: 800,
            block_bits: 1310,
            check_fraction: 0.1,
            auth_fraction: 0.05,
            epsilon_pe: 0.01,
            min_check_slots: DEFAULT_MIN_SLOTS,
            quadrature: QuadraturePolicy::X,
            sign_pair: SignPair::MinusXPlusP,
            impostor: false,
            whitening: true,
            seed: RngSeed(42),
        }
    }
}

/// Slot bookkeeping derived from a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SlotCounts {
    pub total: usize,
    pub check: usize,
    pub auth: usize,
    /// Payload pulses including multiplexer padding.
    pub payload: usize,
    pub padding: usize,
    pub symbols_per_block: usize,
    pub frames_per_block: usize,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: String| Err(SessionError::InvalidConfig(m));
        self.channel.validate()?;
        self.eve.validate()?;
        self.oam.validate()?;
        self.mapping.table()?;
        if self.codec_k == 0 || self.codec_k >= self.codec_n {
            return bad(format!("codec dimensions need 0 < k < n, got k={} n={}", self.codec_k, self.codec_n));
        }
        if self.blocks == 0 || self.block_bits == 0 {
            return bad("blocks and block_bits must be >= 1".into());
        }
        let (fc, fa) = (self.check_fraction, self.auth_fraction);
        if !(fc > 0.0 && fa > 0.0 && fc + fa < 1.0) {
            return bad(format!("need check_fraction > 0, auth_fraction > 0 and a sum below 1, got {fc} + {fa}"));
        }
        if !(self.epsilon_pe > 0.0 && self.epsilon_pe < 1.0) {
            return bad(format!("epsilon_pe must lie in (0, 1), got {}", self.epsilon_pe));
        }
        let counts = self.slot_counts();
        let need = self.min_check_slots.max(2);
        if counts.check < need || counts.auth < need {
            return bad(format!(
                "{} check and {} authentication slots, at least {need} of each are required",
                counts.check, counts.auth
            ));
        }
        Ok(())
    }

    pub fn slot_counts(&self) -> SlotCounts {
        let b = self.mapping.bits_per_block as usize;
        let frames_per_block = self.block_bits.div_ceil(self.codec_k);
        let symbols_per_block = (frames_per_block * self.codec_n).div_ceil(b);
        let symbols = symbols_per_block * self.blocks;
        let n = self.oam.n_modes.max(1);
        let payload = symbols.div_ceil(n) * n;
        let total = (payload as f64 / (1.0 - self.check_fraction - self.auth_fraction)).ceil() as usize;
        let check = (self.check_fraction * total as f64).round() as usize;
        let auth = (self.auth_fraction * total as f64).round() as usize;
        let total = payload + check + auth;
        SlotCounts { total, check, auth, payload, padding: payload - symbols, symbols_per_block, frames_per_block }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionStatus {
    Completed,
    SecurityAbort,
    AuthAbort,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Check,
    Auth,
    Payload,
}

/// Joint measurement of signal and detection beams.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BellOutcome {
    pub x_m: f64,
    pub p_m: f64,
}

/// `x_m = (x_M − x_C)/√2`, `p_m = (p_M + p_C)/√2`.
pub fn bell_measure(signal: QuadraturePair, detection: QuadraturePair) -> BellOutcome {
    BellOutcome { x_m: (signal.x - detection.x) * FRAC_1_SQRT_2, p_m: (signal.p + detection.p) * FRAC_1_SQRT_2 }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlotRecord {
    pub phase: Phase,
    pub mode: Option<usize>,
    pub slot: usize,
    pub d_true: Option<f64>,
    pub x_m: Option<f64>,
    pub p_m: Option<f64>,
    pub d_hat: Option<f64>,
    pub block_id: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlockRecord {
    pub block_id: usize,
    pub channel_bits: usize,
    pub channel_bit_errors: usize,
    pub symbol_errors: usize,
    pub message_bits: usize,
    pub message_bit_errors: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PayloadSummary {
    pub symbols: usize,
    pub symbol_errors: usize,
    pub symbol_error_rate: f64,
    pub channel_bits: usize,
    pub channel_bit_errors: usize,
    pub channel_ber: f64,
    pub message_bits: usize,
    pub message_bit_errors: usize,
    pub message_ber: f64,
    pub blocks_with_errors: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleSummary {
    pub noise_variance: f64,
    pub symbol_error: f64,
    pub bit_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
pub struct Counters {
    pub pulses_generated: usize,
    pub eve_intercepts: usize,
    pub codec_seed_draws: usize,
    pub frames_encoded: usize,
    pub frames_decoded: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SessionTranscript {
    pub status: SessionStatus,
    pub seed: RngSeed,
    pub counts: SlotCounts,
    pub codec: CodecSeedRecord,
    pub security: SecurityCheckResult,
    pub authentication: Option<SecurityCheckResult>,
    pub estimation: Option<EstimationReport>,
    /// `ε̂ + 1 − sech(2r)`: the estimate with the partner-mode conditional
    /// variance removed.
    pub excess_noise_source_corrected: Option<f64>,
    /// `√(ηT̂)` used for weighting and rescaling.
    pub gain_estimate: Option<f64>,
    pub effective_noise_variance: f64,
    pub oracle: OracleSummary,
    pub frame_header: Option<FrameHeader>,
    pub payload: Option<PayloadSummary>,
    pub blocks: Vec<BlockRecord>,
    pub counters: Counters,
    #[serde(skip)]
    pub slots: Vec<SlotRecord>,
    #[serde(skip)]
    pub messages: Vec<BitVec>,
    #[serde(skip)]
    pub decoded: Vec<BitVec>,
}

/// Fraction of payload pulses whose crosstalk neighbour is displaced along
/// the same quadrature.
fn same_quadrature_fraction(config: &ProtocolConfig) -> f64 {
    match config.quadrature {
        QuadraturePolicy::X => 1.0,
        QuadraturePolicy::Alternate => {
            let n = config.oam.n_modes;
            // positions pos and pos+1 cover both parities of pos·N
            let same = (0..2 * n)
                .filter(|&k| {
                    let (pos, m) = (k / n, k % n);
                    let i = pos * n + m;
                    let j = pos * n + (m + 1) % n;
                    i % 2 == j % 2
                })
                .count();
            same as f64 / (2 * n) as f64
        }
    }
}

/// Variance of `d̂ − d` for the configured pipeline, evaluated at the true
/// channel parameters:
///
/// ```text
/// 2e^{−2r} + 2(1 − ηT + ηTε + v_el)/(ηT)
///   + c²·[cosh 2r + (1 − ηT + ηTε + v_el)/(ηT) + f·Var(d)]     (N > 1)
/// ```
///
/// The first term is the squeezed EPR combination, the second the noise the
/// channel adds to both beams, rescaled. The crosstalk term is the leaked
/// neighbour pulse (thermal marginal, its channel noise and, for a fraction
/// `f` of pulses, its displacement).
pub fn effective_noise_variance(config: &ProtocolConfig) -> Result<f64, SessionError> {
    let r = config.squeezing.r();
    let ch = &config.channel;
    let g2 = ch.eta * ch.transmittance;
    let added = ch.added_noise_variance() / g2;
    let base = 2.0 * (-2.0 * r).exp() + 2.0 * added;
    let c = config.oam.crosstalk;
    if config.oam.n_modes < 2 || c == 0.0 {
        return Ok(base);
    }
    let vd = config.mapping.table()?.ensemble_variance();
    Ok(base + c * c * ((2.0 * r).cosh() + added + same_quadrature_fraction(config) * vd))
}

fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

#[derive(Clone, Copy, Debug)]
struct PayloadSymbol {
    value: f64,
    on_p: bool,
    real: bool,
}

#[derive(Clone, Copy, Debug)]
struct Received {
    sc: QuadraturePair,
    sm: QuadraturePair,
}

impl Leak for Received {
    fn leak(self, neighbour: Self, c: f64) -> Self {
        // only the multiplexed signal beam is mode-sorted
        Received { sc: self.sc, sm: self.sm.leak(neighbour.sm, c) }
    }
}

struct GateOutcome {
    alice: Vec<QuadraturePair>,
    bob: Vec<QuadraturePair>,
    intercepts: usize,
}

fn run_gate(
    config: &ProtocolConfig,
    slots: usize,
    source: &mut SimRng,
    channel: &mut SimRng,
    eve: &mut SimRng,
    impostor: Option<&mut SimRng>,
) -> GateOutcome {
    let mut alice = Vec::with_capacity(slots);
    let mut bob = Vec::with_capacity(slots);
    let mut intercepts = 0;
    let mut impostor = impostor;
    for _ in 0..slots {
        let s = make_two_mode_entangled(config.squeezing, source);
        let (tapped, rec) = eavesdropper_tap(&config.eve, s.sc, eve);
        intercepts += usize::from(rec.outcome.is_some());
        let at_bob = transmit_state(&config.channel, tapped, channel);
        let announced = match impostor.as_deref_mut() {
            // an impostor announces outcomes from a beam of their own
            Some(rng) => transmit_state(&config.channel, make_two_mode_entangled(config.squeezing, rng).sc, rng),
            None => at_bob,
        };
        alice.push(s.sm);
        bob.push(announced);
    }
    GateOutcome { alice, bob, intercepts }
}

/// Gain estimate from check-slot pairs; `None` without squeezing.
fn estimate_gain(
    config: &ProtocolConfig,
    alice: &[QuadraturePair],
    bob: &[QuadraturePair],
) -> Option<(EstimationReport, f64)> {
    let r = config.squeezing.r();
    let k = (2.0 * r).tanh();
    if k == 0.0 {
        return None;
    }
    let mut x = Vec::with_capacity(2 * alice.len());
    let mut y = Vec::with_capacity(2 * alice.len());
    for (a, b) in alice.iter().zip(bob) {
        x.push(k * a.x);
        y.push(b.x);
    }
    for (a, b) in alice.iter().zip(bob) {
        x.push(-k * a.p);
        y.push(b.p);
    }
    let mut cal = config.seed.stream(Purpose::Calibration, 0);
    let y0: Vec<f64> = (0..x.len()).map(|_| std_normal(&mut cal)).collect();
    let input = EstimationInput { x, y, y0, epsilon_pe: config.epsilon_pe };
    let report = estimate(&input, config.channel.eta, config.channel.v_el).ok()?;
    let corrected = report.excess_noise_hat + 1.0 - 1.0 / (2.0 * r).cosh();
    Some((report, corrected))
}

fn bits_to_symbols(bits: &BitVec, b: usize) -> Vec<u32> {
    (0..bits.len() / b)
        .map(|s| (0..b).fold(0u32, |acc, j| (acc << 1) | u32::from(bits.get(s * b + j))))
        .collect()
}

fn symbols_to_bits(symbols: &[u32], b: usize) -> BitVec {
    BitVec::from_bits(symbols.iter().flat_map(|&s| (0..b).rev().map(move |j| (s >> j) & 1 == 1)))
}

/// Encodes every block and returns the messages and the balanced,
/// symbol-aligned bit stream.
fn encode_blocks(
    config: &ProtocolConfig,
    codec: &MaskCodec,
    counts: &SlotCounts,
    whitener: Whitener,
) -> Result<(Vec<BitVec>, BitVec), SessionError> {
    let mut msg_rng = config.seed.stream(Purpose::Protocol, 1);
    let mut red_rng = config.seed.stream(Purpose::Protocol, 2);
    let b = config.mapping.bits_per_block as usize;
    let block_len = counts.symbols_per_block * b;
    let mut messages = Vec::with_capacity(config.blocks);
    let mut masked = BitVec::zeros(0);
    for _ in 0..config.blocks {
        let m = BitVec::from_bits((0..config.block_bits).map(|_| msg_rng.random::<bool>()));
        let mut padded = m.clone();
        padded.extend_from(&BitVec::zeros(counts.frames_per_block * codec.k() - m.len()));
        let start = masked.len();
        for f in 0..counts.frames_per_block {
            let part = padded.slice(f * codec.k(), (f + 1) * codec.k());
            masked.extend_from(&codec.encode_random(&part, &mut red_rng)?.masked());
        }
        masked.extend_from(&BitVec::zeros(start + block_len - masked.len()));
        messages.push(m);
    }
    Ok((messages, whitener.keystream().apply(&masked)))
}

fn decode_block(
    codec: &MaskCodec,
    config: &ProtocolConfig,
    counts: &SlotCounts,
    masked_block: &BitVec,
) -> Result<BitVec, SessionError> {
    let mut out = BitVec::zeros(0);
    for f in 0..counts.frames_per_block {
        out.extend_from(&codec.decode(&masked_block.slice(f * codec.n(), (f + 1) * codec.n()))?);
    }
    Ok(out.slice(0, config.block_bits))
}

/// One OAM mode's pulses through source, modulation, Eve and the channel.
fn run_mode(config: &ProtocolConfig, mode: usize, symbols: &[PayloadSymbol]) -> (Vec<Received>, usize) {
    let idx = 1 + mode as u32;
    let mut source = config.seed.stream(Purpose::Source, idx);
    let mut channel = config.seed.stream(Purpose::Channel, idx);
    let mut eve = config.seed.stream(Purpose::Eavesdropper, idx);
    let mut intercepts = 0;
    let out = symbols
        .iter()
        .map(|s| {
            let TwoModeState { sc, mut sm } = make_two_mode_entangled(config.squeezing, &mut source);
            if s.on_p {
                sm.p += s.value;
            } else {
                sm.x += s.value;
            }
            let (sc, r1) = eavesdropper_tap(&config.eve, sc, &mut eve);
            let (sm, r2) = eavesdropper_tap(&config.eve, sm, &mut eve);
            intercepts += usize::from(r1.outcome.is_some()) + usize::from(r2.outcome.is_some());
            Received {
                sc: transmit_state(&config.channel, sc, &mut channel),
                sm: transmit_state(&config.channel, sm, &mut channel),
            }
        })
        .collect();
    (out, intercepts)
}

/// Slots of phases that never ran, kept so the schedule stays complete.
fn record_unsent(t: &mut SessionTranscript, phases: &[Phase], unsent: &[Phase]) {
    for (slot, &phase) in phases.iter().enumerate() {
        if unsent.contains(&phase) {
            t.slots.push(SlotRecord { phase, mode: None, slot, d_true: None, x_m: None, p_m: None, d_hat: None, block_id: None });
        }
    }
    t.slots.sort_by_key(|s| s.slot);
}

pub fn run_session(config: &ProtocolConfig) -> Result<SessionTranscript, SessionError> {
    config.validate()?;
    let counts = config.slot_counts();
    let table = config.mapping.table()?;
    let b = table.bits_per_block() as usize;

    let mut codec_rng = config.seed.stream(Purpose::Protocol, 0);
    let (codec, draws) = build_random_codec(config.codec_k, config.codec_n, &mut codec_rng, 64)?;
    let whitener = if config.whitening { Whitener::Seeded(config.seed) } else { Whitener::Zero };
    let codec_record = CodecSeedRecord::new(codec.seed(), config.seed.0);

    // slot schedule
    let mut phases: Vec<Phase> = std::iter::repeat_n(Phase::Check, counts.check)
        .chain(std::iter::repeat_n(Phase::Auth, counts.auth))
        .chain(std::iter::repeat_n(Phase::Payload, counts.payload))
        .collect();
    phases.shuffle(&mut config.seed.stream(Purpose::Protocol, 3));
    let slot_of = |phase: Phase| -> Vec<usize> {
        phases.iter().enumerate().filter(|(_, &p)| p == phase).map(|(i, _)| i).collect()
    };

    let noise = effective_noise_variance(config)?;
    let oracle_rates = block_error_oracle(&table, noise)?;
    let oracle = OracleSummary { noise_variance: noise, symbol_error: oracle_rates.symbol_error, bit_error: oracle_rates.bit_error };

    let mut counters = Counters { codec_seed_draws: draws, ..Counters::default() };
    let mut slots = Vec::with_capacity(counts.total);

    // security gate
    let mut source = config.seed.stream(Purpose::Source, 0);
    let mut channel = config.seed.stream(Purpose::Channel, 0);
    let mut eve = config.seed.stream(Purpose::Eavesdropper, 0);
    let check = run_gate(config, counts.check, &mut source, &mut channel, &mut eve, None);
    counters.pulses_generated += counts.check;
    counters.eve_intercepts += check.intercepts;
    let est = estimate_gain(config, &check.alice, &check.bob);
    let gain = est.as_ref().map(|(r, _)| r.t_hat).filter(|g| *g > 0.0 && g.is_finite());
    let weight = gain.unwrap_or(1.0);
    let security = security_check_weighted(&check.alice, &check.bob, config.sign_pair, weight, config.min_check_slots)?;
    for s in slot_of(Phase::Check) {
        slots.push(SlotRecord { phase: Phase::Check, mode: None, slot: s, d_true: None, x_m: None, p_m: None, d_hat: None, block_id: None });
    }
    let (estimation, corrected) = match est {
        Some((r, c)) => (Some(r), Some(c)),
        None => (None, None),
    };
    let mut transcript = SessionTranscript {
        status: SessionStatus::SecurityAbort,
        seed: config.seed,
        counts,
        codec: codec_record,
        security,
        authentication: None,
        estimation,
        excess_noise_source_corrected: corrected,
        gain_estimate: gain,
        effective_noise_variance: noise,
        oracle,
        frame_header: None,
        payload: None,
        blocks: Vec::new(),
        counters,
        slots,
        messages: Vec::new(),
        decoded: Vec::new(),
    };
    if !security.passed || gain.is_none() {
        record_unsent(&mut transcript, &phases, &[Phase::Auth, Phase::Payload]);
        return Ok(transcript);
    }

    // authentication gate: Bob announces, Alice verifies
    let mut impostor_rng = config.seed.stream(Purpose::Eavesdropper, u32::MAX);
    let auth = run_gate(
        config,
        counts.auth,
        &mut source,
        &mut channel,
        &mut eve,
        config.impostor.then_some(&mut impostor_rng),
    );
    transcript.counters.pulses_generated += counts.auth;
    transcript.counters.eve_intercepts += auth.intercepts;
    let authentication = security_check_weighted(&auth.alice, &auth.bob, config.sign_pair, weight, config.min_check_slots)?;
    transcript.authentication = Some(authentication);
    for s in slot_of(Phase::Auth) {
        transcript.slots.push(SlotRecord { phase: Phase::Auth, mode: None, slot: s, d_true: None, x_m: None, p_m: None, d_hat: None, block_id: None });
    }
    if !authentication.passed {
        transcript.status = SessionStatus::AuthAbort;
        record_unsent(&mut transcript, &phases, &[Phase::Payload]);
        return Ok(transcript);
    }
    let gain = gain.expect("checked at the security gate");

    // encode, balance, map
    let (messages, balanced) = encode_blocks(config, &codec, &counts, whitener)?;
    transcript.counters.frames_encoded = config.blocks * counts.frames_per_block;
    let sent_symbols = bits_to_symbols(&balanced, b);
    let n_modes = config.oam.n_modes;
    // mapping draws come from per-mode streams so modes stay independent
    let mut map_rngs: Vec<SimRng> = (0..n_modes).map(|m| config.seed.stream(Purpose::Protocol, 16 + m as u32)).collect();
    let serial: Vec<PayloadSymbol> = sent_symbols
        .iter()
        .enumerate()
        .map(|(i, &s)| PayloadSymbol {
            value: table.map_block(s, &mut map_rngs[i % n_modes]).value,
            on_p: config.quadrature == QuadraturePolicy::Alternate && i % 2 == 1,
            real: true,
        })
        .collect();
    let pad = PayloadSymbol { value: 0.0, on_p: false, real: false };
    let (header, frames) = mux(&config.oam, &serial, pad);

    // per-mode transmission
    let results: Vec<(Vec<Received>, usize)> =
        frames.par_iter().map(|f| run_mode(config, f.mode_index, &f.pulses)).collect();
    transcript.counters.pulses_generated += counts.payload;
    transcript.counters.eve_intercepts += results.iter().map(|r| r.1).sum::<usize>();
    let received_frames: Vec<ModeFrame<Received>> = results
        .into_iter()
        .enumerate()
        .map(|(m, (pulses, _))| ModeFrame { mode_index: m, pulses })
        .collect();
    let received = demux(&config.oam, &header, received_frames)?;

    // Bell detection, rescale, demap
    let payload_slots = slot_of(Phase::Payload);
    let mut estimates = Vec::with_capacity(serial.len());
    for (i, (sym, rx)) in serial.iter().zip(&received).enumerate() {
        let bell = bell_measure(rx.sm, rx.sc);
        let q = if sym.on_p { bell.p_m } else { bell.x_m };
        let d_hat = SQRT_2 * q / gain;
        estimates.push(d_hat);
        transcript.slots.push(SlotRecord {
            phase: Phase::Payload,
            mode: Some(i % n_modes),
            slot: payload_slots[i],
            d_true: Some(sym.value),
            x_m: Some(bell.x_m),
            p_m: Some(bell.p_m),
            d_hat: Some(d_hat),
            block_id: Some(i / counts.symbols_per_block),
        });
    }
    for i in serial.len()..counts.payload {
        transcript.slots.push(SlotRecord {
            phase: Phase::Payload,
            mode: Some(i % n_modes),
            slot: payload_slots[i],
            d_true: Some(0.0),
            x_m: None,
            p_m: None,
            d_hat: None,
            block_id: None,
        });
    }
    debug_assert!(serial.iter().all(|s| s.real));
    transcript.slots.sort_by_key(|s| s.slot);

    let got_symbols: Vec<u32> = estimates.iter().map(|&d| table.demap_value(d)).collect();
    let got_balanced = symbols_to_bits(&got_symbols, b);
    let got_masked = whitener.keystream().apply(&got_balanced);

    let spb = counts.symbols_per_block;
    let block_len = spb * b;
    let mut decoded = Vec::with_capacity(config.blocks);
    let mut blocks = Vec::with_capacity(config.blocks);
    for (id, msg) in messages.iter().enumerate() {
        let sent = balanced.slice(id * block_len, (id + 1) * block_len);
        let got = got_balanced.slice(id * block_len, (id + 1) * block_len);
        let symbol_errors = (id * spb..(id + 1) * spb).filter(|&s| sent_symbols[s] != got_symbols[s]).count();
        let dec = decode_block(&codec, config, &counts, &got_masked.slice(id * block_len, (id + 1) * block_len))?;
        blocks.push(BlockRecord {
            block_id: id,
            channel_bits: block_len,
            channel_bit_errors: sent.hamming(&got),
            symbol_errors,
            message_bits: msg.len(),
            message_bit_errors: msg.hamming(&dec),
        });
        decoded.push(dec);
    }
    transcript.counters.frames_decoded = config.blocks * counts.frames_per_block;

    let sum = |f: fn(&BlockRecord) -> usize| blocks.iter().map(f).sum::<usize>();
    let (cb, cbe) = (sum(|b| b.channel_bits), sum(|b| b.channel_bit_errors));
    let (mb, mbe) = (sum(|b| b.message_bits), sum(|b| b.message_bit_errors));
    let se = sum(|b| b.symbol_errors);
    transcript.payload = Some(PayloadSummary {
        symbols: serial.len(),
        symbol_errors: se,
        symbol_error_rate: se as f64 / serial.len() as f64,
        channel_bits: cb,
        channel_bit_errors: cbe,
        channel_ber: cbe as f64 / cb as f64,
        message_bits: mb,
        message_bit_errors: mbe,
        message_ber: mbe as f64 / mb as f64,
        blocks_with_errors: blocks.iter().filter(|b| b.message_bit_errors > 0).count(),
    });
    transcript.blocks = blocks;
    transcript.frame_header = Some(header);
    transcript.messages = messages;
    transcript.decoded = decoded;
    transcript.status = SessionStatus::Completed;
    Ok(transcript)
}
