//! Distribution of a serial pulse stream over `N` OAM subchannels.
//!
//! Subchannels are modelled as independent parallel channels. Serial index
//! `i` goes to mode `i mod N` at position `i div N`; the tail is padded so
//! every frame has the same length. Crosstalk, when enabled, leaks a
//! fraction `c` of each mode's pulse at the same position into the mode
//! with the next lower charge index (mode `i` picks up `c` times mode
//! `(i + 1) mod N`) while demultiplexing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MuxError {
    #[error("invalid OAM configuration: {0}")]
    InvalidConfig(String),
    #[error("frame mismatch: {0}")]
    FrameMismatch(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OamConfig {
    pub n_modes: usize,
    pub topological_charges: Vec<i32>,
    #[serde(default)]
    pub crosstalk: f64,
}

impl Default for OamConfig {
    fn default() -> Self {
        OamConfig { n_modes: 4, topological_charges: vec![-2, -1, 1, 2], crosstalk: 0.0 }
    }
}

impl OamConfig {
    /// `n` modes with charges `1..=n`.
    pub fn with_modes(n: usize) -> Self {
        OamConfig { n_modes: n, topological_charges: (1..=n as i32).collect(), crosstalk: 0.0 }
    }

    pub fn validate(&self) -> Result<(), MuxError> {
        if self.n_modes == 0 {
            return Err(MuxError::InvalidConfig("n_modes must be >= 1".into()));
        }
        if self.topological_charges.len() != self.n_modes {
            return Err(MuxError::InvalidConfig(format!(
                "{} topological charges for {} modes",
                self.topological_charges.len(),
                self.n_modes
            )));
        }
        let mut sorted = self.topological_charges.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(MuxError::InvalidConfig("topological charges must be distinct".into()));
        }
        if !(0.0..1.0).contains(&self.crosstalk) {
            return Err(MuxError::InvalidConfig(format!("crosstalk {} not in [0, 1)", self.crosstalk)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    RoundRobin,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameHeader {
    pub protocol_version: u32,
    pub n_modes: usize,
    pub charges: Vec<i32>,
    pub pad_len: usize,
    pub assignment: Assignment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeFrame<T> {
    pub mode_index: usize,
    pub pulses: Vec<T>,
}

/// Pulses that can pick up a scaled copy of a neighbour.
pub trait Leak: Copy {
    fn leak(self, neighbour: Self, c: f64) -> Self;
}

impl Leak for f64 {
    fn leak(self, neighbour: f64, c: f64) -> f64 {
        self + c * neighbour
    }
}

impl Leak for crate::gaussian_core::QuadraturePair {
    fn leak(self, neighbour: Self, c: f64) -> Self {
        self + neighbour * c
    }
}

/// Round-robin split; `pad` fills the tail so frames have equal length.
pub fn mux<T: Clone>(config: &OamConfig, serial: &[T], pad: T) -> (FrameHeader, Vec<ModeFrame<T>>) {
    let n = config.n_modes.max(1);
    let per_mode = serial.len().div_ceil(n);
    let pad_len = per_mode * n - serial.len();
    let mut frames: Vec<ModeFrame<T>> = (0..n)
        .map(|m| ModeFrame { mode_index: m, pulses: Vec::with_capacity(per_mode) })
        .collect();
    for (i, s) in serial.iter().enumerate() {
        frames[i % n].pulses.push(s.clone());
    }
    for i in serial.len()..per_mode * n {
        frames[i % n].pulses.push(pad.clone());
    }
    let header = FrameHeader {
        protocol_version: PROTOCOL_VERSION,
        n_modes: n,
        charges: config.topological_charges.clone(),
        pad_len,
        assignment: Assignment::RoundRobin,
    };
    (header, frames)
}

/// Applies receiver-side crosstalk to whole frames in place.
pub fn apply_crosstalk<T: Leak>(crosstalk: f64, frames: &mut [ModeFrame<T>]) {
    let n = frames.len();
    if crosstalk == 0.0 || n < 2 {
        return;
    }
    let original: Vec<Vec<T>> = frames.iter().map(|f| f.pulses.clone()).collect();
    for (m, frame) in frames.iter_mut().enumerate() {
        let neighbour = &original[(m + 1) % n];
        for (pulse, &other) in frame.pulses.iter_mut().zip(neighbour) {
            *pulse = pulse.leak(other, crosstalk);
        }
    }
}

/// Inverse of [`mux`]: validates the frames against the header, applies
/// crosstalk and restores serial order without the padding.
pub fn demux<T: Leak>(
    config: &OamConfig,
    header: &FrameHeader,
    mut frames: Vec<ModeFrame<T>>,
) -> Result<Vec<T>, MuxError> {
    check_frames(config, header, &frames)?;
    apply_crosstalk(config.crosstalk, &mut frames);
    Ok(interleave(header, &frames))
}

fn check_frames<T>(config: &OamConfig, header: &FrameHeader, frames: &[ModeFrame<T>]) -> Result<(), MuxError> {
    if header.protocol_version != PROTOCOL_VERSION || header.assignment != Assignment::RoundRobin {
        return Err(MuxError::FrameMismatch(format!(
            "unsupported header version {} / {:?}",
            header.protocol_version, header.assignment
        )));
    }
    if header.n_modes != config.n_modes || frames.len() != header.n_modes {
        return Err(MuxError::FrameMismatch(format!(
            "{} frames for {} modes (config {})",
            frames.len(),
            header.n_modes,
            config.n_modes
        )));
    }
    let len = frames[0].pulses.len();
    for (m, f) in frames.iter().enumerate() {
        if f.mode_index != m {
            return Err(MuxError::FrameMismatch(format!("frame {m} carries mode index {}", f.mode_index)));
        }
        if f.pulses.len() != len {
            return Err(MuxError::FrameMismatch(format!(
                "frame {m} has {} pulses, frame 0 has {len}",
                f.pulses.len()
            )));
        }
    }
    if header.pad_len >= header.n_modes.max(1) || header.pad_len > len * header.n_modes {
        return Err(MuxError::FrameMismatch(format!(
            "pad length {} inconsistent with {} modes",
            header.pad_len, header.n_modes
        )));
    }
    Ok(())
}

fn interleave<T: Copy>(header: &FrameHeader, frames: &[ModeFrame<T>]) -> Vec<T> {
    let n = frames.len();
    let total = frames[0].pulses.len() * n - header.pad_len;
    (0..total).map(|i| frames[i % n].pulses[i / n]).collect()
}
