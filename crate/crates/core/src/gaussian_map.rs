//! Equiprobable mapping between `b`-bit blocks and Gaussian amplitudes.
//!
//! The real line is cut into `2^b` intervals of equal probability under
//! `Normal(0, V_a)`; interval `j` (counted left to right) carries the natural
//! binary label `j`. Alice sends a truncated-Gaussian draw from the interval
//! of her block, Bob demaps whatever he measures by locating its interval.
//! Boundary values belong to the lower interval.
//!
//! The two outer intervals end at `±clamp` (7 SNU^{1/2} for `V_a = 8`,
//! scaled with `√V_a` otherwise). [`TailMode::Clamp`] keeps the Gaussian
//! unbounded and pins tail draws to the clamp; [`TailMode::Truncate`]
//! redistributes the tail mass inside the outer intervals.

use crate::numerics::{norm_cdf, norm_pdf, norm_quantile, norm_sf, GaussLegendre};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("invalid mapping parameters: {0}")]
    InvalidParams(String),
}

/// Outer clamp in standard deviations: ±7 at `V_a = 8`.
pub const DEFAULT_CLAMP_SIGMAS: f64 = 2.474_873_734_152_916; // 7 / sqrt(8)

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    #[default]
    Clamp,
    Truncate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MappingTable {
    bits_per_block: u32,
    variance: f64,
    thresholds: Vec<f64>,
    clamp: f64,
    tail: TailMode,
}

/// A modulated amplitude and the block it encodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianSymbol {
    pub value: f64,
    pub block: u32,
}

/// Output of [`block_error_oracle`].
#[derive(Clone, Debug, PartialEq)]
pub struct BlockErrorRates {
    /// Probability a symbol is demapped to a different interval.
    pub symbol_error: f64,
    /// Probability a single transmitted bit is flipped.
    pub bit_error: f64,
    /// `confusion[j][k]` = P(demap = k | sent j).
    pub confusion: Vec<Vec<f64>>,
}

impl MappingTable {
    /// Default table: clamp tail handling at the ±7-at-`V_a = 8` bound.
    pub fn build(bits_per_block: u32, variance: f64) -> Result<Self, MapError> {
        Self::with_tail(bits_per_block, variance, TailMode::Clamp, DEFAULT_CLAMP_SIGMAS)
    }

    pub fn with_tail(
        bits_per_block: u32,
        variance: f64,
        tail: TailMode,
        clamp_sigmas: f64,
    ) -> Result<Self, MapError> {
        if !(1..=8).contains(&bits_per_block) {
            return Err(MapError::InvalidParams(format!(
                "bits_per_block must be in 1..=8, got {bits_per_block}"
            )));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(MapError::InvalidParams(format!("variance must be > 0, got {variance}")));
        }
        let levels = 1u32 << bits_per_block;
        let sigma = variance.sqrt();
        let thresholds: Vec<f64> = (1..levels)
            .map(|j| {
                if 2 * j == levels {
                    0.0
                } else if 2 * j > levels {
                    // mirror the lower half so the table is exactly symmetric
                    -sigma * norm_quantile(f64::from(levels - j) / f64::from(levels))
                } else {
                    sigma * norm_quantile(f64::from(j) / f64::from(levels))
                }
            })
            .collect();
        let clamp = clamp_sigmas * sigma;
        let outer = thresholds.last().copied().unwrap_or(0.0);
        if !(clamp.is_finite() && clamp > outer) {
            return Err(MapError::InvalidParams(format!(
                "clamp {clamp} must exceed the outermost threshold {outer}"
            )));
        }
        Ok(MappingTable { bits_per_block, variance, thresholds, clamp, tail })
    }

    pub fn bits_per_block(&self) -> u32 {
        self.bits_per_block
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits_per_block
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    pub fn tail(&self) -> TailMode {
        self.tail
    }

    /// All `2^b + 1` interval edges, `[-clamp, thresholds..., +clamp]`.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.thresholds.len() + 2);
        b.push(-self.clamp);
        b.extend_from_slice(&self.thresholds);
        b.push(self.clamp);
        b
    }

    /// Edges of interval `block`; the outer edges are the clamps.
    pub fn interval(&self, block: u32) -> (f64, f64) {
        let j = block as usize;
        let lo = if j == 0 { -self.clamp } else { self.thresholds[j - 1] };
        let hi = if j == self.thresholds.len() { self.clamp } else { self.thresholds[j] };
        (lo, hi)
    }

    /// Draw a modulation amplitude for `block`.
    pub fn map_block<R: Rng + ?Sized>(&self, block: u32, rng: &mut R) -> GaussianSymbol {
        assert!(block < self.levels(), "block {block} out of range");
        let mirror = 2 * block >= self.levels();
        let lower = if mirror { self.levels() - 1 - block } else { block };
        let value = self.sample_lower_half(lower, rng);
        GaussianSymbol { value: if mirror { -value } else { value }, block }
    }

    /// Truncated-Gaussian draw from an interval left of the median, by inverse
    /// CDF on the lower tail where it is accurate.
    fn sample_lower_half<R: Rng + ?Sized>(&self, block: u32, rng: &mut R) -> f64 {
        let sigma = self.sigma();
        let (lo, hi) = self.interval(block);
        let lo_z = if block == 0 && self.tail == TailMode::Clamp { f64::NEG_INFINITY } else { lo / sigma };
        let (a, b) = (norm_cdf(lo_z), norm_cdf(hi / sigma));
        let u01 = ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        let u = a + (b - a) * u01;
        let x = sigma * norm_quantile(u.clamp(f64::MIN_POSITIVE, 0.5));
        x.clamp(lo.max(-self.clamp), hi)
    }

    /// Interval label of `value`; anything beyond the clamps goes to the
    /// outermost interval.
    pub fn demap_value(&self, value: f64) -> u32 {
        self.thresholds.partition_point(|&t| t < value) as u32
    }

    /// Second moment of the transmitted amplitude, averaged over uniform
    /// blocks (the ensemble variance of the modulation).
    pub fn ensemble_variance(&self) -> f64 {
        let sigma = self.sigma();
        let z = self.clamp / sigma;
        // ∫_{-z}^{z} t² φ(t) dt
        let inner = (2.0 * norm_cdf(z) - 1.0) - 2.0 * z * norm_pdf(z);
        match self.tail {
            TailMode::Clamp => self.variance * inner + self.clamp * self.clamp * 2.0 * norm_sf(z),
            TailMode::Truncate => {
                // Outer intervals renormalised onto [-clamp, t_1].
                let t1 = -self.thresholds[0] / sigma;
                let tail_mass = 1.0 / f64::from(self.levels());
                let kept = tail_mass - norm_sf(z);
                let outer = (kept - (z * norm_pdf(z) - t1 * norm_pdf(t1))) * tail_mass / kept;
                let middle = (2.0 * norm_cdf(t1) - 1.0) - 2.0 * t1 * norm_pdf(t1);
                self.variance * (middle + 2.0 * outer)
            }
        }
    }
}

/// Per-symbol and per-bit error probabilities of
/// `map_block → + Normal(0, noise_variance) → demap_value`, by numerical
/// integration of the source law against interval-crossing probabilities.
pub fn block_error_oracle(table: &MappingTable, noise_variance: f64) -> Result<BlockErrorRates, MapError> {
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(MapError::InvalidParams(format!("noise variance must be >= 0, got {noise_variance}")));
    }
    let levels = table.levels() as usize;
    let b = table.bits_per_block();
    let mut confusion = vec![vec![0.0; levels]; levels];
    if noise_variance == 0.0 {
        for (j, row) in confusion.iter_mut().enumerate() {
            row[j] = 1.0;
        }
        return Ok(BlockErrorRates { symbol_error: 0.0, bit_error: 0.0, confusion });
    }
    let sigma = table.sigma();
    let sn = noise_variance.sqrt();
    let th = table.thresholds();
    let gl = GaussLegendre::new(16);
    let block_mass = 1.0 / levels as f64;
    let tail_mass = norm_sf(table.clamp() / sigma);

    // P(demap = k | s) for all k.
    let crossing = |s: f64, out: &mut [f64]| {
        let mut prev = 0.0;
        for (k, slot) in out.iter_mut().enumerate() {
            let upper = if k < th.len() { norm_cdf((th[k] - s) / sn) } else { 1.0 };
            *slot = upper - prev;
            prev = upper;
        }
    };

    for j in 0..levels {
        let (lo, hi) = table.interval(j as u32);
        let outer = j == 0 || j == levels - 1;
        // Weight of the continuous part; clamp mode puts the tail on the clamp.
        let (density_scale, point_mass) = match (outer, table.tail()) {
            (false, _) => (1.0 / block_mass, 0.0),
            (true, TailMode::Clamp) => (1.0 / block_mass, tail_mass / block_mass),
            (true, TailMode::Truncate) => (1.0 / (block_mass - tail_mass), 0.0),
        };
        let width = hi - lo;
        let panels = ((width / (0.5 * sn)).ceil() as usize).clamp(4, 20_000);
        let mut buf = vec![0.0; levels];
        for (k, cell) in confusion[j].iter_mut().enumerate() {
            // integrate one k at a time to keep the accumulator simple
            *cell = gl.integrate_composite(lo, hi, panels, |s| {
                crossing(s, &mut buf);
                buf[k] * norm_pdf(s / sigma) / sigma * density_scale
            });
        }
        if point_mass > 0.0 {
            let at = if j == 0 { -table.clamp() } else { table.clamp() };
            crossing(at, &mut buf);
            for (cell, p) in confusion[j].iter_mut().zip(&buf) {
                *cell += point_mass * p;
            }
        }
    }

    let mut symbol_error = 0.0;
    let mut bit_error = 0.0;
    for (j, row) in confusion.iter().enumerate() {
        for (k, &p) in row.iter().enumerate() {
            if k != j {
                symbol_error += block_mass * p;
                bit_error += block_mass * p * f64::from(((j ^ k) as u32).count_ones()) / f64::from(b);
            }
        }
    }
    Ok(BlockErrorRates { symbol_error, bit_error, confusion })
}
