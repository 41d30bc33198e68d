//! Maximum-likelihood estimation of the linear Gaussian channel
//! `y = t·x + z`, `z ~ N(0, σ²)`, with confidence intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("epsilon_pe = {0} must lie in (0, 1)")]
    DomainError(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationInput {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y0: Vec<f64>,
    pub epsilon_pe: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intervals {
    pub t: [f64; 2],
    pub sigma2: [f64; 2],
    pub sigma02: [f64; 2],
    pub va: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub n: usize,
    pub n0: usize,
    pub epsilon_pe: f64,
    pub z: f64,
    pub t_hat: f64,
    pub sigma2_hat: f64,
    pub sigma02_hat: f64,
    pub va_hat: f64,
    pub intervals: Intervals,
    pub eta: f64,
    pub v_el: f64,
    /// `t̂²/η`.
    pub transmittance_hat: f64,
    /// `(σ̂² − σ̂₀² − v_el)/(ηT̂)` in SNU.
    pub excess_noise_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerModeReport {
    pub modes: Vec<EstimationReport>,
    pub merged: EstimationReport,
}

/// Two-sided standard-normal quantile: solves `1 − erf(z/√2) = ε_PE`, so
/// that `P(|Z| > z) = ε_PE` and `P(Z > z) = ε_PE/2`. Bisection.
pub fn z_for_epsilon(epsilon_pe: f64) -> Result<f64, EstimationError> {
    if !(epsilon_pe > 0.0 && epsilon_pe < 1.0) {
        return Err(EstimationError::DomainError(epsilon_pe));
    }
    let target = epsilon_pe;
    let f = |z: f64| libm::erfc(z * std::f64::consts::FRAC_1_SQRT_2) - target;
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn interval(center: f64, half: f64) -> [f64; 2] {
    [center - half, center + half]
}

pub fn estimate(input: &EstimationInput, eta: f64, v_el: f64) -> Result<EstimationReport, EstimationError> {
    let n = input.x.len();
    let n0 = input.y0.len();
    if input.y.len() != n {
        return Err(EstimationError::DegenerateInput(format!("{} x values but {} y values", n, input.y.len())));
    }
    if n < 2 || n0 < 2 {
        return Err(EstimationError::DegenerateInput(format!("need at least 2 samples, got {n} and {n0}")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(EstimationError::DegenerateInput(format!("eta = {eta} not in (0, 1]")));
    }
    let z = z_for_epsilon(input.epsilon_pe)?;
    let sxx: f64 = input.x.iter().map(|x| x * x).sum();
    if !(sxx > 0.0 && sxx.is_finite()) {
        return Err(EstimationError::DegenerateInput("sum of x² is zero".into()));
    }
    let sxy: f64 = input.x.iter().zip(&input.y).map(|(x, y)| x * y).sum();
    let t_hat = sxy / sxx;
    let nf = n as f64;
    let sigma2_hat = input.x.iter().zip(&input.y).map(|(x, y)| (y - t_hat * x).powi(2)).sum::<f64>() / nf;
    let sigma02_hat = input.y0.iter().map(|y| y * y).sum::<f64>() / n0 as f64;
    let va_hat = sxx / nf;
    if !(t_hat.is_finite() && sigma2_hat.is_finite() && sigma02_hat.is_finite()) {
        return Err(EstimationError::DegenerateInput("non-finite samples".into()));
    }
    let root2 = std::f64::consts::SQRT_2;
    let intervals = Intervals {
        t: interval(t_hat, z * (sigma2_hat / (nf * va_hat)).sqrt()),
        sigma2: interval(sigma2_hat, z * sigma2_hat * root2 / nf.sqrt()),
        sigma02: interval(sigma02_hat, z * sigma02_hat * root2 / (n0 as f64).sqrt()),
        va: interval(va_hat, z * va_hat * root2 / nf.sqrt()),
    };
    let transmittance_hat = t_hat * t_hat / eta;
    let excess_noise_hat = (sigma2_hat - sigma02_hat - v_el) / (eta * transmittance_hat);
    Ok(EstimationReport {
        n,
        n0,
        epsilon_pe: input.epsilon_pe,
        z,
        t_hat,
        sigma2_hat,
        sigma02_hat,
        va_hat,
        intervals,
        eta,
        v_el,
        transmittance_hat,
        excess_noise_hat,
    })
}

/// One report per mode plus a report on all modes pooled.
pub fn per_mode_report(inputs: &[EstimationInput], eta: f64, v_el: f64) -> Result<PerModeReport, EstimationError> {
    let first = inputs.first().ok_or_else(|| EstimationError::DegenerateInput("no modes".into()))?;
    let modes = inputs.par_iter().map(|i| estimate(i, eta, v_el)).collect::<Result<Vec<_>, _>>()?;
    let merged_input = EstimationInput {
        x: inputs.iter().flat_map(|i| i.x.iter().copied()).collect(),
        y: inputs.iter().flat_map(|i| i.y.iter().copied()).collect(),
        y0: inputs.iter().flat_map(|i| i.y0.iter().copied()).collect(),
        epsilon_pe: first.epsilon_pe,
    };
    let merged = estimate(&merged_input, eta, v_el)?;
    Ok(PerModeReport { modes, merged })
}
