//! Entanglement check on disclosed slots and the wiretap secrecy capacity.
//!
//! Capacity follows the Gaussian collective-attack analysis with CV Bell
//! (heterodyne-type) detection: `I_AB` from the total input-referred noise,
//! `χ_BE` from the symplectic eigenvalues of Eve's state and of the state
//! conditioned on Bob's measurement.
//!
//! The closed forms used for the eigenvalues are
//!
//! ```text
//! A = V²(1 − 2T) + 2T + T²(V + χ_line)²
//! B = T²(Vχ_line + 1)²
//! C = [Aχ_h² + B + 1 + 2χ_h(V√B + T(V + χ_line)) + 2T(V² − 1)] / [T(V + χ_tot)]²
//! D = [(V + √B·χ_h) / (T(V + χ_tot))]²
//! λ₁,₂ = √(½[A ± √(A² − 4B)])      λ₃,₄ = √(½[C ± √(C² − 4D)])      λ₅ = 1
//! ```
//!
//! `A`, `B` are the invariants of the 4×4 Alice–Bob covariance matrix
//! (`Δ` and the determinant), so the bracket gives the squared eigenvalues.
//! The last factor of `A` is squared; without it the spectrum drops below
//! the vacuum bound at realistic operating points.

use crate::channel_model::{noise_budget, ChannelError, ChannelParams};
use crate::gaussian_core::QuadraturePair;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECURITY_THRESHOLD: f64 = 2.0;
pub const DEFAULT_MIN_SLOTS: usize = 1000;
pub const SPECTRUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecurityError {
    #[error("need at least {required} paired slots, got {got}")]
    InsufficientSamples { required: usize, got: usize },
    #[error("alice has {alice} samples but bob has {bob}")]
    LengthMismatch { alice: usize, bob: usize },
    #[error("invalid weight {0}")]
    InvalidWeight(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error("argument {value} outside [{lo}, {hi}]")]
    DomainError { value: f64, lo: f64, hi: f64 },
    #[error("nonphysical symplectic spectrum: λ{index} = {value}")]
    NonPhysicalSpectrum { index: usize, value: f64 },
    #[error("invalid capacity parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Which signs of the two correlation combinations are tested.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignPair {
    /// `x_A − x_B` and `p_A + p_B`: the squeezed pair of the source.
    #[default]
    MinusXPlusP,
    /// `x_A + x_B` and `p_A − p_B`.
    PlusXMinusP,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecurityCheckResult {
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    pub slots_used: usize,
    /// Weight `a²` applied to Alice's side (1 for the unweighted test).
    pub weight: f64,
}

fn variance(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = v.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    let mean = sum / n as f64;
    v.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64
}

/// Unweighted test: `Var[(x_A ∓ x_B)/√2] + Var[(p_A ± p_B)/√2] < 2`.
pub fn security_check(
    alice: &[QuadraturePair],
    bob: &[QuadraturePair],
    signs: SignPair,
    min_slots: usize,
) -> Result<SecurityCheckResult, SecurityError> {
    security_check_weighted(alice, bob, signs, 1.0, min_slots)
}

/// Weighted form for an attenuated partner:
/// `[Var(a·x_A ∓ x_B/a) + Var(a·p_A ± p_B/a)] / (a² + a⁻²) < 2`,
/// which is an entanglement witness for every `a > 0` and reduces to the
/// unweighted test at `a = 1`. Choosing `a² = √(ηT)` keeps honest lossy
/// sessions below the threshold.
pub fn security_check_weighted(
    alice: &[QuadraturePair],
    bob: &[QuadraturePair],
    signs: SignPair,
    weight: f64,
    min_slots: usize,
) -> Result<SecurityCheckResult, SecurityError> {
    if alice.len() != bob.len() {
        return Err(SecurityError::LengthMismatch { alice: alice.len(), bob: bob.len() });
    }
    let required = min_slots.max(2);
    if alice.len() < required {
        return Err(SecurityError::InsufficientSamples { required, got: alice.len() });
    }
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(SecurityError::InvalidWeight(weight));
    }
    let a = weight.sqrt();
    let (sx, sp) = match signs {
        SignPair::MinusXPlusP => (-1.0, 1.0),
        SignPair::PlusXMinusP => (1.0, -1.0),
    };
    let pairs = alice.iter().zip(bob);
    let vx = variance(pairs.clone().map(|(a_, b)| a * a_.x + sx * b.x / a));
    let vp = variance(pairs.map(|(a_, b)| a * a_.p + sp * b.p / a));
    let statistic = (vx + vp) / (weight + 1.0 / weight);
    Ok(SecurityCheckResult {
        statistic,
        threshold: SECURITY_THRESHOLD,
        passed: statistic < SECURITY_THRESHOLD,
        slots_used: alice.len(),
        weight,
    })
}

fn plogp(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(p: f64) -> Result<f64, CapacityError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CapacityError::DomainError { value: p, lo: 0.0, hi: 1.0 });
    }
    Ok(-plogp(p) - plogp(1.0 - p))
}

/// Quaternary entropy `−(1−e)log₂(1−e) − e·log₂(e/3)` for `e ∈ [0, 3/4]`.
pub fn quaternary_entropy(e: f64) -> Result<f64, CapacityError> {
    if !(0.0..=0.75).contains(&e) {
        return Err(CapacityError::DomainError { value: e, lo: 0.0, hi: 0.75 });
    }
    let tail = if e > 0.0 { e * (e / 3.0).log2() } else { 0.0 };
    Ok(-plogp(1.0 - e) - tail)
}

/// `G(x) = (x+1)log₂(x+1) − x·log₂x`, the entropy of a thermal state with
/// mean photon number `x`.
pub fn g_function(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (x + 1.0) * (x + 1.0).log2() - x * x.log2()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityParams {
    pub modulation_variance: f64,
    pub channel: ChannelParams,
    pub q_b: f64,
    pub q_e: f64,
    pub n_modes: usize,
    pub rep_rate_hz: f64,
}

impl CapacityParams {
    /// `V = V_a + 1`.
    pub fn v(&self) -> f64 {
        self.modulation_variance + 1.0
    }

    pub fn validate(&self) -> Result<(), CapacityError> {
        self.channel.validate()?;
        let bad = |m: String| Err(CapacityError::InvalidParams(m));
        if !(self.modulation_variance > 0.0 && self.modulation_variance.is_finite()) {
            return bad(format!("modulation_variance must be > 0, got {}", self.modulation_variance));
        }
        if !(0.0..=1.0).contains(&self.q_b) || !(0.0..=1.0).contains(&self.q_e) {
            return bad(format!("q_b = {}, q_e = {} must lie in [0, 1]", self.q_b, self.q_e));
        }
        if self.n_modes == 0 {
            return bad("n_modes must be >= 1".into());
        }
        if !(self.rep_rate_hz >= 0.0 && self.rep_rate_hz.is_finite()) {
            return bad(format!("rep_rate_hz must be >= 0, got {}", self.rep_rate_hz));
        }
        Ok(())
    }
}

/// `I_AB = log₂((V + χ_tot)/(1 + χ_tot))` in bits per pulse.
pub fn mutual_information_ab(params: &CapacityParams) -> f64 {
    let chi_tot = noise_budget(&params.channel).chi_tot;
    ((params.v() + chi_tot) / (1.0 + chi_tot)).log2()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymplecticSpectrumReport {
    pub a_term: f64,
    pub b_term: f64,
    pub c_term: f64,
    pub d_term: f64,
    pub lambdas: [f64; 5],
}

fn eigen_pair(s: f64, p: f64, first: usize) -> Result<(f64, f64), CapacityError> {
    let disc = s * s - 4.0 * p;
    // below the rounding error of s² the pair is degenerate
    let root = if disc.abs() <= 16.0 * f64::EPSILON * s * s { 0.0 } else { disc.sqrt() };
    if root.is_nan() {
        return Err(CapacityError::NonPhysicalSpectrum { index: first, value: f64::NAN });
    }
    let hi = (0.5 * (s + root)).sqrt();
    let lo = if hi > 0.0 { p.max(0.0).sqrt() / hi } else { 0.0 };
    Ok((hi, lo))
}

/// Symplectic spectrum and Holevo bound `χ_BE` in bits per pulse.
pub fn holevo_bound(params: &CapacityParams) -> Result<(SymplecticSpectrumReport, f64), CapacityError> {
    let t = params.channel.transmittance;
    let v = params.v();
    let nb = noise_budget(&params.channel);
    let (chi_line, chi_h, chi_tot) = (nb.chi_line, nb.chi_h, nb.chi_tot);

    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + (t * (v + chi_line)).powi(2);
    let b = (t * (v * chi_line + 1.0)).powi(2);
    let sb = b.sqrt();
    let den = (t * (v + chi_tot)).powi(2);
    let c = (a * chi_h * chi_h + b + 1.0 + 2.0 * chi_h * (v * sb + t * (v + chi_line)) + 2.0 * t * (v * v - 1.0)) / den;
    let d = (v + sb * chi_h).powi(2) / den;

    let (l1, l2) = eigen_pair(a, b, 1)?;
    let (l3, l4) = eigen_pair(c, d, 3)?;
    let lambdas = [l1, l2, l3, l4, 1.0];
    for (i, &l) in lambdas.iter().enumerate() {
        if !(l >= 1.0 - SPECTRUM_TOLERANCE) {
            return Err(CapacityError::NonPhysicalSpectrum { index: i + 1, value: l });
        }
    }
    let g = |l: f64| g_function((l - 1.0) / 2.0);
    let chi_be = g(l1) + g(l2) - g(l3) - g(l4);
    Ok((SymplecticSpectrumReport { a_term: a, b_term: b, c_term: c, d_term: d, lambdas }, chi_be))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CapacityReport {
    pub i_ab: f64,
    pub chi_be: f64,
    /// `q_b·I_AB − q_e·χ_BE`, may be negative.
    pub c_single: f64,
    /// `N·c_single`.
    pub c_mux: f64,
    /// `c_mux·rep_rate_hz`.
    pub c_mux_bps: f64,
    /// `max(c_single, 0)`.
    pub c_single_effective: f64,
    pub c_mux_effective: f64,
    pub c_mux_bps_effective: f64,
    pub spectrum: SymplecticSpectrumReport,
}

pub fn secrecy_capacity(params: &CapacityParams) -> Result<CapacityReport, CapacityError> {
    params.validate()?;
    let i_ab = mutual_information_ab(params);
    let (spectrum, chi_be) = holevo_bound(params)?;
    let n = params.n_modes as f64;
    let c_single = params.q_b * i_ab - params.q_e * chi_be;
    let c_mux = n * c_single;
    let c_single_effective = c_single.max(0.0);
    let c_mux_effective = n * c_single_effective;
    Ok(CapacityReport {
        i_ab,
        chi_be,
        c_single,
        c_mux,
        c_mux_bps: c_mux * params.rep_rate_hz,
        c_single_effective,
        c_mux_effective,
        c_mux_bps_effective: c_mux_effective * params.rep_rate_hz,
        spectrum,
    })
}

/// Entropy-form lower bound `N·(Q_B[2 − h₄(e)] − Q_E[h(ε_x) + h(ε_z)])`.
pub fn entropy_form_capacity(
    q_b: f64,
    q_e: f64,
    e: f64,
    eps_x: f64,
    eps_z: f64,
    n_modes: usize,
) -> Result<f64, CapacityError> {
    let main = q_b * (2.0 - quaternary_entropy(e)?);
    let leak = q_e * (binary_entropy(eps_x)? + binary_entropy(eps_z)?);
    Ok(n_modes as f64 * (main - leak))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_core::{make_two_mode_entangled, SqueezingParams};
    use crate::rng::{Purpose, RngSeed};

    fn params(t: f64, eps: f64, eta: f64, v_el: f64, va: f64) -> CapacityParams {
        CapacityParams {
            modulation_variance: va,
            channel: ChannelParams::with_transmittance(t, eps, eta, v_el).unwrap(),
            q_b: 1.0,
            q_e: 1.0,
            n_modes: 4,
            rep_rate_hz: 50e6,
        }
    }

    #[test]
    fn entropies() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(quaternary_entropy(0.0).unwrap(), 0.0);
        assert!((quaternary_entropy(0.75).unwrap() - 2.0).abs() < 1e-15);
        assert!(binary_entropy(1.1).is_err());
        assert!(quaternary_entropy(0.8).is_err());
        assert!(quaternary_entropy(-0.1).is_err());
    }

    #[test]
    fn g_is_increasing_from_zero() {
        assert_eq!(g_function(0.0), 0.0);
        let mut prev = 0.0;
        for i in 1..1000 {
            let g = g_function(i as f64 * 0.01);
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn ideal_mutual_information() {
        let p = params(1.0, 0.0, 1.0, 0.0, 8.0);
        assert!((mutual_information_ab(&p) - 5f64.log2()).abs() < 1e-15);
        assert!(mutual_information_ab(&params(1.0, 0.0, 1.0, 0.0, 1e-12)) < 1e-11);
    }

    #[test]
    fn lossless_channel_leaks_nothing() {
        for eta in [1.0, 0.5] {
            let (s, chi) = holevo_bound(&params(1.0, 0.0, eta, 0.01, 8.0)).unwrap();
            assert!(chi.abs() <= 1e-6, "{chi}");
            assert!(s.lambdas.iter().all(|l| (l - 1.0).abs() < 1e-6));
        }
    }

    #[test]
    fn no_modulation_leaks_nothing() {
        // with excess noise Eve keeps the purification of Bob's noise, so only
        // the noise-free channel is expected to go to zero
        let (_, chi) = holevo_bound(&params(0.6, 0.0, 0.5, 0.01, 1e-9)).unwrap();
        assert!(chi.abs() < 1e-6);
    }

    #[test]
    fn unsquared_a_term_goes_nonphysical() {
        // The unsquared variant of A at the same point: λ₂ falls below 1.
        let p = params(0.6275, 0.0184, 0.5, 0.01, 8.0);
        let (t, v) = (0.6275, p.v());
        let chi_line = 1.0 / t - 1.0 + 0.0184;
        let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line);
        let b = (t * (v * chi_line + 1.0)).powi(2);
        let roots = [1.0, -1.0].map(|sign| 0.5 * (a + sign * (a * a - 4.0 * b).sqrt()));
        assert!(roots.iter().any(|r| !(r.sqrt() >= 1.0)), "{roots:?}");
        let (s, chi) = holevo_bound(&p).unwrap();
        assert!(s.lambdas[1] >= 1.0 && chi > 0.0);
    }

    #[test]
    fn operating_point_values() {
        let r = secrecy_capacity(&params(0.6275, 0.0184, 0.5, 0.01, 8.0)).unwrap();
        assert!((r.i_ab - 1.1629).abs() < 1e-4);
        assert!((r.chi_be - 0.8545).abs() < 1e-4);
        assert_eq!(r.c_mux, 4.0 * r.c_single);
        assert_eq!(r.c_mux_bps, r.c_mux * 50e6);
    }

    #[test]
    fn capacity_reporting_rules() {
        let mut p = params(0.6275, 0.0184, 0.5, 0.01, 8.0);
        p.q_e = 0.0;
        let r = secrecy_capacity(&p).unwrap();
        assert_eq!(r.c_single, r.i_ab);
        p = params(0.01, 0.5, 0.5, 0.01, 8.0);
        let r = secrecy_capacity(&p).unwrap();
        assert!(r.c_single < 0.0);
        assert_eq!(r.c_single_effective, 0.0);
        assert_eq!(r.c_mux_bps_effective, 0.0);
    }

    #[test]
    fn entropy_form() {
        assert_eq!(entropy_form_capacity(1.0, 0.0, 0.0, 0.0, 0.0, 4).unwrap(), 8.0);
        assert_eq!(entropy_form_capacity(1.0, 1.0, 0.0, 0.5, 0.5, 1).unwrap(), 0.0);
    }

    #[test]
    fn honest_and_vacuum_statistics() {
        let mut rng = RngSeed(11).stream(Purpose::Test, 0);
        let sq = SqueezingParams::new(0.5).unwrap();
        let (a, b): (Vec<_>, Vec<_>) = (0..100_000)
            .map(|_| {
                let s = make_two_mode_entangled(sq, &mut rng);
                (s.sm, s.sc)
            })
            .unzip();
        let r = security_check(&a, &b, SignPair::MinusXPlusP, DEFAULT_MIN_SLOTS).unwrap();
        assert!((r.statistic - 2.0 * (-1f64).exp()).abs() < 0.01);
        assert!(r.passed);
        let wrong = security_check(&a, &b, SignPair::PlusXMinusP, DEFAULT_MIN_SLOTS).unwrap();
        assert!(!wrong.passed);
        assert!(matches!(
            security_check(&a[..10], &b[..10], SignPair::MinusXPlusP, DEFAULT_MIN_SLOTS),
            Err(SecurityError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn threshold_is_strict() {
        let a = vec![QuadraturePair::new(1.0, 1.0), QuadraturePair::new(-1.0, -1.0)];
        let b = vec![QuadraturePair::new(0.0, 0.0); 2];
        let r = security_check(&a, &b, SignPair::MinusXPlusP, 2).unwrap();
        assert_eq!(r.statistic, 1.0);
        let b2: Vec<_> = a.iter().map(|q| *q * -1.0).collect();
        let r = security_check(&a, &b2, SignPair::MinusXPlusP, 2).unwrap();
        assert_eq!(r.statistic, 2.0);
        assert!(!r.passed);
    }
}
