//! Lossy fiber plus imperfect detector, in shot-noise units.
//!
//! Two views of the same channel are provided. [`transmit_pulse`] is the
//! aggregate measured-data model `y = √(ηT)·x + z`, `z ~ N(0, 1 + ηTε + v_el)`,
//! for a classical displacement `x` on a coherent state. [`transmit_state`]
//! takes a quadrature sample that already carries its own vacuum
//! fluctuations (a squeezed or entangled mode) and adds only what the
//! channel and detector add on top: `N(0, 1 − ηT + ηTε + v_el)`. For a
//! coherent input both give the same output law.

use crate::gaussian_core::QuadraturePair;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid channel parameter {name} = {value}: {reason}")]
    InvalidParam { name: &'static str, value: f64, reason: &'static str },
}

pub const DEFAULT_ALPHA_DB_PER_KM: f64 = 0.2;
pub const DEFAULT_V_EL: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub distance_km: f64,
    pub alpha_db_per_km: f64,
    pub transmittance: f64,
    pub excess_noise: f64,
    pub eta: f64,
    pub v_el: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub chi_line: f64,
    pub chi_h: f64,
    pub chi_tot: f64,
}

/// `T = 10^{−αL/10}`.
pub fn transmittance_from_distance(alpha_db_per_km: f64, distance_km: f64) -> f64 {
    10f64.powf(-alpha_db_per_km * distance_km / 10.0)
}

impl ChannelParams {
    /// Fiber of length `distance_km`; `T` follows from the loss law.
    pub fn fiber(
        distance_km: f64,
        alpha_db_per_km: f64,
        excess_noise: f64,
        eta: f64,
        v_el: f64,
    ) -> Result<Self, ChannelError> {
        let p = ChannelParams {
            distance_km,
            alpha_db_per_km,
            transmittance: transmittance_from_distance(alpha_db_per_km, distance_km),
            excess_noise,
            eta,
            v_el,
        };
        p.validate()?;
        Ok(p)
    }

    /// Fixed transmittance; `distance_km` is the equivalent fiber length at
    /// the default attenuation.
    pub fn with_transmittance(
        transmittance: f64,
        excess_noise: f64,
        eta: f64,
        v_el: f64,
    ) -> Result<Self, ChannelError> {
        let alpha = DEFAULT_ALPHA_DB_PER_KM;
        let p = ChannelParams {
            distance_km: -10.0 * transmittance.log10() / alpha,
            alpha_db_per_km: alpha,
            transmittance,
            excess_noise,
            eta,
            v_el,
        };
        p.validate()?;
        Ok(p)
    }

    /// Lossless, noiseless, unit-efficiency channel.
    pub fn ideal() -> Self {
        ChannelParams {
            distance_km: 0.0,
            alpha_db_per_km: DEFAULT_ALPHA_DB_PER_KM,
            transmittance: 1.0,
            excess_noise: 0.0,
            eta: 1.0,
            v_el: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |name, value, reason| Err(ChannelError::InvalidParam { name, value, reason });
        if !(self.alpha_db_per_km >= 0.0 && self.alpha_db_per_km.is_finite()) {
            return bad("alpha_db_per_km", self.alpha_db_per_km, "must be >= 0");
        }
        if !(self.distance_km >= 0.0) {
            return bad("distance_km", self.distance_km, "must be >= 0");
        }
        if !(self.transmittance > 0.0 && self.transmittance <= 1.0) {
            return bad("transmittance", self.transmittance, "must be in (0, 1]");
        }
        if !(self.excess_noise >= 0.0 && self.excess_noise.is_finite()) {
            return bad("excess_noise", self.excess_noise, "must be >= 0");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta", self.eta, "must be in (0, 1]");
        }
        if !(self.v_el >= 0.0 && self.v_el.is_finite()) {
            return bad("v_el", self.v_el, "must be >= 0");
        }
        Ok(())
    }

    /// Overall amplitude gain `√(ηT)`.
    pub fn gain(&self) -> f64 {
        (self.eta * self.transmittance).sqrt()
    }

    /// Noise variance of the aggregate model, `1 + ηTε + v_el`.
    pub fn pulse_noise_variance(&self) -> f64 {
        1.0 + self.eta * self.transmittance * self.excess_noise + self.v_el
    }

    /// Noise added on top of a quantum quadrature, `1 − ηT + ηTε + v_el`.
    pub fn added_noise_variance(&self) -> f64 {
        let et = self.eta * self.transmittance;
        1.0 - et + et * self.excess_noise + self.v_el
    }
}

pub fn noise_budget(params: &ChannelParams) -> NoiseBudget {
    let t = params.transmittance;
    let chi_line = 1.0 / t - 1.0 + params.excess_noise;
    let chi_h = 2.0 * (1.0 + params.v_el) / params.eta - 1.0;
    NoiseBudget { chi_line, chi_h, chi_tot: chi_line + chi_h / t }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> f64 {
    variance.sqrt() * rng.sample::<f64, _>(StandardNormal)
}

/// Aggregate channel for a displaced coherent state; `input` holds the
/// classical displacement. The `x` noise is drawn before the `p` noise.
pub fn transmit_pulse<R: Rng + ?Sized>(
    params: &ChannelParams,
    input: QuadraturePair,
    rng: &mut R,
) -> QuadraturePair {
    let g = params.gain();
    let v = params.pulse_noise_variance();
    let x = g * input.x + gaussian(rng, v);
    let p = g * input.p + gaussian(rng, v);
    QuadraturePair::new(x, p)
}

/// Channel for a quadrature sample that already includes its quantum noise.
pub fn transmit_state<R: Rng + ?Sized>(
    params: &ChannelParams,
    input: QuadraturePair,
    rng: &mut R,
) -> QuadraturePair {
    let g = params.gain();
    let v = params.added_noise_variance();
    let x = g * input.x + gaussian(rng, v);
    let p = g * input.p + gaussian(rng, v);
    QuadraturePair::new(x, p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EveStrategy {
    #[default]
    None,
    /// Heterodyne the pulse with probability `fraction` and resend a
    /// coherent state centred on the outcome.
    InterceptResend { fraction: f64 },
}

impl EveStrategy {
    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            EveStrategy::InterceptResend { fraction } if !(0.0..=1.0).contains(&fraction) => {
                Err(ChannelError::InvalidParam {
                    name: "fraction",
                    value: fraction,
                    reason: "must be in [0, 1]",
                })
            }
            _ => Ok(()),
        }
    }
}

/// What Eve saw of one pulse; `None` when she let it pass.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize)]
pub struct EveRecord {
    pub outcome: Option<QuadraturePair>,
}

/// Eve at the channel input. A heterodyne measurement splits the pulse on a
/// balanced beam splitter with vacuum and reads `x` and `p` on the two arms,
/// so each recorded quadrature is `(q + v)/√2` with `v` a vacuum draw.
/// The resent coherent state is centred on `√2·(recorded)` and carries its
/// own vacuum, adding 2 SNU per quadrature to the pulse.
pub fn eavesdropper_tap<R: Rng + ?Sized>(
    strategy: &EveStrategy,
    input: QuadraturePair,
    rng: &mut R,
) -> (QuadraturePair, EveRecord) {
    match *strategy {
        EveStrategy::None => (input, EveRecord::default()),
        EveStrategy::InterceptResend { fraction } => {
            if fraction <= 0.0 || rng.random::<f64>() >= fraction {
                return (input, EveRecord::default());
            }
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let vx = gaussian(rng, 1.0);
            let vp = gaussian(rng, 1.0);
            let seen = QuadraturePair::new(h * (input.x + vx), h * (input.p - vp));
            let resent = QuadraturePair::new(
                std::f64::consts::SQRT_2 * seen.x + gaussian(rng, 1.0),
                std::f64::consts::SQRT_2 * seen.p + gaussian(rng, 1.0),
            );
            (resent, EveRecord { outcome: Some(seen) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RngSeed};

    fn reference() -> ChannelParams {
        ChannelParams::with_transmittance(0.6275, 0.0184, 0.5, 0.01).unwrap()
    }

    #[test]
    fn loss_law() {
        assert_eq!(transmittance_from_distance(0.2, 0.0), 1.0);
        assert!((transmittance_from_distance(0.2, 10.0) - 0.630_957_344_480_193).abs() < 1e-15);
        assert!((transmittance_from_distance(0.2, 50.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn budget_values() {
        let b = noise_budget(&ChannelParams::ideal());
        assert_eq!((b.chi_line, b.chi_h, b.chi_tot), (0.0, 1.0, 1.0));
        let p = ChannelParams::with_transmittance(0.6310, 0.0184, 0.5, 0.01).unwrap();
        let b = noise_budget(&p);
        assert!((b.chi_line - 0.6032).abs() < 1e-4);
        assert!((b.chi_h - 3.04).abs() < 1e-12);
        assert!((b.chi_tot - 5.421).abs() < 1e-3);
        let p = ChannelParams::with_transmittance(0.5, 0.0, 0.5, 0.0).unwrap();
        assert_eq!(noise_budget(&p).chi_h, 3.0);
    }

    #[test]
    fn validation() {
        assert!(ChannelParams::with_transmittance(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(ChannelParams::with_transmittance(1.1, 0.0, 1.0, 0.0).is_err());
        assert!(ChannelParams::with_transmittance(0.5, -0.1, 1.0, 0.0).is_err());
        assert!(ChannelParams::with_transmittance(0.5, 0.0, 0.0, 0.0).is_err());
        assert!(ChannelParams::with_transmittance(0.5, 0.0, 1.0, -1.0).is_err());
        assert!(ChannelParams::fiber(-1.0, 0.2, 0.0, 1.0, 0.0).is_err());
        assert!(EveStrategy::InterceptResend { fraction: 1.5 }.validate().is_err());
    }

    #[test]
    fn unity_channel_adds_shot_noise_only() {
        let p = ChannelParams::ideal();
        let mut rng = RngSeed(1).stream(Purpose::Test, 0);
        let n = 200_000;
        let mut s2 = 0.0;
        for _ in 0..n {
            let x = 3.0 * rng.sample::<f64, _>(StandardNormal);
            let y = transmit_pulse(&p, QuadraturePair::new(x, 0.0), &mut rng);
            s2 += y.x * y.x;
        }
        assert!((s2 / n as f64 / 10.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn coherent_input_laws_agree() {
        let p = reference();
        let mut a = RngSeed(2).stream(Purpose::Test, 0);
        let mut b = RngSeed(2).stream(Purpose::Test, 1);
        let n = 400_000;
        let (mut va, mut vb) = (0.0, 0.0);
        for _ in 0..n {
            let d = 2.0;
            va += (transmit_pulse(&p, QuadraturePair::new(d, 0.0), &mut a).x - p.gain() * d).powi(2);
            let coherent = QuadraturePair::new(d + b.sample::<f64, _>(StandardNormal), 0.0);
            vb += (transmit_state(&p, coherent, &mut b).x - p.gain() * d).powi(2);
        }
        let (va, vb) = (va / n as f64, vb / n as f64);
        assert!((va - p.pulse_noise_variance()).abs() < 0.01);
        assert!((vb - p.pulse_noise_variance()).abs() < 0.01);
    }

    #[test]
    fn intercept_resend_adds_two_units() {
        let mut rng = RngSeed(3).stream(Purpose::Test, 0);
        let s = EveStrategy::InterceptResend { fraction: 1.0 };
        let n = 200_000;
        let (mut d2, mut cov, mut vin, mut vrec) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = 2.0 * rng.sample::<f64, _>(StandardNormal);
            let (out, rec) = eavesdropper_tap(&s, QuadraturePair::new(x, 0.0), &mut rng);
            let seen = rec.outcome.unwrap();
            d2 += (out.x - x).powi(2);
            cov += x * seen.x;
            vin += x * x;
            vrec += seen.x * seen.x;
        }
        assert!((d2 / n as f64 - 2.0).abs() < 0.03);
        assert!(cov / (vin * vrec).sqrt() > 0.5);
    }

    #[test]
    fn zero_fraction_is_identity() {
        let mut rng = RngSeed(4).stream(Purpose::Test, 0);
        let q = QuadraturePair::new(0.3, -1.2);
        let (out, rec) = eavesdropper_tap(&EveStrategy::InterceptResend { fraction: 0.0 }, q, &mut rng);
        assert_eq!(out, q);
        assert!(rec.outcome.is_none());
        assert_eq!(eavesdropper_tap(&EveStrategy::None, q, &mut rng).0, q);
    }
}
