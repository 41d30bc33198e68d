//! Gaussian-state machinery.
//!
//! Quadratures are in shot-noise units: the vacuum variance of `x` and `p` is
//! exactly 1. Samples are drawn from explicit [`SimRng`] streams so callers
//! control reproducibility and parallel stream ownership.
//!
//! The covariance-matrix half of this module ([`CovarianceMatrix`],
//! [`symplectic_spectrum`]) is a numerical cross-check for the closed-form
//! eigenvalues used by the capacity analysis; it is deliberately written
//! against generic linear algebra rather than the closed forms.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("squeezing factor must be finite and >= 0, got {0}")]
    InvalidSqueezing(f64),
    #[error("covariance matrix must be square with even dimension, got {rows}x{cols}")]
    BadDimension { rows: usize, cols: usize },
    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("non-physical state: symplectic eigenvalue {value} < 1")]
    NonPhysicalState { value: f64 },
}

/// Tolerance below 1 at which a symplectic eigenvalue is rejected as
/// non-physical.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-6;

/// Squeezing factor `r`; the squeezed quadrature has variance `exp(-2r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SqueezingParams {
    r: f64,
}

impl SqueezingParams {
    pub fn new(r: f64) -> Result<Self, GaussianError> {
        if r.is_finite() && r >= 0.0 {
            Ok(SqueezingParams { r })
        } else {
            Err(GaussianError::InvalidSqueezing(r))
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Variance of the squeezed quadrature.
    pub fn squeezed_variance(&self) -> f64 {
        (-2.0 * self.r).exp()
    }

    /// Variance of the anti-squeezed quadrature.
    pub fn antisqueezed_variance(&self) -> f64 {
        (2.0 * self.r).exp()
    }
}

impl TryFrom<f64> for SqueezingParams {
    type Error = GaussianError;
    fn try_from(r: f64) -> Result<Self, Self::Error> {
        SqueezingParams::new(r)
    }
}

impl From<SqueezingParams> for f64 {
    fn from(s: SqueezingParams) -> f64 {
        s.r
    }
}

/// One pulse's `(x, p)` quadrature sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePair {
    pub x: f64,
    pub p: f64,
}

impl QuadraturePair {
    pub const fn new(x: f64, p: f64) -> Self {
        QuadraturePair { x, p }
    }
}

impl std::ops::Add for QuadraturePair {
    type Output = QuadraturePair;
    fn add(self, o: QuadraturePair) -> QuadraturePair {
        QuadraturePair::new(self.x + o.x, self.p + o.p)
    }
}

impl std::ops::Mul<f64> for QuadraturePair {
    type Output = QuadraturePair;
    fn mul(self, k: f64) -> QuadraturePair {
        QuadraturePair::new(self.x * k, self.p * k)
    }
}

/// Two-mode squeezed vacuum split into the detection beam `sc` (sent to Bob
/// first) and the signal beam `sm` (kept by Alice for modulation).
///
/// The EPR correlations are `x_sm - x_sc` and `p_sm + p_sc`: both
/// `(x_sm - x_sc)/sqrt(2)` and `(p_sm + p_sc)/sqrt(2)` have variance
/// `exp(-2r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoModeState {
    pub sc: QuadraturePair,
    pub sm: QuadraturePair,
}

#[inline]
fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Vacuum sample: both quadratures `Normal(0, 1)`.
pub fn sample_vacuum<R: Rng + ?Sized>(rng: &mut R) -> QuadraturePair {
    QuadraturePair::new(std_normal(rng), std_normal(rng))
}

/// Single-mode squeezed vacuum, squeezed in `x`: `x ~ N(0, e^{-2r})`,
/// `p ~ N(0, e^{2r})`, independent. `x` is drawn before `p`.
pub fn sample_single_mode_squeezed<R: Rng + ?Sized>(
    params: SqueezingParams,
    rng: &mut R,
) -> QuadraturePair {
    let s = (-params.r).exp();
    let x = s * std_normal(rng);
    let p = std_normal(rng) / s;
    QuadraturePair::new(x, p)
}

/// Two-mode squeezed vacuum from two single-mode squeezers on a balanced
/// beam splitter:
///
/// ```text
/// x_sc = (x1 + x2)/√2   p_sc = (p1 + p2)/√2
/// x_sm = (x2 − x1)/√2   p_sm = (p2 − p1)/√2
/// ```
///
/// Mode 1 is squeezed in `x` and mode 2 in `p` (a rotated copy of
/// [`sample_single_mode_squeezed`]). Orthogonal squeezing axes are what make
/// the output entangled: `x_sm − x_sc = −√2·x1` and `p_sm + p_sc = √2·p2`
/// are both squeezed. Squeezing both inputs along `x` would leave every
/// `p` combination anti-squeezed and the state separable.
pub fn make_two_mode_entangled<R: Rng + ?Sized>(
    params: SqueezingParams,
    rng: &mut R,
) -> TwoModeState {
    let m1 = sample_single_mode_squeezed(params, rng);
    let rotated = sample_single_mode_squeezed(params, rng);
    let (x1, p1) = (m1.x, m1.p);
    let (x2, p2) = (rotated.p, rotated.x);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    TwoModeState {
        sc: QuadraturePair::new(h * (x1 + x2), h * (p1 + p2)),
        sm: QuadraturePair::new(h * (x2 - x1), h * (p2 - p1)),
    }
}

/// Real symmetric covariance matrix with quadrature ordering
/// `(x_1, p_1, x_2, p_2, ...)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    m: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, GaussianError> {
        let (rows, cols) = m.shape();
        if rows != cols || rows % 2 != 0 || rows == 0 {
            return Err(GaussianError::BadDimension { rows, cols });
        }
        let asym = (&m - m.transpose()).abs().max();
        let scale = m.abs().max().max(1.0);
        if asym > 1e-9 * scale {
            return Err(GaussianError::NotSymmetric(asym));
        }
        // Symmetrise exactly so downstream eigen-solvers see a symmetric input.
        let m = (&m + m.transpose()) * 0.5;
        Ok(CovarianceMatrix { m })
    }

    pub fn identity(modes: usize) -> Self {
        CovarianceMatrix { m: DMatrix::identity(2 * modes, 2 * modes) }
    }

    /// `diag(v, v)` thermal state.
    pub fn thermal(v: f64) -> Self {
        CovarianceMatrix { m: DMatrix::from_diagonal_element(2, 2, v) }
    }

    /// Two-mode squeezed vacuum with `cosh(2r)` diagonal blocks and
    /// `±sinh(2r)` correlation blocks.
    pub fn two_mode_squeezed(r: f64) -> Self {
        let v = (2.0 * r).cosh();
        let c = (2.0 * r).sinh();
        Self::epr(v, c)
    }

    /// EPR-type state `[[v I, c Z], [c Z, v I]]` with `Z = diag(1, -1)`.
    pub fn epr(v: f64, c: f64) -> Self {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = v;
        m[(1, 1)] = v;
        m[(2, 2)] = v;
        m[(3, 3)] = v;
        m[(0, 2)] = c;
        m[(2, 0)] = c;
        m[(1, 3)] = -c;
        m[(3, 1)] = -c;
        CovarianceMatrix { m }
    }

    /// Covariance matrix of a [`TwoModeState`] as built by
    /// [`make_two_mode_entangled`], mode order `(sc, sm)`.
    pub fn from_two_mode_construction(params: SqueezingParams) -> Self {
        let s = params.squeezed_variance();
        let a = params.antisqueezed_variance();
        // x1 ~ s, p1 ~ a, x2 ~ a, p2 ~ s.
        let h = 0.5;
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = h * (s + a); // x_sc
        m[(1, 1)] = h * (a + s); // p_sc
        m[(2, 2)] = h * (a + s); // x_sm
        m[(3, 3)] = h * (s + a); // p_sm
        m[(0, 2)] = h * (a - s); // <x_sc x_sm> = (Var x2 − Var x1)/2
        m[(2, 0)] = m[(0, 2)];
        m[(1, 3)] = h * (s - a); // <p_sc p_sm> = (Var p2 − Var p1)/2
        m[(3, 1)] = m[(1, 3)];
        CovarianceMatrix { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn modes(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    /// Sub-matrix on the listed modes, in the given order.
    pub fn submatrix(&self, modes: &[usize]) -> CovarianceMatrix {
        let idx: Vec<usize> = modes.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
        let n = idx.len();
        let m = DMatrix::from_fn(n, n, |i, j| self.m[(idx[i], idx[j])]);
        CovarianceMatrix { m }
    }
}

/// Standard symplectic form `Ω = ⊕ [[0, 1], [-1, 0]]`.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Symplectic eigenvalues without the physicality check, descending.
///
/// `iΩσ` is similar to the Hermitian matrix `σ^{1/2}(iΩ)σ^{1/2}`, whose
/// eigenvalues come in `±ν_k` pairs; the positive half is returned. Requires
/// `σ > 0`.
pub fn symplectic_eigenvalues(cm: &CovarianceMatrix) -> Result<Vec<f64>, GaussianError> {
    let n = cm.dim();
    let eig = cm.m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(GaussianError::NotPositiveDefinite);
    }
    let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let root = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
    let omega = symplectic_form(cm.modes());
    let inner = &root * omega * &root;
    // i·(real antisymmetric) is Hermitian.
    let herm: DMatrix<Complex<f64>> =
        DMatrix::from_fn(n, n, |i, j| Complex::new(0.0, inner[(i, j)]));
    let mut values: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values.truncate(n / 2);
    Ok(values)
}

/// Symplectic spectrum (descending), rejecting non-physical states.
pub fn symplectic_spectrum(cm: &CovarianceMatrix) -> Result<Vec<f64>, GaussianError> {
    let values = symplectic_eigenvalues(cm)?;
    if let Some(&bad) = values.iter().find(|&&v| v < 1.0 - PHYSICALITY_TOLERANCE) {
        return Err(GaussianError::NonPhysicalState { value: bad });
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RngSeed};

    fn var(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
    }

    #[test]
    fn negative_squeezing_rejected() {
        assert!(SqueezingParams::new(-0.1).is_err());
        assert!(SqueezingParams::new(f64::NAN).is_err());
        assert!(SqueezingParams::new(0.0).is_ok());
    }

    #[test]
    fn vacuum_has_unit_variance() {
        let mut rng = RngSeed(1).stream(Purpose::Test, 0);
        let sq = SqueezingParams::new(0.0).unwrap();
        let s: Vec<_> = (0..1_000_000).map(|_| sample_single_mode_squeezed(sq, &mut rng)).collect();
        let vx = var(&s.iter().map(|q| q.x).collect::<Vec<_>>());
        let vp = var(&s.iter().map(|q| q.p).collect::<Vec<_>>());
        assert!((vx - 1.0).abs() < 0.02, "{vx}");
        assert!((vp - 1.0).abs() < 0.02, "{vp}");
    }

    #[test]
    fn squeezed_variances_follow_exp_2r() {
        let mut rng = RngSeed(2).stream(Purpose::Test, 0);
        let sq = SqueezingParams::new(0.5).unwrap();
        let s: Vec<_> = (0..1_000_000).map(|_| sample_single_mode_squeezed(sq, &mut rng)).collect();
        let vx = var(&s.iter().map(|q| q.x).collect::<Vec<_>>());
        let vp = var(&s.iter().map(|q| q.p).collect::<Vec<_>>());
        assert!((vx / (-1.0f64).exp() - 1.0).abs() < 0.02, "{vx}");
        assert!((vp / 1.0f64.exp() - 1.0).abs() < 0.02, "{vp}");
    }

    #[test]
    fn fixed_seed_streams_are_bit_identical() {
        let sq = SqueezingParams::new(1.0).unwrap();
        let run = || {
            let mut rng = RngSeed(99).stream(Purpose::Source, 3);
            (0..1000)
                .map(|_| {
                    let s = make_two_mode_entangled(sq, &mut rng);
                    [s.sc.x.to_bits(), s.sc.p.to_bits(), s.sm.x.to_bits(), s.sm.p.to_bits()]
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn epr_combinations_are_squeezed() {
        let mut rng = RngSeed(3).stream(Purpose::Test, 0);
        let sq = SqueezingParams::new(0.5).unwrap();
        let n = 1_000_000;
        let states: Vec<_> = (0..n).map(|_| make_two_mode_entangled(sq, &mut rng)).collect();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let dx: Vec<f64> = states.iter().map(|s| h * (s.sm.x - s.sc.x)).collect();
        let sp: Vec<f64> = states.iter().map(|s| h * (s.sm.p + s.sc.p)).collect();
        let stat = var(&dx) + var(&sp);
        let expect = 2.0 * (-1.0f64).exp();
        assert!((stat / expect - 1.0).abs() < 0.02, "{stat} vs {expect}");
        // x and p of the detection beam are uncorrelated.
        let cov = states.iter().map(|s| s.sc.x * s.sc.p).sum::<f64>() / n as f64;
        assert!(cov.abs() < 5.0 * (1.0f64.exp().cosh() / n as f64).sqrt() + 0.01, "{cov}");
    }

    #[test]
    fn vacuum_limit_sits_on_the_boundary() {
        let mut rng = RngSeed(4).stream(Purpose::Test, 0);
        let sq = SqueezingParams::new(0.0).unwrap();
        let states: Vec<_> = (0..1_000_000).map(|_| make_two_mode_entangled(sq, &mut rng)).collect();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let dx: Vec<f64> = states.iter().map(|s| h * (s.sc.x + s.sm.x)).collect();
        assert!((var(&dx) - 1.0).abs() < 0.01);
    }

    #[test]
    fn sample_covariance_matches_construction_matrix() {
        let sq = SqueezingParams::new(0.4).unwrap();
        let cm = CovarianceMatrix::from_two_mode_construction(sq);
        let mut rng = RngSeed(5).stream(Purpose::Test, 0);
        let n = 400_000;
        let mut acc = DMatrix::<f64>::zeros(4, 4);
        for _ in 0..n {
            let s = make_two_mode_entangled(sq, &mut rng);
            let v = nalgebra::DVector::from_vec(vec![s.sc.x, s.sc.p, s.sm.x, s.sm.p]);
            acc += &v * v.transpose();
        }
        acc /= n as f64;
        let diff = (acc - cm.matrix()).abs().max();
        assert!(diff < 0.03, "{diff}");
        // It is the standard TMSV up to the sign of the correlations.
        let spectrum = symplectic_spectrum(&cm).unwrap();
        for v in spectrum {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_has_unit_spectrum() {
        for modes in 1..5 {
            let s = symplectic_spectrum(&CovarianceMatrix::identity(modes)).unwrap();
            assert_eq!(s.len(), modes);
            assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn tmsv_is_pure() {
        let s = symplectic_spectrum(&CovarianceMatrix::two_mode_squeezed(0.5)).unwrap();
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-9), "{s:?}");
    }

    #[test]
    fn thermal_single_mode() {
        let s = symplectic_spectrum(&CovarianceMatrix::thermal(4.0)).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sub_vacuum_diagonal_is_non_physical() {
        let cm = CovarianceMatrix::thermal(0.5);
        assert!(matches!(
            symplectic_spectrum(&cm),
            Err(GaussianError::NonPhysicalState { .. })
        ));
    }

    #[test]
    fn bad_shapes_rejected() {
        assert!(CovarianceMatrix::new(DMatrix::identity(3, 3)).is_err());
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = 0.5;
        assert!(matches!(CovarianceMatrix::new(m), Err(GaussianError::NotSymmetric(_))));
    }

    proptest::proptest! {
        #[test]
        fn scaled_identity_spectrum(c in 1.0f64..50.0, modes in 1usize..4) {
            let cm = CovarianceMatrix::new(DMatrix::identity(2 * modes, 2 * modes) * c).unwrap();
            let s = symplectic_spectrum(&cm).unwrap();
            proptest::prop_assert!(s.iter().all(|v| (v - c).abs() < 1e-9 * c));
        }

        #[test]
        fn two_mode_constructions_are_physical(r in 0.0f64..2.0) {
            let cm = CovarianceMatrix::from_two_mode_construction(SqueezingParams::new(r).unwrap());
            let s = symplectic_spectrum(&cm).unwrap();
            proptest::prop_assert!(s.iter().all(|&v| v >= 1.0 - 1e-9));
        }
    }
}
