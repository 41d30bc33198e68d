//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the closed-form capacity code: the covariance matrices
//! are assembled mode by mode and reduced numerically.

#![allow(dead_code)]

use nalgebra::DMatrix;
use qsdc_core::gaussian_core::{symplectic_eigenvalues, CovarianceMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

fn put_block(m: &mut DMatrix<f64>, i: usize, j: usize, diag: (f64, f64)) {
    m[(2 * i, 2 * j)] = diag.0;
    m[(2 * i + 1, 2 * j + 1)] = diag.1;
    if i != j {
        m[(2 * j, 2 * i)] = diag.0;
        m[(2 * j + 1, 2 * i + 1)] = diag.1;
    }
}

/// Alice–Bob state after a lossy, noisy channel (entangling-cloner model),
/// mode order `(A, B)`.
pub fn ab_covariance(t: f64, eps: f64, v: f64) -> DMatrix<f64> {
    let chi_line = 1.0 / t - 1.0 + eps;
    let c = (t * (v * v - 1.0)).sqrt();
    let vb = t * (v + chi_line);
    let mut m = DMatrix::zeros(4, 4);
    put_block(&mut m, 0, 0, (v, v));
    put_block(&mut m, 1, 1, (vb, vb));
    put_block(&mut m, 0, 1, (c, -c));
    m
}

/// Symplectic eigenvalues of the Alice–Bob state (= Eve's state).
pub fn eve_spectrum(t: f64, eps: f64, v: f64) -> Vec<f64> {
    symplectic_eigenvalues(&CovarianceMatrix::new(ab_covariance(t, eps, v)).unwrap()).unwrap()
}

/// Spectrum of Alice plus the detector modes `F`, `G`, conditioned on
/// Bob's heterodyne outcome. The detector is a beam splitter of
/// transmissivity `η` mixing `B` with one half of an EPR pair of variance
/// `1 + 2v_el/(1 − η)`, followed by an ideal heterodyne of the
/// transmitted arm. Returns three values; the last is the pure mode.
pub fn conditional_spectrum(t: f64, eps: f64, v: f64, eta: f64, v_el: f64) -> Vec<f64> {
    assert!(eta < 1.0);
    let w = 1.0 + 2.0 * v_el / (1.0 - eta);
    let cw = (w * w - 1.0).sqrt();
    // modes: 0 A, 1 B, 2 F0, 3 G
    let mut m = DMatrix::zeros(8, 8);
    let ab = ab_covariance(t, eps, v);
    m.view_mut((0, 0), (4, 4)).copy_from(&ab);
    put_block(&mut m, 2, 2, (w, w));
    put_block(&mut m, 3, 3, (w, w));
    put_block(&mut m, 2, 3, (cw, -cw));
    // beam splitter on (B, F0): B1 = √η B + √(1−η) F0, F = −√(1−η) B + √η F0
    let (st, sr) = (eta.sqrt(), (1.0 - eta).sqrt());
    let mut s = DMatrix::identity(8, 8);
    for q in 0..2 {
        let (b, f) = (2 + q, 4 + q);
        s[(b, b)] = st;
        s[(b, f)] = sr;
        s[(f, b)] = -sr;
        s[(f, f)] = st;
    }
    let g = &s * m * s.transpose();
    // split into measured B1 (indices 2, 3) and the rest (A, F, G)
    let rest = [0usize, 1, 4, 5, 6, 7];
    let meas = [2usize, 3];
    let ga = DMatrix::from_fn(6, 6, |i, j| g[(rest[i], rest[j])]);
    let gb = DMatrix::from_fn(2, 2, |i, j| g[(meas[i], meas[j])]);
    let sigma = DMatrix::from_fn(6, 2, |i, j| g[(rest[i], meas[j])]);
    let inv = (gb + DMatrix::identity(2, 2)).try_inverse().unwrap();
    let cond = ga - &sigma * inv * sigma.transpose();
    symplectic_eigenvalues(&CovarianceMatrix::new(cond).unwrap()).unwrap()
}

/// Mutual information estimated from simulated heterodyne data: Alice
/// sends coherent states with Gaussian modulation of variance `va` on both
/// quadratures; Bob splits the received mode on a balanced beam splitter
/// and measures `x` and `p` on the two arms with efficiency `η` and
/// electronic noise `v_el`. Returns bits per pulse from the sample
/// covariance of `(x_A, y)` for both quadratures.
pub fn heterodyne_mutual_information<R: Rng>(
    t: f64,
    eps: f64,
    eta: f64,
    v_el: f64,
    va: f64,
    n: usize,
    rng: &mut R,
) -> f64 {
    let mut nrm = || rng.sample::<f64, _>(StandardNormal);
    let mut total = 0.0;
    for _quad in 0..2 {
        let (mut sxx, mut sxy, mut syy, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let xa = va.sqrt() * nrm();
            let state = xa + nrm(); // coherent state quadrature
            let after = t.sqrt() * state + (1.0 - t).sqrt() * nrm() + (t * eps).sqrt() * nrm();
            let arm = (after + nrm()) * std::f64::consts::FRAC_1_SQRT_2;
            let y = eta.sqrt() * arm + (1.0 - eta).sqrt() * nrm() + v_el.sqrt() * nrm();
            sx += xa;
            sy += y;
            sxx += xa * xa;
            sxy += xa * y;
            syy += y * y;
        }
        let nf = n as f64;
        let (mx, my) = (sx / nf, sy / nf);
        let (vx, vy, cxy) = (sxx / nf - mx * mx, syy / nf - my * my, sxy / nf - mx * my);
        let cond = vy - cxy * cxy / vx;
        total += 0.5 * (vy / cond).log2();
    }
    total
}
