mod oracles;

use qsdc_core::channel_model::ChannelParams;
use qsdc_core::rng::{Purpose, RngSeed};
use qsdc_core::security_capacity::{holevo_bound, mutual_information_ab, secrecy_capacity, CapacityParams};

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
fn closed_form_spectrum_matches_covariance_reduction() {
    let mut worst: f64 = 0.0;
    for (eta, v_el) in [(0.5, 0.01), (0.9, 0.05), (0.6, 0.0)] {
        for i in 0..5 {
            for j in 0..4 {
                for k in 0..5 {
                    let t = 0.1 + 0.9 * i as f64 / 4.0;
                    let eps = 0.1 * j as f64 / 3.0;
                    let v = 2.0 + 18.0 * k as f64 / 4.0;
                    let (s, _) = holevo_bound(&params(t, eps, eta, v_el, v - 1.0)).unwrap();
                    let eve = oracles::eve_spectrum(t, eps, v);
                    let cond = oracles::conditional_spectrum(t, eps, v, eta, v_el);
                    let diffs = [
                        s.lambdas[0] - eve[0],
                        s.lambdas[1] - eve[1],
                        s.lambdas[2] - cond[0],
                        s.lambdas[3] - cond[1],
                        1.0 - cond[2],
                    ];
                    for d in diffs {
                        worst = worst.max(d.abs());
                    }
                }
            }
        }
    }
    assert!(worst < 1e-6, "max deviation {worst:e}");
}

#[test]
fn mutual_information_matches_simulated_heterodyne() {
    let mut rng = RngSeed(7).stream(Purpose::Test, 0);
    let p = params(0.6275, 0.0184, 0.5, 0.01, 8.0);
    let sim = oracles::heterodyne_mutual_information(0.6275, 0.0184, 0.5, 0.01, 8.0, 1_000_000, &mut rng);
    let closed = mutual_information_ab(&p);
    assert!((sim / closed - 1.0).abs() < 0.01, "{sim} vs {closed}");
}

#[test]
fn capacity_shrinks_with_distance_and_noise() {
    let mut prev = f64::INFINITY;
    for km in 0..=100 {
        let ch = ChannelParams::fiber(km as f64, 0.2, 0.0184, 0.5, 0.01).unwrap();
        let p = CapacityParams { channel: ch, ..params(0.5, 0.0, 0.5, 0.01, 8.0) };
        let r = secrecy_capacity(&p).unwrap();
        assert!(r.c_single <= prev + 1e-12, "{km} km");
        assert_eq!(r.c_mux, 4.0 * r.c_single);
        prev = r.c_single;
    }
    let mut prev = f64::INFINITY;
    for j in 0..50 {
        let r = secrecy_capacity(&params(0.6275, 0.004 * j as f64, 0.5, 0.01, 8.0)).unwrap();
        assert!(r.c_single <= prev + 1e-12);
        prev = r.c_single;
    }
}

#[test]
fn capacity_is_monotone_in_reception_rates() {
    let base = params(0.6275, 0.0184, 0.5, 0.01, 8.0);
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=10 {
        let r = secrecy_capacity(&CapacityParams { q_b: i as f64 / 10.0, ..base }).unwrap();
        assert!(r.c_single >= prev);
        prev = r.c_single;
    }
    let mut prev = f64::INFINITY;
    for i in 0..=10 {
        let r = secrecy_capacity(&CapacityParams { q_e: i as f64 / 10.0, ..base }).unwrap();
        assert!(r.c_single <= prev);
        prev = r.c_single;
    }
}

#[test]
fn capacity_adds_over_identical_modes() {
    let base = params(0.6275, 0.0184, 0.5, 0.01, 8.0);
    let one = secrecy_capacity(&CapacityParams { n_modes: 1, ..base }).unwrap();
    for n in 1..=8 {
        let r = secrecy_capacity(&CapacityParams { n_modes: n, ..base }).unwrap();
        assert_eq!(r.c_mux, n as f64 * one.c_single);
    }
}
