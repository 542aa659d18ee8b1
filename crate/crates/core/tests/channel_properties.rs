use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use sparse_spike::channel::{
    channel_point, channel_point_with, mmse, mutual_information, ChannelSettings,
};
use sparse_spike::Prior;

fn prior_strategy() -> impl Strategy<Value = Prior> {
    prop_oneof![
        (0.01f64..=1.0).prop_map(|r| Prior::bernoulli(r).unwrap()),
        (0.01f64..=1.0).prop_map(|r| Prior::bernoulli_rademacher(r).unwrap()),
        prop::collection::vec((-2.0f64..2.0, 0.05f64..1.0), 2..5).prop_map(|atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            let atoms: Vec<(f64, f64)> = atoms.iter().map(|&(v, w)| (v, w / total)).collect();
            Prior::from_atoms(&atoms).unwrap()
        }),
    ]
}

fn sparse_strategy() -> impl Strategy<Value = Prior> {
    (-20.0f64..-0.7, any::<bool>()).prop_map(|(log_rho, signed)| {
        let rho = 10f64.powf(log_rho);
        if signed {
            Prior::bernoulli_rademacher(rho).unwrap()
        } else {
            Prior::bernoulli(rho).unwrap()
        }
    })
}

/// `2 dI/dγ` by a central difference.
fn fd_mmse(prior: &Prior, snr: f64, h: f64) -> f64 {
    let up = mutual_information(prior, snr + h).unwrap();
    let down = mutual_information(prior, snr - h).unwrap();
    (up - down) / h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn information_increases_and_mmse_decreases(
        prior in prior_strategy(),
        a in 0.0f64..50.0,
        b in 0.0f64..50.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p = channel_point(&prior, lo).unwrap();
        let q = channel_point(&prior, hi).unwrap();
        prop_assert!(p.mutual_information <= q.mutual_information + 1e-12);
        prop_assert!(p.mmse >= q.mmse - 1e-10);
    }

    #[test]
    fn information_is_concave(
        prior in prior_strategy(),
        start in 0.0f64..30.0,
        step in 0.01f64..2.0,
    ) {
        let i: Vec<f64> = (0..5)
            .map(|k| mutual_information(&prior, start + step * k as f64).unwrap())
            .collect();
        for w in i.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] <= 1e-9, "second difference {:?}", w);
        }
    }

    #[test]
    fn derivative_of_information_is_half_the_mmse(
        prior in prior_strategy(),
        log_snr in -3.0f64..3.0,
    ) {
        let snr = 10f64.powf(log_snr);
        let fd = fd_mmse(&prior, snr, 1e-4);
        let m = mmse(&prior, snr).unwrap();
        prop_assert!((fd - m).abs() <= 1e-5, "fd {} mmse {}", fd, m);
    }

    #[test]
    fn mmse_lies_between_zero_and_the_variance(prior in prior_strategy(), snr in 0.0f64..100.0) {
        let m = mmse(&prior, snr).unwrap();
        let var = prior.moments().variance;
        prop_assert!(m >= 0.0 && m <= var * (1.0 + 1e-9) + 1e-15);
    }

    #[test]
    fn sign_symmetric_priors_are_invariant_under_negation(
        rho in 1e-12f64..1.0,
        snr in 0.0f64..200.0,
    ) {
        let prior = Prior::bernoulli_rademacher(rho).unwrap();
        let a = channel_point(&prior, snr).unwrap();
        let b = channel_point(&prior.negated(), snr).unwrap();
        prop_assert_eq!(a.mutual_information.to_bits(), b.mutual_information.to_bits());
        prop_assert_eq!(a.mmse.to_bits(), b.mmse.to_bits());
    }

    #[test]
    fn sparse_priors_stay_finite_at_large_snr(prior in sparse_strategy(), snr in 0.0f64..200.0) {
        let p = channel_point(&prior, snr).unwrap();
        prop_assert!(p.mutual_information.is_finite() && p.mmse.is_finite());
        prop_assert!(p.mutual_information >= 0.0);
        prop_assert!(p.mutual_information <= prior.entropy() * (1.0 + 1e-9));
    }
}

#[test]
fn information_at_zero_snr_vanishes() {
    for prior in [
        Prior::bernoulli(0.3).unwrap(),
        Prior::bernoulli_rademacher(1e-6).unwrap(),
        Prior::standard_gaussian(),
    ] {
        let p = channel_point(&prior, 0.0).unwrap();
        assert_eq!(p.mutual_information, 0.0);
        assert!((p.mmse - prior.moments().variance).abs() <= 1e-12);
    }
}

/// `I = E[ln p(Y|X) − ln p(Y)]` by plain Monte Carlo.
fn monte_carlo_information(prior: &Prior, snr: f64, samples: usize, seed: u64) -> (f64, f64) {
    let atoms: Vec<(f64, f64)> = prior.atoms().iter().map(|a| (a.value, a.weight)).collect();
    let s = snr.sqrt();
    let chunks = 100;
    let per = samples / chunks;
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..per {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut x = atoms[atoms.len() - 1].0;
                for &(v, w) in &atoms {
                    acc += w;
                    if u < acc {
                        x = v;
                        break;
                    }
                }
                let z: f64 = rng.sample(StandardNormal);
                let y = s * x + z;
                let evidence: f64 = atoms
                    .iter()
                    .map(|&(v, w)| w * (-(y - s * v).powi(2) / 2.0).exp())
                    .sum();
                let v = -z * z / 2.0 - evidence.ln();
                sum += v;
                sq += v * v;
            }
            (sum, sq)
        })
        .collect();
    let n = (per * chunks) as f64;
    let sum: f64 = sums.iter().map(|p| p.0).sum();
    let sq: f64 = sums.iter().map(|p| p.1).sum();
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

#[test]
fn bernoulli_half_matches_monte_carlo() {
    let prior = Prior::bernoulli(0.5).unwrap();
    let (mc, se) = monte_carlo_information(&prior, 1.0, 10_000_000, 7);
    let quad = mutual_information(&prior, 1.0).unwrap();
    assert!(
        (quad - mc).abs() <= 3.0 * se,
        "quadrature {quad}, monte carlo {mc} ± {se}"
    );
}

#[test]
fn high_order_quadrature_agrees() {
    let prior = Prior::bernoulli(0.5).unwrap();
    let settings = ChannelSettings {
        start_order: 241,
        ..ChannelSettings::default()
    };
    let a = mutual_information(&prior, 1.0).unwrap();
    let b = channel_point_with(&prior, 1.0, &settings)
        .unwrap()
        .mutual_information;
    assert!((a - b).abs() <= 1e-10);
}

#[test]
fn finite_difference_mmse_for_bernoulli_rademacher() {
    for (rho, snr) in [(0.2, 5.0), (0.1, 50.0)] {
        let prior = Prior::bernoulli_rademacher(rho).unwrap();
        let fd = fd_mmse(&prior, snr, 1e-4);
        let m = mmse(&prior, snr).unwrap();
        assert!(
            (fd - m).abs() <= 1e-5,
            "rho {rho} snr {snr}: fd {fd} mmse {m}"
        );
    }
}

#[test]
fn gaussian_prior_is_closed_form() {
    let prior = Prior::standard_gaussian();
    for snr in [0.0, 1e-3, 0.5, 3.0, 1e3] {
        let p = channel_point(&prior, snr).unwrap();
        assert!((p.mutual_information - 0.5 * f64::ln_1p(snr)).abs() <= 1e-12);
        assert!((p.mmse - 1.0 / (1.0 + snr)).abs() <= 1e-12);
    }
    assert!((mutual_information(&prior, 3.0).unwrap() - std::f64::consts::LN_2).abs() <= 1e-12);
}

#[test]
fn information_saturates_at_the_entropy() {
    let prior = Prior::bernoulli(0.5).unwrap();
    let i = mutual_information(&prior, 1e3).unwrap();
    assert!((i - prior.entropy()).abs() <= 1e-12);
    assert!(mmse(&prior, 1e3).unwrap() <= 1e-40);
}
