use sparse_spike::phase::{
    default_gamma_grid, lambda_critical, limiting_rescaled_mi, locate_threshold, wigner_curve,
    wishart_curve, PriorFamily, ThresholdModel,
};
use sparse_spike::potential::{Model, WishartSpec};
use sparse_spike::varsolve::solve_wishart;

/// `H(X) / (ρ|ln ρ|)`: the rescaled information of exact recovery.
fn recovery_level(family: PriorFamily, rho: f64) -> f64 {
    family.prior(rho).unwrap().entropy() / (rho * rho.ln().abs())
}

#[test]
fn critical_lambda_is_exact() {
    for rho in [1e-2, 1e-4, 1e-8, 1e-12] {
        let l = lambda_critical(Model::Wigner, rho, None).unwrap();
        assert!((l * rho / (4.0 * rho.ln().abs()) - 1.0).abs() <= 4.0 * f64::EPSILON);
        let alpha = 2.0;
        let l = lambda_critical(Model::Wishart, rho, Some(alpha)).unwrap();
        assert!((l * l * alpha * rho / (4.0 * rho.ln().abs()) - 1.0).abs() <= 8.0 * f64::EPSILON);
    }
}

#[test]
fn below_the_transition_information_follows_gamma() {
    for rho in [1e-4, 1e-6, 1e-8] {
        for family in [PriorFamily::Ber, PriorFamily::BerRad] {
            let rows = wigner_curve(family, rho, &[0.2, 0.5, 0.8]).unwrap();
            for row in rows {
                let row = row.unwrap();
                assert!((row.rescaled_mi - row.gamma).abs() <= 1e-6, "{row:?}");
                assert!(row.matrix_mmse_rescaled >= 0.99);
            }
        }
    }
}

#[test]
fn above_the_transition_information_is_the_recovery_level() {
    for rho in [1e-4, 1e-6, 1e-8] {
        for family in [PriorFamily::Ber, PriorFamily::BerRad] {
            let level = recovery_level(family, rho);
            for row in wigner_curve(family, rho, &[1.5, 2.0]).unwrap() {
                let row = row.unwrap();
                assert!(
                    (row.rescaled_mi - level).abs() <= 5e-3,
                    "{row:?} level {level}"
                );
            }
        }
    }
}

#[test]
fn excess_over_the_limit_shrinks_with_rho() {
    let grid = [0.5, 1.5, 2.0];
    let excess = |rho: f64| -> f64 {
        wigner_curve(PriorFamily::Ber, rho, &grid)
            .unwrap()
            .into_iter()
            .map(|r| {
                let r = r.unwrap();
                r.rescaled_mi - limiting_rescaled_mi(r.gamma)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let e: Vec<f64> = [1e-4, 1e-6, 1e-8].into_iter().map(excess).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    assert!(e[1] <= 0.1 && e[2] <= 0.1, "{e:?}");
}

#[test]
fn matrix_mmse_does_not_increase_with_gamma() {
    let rows = wigner_curve(PriorFamily::Ber, 1e-6, &default_gamma_grid()).unwrap();
    let mmse: Vec<f64> = rows
        .into_iter()
        .map(|r| r.unwrap().matrix_mmse_rescaled)
        .collect();
    for w in mmse.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "{w:?}");
    }
    assert!(mmse[0] == 1.0);
    assert!(*mmse.last().unwrap() <= 1e-3);
}

#[test]
fn wishart_information_follows_root_alpha_gamma() {
    for gamma in [0.5, 1.5] {
        let spec = WishartSpec::spiked_covariance(1e-8, 1.0, gamma).unwrap();
        let sol = solve_wishart(&spec).unwrap();
        let v = sol.rescaled_value.unwrap();
        assert!((v - gamma.sqrt()).abs() <= 0.1, "γ {gamma}: {v}");
    }
}

#[test]
fn wishart_rows_are_consistent() {
    let rho = 1e-6;
    let rows = wishart_curve(rho, 1.0, &[0.0, 0.5, 1.5, 2.0]).unwrap();
    for row in rows {
        let r = row.unwrap();
        assert!((r.mmse_vv_rescaled - (1.0 - (r.q_v_star / rho).powi(2))).abs() <= 1e-9);
        assert!((r.mmse_uu_rescaled - (1.0 - r.q_u_star.powi(2))).abs() <= 1e-9);
        assert!((r.mmse_uv_rescaled - (1.0 - r.q_u_star * r.q_v_star / rho)).abs() <= 1e-9);
        for m in [r.mmse_vv_rescaled, r.mmse_uu_rescaled, r.mmse_uv_rescaled] {
            assert!((0.0..=1.0).contains(&m));
        }
        if r.gamma == 0.0 {
            assert_eq!(r.mmse_uv_rescaled, 1.0);
        }
        if r.gamma == 2.0 {
            assert!(r.mmse_vv_rescaled <= 0.02);
        }
    }
}

#[test]
fn signed_prior_threshold_is_shifted_by_its_extra_entropy() {
    let mut gaps = Vec::new();
    for rho in [1e-6, 1e-10] {
        let ber = locate_threshold(
            ThresholdModel::Wigner {
                family: PriorFamily::Ber,
            },
            rho,
            (0.5, 1.5),
        )
        .unwrap()
        .gamma_c;
        let signed = locate_threshold(
            ThresholdModel::Wigner {
                family: PriorFamily::BerRad,
            },
            rho,
            (0.5, 1.5),
        )
        .unwrap()
        .gamma_c;
        let gap = signed - ber;
        let predicted = std::f64::consts::LN_2 / rho.ln().abs();
        assert!(
            (gap - predicted).abs() <= 0.01,
            "ρ {rho}: gap {gap}, predicted {predicted}"
        );
        gaps.push(gap);
    }
    assert!(gaps[1] < gaps[0]);
}
