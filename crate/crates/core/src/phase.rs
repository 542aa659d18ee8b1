//! Phase-transition diagnostics: thresholds, limiting curves and the
//! rescaled MI/MMSE curves against `γ = λ/λ_c(ρ)`.
//!
//! MMSEs are read off the variational solution through the overlap
//! identification `E⟨Q⟩ ≈ q*`, `E⟨Q²⟩ ≈ q*²`; at finite `ρ` they are
//! predictions of the asymptotic formula, not finite-`n` quantities.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{check_sparse_rho, Model, ScalingRegime, WignerSpec, WishartSpec};
use crate::prior::Prior;
use crate::varsolve::{solve_wigner, solve_wishart};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorFamily {
    /// `Ber(ρ)`.
    Ber,
    /// Bernoulli–Rademacher.
    BerRad,
}

impl PriorFamily {
    pub fn prior(self, rho: f64) -> Result<Prior> {
        match self {
            PriorFamily::Ber => Prior::bernoulli(rho),
            PriorFamily::BerRad => Prior::bernoulli_rademacher(rho),
        }
    }
}

/// `λ_c(ρ) = 4|ln ρ|/ρ` (Wigner) or `√(4|ln ρ|/(αρ))` (Wishart).
pub fn lambda_critical(model: Model, rho: f64, alpha: Option<f64>) -> Result<f64> {
    match (model, alpha) {
        (Model::Wigner, Some(_)) => Err(Error::Parameter(
            "alpha applies to the Wishart model only".into(),
        )),
        (Model::Wishart, None) => Err(Error::Parameter("the Wishart model needs alpha".into())),
        _ => {
            check_sparse_rho(rho)?;
            ScalingRegime {
                beta: 0.0,
                gamma: 1.0,
                model,
            }
            .lambda(rho, alpha)
        }
    }
}

/// `min(γ, 1)`: the `ρ → 0` limit of `I/(nρ|ln ρ|)`. Expects `γ ≥ 0`.
pub fn limiting_rescaled_mi(gamma: f64) -> f64 {
    gamma.min(1.0)
}

/// `(ln n)^{1/3} / n^{(1-6β)/7}` (Wigner) or `(ln n)^{1/3} / n^{(4-12β)/18}`
/// (Wishart), the rate of the finite-`n` theorems without their constant.
pub fn theorem_rate_bound(model: Model, n: f64, beta: f64) -> Result<f64> {
    let limit = ScalingRegime::beta_limit(model);
    if !(beta >= 0.0 && beta < limit) {
        return Err(Error::Domain(format!(
            "beta = {beta} is outside [0, {limit}) for the {model:?} rate"
        )));
    }
    if !(n > 1.0 && n.is_finite()) {
        return Err(Error::Domain(format!("the rate needs n > 1, got {n}")));
    }
    let exponent = match model {
        Model::Wigner => (1.0 - 6.0 * beta) / 7.0,
        Model::Wishart => (4.0 - 12.0 * beta) / 18.0,
    };
    Ok(n.ln().cbrt() / n.powf(exponent))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurveRow {
    pub gamma: f64,
    pub lambda: f64,
    pub rho: f64,
    pub rescaled_mi: f64,
    /// `(ρ² - q*²)/ρ²`.
    pub matrix_mmse_rescaled: f64,
    pub argmin_q_over_rho: f64,
    pub near_degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WishartMMSERow {
    pub gamma: f64,
    pub lambda: f64,
    pub q_u_star: f64,
    pub q_v_star: f64,
    /// `(ρ_V² - q_V*²)/ρ_V²`.
    pub mmse_vv_rescaled: f64,
    /// `1 - q_U*²`.
    pub mmse_uu_rescaled: f64,
    /// `(ρ_V - q_U* q_V*)/ρ_V`.
    pub mmse_uv_rescaled: f64,
}

/// A curve row that could not be computed; the scan carries on without it.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedRow {
    pub gamma: f64,
    pub error: Error,
}

pub type CurveRow<T> = std::result::Result<T, FailedRow>;

fn check_grid(gamma_grid: &[f64]) -> Result<()> {
    match gamma_grid.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
        Some(g) => Err(Error::Parameter(format!(
            "gamma grid values must be finite and >= 0, got {g}"
        ))),
        None => Ok(()),
    }
}

/// Default grid: 81 points on `[0, 2]` plus steps of 0.005 on `[0.9, 1.1]`.
pub fn default_gamma_grid() -> Vec<f64> {
    gamma_grid(0.0, 2.0, 81)
}

/// `points` uniform nodes on `[min, max]`, merged with the 0.005-step
/// refinement of `[0.9, 1.1]` where it overlaps. Sorted, without duplicates.
pub fn gamma_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = if points <= 1 {
        vec![min]
    } else {
        (0..points)
            .map(|k| min + (max - min) * k as f64 / (points - 1) as f64)
            .collect()
    };
    grid.extend(
        (0..=40)
            .map(|k| 0.9 + 0.005 * k as f64)
            .filter(|g| *g >= min && *g <= max),
    );
    // round to 1e-12 so the two families of nodes deduplicate exactly
    for g in &mut grid {
        *g = (*g * 1e12).round() / 1e12;
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

pub fn wigner_curve(
    family: PriorFamily,
    rho: f64,
    gamma_grid: &[f64],
) -> Result<Vec<CurveRow<PhaseCurveRow>>> {
    let prior = family.prior(rho)?;
    let lambda_c = lambda_critical(Model::Wigner, rho, None)?;
    check_grid(gamma_grid)?;
    Ok(gamma_grid
        .par_iter()
        .map(|&gamma| {
            wigner_row(&prior, rho, lambda_c, gamma).map_err(|error| FailedRow { gamma, error })
        })
        .collect())
}

fn wigner_row(prior: &Prior, rho: f64, lambda_c: f64, gamma: f64) -> Result<PhaseCurveRow> {
    let lambda = gamma * lambda_c;
    if lambda == 0.0 {
        return Ok(PhaseCurveRow {
            gamma,
            lambda,
            rho,
            rescaled_mi: 0.0,
            matrix_mmse_rescaled: 1.0,
            argmin_q_over_rho: 0.0,
            near_degenerate: false,
        });
    }
    let spec = WignerSpec::new(prior.clone(), lambda)?;
    let sol = solve_wigner(&spec)?;
    log::info!("wigner row gamma = {gamma} done");
    let ratio = sol.argmin_q / rho;
    Ok(PhaseCurveRow {
        gamma,
        lambda,
        rho,
        rescaled_mi: sol.value / (rho * -rho.ln()),
        matrix_mmse_rescaled: 1.0 - ratio * ratio,
        argmin_q_over_rho: ratio,
        near_degenerate: sol.near_degenerate,
    })
}

/// Spiked covariance model (Gaussian `U`, Bernoulli–Rademacher `V`).
pub fn wishart_curve(
    rho_v: f64,
    alpha: f64,
    gamma_grid: &[f64],
) -> Result<Vec<CurveRow<WishartMMSERow>>> {
    let lambda_c = lambda_critical(Model::Wishart, rho_v, Some(alpha))?;
    check_grid(gamma_grid)?;
    Ok(gamma_grid
        .par_iter()
        .map(|&gamma| {
            wishart_row(rho_v, alpha, lambda_c, gamma).map_err(|error| FailedRow { gamma, error })
        })
        .collect())
}

fn wishart_row(rho_v: f64, alpha: f64, lambda_c: f64, gamma: f64) -> Result<WishartMMSERow> {
    let lambda = gamma * lambda_c;
    let (q_u, q_v) = if lambda == 0.0 {
        (0.0, 0.0)
    } else {
        let spec = WishartSpec::spiked_covariance(rho_v, alpha, gamma)?;
        let sol = solve_wishart(&spec)?;
        log::info!("wishart row gamma = {gamma} done");
        (
            sol.argmin_q,
            sol.argsup_q_v.expect("Wishart solutions carry q_v"),
        )
    };
    let v_ratio = q_v / rho_v;
    Ok(WishartMMSERow {
        gamma,
        lambda,
        q_u_star: q_u,
        q_v_star: q_v,
        mmse_vv_rescaled: 1.0 - v_ratio * v_ratio,
        mmse_uu_rescaled: 1.0 - q_u * q_u,
        mmse_uv_rescaled: 1.0 - q_u * v_ratio,
    })
}

/// Which model and prior a threshold search runs on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ThresholdModel {
    Wigner {
        family: PriorFamily,
    },
    /// Spiked covariance model.
    Wishart {
        alpha: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub gamma_c: f64,
    /// Final bracket on `γ`.
    pub bracket: (f64, f64),
    /// `argmin/ρ` at the lower and upper end of the final bracket.
    pub certificate: (f64, f64),
}

const JUMP_LEVEL: f64 = 0.5;
const THRESHOLD_WIDTH: f64 = 1e-4;
const TRACE_POINTS: usize = 11;

/// `q*/ρ` (Wigner) or `q_V*/ρ_V` (Wishart) at a given `γ > 0`.
pub fn argmin_ratio(model: ThresholdModel, rho: f64, gamma: f64) -> Result<f64> {
    let regime_model = match model {
        ThresholdModel::Wigner { .. } => Model::Wigner,
        ThresholdModel::Wishart { .. } => Model::Wishart,
    };
    let regime = ScalingRegime::new(regime_model, 0.0, gamma)?;
    match model {
        ThresholdModel::Wigner { family } => {
            let spec = WignerSpec::from_regime(family.prior(rho)?, &regime)?;
            Ok(solve_wigner(&spec)?.argmin_q / rho)
        }
        ThresholdModel::Wishart { alpha } => {
            let spec = WishartSpec::spiked_covariance(rho, alpha, gamma)?;
            let sol = solve_wishart(&spec)?;
            Ok(sol.argsup_q_v.expect("Wishart solutions carry q_v") / rho)
        }
    }
}

/// Bisects on `γ` for the jump of the minimiser across `ρ/2`, down to a
/// bracket of width `1e-4`. If the bracket ends do not straddle the jump, an
/// 11-point scan looks for one inside; failing that, the scan is returned in
/// the error.
pub fn locate_threshold(model: ThresholdModel, rho: f64, bracket: (f64, f64)) -> Result<Threshold> {
    check_sparse_rho(rho)?;
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Parameter(format!(
            "threshold bracket must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    let ratio = |g: f64| argmin_ratio(model, rho, g);
    let mut r_lo = ratio(lo)?;
    let mut r_hi = ratio(hi)?;
    if !(r_lo <= JUMP_LEVEL && r_hi > JUMP_LEVEL) {
        let trace: Vec<(f64, f64)> = (0..TRACE_POINTS)
            .into_par_iter()
            .map(|k| {
                let g = lo + (hi - lo) * k as f64 / (TRACE_POINTS - 1) as f64;
                ratio(g).map(|r| (g, r))
            })
            .collect::<Vec<Result<_>>>()
            .into_iter()
            .collect::<Result<_>>()?;
        let jump = trace
            .windows(2)
            .find(|w| w[0].1 <= JUMP_LEVEL && w[1].1 > JUMP_LEVEL);
        match jump {
            Some(w) => {
                (lo, r_lo) = w[0];
                (hi, r_hi) = w[1];
            }
            None => {
                let listing: Vec<String> = trace
                    .iter()
                    .map(|(g, r)| format!("{g:.4}:{r:.4}"))
                    .collect();
                return Err(Error::Search(format!(
                    "argmin/rho does not cross {JUMP_LEVEL} in [{}, {}]; scan (gamma:ratio) {}",
                    bracket.0,
                    bracket.1,
                    listing.join(" ")
                )));
            }
        }
    }
    while hi - lo > THRESHOLD_WIDTH {
        let mid = 0.5 * (lo + hi);
        let r = ratio(mid)?;
        log::info!("threshold bracket [{lo:.6}, {hi:.6}], ratio at {mid:.6} = {r:.4}");
        if r > JUMP_LEVEL {
            hi = mid;
            r_hi = r;
        } else {
            lo = mid;
            r_lo = r;
        }
    }
    Ok(Threshold {
        gamma_c: 0.5 * (lo + hi),
        bracket: (lo, hi),
        certificate: (r_lo, r_hi),
    })
}

pub const WIGNER_HEADER: [&str; 7] = [
    "gamma",
    "lambda",
    "rho",
    "rescaled_mi",
    "matrix_mmse_rescaled",
    "argmin_q_over_rho",
    "near_degenerate",
];

pub const WISHART_HEADER: [&str; 7] = [
    "gamma",
    "lambda",
    "q_u_star",
    "q_v_star",
    "mmse_vv_rescaled",
    "mmse_uu_rescaled",
    "mmse_uv_rescaled",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes the Wigner curve; failed rows keep their `γ` and carry `NaN`
/// elsewhere.
pub fn write_wigner_csv<W: Write>(rows: &[CurveRow<PhaseCurveRow>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WIGNER_HEADER).map_err(csv_error)?;
    for row in rows {
        let record = match row {
            Ok(r) => vec![
                fmt_float(r.gamma),
                fmt_float(r.lambda),
                fmt_float(r.rho),
                fmt_float(r.rescaled_mi),
                fmt_float(r.matrix_mmse_rescaled),
                fmt_float(r.argmin_q_over_rho),
                r.near_degenerate.to_string(),
            ],
            Err(f) => failed_record(f.gamma, WIGNER_HEADER.len(), Some("false")),
        };
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_wishart_csv<W: Write>(rows: &[CurveRow<WishartMMSERow>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WISHART_HEADER).map_err(csv_error)?;
    for row in rows {
        let record = match row {
            Ok(r) => [
                r.gamma,
                r.lambda,
                r.q_u_star,
                r.q_v_star,
                r.mmse_vv_rescaled,
                r.mmse_uu_rescaled,
                r.mmse_uv_rescaled,
            ]
            .map(fmt_float)
            .to_vec(),
            Err(f) => failed_record(f.gamma, WISHART_HEADER.len(), None),
        };
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn failed_record(gamma: f64, width: usize, last: Option<&str>) -> Vec<String> {
    let mut record = vec![fmt_float(gamma)];
    record.resize(width, "NaN".to_string());
    if let Some(last) = last {
        record[width - 1] = last.to_string();
    }
    record
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn critical_lambda() {
        let rho = (-1.0f64).exp();
        assert!((lambda_critical(Model::Wigner, rho, None).unwrap() - 4.0 * E).abs() < 1e-12);
        assert!(
            (lambda_critical(Model::Wishart, rho, Some(1.0)).unwrap() - 2.0 * E.sqrt()).abs()
                < 1e-12
        );
        assert!(
            (lambda_critical(Model::Wigner, 0.5, None).unwrap() - 8.0 * 2f64.ln()).abs() < 1e-12
        );
        assert!(matches!(
            lambda_critical(Model::Wigner, 1.0, None),
            Err(Error::Domain(_))
        ));
        for rho in [1e-3, 1e-8, 0.3] {
            let lc = lambda_critical(Model::Wigner, rho, None).unwrap();
            assert!((lc * rho / (4.0 * rho.ln().abs()) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn limiting_curve() {
        assert_eq!(limiting_rescaled_mi(0.5), 0.5);
        assert_eq!(limiting_rescaled_mi(1.0), 1.0);
        assert_eq!(limiting_rescaled_mi(3.0), 1.0);
    }

    #[test]
    fn rate_bound() {
        let w = theorem_rate_bound(Model::Wigner, E, 0.0).unwrap();
        assert!((w - (-1.0f64 / 7.0).exp()).abs() < 1e-15);
        let s = theorem_rate_bound(Model::Wishart, E, 0.0).unwrap();
        assert!((s - (-4.0f64 / 18.0).exp()).abs() < 1e-15);
        assert!(matches!(
            theorem_rate_bound(Model::Wigner, 100.0, 1.0 / 6.0),
            Err(Error::Domain(_))
        ));
        assert!(theorem_rate_bound(Model::Wishart, 100.0, 0.3).is_ok());
        assert!(theorem_rate_bound(Model::Wigner, 1.0, 0.0).is_err());
        // decreasing once ln n > 1/(3·exponent); the (ln n)^{1/3} factor wins before that
        for (model, beta) in [
            (Model::Wigner, 0.0),
            (Model::Wigner, 0.1),
            (Model::Wishart, 0.2),
        ] {
            let exponent = match model {
                Model::Wigner => (1.0 - 6.0 * beta) / 7.0,
                Model::Wishart => (4.0 - 12.0 * beta) / 18.0,
            };
            let start = 1.0 / (3.0 * exponent);
            let mut last = f64::INFINITY;
            for k in 0..40 {
                let n = (start + 0.5 * k as f64).exp();
                let r = theorem_rate_bound(model, n, beta).unwrap();
                assert!(r < last, "{model:?} beta {beta} n {n}");
                last = r;
            }
        }
    }

    #[test]
    fn default_grid_shape() {
        let g = default_gamma_grid();
        assert!(g.len() >= 81);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.contains(&0.905) && g.contains(&1.1));
    }

    #[test]
    fn zero_gamma_rows() {
        let rows = wigner_curve(PriorFamily::Ber, 1e-3, &[0.0]).unwrap();
        let r = rows[0].as_ref().unwrap();
        assert_eq!((r.rescaled_mi, r.matrix_mmse_rescaled), (0.0, 1.0));
        let rows = wishart_curve(1e-3, 1.0, &[0.0]).unwrap();
        let r = rows[0].as_ref().unwrap();
        assert_eq!(
            (r.mmse_vv_rescaled, r.mmse_uu_rescaled, r.mmse_uv_rescaled),
            (1.0, 1.0, 1.0)
        );
        assert!(wigner_curve(PriorFamily::Ber, 1e-3, &[-0.1]).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            Ok(PhaseCurveRow {
                gamma: 0.5,
                lambda: 1.0,
                rho: 0.1,
                rescaled_mi: 0.25,
                matrix_mmse_rescaled: 1.0,
                argmin_q_over_rho: 0.0,
                near_degenerate: true,
            }),
            Err(FailedRow {
                gamma: 0.75,
                error: Error::Search("x".into()),
            }),
        ];
        let mut buf = Vec::new();
        write_wigner_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], WIGNER_HEADER.join(","));
        assert!(lines[1].starts_with("5.0000000000000000e-1,"));
        assert!(lines[1].ends_with(",true"));
        assert_eq!(lines[2], "7.5000000000000000e-1,NaN,NaN,NaN,NaN,NaN,false");
    }
}
