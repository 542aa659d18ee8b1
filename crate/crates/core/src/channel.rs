//! Scalar Gaussian channel `Y = √γ X + Z`.
//!
//! For a finite prior the mutual information is
//!
//! ```text
//! I(γ) = -Σ_X w_X E_Z ln Σ_x w_x exp(-γ(x-X)²/2 + √γ Z (x-X))
//! ```
//!
//! which is the usual `-E ln Σ_x w_x e^{-γx²/2 + γXx + √γZx} + γE[X²]/2`
//! with the counter-term folded into each exponent before the log-sum-exp,
//! so no large quantities cancel. The Gaussian expectation uses Gauss–Hermite
//! rules of increasing order until two successive orders agree.
//!
//! The MMSE is computed from the posterior mean, `E (X - ⟨x⟩)²`, never by
//! differentiating `I`; the I-MMSE relation is therefore an independent check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::Prior;
use crate::quadrature::{gauss_hermite, gauss_legendre, Rule};

/// Quadrature tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSettings {
    /// First Gauss–Hermite order tried.
    pub start_order: usize,
    /// Orders grow as `2k - 1` and never exceed this cap.
    pub max_order: usize,
    /// Successive orders must agree to this relative accuracy.
    pub rel_tol: f64,
    /// MMSE disagreement is also accepted below `mmse_var_tol * Var(X)`.
    pub mmse_var_tol: f64,
    /// Retry with a composite rule aligned to posterior switches when
    /// Gauss–Hermite reaches the cap without converging.
    pub composite_fallback: bool,
}

impl Default for ChannelSettings {
    fn default() -> Self {
        ChannelSettings {
            start_order: 61,
            max_order: 1025,
            rel_tol: 1e-10,
            mmse_var_tol: 1e-7,
            composite_fallback: true,
        }
    }
}

impl ChannelSettings {
    pub fn validate(&self) -> Result<()> {
        if self.start_order == 0 || self.max_order < self.start_order {
            return Err(Error::Parameter(format!(
                "quadrature orders must satisfy 0 < start ({}) <= max ({})",
                self.start_order, self.max_order
            )));
        }
        if !(self.rel_tol > 0.0) || !(self.mmse_var_tol > 0.0) {
            return Err(Error::Parameter(
                "quadrature tolerances must be positive".into(),
            ));
        }
        Ok(())
    }

    fn orders(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(Some(self.start_order), |&o| Some(2 * o - 1))
            .take_while(|&o| o <= self.max_order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPoint {
    pub snr: f64,
    /// In nats.
    pub mutual_information: f64,
    pub mmse: f64,
    /// Order of the last rule used; 0 when a closed form applied.
    pub quadrature_order: usize,
    pub est_abs_error: f64,
}

fn check_snr(snr: f64) -> Result<()> {
    if snr.is_finite() && snr >= 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "snr must be finite and >= 0, got {snr}"
        )))
    }
}

pub fn channel_point(prior: &Prior, snr: f64) -> Result<ChannelPoint> {
    channel_point_with(prior, snr, &ChannelSettings::default())
}

pub fn mutual_information(prior: &Prior, snr: f64) -> Result<f64> {
    channel_point(prior, snr).map(|c| c.mutual_information)
}

pub fn mmse(prior: &Prior, snr: f64) -> Result<f64> {
    channel_point(prior, snr).map(|c| c.mmse)
}

pub fn channel_point_with(
    prior: &Prior,
    snr: f64,
    settings: &ChannelSettings,
) -> Result<ChannelPoint> {
    check_snr(snr)?;
    let closed = |mutual_information, mmse| ChannelPoint {
        snr,
        mutual_information,
        mmse,
        quadrature_order: 0,
        est_abs_error: 0.0,
    };
    if prior.is_gaussian() {
        return Ok(closed(0.5 * snr.ln_1p(), 1.0 / (1.0 + snr)));
    }
    let variance = prior.moments().variance;
    if snr == 0.0 {
        return Ok(closed(0.0, variance));
    }
    if prior.atoms().len() == 1 {
        return Ok(closed(0.0, 0.0));
    }

    let accept = |prev: Pass, cur: Pass| {
        let d_info = (cur.info - prev.info).abs();
        let d_mmse = (cur.mmse - prev.mmse).abs();
        // disagreement below the rounding level of the sum cannot be refined away
        let info_ok = d_info <= settings.rel_tol * cur.info.abs()
            || d_info <= ROUNDING_SLACK * f64::EPSILON * cur.mass;
        let mmse_ok = d_mmse <= settings.rel_tol * cur.mmse.abs()
            || d_mmse <= settings.mmse_var_tol * variance;
        (info_ok && mmse_ok, d_info.max(d_mmse))
    };
    let finish = |pass: Pass, order, est_abs_error| ChannelPoint {
        snr,
        mutual_information: pass.info.max(0.0),
        mmse: pass.mmse.max(0.0),
        quadrature_order: order,
        est_abs_error,
    };

    let mut previous: Option<Pass> = None;
    let mut gh_err = (0, f64::INFINITY);
    for order in settings.orders() {
        let rule = gauss_hermite(order);
        let current = evaluate(prior, snr, &rule);
        if let Some(prev) = previous {
            let (ok, err) = accept(prev, current);
            if ok {
                return Ok(finish(current, order, err));
            }
            gh_err = (order, err);
        }
        previous = Some(current);
    }

    if !settings.composite_fallback {
        let (info, mmse) = previous.map_or((f64::NAN, f64::NAN), |p| (p.info, p.mmse));
        return Err(Error::Numerical {
            message: format!("Gauss-Hermite quadrature did not converge at snr {snr} (last I = {info:e}, mmse = {mmse:e})"),
            order: gh_err.0,
            est_abs_error: gh_err.1,
        });
    }
    // Gauss–Hermite could not resolve a sharp posterior switch in the tail;
    // retry with panels aligned to the switches.
    let mut prev = evaluate_composite(prior, snr, 0);
    let mut last_err = f64::INFINITY;
    let mut order = 0;
    for level in 1..=COMPOSITE_LEVELS {
        let current = evaluate_composite(prior, snr, level);
        let (ok, err) = accept(prev, current);
        order = composite_size(prior, snr, level);
        if ok {
            return Ok(finish(current, order, err));
        }
        last_err = err;
        prev = current;
    }
    Err(Error::Numerical {
        message: format!(
            "quadrature did not converge at snr {snr} (last I = {:e}, mmse = {:e})",
            prev.info, prev.mmse
        ),
        order,
        est_abs_error: last_err,
    })
}

const COMPOSITE_LEVELS: u32 = 4;
const ROUNDING_SLACK: f64 = 64.0;

/// Node count of the composite rule for the first true atom (diagnostic only).
fn composite_size(prior: &Prior, snr: f64, level: u32) -> usize {
    panels(&Kernel::new(prior, snr), 0, level).len() * PANEL_ORDER
}

/// Result of one quadrature pass.
#[derive(Debug, Clone, Copy)]
struct Pass {
    info: f64,
    mmse: f64,
    /// `E |ln Σ|`, the scale of the rounding error in `info`.
    mass: f64,
}

/// One Gauss–Hermite pass.
fn evaluate(prior: &Prior, snr: f64, rule: &Rule) -> Pass {
    let kernel = Kernel::new(prior, snr);
    let mut info = 0.0;
    let mut mmse = 0.0;
    let mut mass = 0.0;
    for (t, truth) in prior.atoms().iter().enumerate() {
        let (i_x, m_x, a_x) = kernel.truth_term(
            t,
            rule.nodes.iter().copied().zip(rule.weights.iter().copied()),
        );
        info += truth.weight * i_x;
        mmse += truth.weight * m_x;
        mass += truth.weight * a_x;
    }
    Pass { info, mmse, mass }
}

/// Exponent size below which the `expm1` form of the normaliser is used.
const SMALL_EXPONENT: f64 = 0.5;

/// Largest |z| kept by the fallback rule; the normal density underflows beyond it.
const TAIL: f64 = 38.5;
const PANEL_ORDER: usize = 16;

/// Composite Gauss–Legendre pass against the normal density, with panel
/// breaks at every `z` where two exponents cross. `level` halves the panels.
fn evaluate_composite(prior: &Prior, snr: f64, level: u32) -> Pass {
    let kernel = Kernel::new(prior, snr);
    let unit = gauss_legendre(PANEL_ORDER, 0.0, 1.0);
    let norm = (2.0 * std::f64::consts::PI).sqrt().recip();
    let mut info = 0.0;
    let mut mmse = 0.0;
    let mut mass = 0.0;
    for (t, truth) in prior.atoms().iter().enumerate() {
        let mut points = Vec::new();
        for (a, h) in panels(&kernel, t, level) {
            for (&u, &wu) in unit.nodes.iter().zip(&unit.weights) {
                let z = a + u * h;
                points.push((z, wu * h * norm * (-0.5 * z * z).exp()));
            }
        }
        let (i_x, m_x, a_x) = kernel.truth_term(t, points.into_iter());
        info += truth.weight * i_x;
        mmse += truth.weight * m_x;
        mass += truth.weight * a_x;
    }
    Pass { info, mmse, mass }
}

/// `Σ xᵢ - 1` with the rounding error of the summation carried along
/// (Neumaier compensation).
fn exact_sum_minus_one(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = -1.0_f64;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// `(start, width)` of each panel for one true atom: breaks at every crossing
/// inside `[-TAIL, TAIL]`, then uniform pieces no wider than the kink scale.
fn panels(kernel: &Kernel, truth: usize, level: u32) -> Vec<(f64, f64)> {
    let max_width = 0.5_f64.min(2.0 / kernel.snr.sqrt()) / f64::from(1u32 << level);
    let mut breaks = kernel.crossings(truth);
    breaks.retain(|z| z.abs() < TAIL);
    breaks.extend([-TAIL, TAIL]);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        let pieces = ((w[1] - w[0]) / max_width).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / pieces as f64;
        out.extend((0..pieces).map(|p| (w[0] + p as f64 * h, h)));
    }
    out
}

/// Exponents of the shifted posterior, shared by both quadrature schemes.
struct Kernel<'a> {
    prior: &'a Prior,
    snr: f64,
    log_w: Vec<f64>,
    /// `Σ w - 1` computed without rounding; nonzero when `1 - ρ` is not representable.
    excess: f64,
}

impl<'a> Kernel<'a> {
    fn new(prior: &'a Prior, snr: f64) -> Self {
        let log_w = prior.atoms().iter().map(|a| a.weight.ln()).collect();
        let excess = exact_sum_minus_one(prior.atoms().iter().map(|a| a.weight));
        Kernel {
            prior,
            snr,
            log_w,
            excess,
        }
    }

    fn offsets(&self, truth: usize) -> (Vec<f64>, Vec<f64>) {
        let atoms = self.prior.atoms();
        let x = atoms[truth].value;
        let delta: Vec<f64> = atoms.iter().map(|a| a.value - x).collect();
        let base = delta
            .iter()
            .zip(&self.log_w)
            .map(|(d, lw)| lw - 0.5 * self.snr * d * d)
            .collect();
        (delta, base)
    }

    /// Values of `z` where two exponents are equal.
    fn crossings(&self, truth: usize) -> Vec<f64> {
        let (delta, base) = self.offsets(truth);
        let sqrt_snr = self.snr.sqrt();
        let mut out = Vec::new();
        for a in 0..delta.len() {
            for b in a + 1..delta.len() {
                let slope = sqrt_snr * (delta[a] - delta[b]);
                if slope != 0.0 {
                    out.push((base[b] - base[a]) / slope);
                }
            }
        }
        out
    }

    /// `(-E_Z ln Σ, E_Z (⟨x⟩ - X)², E_Z |ln Σ|)` for one true atom. The last
    /// entry bounds the rounding error of the first.
    fn truth_term(
        &self,
        truth: usize,
        points: impl Iterator<Item = (f64, f64)>,
    ) -> (f64, f64, f64) {
        let (delta, base) = self.offsets(truth);
        let k = delta.len();
        let sqrt_snr = self.snr.sqrt();
        let curvature: Vec<f64> = delta.iter().map(|d| -0.5 * self.snr * d * d).collect();
        let mut expo = vec![0.0; k];
        let mut small_expo = vec![0.0; k];
        let mut info_x = 0.0;
        let mut mmse_x = 0.0;
        let mut mass_x = 0.0;
        for (z, wz) in points {
            let mut arg = 0;
            let mut small = true;
            for b in 0..k {
                expo[b] = base[b] + sqrt_snr * z * delta[b];
                // kept apart from ln w so tiny exponents are not rounded against it
                small_expo[b] = curvature[b] + sqrt_snr * z * delta[b];
                small &= small_expo[b].abs() <= SMALL_EXPONENT;
                if expo[b] > expo[arg] {
                    arg = b;
                }
            }
            let (log_norm, post_dev) = if small {
                // Σ w e^a = 1 + Σ w (e^a - 1) keeps O(a) accuracy when every a is small
                let mut shift = self.excess;
                let mut first = 0.0;
                for b in 0..k {
                    let w = self.log_w[b].exp();
                    let a = small_expo[b];
                    shift += w * a.exp_m1();
                    first += w * a.exp() * delta[b];
                }
                (shift.ln_1p(), first / (1.0 + shift))
            } else {
                let max = expo[arg];
                // the maximal term is excluded from `rest` so ln_1p sees the small part
                let mut rest = 0.0;
                let mut first = 0.0;
                for b in 0..k {
                    let e = if b == arg { 1.0 } else { (expo[b] - max).exp() };
                    if b != arg {
                        rest += e;
                    }
                    first += e * delta[b];
                }
                (max + rest.ln_1p(), first / (1.0 + rest))
            };
            // normalise by Σ w, which differs from 1 by `excess`
            let log_norm = log_norm - self.excess.ln_1p();
            info_x -= wz * log_norm;
            mmse_x += wz * post_dev * post_dev;
            mass_x += wz * log_norm.abs();
        }
        (info_x, mmse_x, mass_x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_snr_is_short_circuited() {
        for p in [
            Prior::bernoulli(0.3).unwrap(),
            Prior::bernoulli_rademacher(0.1).unwrap(),
            Prior::standard_gaussian(),
        ] {
            let c = channel_point(&p, 0.0).unwrap();
            assert_eq!(c.mutual_information, 0.0);
            assert!((c.mmse - p.moments().variance).abs() < 1e-15);
        }
        let c = channel_point(&Prior::bernoulli(0.5).unwrap(), 0.0).unwrap();
        assert_eq!((c.mutual_information, c.mmse), (0.0, 0.25));
        assert!((mmse(&Prior::bernoulli(0.3).unwrap(), 0.0).unwrap() - 0.21).abs() < 1e-15);
    }

    #[test]
    fn gaussian_closed_forms() {
        let g = Prior::standard_gaussian();
        let c = channel_point(&g, 3.0).unwrap();
        assert!((c.mutual_information - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(c.mmse, 0.25);
        assert_eq!(mmse(&g, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn negative_snr_is_rejected() {
        let p = Prior::bernoulli(0.5).unwrap();
        assert!(matches!(
            mutual_information(&p, -1e-3),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(mmse(&p, f64::NAN), Err(Error::Parameter(_))));
    }

    #[test]
    fn point_mass_carries_no_information() {
        let p = Prior::bernoulli(1.0).unwrap();
        let c = channel_point(&p, 10.0).unwrap();
        assert_eq!((c.mutual_information, c.mmse), (0.0, 0.0));
    }

    #[test]
    fn tiny_cap_reports_numerical_error() {
        let settings = ChannelSettings {
            start_order: 3,
            max_order: 5,
            composite_fallback: false,
            ..ChannelSettings::default()
        };
        let p = Prior::bernoulli(1e-8).unwrap();
        match channel_point_with(&p, 80.0, &settings) {
            Err(Error::Numerical {
                order,
                est_abs_error,
                ..
            }) => {
                assert_eq!(order, 5);
                assert!(est_abs_error > 0.0);
            }
            other => panic!("expected numerical error, got {other:?}"),
        }
        // the composite fallback rescues the same point
        let rescued = channel_point_with(
            &p,
            80.0,
            &ChannelSettings {
                composite_fallback: true,
                ..settings
            },
        )
        .unwrap();
        let reference = channel_point(&p, 80.0).unwrap();
        assert!(
            (rescued.mutual_information - reference.mutual_information).abs()
                <= 1e-9 * reference.mutual_information
        );
    }

    #[test]
    fn composite_rule_agrees_with_gauss_hermite() {
        for p in [
            Prior::bernoulli(0.05).unwrap(),
            Prior::bernoulli_rademacher(1e-4).unwrap(),
        ] {
            for snr in [0.5, 7.0, 60.0] {
                let gh = channel_point(&p, snr).unwrap();
                let Pass { info, mmse, .. } = evaluate_composite(&p, snr, 3);
                assert!(
                    (info - gh.mutual_information).abs() <= 1e-9 * gh.mutual_information,
                    "{snr}"
                );
                assert!(
                    (mmse - gh.mmse).abs() <= 1e-7 * p.moments().variance,
                    "{snr}"
                );
            }
        }
    }

    #[test]
    fn unrepresentable_zero_weight_is_normalised() {
        // 1 - 1e-20 rounds to 1, so the stored weights sum to 1 + ρ
        let rho = 1e-20;
        let p = Prior::bernoulli(rho).unwrap();
        for snr in [1e-6, 5.0, 20.0] {
            let c = channel_point(&p, snr).unwrap();
            // I/ρ → snr/2 and mmse/ρ → 1 up to O(ρ e^snr)
            assert!(
                (c.mutual_information / (rho * snr / 2.0) - 1.0).abs() < 1e-9,
                "{snr}"
            );
            assert!((c.mmse / rho - 1.0).abs() < 1e-6, "{snr}");
        }
        assert_eq!(exact_sum_minus_one([1.0, 1e-20].into_iter()), 1e-20);
    }

    #[test]
    fn tiny_snr_keeps_relative_accuracy() {
        let p = Prior::bernoulli_rademacher(0.3).unwrap();
        for snr in [1e-14, 1e-10, 1e-6] {
            let c = channel_point(&p, snr).unwrap();
            let approx = 0.5 * snr * 0.3;
            assert!((c.mutual_information / approx - 1.0).abs() < 1e-5, "{snr}");
        }
    }

    #[test]
    fn binary_antipodal_large_snr_saturates_at_ln2() {
        let p = Prior::from_atoms(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let c = channel_point(&p, 200.0).unwrap();
        assert!((c.mutual_information - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(c.mmse < 1e-20);
    }

    #[test]
    fn small_snr_expansion() {
        // I ≈ γ Var/2 - γ² Var²/4 for small γ and a zero-mean prior
        let p = Prior::bernoulli_rademacher(0.2).unwrap();
        let g = 1e-4;
        let c = channel_point(&p, g).unwrap();
        let approx = 0.5 * g * 0.2;
        assert!(((c.mutual_information - approx) / approx).abs() < 1e-3);
        assert!(((c.mmse - 0.2) / 0.2).abs() < 1e-3);
    }
}
