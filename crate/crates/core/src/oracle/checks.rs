//! Disorder-averaged checks built on exact posteriors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{exact_posteriors, sample_batch, FiniteInstance, InterpolationState, PosteriorSummary};
use crate::channel::mutual_information;
use crate::error::{Error, Result};
use crate::numeric::{jackknife, mean_and_stderr};
use crate::potential::{wigner_potential, WignerSpec};
use crate::prior::Prior;
use crate::quadrature::gauss_legendre;

const JACOBIAN_GROUPS: usize = 10;

fn check_disorder(n_disorder: usize) -> Result<()> {
    if n_disorder < 2 {
        return Err(Error::Parameter(format!(
            "n_disorder must be at least 2, got {n_disorder}"
        )));
    }
    Ok(())
}

fn check_s_n(s_n: f64) -> Result<()> {
    if !(s_n > 0.0 && s_n < 0.5) {
        return Err(Error::Parameter(format!(
            "s_n must lie in (0, 1/2), got {s_n}"
        )));
    }
    Ok(())
}

fn second_moment(prior: &Prior) -> f64 {
    prior.moments().second_moment
}

/// `i_n(t, R) = F + (n−1)/n · m₂² λ (1−t)/4 + m₂ R / 2` per instance, with
/// `m₂ = E[X²]`.
fn info_offset(n: usize, prior: &Prior, lambda: f64, t: f64, r: f64) -> f64 {
    let m2 = second_moment(prior);
    let nf = n as f64;
    (nf - 1.0) / nf * m2 * m2 * lambda * (1.0 - t) / 4.0 + m2 * r / 2.0
}

/// Mutual information per variable `I(X; W)/n` of the plain model, with its
/// jackknife standard error over `n_disorder` instances.
pub fn mutual_information_mc(
    n: usize,
    prior: &Prior,
    lambda: f64,
    n_disorder: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_disorder(n_disorder)?;
    let batch = sample_batch(n, prior, lambda, seed, n_disorder)?;
    if n == 1 {
        // no pairs, no data
        return Ok((0.0, 0.0));
    }
    let offset = info_offset(n, prior, lambda, 0.0, 0.0);
    let f: Vec<f64> = exact_posteriors(&batch, None)?
        .iter()
        .map(|p| p.free_energy + offset)
        .collect();
    Ok(mean_with_jackknife(&f))
}

fn mean_with_jackknife(xs: &[f64]) -> (f64, f64) {
    let total: f64 = xs.iter().sum();
    let n = xs.len() as f64;
    jackknife(xs.len(), |skip| match skip {
        None => total / n,
        Some(k) => (total - xs[k]) / (n - 1.0),
    })
}

/// Disorder average of the two Nishimori identities
/// `E‖⟨x⟩‖² = E[X·⟨x⟩]` and `E‖⟨x xᵀ⟩‖² = E⟨(x·X)²⟩`, each normalised per
/// entry. Returns `|mean difference|` and its standard error for whichever
/// identity deviates most in units of its standard error.
pub fn nishimori_check(batch: &[FiniteInstance]) -> Result<(f64, f64)> {
    check_disorder(batch.len())?;
    let posts = exact_posteriors(batch, None)?;
    let mut vector = Vec::with_capacity(batch.len());
    let mut matrix = Vec::with_capacity(batch.len());
    for (inst, p) in batch.iter().zip(&posts) {
        let nf = inst.n as f64;
        let norm: f64 = p.posterior_mean.iter().map(|m| m * m).sum();
        let cross: f64 = p
            .posterior_mean
            .iter()
            .zip(&inst.signal)
            .map(|(m, x)| m * x)
            .sum();
        vector.push((norm - cross) / nf);
        matrix.push(p.replica_overlap_sq - p.mean_overlap_sq);
    }
    let (mv, sv) = mean_and_stderr(&vector);
    let (mm, sm) = mean_and_stderr(&matrix);
    let score = |m: f64, s: f64| {
        if s > 0.0 {
            m.abs() / s
        } else if m == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    Ok(if score(mm, sm) > score(mv, sv) {
        (mm.abs(), sm)
    } else {
        (mv.abs(), sv)
    })
}

/// Boundary gaps of the interpolation at `ε = s_n` along the constant path `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGaps {
    /// `|i_n(0, ε) − I/n|`.
    pub gap_t0: f64,
    pub gap_t0_err: f64,
    /// `|i_n(1, ε) − I_scalar(λ q)|`.
    pub gap_t1: f64,
    pub gap_t1_err: f64,
    /// `max(gap) / (ρ s_n)`.
    pub c_emp: f64,
}

pub fn boundary_values_check(
    n: usize,
    prior: &Prior,
    lambda: f64,
    q_const: f64,
    s_n: f64,
    n_disorder: usize,
    seed: u64,
) -> Result<BoundaryGaps> {
    check_disorder(n_disorder)?;
    check_s_n(s_n)?;
    check_q(prior, q_const)?;
    let batch = sample_batch(n, prior, lambda, seed, n_disorder)?;
    let start = InterpolationState::constant(lambda, q_const, 0.0, s_n, s_n)?;
    let end = InterpolationState::constant(lambda, q_const, 1.0, s_n, s_n)?;
    let plain = exact_posteriors(&batch, None)?;
    let at0 = exact_posteriors(&batch, Some(&start))?;
    let at1 = exact_posteriors(&batch, Some(&end))?;

    let m2 = second_moment(prior);
    let d0: Vec<f64> = at0
        .iter()
        .zip(&plain)
        .map(|(a, b)| a.free_energy + m2 * start.r / 2.0 - b.free_energy)
        .collect();
    let target = mutual_information(prior, lambda * q_const)?;
    let off1 = info_offset(n, prior, lambda, 1.0, end.r);
    let d1: Vec<f64> = at1.iter().map(|a| a.free_energy + off1 - target).collect();
    let (g0, e0) = mean_and_stderr(&d0);
    let (g1, e1) = mean_and_stderr(&d1);
    let rho = prior.rho();
    Ok(BoundaryGaps {
        gap_t0: g0.abs(),
        gap_t0_err: e0,
        gap_t1: g1.abs(),
        gap_t1_err: e1,
        c_emp: g0.abs().max(g1.abs()) / (rho * s_n),
    })
}

fn check_q(prior: &Prior, q: f64) -> Result<()> {
    let rho = prior.rho();
    if !(0.0..=rho).contains(&q) {
        return Err(Error::Parameter(format!("q = {q} must lie in [0, {rho}]")));
    }
    Ok(())
}

/// Both sides of the sum rule along a constant path `q`, at `ε = s_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumRuleCheck {
    /// `I/n` by Monte Carlo.
    pub lhs: f64,
    /// `i_pot(q) + λ/4 (R1 − R2 − R3)`.
    pub rhs: f64,
    pub residual: f64,
    pub remainder_r1: f64,
    pub remainder_r2: f64,
    pub remainder_r3: f64,
    /// Jackknife error of the residual.
    pub mc_err: f64,
    /// `|residual| / (ρ s_n + λ/n)`.
    pub c_emp: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn sum_rule_check(
    n: usize,
    prior: &Prior,
    lambda: f64,
    q_const: f64,
    s_n: f64,
    n_disorder: usize,
    n_time_nodes: usize,
    seed: u64,
) -> Result<SumRuleCheck> {
    check_disorder(n_disorder)?;
    check_s_n(s_n)?;
    check_q(prior, q_const)?;
    if n_time_nodes == 0 {
        return Err(Error::Parameter("n_time_nodes must be positive".into()));
    }
    let batch = sample_batch(n, prior, lambda, seed, n_disorder)?;
    let potential = wigner_potential(&WignerSpec::new(prior.clone(), lambda)?, q_const)?;
    let offset = info_offset(n, prior, lambda, 0.0, 0.0);
    let lhs_samples: Vec<f64> = exact_posteriors(&batch, None)?
        .iter()
        .map(|p| p.free_energy + offset)
        .collect();

    let rule = gauss_legendre(n_time_nodes, 0.0, 1.0);
    let mut q_nodes = Vec::with_capacity(rule.order());
    let mut q2_nodes = Vec::with_capacity(rule.order());
    for &t in &rule.nodes {
        let state = InterpolationState::constant(lambda, q_const, t, s_n, s_n)?;
        let posts = exact_posteriors(&batch, Some(&state))?;
        q_nodes.push(posts.iter().map(|p| p.mean_overlap).collect::<Vec<_>>());
        q2_nodes.push(posts.iter().map(|p| p.mean_overlap_sq).collect::<Vec<_>>());
    }
    let total = |xs: &[f64]| xs.iter().sum::<f64>();
    let lhs_total = total(&lhs_samples);
    let q_totals: Vec<f64> = q_nodes.iter().map(|v| total(v)).collect();
    let q2_totals: Vec<f64> = q2_nodes.iter().map(|v| total(v)).collect();
    // the first remainder measures how far the path is from constant
    let r1 = 0.0;

    // (lhs, r2, r3) with sample `skip` left out
    let parts = |skip: Option<usize>| {
        let (m, drop) = match skip {
            None => (n_disorder as f64, None),
            Some(k) => ((n_disorder - 1) as f64, Some(k)),
        };
        let less = |tot: f64, xs: &[f64]| drop.map_or(tot, |k| tot - xs[k]) / m;
        let lhs = less(lhs_total, &lhs_samples);
        let mut r2 = 0.0;
        let mut r3 = 0.0;
        for (j, w) in rule.weights.iter().enumerate() {
            let eq = less(q_totals[j], &q_nodes[j]);
            let eq2 = less(q2_totals[j], &q2_nodes[j]);
            r2 += w * (eq2 - eq * eq).max(0.0);
            r3 += w * (q_const - eq).powi(2);
        }
        (lhs, r2, r3)
    };
    let residual_of = |p: (f64, f64, f64)| p.0 - (potential + lambda / 4.0 * (r1 - p.1 - p.2));
    let (lhs, r2, r3) = parts(None);
    let (residual, mc_err) = jackknife(n_disorder, |skip| residual_of(parts(skip)));
    let rhs = potential + lambda / 4.0 * (r1 - r2 - r3);
    Ok(SumRuleCheck {
        lhs,
        rhs,
        residual,
        remainder_r1: r1,
        remainder_r2: r2,
        remainder_r3: r3,
        mc_err,
        c_emp: residual.abs() / (prior.rho() * s_n + lambda / n as f64),
    })
}

/// Euler solution of `R' = λ E⟨Q⟩_{t,R}`, `R(0) = ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSolution {
    /// `n_steps + 1` nodes, ending at `t = 1`.
    pub r_path: Vec<(f64, f64)>,
    /// The drift used on each step, as a step function.
    pub q_path: Vec<(f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
pub fn adaptive_ode_solve(
    n: usize,
    prior: &Prior,
    lambda: f64,
    epsilon: f64,
    n_steps: usize,
    n_disorder: usize,
    seed: u64,
) -> Result<OdeSolution> {
    check_ode(epsilon, n_steps, n_disorder)?;
    let batch = sample_batch(n, prior, lambda, seed, n_disorder)?;
    let refs: Vec<&FiniteInstance> = batch.iter().collect();
    euler_path(&refs, prior, lambda, epsilon, n_steps)
}

fn check_ode(epsilon: f64, n_steps: usize, n_disorder: usize) -> Result<()> {
    check_disorder(n_disorder)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    if n_steps == 0 {
        return Err(Error::Parameter("n_steps must be positive".into()));
    }
    Ok(())
}

fn euler_path(
    batch: &[&FiniteInstance],
    prior: &Prior,
    lambda: f64,
    epsilon: f64,
    n_steps: usize,
) -> Result<OdeSolution> {
    let rho = prior.rho();
    let h = 1.0 / n_steps as f64;
    let mut r = epsilon;
    let mut r_path = vec![(0.0, r)];
    let mut q_path: Vec<(f64, f64)> = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let t = k as f64 * h;
        let mut prefix = q_path.clone();
        if prefix.is_empty() {
            prefix.push((0.0, 0.0));
        }
        let mut state = InterpolationState::from_path(lambda, t, epsilon, epsilon, prefix)?;
        // the Euler sum and the step integral agree up to rounding; keep the sum
        state.r = r;
        let posts: Vec<PosteriorSummary> = batch
            .par_iter()
            .map(|inst| super::exact_posterior(inst, Some(&state)))
            .collect::<Result<_>>()?;
        let mean = posts.iter().map(|p| p.mean_overlap).sum::<f64>() / posts.len() as f64;
        // E⟨Q⟩ lies in [0, ρ]; the finite-sample mean may not
        let q = mean.clamp(0.0, rho);
        q_path.push((t, q));
        r += h * lambda * q;
        r_path.push(((k + 1) as f64 * h, r));
    }
    Ok(OdeSolution { r_path, q_path })
}

/// `(R(1; 2 s_n) − R(1; s_n)) / s_n` on common disorder, with a
/// delete-group jackknife error over ten groups.
#[allow(clippy::too_many_arguments)]
pub fn ode_jacobian(
    n: usize,
    prior: &Prior,
    lambda: f64,
    s_n: f64,
    n_steps: usize,
    n_disorder: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_s_n(s_n)?;
    check_ode(s_n, n_steps, n_disorder)?;
    let batch = sample_batch(n, prior, lambda, seed, n_disorder)?;
    let groups = JACOBIAN_GROUPS.min(n_disorder);
    let jac = |skip: Option<usize>| -> Result<f64> {
        let kept: Vec<&FiniteInstance> = batch
            .iter()
            .enumerate()
            .filter(|(k, _)| skip != Some(k % groups))
            .map(|(_, inst)| inst)
            .collect();
        let end = |eps| euler_path(&kept, prior, lambda, eps, n_steps).map(|s| s.r_path[n_steps].1);
        Ok((end(2.0 * s_n)? - end(s_n)?) / s_n)
    };
    let mut failure = None;
    let (value, err) = jackknife(groups, |skip| {
        jac(skip).unwrap_or_else(|e| {
            failure.get_or_insert(e);
            f64::NAN
        })
    });
    match failure {
        Some(e) => Err(e),
        None => Ok((value, err)),
    }
}

/// `(E⟨(Q − ⟨Q⟩)²⟩, E[(⟨Q⟩ − E⟨Q⟩)²])`, thermal and quenched parts.
pub fn overlap_fluctuation(
    batch: &[FiniteInstance],
    interp: Option<&InterpolationState>,
) -> Result<(f64, f64)> {
    if batch.is_empty() {
        return Err(Error::Parameter(
            "overlap_fluctuation needs a nonempty batch".into(),
        ));
    }
    let posts = exact_posteriors(batch, interp)?;
    let m = posts.len() as f64;
    let thermal = posts
        .iter()
        .map(|p| (p.mean_overlap_sq - p.mean_overlap.powi(2)).max(0.0))
        .sum::<f64>()
        / m;
    let mean = posts.iter().map(|p| p.mean_overlap).sum::<f64>() / m;
    let quenched = posts
        .iter()
        .map(|p| (p.mean_overlap - mean).powi(2))
        .sum::<f64>()
        / m;
    Ok((thermal, quenched))
}

/// Finite-n I-MMSE: central difference of `I/n` in `λ` against a quarter of
/// the off-diagonal matrix MMSE, on common disorder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImmseCheck {
    pub fd_slope: f64,
    /// `offdiag_matrix_mmse / 4`, the exact derivative.
    pub mmse_slope: f64,
    /// `matrix_mmse / 4`; differs from the derivative by the diagonal, `O(1/n)`.
    pub full_mmse_slope: f64,
    /// Jackknife error of `fd_slope − mmse_slope`.
    pub std_err: f64,
}

pub fn finite_n_immse(
    n: usize,
    prior: &Prior,
    lambda: f64,
    step: f64,
    n_disorder: usize,
    seed: u64,
) -> Result<ImmseCheck> {
    check_disorder(n_disorder)?;
    if !(step > 0.0 && step < lambda) {
        return Err(Error::Parameter(format!(
            "finite-difference step must lie in (0, lambda), got {step}"
        )));
    }
    let info = |l: f64| -> Result<Vec<f64>> {
        let offset = info_offset(n, prior, l, 0.0, 0.0);
        let batch = sample_batch(n, prior, l, seed, n_disorder)?;
        Ok(exact_posteriors(&batch, None)?
            .iter()
            .map(|p| p.free_energy + offset)
            .collect())
    };
    let up = info(lambda + step)?;
    let down = info(lambda - step)?;
    let centre = exact_posteriors(&sample_batch(n, prior, lambda, seed, n_disorder)?, None)?;
    let fd: Vec<f64> = up
        .iter()
        .zip(&down)
        .map(|(u, d)| (u - d) / (2.0 * step))
        .collect();
    let slope: Vec<f64> = centre.iter().map(|p| p.offdiag_matrix_mmse / 4.0).collect();
    let full: Vec<f64> = centre.iter().map(|p| p.matrix_mmse / 4.0).collect();
    let diff: Vec<f64> = fd.iter().zip(&slope).map(|(a, b)| a - b).collect();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(ImmseCheck {
        fd_slope: mean(&fd),
        mmse_slope: mean(&slope),
        full_mmse_slope: mean(&full),
        std_err: mean_with_jackknife(&diff).1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn information_trivial_limits() {
        let prior = Prior::bernoulli(0.3).unwrap();
        assert_eq!(
            mutual_information_mc(1, &prior, 4.0, 10, 1).unwrap(),
            (0.0, 0.0)
        );
        let (mi, se) = mutual_information_mc(6, &prior, 0.0, 50, 2).unwrap();
        assert!(mi.abs() <= 3.0 * se + 1e-15, "{mi} ± {se}");
    }

    #[test]
    fn information_is_bounded_by_the_entropy() {
        let prior = Prior::bernoulli(0.3).unwrap();
        let (mi, se) = mutual_information_mc(6, &prior, 40.0, 200, 3).unwrap();
        assert!(mi > 0.0 && mi <= prior.entropy() + 3.0 * se);
    }

    #[test]
    fn nishimori_holds_on_average() {
        for (prior, lambda) in [
            (Prior::bernoulli(0.3).unwrap(), 0.0),
            (Prior::bernoulli(0.3).unwrap(), 6.0),
            (Prior::bernoulli_rademacher(0.4).unwrap(), 4.0),
        ] {
            let batch = sample_batch(5, &prior, lambda, 11, 400).unwrap();
            let (v, se) = nishimori_check(&batch).unwrap();
            assert!(v <= 3.0 * se, "lambda {lambda}: {v} vs {se}");
        }
    }

    #[test]
    fn remainders_have_their_signs() {
        let prior = Prior::bernoulli(0.4).unwrap();
        let s = sum_rule_check(5, &prior, 2.0, 0.2, 0.05, 60, 6, 4).unwrap();
        assert_eq!(s.remainder_r1, 0.0);
        assert!(s.remainder_r2 >= 0.0 && s.remainder_r3 >= 0.0);
        assert!(s.mc_err > 0.0 && s.mc_err.is_finite());
        assert!((s.residual - (s.lhs - s.rhs)).abs() < 1e-12);
    }

    #[test]
    fn ode_without_signal_stays_at_epsilon() {
        let prior = Prior::bernoulli(0.3).unwrap();
        let sol = adaptive_ode_solve(5, &prior, 0.0, 0.07, 8, 10, 1).unwrap();
        assert_eq!(sol.r_path.len(), 9);
        for (_, r) in &sol.r_path {
            assert_eq!(*r, 0.07);
        }
    }

    #[test]
    fn ode_path_is_monotone_and_q_in_range() {
        let prior = Prior::bernoulli(0.3).unwrap();
        let sol = adaptive_ode_solve(5, &prior, 3.0, 0.05, 10, 40, 2).unwrap();
        for w in sol.r_path.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        for (_, q) in &sol.q_path {
            assert!((0.0..=0.3).contains(q));
        }
    }

    #[test]
    fn boundary_gap_at_the_end_is_small_for_zero_path() {
        let prior = Prior::bernoulli(0.3).unwrap();
        let g = boundary_values_check(5, &prior, 3.0, 0.0, 0.02, 200, 5).unwrap();
        assert!(g.gap_t1 <= 0.3 * 0.02 / 2.0 + 3.0 * g.gap_t1_err);
        assert!(g.gap_t0 <= 0.3 * 0.02 / 2.0 + 3.0 * g.gap_t0_err);
    }

    // At λ = 0 the posterior is the prior product: Var(Q) and Var(⟨Q⟩) are
    // sums over independent coordinates.
    #[test]
    fn fluctuations_at_zero_snr_match_the_product_measure() {
        let rho = 0.3;
        let n = 6;
        let prior = Prior::bernoulli(rho).unwrap();
        let batch = sample_batch(n, &prior, 0.0, 8, 4000).unwrap();
        let (thermal, quenched) = overlap_fluctuation(&batch, None).unwrap();
        let var_x = rho * (1.0 - rho);
        let nf = n as f64;
        let thermal_exact = rho * var_x / nf;
        let quenched_exact = rho * rho * var_x / nf;
        assert!(
            (thermal - thermal_exact).abs() < 0.05 * thermal_exact,
            "{thermal}"
        );
        assert!(
            (quenched - quenched_exact).abs() < 0.1 * quenched_exact,
            "{quenched}"
        );
    }
}
