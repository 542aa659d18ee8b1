//! Exact finite-n ground truth for the spiked Wigner model.
//!
//! Posteriors are computed by enumerating every configuration in
//! `atoms^n` (see [`ENUMERATION_BUDGET`]). On top of that sit Monte Carlo
//! averages over the disorder (signal and noise) and the checks of the
//! adaptive interpolation: boundary values, the sum rule, the adaptive ODE
//! and the Nishimori identity.
//!
//! Disorder sample `k` under seed `s` is drawn from ChaCha8 keyed by `s`
//! on streams `2k` (signal, then matrix noise) and `2k + 1` (scalar-channel
//! noise), so batches are reproducible regardless of scheduling.

mod checks;
mod enumerate;
mod report;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::Prior;

pub use checks::{
    adaptive_ode_solve, boundary_values_check, finite_n_immse, mutual_information_mc,
    nishimori_check, ode_jacobian, overlap_fluctuation, sum_rule_check, BoundaryGaps, ImmseCheck,
    OdeSolution, SumRuleCheck,
};
pub use enumerate::ENUMERATION_BUDGET;
pub use report::{write_oracle_csv, OracleRow, ORACLE_HEADER};

/// One draw of the finite model `W_ij = √(λ/n) X_i X_j + Z_ij`, `i < j`.
///
/// Matrices are stored as their strict upper triangle, row by row
/// (see [`FiniteInstance::pair_index`]); the diagonal is not part of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteInstance {
    pub n: usize,
    pub prior: Prior,
    pub lambda: f64,
    pub signal: Vec<f64>,
    pub noise: Vec<f64>,
    pub data: Vec<f64>,
    /// `Z̃`, the noise of the scalar side channel of the interpolating model.
    pub scalar_noise: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl FiniteInstance {
    /// Position of the pair `(i, j)`, `i < j`, in the packed triangle.
    pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < n);
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// `W_ij(t) = √((1−t)λ/n) X_i X_j + Z_ij`; `t = 0` gives `data`.
    pub fn data_at(&self, t: f64) -> Vec<f64> {
        if t == 0.0 {
            return self.data.clone();
        }
        let amp = ((1.0 - t) * self.lambda / self.n as f64).sqrt();
        self.pairs()
            .map(|(i, j, k)| amp * self.signal[i] * self.signal[j] + self.noise[k])
            .collect()
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, Self::pair_index(n, i, j))))
    }

    pub fn signal_norm_sq(&self) -> f64 {
        self.signal.iter().map(|x| x * x).sum()
    }
}

fn check_instance_params(n: usize, prior: &Prior, lambda: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Parameter(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    if prior.is_gaussian() {
        return Err(Error::Unsupported(
            "exact enumeration needs a finite prior, not the Gaussian".into(),
        ));
    }
    Ok(())
}

pub fn sample_instance(n: usize, prior: &Prior, lambda: f64, seed: u64) -> Result<FiniteInstance> {
    sample_indexed(n, prior, lambda, seed, 0)
}

/// Disorder sample number `stream` under `seed`.
pub fn sample_indexed(
    n: usize,
    prior: &Prior,
    lambda: f64,
    seed: u64,
    stream: u64,
) -> Result<FiniteInstance> {
    check_instance_params(n, prior, lambda)?;
    let atoms = prior.atoms();
    let pick = WeightedIndex::new(atoms.iter().map(|a| a.weight))
        .map_err(|e| Error::Parameter(format!("prior weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * stream);
    let signal: Vec<f64> = (0..n).map(|_| atoms[pick.sample(&mut rng)].value).collect();
    let pairs = n * (n - 1) / 2;
    let noise: Vec<f64> = (0..pairs)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    rng.set_stream(2 * stream + 1);
    let scalar_noise: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut inst = FiniteInstance {
        n,
        prior: prior.clone(),
        lambda,
        signal,
        noise,
        data: Vec::new(),
        scalar_noise,
        seed,
        stream,
    };
    let amp = (lambda / n as f64).sqrt();
    inst.data = inst
        .pairs()
        .map(|(i, j, k)| amp * inst.signal[i] * inst.signal[j] + inst.noise[k])
        .collect();
    Ok(inst)
}

/// Samples `0..count` under one seed, in index order.
pub fn sample_batch(
    n: usize,
    prior: &Prior,
    lambda: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<FiniteInstance>> {
    check_instance_params(n, prior, lambda)?;
    (0..count as u64)
        .into_par_iter()
        .map(|k| sample_indexed(n, prior, lambda, seed, k))
        .collect()
}

/// A point `(t, R)` on an interpolation path `R(t) = ε + λ ∫₀ᵗ q`.
///
/// `q_path` is a step function: `(t_k, q_k)` holds on `[t_k, t_{k+1})`.
/// The side-channel observations `√R X + Z̃` are built per instance by
/// [`InterpolationState::extra_data`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationState {
    pub t: f64,
    pub epsilon: f64,
    pub s_n: f64,
    pub r: f64,
    pub q_path: Vec<(f64, f64)>,
}

impl InterpolationState {
    pub fn constant(lambda: f64, q: f64, t: f64, epsilon: f64, s_n: f64) -> Result<Self> {
        Self::from_path(lambda, t, epsilon, s_n, vec![(0.0, q)])
    }

    pub fn from_path(
        lambda: f64,
        t: f64,
        epsilon: f64,
        s_n: f64,
        q_path: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Parameter(format!("t must lie in [0, 1], got {t}")));
        }
        if !(s_n > 0.0 && s_n.is_finite()) {
            return Err(Error::Parameter(format!("s_n must be > 0, got {s_n}")));
        }
        if !(epsilon >= s_n && epsilon <= 2.0 * s_n) {
            return Err(Error::Parameter(format!(
                "epsilon = {epsilon} must lie in [s_n, 2 s_n] = [{s_n}, {}]",
                2.0 * s_n
            )));
        }
        if q_path.first().map(|p| p.0) != Some(0.0)
            || q_path.windows(2).any(|w| w[1].0 <= w[0].0)
            || q_path.iter().any(|p| !(p.1 >= 0.0 && p.1.is_finite()))
        {
            return Err(Error::Parameter(
                "q path must start at t = 0, increase in t and have finite q >= 0".into(),
            ));
        }
        let mut integral = 0.0;
        for (k, &(tk, qk)) in q_path.iter().enumerate() {
            let end = q_path.get(k + 1).map_or(1.0, |p| p.0).min(t);
            if end > tk {
                integral += qk * (end - tk);
            }
        }
        Ok(InterpolationState {
            t,
            epsilon,
            s_n,
            r: epsilon + lambda * integral,
            q_path,
        })
    }

    /// `√R X + Z̃`.
    pub fn extra_data(&self, inst: &FiniteInstance) -> Vec<f64> {
        let s = self.r.sqrt();
        inst.signal
            .iter()
            .zip(&inst.scalar_noise)
            .map(|(x, z)| s * x + z)
            .collect()
    }
}

/// Exact posterior statistics of one instance.
///
/// Overlaps are per instance (`⟨Q⟩`, not yet disorder-averaged). Matrix
/// errors are normalised by `n²`; `offdiag_matrix_mmse` keeps only the
/// `i ≠ j` entries, which are the ones observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean_overlap: f64,
    pub mean_overlap_sq: f64,
    pub vector_mmse: f64,
    pub matrix_mmse: f64,
    pub offdiag_matrix_mmse: f64,
    /// `−ln Z / n`.
    pub free_energy: f64,
    pub posterior_mean: Vec<f64>,
    /// `‖⟨x xᵀ⟩‖²_F / n²`, the two-replica overlap `⟨Q₁₂²⟩`.
    pub replica_overlap_sq: f64,
    /// Lexicographic over `atoms^n`; kept only for small enumerations.
    pub per_config_posterior: Option<Vec<f64>>,
}

/// Interpolating posterior at `interp`, or the plain model when absent.
pub fn exact_posterior(
    inst: &FiniteInstance,
    interp: Option<&InterpolationState>,
) -> Result<PosteriorSummary> {
    let n = inst.n;
    let (t, r) = interp.map_or((0.0, 0.0), |s| (s.t, s.r));
    let live: Vec<_> = inst
        .prior
        .atoms()
        .iter()
        .filter(|a| a.weight > 0.0)
        .collect();
    enumerate::configuration_count(live.len(), n)?;
    let total: f64 = live.iter().map(|a| a.weight).sum();
    let values: Vec<f64> = live.iter().map(|a| a.value).collect();
    let log_weights: Vec<f64> = live.iter().map(|a| (a.weight / total).ln()).collect();

    let c = (1.0 - t) * inst.lambda / n as f64;
    let amp = c.sqrt();
    let w = inst.data_at(t);
    let mut coupling = vec![0.0; n * n];
    for (i, j, k) in inst.pairs() {
        coupling[j * n + i] = amp * w[k];
        coupling[i * n + j] = amp * w[k];
    }
    let field: Vec<f64> = match interp {
        Some(s) => {
            let sr = s.r.sqrt();
            s.extra_data(inst).iter().map(|y| sr * y).collect()
        }
        None => vec![0.0; n],
    };
    let sums = enumerate::enumerate(&enumerate::Hamiltonian {
        n,
        values: &values,
        log_weights: &log_weights,
        coupling: &coupling,
        quartic: c,
        field: &field,
        r,
        signal: &inst.signal,
    })?;

    let nf = n as f64;
    let x = &inst.signal;
    let vector_mmse = x
        .iter()
        .zip(&sums.mean_x)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / nf;
    let mut diag = 0.0;
    let mut offdiag = 0.0;
    let mut replica = 0.0;
    for i in 0..n {
        for j in 0..n {
            let m = sums.pair[i * n + j];
            let e = (x[i] * x[j] - m).powi(2);
            if i == j {
                diag += e;
            } else {
                offdiag += e;
            }
            replica += m * m;
        }
    }
    let n2 = nf * nf;
    Ok(PosteriorSummary {
        mean_overlap: sums.overlap,
        mean_overlap_sq: sums.overlap_sq,
        vector_mmse,
        matrix_mmse: (diag + offdiag) / n2,
        offdiag_matrix_mmse: offdiag / n2,
        free_energy: -sums.log_partition / nf,
        posterior_mean: sums.mean_x,
        replica_overlap_sq: replica / n2,
        per_config_posterior: sums.per_config,
    })
}

/// Exact posteriors of a batch, in batch order.
pub fn exact_posteriors(
    batch: &[FiniteInstance],
    interp: Option<&InterpolationState>,
) -> Result<Vec<PosteriorSummary>> {
    batch
        .par_iter()
        .map(|inst| exact_posterior(inst, interp))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_hermite;

    #[test]
    fn trivial_sampling_cases() {
        let prior = Prior::bernoulli(0.3).unwrap();
        let one = sample_instance(1, &prior, 5.0, 1).unwrap();
        assert!(one.data.is_empty() && one.noise.is_empty());
        let zero = sample_instance(7, &prior, 0.0, 2).unwrap();
        assert_eq!(zero.data, zero.noise);
        let a = sample_instance(6, &prior, 3.0, 9).unwrap();
        let b = sample_instance(6, &prior, 3.0, 9).unwrap();
        assert_eq!(a, b);
        for v in &a.signal {
            assert!(*v == 0.0 || *v == 1.0);
        }
        assert!(matches!(
            sample_instance(3, &Prior::standard_gaussian(), 1.0, 0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn data_reconstructs_from_signal_and_noise() {
        let prior = Prior::bernoulli_rademacher(0.5).unwrap();
        let inst = sample_instance(5, &prior, 2.5, 4).unwrap();
        let amp = (2.5f64 / 5.0).sqrt();
        for i in 0..5 {
            for j in i + 1..5 {
                let k = FiniteInstance::pair_index(5, i, j);
                let expect = amp * inst.signal[i] * inst.signal[j] + inst.noise[k];
                assert_eq!(inst.data[k], expect);
            }
        }
        assert_eq!(FiniteInstance::pair_index(5, 3, 4), 9);
    }

    #[test]
    fn batches_are_streams_of_one_seed() {
        let prior = Prior::bernoulli(0.4).unwrap();
        let batch = sample_batch(4, &prior, 1.0, 77, 5).unwrap();
        assert_eq!(batch[3], sample_indexed(4, &prior, 1.0, 77, 3).unwrap());
        assert_ne!(batch[0].noise, batch[1].noise);
    }

    #[test]
    fn zero_snr_posterior_is_the_prior() {
        let rho = 0.3;
        let prior = Prior::bernoulli(rho).unwrap();
        let inst = sample_instance(6, &prior, 0.0, 3).unwrap();
        let post = exact_posterior(&inst, None).unwrap();
        let ones = inst.signal.iter().sum::<f64>();
        assert!((post.mean_overlap - rho * ones / 6.0).abs() < 1e-14);
        assert!(post.free_energy.abs() < 1e-14);
        for m in &post.posterior_mean {
            assert!((m - rho).abs() < 1e-14);
        }
        let probs = post.per_config_posterior.unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    // A support of size <= 1 leaves every off-diagonal entry pure noise,
    // so only instances with two or more nonzero entries can concentrate.
    #[test]
    fn strong_signal_posterior_concentrates() {
        let prior = Prior::bernoulli(0.4).unwrap();
        let mut checked = 0;
        for seed in 0..12 {
            let inst = sample_instance(6, &prior, 1e3, seed).unwrap();
            if inst.signal.iter().filter(|x| **x != 0.0).count() < 2 {
                continue;
            }
            let post = exact_posterior(&inst, None).unwrap();
            assert!(post.vector_mmse < 1e-3, "seed {seed}: {}", post.vector_mmse);
            checked += 1;
        }
        assert!(checked >= 6);
    }

    // Two variables: the posterior over (x1, x2) given W12 has four terms,
    // and E⟨Q⟩ is a one-dimensional Gaussian integral over the noise.
    #[test]
    fn two_spin_overlap_matches_quadrature() {
        let lambda = 3.0;
        let prior = Prior::bernoulli(0.5).unwrap();
        let amp = (lambda / 2.0f64).sqrt();
        let configs = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];
        let rule = gauss_hermite(81);
        let mut oracle = 0.0;
        for &(a, b) in &configs {
            let inner = rule.integrate(|z| {
                let w = amp * a * b + z;
                let lw: Vec<f64> = configs
                    .iter()
                    .map(|&(x, y)| amp * x * y * w - 0.5 * amp * amp * x * x * y * y)
                    .collect();
                let z_sum: f64 = lw.iter().map(|l| l.exp()).sum();
                configs
                    .iter()
                    .zip(&lw)
                    .map(|(&(x, y), l)| l.exp() / z_sum * (x * a + y * b) / 2.0)
                    .sum()
            });
            oracle += 0.25 * inner;
        }
        let batch = sample_batch(2, &prior, lambda, 5, 200_000).unwrap();
        let qs: Vec<f64> = exact_posteriors(&batch, None)
            .unwrap()
            .iter()
            .map(|p| p.mean_overlap)
            .collect();
        let (mean, se) = crate::numeric::mean_and_stderr(&qs);
        assert!(
            (mean - oracle).abs() < 4.0 * se,
            "{mean} vs {oracle} ± {se}"
        );
    }

    #[test]
    fn interpolation_state_integrates_its_path() {
        let s = InterpolationState::from_path(2.0, 0.75, 0.1, 0.05, vec![(0.0, 0.2), (0.5, 0.4)])
            .unwrap();
        assert!((s.r - (0.1 + 2.0 * (0.5 * 0.2 + 0.25 * 0.4))).abs() < 1e-15);
        assert!(InterpolationState::constant(1.0, 0.1, 0.5, 0.2, 0.05).is_err());
    }

    #[test]
    fn budget_error_names_the_limit() {
        let prior = Prior::bernoulli(0.5).unwrap();
        let inst = sample_instance(27, &prior, 1.0, 0).unwrap();
        match exact_posterior(&inst, None) {
            Err(Error::Resource(m)) => assert!(m.contains("1e8")),
            other => panic!("{other:?}"),
        }
    }
}
