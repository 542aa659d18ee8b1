//! Variational problems: `inf_q i_pot(q)` for the Wigner model and
//! `inf_{q_u} sup_{q_v} i_pot(q_u, q_v)` for the Wishart model.
//!
//! Both use the same one-dimensional machinery: the objective is tabulated
//! on a mixed log/linear grid, every grid local minimum is refined by golden
//! section, and minima not separated by a barrier are merged. The two
//! competing minima of the sparse problem live at very different scales
//! (`q⁻ ≪ ρ/|ln ρ|`, `q⁺ ≈ ρ`), hence the log-spaced part of the grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{mmse, mutual_information};
use crate::error::{Error, Result};
use crate::numeric::{golden_max, golden_min, mixed_grid};
use crate::potential::{wigner_potential, WignerSpec, WishartSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Nodes of the coarse scan.
    pub scan_nodes: usize,
    /// Smallest positive scan node, relative to the domain length.
    pub log_floor: f64,
    /// Where the log-spaced part of the scan hands over to the uniform part,
    /// relative to the domain length.
    pub log_split: f64,
    /// Golden-section bracket width, relative to the domain length.
    pub q_tol: f64,
    /// Optima closer in value than `degeneracy · ρ|ln ρ|` are flagged as
    /// near-degenerate.
    pub degeneracy: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            scan_nodes: 512,
            log_floor: 1e-12,
            log_split: 0.05,
            q_tol: 1e-12,
            degeneracy: 1e-3,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.scan_nodes < 4 {
            return Err(Error::Parameter("scan needs at least 4 nodes".into()));
        }
        if !(self.log_floor > 0.0 && self.log_floor < self.log_split && self.log_split < 1.0) {
            return Err(Error::Parameter(
                "scan needs 0 < log_floor < log_split < 1".into(),
            ));
        }
        if !(self.q_tol > 0.0) || !(self.degeneracy >= 0.0) {
            return Err(Error::Parameter(
                "solver tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalOptimum {
    /// `q` (Wigner) or `q_u` (Wishart).
    pub q: f64,
    /// Inner maximiser `q_v` (Wishart only).
    pub q_v: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalSolution {
    pub value: f64,
    /// `q*` (Wigner) or `q_u*` (Wishart).
    pub argmin_q: f64,
    /// `q_v*` (Wishart only).
    pub argsup_q_v: Option<f64>,
    /// `value / (ρ|ln ρ|)` (Wigner) or `value / √(ρ_V|ln ρ_V|)` (Wishart);
    /// absent when `ρ = 1`.
    pub rescaled_value: Option<f64>,
    /// Every detected local minimum of the outer problem, sorted by `q`.
    pub local_optima: Vec<LocalOptimum>,
    pub near_degenerate: bool,
}

pub fn solve_wigner(spec: &WignerSpec) -> Result<VariationalSolution> {
    solve_wigner_with(spec, &SolverSettings::default())
}

pub fn solve_wigner_with(
    spec: &WignerSpec,
    settings: &SolverSettings,
) -> Result<VariationalSolution> {
    spec.validate()?;
    settings.validate()?;
    let optima = scan_minimize(spec.rho, settings, |q| wigner_potential(spec, q))
        .map_err(|e| e.context(&format!("Wigner solve at lambda {}", spec.lambda)))?;
    let optima: Vec<LocalOptimum> = optima
        .into_iter()
        .map(|(q, value)| LocalOptimum {
            q,
            q_v: None,
            value,
        })
        .collect();
    let gap_scale = settings.degeneracy * spec.rescaling().unwrap_or(1.0);
    Ok(assemble(optima, spec.rescaling(), gap_scale))
}

pub fn solve_wishart(spec: &WishartSpec) -> Result<VariationalSolution> {
    solve_wishart_with(spec, &SolverSettings::default())
}

pub fn solve_wishart_with(
    spec: &WishartSpec,
    settings: &SolverSettings,
) -> Result<VariationalSolution> {
    spec.validate()?;
    settings.validate()?;
    let outer = |q_u: f64| wishart_inner_sup(spec, q_u, settings).map(|(_, v)| v);
    let optima = scan_minimize(spec.rho_u, settings, outer)
        .map_err(|e| e.context(&format!("Wishart solve at lambda {}", spec.lambda)))?;
    let optima = optima
        .into_iter()
        .map(|(q, value)| {
            let (q_v, _) = wishart_inner_sup(spec, q, settings)?;
            Ok(LocalOptimum {
                q,
                q_v: Some(q_v),
                value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rho_v = spec.rho_v;
    let gap_scale = settings.degeneracy * (rho_v * -rho_v.ln()).max(0.0);
    let gap_scale = if gap_scale > 0.0 {
        gap_scale
    } else {
        settings.degeneracy
    };
    Ok(assemble(optima, spec.rescaling(), gap_scale))
}

/// `sup_{q_v ∈ [0, ρ_V]} i_pot(q_u, q_v)` and its maximiser. The objective is
/// concave in `q_v`; the endpoints are compared explicitly because golden
/// section never evaluates them.
pub fn wishart_inner_sup(
    spec: &WishartSpec,
    q_u: f64,
    settings: &SolverSettings,
) -> Result<(f64, f64)> {
    if !(0.0..=spec.rho_u).contains(&q_u) {
        return Err(Error::Domain(format!(
            "q_u = {q_u} is outside [0, {}]",
            spec.rho_u
        )));
    }
    let fixed = spec.alpha * mutual_information(&spec.prior_v, spec.lambda * q_u)?;
    let la = spec.lambda * spec.alpha;
    let varying = |q_v: f64| -> Result<f64> {
        Ok(0.5 * la * (q_u - spec.rho_u) * (q_v - spec.rho_v)
            + mutual_information(&spec.prior_u, la * q_v)?)
    };
    let (mut best_q, mut best) = golden_max(varying, 0.0, spec.rho_v, settings.q_tol * spec.rho_v)?;
    for end in [0.0, spec.rho_v] {
        let v = varying(end)?;
        if v > best || (v == best && end < best_q) {
            best = v;
            best_q = end;
        }
    }
    Ok((best_q, best + fixed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub q_star: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Relative size of value differences treated as rounding noise.
const VALUE_TOL: f64 = 1e-12;

const MAX_FIXED_POINT_ITERATIONS: usize = 10_000;

/// Damped iteration `q ← (1-d) q + d (ρ - mmse(λq))` of the stationarity
/// condition. Stops when `|Δq| ≤ 1e-12 ρ`; running out of iterations is
/// reported through `converged`, not as an error.
pub fn fixed_point_iterate(spec: &WignerSpec, q0: f64, damping: f64) -> Result<FixedPoint> {
    spec.validate()?;
    if !(0.0..=spec.rho).contains(&q0) {
        return Err(Error::Domain(format!(
            "q0 = {q0} is outside [0, {}]",
            spec.rho
        )));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::Parameter(format!(
            "damping must lie in (0, 1], got {damping}"
        )));
    }
    let tol = 1e-12 * spec.rho;
    let mut q = q0;
    for it in 1..=MAX_FIXED_POINT_ITERATIONS {
        let target = spec.rho - mmse(&spec.prior, spec.lambda * q)?;
        // ρ - mmse lies in [ρ - Var, ρ] ⊂ [0, ρ]; only rounding can leave it
        let next = ((1.0 - damping) * q + damping * target).clamp(0.0, spec.rho);
        let step = (next - q).abs();
        q = next;
        if step <= tol {
            return Ok(FixedPoint {
                q_star: q,
                iterations: it,
                converged: true,
            });
        }
    }
    log::warn!("fixed-point iteration stopped after {MAX_FIXED_POINT_ITERATIONS} steps at q = {q}");
    Ok(FixedPoint {
        q_star: q,
        iterations: MAX_FIXED_POINT_ITERATIONS,
        converged: false,
    })
}

/// Picks the global optimum (exact ties go to the smaller `q`) and sets the
/// degeneracy flag from the two best optima.
fn assemble(
    optima: Vec<LocalOptimum>,
    rescaling: Option<f64>,
    gap_scale: f64,
) -> VariationalSolution {
    let best = optima
        .iter()
        .copied()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("scan always yields at least one optimum");
    let mut values: Vec<f64> = optima.iter().map(|o| o.value).collect();
    values.sort_by(f64::total_cmp);
    let near_degenerate = values.len() >= 2 && values[1] - values[0] < gap_scale;
    VariationalSolution {
        value: best.value,
        argmin_q: best.q,
        argsup_q_v: best.q_v,
        rescaled_value: rescaling.map(|s| best.value / s),
        local_optima: optima,
        near_degenerate,
    }
}

/// All local minima of `f` on `[0, upper]`, sorted by position.
///
/// Grid values are computed in parallel and reduced in index order, so the
/// result does not depend on the thread count.
pub(crate) fn scan_minimize<F>(
    upper: f64,
    settings: &SolverSettings,
    f: F,
) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let grid = mixed_grid(
        upper,
        settings.scan_nodes,
        settings.log_floor,
        settings.log_split,
    );
    let values: Vec<Result<f64>> = grid.par_iter().map(|&q| f(q)).collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    let n = grid.len();

    // strict on the left, so a plateau contributes only its first node
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            (i == 0 || values[i] < values[i - 1]) && (i == n - 1 || values[i] <= values[i + 1])
        })
        .collect();

    let xtol = settings.q_tol * upper;
    let refined: Vec<Result<(usize, f64, f64)>> = candidates
        .par_iter()
        .map(|&i| {
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(i + 1).min(n - 1)];
            let (mut q, mut v) = (grid[i], values[i]);
            if hi > lo {
                let (gq, gv) = golden_min(&f, lo, hi, xtol)?;
                if gv < v || (gv == v && gq < q) {
                    q = gq;
                    v = gv;
                }
            }
            Ok((i, q, v))
        })
        .collect();
    let refined = refined.into_iter().collect::<Result<Vec<_>>>()?;

    // merge neighbours with no barrier between them; differences below the
    // value tolerance are rounding noise, not barriers
    let noise = VALUE_TOL * values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut merged: Vec<(usize, f64, f64)> = Vec::with_capacity(refined.len());
    for cur in refined {
        if let Some(prev) = merged.last_mut() {
            let barrier = values[prev.0 + 1..cur.0]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let close = (cur.1 - prev.1).abs() <= xtol;
            if close || barrier <= prev.2.max(cur.2) + noise {
                if cur.2 < prev.2 - noise {
                    *prev = cur;
                }
                continue;
            }
        }
        merged.push(cur);
    }
    Ok(merged.into_iter().map(|(_, q, v)| (q, v)).collect())
}
