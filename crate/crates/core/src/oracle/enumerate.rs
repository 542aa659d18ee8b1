//! Exhaustive posterior sums over `atoms^n` configurations.

use crate::error::{Error, Result};

/// Hard cap on the number of configurations visited per posterior.
pub const ENUMERATION_BUDGET: f64 = 1e8;

/// Above this many configurations the per-configuration posterior is not kept.
pub(crate) const KEEP_CONFIGS: usize = 1 << 12;

/// Gibbs weight of a configuration `x`:
/// `Σ ln p(x_i) + Σ_{i<j} [J_ij x_i x_j − c x_i² x_j² / 2] + Σ_i [h_i x_i − r x_i² / 2]`.
pub(crate) struct Hamiltonian<'a> {
    pub n: usize,
    pub values: &'a [f64],
    pub log_weights: &'a [f64],
    /// Full `n × n`, row-major; only `j < i` entries are read.
    pub coupling: &'a [f64],
    pub quartic: f64,
    pub field: &'a [f64],
    pub r: f64,
    /// Planted signal, for the overlap.
    pub signal: &'a [f64],
}

/// Posterior moments accumulated during enumeration, already normalised.
pub(crate) struct Sums {
    pub log_partition: f64,
    pub overlap: f64,
    pub overlap_sq: f64,
    pub mean_x: Vec<f64>,
    /// `⟨x_i x_j⟩`, full `n × n`.
    pub pair: Vec<f64>,
    pub per_config: Option<Vec<f64>>,
}

pub(crate) fn configuration_count(atoms: usize, n: usize) -> Result<usize> {
    let count = (atoms as f64).powi(n as i32);
    if count > ENUMERATION_BUDGET {
        return Err(Error::Resource(format!(
            "{atoms}^{n} = {count:e} configurations exceeds the enumeration budget of {ENUMERATION_BUDGET:e}"
        )));
    }
    Ok(count as usize)
}

struct Accumulator {
    max: f64,
    z: f64,
    q: f64,
    q2: f64,
    mean_x: Vec<f64>,
    pair: Vec<f64>,
}

impl Accumulator {
    fn rescale(&mut self, factor: f64) {
        self.z *= factor;
        self.q *= factor;
        self.q2 *= factor;
        self.mean_x.iter_mut().for_each(|v| *v *= factor);
        self.pair.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Lexicographic sweep; each prefix weight is recomputed from its parent
/// prefix, so there is no incremental drift.
pub(crate) fn enumerate(h: &Hamiltonian) -> Result<Sums> {
    let n = h.n;
    let a = h.values.len();
    let count = configuration_count(a, n)?;
    // prefix[k] holds the weight of x_0..x_{k-1}; likewise for the overlap.
    let mut prefix = vec![0.0; n + 1];
    let mut prefix_dot = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut nonzero: Vec<usize> = Vec::with_capacity(n);
    let mut logs = (count <= KEEP_CONFIGS).then(|| Vec::with_capacity(count));
    let mut acc = Accumulator {
        max: f64::NEG_INFINITY,
        z: 0.0,
        q: 0.0,
        q2: 0.0,
        mean_x: vec![0.0; n],
        pair: vec![0.0; n * n],
    };
    let inv_n = 1.0 / n as f64;

    let mut from = 0;
    loop {
        for k in from..n {
            let v = h.values[idx[k]];
            x[k] = v;
            let row = &h.coupling[k * n..k * n + k];
            let cross: f64 = row.iter().zip(&x[..k]).map(|(j, xj)| j * xj).sum();
            let v2 = v * v;
            prefix[k + 1] = prefix[k] + h.log_weights[idx[k]] + v * (h.field[k] + cross)
                - 0.5 * v2 * (h.r + h.quartic * prefix_sq[k]);
            prefix_dot[k + 1] = prefix_dot[k] + v * h.signal[k];
            prefix_sq[k + 1] = prefix_sq[k] + v2;
        }
        let lw = prefix[n];
        if let Some(l) = logs.as_mut() {
            l.push(lw);
        }
        if lw > acc.max {
            if acc.max.is_finite() {
                acc.rescale((acc.max - lw).exp());
            }
            acc.max = lw;
        }
        let p = (lw - acc.max).exp();
        let q = prefix_dot[n] * inv_n;
        acc.z += p;
        acc.q += p * q;
        acc.q2 += p * q * q;
        nonzero.clear();
        nonzero.extend((0..n).filter(|&i| x[i] != 0.0));
        for &i in &nonzero {
            let px = p * x[i];
            acc.mean_x[i] += px;
            let row = &mut acc.pair[i * n..(i + 1) * n];
            for &j in &nonzero {
                row[j] += px * x[j];
            }
        }

        // odometer: bump the last position that can still move
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(finish(acc, logs));
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < a {
                break;
            }
            idx[k] = 0;
        }
        from = k;
    }
}

fn finish(acc: Accumulator, logs: Option<Vec<f64>>) -> Sums {
    let z = acc.z;
    let per_config = logs.map(|l| l.iter().map(|lw| (lw - acc.max).exp() / z).collect());
    Sums {
        log_partition: acc.max + z.ln(),
        overlap: acc.q / z,
        overlap_sq: acc.q2 / z,
        mean_x: acc.mean_x.iter().map(|v| v / z).collect(),
        pair: acc.pair.iter().map(|v| v / z).collect(),
        per_config,
    }
}
