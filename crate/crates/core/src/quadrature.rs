//! Gaussian quadrature rules.
//!
//! Gauss–Hermite rules are stored in probabilist form, so that
//! `E[g(Z)] ≈ Σ wᵢ g(zᵢ)` for `Z ~ N(0,1)`. Rules are built once per order
//! and cached behind a lock; a cached rule is bit-identical to a freshly
//! built one.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

const RESCALE: f64 = 1e100;

/// Probabilist Gauss–Hermite rule of the given order.
///
/// Roots are isolated by Sturm-count bisection on the Jacobi matrix and
/// polished with Newton steps on the orthonormal Hermite recurrence. The
/// recurrence is rescaled on the fly because the polynomial values overflow
/// near the outermost roots once the order exceeds ~300.
/// Nodes whose weight underflows to zero are dropped.
pub fn gauss_hermite(order: usize) -> Arc<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&order) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build_gauss_hermite(order));
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .entry(order)
        .or_insert(rule)
        .clone()
}

/// Returns `(p_n(x) / p_{n-1}(x), ln |p_{n-1}(x)|)` for the orthonormal
/// Hermite polynomials with weight `e^{-x²}`.
fn hermite_ratio(n: usize, x: f64) -> (f64, f64) {
    let mut log_scale = 0.0;
    let mut p_prev = 0.0;
    let mut p = PI.powf(-0.25);
    for j in 1..=n {
        let jf = j as f64;
        let next = x * (2.0 / jf).sqrt() * p - ((jf - 1.0) / jf).sqrt() * p_prev;
        p_prev = p;
        p = next;
        if p.abs() > RESCALE {
            p /= RESCALE;
            p_prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    (p / p_prev, p_prev.abs().ln() + log_scale)
}

/// Number of eigenvalues of the Hermite Jacobi matrix below `x` (Sturm count).
fn sturm_count(n: usize, x: f64) -> usize {
    let mut count = 0;
    let mut q = -x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let b2 = i as f64 / 2.0;
        let prev = if q == 0.0 { f64::EPSILON } else { q };
        q = -x - b2 / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn build_gauss_hermite(n: usize) -> Rule {
    assert!(n >= 1, "Gauss-Hermite order must be positive");
    let nf = n as f64;
    let half = n.div_ceil(2);
    let bound = (2.0 * nf + 1.0).sqrt() + 1.0;
    let mut roots = vec![0.0_f64; half];
    let mut log_w = vec![0.0_f64; half];
    for i in 0..half {
        // isolate the (i+1)-th largest root by bisection, then polish
        let target = n - 1 - i;
        let (mut lo, mut hi) = (-1e-3, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sturm_count(n, mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut z = 0.5 * (lo + hi);
        for _ in 0..3 {
            let (ratio, _) = hermite_ratio(n, z);
            let step = ratio / (2.0 * nf).sqrt();
            if !step.is_finite() {
                break;
            }
            z -= step;
        }
        let (_, log_prev) = hermite_ratio(n, z);
        roots[i] = z;
        log_w[i] = -nf.ln() - 2.0 * log_prev;
    }
    // odd orders put the middle root at exactly zero
    if n % 2 == 1 {
        roots[half - 1] = 0.0;
    }

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let norm = PI.sqrt().ln();
    let mut push = |x: f64, lw: f64| {
        let w = (lw - norm).exp();
        if w > 0.0 {
            nodes.push(std::f64::consts::SQRT_2 * x);
            weights.push(w);
        }
    };
    for i in 0..half {
        push(-roots[i], log_w[i]);
    }
    for i in (0..n / 2).rev() {
        push(roots[i], log_w[i]);
    }
    Rule { nodes, weights }
}

/// Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Rule {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let n = order;
    let nf = n as f64;
    let mid = 0.5 * (a + b);
    let half_len = 0.5 * (b - a);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() <= 1e-16 {
                break;
            }
        }
        let w = 2.0 * half_len / ((1.0 - z * z) * dp * dp);
        nodes[i] = mid - half_len * z;
        nodes[n - 1 - i] = mid + half_len * z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}
