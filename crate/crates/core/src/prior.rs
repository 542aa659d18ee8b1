//! Signal distributions and their elementary statistics.
//!
//! A [`Prior`] is either a finite list of atoms or the standard Gaussian.
//! Sparse priors carry their sparsity `rho` (the mass off zero); the two
//! binary families used throughout are built by [`Prior::bernoulli`] and
//! [`Prior::bernoulli_rademacher`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const RAW_NORMALIZE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    #[serde(rename = "atoms")]
    FiniteAtoms,
    #[serde(rename = "gaussian")]
    StandardGaussian,
}

/// A point mass of a finite prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    kind: PriorKind,
    atoms: Vec<Atom>,
    rho: f64,
    support_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "sparsity rho must lie in (0, 1], got {rho}"
        )))
    }
}

impl Prior {
    /// `Ber(rho)`: atoms {(0, 1-rho), (1, rho)}.
    pub fn bernoulli(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self::from_sorted_atoms(
            vec![
                Atom {
                    value: 0.0,
                    weight: 1.0 - rho,
                },
                Atom {
                    value: 1.0,
                    weight: rho,
                },
            ],
            rho,
        ))
    }

    /// `(1-rho) δ₀ + rho/2 (δ₋₁ + δ₁)`.
    pub fn bernoulli_rademacher(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self::from_sorted_atoms(
            vec![
                Atom {
                    value: -1.0,
                    weight: 0.5 * rho,
                },
                Atom {
                    value: 0.0,
                    weight: 1.0 - rho,
                },
                Atom {
                    value: 1.0,
                    weight: 0.5 * rho,
                },
            ],
            rho,
        ))
    }

    pub fn standard_gaussian() -> Self {
        Prior {
            kind: PriorKind::StandardGaussian,
            atoms: Vec::new(),
            rho: 1.0,
            support_bound: f64::INFINITY,
        }
    }

    /// Arbitrary finite prior from `(value, weight)` pairs.
    ///
    /// Weights summing to 1 within 1e-9 are renormalized, anything further
    /// off is rejected. Duplicate values are merged and zero-weight atoms
    /// dropped. `rho` is the resulting mass off zero. A prior whose second
    /// moment differs from `rho` is accepted with a warning.
    pub fn from_atoms(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Parameter(
                "a finite prior needs at least one atom".into(),
            ));
        }
        for &(v, w) in pairs {
            if !v.is_finite() || !w.is_finite() || w < 0.0 {
                return Err(Error::Parameter(format!("invalid atom ({v}, {w})")));
            }
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > RAW_NORMALIZE_TOL {
            return Err(Error::Parameter(format!(
                "atom weights sum to {total}, not 1"
            )));
        }
        let mut atoms: Vec<Atom> = pairs
            .iter()
            .filter(|p| p.1 > 0.0)
            .map(|&(value, weight)| Atom {
                value,
                weight: weight / total,
            })
            .collect();
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        atoms.dedup_by(|later, kept| {
            if later.value == kept.value {
                kept.weight += later.weight;
                true
            } else {
                false
            }
        });
        let mass_at_zero: f64 = atoms
            .iter()
            .filter(|a| a.value == 0.0)
            .map(|a| a.weight)
            .sum();
        let rho = 1.0 - mass_at_zero;
        if rho <= 0.0 {
            return Err(Error::Parameter("prior is a point mass at zero".into()));
        }
        let prior = Self::from_sorted_atoms(atoms, rho);
        let m2 = prior.moments().second_moment;
        if (m2 - rho).abs() > RAW_NORMALIZE_TOL {
            log::warn!(
                "finite prior has second moment {m2} but sparsity {rho}; \
                 the nonzero part is not normalized to unit second moment"
            );
        }
        Ok(prior)
    }

    fn from_sorted_atoms(atoms: Vec<Atom>, rho: f64) -> Self {
        let atoms: Vec<Atom> = atoms.into_iter().filter(|a| a.weight > 0.0).collect();
        let support_bound = atoms.iter().map(|a| a.value.abs()).fold(0.0, f64::max);
        Prior {
            kind: PriorKind::FiniteAtoms,
            atoms,
            rho,
            support_bound,
        }
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn support_bound(&self) -> f64 {
        self.support_bound
    }

    pub fn is_gaussian(&self) -> bool {
        self.kind == PriorKind::StandardGaussian
    }

    pub fn moments(&self) -> Moments {
        match self.kind {
            PriorKind::StandardGaussian => Moments {
                mean: 0.0,
                second_moment: 1.0,
                variance: 1.0,
            },
            PriorKind::FiniteAtoms => {
                let mean: f64 = self.atoms.iter().map(|a| a.weight * a.value).sum();
                let second_moment: f64 = self
                    .atoms
                    .iter()
                    .map(|a| a.weight * a.value * a.value)
                    .sum();
                // the centred sum avoids cancellation when rho is tiny
                let variance: f64 = self
                    .atoms
                    .iter()
                    .map(|a| a.weight * (a.value - mean).powi(2))
                    .sum();
                Moments {
                    mean,
                    second_moment,
                    variance,
                }
            }
        }
    }

    /// Shannon entropy (nats) of the atom weights; infinite for the Gaussian.
    pub fn entropy(&self) -> f64 {
        match self.kind {
            PriorKind::StandardGaussian => f64::INFINITY,
            PriorKind::FiniteAtoms => {
                // the dominant weight may be a rounded 1 - ρ; its log is taken
                // from the complementary mass so tiny ρ keeps full precision
                let top = (0..self.atoms.len())
                    .max_by(|&i, &j| self.atoms[i].weight.total_cmp(&self.atoms[j].weight))
                    .expect("priors have at least one atom");
                let rest: f64 = self
                    .atoms
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != top)
                    .map(|(_, a)| a.weight)
                    .sum();
                let w = self.atoms[top].weight;
                let others: f64 = self
                    .atoms
                    .iter()
                    .enumerate()
                    .filter(|&(i, a)| i != top && a.weight > 0.0)
                    .map(|(_, a)| -a.weight * a.weight.ln())
                    .sum();
                others - w * (-rest).ln_1p()
            }
        }
    }

    /// The prior of `-X`.
    pub fn negated(&self) -> Self {
        let mut atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| Atom {
                value: -a.value,
                weight: a.weight,
            })
            .collect();
        atoms.reverse();
        Prior {
            atoms,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        check_rho(self.rho)?;
        if self.kind == PriorKind::StandardGaussian {
            return Ok(());
        }
        let total: f64 = self.atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Parameter(format!("atom weights sum to {total}")));
        }
        Ok(())
    }
}

/// On-disk form: `{"kind": "atoms"|"gaussian", "atoms": [[v, w], ...], "rho": r}`.
#[derive(Serialize, Deserialize)]
struct PriorRepr {
    kind: PriorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atoms: Option<Vec<(f64, f64)>>,
    rho: f64,
}

impl Serialize for Prior {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let atoms = match self.kind {
            PriorKind::FiniteAtoms => {
                Some(self.atoms.iter().map(|a| (a.value, a.weight)).collect())
            }
            PriorKind::StandardGaussian => None,
        };
        PriorRepr {
            kind: self.kind,
            atoms,
            rho: self.rho,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Prior {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = PriorRepr::deserialize(d)?;
        let prior = match repr.kind {
            PriorKind::StandardGaussian => Prior::standard_gaussian(),
            PriorKind::FiniteAtoms => {
                let pairs = repr
                    .atoms
                    .ok_or_else(|| D::Error::custom("finite prior without atoms"))?;
                let mut atoms: Vec<Atom> = pairs
                    .into_iter()
                    .map(|(value, weight)| Atom { value, weight })
                    .collect();
                atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
                Prior::from_sorted_atoms(atoms, repr.rho)
            }
        };
        prior.validate().map_err(D::Error::custom)?;
        Ok(prior)
    }
}
