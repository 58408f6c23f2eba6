//! Laws for random agent locations, all supported on `[0, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::welfare::LocationProfile;

const MASS_TOLERANCE: f64 = 1e-9;

fn zero() -> f64 {
    0.0
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform {
        #[serde(default = "zero")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
    /// Normal law conditioned on `[0, 1]`.
    TruncatedNormal {
        mean: f64,
        sigma: f64,
    },
    /// Point masses `[location, weight]`.
    Discrete {
        atoms: Vec<[f64; 2]>,
    },
    /// Piecewise-constant density: `masses[k]` spread over
    /// `[edges[k], edges[k + 1]]`.
    Histogram {
        edges: Vec<f64>,
        masses: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
enum Law {
    Uniform { a: f64, b: f64 },
    Beta(Beta),
    TruncatedNormal { normal: Normal, cdf_lo: f64, cdf_hi: f64 },
    /// Sorted atoms with cumulative weights.
    Discrete { atoms: Vec<f64>, weights: Vec<f64>, cumulative: Vec<f64> },
    Histogram { edges: Vec<f64>, masses: Vec<f64>, cumulative: Vec<f64> },
}

/// A validated law over agent locations.
#[derive(Debug, Clone)]
pub struct Distribution {
    spec: DistributionSpec,
    law: Law,
}

impl PartialEq for Distribution {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

fn check_weights(weights: &[f64], what: &str) -> Result<()> {
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::config(format!("{what}[{i}] must be a nonnegative number")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::config(format!("{what} sum to {total}, expected 1")));
    }
    Ok(())
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// Index of the first cumulative weight exceeding `u`, skipping empty cells.
fn cell_for(cumulative: &[f64], weights: &[f64], u: f64) -> usize {
    let k = cumulative.partition_point(|&c| c <= u);
    if k < weights.len() {
        return k;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

pub fn make_distribution(spec: DistributionSpec) -> Result<Distribution> {
    let law = match &spec {
        DistributionSpec::Uniform { a, b } => {
            if !(0.0 <= *a && a < b && *b <= 1.0) {
                return Err(Error::config(format!("uniform needs 0 <= a < b <= 1, got a = {a}, b = {b}")));
            }
            Law::Uniform { a: *a, b: *b }
        }
        DistributionSpec::Beta { alpha, beta } => {
            if !(alpha.is_finite() && *alpha > 0.0 && beta.is_finite() && *beta > 0.0) {
                return Err(Error::config(format!("beta shapes must be positive, got {alpha}, {beta}")));
            }
            Law::Beta(Beta::new(*alpha, *beta).map_err(|e| Error::config(e.to_string()))?)
        }
        DistributionSpec::TruncatedNormal { mean, sigma } => {
            if !(mean.is_finite() && sigma.is_finite() && *sigma > 0.0) {
                return Err(Error::config(format!(
                    "truncated normal needs finite mean and sigma > 0, got {mean}, {sigma}"
                )));
            }
            let normal = Normal::new(*mean, *sigma).map_err(|e| Error::config(e.to_string()))?;
            let (cdf_lo, cdf_hi) = (normal.cdf(0.0), normal.cdf(1.0));
            if cdf_hi - cdf_lo <= 0.0 {
                return Err(Error::config("truncated normal has no mass on [0, 1]"));
            }
            Law::TruncatedNormal { normal, cdf_lo, cdf_hi }
        }
        DistributionSpec::Discrete { atoms } => {
            if atoms.is_empty() {
                return Err(Error::config("discrete law needs at least one atom"));
            }
            if let Some(i) = atoms.iter().position(|a| !(0.0..=1.0).contains(&a[0])) {
                return Err(Error::Domain {
                    what: "atom location",
                    value: atoms[i][0],
                    domain: "[0, 1]",
                    index: Some(i),
                });
            }
            let weights: Vec<f64> = atoms.iter().map(|a| a[1]).collect();
            check_weights(&weights, "atom weights")?;
            let mut sorted = atoms.clone();
            sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
            let weights: Vec<f64> = sorted.iter().map(|a| a[1]).collect();
            Law::Discrete {
                atoms: sorted.iter().map(|a| a[0]).collect(),
                cumulative: cumulative(&weights),
                weights,
            }
        }
        DistributionSpec::Histogram { edges, masses } => {
            if edges.len() < 2 || masses.len() + 1 != edges.len() {
                return Err(Error::config(format!(
                    "histogram needs k + 1 edges for k masses, got {} edges and {} masses",
                    edges.len(),
                    masses.len()
                )));
            }
            if let Some(i) = edges.iter().position(|e| !(0.0..=1.0).contains(e)) {
                return Err(Error::Domain {
                    what: "histogram edge",
                    value: edges[i],
                    domain: "[0, 1]",
                    index: Some(i),
                });
            }
            if let Some(i) = edges.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::config(format!(
                    "histogram edges must be strictly increasing (violated at index {})",
                    i + 1
                )));
            }
            check_weights(masses, "histogram masses")?;
            Law::Histogram {
                edges: edges.clone(),
                masses: masses.clone(),
                cumulative: cumulative(masses),
            }
        }
    };
    Ok(Distribution { spec, law })
}

impl Distribution {
    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn uniform() -> Self {
        make_distribution(DistributionSpec::Uniform { a: 0.0, b: 1.0 }).expect("valid")
    }

    /// `(location, weight)` pairs for discrete laws.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match &self.law {
            Law::Discrete { atoms, weights, .. } => {
                Some(atoms.iter().copied().zip(weights.iter().copied()).collect())
            }
            _ => None,
        }
    }

    /// Density at `x` for continuous laws; zero for discrete laws and
    /// outside the support.
    pub fn density(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match &self.law {
            Law::Uniform { a, b } => {
                if (*a..=*b).contains(&x) {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Law::Beta(beta) => beta.pdf(x),
            Law::TruncatedNormal { normal, cdf_lo, cdf_hi } => normal.pdf(x) / (cdf_hi - cdf_lo),
            Law::Discrete { .. } => 0.0,
            Law::Histogram { edges, masses, .. } => {
                let k = edges.partition_point(|&e| e <= x);
                if k == 0 || (k == edges.len() && x > edges[k - 1]) {
                    return 0.0;
                }
                let k = (k - 1).min(masses.len() - 1);
                masses[k] / (edges[k + 1] - edges[k])
            }
        }
    }

    /// Points inside `(0, 1)` where the density jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        let inner = |v: &[f64]| v.iter().copied().filter(|x| *x > 0.0 && *x < 1.0).collect();
        match &self.law {
            Law::Uniform { a, b } => inner(&[*a, *b]),
            Law::Histogram { edges, .. } => inner(edges),
            _ => Vec::new(),
        }
    }

    /// Inverse CDF for `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let x = match &self.law {
            Law::Uniform { a, b } => a + u * (b - a),
            Law::Beta(beta) => beta.inverse_cdf(u),
            Law::TruncatedNormal { normal, cdf_lo, cdf_hi } => {
                normal.inverse_cdf(cdf_lo + u * (cdf_hi - cdf_lo))
            }
            Law::Discrete { atoms, weights, cumulative } => atoms[cell_for(cumulative, weights, u)],
            Law::Histogram { edges, masses, cumulative } => {
                let k = cell_for(cumulative, masses, u);
                let below = if k == 0 { 0.0 } else { cumulative[k - 1] };
                let frac = if masses[k] > 0.0 { (u - below) / masses[k] } else { 0.0 };
                edges[k] + frac.clamp(0.0, 1.0) * (edges[k + 1] - edges[k])
            }
        };
        x.clamp(0.0, 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// `n` i.i.d. agents drawn by inverse-CDF from `rng`, sorted.
pub fn sample_profile_with<R: Rng + ?Sized>(
    dist: &Distribution,
    n: usize,
    rng: &mut R,
) -> Result<LocationProfile> {
    LocationProfile::new((0..n).map(|_| dist.sample(rng)).collect())
}

/// `n` i.i.d. agents drawn from stream 0 of `seed`.
pub fn sample_profile(dist: &Distribution, n: usize, seed: u64) -> Result<LocationProfile> {
    sample_profile_with(dist, n, &mut substream(seed, 0))
}
