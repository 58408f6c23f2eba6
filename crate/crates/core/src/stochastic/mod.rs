//! Welfare when agent locations are i.i.d. draws from a law on `[0, 1]`.
//!
//! The expected welfare of `n` agents is `n · (α ⊛ P)(y)`, the convolution of
//! the utility with the location law. Monte Carlo operations draw replicate
//! `r` from its own substream, so they are reproducible under any thread
//! schedule.

mod distribution;
pub mod quadrature;

pub use distribution::{
    make_distribution, sample_profile, sample_profile_with, Distribution, DistributionSpec,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{stream_id, substream};
use crate::utility::UtilitySpec;
use crate::welfare::{unit_grid, welfare_at, GridFunction};

pub const DEFAULT_QUADRATURE_NODES: usize = 64;
pub const STANDARD_GRID_POINTS: usize = 1001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedWelfareCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub n: usize,
    pub quadrature_nodes: usize,
    pub alpha_id: String,
}

impl GridFunction for ExpectedWelfareCurve {
    fn grid(&self) -> &[f64] {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A plain tabulated function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    pub fn tabulate(grid: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: grid.to_vec(),
            values: grid.iter().map(|&y| f(y)).collect(),
        }
    }
}

impl GridFunction for Curve {
    fn grid(&self) -> &[f64] {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvueGap {
    pub empirical_gap: f64,
    pub predicted_gap: f64,
    pub std_err: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub mean_abs_dev: f64,
    pub std_err: f64,
    /// Replicate mean of `W(y, x) / n`.
    pub mean_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub y: f64,
    pub target: f64,
    pub replicates: usize,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln(mean_abs_dev)` against `ln(n)`; absent when
    /// fewer than two rows have a positive deviation.
    pub slope_estimate: Option<f64>,
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n).sqrt(),
        }
    }
}

fn panels_for(quadrature_nodes: usize) -> usize {
    quadrature_nodes.div_ceil(quadrature::PANEL_ORDER)
}

/// `(α ⊛ P)(y) = ∫ α(y - z) dP(z)`. Atoms are summed exactly; densities are
/// integrated with Gauss–Legendre panels split at the kinks of `α(y - ·)`
/// and the jumps of the density.
pub fn convolution_at(alpha: &UtilitySpec, dist: &Distribution, y: f64, quadrature_nodes: usize) -> f64 {
    if let Some(atoms) = dist.atoms() {
        return atoms.iter().map(|(x, w)| w * alpha.value(y - x)).sum();
    }
    let mut cuts: Vec<f64> = alpha.kinks().iter().map(|k| y - k).collect();
    cuts.extend(dist.breakpoints());
    quadrature::integrate_split(
        |z| alpha.value(y - z) * dist.density(z),
        0.0,
        1.0,
        &cuts,
        panels_for(quadrature_nodes),
    )
}

fn check_quadrature(quadrature_nodes: usize) -> Result<()> {
    if quadrature_nodes < 64 {
        return Err(Error::config(format!(
            "quadrature needs at least 64 nodes, got {quadrature_nodes}"
        )));
    }
    Ok(())
}

/// Expected welfare `n · (α ⊛ P)(y)` on a uniform grid over `[0, 1]`.
pub fn expected_welfare(
    alpha: &UtilitySpec,
    dist: &Distribution,
    n: usize,
    grid_points: usize,
    quadrature_nodes: usize,
) -> Result<ExpectedWelfareCurve> {
    if grid_points < 2 {
        return Err(Error::config(format!("grid needs at least 2 points, got {grid_points}")));
    }
    expected_welfare_on(alpha, dist, n, &unit_grid(grid_points), quadrature_nodes)
}

pub fn expected_welfare_on(
    alpha: &UtilitySpec,
    dist: &Distribution,
    n: usize,
    grid: &[f64],
    quadrature_nodes: usize,
) -> Result<ExpectedWelfareCurve> {
    check_quadrature(quadrature_nodes)?;
    let scale = n as f64;
    let values = par::map_indexed(grid.len(), |i| {
        scale * convolution_at(alpha, dist, grid[i], quadrature_nodes)
    });
    Ok(ExpectedWelfareCurve {
        grid: grid.to_vec(),
        values,
        n,
        quadrature_nodes,
        alpha_id: alpha.id(),
    })
}

/// Squared L² distance `∫ (f₁ - f₂)²` by the trapezoidal rule. Both curves
/// must share the same grid.
pub fn f_distance<A: GridFunction + ?Sized, B: GridFunction + ?Sized>(a: &A, b: &B) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::config("curves are tabulated on different grids"));
    }
    if a.values().len() != a.grid().len() || b.values().len() != b.grid().len() {
        return Err(Error::config("curve values do not match grid length"));
    }
    let sq: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .collect();
    Ok(a
        .grid()
        .windows(2)
        .zip(sq.windows(2))
        .map(|(g, s)| 0.5 * (g[1] - g[0]) * (s[0] + s[1]))
        .sum())
}

/// Monte Carlo mean and standard error of `W_α(y, x)` at each grid point,
/// with `n` agents per replicate.
pub fn empirical_welfare_stats(
    alpha: &UtilitySpec,
    dist: &Distribution,
    n: usize,
    grid: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if replicates < 2 {
        return Err(Error::config("need at least two replicates"));
    }
    let draws = par::try_map_indexed(replicates, |r| {
        let profile = sample_profile_with(dist, n, &mut substream(seed, r as u64))?;
        Ok::<_, Error>(grid.iter().map(|&y| welfare_at(alpha, &profile, y)).collect::<Vec<_>>())
    })?;
    Ok((0..grid.len())
        .map(|j| {
            let column: Vec<f64> = draws.iter().map(|row| row[j]).collect();
            Estimate::from_samples(&column)
        })
        .collect())
}

/// Compares the expected F-distance to the empirical welfare of the expected
/// welfare `W̄` and of the perturbed curve `W̄ + g`. The predicted gap is
/// `‖g‖²`, since the cross term vanishes in expectation.
pub fn mvue_gap(
    alpha: &UtilitySpec,
    dist: &Distribution,
    n: usize,
    perturbation: &Curve,
    replicates: usize,
    seed: u64,
) -> Result<MvueGap> {
    if replicates < 100 {
        return Err(Error::config(format!("need at least 100 replicates, got {replicates}")));
    }
    let grid = perturbation.grid();
    let expected = expected_welfare_on(alpha, dist, n, grid, DEFAULT_QUADRATURE_NODES)?;
    let perturbed = Curve {
        grid: grid.to_vec(),
        values: expected
            .values
            .iter()
            .zip(&perturbation.values)
            .map(|(w, g)| w + g)
            .collect(),
    };
    let predicted_gap = f_distance(&perturbed, &expected)?;
    let gaps = par::try_map_indexed(replicates, |r| {
        let profile = sample_profile_with(dist, n, &mut substream(seed, r as u64))?;
        let empirical = Curve::tabulate(grid, |y| welfare_at(alpha, &profile, y));
        Ok::<_, Error>(f_distance(&perturbed, &empirical)? - f_distance(&expected, &empirical)?)
    })?;
    let est = Estimate::from_samples(&gaps);
    Ok(MvueGap {
        empirical_gap: est.mean,
        predicted_gap,
        std_err: est.std_err,
        replicates,
    })
}

/// Convergence of `W_α(y, x) / n` to `(α ⊛ P)(y)` over a schedule of agent
/// counts.
pub fn lln_experiment(
    alpha: &UtilitySpec,
    dist: &Distribution,
    y: f64,
    n_schedule: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::facility(y));
    }
    if n_schedule.is_empty() || n_schedule[0] == 0 || n_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("n schedule must be a nonempty strictly increasing list of positive counts"));
    }
    if replicates < 30 {
        return Err(Error::config(format!("need at least 30 replicates, got {replicates}")));
    }
    let target = convolution_at(alpha, dist, y, DEFAULT_QUADRATURE_NODES);
    let mut rows = Vec::with_capacity(n_schedule.len());
    for (arm, &n) in n_schedule.iter().enumerate() {
        let normalized = par::try_map_indexed(replicates, |r| {
            let mut rng = substream(seed, stream_id(arm as u32, r as u32));
            let profile = sample_profile_with(dist, n, &mut rng)?;
            Ok::<_, Error>(welfare_at(alpha, &profile, y) / n as f64)
        })?;
        let deviations: Vec<f64> = normalized.iter().map(|w| (w - target).abs()).collect();
        let dev = Estimate::from_samples(&deviations);
        rows.push(ConvergenceRow {
            n,
            mean_abs_dev: dev.mean,
            std_err: dev.std_err,
            mean_normalized: Estimate::from_samples(&normalized).mean,
        });
    }
    let slope_estimate = log_log_slope(&rows);
    Ok(ConvergenceReport {
        y,
        target,
        replicates,
        rows,
        slope_estimate,
    })
}

fn log_log_slope(rows: &[ConvergenceRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_abs_dev > 0.0)
        .map(|r| ((r.n as f64).ln(), r.mean_abs_dev.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
