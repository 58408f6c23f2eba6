//! Executable validators for the structural properties of `α`-welfare.
//!
//! Each check solves the relevant peaks and reports the measured quantity
//! next to its theoretical bound.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::peak::{peak, peak_closed_form, Mechanism};
use crate::rng::substream;
use crate::utility::UtilitySpec;
use crate::welfare::{welfare_curve, LocationProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Welfare is concave in the facility location.
    Concavity,
    /// Shifting every agent by `c` shifts the peak by `c`.
    LocationInvariance,
    /// Moving one agent left never moves the peak right (and mirrored).
    ShiftMonotonicity,
    /// The peak moves at most as far as the furthest-moved agent.
    MaxShift,
    /// Distance from the median is bounded by the profile's asymmetry.
    MedianPeak,
}

impl Theorem {
    pub const ALL: [Theorem; 5] = [
        Theorem::Concavity,
        Theorem::LocationInvariance,
        Theorem::ShiftMonotonicity,
        Theorem::MaxShift,
        Theorem::MedianPeak,
    ];

    pub fn number(self) -> u8 {
        match self {
            Theorem::Concavity => 1,
            Theorem::LocationInvariance => 2,
            Theorem::ShiftMonotonicity => 3,
            Theorem::MaxShift => 4,
            Theorem::MedianPeak => 8,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.number() == n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub theorem: Theorem,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub witness: String,
    pub tolerance_used: f64,
}

impl CheckReport {
    fn inequality(theorem: Theorem, measured: f64, bound: f64, tolerance: f64, witness: String) -> Self {
        Self {
            theorem,
            passed: measured <= bound + tolerance,
            measured,
            bound,
            witness,
            tolerance_used: tolerance,
        }
    }
}

fn fmt_profile(p: &LocationProfile) -> String {
    let parts: Vec<String> = p.locations().iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

/// Largest positive second difference of the welfare curve.
pub fn check_concavity(
    alpha: &UtilitySpec,
    profile: &LocationProfile,
    grid_points: usize,
) -> Result<CheckReport> {
    if grid_points < 101 {
        return Err(Error::config(format!(
            "concavity check needs at least 101 grid points, got {grid_points}"
        )));
    }
    let curve = welfare_curve(alpha, profile, grid_points)?;
    let measured = curve
        .values
        .windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .fold(0.0_f64, f64::max);
    let scale = curve.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    Ok(CheckReport::inequality(
        Theorem::Concavity,
        measured,
        0.0,
        1e-9 * scale,
        format!("{} on {} with {grid_points} grid points", alpha.id(), fmt_profile(profile)),
    ))
}

pub fn check_location_invariance(
    alpha: &UtilitySpec,
    profile: &LocationProfile,
    c: f64,
    tol: f64,
) -> Result<CheckReport> {
    let shifted = profile.shifted(c)?;
    let before = peak(alpha, profile, tol)?;
    let after = peak(alpha, &shifted, tol)?;
    if before.boundary_clamped || after.boundary_clamped {
        return Err(Error::SkippedCheck(format!(
            "peak on the boundary ({} -> {})",
            before.peak, after.peak
        )));
    }
    let measured = (after.peak - (before.peak + c)).abs();
    Ok(CheckReport::inequality(
        Theorem::LocationInvariance,
        measured,
        0.0,
        2.0 * tol,
        format!(
            "{} on {}, c = {c}: peaks {} -> {}",
            alpha.id(),
            fmt_profile(profile),
            before.peak,
            after.peak
        ),
    ))
}

/// Moves agent `agent_index` (1-based, sorted order) left by `c` and checks
/// the peak does not move right; also moves it right by `min(c, 1 - x_i)`
/// and checks the peak does not move left. `measured` is the larger of the
/// two violations.
pub fn check_shift_monotonicity(
    alpha: &UtilitySpec,
    profile: &LocationProfile,
    agent_index: usize,
    c: f64,
    tol: f64,
) -> Result<CheckReport> {
    let n = profile.len();
    if agent_index == 0 || agent_index > n {
        return Err(Error::config(format!(
            "agent index {agent_index} outside 1..={n}"
        )));
    }
    let i = agent_index - 1;
    let xi = profile.locations()[i];
    if !(c > 0.0 && c <= xi) {
        return Err(Error::config(format!(
            "shift c = {c} outside (0, x_{agent_index} = {xi}]"
        )));
    }
    let base = peak(alpha, profile, tol)?.peak;
    let left = peak(alpha, &profile.with_agent_moved(i, -c)?, tol)?.peak;
    let mut measured = left - base;
    let mut witness = format!(
        "{} on {}, agent {agent_index}, c = {c}: left shift {base} -> {left}",
        alpha.id(),
        fmt_profile(profile)
    );
    let c_right = c.min(1.0 - xi);
    if c_right > 0.0 {
        let right = peak(alpha, &profile.with_agent_moved(i, c_right)?, tol)?.peak;
        measured = measured.max(base - right);
        witness.push_str(&format!("; right shift by {c_right}: {base} -> {right}"));
    }
    Ok(CheckReport::inequality(
        Theorem::ShiftMonotonicity,
        measured,
        0.0,
        2.0 * tol,
        witness,
    ))
}

pub fn check_max_shift(
    alpha: &UtilitySpec,
    profile_a: &LocationProfile,
    profile_b: &LocationProfile,
    tol: f64,
) -> Result<CheckReport> {
    if profile_a.len() != profile_b.len() {
        return Err(Error::config(format!(
            "profiles differ in size ({} vs {})",
            profile_a.len(),
            profile_b.len()
        )));
    }
    let bound = profile_a
        .locations()
        .iter()
        .zip(profile_b.locations())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let pa = peak(alpha, profile_a, tol)?.peak;
    let pb = peak(alpha, profile_b, tol)?.peak;
    Ok(CheckReport::inequality(
        Theorem::MaxShift,
        (pa - pb).abs(),
        bound,
        2.0 * tol,
        format!(
            "{} on {} vs {}: peaks {pa}, {pb}",
            alpha.id(),
            fmt_profile(profile_a),
            fmt_profile(profile_b)
        ),
    ))
}

/// Half the largest mismatch between the distances of mirrored agent pairs
/// from the median. Odd profiles pair `x_{m+i}` with `x_{m-i}` around the
/// middle agent `x_m`; even profiles pair `x_{n/2+i}` with `x_{n/2+1-i}`.
pub fn median_peak_bound(profile: &LocationProfile) -> f64 {
    let x = profile.locations();
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let med = peak_closed_form(Mechanism::Median, profile);
    // 0-based index of the first agent right of the centre.
    let (right_start, left_start) = if n % 2 == 1 {
        (n / 2 + 1, n / 2 - 1)
    } else {
        (n / 2, n / 2 - 1)
    };
    (0..n / 2)
        .map(|k| {
            let d_plus = (med - x[right_start + k]).abs();
            let d_minus = (med - x[left_start - k]).abs();
            (d_plus - d_minus).abs()
        })
        .fold(0.0_f64, f64::max)
        * 0.5
}

pub fn check_median_peak(
    alpha: &UtilitySpec,
    profile: &LocationProfile,
    tol: f64,
) -> Result<CheckReport> {
    if !alpha.symmetric {
        return Err(Error::Precondition(format!(
            "median bound requires a symmetric utility, {} is not",
            alpha.id()
        )));
    }
    let med = peak_closed_form(Mechanism::Median, profile);
    let p = peak(alpha, profile, tol)?.peak;
    Ok(CheckReport::inequality(
        Theorem::MedianPeak,
        (med - p).abs(),
        median_peak_bound(profile),
        2.0 * tol,
        format!("{} on {}: median {med}, peak {p}", alpha.id(), fmt_profile(profile)),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub instances: usize,
    pub theorems: Vec<Theorem>,
    pub tol: f64,
    pub max_agents: usize,
    pub grid_points: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 100,
            theorems: Theorem::ALL.to_vec(),
            tol: crate::peak::DEFAULT_TOLERANCE,
            max_agents: 20,
            grid_points: 1001,
        }
    }
}

/// Random concave utility table peaking at zero.
pub fn random_table<R: Rng>(rng: &mut R, symmetric: bool) -> Vec<[f64; 2]> {
    let top = rng.random_range(0.5..2.0);
    let side = |rng: &mut R| {
        let k = rng.random_range(1..=4);
        let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.05..0.95)).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut slopes: Vec<f64> = (0..=cuts.len()).map(|_| rng.random_range(0.0..2.0)).collect();
        slopes.sort_by(|a, b| b.total_cmp(a));
        // Distances from zero and cumulative drops, closest first.
        let mut pts = vec![[0.0, top]];
        let mut edges = cuts;
        edges.push(1.0);
        let mut prev = 0.0;
        let mut value = top;
        for (t, s) in edges.iter().zip(slopes.iter().rev()) {
            value -= s * (t - prev);
            prev = *t;
            pts.push([*t, value]);
        }
        pts
    };
    let right = side(rng);
    let left = if symmetric { right.clone() } else { side(rng) };
    let mut table: Vec<[f64; 2]> = left.iter().rev().map(|[t, v]| [-t, *v]).collect();
    table.pop();
    table.extend(right);
    table
}

/// Random utility from any built-in family.
pub fn random_utility<R: Rng>(rng: &mut R, symmetric: bool) -> UtilitySpec {
    let spec = match rng.random_range(0..5) {
        0 => {
            let p = if rng.random_bool(0.3) { 1.0 } else { rng.random_range(1.0..4.0) };
            UtilitySpec::pmean(p)
        }
        1 => {
            let p = if rng.random_bool(0.3) { 1.0 } else { rng.random_range(1.0..4.0) };
            UtilitySpec::shifted_pmean(p, rng.random_range(1.1..3.0))
        }
        2 => UtilitySpec::nash_log(crate::utility::DEFAULT_NASH_EPSILON),
        3 => Ok(UtilitySpec::linear()),
        _ => UtilitySpec::piecewise_linear(random_table(rng, symmetric)),
    };
    spec.expect("random parameters are valid")
}

pub fn random_profile<R: Rng>(rng: &mut R, n: usize) -> LocationProfile {
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    if n > 1 && rng.random_bool(0.1) {
        x[n - 1] = x[0];
    }
    LocationProfile::new(x).expect("unit samples are in range")
}

fn suite_instance(cfg: &SuiteConfig, k: usize) -> Result<Vec<CheckReport>> {
    let mut rng = substream(cfg.seed, k as u64);
    let wants = |t: Theorem| cfg.theorems.contains(&t);
    let alpha = random_utility(&mut rng, wants(Theorem::MedianPeak));
    let tol = cfg.tol;

    // Location invariance needs room to shift and interior peaks on both
    // sides; resample until the instance qualifies.
    let mut attempts = 0;
    let (profile, c) = loop {
        attempts += 1;
        let n = rng.random_range(1..=cfg.max_agents);
        let profile = random_profile(&mut rng, n);
        let c = rng.random_range(-profile.first()..=1.0 - profile.last());
        if !wants(Theorem::LocationInvariance) {
            break (profile, c);
        }
        let shifted = profile.shifted(c)?;
        let interior = |p: &LocationProfile| peak(&alpha, p, tol).map(|r| !r.boundary_clamped);
        if interior(&profile)? && interior(&shifted)? {
            break (profile, c);
        }
        if attempts >= 1000 {
            return Err(Error::config(format!("instance {k}: no interior profile found")));
        }
    };

    let mut reports = Vec::new();
    for &theorem in &cfg.theorems {
        let report = match theorem {
            Theorem::Concavity => check_concavity(&alpha, &profile, cfg.grid_points)?,
            Theorem::LocationInvariance => check_location_invariance(&alpha, &profile, c, tol)?,
            Theorem::ShiftMonotonicity => {
                let movable: Vec<usize> = (0..profile.len())
                    .filter(|&i| profile.locations()[i] > 0.0)
                    .collect();
                let i = movable[rng.random_range(0..movable.len())];
                let xi = profile.locations()[i];
                let c = xi * (1.0 - rng.random::<f64>());
                check_shift_monotonicity(&alpha, &profile, i + 1, c, tol)?
            }
            Theorem::MaxShift => {
                let other = if rng.random_bool(1.0 / 3.0) {
                    profile.shifted(c)?
                } else {
                    random_profile(&mut rng, profile.len())
                };
                check_max_shift(&alpha, &profile, &other, tol)?
            }
            Theorem::MedianPeak => check_median_peak(&alpha, &profile, tol)?,
        };
        reports.push(report);
    }
    Ok(reports)
}

/// Runs the selected checks on `cfg.instances` seeded random instances.
/// Instance `k` draws from substream `k`, so the output does not depend on
/// scheduling.
pub fn random_suite(cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let per_instance = par::try_map_indexed(cfg.instances, |k| suite_instance(cfg, k))?;
    Ok(per_instance.into_iter().flatten().collect())
}
