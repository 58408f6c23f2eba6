//! Utility functions `α : [-1, 1] -> R` of the signed facility–agent offset.
//!
//! Every built-in family is concave with its maximum at zero. User tables
//! (`piecewise_linear`) are validated on construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NASH_EPSILON: f64 = 1e-12;

/// Relative slack allowed when validating piecewise tables.
const TABLE_TOLERANCE: f64 = 1e-12;

/// Widening applied to grid-estimated Lipschitz constants.
const LIPSCHITZ_SAFETY: f64 = 0.05;

fn default_nash_epsilon() -> f64 {
    DEFAULT_NASH_EPSILON
}

/// Family and parameters of a utility function. This is also the serialized
/// descriptor used by instance files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `α(z) = -|z|^p`
    Pmean { p: f64 },
    /// `α(z) = s - |z|^p`
    ShiftedPmean { p: f64, shift: f64 },
    /// `α(z) = ln(max(1 - |z|, ε))`
    NashLog {
        #[serde(default = "default_nash_epsilon")]
        epsilon: f64,
    },
    /// `α(z) = 1 - |z|`
    Linear,
    /// Linear interpolation through `(z, α(z))` pairs spanning `[-1, 1]`.
    PiecewiseLinear { breakpoints: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    pub family: Family,
    /// `α(0)`
    pub peak_value: f64,
    /// `(α(-1), α(1))`
    pub endpoint_values: (f64, f64),
    /// `(λ_d, λ_u)` when known in closed form.
    pub lipschitz: Option<(f64, f64)>,
    pub symmetric: bool,
    pub strictly_positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcavityAudit {
    pub passed: bool,
    pub worst_violation: f64,
    pub grid_resolution: usize,
}

/// Builds a validated utility from its descriptor.
pub fn make_utility(family: Family) -> Result<UtilitySpec> {
    match family {
        Family::Pmean { p } => UtilitySpec::pmean(p),
        Family::ShiftedPmean { p, shift } => UtilitySpec::shifted_pmean(p, shift),
        Family::NashLog { epsilon } => UtilitySpec::nash_log(epsilon),
        Family::Linear => Ok(UtilitySpec::linear()),
        Family::PiecewiseLinear { breakpoints } => UtilitySpec::piecewise_linear(breakpoints),
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::config(format!("exponent p must be >= 1, got {p}")));
    }
    Ok(())
}

impl UtilitySpec {
    pub fn pmean(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Self {
            family: Family::Pmean { p },
            peak_value: 0.0,
            endpoint_values: (-1.0, -1.0),
            lipschitz: Some((-p, p)),
            symmetric: true,
            strictly_positive: false,
        })
    }

    pub fn shifted_pmean(p: f64, shift: f64) -> Result<Self> {
        check_exponent(p)?;
        if !(shift.is_finite() && shift > 1.0) {
            return Err(Error::config(format!("shift must be > 1, got {shift}")));
        }
        Ok(Self {
            family: Family::ShiftedPmean { p, shift },
            peak_value: shift,
            endpoint_values: (shift - 1.0, shift - 1.0),
            lipschitz: Some((-p, p)),
            symmetric: true,
            strictly_positive: true,
        })
    }

    pub fn nash_log(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::config(format!(
                "nash clamp epsilon must lie in (0, 0.5), got {epsilon}"
            )));
        }
        let end = epsilon.ln();
        Ok(Self {
            family: Family::NashLog { epsilon },
            peak_value: 0.0,
            endpoint_values: (end, end),
            lipschitz: Some((-1.0 / epsilon, 1.0 / epsilon)),
            symmetric: true,
            strictly_positive: false,
        })
    }

    pub fn linear() -> Self {
        Self {
            family: Family::Linear,
            peak_value: 1.0,
            endpoint_values: (0.0, 0.0),
            lipschitz: Some((-1.0, 1.0)),
            symmetric: true,
            strictly_positive: false,
        }
    }

    /// Validated piecewise-linear utility. The table must start at `z = -1`,
    /// end at `z = 1`, be strictly increasing in `z`, concave, and peak at 0.
    pub fn piecewise_linear(breakpoints: Vec<[f64; 2]>) -> Result<Self> {
        validate_table_shape(&breakpoints)?;
        let scale = breakpoints
            .iter()
            .fold(1.0_f64, |m, b| m.max(b[1].abs()));
        let slopes = table_slopes(&breakpoints);
        for (k, pair) in slopes.windows(2).enumerate() {
            if pair[1] > pair[0] + TABLE_TOLERANCE * scale {
                return Err(Error::Concavity { index: k + 1 });
            }
        }
        let spec = Self::from_table_unchecked(breakpoints);
        let peak = spec.peak_value;
        if let Some(b) = spec
            .table()
            .iter()
            .find(|b| b[1] > peak + TABLE_TOLERANCE * scale)
        {
            return Err(Error::config(format!(
                "utility table must peak at z = 0, but α({}) = {} > α(0) = {peak}",
                b[0], b[1]
            )));
        }
        Ok(spec)
    }

    /// Builds a piecewise-linear utility without the concavity and peak
    /// checks. Used to feed deliberately inadmissible utilities to the
    /// validators; the table must still span `[-1, 1]` in increasing order.
    ///
    /// # Panics
    ///
    /// If the table has fewer than two points.
    pub fn from_table_unchecked(breakpoints: Vec<[f64; 2]>) -> Self {
        assert!(breakpoints.len() >= 2, "table needs at least two points");
        let family = Family::PiecewiseLinear { breakpoints };
        let mut spec = Self {
            family,
            peak_value: 0.0,
            endpoint_values: (0.0, 0.0),
            lipschitz: None,
            symmetric: false,
            strictly_positive: false,
        };
        spec.peak_value = spec.value(0.0);
        let (lo, hi) = (spec.value(-1.0), spec.value(1.0));
        spec.endpoint_values = (lo, hi);
        spec.strictly_positive = lo.min(hi) > 0.0;
        let scale = spec.table().iter().fold(1.0_f64, |m, b| m.max(b[1].abs()));
        spec.symmetric = spec
            .table()
            .iter()
            .all(|b| (spec.value(-b[0]) - b[1]).abs() <= TABLE_TOLERANCE * scale);
        spec
    }

    fn table(&self) -> &[[f64; 2]] {
        match &self.family {
            Family::PiecewiseLinear { breakpoints } => breakpoints,
            _ => &[],
        }
    }

    /// Short human-readable label, e.g. `pmean(p=2)`.
    pub fn id(&self) -> String {
        match &self.family {
            Family::Pmean { p } => format!("pmean(p={p})"),
            Family::ShiftedPmean { p, shift } => format!("shifted_pmean(p={p},shift={shift})"),
            Family::NashLog { epsilon } => format!("nash_log(eps={epsilon:e})"),
            Family::Linear => "linear".to_string(),
            Family::PiecewiseLinear { breakpoints } => {
                format!("piecewise_linear({} breakpoints)", breakpoints.len())
            }
        }
    }

    /// True when `α` is affine between finitely many kinks, which is the only
    /// case in which welfare can have a flat top.
    pub fn is_piecewise_linear(&self) -> bool {
        match self.family {
            Family::Pmean { p } | Family::ShiftedPmean { p, .. } => p == 1.0,
            Family::Linear | Family::PiecewiseLinear { .. } => true,
            Family::NashLog { .. } => false,
        }
    }

    /// Evaluates `α(z)` with domain checking.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&z) {
            return Err(Error::Domain {
                what: "utility argument z",
                value: z,
                domain: "[-1, 1]",
                index: None,
            });
        }
        Ok(self.value(z))
    }

    /// Evaluates `α(z)` without domain checking. Callers guarantee
    /// `z ∈ [-1, 1]`.
    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        let t = z.abs();
        match &self.family {
            Family::Pmean { p } => -abs_pow(t, *p),
            Family::ShiftedPmean { p, shift } => shift - abs_pow(t, *p),
            Family::NashLog { epsilon } => (1.0 - t).max(*epsilon).ln(),
            Family::Linear => 1.0 - t,
            Family::PiecewiseLinear { breakpoints } => {
                let k = segment_index(breakpoints, z);
                let ([z0, v0], [z1, v1]) = (breakpoints[k], breakpoints[k + 1]);
                v0 + (v1 - v0) * (z - z0) / (z1 - z0)
            }
        }
    }

    /// Right derivative `α'(z+)`.
    pub fn slope_right(&self, z: f64) -> f64 {
        self.slope(z, Side::Right)
    }

    /// Left derivative `α'(z-)`.
    pub fn slope_left(&self, z: f64) -> f64 {
        self.slope(z, Side::Left)
    }

    fn slope(&self, z: f64, side: Side) -> f64 {
        if let Family::PiecewiseLinear { breakpoints } = &self.family {
            let slopes = |k: usize| {
                let ([z0, v0], [z1, v1]) = (breakpoints[k], breakpoints[k + 1]);
                (v1 - v0) / (z1 - z0)
            };
            let last = breakpoints.len() - 2;
            let mut k = segment_index(breakpoints, z);
            if side == Side::Left && k > 0 && z <= breakpoints[k][0] {
                k -= 1;
            }
            return slopes(k.min(last));
        }
        // Symmetric families: α(z) = h(|z|) with h nonincreasing.
        let positive_branch = z > 0.0 || (z == 0.0 && side == Side::Right);
        if positive_branch {
            self.radial_slope(z)
        } else {
            -self.radial_slope(-z)
        }
    }

    /// `h'(t)` for `t >= 0`, taken from the right at `t = 0`.
    fn radial_slope(&self, t: f64) -> f64 {
        match &self.family {
            Family::Pmean { p } | Family::ShiftedPmean { p, .. } => {
                if *p == 1.0 {
                    -1.0
                } else if *p == 2.0 {
                    -2.0 * t
                } else {
                    -p * t.powf(p - 1.0)
                }
            }
            Family::NashLog { epsilon } => {
                if 1.0 - t > *epsilon {
                    -1.0 / (1.0 - t)
                } else {
                    0.0
                }
            }
            Family::Linear => -1.0,
            Family::PiecewiseLinear { .. } => unreachable!("tables handled by caller"),
        }
    }

    /// Offsets `z` at which `α` is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.family {
            Family::NashLog { epsilon } => vec![-(1.0 - epsilon), 0.0, 1.0 - epsilon],
            Family::PiecewiseLinear { breakpoints } => breakpoints[1..breakpoints.len() - 1]
                .iter()
                .map(|b| b[0])
                .collect(),
            _ => vec![0.0],
        }
    }
}

#[inline]
fn abs_pow(t: f64, p: f64) -> f64 {
    if p == 1.0 {
        t
    } else if p == 2.0 {
        t * t
    } else {
        t.powf(p)
    }
}

/// Index `k` of the segment `[z_k, z_{k+1}]` containing `z`.
fn segment_index(table: &[[f64; 2]], z: f64) -> usize {
    let above = table.partition_point(|b| b[0] <= z);
    above.saturating_sub(1).min(table.len() - 2)
}

fn table_slopes(table: &[[f64; 2]]) -> Vec<f64> {
    table
        .windows(2)
        .map(|w| (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]))
        .collect()
}

fn validate_table_shape(table: &[[f64; 2]]) -> Result<()> {
    if table.len() < 2 {
        return Err(Error::config("utility table needs at least two breakpoints"));
    }
    if let Some(i) = table.iter().position(|b| !(b[0].is_finite() && b[1].is_finite())) {
        return Err(Error::config(format!("breakpoint {i} is not finite")));
    }
    if table[0][0] != -1.0 || table[table.len() - 1][0] != 1.0 {
        return Err(Error::config("utility table must span exactly [-1, 1]"));
    }
    if let Some(i) = table.windows(2).position(|w| w[1][0] <= w[0][0]) {
        return Err(Error::config(format!(
            "breakpoints must be strictly increasing (violated at index {})",
            i + 1
        )));
    }
    Ok(())
}

fn uniform_grid(resolution: usize) -> impl Iterator<Item = f64> {
    let h = 2.0 / resolution as f64;
    (0..=resolution).map(move |i| if i == resolution { 1.0 } else { -1.0 + i as f64 * h })
}

/// `(λ_d, λ_u)`: the closed-form pair when known, otherwise the extreme
/// difference quotients on a uniform grid widened by 5% on each side.
pub fn lipschitz_bounds(spec: &UtilitySpec, grid_resolution: usize) -> (f64, f64) {
    if let Some(pair) = spec.lipschitz {
        return pair;
    }
    let res = grid_resolution.max(100);
    let zs: Vec<f64> = uniform_grid(res).collect();
    let (lo, hi) = zs
        .windows(2)
        .map(|w| (spec.value(w[1]) - spec.value(w[0])) / (w[1] - w[0]))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| {
            (lo.min(q), hi.max(q))
        });
    (
        lo - LIPSCHITZ_SAFETY * lo.abs(),
        hi + LIPSCHITZ_SAFETY * hi.abs(),
    )
}

/// Looks for convex second differences of `α` on a uniform grid.
pub fn concavity_audit(spec: &UtilitySpec, grid_resolution: usize) -> ConcavityAudit {
    let res = grid_resolution.max(100);
    let values: Vec<f64> = uniform_grid(res).map(|z| spec.value(z)).collect();
    // Second differences at rounding level are not violations.
    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let floor = 8.0 * f64::EPSILON * scale;
    let worst = values
        .windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .filter(|d| *d > floor)
        .fold(0.0_f64, f64::max);
    let tolerance = 1e-9 * spec.peak_value.abs().max(1.0);
    ConcavityAudit {
        passed: worst <= tolerance,
        worst_violation: worst,
        grid_resolution: res,
    }
}
