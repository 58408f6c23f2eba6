//! Maximization of `W_α(·, x)` over `[0, 1]`.
//!
//! Welfare is concave in the facility location, so a golden-section search
//! brackets the maximizer without derivatives. Two details matter at tight
//! tolerances:
//!
//! * Near a smooth peak the two probe values differ by less than their
//!   rounding error once the bracket is below roughly `sqrt(f64::EPSILON)`.
//!   Such ties are resolved from the sign of the one-sided welfare slopes at
//!   the probe midpoint, which keeps full precision down to `1e-12`.
//! * Piecewise-linear utilities can produce a flat top. The solver then
//!   returns the midpoint of the whole maximizing segment, located by
//!   bisection on the one-sided slopes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utility::UtilitySpec;
use crate::welfare::{welfare_slopes, LocationProfile};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const MIN_TOLERANCE: f64 = 1e-12;
pub const MAX_TOLERANCE: f64 = 1e-3;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakResult {
    pub peak: f64,
    pub peak_welfare: f64,
    pub bracket_width: f64,
    pub iterations: u32,
    pub boundary_clamped: bool,
    /// Extent of the maximizing segment when welfare has a flat top.
    pub plateau: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Median,
    Midpoint,
}

pub fn check_tolerance(tol: f64) -> Result<()> {
    if !(MIN_TOLERANCE..=MAX_TOLERANCE).contains(&tol) {
        return Err(Error::config(format!(
            "tolerance must lie in [{MIN_TOLERANCE:e}, {MAX_TOLERANCE:e}], got {tol:e}"
        )));
    }
    Ok(())
}

/// Welfare at `y` together with a bound on its rounding error.
#[derive(Clone, Copy)]
struct Sample {
    value: f64,
    noise: f64,
}

struct Objective<'a> {
    alpha: &'a UtilitySpec,
    profile: &'a LocationProfile,
}

impl Objective<'_> {
    fn sample(&self, y: f64) -> Result<Sample> {
        let (value, magnitude, steep) =
            self.profile
                .locations()
                .iter()
                .fold((0.0, 0.0, 0.0), |(w, m, s), x| {
                    let z = y - x;
                    let v = self.alpha.value(z);
                    let slope = self.alpha.slope_right(z).abs().max(self.alpha.slope_left(z).abs());
                    (w + v, m + v.abs(), s + slope)
                });
        if !value.is_finite() {
            return Err(Error::Numerical { y });
        }
        let n = self.profile.len() as f64;
        Ok(Sample {
            value,
            noise: 4.0 * (n + 8.0) * f64::EPSILON * (magnitude + steep),
        })
    }

    /// Whether the maximizer may be sought in `[a, d]` (rather than `[c, b]`)
    /// given probes `c < d`.
    fn keep_left(&self, c: f64, fc: Sample, d: f64, fd: Sample) -> bool {
        let gap = fc.value - fd.value;
        if gap.abs() > fc.noise + fd.noise {
            return gap > 0.0;
        }
        let (right, _, _) = welfare_slopes(self.alpha, self.profile, 0.5 * (c + d));
        right <= 0.0
    }

    /// Largest `y` in `[lo, hi]` whose left slope is still nonnegative
    /// (`upper = true`), or the smallest whose right slope is nonpositive.
    fn flat_edge(&self, lo: f64, hi: f64, upper: bool) -> f64 {
        let rising = |y: f64| {
            let (right, left, scale) = welfare_slopes(self.alpha, self.profile, y);
            let eta = 64.0 * f64::EPSILON * scale;
            if upper {
                left >= -eta
            } else {
                right > eta
            }
        };
        let (mut lo, mut hi) = (lo, hi);
        if upper && rising(hi) {
            return hi;
        }
        if !upper && !rising(lo) {
            return lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if rising(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if upper {
            lo
        } else {
            hi
        }
    }
}

/// Golden-section maximization of `W_α(·, x)` down to a bracket of width
/// at most `tol`.
pub fn peak(alpha: &UtilitySpec, profile: &LocationProfile, tol: f64) -> Result<PeakResult> {
    check_tolerance(tol)?;
    let obj = Objective { alpha, profile };

    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = obj.sample(c)?;
    let mut fd = obj.sample(d)?;
    let mut iterations = 0;
    while b - a > tol {
        iterations += 1;
        if obj.keep_left(c, fc, d, fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = obj.sample(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = obj.sample(d)?;
        }
    }

    let mid = 0.5 * (a + b);
    let (fa, fm, fb) = (obj.sample(a)?, obj.sample(mid)?, obj.sample(b)?);
    let mut best = (mid, fm);
    for (y, f) in [(a, fa), (b, fb)] {
        if f.value > best.1.value + f.noise + best.1.noise {
            best = (y, f);
        }
    }
    let (mut y_star, mut w_star) = (best.0, best.1.value);

    let mut plateau = None;
    if alpha.is_piecewise_linear() {
        let left = obj.flat_edge(0.0, y_star, false);
        let right = obj.flat_edge(y_star, 1.0, true);
        if right - left > tol {
            y_star = 0.5 * (left + right);
            w_star = obj.sample(y_star)?.value;
            plateau = Some((left, right));
        }
    }

    Ok(PeakResult {
        peak: y_star,
        peak_welfare: w_star,
        bracket_width: b - a,
        iterations,
        boundary_clamped: y_star <= tol || y_star >= 1.0 - tol,
        plateau,
    })
}

/// Median or midpoint of the agent locations. The median of an odd profile
/// is the middle agent; for even profiles it is the mean of the two middle
/// agents.
pub fn peak_closed_form(mechanism: Mechanism, profile: &LocationProfile) -> f64 {
    let x = profile.locations();
    let n = x.len();
    match mechanism {
        Mechanism::Median if n % 2 == 1 => x[n / 2],
        Mechanism::Median => 0.5 * (x[n / 2 - 1] + x[n / 2]),
        Mechanism::Midpoint => 0.5 * (x[0] + x[n - 1]),
    }
}

/// Exhaustive search on a uniform grid. Ties go to the smallest grid index.
pub fn peak_oracle(
    alpha: &UtilitySpec,
    profile: &LocationProfile,
    grid_points: usize,
) -> Result<PeakResult> {
    if grid_points < 1001 {
        return Err(Error::config(format!(
            "grid oracle needs at least 1001 points, got {grid_points}"
        )));
    }
    let last = grid_points - 1;
    let spacing = 1.0 / last as f64;
    let ulps = 4.0 * (profile.len() + 1) as f64 * f64::EPSILON;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..grid_points {
        let y = if i == last { 1.0 } else { i as f64 * spacing };
        let w = crate::welfare::welfare_at(alpha, profile, y);
        if !w.is_finite() {
            return Err(Error::Numerical { y });
        }
        // Values within rounding of the incumbent are ties.
        if i == 0 || w > best.1 + ulps * best.1.abs().max(w.abs()).max(1.0) {
            best = (y, w);
        }
    }
    Ok(PeakResult {
        peak: best.0,
        peak_welfare: best.1,
        bracket_width: spacing,
        iterations: grid_points as u32,
        boundary_clamped: best.0 == 0.0 || best.0 == 1.0,
        plateau: None,
    })
}

/// Upper bound on golden-section iterations for a given tolerance.
pub fn iteration_budget(tol: f64) -> u32 {
    ((1.0 / tol).ln() / 1.618_f64.ln()).ceil() as u32 + 2
}
