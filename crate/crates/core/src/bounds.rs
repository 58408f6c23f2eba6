//! Approximation-ratio bounds for strictly positive utilities.
//!
//! Two versions of the two-sided ratio bound are reported side by side:
//!
//! * the closed form in terms of `D_α` and the Lipschitz envelope, which
//!   assumes an agent sits at an endpoint and can fail otherwise;
//! * the exact form, which bounds `ln(W(P)/W(y))` by the welfare gap over
//!   the true extrema `w_max = W(P)` and `w_min = min(W(0), W(1))`. This one
//!   holds for every profile and is what validity verdicts gate on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::peak::peak;
use crate::utility::{lipschitz_bounds, UtilitySpec};
use crate::welfare::{welfare_at, LocationProfile};

/// Grid used when a Lipschitz pair has to be estimated.
pub const LIPSCHITZ_GRID: usize = 2000;

/// Relative slack absorbing rounding when comparing a ratio with its bounds.
const RATIO_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub y: f64,
    pub peak: f64,
    pub observed_ratio: f64,
    pub paper_lower: f64,
    pub paper_upper: f64,
    pub exact_lower: f64,
    pub exact_upper: f64,
    pub d_alpha: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub lambda_d: f64,
    pub lambda_u: f64,
    pub valid_paper_form: bool,
    pub valid_exact_form: bool,
    /// `exp(n λ_u / D_α)`, reported for cross-utility comparisons.
    pub cross_cap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymptote {
    pub n: usize,
    pub d_alpha: f64,
    pub exponent: f64,
    pub limit: f64,
}

impl Asymptote {
    /// The ratio cap `exp(exponent)`.
    pub fn cap(&self) -> f64 {
        self.exponent.exp()
    }
}

/// `min{α(0) + (n-1)α(-1), α(0) + (n-1)α(1)}`.
pub fn d_alpha(alpha: &UtilitySpec, n: usize) -> f64 {
    let (lo, hi) = alpha.endpoint_values;
    let m = (n as f64) - 1.0;
    (alpha.peak_value + m * lo).min(alpha.peak_value + m * hi)
}

fn require_positive(alpha: &UtilitySpec) -> Result<()> {
    if !alpha.strictly_positive {
        return Err(Error::Positivity(format!(
            "{} is not strictly positive on [-1, 1]",
            alpha.id()
        )));
    }
    Ok(())
}

fn within(lower: f64, x: f64, upper: f64) -> bool {
    lower <= x * (1.0 + RATIO_SLACK) && x <= upper * (1.0 + RATIO_SLACK)
}

struct Ratio {
    peak: f64,
    w_peak: f64,
    w_y: f64,
}

fn ratio_parts(alpha: &UtilitySpec, profile: &LocationProfile, y: f64, tol: f64) -> Result<Ratio> {
    require_positive(alpha)?;
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::facility(y));
    }
    let p = peak(alpha, profile, tol)?;
    let w_y = welfare_at(alpha, profile, y);
    if w_y <= 0.0 {
        return Err(Error::Positivity(format!("welfare {w_y} at y = {y} is not positive")));
    }
    // The solver's peak is accurate to `tol`; y itself is a lower bound on
    // the true maximum.
    Ok(Ratio {
        peak: p.peak,
        w_peak: p.peak_welfare.max(w_y),
        w_y,
    })
}

/// `W_α(P_α(x), x) / W_α(y, x)`.
pub fn welfare_ratio(alpha: &UtilitySpec, profile: &LocationProfile, y: f64, tol: f64) -> Result<f64> {
    let r = ratio_parts(alpha, profile, y, tol)?;
    Ok(r.w_peak / r.w_y)
}

pub fn theorem5_bounds(
    alpha: &UtilitySpec,
    profile: &LocationProfile,
    y: f64,
    tol: f64,
) -> Result<BoundReport> {
    let r = ratio_parts(alpha, profile, y, tol)?;
    let n = profile.len() as f64;
    let (lambda_d, lambda_u) = lipschitz_bounds(alpha, LIPSCHITZ_GRID);
    let d = d_alpha(alpha, profile.len());
    let offset = r.peak - y;

    let paper_lower = (lambda_d * offset / (n * alpha.peak_value)).exp();
    let paper_upper = (n * lambda_u * offset / d).exp();

    let w_min = welfare_at(alpha, profile, 0.0).min(welfare_at(alpha, profile, 1.0));
    let w_max = r.w_peak;
    let gap = r.w_peak - r.w_y;
    let exact_lower = (gap / w_max).exp();
    let exact_upper = (gap / w_min).exp();

    let observed = r.w_peak / r.w_y;
    Ok(BoundReport {
        y,
        peak: r.peak,
        observed_ratio: observed,
        paper_lower,
        paper_upper,
        exact_lower,
        exact_upper,
        d_alpha: d,
        w_min,
        w_max,
        lambda_d,
        lambda_u,
        valid_paper_form: within(paper_lower, observed, paper_upper),
        valid_exact_form: within(exact_lower, observed, exact_upper),
        cross_cap: None,
    })
}

/// Growth of the upper-bound exponent `n λ_u / D_α` with the number of
/// agents, and its limit `λ_u / min(α(-1), α(1))`.
pub fn asymptotic_exponent(alpha: &UtilitySpec, n: usize) -> Result<Asymptote> {
    let floor = alpha.endpoint_values.0.min(alpha.endpoint_values.1);
    if floor <= 0.0 || !alpha.strictly_positive {
        return Err(Error::Positivity(format!(
            "min(α(-1), α(1)) = {floor} must be positive"
        )));
    }
    if n == 0 {
        return Err(Error::config("agent count must be at least 1"));
    }
    let (_, lambda_u) = lipschitz_bounds(alpha, LIPSCHITZ_GRID);
    let d = d_alpha(alpha, n);
    Ok(Asymptote {
        n,
        d_alpha: d,
        exponent: n as f64 * lambda_u / d,
        limit: lambda_u / floor,
    })
}

/// Welfare of `alpha` lost by placing the facility at `beta`'s peak.
pub fn cross_welfare_ratio(
    alpha: &UtilitySpec,
    beta: &UtilitySpec,
    profile: &LocationProfile,
    tol: f64,
) -> Result<BoundReport> {
    require_positive(alpha)?;
    let p_beta = peak(beta, profile, tol)?.peak;
    let mut report = theorem5_bounds(alpha, profile, p_beta, tol)?;
    report.cross_cap =
        Some((profile.len() as f64 * report.lambda_u / report.d_alpha).exp());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::welfare::make_profile;
    use approx::assert_relative_eq;

    const TOL: f64 = 1e-9;

    fn tent2() -> UtilitySpec {
        UtilitySpec::shifted_pmean(1.0, 2.0).unwrap()
    }

    fn quad2() -> UtilitySpec {
        UtilitySpec::shifted_pmean(2.0, 2.0).unwrap()
    }

    #[test]
    fn ratio_examples() {
        let single = make_profile(&[0.5]).unwrap();
        assert_relative_eq!(welfare_ratio(&tent2(), &single, 0.5, TOL).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(welfare_ratio(&tent2(), &single, 0.0, TOL).unwrap(), 4.0 / 3.0, epsilon = 1e-9);
        let p = make_profile(&[0.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(welfare_ratio(&quad2(), &p, 0.0, TOL).unwrap(), 16.0 / 15.0, epsilon = 1e-12);
    }

    #[test]
    fn ratio_requires_positivity() {
        let p = make_profile(&[0.5]).unwrap();
        let sq = UtilitySpec::pmean(2.0).unwrap();
        assert!(matches!(welfare_ratio(&sq, &p, 0.2, TOL), Err(Error::Positivity(_))));
        assert!(matches!(theorem5_bounds(&sq, &p, 0.2, TOL), Err(Error::Positivity(_))));
    }

    #[test]
    fn single_agent_bounds() {
        let r = theorem5_bounds(&tent2(), &make_profile(&[0.5]).unwrap(), 0.0, TOL).unwrap();
        assert_relative_eq!(r.w_max, 2.0, epsilon = 1e-9);
        assert_eq!(r.w_min, 1.5);
        assert_relative_eq!(r.exact_lower, 0.25f64.exp(), epsilon = 1e-9);
        assert_relative_eq!(r.exact_upper, (1.0f64 / 3.0).exp(), epsilon = 1e-9);
        assert_relative_eq!(r.observed_ratio, 4.0 / 3.0, epsilon = 1e-9);
        assert!(r.valid_exact_form);
        // D_α = α(0) = 2 for a single agent, so the closed form gives e^{0.25}.
        assert_relative_eq!(r.paper_upper, 0.25f64.exp(), epsilon = 1e-9);
        assert!(!r.valid_paper_form);
    }

    #[test]
    fn zero_gap_gives_unit_bounds() {
        let p = make_profile(&[0.2, 0.5, 0.8]).unwrap();
        let r = theorem5_bounds(&tent2(), &p, 0.5, TOL).unwrap();
        for v in [r.observed_ratio, r.exact_lower, r.exact_upper, r.paper_lower, r.paper_upper] {
            assert_relative_eq!(v, 1.0, epsilon = 1e-8);
        }
        assert!(r.valid_exact_form);
    }

    #[test]
    fn asymptote_examples() {
        let a = asymptotic_exponent(&tent2(), 10_000).unwrap();
        assert_relative_eq!(a.exponent, 10_000.0 / 10_001.0, epsilon = 1e-12);
        assert_eq!(a.limit, 1.0);
        assert_relative_eq!(asymptotic_exponent(&tent2(), 1).unwrap().exponent, 0.5);
        assert!(matches!(
            asymptotic_exponent(&UtilitySpec::linear(), 5),
            Err(Error::Positivity(_))
        ));
    }

    #[test]
    fn cross_ratio_fixed_case() {
        let p = make_profile(&[0.0, 0.0, 1.0]).unwrap();
        let beta = UtilitySpec::pmean(1.0).unwrap();
        let r = cross_welfare_ratio(&quad2(), &beta, &p, TOL).unwrap();
        assert_relative_eq!(r.peak, 1.0 / 3.0, epsilon = 1e-9);
        assert_eq!(r.y, 0.0);
        assert_relative_eq!(r.observed_ratio, 16.0 / 15.0, epsilon = 1e-12);
        assert_eq!(r.w_min, 4.0);
        assert_relative_eq!(r.exact_upper, (1.0f64 / 12.0).exp(), epsilon = 1e-9);
        assert!(r.valid_exact_form);
        assert!(r.cross_cap.unwrap() >= r.paper_upper);
    }

    #[test]
    fn cross_ratio_identical_utilities() {
        let p = make_profile(&[0.1, 0.35, 0.9]).unwrap();
        let r = cross_welfare_ratio(&quad2(), &quad2(), &p, TOL).unwrap();
        assert_relative_eq!(r.observed_ratio, 1.0, epsilon = 1e-12);
        assert!(r.exact_upper >= 1.0 && r.exact_lower >= 1.0);
    }

    #[test]
    fn cross_ratio_symmetric_profile() {
        let p = make_profile(&[0.2, 0.8]).unwrap();
        let nash = UtilitySpec::nash_log(1e-12).unwrap();
        let r = cross_welfare_ratio(&tent2(), &nash, &p, TOL).unwrap();
        assert_relative_eq!(r.observed_ratio, 1.0, epsilon = 1e-12);
    }
}
