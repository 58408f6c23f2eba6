//! Agent profiles and exact welfare evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utility::UtilitySpec;

/// Sorted agent locations on `[0, 1]`. Duplicates are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LocationProfile {
    locations: Vec<f64>,
}

/// Validates and sorts raw agent locations.
pub fn make_profile(raw: &[f64]) -> Result<LocationProfile> {
    LocationProfile::new(raw.to_vec())
}

impl LocationProfile {
    pub fn new(mut locations: Vec<f64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::EmptyProfile);
        }
        if let Some(i) = locations.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Domain {
                what: "agent location",
                value: locations[i],
                domain: "[0, 1]",
                index: Some(i),
            });
        }
        locations.sort_by(f64::total_cmp);
        Ok(Self { locations })
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    /// Always false; profiles hold at least one agent.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> f64 {
        self.locations[0]
    }

    pub fn last(&self) -> f64 {
        self.locations[self.locations.len() - 1]
    }

    /// Every agent moved by `c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(self.locations.iter().map(|x| x + c).collect())
    }

    /// Agent `index` (0-based, in sorted order) moved by `c`; the result is
    /// re-sorted.
    pub fn with_agent_moved(&self, index: usize, c: f64) -> Result<Self> {
        let mut locations = self.locations.clone();
        locations[index] += c;
        Self::new(locations)
    }
}

impl TryFrom<Vec<f64>> for LocationProfile {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LocationProfile> for Vec<f64> {
    fn from(p: LocationProfile) -> Self {
        p.locations
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareValue {
    pub value: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub alpha_id: String,
}

/// Anything tabulated on a grid over `[0, 1]`.
pub trait GridFunction {
    fn grid(&self) -> &[f64];
    fn values(&self) -> &[f64];
}

impl GridFunction for WelfareCurve {
    fn grid(&self) -> &[f64] {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `W_α(y, x) = Σ α(y - x_i)`.
pub fn welfare(alpha: &UtilitySpec, profile: &LocationProfile, y: f64) -> Result<WelfareValue> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::facility(y));
    }
    Ok(WelfareValue {
        value: welfare_at(alpha, profile, y),
        y,
    })
}

/// Unchecked welfare; `y` must lie in `[0, 1]`.
#[inline]
pub(crate) fn welfare_at(alpha: &UtilitySpec, profile: &LocationProfile, y: f64) -> f64 {
    profile.locations.iter().map(|x| alpha.value(y - x)).sum()
}

/// Right and left derivatives of `W_α(·, x)` at `y`, plus the sum of the
/// absolute per-agent slopes (a scale for rounding noise).
pub(crate) fn welfare_slopes(alpha: &UtilitySpec, profile: &LocationProfile, y: f64) -> (f64, f64, f64) {
    profile.locations.iter().fold((0.0, 0.0, 0.0), |(r, l, s), x| {
        let (sr, sl) = (alpha.slope_right(y - x), alpha.slope_left(y - x));
        (r + sr, l + sl, s + sr.abs().max(sl.abs()))
    })
}

/// Uniform grid with `points` nodes over `[0, 1]`, endpoints exact.
pub fn unit_grid(points: usize) -> Vec<f64> {
    let last = points - 1;
    (0..points)
        .map(|i| if i == last { 1.0 } else { i as f64 / last as f64 })
        .collect()
}

pub fn welfare_curve(
    alpha: &UtilitySpec,
    profile: &LocationProfile,
    grid_points: usize,
) -> Result<WelfareCurve> {
    if grid_points < 2 {
        return Err(Error::config(format!(
            "welfare curve needs at least 2 grid points, got {grid_points}"
        )));
    }
    let grid = unit_grid(grid_points);
    let values = grid.iter().map(|&y| welfare_at(alpha, profile, y)).collect();
    Ok(WelfareCurve {
        grid,
        values,
        alpha_id: alpha.id(),
    })
}

/// The classical welfare notions with utility `1 - |y - x_i|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Utilitarian,
    Egalitarian,
    Nash,
}

pub fn reference_welfare(kind: ReferenceKind, profile: &LocationProfile, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::facility(y));
    }
    let utilities = profile.locations.iter().map(|x| 1.0 - (y - x).abs());
    Ok(match kind {
        ReferenceKind::Utilitarian => utilities.sum(),
        ReferenceKind::Egalitarian => utilities.fold(f64::INFINITY, f64::min),
        ReferenceKind::Nash => utilities.product(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn profile_sorted() {
        let p = make_profile(&[0.9, 0.1, 0.5]).unwrap();
        assert_eq!(p.locations(), &[0.1, 0.5, 0.9]);
        let p = make_profile(&[0.5]).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn profile_domain_error_names_index() {
        let err = make_profile(&[0.2, 1.3]).unwrap_err();
        assert!(matches!(err, Error::Domain { index: Some(1), .. }));
        assert!(err.to_string().contains("index 1"));
        assert_eq!(make_profile(&[]), Err(Error::EmptyProfile));
        assert!(make_profile(&[f64::NAN]).is_err());
    }

    #[test]
    fn duplicates_kept() {
        let p = make_profile(&[0.3, 0.3, 0.1]).unwrap();
        assert_eq!(p.locations(), &[0.1, 0.3, 0.3]);
    }

    #[test]
    fn welfare_examples() {
        let lin = UtilitySpec::linear();
        let p = make_profile(&[0.1, 0.5, 0.9]).unwrap();
        assert_relative_eq!(welfare(&lin, &p, 0.5).unwrap().value, 2.2, epsilon = 1e-15);

        let sq = UtilitySpec::pmean(2.0).unwrap();
        let single = make_profile(&[0.5]).unwrap();
        assert_eq!(welfare(&sq, &single, 0.5).unwrap().value, 0.0);

        let shifted = UtilitySpec::shifted_pmean(1.0, 2.0).unwrap();
        assert_eq!(welfare(&shifted, &single, 0.0).unwrap().value, 1.5);

        assert!(welfare(&lin, &p, 1.01).is_err());
        assert!(welfare(&lin, &p, -0.01).is_err());
    }

    #[test]
    fn curve_examples() {
        let lin = UtilitySpec::linear();
        let c = welfare_curve(&lin, &make_profile(&[0.5]).unwrap(), 3).unwrap();
        assert_eq!(c.grid, vec![0.0, 0.5, 1.0]);
        assert_eq!(c.values, vec![0.5, 1.0, 0.5]);

        let sq = UtilitySpec::pmean(2.0).unwrap();
        let c = welfare_curve(&sq, &make_profile(&[0.0, 1.0]).unwrap(), 3).unwrap();
        assert_eq!(c.values, vec![-1.0, -0.5, -1.0]);

        let c = welfare_curve(&sq, &make_profile(&[0.3]).unwrap(), 2).unwrap();
        assert_eq!(c.grid, vec![0.0, 1.0]);
        assert!(matches!(welfare_curve(&sq, &make_profile(&[0.3]).unwrap(), 1), Err(Error::Config(_))));
    }

    #[test]
    fn reference_examples() {
        let p = make_profile(&[0.1, 0.5, 0.9]).unwrap();
        assert_relative_eq!(
            reference_welfare(ReferenceKind::Utilitarian, &p, 0.5).unwrap(),
            2.2,
            epsilon = 1e-15
        );
        let p = make_profile(&[0.1, 0.9]).unwrap();
        assert_relative_eq!(reference_welfare(ReferenceKind::Egalitarian, &p, 0.5).unwrap(), 0.6);
        let p = make_profile(&[0.0, 1.0]).unwrap();
        assert_eq!(reference_welfare(ReferenceKind::Nash, &p, 0.5).unwrap(), 0.25);
        assert!(reference_welfare(ReferenceKind::Nash, &p, 2.0).is_err());
    }

    #[test]
    fn slopes_of_linear_welfare() {
        let p = make_profile(&[0.2, 0.8]).unwrap();
        let (r, l, _) = welfare_slopes(&UtilitySpec::linear(), &p, 0.5);
        assert_eq!((r, l), (0.0, 0.0));
        let (r, l, _) = welfare_slopes(&UtilitySpec::linear(), &p, 0.2);
        assert_eq!((r, l), (0.0, 2.0));
    }
}
