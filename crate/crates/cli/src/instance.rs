//! Instance files: one JSON object per experiment.
//!
//! ```json
//! {"agents": [0.1, 0.5, 0.9], "utility": {"family": "pmean", "p": 2}}
//! {"distribution": {"family": "beta", "alpha": 2, "beta": 5, "n": 50, "seed": 1},
//!  "utility": {"family": "linear"}, "tolerance": 1e-10}
//! ```

use std::path::{Path, PathBuf};

use flight_core::peak::{check_tolerance, DEFAULT_TOLERANCE};
use flight_core::stochastic::{make_distribution, sample_profile, Distribution, DistributionSpec};
use flight_core::{make_utility, Family, LocationProfile, UtilitySpec};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_GRID_POINTS: usize = 1001;
pub const TOLERANCE_ENV: &str = "FLIGHT_DEFAULT_TOL";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    agents: Option<Vec<f64>>,
    distribution: Option<RawDistribution>,
    utility: Family,
    tolerance: Option<f64>,
    grid_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct RawDistribution {
    #[serde(flatten)]
    law: DistributionSpec,
    n: usize,
    seed: u64,
}

/// Where the agents came from.
#[derive(Debug, Clone)]
pub enum Agents {
    Explicit,
    Sampled {
        distribution: Distribution,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub path: PathBuf,
    /// Explicit agents, or the draw from the distribution under `seed`.
    pub profile: LocationProfile,
    pub agents: Agents,
    pub utility: UtilitySpec,
    pub tolerance: f64,
    pub grid_points: usize,
}

impl Instance {
    pub fn distribution(&self) -> Option<&Distribution> {
        match &self.agents {
            Agents::Sampled { distribution, .. } => Some(distribution),
            Agents::Explicit => None,
        }
    }
}

/// Default tolerance, honouring the environment override.
pub fn default_tolerance() -> Result<f64, CliError> {
    match std::env::var(TOLERANCE_ENV) {
        Ok(raw) => {
            let tol: f64 = raw.trim().parse().map_err(|_| {
                CliError::Usage(format!("{TOLERANCE_ENV}={raw:?} is not a number"))
            })?;
            check_tolerance(tol).map_err(|e| CliError::Usage(format!("{TOLERANCE_ENV}: {e}")))?;
            Ok(tol)
        }
        Err(_) => Ok(DEFAULT_TOLERANCE),
    }
}

pub fn parse_instance(path: &Path) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_instance_str(&text, path)
}

pub fn parse_instance_str(text: &str, path: &Path) -> Result<Instance, CliError> {
    let parse_err = |field: String, message: String| CliError::Parse {
        path: path.to_path_buf(),
        field,
        message,
    };
    let invalid = |field: &str, source: flight_core::Error| CliError::Invalid {
        path: path.to_path_buf(),
        field: field.to_string(),
        source,
    };

    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawInstance = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        parse_err(field, e.into_inner().to_string())
    })?;

    let utility = make_utility(raw.utility).map_err(|e| invalid("utility", e))?;

    let (profile, agents) = match (raw.agents, raw.distribution) {
        (Some(x), None) => {
            let profile = LocationProfile::new(x).map_err(|e| match e {
                flight_core::Error::Domain { index: Some(i), .. } => invalid(&format!("agents[{i}]"), e),
                e => invalid("agents", e),
            })?;
            (profile, Agents::Explicit)
        }
        (None, Some(d)) => {
            let distribution = make_distribution(d.law).map_err(|e| invalid("distribution", e))?;
            if d.n == 0 {
                return Err(parse_err("distribution.n".into(), "must be at least 1".into()));
            }
            let profile =
                sample_profile(&distribution, d.n, d.seed).map_err(|e| invalid("distribution", e))?;
            (profile, Agents::Sampled { distribution, seed: d.seed })
        }
        (Some(_), Some(_)) => {
            return Err(parse_err(
                ".".into(),
                "\"agents\" and \"distribution\" are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(parse_err(
                ".".into(),
                "one of \"agents\" or \"distribution\" is required".into(),
            ))
        }
    };

    let tolerance = match raw.tolerance {
        Some(t) => {
            check_tolerance(t).map_err(|e| invalid("tolerance", e))?;
            t
        }
        None => default_tolerance()?,
    };
    let grid_points = raw.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
    if grid_points < 2 {
        return Err(parse_err("grid_points".into(), "must be at least 2".into()));
    }

    Ok(Instance {
        path: path.to_path_buf(),
        profile,
        agents,
        utility,
        tolerance,
        grid_points,
    })
}

/// Parses a utility given on the command line, either as JSON or in the
/// compact form `family:key=value,key=value`, e.g. `pmean:p=2`.
pub fn parse_utility(arg: &str) -> Result<UtilitySpec, CliError> {
    let arg = arg.trim();
    let family: Family = if arg.starts_with('{') {
        serde_json::from_str(arg).map_err(|e| CliError::Usage(format!("utility {arg:?}: {e}")))?
    } else {
        let (name, params) = arg.split_once(':').unwrap_or((arg, ""));
        let mut obj = serde_json::Map::new();
        obj.insert("family".into(), name.trim().into());
        for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("utility {arg:?}: expected key=value, got {kv:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("utility {arg:?}: {v:?} is not a number")))?;
            obj.insert(k.trim().into(), v.into());
        }
        serde_json::from_value(obj.into()).map_err(|e| CliError::Usage(format!("utility {arg:?}: {e}")))?
    };
    make_utility(family).map_err(|e| CliError::Usage(format!("utility {arg:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Instance, CliError> {
        parse_instance_str(s, Path::new("test.json"))
    }

    #[test]
    fn explicit_agents() {
        let i = parse(r#"{"agents":[0.1,0.5,0.9],"utility":{"family":"pmean","p":2}}"#).unwrap();
        assert_eq!(i.profile.len(), 3);
        assert_eq!(i.grid_points, 1001);
        assert!(matches!(i.agents, Agents::Explicit));
    }

    #[test]
    fn agents_and_distribution_exclusive() {
        let e = parse(
            r#"{"agents":[0.1],"distribution":{"family":"uniform","n":3,"seed":1},"utility":{"family":"linear"}}"#,
        )
        .unwrap_err();
        assert!(matches!(e, CliError::Parse { .. }), "{e}");
    }

    #[test]
    fn bad_agent_is_located() {
        let e = parse(r#"{"agents":[0.2,1.5],"utility":{"family":"linear"}}"#).unwrap_err();
        match e {
            CliError::Invalid { field, source, .. } => {
                assert_eq!(field, "agents[1]");
                assert!(matches!(source, flight_core::Error::Domain { .. }));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn schema_errors_carry_the_field_path() {
        let e = parse(r#"{"agents":[0.2,"x"],"utility":{"family":"linear"}}"#).unwrap_err();
        match e {
            CliError::Parse { field, .. } => assert_eq!(field, "agents[1]"),
            e => panic!("unexpected {e}"),
        }
        let e = parse(r#"{"agents":[0.2],"utility":{"family":"pmean"}}"#).unwrap_err();
        assert!(e.to_string().contains("utility"), "{e}");
        let e = parse(r#"{"agents":[0.2],"utility":{"family":"linear"},"tol":1}"#).unwrap_err();
        assert!(e.to_string().contains("tol"), "{e}");
    }

    #[test]
    fn sampled_agents() {
        let i = parse(
            r#"{"distribution":{"family":"beta","alpha":2,"beta":5,"n":40,"seed":3},"utility":{"family":"linear"}}"#,
        )
        .unwrap();
        assert_eq!(i.profile.len(), 40);
        assert!(i.distribution().is_some());
        let again = parse(
            r#"{"distribution":{"family":"beta","alpha":2,"beta":5,"n":40,"seed":3},"utility":{"family":"linear"}}"#,
        )
        .unwrap();
        assert_eq!(i.profile, again.profile);
    }

    #[test]
    fn tolerance_range() {
        assert!(parse(r#"{"agents":[0.2],"utility":{"family":"linear"},"tolerance":1e-2}"#).is_err());
        let i = parse(r#"{"agents":[0.2],"utility":{"family":"linear"},"tolerance":1e-6}"#).unwrap();
        assert_eq!(i.tolerance, 1e-6);
    }

    #[test]
    fn compact_utilities() {
        assert_eq!(parse_utility("pmean:p=2").unwrap(), UtilitySpec::pmean(2.0).unwrap());
        assert_eq!(
            parse_utility("shifted_pmean:p=1,shift=2").unwrap(),
            UtilitySpec::shifted_pmean(1.0, 2.0).unwrap()
        );
        assert_eq!(parse_utility("linear").unwrap(), UtilitySpec::linear());
        assert!(parse_utility("nash_log").is_ok());
        assert!(parse_utility(r#"{"family":"piecewise_linear","breakpoints":[[-1,0],[0,1],[1,0]]}"#).is_ok());
        assert!(parse_utility("pmean:p=0.5").is_err());
        assert!(parse_utility("cubic").is_err());
    }
}
