//! Facility location on the unit interval under generalized `α`-welfare.
//!
//! Agents sit at points of `[0, 1]`; a facility at `y` gives agent `i` utility
//! `α(y - x_i)` for a concave `α` peaking at zero, and the welfare of `y` is
//! the sum of those utilities. Utilitarian, p-mean (egalitarian in the
//! limit) and Nash welfare are all special cases of the choice of `α`.
//!
//! * [`welfare`]: profiles and exact welfare evaluation
//! * [`utility`]: utility families, Lipschitz envelopes, concavity audit
//! * [`peak`]: the welfare-maximizing location
//! * [`checks`]: validators for the structural properties of the peak
//! * [`bounds`]: approximation-ratio bounds
//! * [`stochastic`]: expected welfare and Monte Carlo convergence

pub mod bounds;
pub mod checks;
pub mod error;
pub mod par;
pub mod peak;
pub mod rng;
pub mod stochastic;
pub mod utility;
pub mod welfare;

pub use error::{Error, Result};
pub use peak::{peak, peak_closed_form, peak_oracle, Mechanism, PeakResult};
pub use utility::{make_utility, Family, UtilitySpec};
pub use welfare::{make_profile, welfare, welfare_curve, LocationProfile, WelfareCurve};
