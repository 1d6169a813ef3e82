//! Detects latent accessibility needs from device-usage traces and turns them
//! into accessibility-feature recommendations.
//!
//! Four detection strategies are provided:
//!
//! - **statistical**: a user's running mean of a signal (viewing distance,
//!   listening volume) departs from a population baseline by `k` standard
//!   deviations;
//! - **near-miss**: double/triple-click attempts that fail at the current
//!   click speed but would succeed at a slower one;
//! - **sequence**: a known workaround sequence of UI actions, such as taking a
//!   photo, opening it, and pinch-zooming instead of using the magnifier;
//! - **grouped**: enabling one feature suggests a related one.
//!
//! [`detectors::detect_all`] produces raw [`detectors::Firing`]s, and
//! [`policy::surface`] filters them into user-facing recommendations.

pub mod baseline;
pub mod catalog;
pub mod cli;
pub mod detectors;
pub mod policy;
pub mod report;
pub mod rules;
pub mod signals;
pub mod tracegen;

pub use baseline::{calibrate, paper_defaults, Baseline, BaselineSet, Signal};
pub use catalog::{default_group_rules, load_catalog, FeatureCatalog, FeatureId, GroupRule};
pub use detectors::{detect_all, Firing, RuleSet};
pub use policy::{surface, PolicyConfig, Recommendation, Templates};
pub use rules::{default_rules, parse_rules, print_rules};
pub use signals::{parse_trace, serialize_trace, ParseOptions, SignalEvent, Trace};
