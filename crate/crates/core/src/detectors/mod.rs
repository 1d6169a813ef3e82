//! The four detection strategies and the rule types that configure them.
//!
//! Every detector is a pure function of its inputs: the same trace and rules
//! always yield the same firings, and a firing at time `t` depends only on
//! events up to `t` (near-miss bursts additionally look `T_slowest` ahead to
//! know that a burst has closed).

mod grouped;
mod near_miss;
mod sequence;
mod statistical;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::baseline::{BaselineSet, Signal};
use crate::catalog::{FeatureCatalog, FeatureId, GroupRule};
use crate::signals::{Button, Trace, UiActionKind};

pub use grouped::detect_grouped;
pub use near_miss::{classify_attempts, detect_near_miss, Attempt, AttemptOutcome};
pub use sequence::detect_sequence;
pub use statistical::detect_statistical;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sides {
    Above,
    Below,
    Both,
}

impl Sides {
    pub fn as_str(self) -> &'static str {
        match self {
            Sides::Above => "above",
            Sides::Below => "below",
            Sides::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Sides::Above, Sides::Below, Sides::Both]
            .into_iter()
            .find(|x| x.as_str() == s)
    }
}

/// Fires when a user's running mean departs from the population baseline by
/// at least `k_sigma` baseline standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticalRule {
    pub name: String,
    pub signal: Signal,
    pub sides: Sides,
    pub k_sigma: f64,
    pub min_samples: u64,
    pub recommend: FeatureId,
}

impl StatisticalRule {
    pub const DEFAULT_K_SIGMA: f64 = 2.0;
    pub const DEFAULT_MIN_SAMPLES: u64 = 30;

    pub fn new(name: &str, signal: Signal, sides: Sides, recommend: FeatureId) -> Self {
        Self {
            name: name.into(),
            signal,
            sides,
            k_sigma: Self::DEFAULT_K_SIGMA,
            min_samples: Self::DEFAULT_MIN_SAMPLES,
            recommend,
        }
    }

    fn check(&self) -> Result<(), String> {
        if !(self.k_sigma.is_finite() && self.k_sigma > 0.0) {
            return Err("k must be > 0".into());
        }
        if self.min_samples == 0 {
            return Err("min_samples must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickLevel {
    Default,
    Slow,
    Slowest,
}

impl ClickLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            ClickLevel::Default => "default",
            ClickLevel::Slow => "slow",
            ClickLevel::Slowest => "slowest",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ClickLevel::Default, ClickLevel::Slow, ClickLevel::Slowest]
            .into_iter()
            .find(|x| x.as_str() == s)
    }
}

/// Maximum inter-press gaps (seconds) for the selectable click speeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ladder {
    pub default: f64,
    pub slow: f64,
    pub slowest: f64,
}

impl Ladder {
    pub const DEFAULT: Ladder = Ladder {
        default: 0.25,
        slow: 0.35,
        slowest: 0.50,
    };

    pub fn at(&self, level: ClickLevel) -> f64 {
        match level {
            ClickLevel::Default => self.default,
            ClickLevel::Slow => self.slow,
            ClickLevel::Slowest => self.slowest,
        }
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.default.is_finite()
            && self.slowest.is_finite()
            && 0.0 < self.default
            && self.default < self.slow
            && self.slow < self.slowest
    }
}

/// Fires on double/triple-click attempts too slow for the current click speed
/// but fast enough for the slowest one.
#[derive(Debug, Clone, PartialEq)]
pub struct NearMissRule {
    pub name: String,
    pub button: Button,
    pub ladder: Ladder,
    pub current_level: ClickLevel,
    pub min_count: u64,
    pub recommend: FeatureId,
}

impl NearMissRule {
    pub fn new(name: &str, button: Button, recommend: FeatureId) -> Self {
        Self {
            name: name.into(),
            button,
            ladder: Ladder::DEFAULT,
            current_level: ClickLevel::Default,
            min_count: 1,
            recommend,
        }
    }

    fn check(&self) -> Result<(), String> {
        if !self.ladder.is_strictly_increasing() {
            return Err("ladder must be strictly increasing".into());
        }
        if self.min_count == 0 {
            return Err("min_count must be >= 1".into());
        }
        Ok(())
    }
}

/// A step after the first: the action and the longest allowed gap since the
/// previously matched step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceStep {
    pub action: UiActionKind,
    pub within: f64,
}

/// Ordered UI actions that together suggest a workaround for a missing feature.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePattern {
    pub name: String,
    pub first: UiActionKind,
    pub then: Vec<SequenceStep>,
    /// Longest allowed span from the first to the last matched step.
    pub window: f64,
    pub recommend: FeatureId,
}

impl SequencePattern {
    pub const DEFAULT_WITHIN: f64 = 60.0;
    pub const DEFAULT_WINDOW: f64 = 120.0;

    /// Builds a pattern with default per-step gap and window.
    pub fn new(name: &str, actions: &[UiActionKind], recommend: FeatureId) -> Self {
        let (first, rest) = actions.split_first().expect("at least one action");
        Self {
            name: name.into(),
            first: *first,
            then: rest
                .iter()
                .map(|&action| SequenceStep {
                    action,
                    within: Self::DEFAULT_WITHIN,
                })
                .collect(),
            window: Self::DEFAULT_WINDOW,
            recommend,
        }
    }

    pub fn actions(&self) -> impl Iterator<Item = UiActionKind> + '_ {
        std::iter::once(self.first).chain(self.then.iter().map(|s| s.action))
    }

    pub fn len(&self) -> usize {
        1 + self.then.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self) -> Result<(), String> {
        if self.then.is_empty() {
            return Err("a sequence needs at least two steps".into());
        }
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err("window must be > 0".into());
        }
        for step in &self.then {
            if !(step.within.is_finite() && step.within > 0.0) {
                return Err("within must be > 0".into());
            }
            if step.within > self.window {
                return Err(format!(
                    "within {} exceeds window {}",
                    step.within, self.window
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleSetError {
    #[error("duplicate rule name `{0}`")]
    DuplicateName(String),
    #[error("duplicate group rule {0}")]
    DuplicateGroup(String),
    #[error("group rule {0} implies itself")]
    SelfImplication(String),
    #[error("rule `{name}`: {message}")]
    Invalid { name: String, message: String },
}

/// A validated collection of detection rules, kept in canonical order
/// (each list sorted by name; group rules by antecedent then consequent).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSet {
    statistical: Vec<StatisticalRule>,
    near_miss: Vec<NearMissRule>,
    sequences: Vec<SequencePattern>,
    groups: Vec<GroupRule>,
}

impl RuleSet {
    pub fn new(
        mut statistical: Vec<StatisticalRule>,
        mut near_miss: Vec<NearMissRule>,
        mut sequences: Vec<SequencePattern>,
        mut groups: Vec<GroupRule>,
    ) -> Result<Self, RuleSetError> {
        let mut names = BTreeSet::new();
        let named = statistical
            .iter()
            .map(|r| (&r.name, r.check()))
            .chain(near_miss.iter().map(|r| (&r.name, r.check())))
            .chain(sequences.iter().map(|r| (&r.name, r.check())));
        for (name, checked) in named {
            checked.map_err(|message| RuleSetError::Invalid {
                name: name.clone(),
                message,
            })?;
            if !names.insert(name.clone()) {
                return Err(RuleSetError::DuplicateName(name.clone()));
            }
        }
        let mut pairs = BTreeSet::new();
        for g in &groups {
            if g.antecedent == g.consequent {
                return Err(RuleSetError::SelfImplication(g.name()));
            }
            if !pairs.insert(g.clone()) {
                return Err(RuleSetError::DuplicateGroup(g.name()));
            }
        }

        statistical.sort_by(|a, b| a.name.cmp(&b.name));
        near_miss.sort_by(|a, b| a.name.cmp(&b.name));
        sequences.sort_by(|a, b| a.name.cmp(&b.name));
        groups.sort();
        Ok(Self {
            statistical,
            near_miss,
            sequences,
            groups,
        })
    }

    pub fn statistical(&self) -> &[StatisticalRule] {
        &self.statistical
    }

    pub fn near_miss(&self) -> &[NearMissRule] {
        &self.near_miss
    }

    pub fn sequences(&self) -> &[SequencePattern] {
        &self.sequences
    }

    pub fn groups(&self) -> &[GroupRule] {
        &self.groups
    }

    pub fn is_empty(&self) -> bool {
        self.statistical.is_empty()
            && self.near_miss.is_empty()
            && self.sequences.is_empty()
            && self.groups.is_empty()
    }

    /// Rule names in canonical order, with group rules named `a=>b`.
    pub fn rule_names(&self) -> Vec<String> {
        self.statistical
            .iter()
            .map(|r| r.name.clone())
            .chain(self.near_miss.iter().map(|r| r.name.clone()))
            .chain(self.sequences.iter().map(|r| r.name.clone()))
            .chain(self.groups.iter().map(GroupRule::name))
            .collect()
    }

    /// `(rule name, recommended feature)` for every rule.
    pub fn targets(&self) -> Vec<(String, &FeatureId)> {
        self.statistical
            .iter()
            .map(|r| (r.name.clone(), &r.recommend))
            .chain(
                self.near_miss
                    .iter()
                    .map(|r| (r.name.clone(), &r.recommend)),
            )
            .chain(
                self.sequences
                    .iter()
                    .map(|r| (r.name.clone(), &r.recommend)),
            )
            .chain(self.groups.iter().map(|g| (g.name(), &g.consequent)))
            .collect()
    }
}

/// Strategy-specific support for a firing.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Evidence {
    Statistical {
        user_mean: f64,
        baseline_mean: f64,
        baseline_stddev: f64,
        n: u64,
    },
    NearMiss {
        press_times: Vec<f64>,
        max_gap: f64,
        click_count: usize,
    },
    Sequence {
        matched_step_times: Vec<f64>,
    },
    Group {
        antecedent: FeatureId,
    },
}

/// Raw detector output: evidence for `feature` first met at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Firing {
    pub feature: FeatureId,
    pub t: f64,
    pub rule: String,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("no baseline for signal `{0}`")]
    MissingBaseline(Signal),
    #[error("rule `{rule}` recommends unknown feature `{feature}`")]
    UnknownFeature { rule: String, feature: FeatureId },
    #[error("rule `{rule}` recommends `{feature}`, which is tagged required-only")]
    RequiredFeature { rule: String, feature: FeatureId },
}

/// Checks that every rule targets a recommendable catalog feature.
pub fn validate_rules(rules: &RuleSet, catalog: &FeatureCatalog) -> Result<(), DetectError> {
    for (rule, feature) in rules.targets() {
        match catalog.get(feature) {
            None => {
                return Err(DetectError::UnknownFeature {
                    rule,
                    feature: feature.clone(),
                })
            }
            Some(entry) if entry.is_required_only() => {
                return Err(DetectError::RequiredFeature {
                    rule,
                    feature: feature.clone(),
                })
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Runs every rule over the trace. Firings are ordered by time, then rule name.
pub fn detect_all(
    trace: &Trace,
    rules: &RuleSet,
    baselines: &BaselineSet,
    catalog: &FeatureCatalog,
) -> Result<Vec<Firing>, DetectError> {
    validate_rules(rules, catalog)?;

    let mut firings = Vec::new();
    for rule in rules.statistical() {
        firings.extend(detect_statistical(trace, rule, baselines)?);
    }
    for rule in rules.near_miss() {
        firings.extend(detect_near_miss(trace, rule));
    }
    for pattern in rules.sequences() {
        firings.extend(detect_sequence(trace, pattern));
    }
    firings.extend(detect_grouped(trace, rules.groups()));

    firings.sort_by(|a, b| a.t.total_cmp(&b.t).then_with(|| a.rule.cmp(&b.rule)));
    Ok(firings)
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::catalog::FeatureId;
    use crate::signals::{AudioOutput, Button, Payload, SignalEvent, UiActionKind};

    pub fn fid(s: &str) -> FeatureId {
        FeatureId::new(s).unwrap()
    }

    pub fn distance(t: f64, meters: f64) -> SignalEvent {
        SignalEvent::new(t, Payload::ViewingDistance { meters })
    }

    pub fn audio(t: f64, volume: f64, playing: bool) -> SignalEvent {
        SignalEvent::new(
            t,
            Payload::Audio {
                playing,
                volume,
                output: AudioOutput::Speaker,
            },
        )
    }

    pub fn press(t: f64) -> SignalEvent {
        SignalEvent::new(
            t,
            Payload::Button {
                button: Button::Side,
            },
        )
    }

    pub fn ui(t: f64, action: UiActionKind) -> SignalEvent {
        SignalEvent::new(t, Payload::UiAction { action, app: None })
    }

    pub fn setting(t: f64, feature: &str, enabled: bool) -> SignalEvent {
        SignalEvent::new(
            t,
            Payload::Setting {
                feature: fid(feature),
                enabled,
            },
        )
    }
}
