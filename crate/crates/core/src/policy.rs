//! Turns detector firings into user-facing recommendations.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::catalog::FeatureId;
use crate::detectors::{Evidence, Firing};
use crate::signals::{Payload, Trace};

const SHIPPED_TEMPLATES: &str = include_str!("../data/templates.txt");

/// Substrings no recommendation text may contain (matched case-insensitively).
/// Messages describe what a feature can do, never why the user might need it.
pub const FORBIDDEN_WORDS: [&str; 4] = ["impair", "disab", "trouble", "condition"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    /// Minimum seconds between two recommendations of the same feature.
    pub cooldown: f64,
    /// Upper bound on recommendations per trace; `usize::MAX` for no cap.
    pub max_per_trace: usize,
    /// Skip features the user already has enabled.
    pub suppress_enabled: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            cooldown: 86_400.0,
            max_per_trace: 3,
            suppress_enabled: true,
        }
    }
}

impl PolicyConfig {
    /// Passes every firing through.
    pub fn permissive() -> Self {
        Self {
            cooldown: 0.0,
            max_per_trace: usize::MAX,
            suppress_enabled: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub feature: FeatureId,
    pub t: f64,
    pub message: String,
    pub rule: String,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("line {line}: expected `feature_id = message`")]
    Syntax { line: usize },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("line {line}: duplicate template for `{feature}`")]
    Duplicate { line: usize, feature: FeatureId },
    #[error("line {line}: message for `{feature}` contains forbidden wording `{word}`")]
    Forbidden {
        line: usize,
        feature: FeatureId,
        word: &'static str,
    },
}

/// Message text per feature.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Templates(BTreeMap<FeatureId, String>);

impl Templates {
    pub fn shipped() -> Self {
        parse_templates(SHIPPED_TEMPLATES).expect("shipped templates are valid")
    }

    pub fn get(&self, feature: &FeatureId) -> Option<&str> {
        self.0.get(feature).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, &str)> {
        self.0.iter().map(|(k, v)| (k, v.as_str()))
    }

    pub fn message_for(&self, feature: &FeatureId) -> String {
        match self.get(feature) {
            Some(text) => text.to_string(),
            None => format!("Did you know about {}?", feature.display_name()),
        }
    }
}

/// First forbidden word found in `text`, if any.
pub fn forbidden_word(text: &str) -> Option<&'static str> {
    let lower = text.to_lowercase();
    FORBIDDEN_WORDS.into_iter().find(|w| lower.contains(w))
}

/// Parses `feature_id = message` lines; `#` comments and blank lines are skipped.
pub fn parse_templates(source: &str) -> Result<Templates, TemplateError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let Some((id, message)) = text.split_once('=') else {
            return Err(TemplateError::Syntax { line });
        };
        let (id, message) = (id.trim(), message.trim());
        if message.is_empty() {
            return Err(TemplateError::Syntax { line });
        }
        let feature = FeatureId::new(id).map_err(|e| TemplateError::Invalid {
            line,
            message: e.to_string(),
        })?;
        if let Some(word) = forbidden_word(message) {
            return Err(TemplateError::Forbidden {
                line,
                feature,
                word,
            });
        }
        if map.contains_key(&feature) {
            return Err(TemplateError::Duplicate { line, feature });
        }
        map.insert(feature, message.to_string());
    }
    Ok(Templates(map))
}

/// Filters time-sorted firings into recommendations.
///
/// A firing is dropped when its feature is enabled at that time (and
/// `suppress_enabled` is set), when the same feature was recommended less
/// than `cooldown` seconds earlier, or once `max_per_trace` recommendations
/// have been made. Survivors keep their order.
pub fn surface(
    firings: &[Firing],
    trace: &Trace,
    cfg: &PolicyConfig,
    templates: &Templates,
) -> Vec<Recommendation> {
    let mut enabled: BTreeSet<&FeatureId> = trace.initial_settings().iter().collect();
    let mut settings = trace.events().iter().filter_map(|e| match &e.payload {
        Payload::Setting { feature, enabled } => Some((e.t, feature, *enabled)),
        _ => None,
    });
    let mut pending = settings.next();
    let mut last_shown: BTreeMap<&FeatureId, f64> = BTreeMap::new();
    let mut out = Vec::new();

    for firing in firings {
        while let Some((t, feature, on)) = pending {
            if t > firing.t {
                break;
            }
            if on {
                enabled.insert(feature);
            } else {
                enabled.remove(feature);
            }
            pending = settings.next();
        }

        if out.len() >= cfg.max_per_trace {
            break;
        }
        if cfg.suppress_enabled && enabled.contains(&firing.feature) {
            continue;
        }
        if let Some(&prev) = last_shown.get(&firing.feature) {
            if firing.t - prev < cfg.cooldown {
                continue;
            }
        }
        last_shown.insert(&firing.feature, firing.t);
        out.push(Recommendation {
            feature: firing.feature.clone(),
            t: firing.t,
            message: templates.message_for(&firing.feature),
            rule: firing.rule.clone(),
            evidence: firing.evidence.clone(),
        });
    }
    out
}
