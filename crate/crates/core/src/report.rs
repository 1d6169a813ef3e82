//! Per-trace detection reports and their aggregation across traces.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::baseline::BaselineSet;
use crate::catalog::FeatureCatalog;
use crate::detectors::{detect_all, DetectError, Firing, RuleSet};
use crate::policy::{surface, PolicyConfig, Recommendation, Templates};
use crate::signals::{Payload, SignalKind, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RuleStats {
    /// Whether the trace held enough input for the rule to reach a verdict.
    pub evaluated: bool,
    pub fired: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub trace_id: String,
    pub firings: Vec<Firing>,
    pub recommendations: Vec<Recommendation>,
    pub rule_stats: BTreeMap<String, RuleStats>,
}

/// Everything besides the trace needed to produce a report.
#[derive(Debug, Clone)]
pub struct Engine {
    pub rules: RuleSet,
    pub baselines: BaselineSet,
    pub catalog: FeatureCatalog,
    pub templates: Templates,
    pub policy: PolicyConfig,
}

impl Engine {
    pub fn report(&self, trace_id: &str, trace: &Trace) -> Result<Report, DetectError> {
        let firings = detect_all(trace, &self.rules, &self.baselines, &self.catalog)?;
        let recommendations = surface(&firings, trace, &self.policy, &self.templates);

        let mut rule_stats: BTreeMap<String, RuleStats> = BTreeMap::new();
        for r in self.rules.statistical() {
            let n = r.signal.samples(trace).count() as u64;
            rule_stats.insert(
                r.name.clone(),
                RuleStats {
                    evaluated: n >= r.min_samples,
                    fired: 0,
                },
            );
        }
        for r in self.rules.near_miss() {
            let pressed = trace
                .events()
                .iter()
                .any(|e| matches!(e.payload, Payload::Button { button } if button == r.button));
            rule_stats.insert(
                r.name.clone(),
                RuleStats {
                    evaluated: pressed,
                    fired: 0,
                },
            );
        }
        let any_ui = trace.filter_signal(SignalKind::UiAction).next().is_some();
        for r in self.rules.sequences() {
            rule_stats.insert(
                r.name.clone(),
                RuleStats {
                    evaluated: any_ui,
                    fired: 0,
                },
            );
        }
        for g in self.rules.groups() {
            let enabled = trace.events().iter().any(|e| {
                matches!(&e.payload, Payload::Setting { feature, enabled: true } if *feature == g.antecedent)
            });
            rule_stats.insert(
                g.name(),
                RuleStats {
                    evaluated: enabled,
                    fired: 0,
                },
            );
        }
        for f in &firings {
            if let Some(stats) = rule_stats.get_mut(&f.rule) {
                stats.fired += 1;
            }
        }

        Ok(Report {
            trace_id: trace_id.to_string(),
            firings,
            recommendations,
            rule_stats,
        })
    }
}

/// Totals over a batch of reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Aggregate {
    pub traces: usize,
    pub firings_by_rule: BTreeMap<String, usize>,
    pub recommendations_by_feature: BTreeMap<String, usize>,
}

impl Aggregate {
    pub fn from_reports(reports: &[Report]) -> Self {
        let mut agg = Aggregate {
            traces: reports.len(),
            ..Default::default()
        };
        for r in reports {
            for f in &r.firings {
                *agg.firings_by_rule.entry(f.rule.clone()).or_default() += 1;
            }
            for rec in &r.recommendations {
                *agg.recommendations_by_feature
                    .entry(rec.feature.to_string())
                    .or_default() += 1;
            }
        }
        agg
    }
}
