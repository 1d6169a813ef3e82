use std::collections::BTreeSet;

use crate::catalog::{FeatureId, GroupRule};
use crate::signals::{Payload, Trace};

use super::{Evidence, Firing};

/// Recommends a rule's consequent when its antecedent becomes enabled and the
/// consequent is not. The enabled set starts from the trace's
/// `initial_settings` and follows its setting changes; an antecedent that was
/// already enabled is not re-triggered. Each rule fires at most once.
pub fn detect_grouped(trace: &Trace, rules: &[GroupRule]) -> Vec<Firing> {
    let mut enabled: BTreeSet<&FeatureId> = trace.initial_settings().iter().collect();
    let mut fired = vec![false; rules.len()];
    let mut firings = Vec::new();

    for event in trace.events() {
        let Payload::Setting {
            feature,
            enabled: on,
        } = &event.payload
        else {
            continue;
        };
        if !*on {
            enabled.remove(feature);
            continue;
        }
        if !enabled.insert(feature) {
            continue;
        }
        for (rule, done) in rules.iter().zip(fired.iter_mut()) {
            if *done || rule.antecedent != *feature || enabled.contains(&rule.consequent) {
                continue;
            }
            *done = true;
            firings.push(Firing {
                feature: rule.consequent.clone(),
                t: event.t,
                rule: rule.name(),
                evidence: Evidence::Group {
                    antecedent: rule.antecedent.clone(),
                },
            });
        }
    }
    firings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::default_group_rules;
    use crate::detectors::test_support::*;
    use crate::signals::TraceMeta;

    fn run(events: Vec<crate::signals::SignalEvent>) -> Vec<Firing> {
        detect_grouped(&Trace::new(events, None).unwrap(), &default_group_rules())
    }

    #[test]
    fn assistive_touch_suggests_side_button() {
        let out = run(vec![setting(5.0, "assistive_touch", true)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].feature, fid("side_button"));
        assert_eq!(out[0].t, 5.0);
        assert_eq!(out[0].rule, "assistive_touch=>side_button");
    }

    #[test]
    fn closed_captioning_suggests_type_to_siri() {
        let out = run(vec![setting(3.0, "closed_captioning", true)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].feature, fid("type_to_siri"));
    }

    #[test]
    fn consequent_already_enabled() {
        assert!(run(vec![
            setting(1.0, "larger_text", true),
            setting(2.0, "bold_text", true)
        ])
        .is_empty());
    }

    #[test]
    fn initial_settings_count_as_enabled() {
        let meta = TraceMeta {
            initial_settings: vec![fid("larger_text")],
            ..Default::default()
        };
        let trace = Trace::new(vec![setting(2.0, "bold_text", true)], Some(meta)).unwrap();
        assert!(detect_grouped(&trace, &default_group_rules()).is_empty());
    }

    #[test]
    fn at_most_once_per_rule() {
        let out = run(vec![
            setting(1.0, "bold_text", true),
            setting(2.0, "bold_text", false),
            setting(3.0, "bold_text", true),
        ]);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn disabled_consequent_no_longer_suppresses() {
        let out = run(vec![
            setting(1.0, "larger_text", true),
            setting(2.0, "larger_text", false),
            setting(3.0, "bold_text", true),
        ]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].t, 3.0);
    }

    #[test]
    fn disabling_antecedent_does_not_fire() {
        assert!(run(vec![setting(1.0, "assistive_touch", false)]).is_empty());
    }
}
