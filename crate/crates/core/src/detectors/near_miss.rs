use crate::signals::{Payload, Trace};

use super::{Evidence, Firing, NearMissRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttemptOutcome {
    /// Recognized at the current click speed.
    Success,
    /// Too slow for the current speed, fast enough for the slowest.
    NearMiss,
}

/// A double- or triple-click attempt: a burst of 2 or 3 presses.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub press_times: Vec<f64>,
    pub max_gap: f64,
    pub outcome: AttemptOutcome,
}

/// Splits the rule's button presses into bursts (maximal runs whose gaps are
/// all within the slowest threshold) and classifies every 2- or 3-press burst.
/// Bursts of 1 or 4+ presses are not attempts.
pub fn classify_attempts(trace: &Trace, rule: &NearMissRule) -> Vec<Attempt> {
    let slowest = rule.ladder.slowest;
    let current = rule.ladder.at(rule.current_level);

    let presses = trace.events().iter().filter_map(|e| match e.payload {
        Payload::Button { button } if button == rule.button => Some(e.t),
        _ => None,
    });

    let mut attempts = Vec::new();
    let mut burst: Vec<f64> = Vec::new();
    let mut max_gap = 0.0f64;
    let mut close = |burst: &mut Vec<f64>, max_gap: f64| {
        if matches!(burst.len(), 2 | 3) {
            let outcome = if max_gap <= current {
                AttemptOutcome::Success
            } else {
                AttemptOutcome::NearMiss
            };
            attempts.push(Attempt {
                press_times: burst.clone(),
                max_gap,
                outcome,
            });
        }
        burst.clear();
    };

    for t in presses {
        match burst.last() {
            Some(&prev) if t - prev <= slowest => {
                max_gap = max_gap.max(t - prev);
            }
            Some(_) => {
                close(&mut burst, max_gap);
                max_gap = 0.0;
            }
            None => {}
        }
        burst.push(t);
    }
    close(&mut burst, max_gap);
    attempts
}

/// Emits a firing each time `min_count` near-misses have accumulated, at the
/// last press of the attempt that completed the count; the count then resets.
pub fn detect_near_miss(trace: &Trace, rule: &NearMissRule) -> Vec<Firing> {
    let mut count = 0;
    let mut firings = Vec::new();
    for attempt in classify_attempts(trace, rule) {
        if attempt.outcome != AttemptOutcome::NearMiss {
            continue;
        }
        count += 1;
        if count >= rule.min_count {
            count = 0;
            firings.push(Firing {
                feature: rule.recommend.clone(),
                t: *attempt.press_times.last().expect("attempt has presses"),
                rule: rule.name.clone(),
                evidence: Evidence::NearMiss {
                    click_count: attempt.press_times.len(),
                    max_gap: attempt.max_gap,
                    press_times: attempt.press_times,
                },
            });
        }
    }
    firings
}
