use crate::signals::{Payload, Trace};

use super::{Evidence, Firing, SequencePattern};

/// Greedy, non-overlapping scan for `pattern` over UI actions.
///
/// One partial match is tracked at a time. Actions that do not continue it
/// are skipped. When an action arrives after the current step's deadline
/// (per-step gap or overall window) the partial match is dropped and that
/// action may begin a new one. Each completed match fires once, at its last
/// step, and scanning restarts empty.
pub fn detect_sequence(trace: &Trace, pattern: &SequencePattern) -> Vec<Firing> {
    let mut matched: Vec<f64> = Vec::with_capacity(pattern.len());
    let mut firings = Vec::new();

    for event in trace.events() {
        let Payload::UiAction { action, .. } = event.payload else {
            continue;
        };
        let t = event.t;

        if let (Some(&start), Some(&last)) = (matched.first(), matched.last()) {
            let step = &pattern.then[matched.len() - 1];
            let timed_out = t - last > step.within || t - start > pattern.window;
            if !timed_out {
                if action == step.action {
                    matched.push(t);
                    if matched.len() == pattern.len() {
                        firings.push(Firing {
                            feature: pattern.recommend.clone(),
                            t,
                            rule: pattern.name.clone(),
                            evidence: Evidence::Sequence {
                                matched_step_times: std::mem::take(&mut matched),
                            },
                        });
                    }
                }
                continue;
            }
            matched.clear();
        }

        if action == pattern.first {
            matched.push(t);
        }
    }
    firings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::test_support::*;
    use crate::detectors::SequenceStep;
    use crate::signals::{SignalEvent, UiActionKind::*};

    fn magnifier() -> SequencePattern {
        SequencePattern::new(
            "magnifier",
            &[PhotoCaptured, PhotoOpened, PinchZoom],
            fid("magnifier"),
        )
    }

    fn run(events: Vec<SignalEvent>) -> Vec<Firing> {
        detect_sequence(&Trace::new(events, None).unwrap(), &magnifier())
    }

    #[test]
    fn photo_zoom_workaround() {
        let out = run(vec![
            ui(0.0, PhotoCaptured),
            ui(10.0, PhotoOpened),
            ui(15.0, PinchZoom),
        ]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].t, 15.0);
        assert_eq!(out[0].feature, fid("magnifier"));
        assert_eq!(
            out[0].evidence,
            Evidence::Sequence {
                matched_step_times: vec![0.0, 10.0, 15.0]
            }
        );
    }

    #[test]
    fn incomplete_pattern() {
        assert!(run(vec![ui(0.0, PhotoCaptured), ui(10.0, PhotoOpened)]).is_empty());
    }

    #[test]
    fn step_gap_timeout_resets() {
        assert!(run(vec![
            ui(0.0, PhotoCaptured),
            ui(100.0, PhotoOpened),
            ui(105.0, PinchZoom)
        ])
        .is_empty());
    }

    #[test]
    fn window_timeout_resets() {
        let mut p = magnifier();
        p.window = 100.0;
        let events = vec![
            ui(0.0, PhotoCaptured),
            ui(55.0, PhotoOpened),
            ui(110.0, PinchZoom),
        ];
        assert!(detect_sequence(&Trace::new(events, None).unwrap(), &p).is_empty());
    }

    #[test]
    fn intervening_actions_ignored() {
        let out = run(vec![
            ui(0.0, PhotoCaptured),
            ui(2.0, AppOpen),
            distance(3.0, 0.3),
            ui(10.0, PhotoOpened),
            ui(12.0, Screenshot),
            ui(15.0, PinchZoom),
        ]);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn timing_out_event_can_restart() {
        let out = run(vec![
            ui(0.0, PhotoCaptured),
            ui(70.0, PhotoCaptured),
            ui(80.0, PhotoOpened),
            ui(85.0, PinchZoom),
        ]);
        assert_eq!(out.len(), 1);
        assert_eq!(
            out[0].evidence,
            Evidence::Sequence {
                matched_step_times: vec![70.0, 80.0, 85.0]
            }
        );
    }

    #[test]
    fn matches_do_not_overlap() {
        let out = run(vec![
            ui(0.0, PhotoCaptured),
            ui(1.0, PhotoOpened),
            ui(2.0, PinchZoom),
            ui(3.0, PinchZoom),
            ui(4.0, PhotoCaptured),
            ui(5.0, PhotoOpened),
            ui(6.0, PinchZoom),
        ]);
        let at: Vec<f64> = out.iter().map(|f| f.t).collect();
        assert_eq!(at, [2.0, 6.0]);
    }

    #[test]
    fn per_step_within_is_honored() {
        let mut p = magnifier();
        p.then[1] = SequenceStep {
            action: PinchZoom,
            within: 5.0,
        };
        let slow = vec![
            ui(0.0, PhotoCaptured),
            ui(10.0, PhotoOpened),
            ui(16.0, PinchZoom),
        ];
        assert!(detect_sequence(&Trace::new(slow, None).unwrap(), &p).is_empty());
        let quick = vec![
            ui(0.0, PhotoCaptured),
            ui(10.0, PhotoOpened),
            ui(15.0, PinchZoom),
        ];
        assert_eq!(
            detect_sequence(&Trace::new(quick, None).unwrap(), &p).len(),
            1
        );
    }

    #[test]
    fn deleting_any_step_removes_firing() {
        let full = vec![
            ui(0.0, PhotoCaptured),
            ui(10.0, PhotoOpened),
            ui(15.0, PinchZoom),
        ];
        for skip in 0..full.len() {
            let mut events = full.clone();
            events.remove(skip);
            assert!(run(events).is_empty(), "removed step {skip}");
        }
    }
}
