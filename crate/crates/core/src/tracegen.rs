//! Seeded synthetic traces for exercising the detectors without human data.
//!
//! Randomness comes from ChaCha8 seeded with the spec's `seed`, so a given
//! spec always produces the same trace with this implementation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::FeatureId;
use crate::signals::{AudioOutput, Button, Payload, SignalEvent, Trace, UiActionKind};

/// Lower clip for generated viewing distances (meters).
pub const MIN_DISTANCE: f64 = 0.01;
/// Lower clip for generated inter-press gaps (seconds).
pub const MIN_CLICK_GAP: f64 = 0.001;
/// Gap between the steps of a generated photo/zoom workaround (seconds).
pub const WORKAROUND_STEP_GAP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceProfile {
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeProfile {
    pub mean: f64,
    pub stddev: f64,
    pub playing_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClickProfile {
    pub mean: f64,
    pub stddev: f64,
    pub attempts: u32,
}

/// Behavior of a simulated user. Omitted signal blocks produce no events of that kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<DistanceProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<VolumeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub click_gap: Option<ClickProfile>,
    #[serde(default)]
    pub magnifier_workaround: bool,
    #[serde(default)]
    pub enable_events: Vec<(f64, FeatureId)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("invalid profile: {0}")]
    Parse(String),
    #[error("invalid profile: {0}")]
    Invalid(String),
}

impl UserProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let bad = |m: &str| Err(ProfileError::Invalid(m.into()));
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if let Some(d) = &self.distance {
            if !d.mean.is_finite() || !finite_nonneg(d.stddev) {
                return bad("distance mean must be finite and stddev >= 0");
            }
        }
        if let Some(v) = &self.volume {
            if !v.mean.is_finite() || !finite_nonneg(v.stddev) {
                return bad("volume mean must be finite and stddev >= 0");
            }
            if !(0.0..=1.0).contains(&v.playing_prob) {
                return bad("playing_prob must lie in [0, 1]");
            }
        }
        if let Some(c) = &self.click_gap {
            if !c.mean.is_finite() || !finite_nonneg(c.stddev) {
                return bad("click_gap mean must be finite and stddev >= 0");
            }
        }
        if self.enable_events.iter().any(|(t, _)| !finite_nonneg(*t)) {
            return bad("enable_events times must be finite and >= 0");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        let profile: Self =
            serde_json::from_str(text).map_err(|e| ProfileError::Parse(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub profile: UserProfile,
    pub seed: u64,
    pub duration: f64,
    pub sample_interval: f64,
}

impl GenSpec {
    pub fn new(profile: UserProfile, seed: u64, duration: f64) -> Self {
        Self {
            profile,
            seed,
            duration,
            sample_interval: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        self.profile.validate()?;
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(ProfileError::Invalid("duration must be >= 0".into()));
        }
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return Err(ProfileError::Invalid("sample_interval must be > 0".into()));
        }
        Ok(())
    }
}

fn normal(mean: f64, stddev: f64) -> Normal<f64> {
    Normal::new(mean, stddev).expect("validated parameters")
}

/// Generates a trace for `spec`.
///
/// Distance and audio samples are taken every `sample_interval` seconds in
/// `[0, duration)`. Click attempts and the workaround start at uniformly
/// random times; enable events at or before `duration` are copied as-is.
pub fn generate(spec: &GenSpec) -> Result<Trace, ProfileError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = &spec.profile;
    let mut events = Vec::new();

    let sample_times: Vec<f64> = (0u64..)
        .map(|k| k as f64 * spec.sample_interval)
        .take_while(|&t| t < spec.duration)
        .collect();

    if let Some(d) = &p.distance {
        let dist = normal(d.mean, d.stddev);
        for &t in &sample_times {
            let meters = dist.sample(&mut rng).max(MIN_DISTANCE);
            events.push(SignalEvent::new(t, Payload::ViewingDistance { meters }));
        }
    }

    if let Some(v) = &p.volume {
        let dist = normal(v.mean, v.stddev);
        for &t in &sample_times {
            let playing = rng.random_bool(v.playing_prob);
            let volume = dist.sample(&mut rng).clamp(0.0, 1.0);
            events.push(SignalEvent::new(
                t,
                Payload::Audio {
                    playing,
                    volume,
                    output: AudioOutput::Speaker,
                },
            ));
        }
    }

    if spec.duration > 0.0 {
        if let Some(c) = &p.click_gap {
            let gap = normal(c.mean, c.stddev);
            for _ in 0..c.attempts {
                let start = rng.random_range(0.0..spec.duration);
                let second = start + gap.sample(&mut rng).max(MIN_CLICK_GAP);
                for t in [start, second] {
                    events.push(SignalEvent::new(
                        t,
                        Payload::Button {
                            button: Button::Side,
                        },
                    ));
                }
            }
        }

        if p.magnifier_workaround {
            let latest = (spec.duration - 2.0 * WORKAROUND_STEP_GAP).max(0.0);
            let start = if latest > 0.0 {
                rng.random_range(0.0..latest)
            } else {
                0.0
            };
            let steps = [
                UiActionKind::PhotoCaptured,
                UiActionKind::PhotoOpened,
                UiActionKind::PinchZoom,
            ];
            for (i, action) in steps.into_iter().enumerate() {
                events.push(SignalEvent::new(
                    start + i as f64 * WORKAROUND_STEP_GAP,
                    Payload::UiAction { action, app: None },
                ));
            }
        }
    }

    for (t, feature) in &p.enable_events {
        if *t <= spec.duration {
            events.push(SignalEvent::new(
                *t,
                Payload::Setting {
                    feature: feature.clone(),
                    enabled: true,
                },
            ));
        }
    }

    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(Trace::new(events, None).expect("generated events satisfy trace invariants"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{paper_defaults, Signal};
    use crate::detectors::{detect_statistical, Sides, StatisticalRule};
    use crate::signals::{parse_trace, serialize_trace, ParseOptions, SignalKind};
    use proptest::prelude::*;

    fn fid(s: &str) -> FeatureId {
        FeatureId::new(s).unwrap()
    }

    fn distance_profile(mean: f64, stddev: f64) -> UserProfile {
        UserProfile {
            distance: Some(DistanceProfile { mean, stddev }),
            ..Default::default()
        }
    }

    #[test]
    fn zero_duration() {
        let mut p = distance_profile(0.4, 0.05);
        p.magnifier_workaround = true;
        p.click_gap = Some(ClickProfile {
            mean: 0.3,
            stddev: 0.1,
            attempts: 4,
        });
        assert!(generate(&GenSpec::new(p.clone(), 1, 0.0))
            .unwrap()
            .is_empty());

        p.enable_events = vec![(0.0, fid("bold_text")), (5.0, fid("zoom"))];
        let trace = generate(&GenSpec::new(p, 1, 0.0)).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(
            trace.events()[0].payload,
            Payload::Setting {
                feature: fid("bold_text"),
                enabled: true
            }
        );
    }

    #[test]
    fn same_seed_same_bytes() {
        let p = UserProfile {
            distance: Some(DistanceProfile {
                mean: 0.3,
                stddev: 0.05,
            }),
            volume: Some(VolumeProfile {
                mean: 0.5,
                stddev: 0.2,
                playing_prob: 0.7,
            }),
            click_gap: Some(ClickProfile {
                mean: 0.3,
                stddev: 0.1,
                attempts: 5,
            }),
            magnifier_workaround: true,
            enable_events: vec![(3.0, fid("bold_text"))],
        };
        let a = serialize_trace(&generate(&GenSpec::new(p.clone(), 42, 300.0)).unwrap());
        let b = serialize_trace(&generate(&GenSpec::new(p.clone(), 42, 300.0)).unwrap());
        assert_eq!(a, b);
        let c = serialize_trace(&generate(&GenSpec::new(p, 43, 300.0)).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn far_user_fires_font_size() {
        let trace = generate(&GenSpec::new(distance_profile(0.50, 0.01), 7, 100.0)).unwrap();
        let samples: Vec<f64> = Signal::ViewingDistance
            .samples(&trace)
            .map(|(_, v)| v)
            .collect();
        assert_eq!(samples.len(), 100);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!((0.47..=0.53).contains(&mean), "{mean}");
        let rule = StatisticalRule::new(
            "font_size",
            Signal::ViewingDistance,
            Sides::Both,
            fid("larger_text"),
        );
        assert_eq!(
            detect_statistical(&trace, &rule, &paper_defaults())
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn counts_by_kind() {
        let p = UserProfile {
            volume: Some(VolumeProfile {
                mean: 0.5,
                stddev: 0.2,
                playing_prob: 1.0,
            }),
            click_gap: Some(ClickProfile {
                mean: 0.3,
                stddev: 0.0,
                attempts: 3,
            }),
            magnifier_workaround: true,
            ..Default::default()
        };
        let trace = generate(&GenSpec {
            sample_interval: 0.5,
            ..GenSpec::new(p, 9, 60.0)
        })
        .unwrap();
        assert_eq!(trace.filter_signal(SignalKind::Audio).count(), 120);
        assert_eq!(trace.filter_signal(SignalKind::Button).count(), 6);
        assert_eq!(trace.filter_signal(SignalKind::UiAction).count(), 3);
        assert_eq!(trace.filter_signal(SignalKind::ViewingDistance).count(), 0);
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut p = distance_profile(0.4, -1.0);
        assert!(generate(&GenSpec::new(p.clone(), 0, 10.0)).is_err());
        p.distance = None;
        p.volume = Some(VolumeProfile {
            mean: 0.5,
            stddev: 0.1,
            playing_prob: 1.5,
        });
        assert!(generate(&GenSpec::new(p, 0, 10.0)).is_err());
        let ok = distance_profile(0.4, 0.1);
        assert!(generate(&GenSpec::new(ok.clone(), 0, -1.0)).is_err());
        assert!(generate(&GenSpec {
            sample_interval: 0.0,
            ..GenSpec::new(ok, 0, 1.0)
        })
        .is_err());
    }

    #[test]
    fn profile_json() {
        let text = r#"{"distance":{"mean":0.3,"stddev":0.04},"enable_events":[[2.5,"bold_text"]]}"#;
        let p = UserProfile::from_json(text).unwrap();
        assert_eq!(p.enable_events, vec![(2.5, fid("bold_text"))]);
        assert!(!p.magnifier_workaround);
        assert!(UserProfile::from_json(r#"{"distance":{"mean":0.3}}"#).is_err());
        assert!(UserProfile::from_json(r#"{"speed":1}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn generated_traces_reparse(
            seed in any::<u64>(),
            duration in 0.0f64..120.0,
            dmean in -0.5f64..1.0,
            vmean in -0.5f64..1.5,
            attempts in 0u32..10,
            workaround in any::<bool>(),
        ) {
            let p = UserProfile {
                distance: Some(DistanceProfile { mean: dmean, stddev: 0.2 }),
                volume: Some(VolumeProfile { mean: vmean, stddev: 0.3, playing_prob: 0.5 }),
                click_gap: Some(ClickProfile { mean: 0.2, stddev: 0.3, attempts }),
                magnifier_workaround: workaround,
                enable_events: vec![(duration / 2.0, fid("zoom"))],
            };
            let trace = generate(&GenSpec::new(p, seed, duration)).unwrap();
            let text = serialize_trace(&trace);
            prop_assert_eq!(parse_trace(&text, ParseOptions::default()).unwrap(), trace);
        }
    }
}
