use crate::baseline::BaselineSet;
use crate::signals::Trace;

use super::{DetectError, Evidence, Firing, Sides, StatisticalRule};

/// Running-mean outlier test against a population baseline.
///
/// After each sample the user's mean so far is compared with the baseline
/// mean; once at least `min_samples` samples are in, the first sample at
/// which the deviation reaches `k_sigma` baseline standard deviations (in the
/// rule's direction) fires. A zero-spread baseline fires on any deviation.
/// At most one firing per trace.
pub fn detect_statistical(
    trace: &Trace,
    rule: &StatisticalRule,
    baselines: &BaselineSet,
) -> Result<Vec<Firing>, DetectError> {
    let baseline = baselines
        .get(rule.signal)
        .ok_or(DetectError::MissingBaseline(rule.signal))?;
    let threshold = rule.k_sigma * baseline.stddev;

    // incremental mean: a constant signal keeps a mean exactly equal to it
    let mut user_mean = 0.0;
    for (i, (t, value)) in rule.signal.samples(trace).enumerate() {
        let n = i as u64 + 1;
        user_mean += (value - user_mean) / n as f64;
        if n < rule.min_samples {
            continue;
        }
        let deviation = user_mean - baseline.mean;
        let hit = if baseline.stddev == 0.0 {
            match rule.sides {
                Sides::Above => deviation > 0.0,
                Sides::Below => deviation < 0.0,
                Sides::Both => deviation != 0.0,
            }
        } else {
            match rule.sides {
                Sides::Above => deviation >= threshold,
                Sides::Below => -deviation >= threshold,
                Sides::Both => deviation.abs() >= threshold,
            }
        };
        if hit {
            return Ok(vec![Firing {
                feature: rule.recommend.clone(),
                t,
                rule: rule.name.clone(),
                evidence: Evidence::Statistical {
                    user_mean,
                    baseline_mean: baseline.mean,
                    baseline_stddev: baseline.stddev,
                    n,
                },
            }]);
        }
    }
    Ok(Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{paper_defaults, Baseline, Signal};
    use crate::detectors::test_support::*;
    use crate::signals::SignalEvent;
    use proptest::prelude::*;

    fn font_rule(sides: Sides) -> StatisticalRule {
        StatisticalRule::new(
            "font_size",
            Signal::ViewingDistance,
            sides,
            fid("larger_text"),
        )
    }

    fn volume_rule() -> StatisticalRule {
        StatisticalRule::new(
            "subtitles",
            Signal::AudioVolume,
            Sides::Above,
            fid("subtitles_captions"),
        )
    }

    fn distances(values: &[f64]) -> Trace {
        Trace::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &m)| distance(i as f64, m))
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn no_deviation_no_firing() {
        let out = detect_statistical(
            &distances(&[0.36; 30]),
            &font_rule(Sides::Both),
            &paper_defaults(),
        );
        assert!(out.unwrap().is_empty());
    }

    #[test]
    fn far_distance_fires_at_thirtieth_sample() {
        // 0.50 - 0.36 = 0.14 >= 2 * 0.049 = 0.098
        let out = detect_statistical(
            &distances(&[0.50; 30]),
            &font_rule(Sides::Both),
            &paper_defaults(),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].t, 29.0);
        let Evidence::Statistical { n, user_mean, .. } = out[0].evidence else {
            panic!()
        };
        assert_eq!(n, 30);
        assert!((user_mean - 0.50).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples_never_fire() {
        let out = detect_statistical(
            &distances(&[0.50; 29]),
            &font_rule(Sides::Both),
            &paper_defaults(),
        );
        assert!(out.unwrap().is_empty());
    }

    #[test]
    fn loud_volume_fires_only_while_playing() {
        let loud: Vec<SignalEvent> = (0..30).map(|i| audio(i as f64, 0.85, true)).collect();
        let out = detect_statistical(
            &Trace::new(loud, None).unwrap(),
            &volume_rule(),
            &paper_defaults(),
        );
        assert_eq!(out.unwrap().len(), 1);

        let paused: Vec<SignalEvent> = (0..30).map(|i| audio(i as f64, 0.85, false)).collect();
        let out = detect_statistical(
            &Trace::new(paused, None).unwrap(),
            &volume_rule(),
            &paper_defaults(),
        );
        assert!(out.unwrap().is_empty());
    }

    #[test]
    fn sides_respected() {
        let close = distances(&[0.20; 30]);
        let far = distances(&[0.50; 30]);
        let d = paper_defaults();
        assert_eq!(
            detect_statistical(&close, &font_rule(Sides::Below), &d)
                .unwrap()
                .len(),
            1
        );
        assert!(detect_statistical(&close, &font_rule(Sides::Above), &d)
            .unwrap()
            .is_empty());
        assert!(detect_statistical(&far, &font_rule(Sides::Below), &d)
            .unwrap()
            .is_empty());
        assert_eq!(
            detect_statistical(&close, &font_rule(Sides::Both), &d)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn zero_spread_baseline() {
        let b = BaselineSet::default()
            .with(Signal::ViewingDistance, Baseline::new(0.4, 0.0, 5))
            .unwrap();
        let mut rule = font_rule(Sides::Above);
        rule.min_samples = 1;
        assert!(detect_statistical(&distances(&[0.4; 5]), &rule, &b)
            .unwrap()
            .is_empty());
        assert_eq!(
            detect_statistical(&distances(&[0.41]), &rule, &b)
                .unwrap()
                .len(),
            1
        );
        assert!(detect_statistical(&distances(&[0.39]), &rule, &b)
            .unwrap()
            .is_empty());
        rule.sides = Sides::Both;
        assert_eq!(
            detect_statistical(&distances(&[0.39]), &rule, &b)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn missing_baseline() {
        let err = detect_statistical(&Trace::empty(), &volume_rule(), &BaselineSet::default());
        assert_eq!(err, Err(DetectError::MissingBaseline(Signal::AudioVolume)));
    }

    #[test]
    fn running_mean_fires_at_first_crossing() {
        // 30 samples at the mean, then 0.60: running mean after n samples with
        // m extra is 0.36 + 0.24*m/n; it reaches 0.458 once 0.24*m >= 0.098*n.
        let mut values = vec![0.36; 30];
        values.extend([0.60; 40]);
        let mut rule = font_rule(Sides::Both);
        rule.min_samples = 1;
        let out = detect_statistical(&distances(&values), &rule, &paper_defaults()).unwrap();
        let brute = (1..=values.len())
            .find(|&n| {
                let mean = values[..n].iter().sum::<f64>() / n as f64;
                (mean - 0.36).abs() >= 2.0 * 0.049
            })
            .unwrap();
        assert_eq!(out[0].t, (brute - 1) as f64);
    }

    proptest! {
        #[test]
        fn monotone_in_k(
            values in proptest::collection::vec(0.05f64..1.0, 1..80),
            k1 in 0.1f64..4.0,
            dk in 0.0f64..3.0,
            min_samples in 1u64..20,
        ) {
            let trace = distances(&values);
            let mut rule = font_rule(Sides::Both);
            rule.min_samples = min_samples;
            rule.k_sigma = k1 + dk;
            let strict = detect_statistical(&trace, &rule, &paper_defaults()).unwrap();
            rule.k_sigma = k1;
            let loose = detect_statistical(&trace, &rule, &paper_defaults()).unwrap();
            if let Some(f2) = strict.first() {
                let f1 = loose.first().expect("smaller k must also fire");
                prop_assert!(f1.t <= f2.t);
            }
        }

        #[test]
        fn prefix_consistent(values in proptest::collection::vec(0.05f64..1.0, 1..80), cut in 0usize..80) {
            let mut rule = font_rule(Sides::Both);
            rule.min_samples = 5;
            let full = detect_statistical(&distances(&values), &rule, &paper_defaults()).unwrap();
            if let Some(f) = full.first() {
                let cut = cut.max(f.t as usize + 1).min(values.len());
                let part = detect_statistical(&distances(&values[..cut]), &rule, &paper_defaults()).unwrap();
                prop_assert_eq!(part, full);
            }
        }
    }
}
