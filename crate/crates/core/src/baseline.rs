//! Population baselines for the statistically monitored signals.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::{Payload, Trace};

/// Signals that carry a population baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    /// Viewing distance in meters.
    ViewingDistance,
    /// Output volume as a fraction in [0, 1], sampled only while audio plays.
    AudioVolume,
}

impl Signal {
    pub const ALL: [Signal; 2] = [Signal::ViewingDistance, Signal::AudioVolume];

    pub fn as_str(self) -> &'static str {
        match self {
            Signal::ViewingDistance => "viewing_distance",
            Signal::AudioVolume => "audio_volume",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|sig| sig.as_str() == s)
    }

    /// The signal's samples from a trace as `(t, value)`, in trace order.
    pub fn samples(self, trace: &Trace) -> impl Iterator<Item = (f64, f64)> + '_ {
        trace
            .events()
            .iter()
            .filter_map(move |e| match (self, &e.payload) {
                (Signal::ViewingDistance, Payload::ViewingDistance { meters }) => {
                    Some((e.t, *meters))
                }
                (
                    Signal::AudioVolume,
                    Payload::Audio {
                        playing: true,
                        volume,
                        ..
                    },
                ) => Some((e.t, *volume)),
                _ => None,
            })
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baseline {
    pub mean: f64,
    pub stddev: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("empty calibration: no viewing-distance or playing-audio samples")]
    EmptyCalibration,
    #[error("invalid baseline document: {0}")]
    Parse(String),
    #[error("invalid `{signal}` baseline: {message}")]
    Invariant { signal: Signal, message: String },
}

impl Baseline {
    pub fn new(mean: f64, stddev: f64, n: u64) -> Self {
        Self { mean, stddev, n }
    }

    fn check(&self) -> Result<(), String> {
        if !self.mean.is_finite() {
            return Err("mean must be finite".into());
        }
        if !(self.stddev.is_finite() && self.stddev >= 0.0) {
            return Err(format!(
                "stddev must be finite and >= 0, found {}",
                self.stddev
            ));
        }
        if self.n == 0 {
            return Err("n must be >= 1".into());
        }
        if self.n == 1 && self.stddev != 0.0 {
            return Err("stddev must be 0 when n == 1".into());
        }
        Ok(())
    }

    /// Mean and sample (n - 1) standard deviation of `samples`.
    ///
    /// Samples are summed in sorted order, so the result does not depend on
    /// their arrangement.
    pub fn from_samples(samples: &mut [f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stddev = if n == 1 {
            0.0
        } else {
            let mut sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
            sq.sort_by(f64::total_cmp);
            (sq.iter().sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Self {
            mean,
            stddev,
            n: n as u64,
        })
    }
}

/// At most one [`Baseline`] per signal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    viewing_distance: Option<Baseline>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audio_volume: Option<Baseline>,
}

impl BaselineSet {
    pub fn get(&self, signal: Signal) -> Option<&Baseline> {
        match signal {
            Signal::ViewingDistance => self.viewing_distance.as_ref(),
            Signal::AudioVolume => self.audio_volume.as_ref(),
        }
    }

    pub fn insert(&mut self, signal: Signal, baseline: Baseline) -> Result<(), BaselineError> {
        baseline
            .check()
            .map_err(|message| BaselineError::Invariant { signal, message })?;
        match signal {
            Signal::ViewingDistance => self.viewing_distance = Some(baseline),
            Signal::AudioVolume => self.audio_volume = Some(baseline),
        }
        Ok(())
    }

    pub fn with(mut self, signal: Signal, baseline: Baseline) -> Result<Self, BaselineError> {
        self.insert(signal, baseline)?;
        Ok(self)
    }

    pub fn entries(&self) -> BTreeMap<Signal, Baseline> {
        Signal::ALL
            .into_iter()
            .filter_map(|s| self.get(s).map(|b| (s, *b)))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.viewing_distance.is_none() && self.audio_volume.is_none()
    }
}

/// Pools every calibratable sample across `traces` and computes per-signal statistics.
pub fn calibrate<'a, I>(traces: I) -> Result<BaselineSet, BaselineError>
where
    I: IntoIterator<Item = &'a Trace>,
{
    let mut pooled: BTreeMap<Signal, Vec<f64>> = BTreeMap::new();
    for trace in traces {
        for signal in Signal::ALL {
            pooled
                .entry(signal)
                .or_default()
                .extend(signal.samples(trace).map(|(_, v)| v));
        }
    }

    let mut set = BaselineSet::default();
    for (signal, mut samples) in pooled {
        if let Some(baseline) = Baseline::from_samples(&mut samples) {
            set.insert(signal, baseline)?;
        }
    }
    if set.is_empty() {
        return Err(BaselineError::EmptyCalibration);
    }
    Ok(set)
}

/// Baselines measured in the original baseline study (10 participants):
/// viewing distance 0.36 m ± 0.049 m, listening volume 47.1% ± 16.3%.
pub fn paper_defaults() -> BaselineSet {
    BaselineSet {
        viewing_distance: Some(Baseline::new(0.36, 0.049, 10)),
        audio_volume: Some(Baseline::new(0.471, 0.163, 10)),
    }
}

/// Serializes to the baseline JSON document. Numbers are written in
/// shortest round-trip form, so [`load_baselines`] restores them exactly.
pub fn save_baselines(set: &BaselineSet) -> String {
    let mut s = serde_json::to_string_pretty(set).expect("baselines serialize");
    s.push('\n');
    s
}

pub fn load_baselines(document: &str) -> Result<BaselineSet, BaselineError> {
    let raw: BaselineSet =
        serde_json::from_str(document).map_err(|e| BaselineError::Parse(e.to_string()))?;
    let mut set = BaselineSet::default();
    for (signal, baseline) in raw.entries() {
        set.insert(signal, baseline)?;
    }
    Ok(set)
}
