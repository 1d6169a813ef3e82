//! Signal events, the trace container, and the line-delimited JSON trace format.
//!
//! A trace file holds one JSON object per line. Every event line carries a
//! numeric `t` (seconds since trace start) and a `kind`; the remaining fields
//! depend on the kind. An optional first line of the form
//! `{"meta":{"user_id":..,"session_id":..,"initial_settings":[..]}}` carries
//! trace metadata.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::catalog::FeatureId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioOutput {
    Speaker,
    Headphones,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Button {
    Side,
    Home,
    VolumeUp,
    VolumeDown,
}

impl Button {
    pub fn as_str(self) -> &'static str {
        match self {
            Button::Side => "side",
            Button::Home => "home",
            Button::VolumeUp => "volume_up",
            Button::VolumeDown => "volume_down",
        }
    }
}

impl FromStr for Button {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "side" => Ok(Button::Side),
            "home" => Ok(Button::Home),
            "volume_up" => Ok(Button::VolumeUp),
            "volume_down" => Ok(Button::VolumeDown),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UiActionKind {
    AppOpen,
    Screenshot,
    PhotoCaptured,
    PhotoOpened,
    PinchZoom,
    Other,
}

impl UiActionKind {
    pub const ALL: [UiActionKind; 6] = [
        UiActionKind::AppOpen,
        UiActionKind::Screenshot,
        UiActionKind::PhotoCaptured,
        UiActionKind::PhotoOpened,
        UiActionKind::PinchZoom,
        UiActionKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UiActionKind::AppOpen => "app_open",
            UiActionKind::Screenshot => "screenshot",
            UiActionKind::PhotoCaptured => "photo_captured",
            UiActionKind::PhotoOpened => "photo_opened",
            UiActionKind::PinchZoom => "pinch_zoom",
            UiActionKind::Other => "other",
        }
    }
}

impl FromStr for UiActionKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Self::ALL.into_iter().find(|a| a.as_str() == s).ok_or(())
    }
}

/// Observation carried by a [`SignalEvent`].
///
/// The serde representation is the wire format: internally tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    ViewingDistance {
        #[serde(rename = "m")]
        meters: f64,
    },
    Audio {
        playing: bool,
        volume: f64,
        output: AudioOutput,
    },
    Button {
        button: Button,
    },
    UiAction {
        action: UiActionKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        app: Option<String>,
    },
    Setting {
        feature: FeatureId,
        enabled: bool,
    },
}

impl Payload {
    pub fn kind(&self) -> SignalKind {
        match self {
            Payload::ViewingDistance { .. } => SignalKind::ViewingDistance,
            Payload::Audio { .. } => SignalKind::Audio,
            Payload::Button { .. } => SignalKind::Button,
            Payload::UiAction { .. } => SignalKind::UiAction,
            Payload::Setting { .. } => SignalKind::Setting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    ViewingDistance,
    Audio,
    Button,
    UiAction,
    Setting,
}

impl SignalKind {
    pub const ALL: [SignalKind; 5] = [
        SignalKind::ViewingDistance,
        SignalKind::Audio,
        SignalKind::Button,
        SignalKind::UiAction,
        SignalKind::Setting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::ViewingDistance => "viewing_distance",
            SignalKind::Audio => "audio",
            SignalKind::Button => "button",
            SignalKind::UiAction => "ui_action",
            SignalKind::Setting => "setting",
        }
    }

    fn fields(self) -> &'static [&'static str] {
        match self {
            SignalKind::ViewingDistance => &["m"],
            SignalKind::Audio => &["playing", "volume", "output"],
            SignalKind::Button => &["button"],
            SignalKind::UiAction => &["action", "app"],
            SignalKind::Setting => &["feature", "enabled"],
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignalKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEvent {
    pub t: f64,
    #[serde(flatten)]
    pub payload: Payload,
}

impl SignalEvent {
    pub fn new(t: f64, payload: Payload) -> Self {
        Self { t, payload }
    }

    pub fn kind(&self) -> SignalKind {
        self.payload.kind()
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(format!(
                "timestamp must be a finite number >= 0, found {}",
                self.t
            ));
        }
        match &self.payload {
            Payload::ViewingDistance { meters } if !(meters.is_finite() && *meters > 0.0) => {
                Err(format!("viewing distance must be > 0 m, found {meters}"))
            }
            Payload::Audio { volume, .. } if !(0.0..=1.0).contains(volume) => {
                Err(format!("volume must lie in [0, 1], found {volume}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    /// Features enabled before the first event.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_settings: Vec<FeatureId>,
}

/// Time-ordered, validated sequence of signal events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    events: Vec<SignalEvent>,
    meta: Option<TraceMeta>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("non-monotone timestamp at line {line}")]
    NonMonotone { line: usize },
}

impl TraceError {
    pub fn line(&self) -> usize {
        match self {
            TraceError::Invalid { line, .. } | TraceError::NonMonotone { line } => *line,
        }
    }
}

impl Trace {
    /// Builds a trace, checking field ranges and timestamp order. Error line
    /// numbers are 1-based event indices.
    pub fn new(events: Vec<SignalEvent>, meta: Option<TraceMeta>) -> Result<Self, TraceError> {
        let mut prev = f64::NEG_INFINITY;
        for (i, ev) in events.iter().enumerate() {
            ev.validate().map_err(|message| TraceError::Invalid {
                line: i + 1,
                message,
            })?;
            if ev.t < prev {
                return Err(TraceError::NonMonotone { line: i + 1 });
            }
            prev = ev.t;
        }
        Ok(Self { events, meta })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[SignalEvent] {
        &self.events
    }

    pub fn meta(&self) -> Option<&TraceMeta> {
        self.meta.as_ref()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn initial_settings(&self) -> &[FeatureId] {
        self.meta
            .as_ref()
            .map_or(&[], |m| m.initial_settings.as_slice())
    }

    /// First and last timestamps, if any events exist.
    pub fn time_range(&self) -> Option<(f64, f64)> {
        Some((self.events.first()?.t, self.events.last()?.t))
    }

    /// Events of one kind, in trace order.
    pub fn filter_signal(&self, kind: SignalKind) -> impl Iterator<Item = &SignalEvent> + '_ {
        self.events.iter().filter(move |e| e.kind() == kind)
    }

    /// Keeps only events strictly before `t`.
    pub fn prefix_before(&self, t: f64) -> Trace {
        Trace {
            events: self
                .events
                .iter()
                .take_while(|e| e.t < t)
                .cloned()
                .collect(),
            meta: self.meta.clone(),
        }
    }
}

/// Projection of a trace onto one signal kind; order and timestamps preserved.
pub fn filter_signal(trace: &Trace, kind: SignalKind) -> Vec<(f64, &Payload)> {
    trace
        .filter_signal(kind)
        .map(|e| (e.t, &e.payload))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Accept (and drop) fields the schema does not define.
    pub lenient: bool,
}

/// Parses a line-delimited JSON trace document. Blank lines are skipped;
/// reported line numbers refer to physical lines of the document.
pub fn parse_trace(source: &str, opts: ParseOptions) -> Result<Trace, TraceError> {
    let mut events = Vec::new();
    let mut meta = None;
    let mut seen_record = false;
    let mut prev_t = f64::NEG_INFINITY;

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() {
            continue;
        }
        let invalid = |message: String| TraceError::Invalid { line, message };
        let value: Value =
            serde_json::from_str(text).map_err(|e| invalid(format!("invalid JSON: {e}")))?;
        let Value::Object(mut obj) = value else {
            return Err(invalid("record must be a JSON object".into()));
        };

        if obj.contains_key("meta") && !obj.contains_key("kind") {
            if seen_record {
                return Err(invalid("meta record must be the first record".into()));
            }
            seen_record = true;
            meta = Some(parse_meta(obj, opts).map_err(invalid)?);
            continue;
        }
        seen_record = true;

        let event = parse_event(&mut obj, opts).map_err(invalid)?;
        event.validate().map_err(invalid)?;
        if event.t < prev_t {
            return Err(TraceError::NonMonotone { line });
        }
        prev_t = event.t;
        events.push(event);
    }

    Ok(Trace { events, meta })
}

fn parse_meta(mut obj: Map<String, Value>, opts: ParseOptions) -> Result<TraceMeta, String> {
    if obj.len() > 1 && !opts.lenient {
        let extra = obj
            .keys()
            .find(|k| *k != "meta")
            .cloned()
            .unwrap_or_default();
        return Err(format!("unknown field `{extra}`"));
    }
    let mut inner = obj.remove("meta").unwrap_or(Value::Null);
    if opts.lenient {
        if let Value::Object(m) = &mut inner {
            m.retain(|k, _| matches!(k.as_str(), "user_id" | "session_id" | "initial_settings"));
        }
    }
    serde_json::from_value(inner).map_err(|e| format!("invalid meta: {e}"))
}

fn parse_event(obj: &mut Map<String, Value>, opts: ParseOptions) -> Result<SignalEvent, String> {
    let kind = match obj.get("kind") {
        None => return Err("missing required field `kind`".into()),
        Some(Value::String(s)) => s
            .parse::<SignalKind>()
            .map_err(|_| format!("unknown kind `{s}`"))?,
        Some(_) => return Err("field `kind` must be a string".into()),
    };
    match obj.get("t") {
        None => return Err("missing required field `t`".into()),
        Some(Value::Number(_)) => {}
        Some(_) => return Err("field `t` must be a number".into()),
    }

    let allowed = kind.fields();
    let unknown: Vec<String> = obj
        .keys()
        .filter(|k| *k != "t" && *k != "kind" && !allowed.contains(&k.as_str()))
        .cloned()
        .collect();
    if let Some(first) = unknown.first() {
        if !opts.lenient {
            return Err(format!("unknown field `{first}` for kind `{kind}`"));
        }
        for k in &unknown {
            obj.remove(k);
        }
    }

    serde_json::from_value(Value::Object(std::mem::take(obj)))
        .map_err(|e| format!("invalid `{kind}` record: {e}"))
}

/// Canonical serialization: optional meta line, then one event per line,
/// each line newline-terminated. An empty trace without meta serializes to "".
pub fn serialize_trace(trace: &Trace) -> String {
    let mut out = String::new();
    if let Some(meta) = &trace.meta {
        out.push_str("{\"meta\":");
        out.push_str(&serde_json::to_string(meta).expect("meta serializes"));
        out.push_str("}\n");
    }
    for ev in &trace.events {
        out.push_str(&serde_json::to_string(ev).expect("events serialize"));
        out.push('\n');
    }
    out
}
