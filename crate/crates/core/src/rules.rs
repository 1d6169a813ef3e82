//! Declarative rules language.
//!
//! ```text
//! config    := { stmt } ;
//! stmt      := statrule | nmrule | seqrule | grouprule ;
//! statrule  := "statistical" NAME "signal" SIGNAL "sides" SIDES "k" NUM
//!              "min_samples" INT "recommend" FEATURE ;
//! nmrule    := "nearmiss" NAME "button" BUTTON "ladder" NUM NUM NUM
//!              ["level" LEVEL] ["min_count" INT] "recommend" FEATURE ;
//! seqrule   := "sequence" NAME ":" STEP { "->" STEP } "window" NUM "recommend" FEATURE ;
//! STEP      := ACTION ["within" NUM] ;
//! grouprule := "group" FEATURE "=>" FEATURE ;
//! ```
//!
//! Tokens are separated by whitespace (`:`, `->` and `=>` also delimit);
//! `#` starts a comment that runs to the end of the line.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::baseline::Signal;
use crate::catalog::{default_group_rules, is_feature_token, FeatureId, GroupRule};
use crate::detectors::{
    ClickLevel, Ladder, NearMissRule, RuleSet, SequencePattern, SequenceStep, Sides,
    StatisticalRule,
};
use crate::signals::{Button, UiActionKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RulesErrorKind {
    Syntax {
        expected: Vec<String>,
        found: String,
    },
    Semantic(String),
    Encoding,
}

/// A diagnostic anchored at a 1-based line and column (columns count characters).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct RulesError {
    pub line: usize,
    pub column: usize,
    pub kind: RulesErrorKind,
}

impl RulesError {
    pub fn is_semantic(&self) -> bool {
        matches!(self.kind, RulesErrorKind::Semantic(_))
    }

    fn semantic(pos: Pos, message: impl Into<String>) -> Self {
        Self {
            line: pos.line,
            column: pos.column,
            kind: RulesErrorKind::Semantic(message.into()),
        }
    }
}

impl fmt::Display for RulesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.line, self.column)?;
        match &self.kind {
            RulesErrorKind::Syntax { expected, found } => match expected.as_slice() {
                [one] => write!(f, "expected {one}, found {found}"),
                many => write!(f, "expected one of {}, found {found}", many.join(", ")),
            },
            RulesErrorKind::Semantic(message) => f.write_str(message),
            RulesErrorKind::Encoding => f.write_str("invalid UTF-8"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(String),
    Colon,
    Arrow,
    Implies,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Implies => f.write_str("`=>`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, RulesError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut column) = (0, 1, 1);

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column };
        let start = i;
        match c {
            '\n' => {
                i += 1;
                line += 1;
                column = 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                column += 1;
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            ':' => {
                i += 1;
                toks.push((Tok::Colon, pos));
            }
            '-' | '=' if chars.get(i + 1) == Some(&'>') => {
                i += 2;
                toks.push((if c == '-' { Tok::Arrow } else { Tok::Implies }, pos));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Word(chars[start..i].iter().collect()), pos));
            }
            c if c.is_ascii_digit() => {
                let digits = |i: &mut usize| {
                    let from = *i;
                    while *i < chars.len() && chars[*i].is_ascii_digit() {
                        *i += 1;
                    }
                    *i > from
                };
                digits(&mut i);
                if chars.get(i) == Some(&'.') {
                    i += 1;
                    if !digits(&mut i) {
                        return Err(bad_number(pos, &chars[start..i]));
                    }
                }
                if matches!(chars.get(i), Some('e' | 'E')) {
                    i += 1;
                    if matches!(chars.get(i), Some('+' | '-')) {
                        i += 1;
                    }
                    if !digits(&mut i) {
                        return Err(bad_number(pos, &chars[start..i]));
                    }
                }
                if i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    return Err(bad_number(pos, &chars[start..=i]));
                }
                toks.push((Tok::Number(chars[start..i].iter().collect()), pos));
            }
            other => {
                return Err(RulesError {
                    line,
                    column,
                    kind: RulesErrorKind::Syntax {
                        expected: vec!["a keyword, name, number, `:`, `->` or `=>`".into()],
                        found: format!("character {other:?}"),
                    },
                });
            }
        }
        column += i - start;
    }
    toks.push((Tok::Eof, Pos { line, column }));
    Ok(toks)
}

fn bad_number(pos: Pos, text: &[char]) -> RulesError {
    RulesError {
        line: pos.line,
        column: pos.column,
        kind: RulesErrorKind::Syntax {
            expected: vec!["a number".into()],
            found: format!("`{}`", text.iter().collect::<String>()),
        },
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, Pos) {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let tok = self.toks[self.at].clone();
        if tok.0 != Tok::Eof {
            self.at += 1;
        }
        tok
    }

    fn unexpected<T>(&self, expected: &[&str]) -> Result<T, RulesError> {
        let (tok, pos) = self.peek();
        Err(RulesError {
            line: pos.line,
            column: pos.column,
            kind: RulesErrorKind::Syntax {
                expected: expected.iter().map(|s| s.to_string()).collect(),
                found: tok.to_string(),
            },
        })
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().0, Tok::Word(w) if w == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, RulesError> {
        if self.at_keyword(kw) {
            Ok(self.bump().1)
        } else {
            self.unexpected(&[&format!("`{kw}`")])
        }
    }

    fn punct(&mut self, want: Tok) -> Result<Pos, RulesError> {
        if self.peek().0 == want {
            Ok(self.bump().1)
        } else {
            self.unexpected(&[&want.to_string()])
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, Pos), RulesError> {
        match self.peek().0.clone() {
            Tok::Word(w) => Ok((w, self.bump().1)),
            _ => self.unexpected(&[what]),
        }
    }

    fn number(&mut self) -> Result<(f64, Pos), RulesError> {
        match self.peek().0.clone() {
            Tok::Number(n) => {
                let pos = self.bump().1;
                let value: f64 = n.parse().expect("lexer only produces valid numbers");
                if !value.is_finite() {
                    return Err(RulesError::semantic(
                        pos,
                        format!("number {n} is out of range"),
                    ));
                }
                Ok((value, pos))
            }
            _ => self.unexpected(&["a number"]),
        }
    }

    fn integer(&mut self) -> Result<(u64, Pos), RulesError> {
        match self.peek().0.clone() {
            Tok::Number(n) if n.bytes().all(|b| b.is_ascii_digit()) => {
                let pos = self.bump().1;
                let value = n.parse().map_err(|_| {
                    RulesError::semantic(pos, format!("integer {n} is out of range"))
                })?;
                Ok((value, pos))
            }
            _ => self.unexpected(&["an integer"]),
        }
    }

    fn choice<T>(
        &mut self,
        what: &str,
        lookup: impl Fn(&str) -> Option<T>,
    ) -> Result<T, RulesError> {
        let (w, pos) = self.word(what)?;
        lookup(&w).ok_or_else(|| RulesError::semantic(pos, format!("unknown {what} `{w}`")))
    }

    fn feature(&mut self) -> Result<FeatureId, RulesError> {
        let (w, pos) = self.word("a feature id")?;
        if !is_feature_token(&w) {
            return Err(RulesError::semantic(
                pos,
                format!("invalid feature id `{w}`"),
            ));
        }
        Ok(FeatureId::new(w).expect("checked token"))
    }

    fn statistical(&mut self) -> Result<StatisticalRule, RulesError> {
        let (name, _) = self.word("a rule name")?;
        self.keyword("signal")?;
        let signal = self.choice("signal", Signal::parse)?;
        self.keyword("sides")?;
        let sides = self.choice("sides", Sides::parse)?;
        self.keyword("k")?;
        let (k_sigma, k_pos) = self.number()?;
        if k_sigma <= 0.0 {
            return Err(RulesError::semantic(k_pos, "k must be > 0"));
        }
        self.keyword("min_samples")?;
        let (min_samples, m_pos) = self.integer()?;
        if min_samples == 0 {
            return Err(RulesError::semantic(m_pos, "min_samples must be >= 1"));
        }
        self.keyword("recommend")?;
        let recommend = self.feature()?;
        Ok(StatisticalRule {
            name,
            signal,
            sides,
            k_sigma,
            min_samples,
            recommend,
        })
    }

    fn near_miss(&mut self) -> Result<NearMissRule, RulesError> {
        let (name, _) = self.word("a rule name")?;
        self.keyword("button")?;
        let button = self.choice("button", |s| s.parse::<Button>().ok())?;
        let ladder_pos = self.keyword("ladder")?;
        let ladder = Ladder {
            default: self.number()?.0,
            slow: self.number()?.0,
            slowest: self.number()?.0,
        };
        if !ladder.is_strictly_increasing() {
            return Err(RulesError::semantic(
                ladder_pos,
                "ladder must be strictly increasing (0 < default < slow < slowest)",
            ));
        }
        let mut current_level = ClickLevel::Default;
        if self.at_keyword("level") {
            self.bump();
            current_level = self.choice("level", ClickLevel::parse)?;
        }
        let mut min_count = 1;
        if self.at_keyword("min_count") {
            self.bump();
            let (count, pos) = self.integer()?;
            if count == 0 {
                return Err(RulesError::semantic(pos, "min_count must be >= 1"));
            }
            min_count = count;
        } else if !self.at_keyword("recommend") {
            return self.unexpected(&["`level`", "`min_count`", "`recommend`"]);
        }
        self.keyword("recommend")?;
        let recommend = self.feature()?;
        Ok(NearMissRule {
            name,
            button,
            ladder,
            current_level,
            min_count,
            recommend,
        })
    }

    fn sequence(&mut self) -> Result<SequencePattern, RulesError> {
        let (name, _) = self.word("a rule name")?;
        self.punct(Tok::Colon)?;
        let action = |p: &mut Self| p.choice("action", |s| s.parse::<UiActionKind>().ok());
        let first = action(self)?;
        if self.at_keyword("within") {
            let pos = self.bump().1;
            return Err(RulesError::semantic(
                pos,
                "the first step cannot have `within`",
            ));
        }
        let mut then = Vec::new();
        let mut withins = Vec::new();
        while self.peek().0 == Tok::Arrow {
            self.bump();
            let action = action(self)?;
            let mut within = SequencePattern::DEFAULT_WITHIN;
            if self.at_keyword("within") {
                self.bump();
                let (w, pos) = self.number()?;
                if w <= 0.0 {
                    return Err(RulesError::semantic(pos, "within must be > 0"));
                }
                withins.push((w, pos));
                within = w;
            }
            then.push(SequenceStep { action, within });
        }
        if then.is_empty() {
            return self.unexpected(&["`->`"]);
        }
        if !self.at_keyword("window") {
            return self.unexpected(&["`->`", "`within`", "`window`"]);
        }
        self.bump();
        let (window, window_pos) = self.number()?;
        if window <= 0.0 {
            return Err(RulesError::semantic(window_pos, "window must be > 0"));
        }
        if let Some((w, pos)) = withins.iter().find(|(w, _)| *w > window) {
            return Err(RulesError::semantic(
                *pos,
                format!("within {w} exceeds window {window}"),
            ));
        }
        if SequencePattern::DEFAULT_WITHIN > window && withins.len() < then.len() {
            return Err(RulesError::semantic(
                window_pos,
                format!(
                    "window {window} is shorter than the default step gap {}",
                    SequencePattern::DEFAULT_WITHIN
                ),
            ));
        }
        self.keyword("recommend")?;
        let recommend = self.feature()?;
        Ok(SequencePattern {
            name,
            first,
            then,
            window,
            recommend,
        })
    }

    fn group(&mut self, pos: Pos) -> Result<GroupRule, RulesError> {
        let antecedent = self.feature()?;
        self.punct(Tok::Implies)?;
        let consequent = self.feature()?;
        if antecedent == consequent {
            return Err(RulesError::semantic(
                pos,
                format!("`{antecedent}` cannot imply itself"),
            ));
        }
        Ok(GroupRule::new(antecedent, consequent))
    }
}

/// Parses a rules document into a [`RuleSet`].
pub fn parse_rules(text: &str) -> Result<RuleSet, RulesError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
    };
    let mut statistical = Vec::new();
    let mut near_miss = Vec::new();
    let mut sequences = Vec::new();
    let mut groups = Vec::new();
    let mut names = BTreeSet::new();
    let mut pairs = BTreeSet::new();

    loop {
        let (tok, pos) = p.peek().clone();
        let Tok::Word(kw) = tok else {
            if tok == Tok::Eof {
                break;
            }
            return p.unexpected(&["`statistical`", "`nearmiss`", "`sequence`", "`group`"]);
        };
        let name_pos = p.toks[p.at + 1].1;
        let name = match kw.as_str() {
            "statistical" => {
                p.bump();
                let rule = p.statistical()?;
                let name = rule.name.clone();
                statistical.push(rule);
                Some(name)
            }
            "nearmiss" => {
                p.bump();
                let rule = p.near_miss()?;
                let name = rule.name.clone();
                near_miss.push(rule);
                Some(name)
            }
            "sequence" => {
                p.bump();
                let rule = p.sequence()?;
                let name = rule.name.clone();
                sequences.push(rule);
                Some(name)
            }
            "group" => {
                p.bump();
                let rule = p.group(pos)?;
                if !pairs.insert(rule.clone()) {
                    return Err(RulesError::semantic(
                        pos,
                        format!("duplicate group rule {}", rule.name()),
                    ));
                }
                groups.push(rule);
                None
            }
            _ => return p.unexpected(&["`statistical`", "`nearmiss`", "`sequence`", "`group`"]),
        };
        if let Some(name) = name {
            if !names.insert(name.clone()) {
                return Err(RulesError::semantic(
                    name_pos,
                    format!("duplicate rule name `{name}`"),
                ));
            }
        }
    }

    RuleSet::new(statistical, near_miss, sequences, groups)
        .map_err(|e| RulesError::semantic(Pos { line: 1, column: 1 }, e.to_string()))
}

/// Parses raw bytes, reporting invalid UTF-8 at the offending position.
pub fn parse_rules_bytes(bytes: &[u8]) -> Result<RuleSet, RulesError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_rules(text),
        Err(e) => {
            let valid = std::str::from_utf8(&bytes[..e.valid_up_to()]).expect("valid prefix");
            let line = valid.matches('\n').count() + 1;
            let column = valid.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            Err(RulesError {
                line,
                column,
                kind: RulesErrorKind::Encoding,
            })
        }
    }
}

/// Canonical text: one rule per line in canonical order, every clause spelled out.
pub fn print_rules(rules: &RuleSet) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    for r in rules.statistical() {
        let _ = writeln!(
            out,
            "statistical {} signal {} sides {} k {} min_samples {} recommend {}",
            r.name,
            r.signal,
            r.sides.as_str(),
            r.k_sigma,
            r.min_samples,
            r.recommend
        );
    }
    for r in rules.near_miss() {
        let _ = writeln!(
            out,
            "nearmiss {} button {} ladder {} {} {} level {} min_count {} recommend {}",
            r.name,
            r.button.as_str(),
            r.ladder.default,
            r.ladder.slow,
            r.ladder.slowest,
            r.current_level.as_str(),
            r.min_count,
            r.recommend
        );
    }
    for r in rules.sequences() {
        let _ = write!(out, "sequence {}: {}", r.name, r.first.as_str());
        for step in &r.then {
            let _ = write!(out, " -> {} within {}", step.action.as_str(), step.within);
        }
        let _ = writeln!(out, " window {} recommend {}", r.window, r.recommend);
    }
    for g in rules.groups() {
        let _ = writeln!(out, "group {} => {}", g.antecedent, g.consequent);
    }
    out
}

/// The four prototype recommenders plus the shipped group implications.
pub fn default_rules() -> RuleSet {
    let fid = |s: &str| FeatureId::new(s).expect("static id");
    RuleSet::new(
        vec![
            StatisticalRule::new(
                "font_size",
                Signal::ViewingDistance,
                Sides::Both,
                fid("larger_text"),
            ),
            StatisticalRule::new(
                "subtitles",
                Signal::AudioVolume,
                Sides::Above,
                fid("subtitles_captions"),
            ),
        ],
        vec![NearMissRule::new(
            "side_click",
            Button::Side,
            fid("side_button_click_speed"),
        )],
        vec![SequencePattern::new(
            "magnifier",
            &[
                UiActionKind::PhotoCaptured,
                UiActionKind::PhotoOpened,
                UiActionKind::PinchZoom,
            ],
            fid("magnifier"),
        )],
        default_group_rules(),
    )
    .expect("default rules are valid")
}
