//! Accessibility feature catalog: which features exist, how they are
//! categorized, which detection strategies apply to them, and the
//! directional group implications used by the grouped detector.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_CATALOG: &str = include_str!("../data/default.catalog");

/// Symbolic identifier of an accessibility feature, a lowercase snake_case token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureId(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid feature id `{0}`: expected a lowercase snake_case token")]
pub struct InvalidFeatureId(pub String);

impl FeatureId {
    pub fn new(id: impl Into<String>) -> Result<Self, InvalidFeatureId> {
        let id = id.into();
        if is_feature_token(&id) {
            Ok(Self(id))
        } else {
            Err(InvalidFeatureId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Human-readable form: underscores become spaces.
    pub fn display_name(&self) -> String {
        self.0.replace('_', " ")
    }
}

pub(crate) fn is_feature_token(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for FeatureId {
    type Err = InvalidFeatureId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for FeatureId {
    type Error = InvalidFeatureId;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<FeatureId> for String {
    fn from(id: FeatureId) -> Self {
        id.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Vision,
    Hearing,
    PhysicalMotor,
    General,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Vision => "vision",
            Category::Hearing => "hearing",
            Category::PhysicalMotor => "physical_motor",
            Category::General => "general",
        }
    }
}

impl FromStr for Category {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "vision" => Ok(Category::Vision),
            "hearing" => Ok(Category::Hearing),
            "physical_motor" => Ok(Category::PhysicalMotor),
            "general" => Ok(Category::General),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Hardware-dependent, or needed before the device is usable at all.
    Required,
    Statistical,
    NearMiss,
    Sequence,
    Grouping,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Required => "required",
            Strategy::Statistical => "statistical",
            Strategy::NearMiss => "near_miss",
            Strategy::Sequence => "sequence",
            Strategy::Grouping => "grouping",
        }
    }
}

impl FromStr for Strategy {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "required" => Ok(Strategy::Required),
            "statistical" => Ok(Strategy::Statistical),
            "near_miss" => Ok(Strategy::NearMiss),
            "sequence" => Ok(Strategy::Sequence),
            "grouping" => Ok(Strategy::Grouping),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureEntry {
    pub feature: FeatureId,
    pub category: Category,
    pub strategies: BTreeSet<Strategy>,
    pub group: Option<u32>,
}

impl FeatureEntry {
    /// True when `required` is the only strategy; such features are never recommended.
    pub fn is_required_only(&self) -> bool {
        self.strategies.len() == 1 && self.strategies.contains(&Strategy::Required)
    }
}

/// Directional implication: enabling `antecedent` suggests `consequent`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupRule {
    pub antecedent: FeatureId,
    pub consequent: FeatureId,
}

impl GroupRule {
    pub fn new(antecedent: FeatureId, consequent: FeatureId) -> Self {
        Self {
            antecedent,
            consequent,
        }
    }

    /// Name used when this rule is reported alongside named rules.
    pub fn name(&self) -> String {
        format!("{}=>{}", self.antecedent, self.consequent)
    }
}

/// The three implications shipped with the grouped recommender.
pub fn default_group_rules() -> Vec<GroupRule> {
    [
        ("assistive_touch", "side_button"),
        ("closed_captioning", "type_to_siri"),
        ("bold_text", "larger_text"),
    ]
    .into_iter()
    .map(|(a, c)| GroupRule::new(FeatureId(a.into()), FeatureId(c.into())))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate feature id `{id}`")]
    DuplicateFeature { line: usize, id: FeatureId },
    #[error("line {line}: group rule references unknown feature `{id}`")]
    UnknownFeature { line: usize, id: FeatureId },
    #[error("line {line}: feature `{id}` cannot imply itself")]
    SelfImplication { line: usize, id: FeatureId },
    #[error("line {line}: duplicate group rule {rule}")]
    DuplicateRule { line: usize, rule: String },
    #[error("group {group} has only one member (`{id}`)")]
    SingletonGroup { group: u32, id: FeatureId },
}

/// Immutable feature catalog plus its group-implication table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureCatalog {
    entries: BTreeMap<FeatureId, FeatureEntry>,
    rules: Vec<GroupRule>,
}

impl FeatureCatalog {
    /// The shipped catalog: the features named by the four prototype recommenders
    /// and their group implications.
    pub fn shipped() -> Self {
        load_catalog(DEFAULT_CATALOG).expect("shipped catalog is valid")
    }

    pub fn get(&self, id: &FeatureId) -> Option<&FeatureEntry> {
        self.entries.get(id)
    }

    pub fn contains(&self, id: &FeatureId) -> bool {
        self.entries.contains_key(id)
    }

    /// Entries in id order.
    pub fn entries(&self) -> impl Iterator<Item = &FeatureEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn group_rules(&self) -> &[GroupRule] {
        &self.rules
    }
}

/// Parses a catalog document.
///
/// Each non-blank, non-comment line is either
/// `feature <id> category=<cat> strategies=<s1,s2,...> [group=<n>]` or
/// `group <antecedent> => <consequent>`. Group rules may reference features
/// declared later in the document.
pub fn load_catalog(source: &str) -> Result<FeatureCatalog, CatalogError> {
    let mut entries = BTreeMap::new();
    let mut pending_rules: Vec<(usize, GroupRule)> = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        match tokens[0] {
            "feature" => {
                let entry = parse_feature_line(line, &tokens[1..])?;
                if entries.contains_key(&entry.feature) {
                    return Err(CatalogError::DuplicateFeature {
                        line,
                        id: entry.feature,
                    });
                }
                entries.insert(entry.feature.clone(), entry);
            }
            "group" => {
                let [antecedent, "=>", consequent] = tokens[1..] else {
                    return Err(syntax(
                        line,
                        "expected `group <antecedent> => <consequent>`",
                    ));
                };
                let rule =
                    GroupRule::new(feature_id(line, antecedent)?, feature_id(line, consequent)?);
                if rule.antecedent == rule.consequent {
                    return Err(CatalogError::SelfImplication {
                        line,
                        id: rule.antecedent,
                    });
                }
                if pending_rules.iter().any(|(_, r)| *r == rule) {
                    return Err(CatalogError::DuplicateRule {
                        line,
                        rule: rule.name(),
                    });
                }
                pending_rules.push((line, rule));
            }
            other => {
                return Err(syntax(line, format!("unknown directive `{other}`")));
            }
        }
    }

    for (line, rule) in &pending_rules {
        for id in [&rule.antecedent, &rule.consequent] {
            if !entries.contains_key(id) {
                return Err(CatalogError::UnknownFeature {
                    line: *line,
                    id: id.clone(),
                });
            }
        }
    }

    let mut group_sizes: BTreeMap<u32, Vec<&FeatureId>> = BTreeMap::new();
    for entry in entries.values() {
        if let Some(g) = entry.group {
            group_sizes.entry(g).or_default().push(&entry.feature);
        }
    }
    if let Some((group, members)) = group_sizes.iter().find(|(_, m)| m.len() == 1) {
        return Err(CatalogError::SingletonGroup {
            group: *group,
            id: members[0].clone(),
        });
    }

    Ok(FeatureCatalog {
        entries,
        rules: pending_rules.into_iter().map(|(_, r)| r).collect(),
    })
}

fn syntax(line: usize, message: impl Into<String>) -> CatalogError {
    CatalogError::Syntax {
        line,
        message: message.into(),
    }
}

fn feature_id(line: usize, token: &str) -> Result<FeatureId, CatalogError> {
    FeatureId::new(token).map_err(|e| syntax(line, e.to_string()))
}

fn parse_feature_line(line: usize, tokens: &[&str]) -> Result<FeatureEntry, CatalogError> {
    let Some((id, attrs)) = tokens.split_first() else {
        return Err(syntax(line, "expected feature id"));
    };
    let feature = feature_id(line, id)?;
    let mut category = None;
    let mut strategies = None;
    let mut group = None;

    for attr in attrs {
        let Some((key, value)) = attr.split_once('=') else {
            return Err(syntax(line, format!("expected key=value, found `{attr}`")));
        };
        let seen = match key {
            "category" => category
                .replace(
                    value
                        .parse::<Category>()
                        .map_err(|_| syntax(line, format!("unknown category `{value}`")))?,
                )
                .is_some(),
            "strategies" => {
                let mut set = BTreeSet::new();
                for s in value.split(',') {
                    let strategy = s
                        .parse::<Strategy>()
                        .map_err(|_| syntax(line, format!("unknown strategy `{s}`")))?;
                    set.insert(strategy);
                }
                strategies.replace(set).is_some()
            }
            "group" => group
                .replace(value.parse::<u32>().map_err(|_| {
                    syntax(
                        line,
                        format!("group must be a non-negative integer, found `{value}`"),
                    )
                })?)
                .is_some(),
            _ => return Err(syntax(line, format!("unknown attribute `{key}`"))),
        };
        if seen {
            return Err(syntax(line, format!("attribute `{key}` given twice")));
        }
    }

    Ok(FeatureEntry {
        feature,
        category: category.ok_or_else(|| syntax(line, "missing category="))?,
        strategies: strategies.ok_or_else(|| syntax(line, "missing strategies="))?,
        group,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fid(s: &str) -> FeatureId {
        FeatureId::new(s).unwrap()
    }

    #[test]
    fn bold_text_implies_larger_text() {
        let doc = "feature bold_text category=vision strategies=grouping group=3\n\
                   feature larger_text category=vision strategies=statistical,grouping group=3\n\
                   group bold_text => larger_text\n";
        let catalog = load_catalog(doc).unwrap();
        assert_eq!(catalog.len(), 2);
        assert_eq!(
            catalog.group_rules(),
            &[GroupRule::new(fid("bold_text"), fid("larger_text"))]
        );
    }

    #[test]
    fn empty_document() {
        let catalog = load_catalog("").unwrap();
        assert!(catalog.is_empty());
        assert!(catalog.group_rules().is_empty());
        assert!(load_catalog("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn self_implication_rejected() {
        let doc = "feature bold_text category=vision strategies=grouping\n\
                   group bold_text => bold_text\n";
        assert!(matches!(
            load_catalog(doc),
            Err(CatalogError::SelfImplication { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_feature_names_the_id() {
        let doc = "feature zoom category=vision strategies=statistical\n\
                   feature zoom category=vision strategies=statistical\n";
        let err = load_catalog(doc).unwrap_err();
        assert!(err.to_string().contains("`zoom`"), "{err}");
    }

    #[test]
    fn unknown_feature_in_rule() {
        let doc = "feature bold_text category=vision strategies=grouping\n\
                   group bold_text => larger_text\n";
        assert!(matches!(
            load_catalog(doc),
            Err(CatalogError::UnknownFeature { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_rule_rejected() {
        let doc = "feature a category=vision strategies=grouping\n\
                   feature b category=vision strategies=grouping\n\
                   group a => b\ngroup a => b\n";
        assert!(matches!(
            load_catalog(doc),
            Err(CatalogError::DuplicateRule { line: 4, .. })
        ));
    }

    #[test]
    fn singleton_group_rejected() {
        let doc = "feature a category=vision strategies=grouping group=7\n";
        assert!(matches!(
            load_catalog(doc),
            Err(CatalogError::SingletonGroup { group: 7, .. })
        ));
    }

    #[test]
    fn malformed_lines() {
        for doc in [
            "feature",
            "feature a category=sight strategies=grouping",
            "feature a category=vision strategies=guessing",
            "feature a category=vision",
            "feature a strategies=grouping",
            "feature a category=vision strategies=grouping group=x",
            "feature a category=vision category=vision strategies=grouping",
            "feature A category=vision strategies=grouping",
            "group a -> b",
            "widget a",
        ] {
            assert!(load_catalog(doc).is_err(), "{doc}");
        }
    }

    #[test]
    fn default_group_rules_are_the_three_implications() {
        let rules = default_group_rules();
        assert_eq!(rules.len(), 3);
        assert!(rules.contains(&GroupRule::new(fid("assistive_touch"), fid("side_button"))));
        assert!(rules.contains(&GroupRule::new(
            fid("closed_captioning"),
            fid("type_to_siri")
        )));
        assert!(rules.contains(&GroupRule::new(fid("bold_text"), fid("larger_text"))));
    }

    #[test]
    fn shipped_catalog() {
        let catalog = FeatureCatalog::shipped();
        for id in [
            "larger_text",
            "subtitles_captions",
            "side_button_click_speed",
            "magnifier",
            "assistive_touch",
            "side_button",
            "type_to_siri",
            "bold_text",
            "closed_captioning",
            "zoom",
            "voice_over",
        ] {
            assert!(catalog.contains(&fid(id)), "{id}");
        }
        let mut shipped = catalog.group_rules().to_vec();
        let mut expected = default_group_rules();
        shipped.sort();
        expected.sort();
        assert_eq!(shipped, expected);
        assert!(catalog.get(&fid("voice_over")).unwrap().is_required_only());
    }

    #[test]
    fn loading_is_deterministic() {
        let src = DEFAULT_CATALOG;
        assert_eq!(load_catalog(src).unwrap(), load_catalog(src).unwrap());
    }

    #[test]
    fn feature_id_validation() {
        assert!(FeatureId::new("larger_text").is_ok());
        assert!(FeatureId::new("x2").is_ok());
        for bad in ["", "Larger", "2x", "_a", "a-b", "a b"] {
            assert!(FeatureId::new(bad).is_err(), "{bad}");
        }
        assert_eq!(fid("type_to_siri").display_name(), "type to siri");
    }
}
