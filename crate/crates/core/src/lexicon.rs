//! Vocabulary assets: social-group terms, emotion words and sentence templates.
//!
//! Assets are parsed from a single JSON document with the top-level keys
//! `groups`, `emotions` and `templates`. [`LexiconSet::from_json`] parses and
//! validates; after that the set is immutable and freely shareable.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Where an adjective-slot form sits relative to the head noun that follows
/// the `<group>` slot.
///
/// Clinical terms such as "depression" cannot stand before a noun; they render
/// as "a person with depression" instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    #[default]
    BeforeNoun,
    AfterNoun,
}

impl Placement {
    fn is_default(&self) -> bool {
        *self == Placement::BeforeNoun
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub id: String,
    pub canonical: String,
    /// Surface form used in "<group> person" position.
    pub adjective_form: String,
    /// Surface form used where a noun phrase is needed.
    pub noun_phrase_form: String,
    /// Owning group. Filled from the enclosing group when omitted in JSON.
    #[serde(default)]
    pub group_id: String,
    #[serde(default, skip_serializing_if = "Placement::is_default")]
    pub placement: Placement,
}

impl Term {
    pub fn form(&self, slot: SlotForm) -> &str {
        match slot {
            SlotForm::Adjective => &self.adjective_form,
            SlotForm::NounPhrase => &self.noun_phrase_form,
        }
    }

    /// Placement of the form used for `slot`. Noun phrases always replace the
    /// slot in place.
    pub fn placement_for(&self, slot: SlotForm) -> Placement {
        match slot {
            SlotForm::Adjective => self.placement,
            SlotForm::NounPhrase => Placement::BeforeNoun,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    Disability,
    NonDisability,
    NeutralAdjective,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLexicon {
    pub group_id: String,
    pub kind: GroupKind,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionLexicon {
    pub emotion: String,
    pub polarity: Polarity,
    #[serde(default)]
    pub emotional_words: Vec<String>,
    #[serde(default)]
    pub event_words: Vec<String>,
}

impl EmotionLexicon {
    pub fn words(&self, slot: WordSlot) -> &[String] {
        match slot {
            WordSlot::Emotional => &self.emotional_words,
            WordSlot::Event => &self.event_words,
        }
    }
}

/// Expected polarity for the built-in emotion category names. Custom
/// categories are not constrained.
fn expected_polarity(emotion: &str) -> Option<Polarity> {
    match emotion {
        "happy" | "surprise_pos" => Some(Polarity::Positive),
        "anger" | "disgust" | "fear" | "sad" | "surprise_neg" => Some(Polarity::Negative),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Neutral,
    SentimentHolding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotForm {
    Adjective,
    NounPhrase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub pattern: String,
    pub kind: TemplateKind,
    pub slot_form: SlotForm,
    /// The pattern with the group slot elided and articles repaired.
    #[serde(default)]
    pub control_pattern: String,
}

impl Template {
    /// The word slot (`<emotional word>` or `<event word>`) this template
    /// uses, if any. Unknown placeholders are ignored here.
    pub fn word_slot(&self) -> Option<WordSlot> {
        scan_placeholders(&self.pattern)
            .into_iter()
            .find_map(|p| match p {
                Ok(Placeholder::EmotionalWord) => Some(WordSlot::Emotional),
                Ok(Placeholder::EventWord) => Some(WordSlot::Event),
                _ => None,
            })
    }

    pub fn has_group_slot(&self) -> bool {
        self.pattern.contains(GROUP_PLACEHOLDER)
    }
}

pub const GROUP_PLACEHOLDER: &str = "<group>";
pub const EMOTIONAL_PLACEHOLDER: &str = "<emotional word>";
pub const EVENT_PLACEHOLDER: &str = "<event word>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Placeholder {
    Group,
    EmotionalWord,
    EventWord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordSlot {
    Emotional,
    Event,
}

impl WordSlot {
    pub fn placeholder(self) -> &'static str {
        match self {
            WordSlot::Emotional => EMOTIONAL_PLACEHOLDER,
            WordSlot::Event => EVENT_PLACEHOLDER,
        }
    }
}

/// Every `<...>` span in `pattern`, in order. `Err` carries the raw text of
/// an unrecognized or unterminated placeholder.
pub fn scan_placeholders(pattern: &str) -> Vec<Result<Placeholder, String>> {
    let mut out = Vec::new();
    let mut rest = pattern;
    while let Some(start) = rest.find('<') {
        let after = &rest[start + 1..];
        match after.find('>') {
            Some(end) => {
                let name = &after[..end];
                out.push(match name {
                    "group" => Ok(Placeholder::Group),
                    "emotional word" => Ok(Placeholder::EmotionalWord),
                    "event word" => Ok(Placeholder::EventWord),
                    other => Err(format!("<{other}>")),
                });
                rest = &after[end + 1..];
            }
            None => {
                out.push(Err(rest[start..].to_owned()));
                break;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationError {
    NoGroups,
    NoTemplates,
    DuplicateGroup(String),
    EmptyGroup(String),
    DuplicateTerm { group: String, term: String },
    TermGroupMismatch { group: String, term: String, declared: String },
    EmptySurfaceForm { group: String, term: String },
    DuplicateEmotion(String),
    PolarityMismatch(String),
    DuplicateTemplate(String),
    UnknownPlaceholder { template: String, placeholder: String },
    MissingControlPattern(String),
    ControlHasGroupSlot(String),
    MultipleWordSlots(String),
    KindMismatch(String),
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationError::*;
        match self {
            NoGroups => f.write_str("no groups defined"),
            NoTemplates => f.write_str("no templates defined"),
            DuplicateGroup(g) => write!(f, "duplicate group id {g:?}"),
            EmptyGroup(g) => write!(f, "group {g:?} has no terms"),
            DuplicateTerm { group, term } => write!(f, "duplicate term id {term:?} in group {group:?}"),
            TermGroupMismatch { group, term, declared } => write!(
                f,
                "term {term:?} is listed under group {group:?} but declares group {declared:?}"
            ),
            EmptySurfaceForm { group, term } => {
                write!(f, "term {term:?} in group {group:?} has an empty surface form")
            }
            DuplicateEmotion(e) => write!(f, "duplicate emotion category {e:?}"),
            PolarityMismatch(e) => write!(f, "emotion {e:?} has the wrong polarity"),
            DuplicateTemplate(t) => write!(f, "duplicate template id {t:?}"),
            UnknownPlaceholder { template, placeholder } => {
                write!(f, "template {template:?} uses unknown placeholder {placeholder:?}")
            }
            MissingControlPattern(t) => write!(f, "template {t:?} has no control_pattern"),
            ControlHasGroupSlot(t) => write!(f, "control_pattern of template {t:?} contains <group>"),
            MultipleWordSlots(t) => {
                write!(f, "template {t:?} uses more than one emotional/event word slot")
            }
            KindMismatch(t) => write!(f, "template {t:?} kind does not match its placeholders"),
        }
    }
}

impl core::error::Error for ValidationError {}

#[derive(Debug)]
pub enum LoadError {
    Parse(serde_json::Error),
    Validation(ValidationError),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Parse(e) => write!(f, "parse error: {e}"),
            LoadError::Validation(e) => write!(f, "validation error: {e}"),
        }
    }
}

impl core::error::Error for LoadError {}

impl From<ValidationError> for LoadError {
    fn from(e: ValidationError) -> Self {
        LoadError::Validation(e)
    }
}

/// The full vocabulary: groups, emotion categories and templates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconSet {
    pub groups: Vec<GroupLexicon>,
    pub emotions: Vec<EmotionLexicon>,
    pub templates: Vec<Template>,
}

impl LexiconSet {
    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        let mut set: LexiconSet = serde_json::from_str(text).map_err(LoadError::Parse)?;
        set.fill_group_ids();
        set.validate()?;
        Ok(set)
    }

    /// The shipped default configuration.
    pub fn default_set() -> Self {
        Self::from_json(crate::DEFAULT_LEXICON_JSON).expect("shipped lexicon is valid")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("lexicon serializes")
    }

    fn fill_group_ids(&mut self) {
        for group in &mut self.groups {
            for term in &mut group.terms {
                if term.group_id.is_empty() {
                    term.group_id = group.group_id.clone();
                }
            }
        }
    }

    pub fn group(&self, group_id: &str) -> Option<&GroupLexicon> {
        self.groups.iter().find(|g| g.group_id == group_id)
    }

    pub fn template(&self, template_id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == template_id)
    }

    pub fn term_count(&self) -> usize {
        self.groups.iter().map(|g| g.terms.len()).sum()
    }

    /// Checks every structural invariant. Group-free templates pass here;
    /// [`validate_coverage`] reports them.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.groups.is_empty() {
            return Err(ValidationError::NoGroups);
        }
        if self.templates.is_empty() {
            return Err(ValidationError::NoTemplates);
        }

        let mut group_ids = BTreeSet::new();
        for group in &self.groups {
            if !group_ids.insert(group.group_id.as_str()) {
                return Err(ValidationError::DuplicateGroup(group.group_id.clone()));
            }
            if group.terms.is_empty() {
                return Err(ValidationError::EmptyGroup(group.group_id.clone()));
            }
            let mut term_ids = BTreeSet::new();
            for term in &group.terms {
                if !term_ids.insert(term.id.as_str()) {
                    return Err(ValidationError::DuplicateTerm {
                        group: group.group_id.clone(),
                        term: term.id.clone(),
                    });
                }
                if term.group_id != group.group_id {
                    return Err(ValidationError::TermGroupMismatch {
                        group: group.group_id.clone(),
                        term: term.id.clone(),
                        declared: term.group_id.clone(),
                    });
                }
                if term.adjective_form.trim().is_empty() || term.noun_phrase_form.trim().is_empty() {
                    return Err(ValidationError::EmptySurfaceForm {
                        group: group.group_id.clone(),
                        term: term.id.clone(),
                    });
                }
            }
        }

        let mut emotions = BTreeSet::new();
        for emotion in &self.emotions {
            if !emotions.insert(emotion.emotion.as_str()) {
                return Err(ValidationError::DuplicateEmotion(emotion.emotion.clone()));
            }
            if let Some(expected) = expected_polarity(&emotion.emotion) {
                if expected != emotion.polarity {
                    return Err(ValidationError::PolarityMismatch(emotion.emotion.clone()));
                }
            }
        }

        let mut template_ids = BTreeSet::new();
        for template in &self.templates {
            if !template_ids.insert(template.id.as_str()) {
                return Err(ValidationError::DuplicateTemplate(template.id.clone()));
            }
            let mut word_slots = 0usize;
            for p in scan_placeholders(&template.pattern) {
                match p {
                    Ok(Placeholder::Group) => {}
                    Ok(_) => word_slots += 1,
                    Err(raw) => {
                        return Err(ValidationError::UnknownPlaceholder {
                            template: template.id.clone(),
                            placeholder: raw,
                        })
                    }
                }
            }
            if word_slots > 1 {
                return Err(ValidationError::MultipleWordSlots(template.id.clone()));
            }
            let expected_kind = if word_slots == 0 {
                TemplateKind::Neutral
            } else {
                TemplateKind::SentimentHolding
            };
            if expected_kind != template.kind {
                return Err(ValidationError::KindMismatch(template.id.clone()));
            }
            if template.control_pattern.trim().is_empty() {
                return Err(ValidationError::MissingControlPattern(template.id.clone()));
            }
            for p in scan_placeholders(&template.control_pattern) {
                match p {
                    Ok(Placeholder::Group) => {
                        return Err(ValidationError::ControlHasGroupSlot(template.id.clone()))
                    }
                    Ok(_) => {}
                    Err(raw) => {
                        return Err(ValidationError::UnknownPlaceholder {
                            template: template.id.clone(),
                            placeholder: raw,
                        })
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingCode {
    MissingGroupSlot,
    EmptySurfaceForm,
    UnsatisfiableSlot,
    UnknownPlaceholder,
    PlaceholderMismatch,
    EmptyGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    /// Template id or `group/term` the finding is about.
    pub subject: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has(&self, code: FindingCode) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }
}

/// Coverage checks that do not make a set invalid but make parts of it
/// useless: group-free templates, blank surface forms, word slots no emotion
/// category can fill, and placeholder disagreements between a template and
/// its control pattern.
pub fn validate_coverage(set: &LexiconSet) -> ValidationReport {
    let mut findings = Vec::new();

    for group in &set.groups {
        if group.terms.is_empty() {
            findings.push(Finding {
                code: FindingCode::EmptyGroup,
                subject: group.group_id.clone(),
                detail: "group has no terms".to_owned(),
            });
        }
        for term in &group.terms {
            for (name, form) in [
                ("adjective_form", &term.adjective_form),
                ("noun_phrase_form", &term.noun_phrase_form),
            ] {
                if form.trim().is_empty() {
                    findings.push(Finding {
                        code: FindingCode::EmptySurfaceForm,
                        subject: format!("{}/{}", group.group_id, term.id),
                        detail: format!("{name} is empty"),
                    });
                }
            }
        }
    }

    let has_emotional = set.emotions.iter().any(|e| !e.emotional_words.is_empty());
    let has_event = set.emotions.iter().any(|e| !e.event_words.is_empty());

    for template in &set.templates {
        let mut pattern_slots = BTreeSet::new();
        for p in scan_placeholders(&template.pattern) {
            match p {
                Ok(p) => {
                    pattern_slots.insert(p);
                }
                Err(raw) => findings.push(Finding {
                    code: FindingCode::UnknownPlaceholder,
                    subject: template.id.clone(),
                    detail: format!("pattern uses {raw}"),
                }),
            }
        }
        if !pattern_slots.contains(&Placeholder::Group) {
            findings.push(Finding {
                code: FindingCode::MissingGroupSlot,
                subject: template.id.clone(),
                detail: "pattern has no <group> slot".to_owned(),
            });
        }
        if pattern_slots.contains(&Placeholder::EmotionalWord) && !has_emotional {
            findings.push(Finding {
                code: FindingCode::UnsatisfiableSlot,
                subject: template.id.clone(),
                detail: "no emotion category provides emotional words".to_owned(),
            });
        }
        if pattern_slots.contains(&Placeholder::EventWord) && !has_event {
            findings.push(Finding {
                code: FindingCode::UnsatisfiableSlot,
                subject: template.id.clone(),
                detail: "no emotion category provides event words".to_owned(),
            });
        }

        let mut control_slots = BTreeSet::new();
        for p in scan_placeholders(&template.control_pattern) {
            match p {
                Ok(p) => {
                    control_slots.insert(p);
                }
                Err(raw) => findings.push(Finding {
                    code: FindingCode::UnknownPlaceholder,
                    subject: template.id.clone(),
                    detail: format!("control_pattern uses {raw}"),
                }),
            }
        }
        let mut expected = pattern_slots.clone();
        expected.remove(&Placeholder::Group);
        if control_slots != expected {
            findings.push(Finding {
                code: FindingCode::PlaceholderMismatch,
                subject: template.id.clone(),
                detail: "control_pattern word slots differ from pattern".to_owned(),
            });
        }
    }

    findings.sort_by(|a, b| (a.code, &a.subject).cmp(&(b.code, &b.subject)));
    ValidationReport { findings }
}
