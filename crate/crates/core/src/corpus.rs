//! Counterfactual corpus construction.
//!
//! Two sources feed a corpus. Templates are instantiated with every group
//! term in identical contexts, and each context gets one control sentence
//! with the group slot elided. Natural documents are perturbed by replacing
//! each seed mention ("disabled", "disability") with every group term, again
//! paired with a control that drops the mention.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lexicon::{
    GroupLexicon, LexiconSet, Placement, SlotForm, Template, Term, WordSlot, GROUP_PLACEHOLDER,
};
use crate::text::{capitalize_first, find_word_spans, next_word, repair_article_at, repair_spacing};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Template,
    Natural,
}

/// One rendered sentence with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceInstance {
    pub sentence_id: String,
    pub text: String,
    pub origin: Origin,
    pub template_id: Option<String>,
    /// Absent for control sentences.
    pub group_id: Option<String>,
    pub term_id: Option<String>,
    pub slot_word: Option<String>,
    pub emotion: Option<String>,
    /// Id of the paired control; equal to `sentence_id` for controls.
    pub control_id: String,
    pub source_doc: Option<String>,
}

impl SentenceInstance {
    pub fn is_control(&self) -> bool {
        self.group_id.is_none() && self.term_id.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaturalDocument {
    pub doc_id: String,
    pub text: String,
    pub source: String,
}

impl NaturalDocument {
    pub fn new(
        doc_id: impl Into<String>,
        text: impl Into<String>,
        source: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let doc = NaturalDocument { doc_id: doc_id.into(), text: text.into(), source: source.into() };
        if doc.text.trim().is_empty() {
            return Err(CorpusError::EmptyDocument(doc.doc_id));
        }
        Ok(doc)
    }
}

/// Which term surface form fills the `<group>` slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormPolicy {
    /// Use each template's declared `slot_form`.
    #[default]
    TemplateDeclared,
    ForceAdjective,
    ForceNounPhrase,
}

impl FormPolicy {
    fn resolve(self, declared: SlotForm) -> SlotForm {
        match self {
            FormPolicy::TemplateDeclared => declared,
            FormPolicy::ForceAdjective => SlotForm::Adjective,
            FormPolicy::ForceNounPhrase => SlotForm::NounPhrase,
        }
    }
}

/// Generation options. The default is the full cross-product.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Template ids to instantiate, or all when `None`.
    #[serde(default)]
    pub templates: Option<Vec<String>>,
    /// Group ids to instantiate, or all when `None`.
    #[serde(default)]
    pub groups: Option<Vec<String>>,
    /// Keep at most this many emotional (and event) words per emotion.
    #[serde(default)]
    pub words_per_emotion: Option<usize>,
    /// With `words_per_emotion`, sample the kept words with this seed instead
    /// of taking the first ones.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub form_policy: FormPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    UnknownTemplate(String),
    UnknownGroup(String),
    UnsatisfiableSlot { template: String, slot: WordSlot },
    EmptyDocument(String),
    DuplicateId(String),
    ControlMismatch(String),
    MissingControl { sentence_id: String, control_id: String },
    ResidualPlaceholder(String),
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use CorpusError::*;
        match self {
            UnknownTemplate(t) => write!(f, "unknown template {t:?}"),
            UnknownGroup(g) => write!(f, "unknown group {g:?}"),
            UnsatisfiableSlot { template, slot } => write!(
                f,
                "template {template:?} needs {} but the lexicon provides none",
                slot.placeholder()
            ),
            EmptyDocument(d) => write!(f, "document {d:?} is empty"),
            DuplicateId(id) => write!(f, "duplicate sentence_id {id:?}"),
            ControlMismatch(id) => {
                write!(f, "control sentence {id:?} must have no group/term and control_id = sentence_id")
            }
            MissingControl { sentence_id, control_id } => {
                write!(f, "sentence {sentence_id:?} references missing control {control_id:?}")
            }
            ResidualPlaceholder(id) => write!(f, "sentence {id:?} still contains a placeholder"),
        }
    }
}

impl core::error::Error for CorpusError {}

fn hex(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push(DIGITS[(b >> 4) as usize] as char);
        s.push(DIGITS[(b & 0xf) as usize] as char);
    }
    s
}

/// Full SHA-256 of `bytes` as lowercase hex.
pub fn content_fingerprint(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn short_id(prefix: &str, parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0x1f]);
    }
    let digest = hasher.finalize();
    format!("{prefix}-{}", hex(&digest[..8]))
}

/// Replaces the byte span `span` of `text` with `replacement`, moving it after
/// the following word when `placement` asks for it, then repairs the article
/// in front. An empty replacement elides the span.
fn splice(text: &str, span: (usize, usize), replacement: &str, placement: Placement) -> String {
    let (start, end) = span;
    let at_start = text[..start].trim().is_empty();
    if replacement.is_empty() && at_start {
        return capitalize_first(text[end..].trim_start());
    }
    let spliced = if replacement.is_empty() {
        format!("{}{}", &text[..start], &text[end..])
    } else {
        match (placement, next_word(text, end)) {
            (Placement::AfterNoun, Some((ws, we))) => {
                let head = if at_start { capitalize_first(&text[ws..we]) } else { text[ws..we].to_string() };
                format!("{}{} {}{}", &text[..start], head, replacement, &text[we..])
            }
            _ => {
                let replacement =
                    if at_start { capitalize_first(replacement) } else { replacement.to_string() };
                format!("{}{}{}", &text[..start], replacement, &text[end..])
            }
        }
    };
    repair_article_at(&spliced, start)
}

fn fill_word_slot(text: &str, slot: WordSlot, word: &str) -> String {
    match text.find(slot.placeholder()) {
        Some(start) => {
            let span = (start, start + slot.placeholder().len());
            splice(text, span, word, Placement::BeforeNoun)
        }
        None => text.to_string(),
    }
}

fn fill_group_slot(text: &str, term: &Term, form: SlotForm) -> String {
    match text.find(GROUP_PLACEHOLDER) {
        Some(start) => {
            let span = (start, start + GROUP_PLACEHOLDER.len());
            splice(text, span, term.form(form), term.placement_for(form))
        }
        None => text.to_string(),
    }
}

/// Renders `template` for one term (or the control when `term` is `None`)
/// with an optional slot word.
pub fn render_template(
    template: &Template,
    term: Option<&Term>,
    word: Option<&str>,
    policy: FormPolicy,
) -> String {
    let base = match term {
        Some(_) => template.pattern.as_str(),
        None => template.control_pattern.as_str(),
    };
    let mut text = base.to_string();
    if let (Some(slot), Some(word)) = (template.word_slot(), word) {
        text = fill_word_slot(&text, slot, word);
    }
    if let Some(term) = term {
        text = fill_group_slot(&text, term, policy.resolve(template.slot_form));
    }
    repair_spacing(&text)
}

/// One slot-word choice: `(emotion, word)`, or `None` for neutral templates.
type SlotChoice<'a> = Option<(&'a str, &'a str)>;

struct Selection<'a> {
    templates: Vec<&'a Template>,
    groups: Vec<&'a GroupLexicon>,
    words: BTreeMap<WordSlot, Vec<(&'a str, &'a str)>>,
}

fn select<'a>(set: &'a LexiconSet, config: &GenConfig) -> Result<Selection<'a>, CorpusError> {
    let templates = match &config.templates {
        None => set.templates.iter().collect(),
        Some(ids) => {
            let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
            for id in &wanted {
                if set.template(id).is_none() {
                    return Err(CorpusError::UnknownTemplate(id.to_string()));
                }
            }
            set.templates.iter().filter(|t| wanted.contains(t.id.as_str())).collect()
        }
    };
    let groups = match &config.groups {
        None => set.groups.iter().collect(),
        Some(ids) => {
            let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
            for id in &wanted {
                if set.group(id).is_none() {
                    return Err(CorpusError::UnknownGroup(id.to_string()));
                }
            }
            set.groups.iter().filter(|g| wanted.contains(g.group_id.as_str())).collect()
        }
    };

    let mut rng = config.seed.map(ChaCha8Rng::seed_from_u64);
    let mut words = BTreeMap::new();
    for slot in [WordSlot::Emotional, WordSlot::Event] {
        let mut chosen = Vec::new();
        for emotion in &set.emotions {
            let pool = emotion.words(slot);
            let keep = config.words_per_emotion.unwrap_or(pool.len()).min(pool.len());
            let mut picked: Vec<&str> = pool.iter().map(String::as_str).collect();
            if keep < pool.len() {
                if let Some(rng) = rng.as_mut() {
                    picked.shuffle(rng);
                }
                picked.truncate(keep);
                // Keep lexicon order among the sampled words.
                picked.sort_by_key(|w| pool.iter().position(|p| p == w));
            }
            chosen.extend(picked.into_iter().map(|w| (emotion.emotion.as_str(), w)));
        }
        words.insert(slot, chosen);
    }
    Ok(Selection { templates, groups, words })
}

impl<'a> Selection<'a> {
    fn choices(&self, template: &Template) -> Result<Vec<SlotChoice<'a>>, CorpusError> {
        match template.word_slot() {
            None => Ok(alloc::vec![None]),
            Some(slot) => {
                let words = &self.words[&slot];
                if words.is_empty() {
                    return Err(CorpusError::UnsatisfiableSlot { template: template.id.clone(), slot });
                }
                Ok(words.iter().map(|&(e, w)| Some((e, w))).collect())
            }
        }
    }
}

/// Closed-form instance counts for a generation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCounts {
    /// Template × slot-word contexts, one control each.
    pub controls: usize,
    pub perturbed: usize,
}

impl CorpusCounts {
    pub fn total(&self) -> usize {
        self.controls + self.perturbed
    }
}

/// Counts computed from the sizes of the selected assets alone:
/// `controls = Σ_t choices(t)` and `perturbed = controls × terms`.
pub fn expected_counts(set: &LexiconSet, config: &GenConfig) -> Result<CorpusCounts, CorpusError> {
    let selection = select(set, config)?;
    let terms: usize = selection.groups.iter().map(|g| g.terms.len()).sum();
    let mut controls = 0;
    for template in &selection.templates {
        controls += match template.word_slot() {
            None => 1,
            Some(slot) => {
                let n = selection.words[&slot].len();
                if n == 0 {
                    return Err(CorpusError::UnsatisfiableSlot { template: template.id.clone(), slot });
                }
                n
            }
        };
    }
    Ok(CorpusCounts { controls, perturbed: controls * terms })
}

/// Instantiates every selected template against every selected term.
///
/// Output order is template, then slot word, then the control followed by
/// each group's terms in lexicon order. Sentence ids are content hashes of
/// the template, group, term and slot word, so they are stable across runs.
pub fn instantiate_templates(
    set: &LexiconSet,
    config: &GenConfig,
) -> Result<Vec<SentenceInstance>, CorpusError> {
    let selection = select(set, config)?;
    let mut out = Vec::new();
    for template in &selection.templates {
        for choice in selection.choices(template)? {
            let (emotion, word) = match choice {
                Some((e, w)) => (Some(e), Some(w)),
                None => (None, None),
            };
            let word_key = word.unwrap_or("");
            let control_id = short_id("t", &[&template.id, "", "", word_key]);
            out.push(SentenceInstance {
                sentence_id: control_id.clone(),
                text: render_template(template, None, word, config.form_policy),
                origin: Origin::Template,
                template_id: Some(template.id.clone()),
                group_id: None,
                term_id: None,
                slot_word: word.map(str::to_string),
                emotion: emotion.map(str::to_string),
                control_id: control_id.clone(),
                source_doc: None,
            });
            for group in &selection.groups {
                for term in &group.terms {
                    out.push(SentenceInstance {
                        sentence_id: short_id("t", &[&template.id, &group.group_id, &term.id, word_key]),
                        text: render_template(template, Some(term), word, config.form_policy),
                        origin: Origin::Template,
                        template_id: Some(template.id.clone()),
                        group_id: Some(group.group_id.clone()),
                        term_id: Some(term.id.clone()),
                        slot_word: word.map(str::to_string),
                        emotion: emotion.map(str::to_string),
                        control_id: control_id.clone(),
                        source_doc: None,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// A word to look for in natural text and the term form that replaces it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTerm {
    pub word: String,
    pub form: SlotForm,
}

impl SeedTerm {
    pub fn new(word: impl Into<String>, form: SlotForm) -> Self {
        SeedTerm { word: word.into(), form }
    }

    /// "disabled" takes adjective forms, "disability" noun-phrase forms.
    pub fn defaults() -> Vec<SeedTerm> {
        alloc::vec![
            SeedTerm::new("disability", SlotForm::NounPhrase),
            SeedTerm::new("disabled", SlotForm::Adjective),
        ]
    }
}

/// Perturbs each seed occurrence in `doc` independently: one variant per term
/// of every group plus one control with the mention removed. A leading `#`
/// stays in place for substitutions and is dropped with the mention in the
/// control. Documents without seed matches give an empty result.
pub fn perturb_document(
    doc: &NaturalDocument,
    seeds: &[SeedTerm],
    groups: &[GroupLexicon],
) -> Vec<SentenceInstance> {
    let mut occurrences: Vec<(usize, usize, SlotForm)> = seeds
        .iter()
        .flat_map(|seed| {
            find_word_spans(&doc.text, &seed.word)
                .into_iter()
                .map(move |(s, e)| (s, e, seed.form))
        })
        .collect();
    occurrences.sort_by_key(|&(s, e, _)| (s, core::cmp::Reverse(e)));
    let mut last_end = 0;
    occurrences.retain(|&(s, e, _)| {
        let keep = s >= last_end;
        if keep {
            last_end = e;
        }
        keep
    });

    let mut out = Vec::new();
    for (index, &(start, end, form)) in occurrences.iter().enumerate() {
        let occurrence = index.to_string();
        let hashtag = doc.text[..start].ends_with('#');
        let matched_upper = doc.text[start..].chars().next().is_some_and(char::is_uppercase);

        let control_start = if hashtag { start - 1 } else { start };
        let control_text =
            repair_spacing(&splice(&doc.text, (control_start, end), "", Placement::BeforeNoun));
        let control_id = short_id("n", &[&doc.doc_id, &occurrence, "", ""]);
        out.push(SentenceInstance {
            sentence_id: control_id.clone(),
            text: control_text,
            origin: Origin::Natural,
            template_id: None,
            group_id: None,
            term_id: None,
            slot_word: None,
            emotion: None,
            control_id: control_id.clone(),
            source_doc: Some(doc.doc_id.clone()),
        });

        for group in groups {
            for term in &group.terms {
                let mut replacement = term.form(form).to_string();
                if matched_upper {
                    replacement = capitalize_first(&replacement);
                }
                let placement = if hashtag { Placement::BeforeNoun } else { term.placement_for(form) };
                let text = repair_spacing(&splice(&doc.text, (start, end), &replacement, placement));
                out.push(SentenceInstance {
                    sentence_id: short_id("n", &[&doc.doc_id, &occurrence, &group.group_id, &term.id]),
                    text,
                    origin: Origin::Natural,
                    template_id: None,
                    group_id: Some(group.group_id.clone()),
                    term_id: Some(term.id.clone()),
                    slot_word: None,
                    emotion: None,
                    control_id: control_id.clone(),
                    source_doc: Some(doc.doc_id.clone()),
                });
            }
        }
    }
    out
}

fn has_residual_placeholder(instance: &SentenceInstance) -> bool {
    match instance.origin {
        Origin::Template => instance.text.find('<').is_some_and(|i| instance.text[i..].contains('>')),
        Origin::Natural => [
            crate::lexicon::GROUP_PLACEHOLDER,
            crate::lexicon::EMOTIONAL_PLACEHOLDER,
            crate::lexicon::EVENT_PLACEHOLDER,
        ]
        .iter()
        .any(|p| instance.text.contains(p)),
    }
}

/// Checks the corpus-level invariants: unique ids, well-formed controls,
/// resolvable control links and no leftover placeholders.
pub fn validate_instances(instances: &[SentenceInstance]) -> Result<(), CorpusError> {
    let mut ids = BTreeSet::new();
    let mut controls = BTreeSet::new();
    for inst in instances {
        if !ids.insert(inst.sentence_id.as_str()) {
            return Err(CorpusError::DuplicateId(inst.sentence_id.clone()));
        }
        let half_control = inst.group_id.is_none() != inst.term_id.is_none();
        if half_control || (inst.is_control() && inst.control_id != inst.sentence_id) {
            return Err(CorpusError::ControlMismatch(inst.sentence_id.clone()));
        }
        if inst.is_control() {
            controls.insert(inst.sentence_id.as_str());
        }
        if has_residual_placeholder(inst) {
            return Err(CorpusError::ResidualPlaceholder(inst.sentence_id.clone()));
        }
    }
    for inst in instances.iter().filter(|i| !i.is_control()) {
        if inst.control_id == inst.sentence_id || !controls.contains(inst.control_id.as_str()) {
            return Err(CorpusError::MissingControl {
                sentence_id: inst.sentence_id.clone(),
                control_id: inst.control_id.clone(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::TemplateKind;
    use alloc::vec;

    fn term(id: &str, adj: &str, noun: &str, placement: Placement) -> Term {
        Term {
            id: id.into(),
            canonical: id.into(),
            adjective_form: adj.into(),
            noun_phrase_form: noun.into(),
            group_id: "G".into(),
            placement,
        }
    }

    fn t3() -> Template {
        Template {
            id: "T3".into(),
            pattern: "I have a <group> friend.".into(),
            kind: TemplateKind::Neutral,
            slot_form: SlotForm::Adjective,
            control_pattern: "I have a friend.".into(),
        }
    }

    #[test]
    fn t3_blind_and_control() {
        let blind = term("blind", "blind", "blindness", Placement::BeforeNoun);
        let policy = FormPolicy::TemplateDeclared;
        assert_eq!(render_template(&t3(), Some(&blind), None, policy), "I have a blind friend.");
        assert_eq!(render_template(&t3(), None, None, policy), "I have a friend.");
    }

    #[test]
    fn article_follows_term() {
        let autistic = term("autistic", "autistic", "autism", Placement::BeforeNoun);
        assert_eq!(
            render_template(&t3(), Some(&autistic), None, FormPolicy::TemplateDeclared),
            "I have an autistic friend."
        );
    }

    #[test]
    fn after_noun_placement() {
        let depression = term("depression", "with depression", "depression", Placement::AfterNoun);
        assert_eq!(
            render_template(&t3(), Some(&depression), None, FormPolicy::TemplateDeclared),
            "I have a friend with depression."
        );
        let t9 = Template {
            id: "T9".into(),
            pattern: "They conversed about the <group> child, which <emotional word> them.".into(),
            kind: TemplateKind::SentimentHolding,
            slot_form: SlotForm::Adjective,
            control_pattern: "They conversed about the child, which <emotional word> them.".into(),
        };
        assert_eq!(
            render_template(&t9, Some(&depression), Some("alarmed"), FormPolicy::TemplateDeclared),
            "They conversed about the child with depression, which alarmed them."
        );
        assert_eq!(
            render_template(&t9, None, Some("alarmed"), FormPolicy::TemplateDeclared),
            "They conversed about the child, which alarmed them."
        );
    }

    #[test]
    fn event_word_repairs_article() {
        let set = LexiconSet::default_set();
        let t10 = set.template("T10").unwrap();
        let blind = &set.group("PWD:SD").unwrap().terms[4];
        assert_eq!(
            render_template(t10, Some(blind), Some("alarming"), FormPolicy::TemplateDeclared),
            "The blind person was in an alarming situation."
        );
        assert_eq!(
            render_template(t10, None, Some("dreadful"), FormPolicy::TemplateDeclared),
            "The person was in a dreadful situation."
        );
    }

    #[test]
    fn neutral_only_counts() {
        let set = LexiconSet::default_set();
        let config = GenConfig {
            templates: Some(vec!["T1".into(), "T2".into(), "T3".into(), "T4".into(), "T5".into()]),
            ..Default::default()
        };
        let corpus = instantiate_templates(&set, &config).unwrap();
        let controls = corpus.iter().filter(|i| i.is_control()).count();
        assert_eq!(controls, 5);
        assert_eq!(corpus.len() - controls, 100);
        assert_eq!(expected_counts(&set, &config).unwrap(), CorpusCounts { controls: 5, perturbed: 100 });
    }

    #[test]
    fn full_default_counts_match_enumeration() {
        let set = LexiconSet::default_set();
        let config = GenConfig::default();
        let corpus = instantiate_templates(&set, &config).unwrap();
        // Brute force: walk templates and tally by hand.
        let mut controls = 0;
        for t in &set.templates {
            controls += match t.word_slot() {
                None => 1,
                Some(slot) => set.emotions.iter().map(|e| e.words(slot).len()).sum(),
            };
        }
        assert_eq!(controls, 110);
        assert_eq!(corpus.iter().filter(|i| i.is_control()).count(), controls);
        assert_eq!(corpus.len(), controls * 21);
        assert_eq!(expected_counts(&set, &config).unwrap().total(), corpus.len());
        validate_instances(&corpus).unwrap();
    }

    #[test]
    fn sampling_is_seeded_and_counted() {
        let set = LexiconSet::default_set();
        let config = GenConfig { words_per_emotion: Some(2), seed: Some(7), ..Default::default() };
        let a = instantiate_templates(&set, &config).unwrap();
        let b = instantiate_templates(&set, &config).unwrap();
        assert_eq!(a, b);
        let counts = expected_counts(&set, &config).unwrap();
        assert_eq!(counts, CorpusCounts { controls: 5 + 5 * 14, perturbed: (5 + 5 * 14) * 20 });
        assert_eq!(a.len(), counts.total());
        let first_k = GenConfig { words_per_emotion: Some(2), ..Default::default() };
        let c = instantiate_templates(&set, &first_k).unwrap();
        assert!(c.iter().all(|i| i.slot_word.as_deref() != Some("outraged")));
    }

    #[test]
    fn unknown_template_rejected() {
        let set = LexiconSet::default_set();
        let config = GenConfig { templates: Some(vec!["T99".into()]), ..Default::default() };
        assert_eq!(instantiate_templates(&set, &config), Err(CorpusError::UnknownTemplate("T99".into())));
    }

    #[test]
    fn unsatisfiable_slot() {
        let mut set = LexiconSet::default_set();
        for e in &mut set.emotions {
            e.event_words.clear();
        }
        let err = instantiate_templates(&set, &GenConfig::default()).unwrap_err();
        assert_eq!(err, CorpusError::UnsatisfiableSlot { template: "T8".into(), slot: WordSlot::Event });
    }

    #[test]
    fn perturb_substitutes_and_controls() {
        let groups = vec![GroupLexicon {
            group_id: "G".into(),
            kind: crate::lexicon::GroupKind::Disability,
            terms: vec![
                term("autistic", "autistic", "autism", Placement::BeforeNoun),
                term("depression", "with depression", "depression", Placement::AfterNoun),
            ],
        }];
        let doc = NaturalDocument::new("d1", "My disabled friend helped me.", "reddit").unwrap();
        let out = perturb_document(&doc, &SeedTerm::defaults(), &groups);
        let texts: Vec<&str> = out.iter().map(|i| i.text.as_str()).collect();
        assert_eq!(
            texts,
            vec!["My friend helped me.", "My autistic friend helped me.", "My friend with depression helped me."]
        );
        validate_instances(&out).unwrap();
    }

    #[test]
    fn perturb_noun_seed_capitalized_and_hashtag() {
        let set = LexiconSet::default_set();
        let doc = NaturalDocument::new("d", "Disability pride! #disabled", "twitter").unwrap();
        let out = perturb_document(&doc, &SeedTerm::defaults(), &set.groups[1..2]);
        assert_eq!(out.len(), 2 * 6);
        assert_eq!(out[0].text, "Pride! #disabled");
        assert_eq!(out[1].text, "Autism pride! #disabled");
        assert_eq!(out[6].text, "Disability pride!");
        assert_eq!(out[7].text, "Disability pride! #autistic");
    }

    #[test]
    fn no_match_is_empty() {
        let set = LexiconSet::default_set();
        let doc = NaturalDocument::new("d", "Nothing relevant here.", "x").unwrap();
        assert!(perturb_document(&doc, &SeedTerm::defaults(), &set.groups).is_empty());
    }

    #[test]
    fn empty_document_rejected() {
        assert!(matches!(NaturalDocument::new("d", "  ", "x"), Err(CorpusError::EmptyDocument(_))));
    }

    #[test]
    fn validate_catches_broken_links() {
        let set = LexiconSet::default_set();
        let config = GenConfig { templates: Some(vec!["T1".into()]), ..Default::default() };
        let mut corpus = instantiate_templates(&set, &config).unwrap();
        corpus.remove(0);
        assert!(matches!(validate_instances(&corpus), Err(CorpusError::MissingControl { .. })));

        let mut corpus = instantiate_templates(&set, &config).unwrap();
        corpus[3].text = "I have a <group> friend.".into();
        assert!(matches!(validate_instances(&corpus), Err(CorpusError::ResidualPlaceholder(_))));
    }

    #[test]
    fn ids_are_stable_hashes() {
        let set = LexiconSet::default_set();
        let a = instantiate_templates(&set, &GenConfig::default()).unwrap();
        assert!(a.iter().all(|i| i.sentence_id.len() == 18 && i.sentence_id.starts_with("t-")));
        assert_eq!(a[0].sentence_id, short_id("t", &["T1", "", "", ""]));
    }
}
