//! Small text utilities: whitespace repair, "a"/"an" repair, word-boundary
//! search and the tokenizer used by the builtin scorer.

use alloc::string::String;
use alloc::vec::Vec;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '_' || c == '\''
}

fn joins_word(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '_'
}

/// Collapses whitespace runs to one space, trims, and removes spaces left in
/// front of closing punctuation.
pub fn repair_spacing(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space && !matches!(c, '.' | ',' | '!' | '?' | ';' | ':' | ')') {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
    }
    out
}

/// The indefinite article for `word`, decided by its first letter with a few
/// sound-based exceptions ("a university", "an hour").
pub fn indefinite_article(word: &str) -> &'static str {
    let lower: String = word.chars().take(6).flat_map(char::to_lowercase).collect();
    const CONSONANT_SOUND: [&str; 6] = ["uni", "use", "usu", "eu", "one", "once"];
    const VOWEL_SOUND: [&str; 5] = ["hour", "honest", "honor", "honour", "heir"];
    if CONSONANT_SOUND.iter().any(|p| lower.starts_with(p)) {
        return "a";
    }
    if VOWEL_SOUND.iter().any(|p| lower.starts_with(p)) {
        return "an";
    }
    match lower.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Span of the word that ends right before `at` (skipping whitespace).
fn previous_word(text: &str, at: usize) -> Option<(usize, usize)> {
    let head = &text[..at];
    let end = head.trim_end().len();
    let start = head[..end]
        .char_indices()
        .rev()
        .take_while(|(_, c)| is_word_char(*c))
        .last()
        .map(|(i, _)| i)?;
    Some((start, end))
}

/// Span of the word that starts at or after `at` (skipping whitespace), if
/// the next non-space character begins a word.
pub fn next_word(text: &str, at: usize) -> Option<(usize, usize)> {
    let tail = &text[at..];
    let skip = tail.len() - tail.trim_start().len();
    let start = at + skip;
    let len: usize = text[start..]
        .chars()
        .take_while(|c| is_word_char(*c))
        .map(char::len_utf8)
        .sum();
    (len > 0).then_some((start, start + len))
}

/// Fixes the article directly in front of position `at`, where `at` is where
/// the word following the article now begins. A dangling article with no
/// word after it is removed.
pub fn repair_article_at(text: &str, at: usize) -> String {
    let Some((start, end)) = previous_word(text, at) else {
        return String::from(text);
    };
    let article = &text[start..end];
    if !article.eq_ignore_ascii_case("a") && !article.eq_ignore_ascii_case("an") {
        return String::from(text);
    }
    let mut out = String::with_capacity(text.len() + 1);
    out.push_str(&text[..start]);
    match next_word(text, at) {
        Some((ws, we)) => {
            let fixed = indefinite_article(&text[ws..we]);
            if article.starts_with('A') {
                out.push_str(if fixed == "an" { "An" } else { "A" });
            } else {
                out.push_str(fixed);
            }
            out.push_str(&text[end..]);
        }
        None => {
            out.push_str(text[end..].trim_start());
        }
    }
    out
}

/// Case-insensitive whole-word occurrences of `needle` in `haystack`, as
/// byte spans. Hyphens count as word characters, so "non-disabled" does not
/// match "disabled"; a possessive "'s" does not block a match.
pub fn find_word_spans(haystack: &str, needle: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    if needle.is_empty() {
        return spans;
    }
    let n = needle.len();
    for (i, _) in haystack.char_indices() {
        let end = i + n;
        if end > haystack.len() || !haystack.is_char_boundary(end) {
            continue;
        }
        if !haystack[i..end].eq_ignore_ascii_case(needle) {
            continue;
        }
        let before_ok = haystack[..i].chars().next_back().is_none_or(|c| !joins_word(c));
        let after_ok = haystack[end..].chars().next().is_none_or(|c| !joins_word(c));
        if before_ok && after_ok {
            spans.push((i, end));
        }
    }
    spans
}

/// Lowercases, splits on whitespace and strips leading and trailing
/// punctuation from each token. Tokens that are pure punctuation vanish.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(|t| t.chars().flat_map(char::to_lowercase).collect())
        .collect()
}

/// Uppercases the first character of `s`.
pub fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
