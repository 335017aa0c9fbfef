//! Section parsing and sentence segmentation for clinical notes.
//!
//! Sections are found by line-anchored header matching against an alias
//! lexicon. Sentences split at `.`/`!`/`?` followed by whitespace and a
//! capital (or end of text), except after known abbreviations, and always
//! at `•` bullets. All offsets are character offsets (Unicode scalar
//! values), not bytes.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const SHIPPED_HEADER_LEXICON: &str = include_str!("../data/header_lexicon.csv");
const SHIPPED_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

/// A named region of a note. `name` is `None` for the unnamed preamble
/// before the first header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: Option<String>,
    pub char_start: usize,
    pub char_end: usize,
    pub body: String,
}

/// One segmented sentence. `text` equals the note substring at
/// `[char_start, char_end)` in character offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub sentence_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub section_name: Option<String>,
}

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("header lexicon is empty")]
    EmptyLexicon,
    #[error("malformed lexicon line {line}: {message}")]
    MalformedLexicon { line: usize, message: String },
    #[error("span at chars {start}..{end} lies outside the sectionized range (note length {len})")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
}

/// Maps lowercase header aliases to canonical section names.
#[derive(Debug, Clone)]
pub struct HeaderLexicon {
    aliases: BTreeMap<String, String>,
}

impl HeaderLexicon {
    /// The shipped lexicon covering the three required sections plus
    /// common clinical headers.
    pub fn shipped() -> Self {
        HeaderLexicon::from_csv(SHIPPED_HEADER_LEXICON).expect("shipped lexicon parses")
    }

    /// Parse `alias,canonical` CSV. A header row of exactly
    /// `alias,canonical` is skipped.
    pub fn from_csv(text: &str) -> Result<Self, SegmentError> {
        let mut aliases = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line == "alias,canonical" {
                continue;
            }
            let (alias, canonical) =
                line.split_once(',')
                    .ok_or_else(|| SegmentError::MalformedLexicon {
                        line: idx + 1,
                        message: "expected `alias,canonical`".to_string(),
                    })?;
            aliases.insert(
                alias.trim().to_lowercase(),
                canonical.trim().to_string(),
            );
        }
        if aliases.is_empty() {
            return Err(SegmentError::EmptyLexicon);
        }
        Ok(HeaderLexicon { aliases })
    }

    fn canonical_for_line(&self, line: &str) -> Option<&str> {
        let trimmed = line.trim();
        let without_colon = trimmed.strip_suffix(':').unwrap_or(trimmed);
        self.aliases
            .get(&without_colon.trim().to_lowercase())
            .map(String::as_str)
    }
}

/// Tokens (lowercased, without the trailing period) that suppress a
/// sentence split after `.`.
#[derive(Debug, Clone)]
pub struct AbbreviationLexicon {
    tokens: HashSet<String>,
}

impl AbbreviationLexicon {
    pub fn shipped() -> Self {
        AbbreviationLexicon {
            tokens: SHIPPED_ABBREVIATIONS
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        }
    }

    pub fn from_tokens<I: IntoIterator<Item = S>, S: Into<String>>(tokens: I) -> Self {
        AbbreviationLexicon {
            tokens: tokens.into_iter().map(|t| t.into().to_lowercase()).collect(),
        }
    }

    fn contains(&self, word: &str) -> bool {
        self.tokens.contains(&word.to_lowercase())
    }
}

impl Default for AbbreviationLexicon {
    fn default() -> Self {
        AbbreviationLexicon::shipped()
    }
}

/// Parse a note into sections. A header matches when a line, trimmed and
/// case-insensitively, equals a lexicon alias optionally followed by `:`.
/// Each section runs from the end of its header line to the start of the
/// next header (or end of note); text before the first header forms an
/// unnamed preamble. A note with no headers yields one preamble section.
pub fn sectionize(note_text: &str, lexicon: &HeaderLexicon) -> Vec<Section> {
    let chars: Vec<char> = note_text.chars().collect();
    let n = chars.len();

    // (line_start, line_end_exclusive_of_newline, next_line_start)
    let mut headers: Vec<(usize, usize, String)> = Vec::new();
    let mut line_start = 0;
    while line_start < n {
        let mut line_end = line_start;
        while line_end < n && chars[line_end] != '\n' {
            line_end += 1;
        }
        let line: String = chars[line_start..line_end].iter().collect();
        if let Some(canonical) = lexicon.canonical_for_line(&line) {
            let body_start = if line_end < n { line_end + 1 } else { line_end };
            headers.push((line_start, body_start, canonical.to_string()));
        }
        line_start = line_end + 1;
    }

    let substring = |s: usize, e: usize| -> String { chars[s..e].iter().collect() };
    let mut sections = Vec::new();

    let first_header_start = headers.first().map(|h| h.0).unwrap_or(n);
    if first_header_start > 0 {
        sections.push(Section {
            name: None,
            char_start: 0,
            char_end: first_header_start,
            body: substring(0, first_header_start),
        });
    }

    for (i, (_, body_start, name)) in headers.iter().enumerate() {
        let body_end = headers.get(i + 1).map(|h| h.0).unwrap_or(n);
        if *body_start < body_end {
            sections.push(Section {
                name: Some(name.clone()),
                char_start: *body_start,
                char_end: body_end,
                body: substring(*body_start, body_end),
            });
        }
    }

    sections
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Split text into sentence spans using the shipped abbreviation lexicon.
pub fn segment_sentences(text: &str) -> Vec<SentenceSpan> {
    segment_sentences_with(text, &AbbreviationLexicon::shipped())
}

/// Split text into sentence spans. Boundaries occur at `.`/`!`/`?`
/// followed by whitespace and an uppercase letter (or end of text) unless
/// the preceding word is a known abbreviation, and at every `•`, which is
/// stripped from span text. Empty and whitespace-only spans are dropped.
pub fn segment_sentences_with(text: &str, abbrevs: &AbbreviationLexicon) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans: Vec<SentenceSpan> = Vec::new();

    let push_span = |raw_start: usize, raw_end: usize, spans: &mut Vec<SentenceSpan>| {
        let mut s = raw_start;
        let mut e = raw_end.min(n);
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            spans.push(SentenceSpan {
                sentence_index: spans.len(),
                char_start: s,
                char_end: e,
                text: chars[s..e].iter().collect(),
                section_name: None,
            });
        }
    };

    let mut start = 0;
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if c == '•' {
            push_span(start, i, &mut spans);
            start = i + 1;
            i += 1;
            continue;
        }
        if is_terminator(c) {
            // First non-whitespace character after the terminator.
            let mut j = i + 1;
            while j < n && chars[j].is_whitespace() {
                j += 1;
            }
            let at_end = i + 1 >= n || j >= n;
            let followed_by_capital =
                i + 1 < n && chars[i + 1].is_whitespace() && j < n && chars[j].is_uppercase();
            if at_end || followed_by_capital {
                let suppressed = c == '.' && {
                    // Word immediately before the period.
                    let mut k = i;
                    while k > 0 && !chars[k - 1].is_whitespace() && chars[k - 1] != '•' {
                        k -= 1;
                    }
                    let word: String = chars[k..i].iter().collect();
                    !word.is_empty() && abbrevs.contains(&word)
                };
                if !suppressed {
                    push_span(start, i + 1, &mut spans);
                    start = i + 1;
                }
            }
        }
        i += 1;
    }
    push_span(start, n, &mut spans);
    spans
}

/// Assign each span the section whose range contains its `char_start`.
/// Spans in the preamble (or outside any named section) keep no name.
/// Errors when a span starts beyond the sectionized range.
pub fn attach_sections(
    spans: &[SentenceSpan],
    sections: &[Section],
) -> Result<Vec<SentenceSpan>, SegmentError> {
    let len = sections.iter().map(|s| s.char_end).max().unwrap_or(0);
    let mut out = Vec::with_capacity(spans.len());
    for span in spans {
        if !sections.is_empty() && span.char_start >= len {
            return Err(SegmentError::SpanOutOfBounds {
                start: span.char_start,
                end: span.char_end,
                len,
            });
        }
        let name = sections
            .iter()
            .find(|sec| sec.char_start <= span.char_start && span.char_start < sec.char_end)
            .and_then(|sec| sec.name.clone());
        out.push(SentenceSpan {
            section_name: name,
            ..span.clone()
        });
    }
    Ok(out)
}

/// Full per-note pipeline: sectionize, then segment each section body so
/// header lines never leak into sentences. Span offsets are relative to
/// the whole note and `sentence_index` runs across the note.
pub fn segment_note(
    note_text: &str,
    lexicon: &HeaderLexicon,
    abbrevs: &AbbreviationLexicon,
) -> (Vec<Section>, Vec<SentenceSpan>) {
    let sections = sectionize(note_text, lexicon);
    let mut spans = Vec::new();
    for section in &sections {
        for span in segment_sentences_with(&section.body, abbrevs) {
            spans.push(SentenceSpan {
                sentence_index: spans.len(),
                char_start: span.char_start + section.char_start,
                char_end: span.char_end + section.char_start,
                text: span.text,
                section_name: section.name.clone(),
            });
        }
    }
    (sections, spans)
}
