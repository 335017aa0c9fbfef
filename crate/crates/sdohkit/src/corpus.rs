//! Note loading, validation, inclusion filtering, and patient-level
//! dataset splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segment::Section;

/// Provider roles eligible for inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthorRole {
    Physician,
    PhysicianAssistant,
    NursePractitioner,
    RegisteredNurse,
    SocialWorker,
}

impl AuthorRole {
    pub const ALL: [AuthorRole; 5] = [
        AuthorRole::Physician,
        AuthorRole::PhysicianAssistant,
        AuthorRole::NursePractitioner,
        AuthorRole::RegisteredNurse,
        AuthorRole::SocialWorker,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AuthorRole::Physician => "physician",
            AuthorRole::PhysicianAssistant => "physician_assistant",
            AuthorRole::NursePractitioner => "nurse_practitioner",
            AuthorRole::RegisteredNurse => "registered_nurse",
            AuthorRole::SocialWorker => "social_worker",
        }
    }
}

impl fmt::Display for AuthorRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub race: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ethnicity: Option<String>,
}

/// One clinical document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub note_id: String,
    pub patient_id: String,
    pub author_role: AuthorRole,
    pub date: NaiveDate,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<Demographics>,
}

/// Notes keyed by unique `note_id`, iterated in id order.
#[derive(Debug, Clone, Default)]
pub struct NoteCollection {
    notes: BTreeMap<String, Note>,
}

impl NoteCollection {
    pub fn new() -> Self {
        NoteCollection::default()
    }

    pub fn from_notes<I: IntoIterator<Item = Note>>(notes: I) -> Result<Self, CorpusError> {
        let mut c = NoteCollection::new();
        for note in notes {
            c.insert(note)?;
        }
        Ok(c)
    }

    pub fn insert(&mut self, note: Note) -> Result<(), CorpusError> {
        if self.notes.contains_key(&note.note_id) {
            return Err(CorpusError::DuplicateNoteId(note.note_id));
        }
        self.notes.insert(note.note_id.clone(), note);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn get(&self, note_id: &str) -> Option<&Note> {
        self.notes.get(note_id)
    }

    /// Notes in `note_id` order.
    pub fn iter(&self) -> impl Iterator<Item = &Note> {
        self.notes.values()
    }

    /// Distinct patient ids in sorted order.
    pub fn patient_ids(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.notes.values().map(|n| n.patient_id.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoteFormat {
    Jsonl,
    Csv,
}

/// A per-record problem found while loading; the record is skipped.
#[derive(Debug, Clone, Serialize)]
pub struct LoadDiagnostic {
    /// 1-based line number (JSONL) or record number (CSV).
    pub line: usize,
    pub message: String,
}

/// Valid notes plus line-numbered diagnostics for the records that were
/// rejected.
#[derive(Debug)]
pub struct LoadReport {
    pub notes: NoteCollection,
    pub diagnostics: Vec<LoadDiagnostic>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate note_id {0:?}")]
    DuplicateNoteId(String),
    #[error("note {0:?} has no section list")]
    MissingSections(String),
    #[error("split ratios must sum to 1 (got {0})")]
    BadRatios(f64),
    #[error("{patients} patients cannot fill {splits} non-empty splits")]
    TooFewPatients { patients: usize, splits: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Whitespace token count: maximal non-whitespace runs.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

fn validate_note(note: Note) -> Result<Note, String> {
    if note.note_id.trim().is_empty() {
        return Err("empty note_id".to_string());
    }
    if note.patient_id.trim().is_empty() {
        return Err("empty patient_id".to_string());
    }
    if note.text.trim().is_empty() {
        return Err(format!("note {:?} has empty text", note.note_id));
    }
    Ok(note)
}

/// Load notes from JSONL or CSV. Malformed records (bad JSON, missing
/// fields, unknown author_role, empty text, duplicate note_id) become
/// line-numbered diagnostics; only an unreadable file is a hard error.
pub fn load_notes(path: &Path, format: NoteFormat) -> Result<LoadReport, CorpusError> {
    let raw = std::fs::read_to_string(path).map_err(|source| CorpusError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    Ok(match format {
        NoteFormat::Jsonl => load_jsonl(&raw),
        NoteFormat::Csv => load_csv(&raw)?,
    })
}

fn load_jsonl(raw: &str) -> LoadReport {
    let mut notes = NoteCollection::new();
    let mut diagnostics = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Note, _> = serde_json::from_str(line);
        match parsed.map_err(|e| e.to_string()).and_then(validate_note) {
            Ok(note) => {
                if let Err(e) = notes.insert(note) {
                    diagnostics.push(LoadDiagnostic {
                        line: lineno,
                        message: e.to_string(),
                    });
                }
            }
            Err(message) => diagnostics.push(LoadDiagnostic {
                line: lineno,
                message,
            }),
        }
    }
    LoadReport { notes, diagnostics }
}

fn load_csv(raw: &str) -> Result<LoadReport, CorpusError> {
    #[derive(Deserialize)]
    struct Row {
        note_id: String,
        patient_id: String,
        author_role: String,
        date: String,
        text: String,
        #[serde(default)]
        gender: Option<String>,
        #[serde(default)]
        race: Option<String>,
        #[serde(default)]
        ethnicity: Option<String>,
    }

    let mut notes = NoteCollection::new();
    let mut diagnostics = Vec::new();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(raw.as_bytes());
    for (idx, row) in reader.deserialize::<Row>().enumerate() {
        // Record 1 sits on line 2, after the header.
        let lineno = idx + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                diagnostics.push(LoadDiagnostic {
                    line: lineno,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let author_role: Result<AuthorRole, _> =
            serde_json::from_value(serde_json::Value::String(row.author_role.clone()));
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d");
        let note = match (author_role, date) {
            (Ok(author_role), Ok(date)) => {
                let demographics = if row.gender.is_some() || row.race.is_some() || row.ethnicity.is_some() {
                    Some(Demographics {
                        gender: row.gender,
                        race: row.race,
                        ethnicity: row.ethnicity,
                    })
                } else {
                    None
                };
                Note {
                    note_id: row.note_id,
                    patient_id: row.patient_id,
                    author_role,
                    date,
                    text: row.text,
                    demographics,
                }
            }
            (Err(_), _) => {
                diagnostics.push(LoadDiagnostic {
                    line: lineno,
                    message: format!("unknown author_role {:?}", row.author_role),
                });
                continue;
            }
            (_, Err(e)) => {
                diagnostics.push(LoadDiagnostic {
                    line: lineno,
                    message: format!("bad date {:?}: {e}", row.date),
                });
                continue;
            }
        };
        match validate_note(note) {
            Ok(note) => {
                if let Err(e) = notes.insert(note) {
                    diagnostics.push(LoadDiagnostic {
                        line: lineno,
                        message: e.to_string(),
                    });
                }
            }
            Err(message) => diagnostics.push(LoadDiagnostic {
                line: lineno,
                message,
            }),
        }
    }
    Ok(LoadReport { notes, diagnostics })
}

/// Note inclusion rules. Defaults follow the shipped policy: at least 150
/// tokens for everyone; no section over 500 tokens except for social
/// workers; physicians, physician assistants and nurse practitioners must
/// carry at least one required section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub min_tokens: usize,
    pub max_section_tokens: usize,
    pub section_cap_exempt_roles: BTreeSet<AuthorRole>,
    pub required_sections: BTreeSet<String>,
    pub required_section_roles: BTreeSet<AuthorRole>,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            min_tokens: 150,
            max_section_tokens: 500,
            section_cap_exempt_roles: [AuthorRole::SocialWorker].into(),
            required_sections: [
                "Assessment and Plan".to_string(),
                "Social History".to_string(),
                "History/Subjective".to_string(),
            ]
            .into(),
            required_section_roles: [
                AuthorRole::Physician,
                AuthorRole::PhysicianAssistant,
                AuthorRole::NursePractitioner,
            ]
            .into(),
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_tokens < 1 {
            return Err("min_tokens must be >= 1".to_string());
        }
        if self.max_section_tokens <= self.min_tokens {
            return Err("max_section_tokens must exceed min_tokens".to_string());
        }
        Ok(())
    }
}

/// First-failing rejection reason, checked in fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    BelowMinTokens,
    SectionTooLong,
    MissingRequiredSection,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::BelowMinTokens => f.write_str("below_min_tokens"),
            RejectReason::SectionTooLong => f.write_str("section_too_long"),
            RejectReason::MissingRequiredSection => f.write_str("missing_required_section"),
        }
    }
}

/// Apply the inclusion rules. Each rejection carries exactly one
/// first-failing reason in the order: token floor, section cap, required
/// sections. `sections` must hold an entry for every note.
pub fn filter_notes(
    notes: &NoteCollection,
    policy: &FilterPolicy,
    sections: &BTreeMap<String, Vec<Section>>,
) -> Result<(NoteCollection, Vec<(String, RejectReason)>), CorpusError> {
    let mut kept = NoteCollection::new();
    let mut rejected = Vec::new();
    for note in notes.iter() {
        let note_sections = sections
            .get(&note.note_id)
            .ok_or_else(|| CorpusError::MissingSections(note.note_id.clone()))?;
        match first_failing_reason(note, policy, note_sections) {
            None => kept.insert(note.clone())?,
            Some(reason) => rejected.push((note.note_id.clone(), reason)),
        }
    }
    Ok((kept, rejected))
}

fn first_failing_reason(
    note: &Note,
    policy: &FilterPolicy,
    sections: &[Section],
) -> Option<RejectReason> {
    if count_tokens(&note.text) < policy.min_tokens {
        return Some(RejectReason::BelowMinTokens);
    }
    if !policy.section_cap_exempt_roles.contains(&note.author_role) {
        let too_long = sections
            .iter()
            .any(|s| count_tokens(&s.body) > policy.max_section_tokens);
        if too_long {
            return Some(RejectReason::SectionTooLong);
        }
    }
    if policy.required_section_roles.contains(&note.author_role) {
        let has_required = sections.iter().any(|s| {
            s.name
                .as_deref()
                .map(|n| policy.required_sections.contains(n))
                .unwrap_or(false)
        });
        if !has_required {
            return Some(RejectReason::MissingRequiredSection);
        }
    }
    None
}

/// Optional date-window predicate relative to a patient's treatment
/// course; notes outside the window are excluded when this filter is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub treatment_start: NaiveDate,
    pub treatment_end: NaiveDate,
    pub days_before_start: i64,
    pub days_after_end: i64,
}

impl DateWindow {
    pub fn new(treatment_start: NaiveDate, treatment_end: NaiveDate) -> Self {
        DateWindow {
            treatment_start,
            treatment_end,
            days_before_start: 30,
            days_after_end: 90,
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        let lo = self.treatment_start - chrono::Duration::days(self.days_before_start);
        let hi = self.treatment_end + chrono::Duration::days(self.days_after_end);
        lo <= date && date <= hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Patient-disjoint split assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub by_patient: BTreeMap<String, Split>,
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl SplitAssignment {
    pub fn split_of(&self, patient_id: &str) -> Option<Split> {
        self.by_patient.get(patient_id).copied()
    }

    pub fn counts(&self) -> BTreeMap<Split, usize> {
        let mut counts: BTreeMap<Split, usize> = Split::ALL.iter().map(|s| (*s, 0)).collect();
        for split in self.by_patient.values() {
            *counts.get_mut(split).unwrap() += 1;
        }
        counts
    }
}

/// Assign every patient to train/dev/test. Deterministic for a fixed seed;
/// all notes of a patient share a split. Sizes use floor counts with the
/// remainder distributed by largest fractional part, so every realized
/// count is within one patient of `ratio * n`.
pub fn split_dataset(
    notes: &NoteCollection,
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitAssignment, CorpusError> {
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios(sum));
    }
    let mut patients = notes.patient_ids();
    let nonempty_splits = ratios.iter().filter(|r| **r > 0.0).count();
    if patients.len() < nonempty_splits {
        return Err(CorpusError::TooFewPatients {
            patients: patients.len(),
            splits: nonempty_splits,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    patients.shuffle(&mut rng);

    let n = patients.len();
    let mut counts = [0usize; 3];
    let mut fracs = [0f64; 3];
    for i in 0..3 {
        let exact = ratios[i] * n as f64;
        counts[i] = exact.floor() as usize;
        fracs[i] = exact - exact.floor();
    }
    let mut remainder = n - counts.iter().sum::<usize>();
    // Largest fractional part first, but empty non-zero-ratio splits take
    // priority so every requested split is populated when possible. Ties
    // resolve by split order.
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|a, b| {
        let starved = |i: usize| ratios[i] > 0.0 && counts[i] == 0;
        starved(*b)
            .cmp(&starved(*a))
            .then(fracs[*b].partial_cmp(&fracs[*a]).unwrap())
            .then(a.cmp(b))
    });
    for i in order {
        if remainder == 0 {
            break;
        }
        counts[i] += 1;
        remainder -= 1;
    }

    let mut by_patient = BTreeMap::new();
    let mut cursor = 0;
    for (split, count) in Split::ALL.iter().zip(counts) {
        for patient in &patients[cursor..cursor + count] {
            by_patient.insert(patient.clone(), *split);
        }
        cursor += count;
    }
    Ok(SplitAssignment {
        by_patient,
        ratios,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::{sectionize, HeaderLexicon};

    fn note(id: &str, patient: &str, role: AuthorRole, text: &str) -> Note {
        Note {
            note_id: id.to_string(),
            patient_id: patient.to_string(),
            author_role: role,
            date: NaiveDate::from_ymd_opt(2020, 1, 15).unwrap(),
            text: text.to_string(),
            demographics: None,
        }
    }

    fn words(n: usize) -> String {
        vec!["w"; n].join(" ")
    }

    #[test]
    fn token_counting() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("Pt lives alone."), 3);
        assert_eq!(count_tokens(&words(150)), 150);
        // Additivity over a single-space join.
        let a = "one two";
        let b = "three";
        assert_eq!(
            count_tokens(&format!("{a} {b}")),
            count_tokens(a) + count_tokens(b)
        );
    }

    #[test]
    fn load_jsonl_counts_diagnostics() {
        let mut lines = Vec::new();
        for i in 0..200 {
            if i == 10 || i == 50 || i == 99 {
                lines.push("{\"broken\": true}".to_string());
            } else {
                lines.push(
                    serde_json::to_string(&note(
                        &format!("n{i:03}"),
                        &format!("p{i:03}"),
                        AuthorRole::Physician,
                        "Some text.",
                    ))
                    .unwrap(),
                );
            }
        }
        let report = load_jsonl(&lines.join("\n"));
        assert_eq!(report.notes.len(), 197);
        assert_eq!(report.diagnostics.len(), 3);
        assert_eq!(report.diagnostics[0].line, 11);

        let empty = load_jsonl("");
        assert!(empty.notes.is_empty());
        assert!(empty.diagnostics.is_empty());
    }

    #[test]
    fn unknown_role_is_rejected_with_diagnostic() {
        let line = r#"{"note_id":"n1","patient_id":"p1","author_role":"chaplain","date":"2020-01-15","text":"Hello."}"#;
        let report = load_jsonl(line);
        assert!(report.notes.is_empty());
        assert_eq!(report.diagnostics.len(), 1);
        assert!(report.diagnostics[0].message.contains("chaplain"));
    }

    #[test]
    fn duplicate_note_id_is_diagnosed() {
        let n = serde_json::to_string(&note("n1", "p1", AuthorRole::Physician, "Hi there.")).unwrap();
        let report = load_jsonl(&format!("{n}\n{n}"));
        assert_eq!(report.notes.len(), 1);
        assert_eq!(report.diagnostics.len(), 1);
        assert_eq!(report.diagnostics[0].line, 2);
    }

    #[test]
    fn csv_round_trip() {
        let csv_text = "note_id,patient_id,author_role,date,text,gender,race,ethnicity\n\
                        n1,p1,physician,2020-01-15,Feels well today.,female,White,Non-Hispanic\n\
                        n2,p2,chaplain,2020-01-16,Visited.,,,\n";
        let report = load_csv(csv_text).unwrap();
        assert_eq!(report.notes.len(), 1);
        assert_eq!(report.diagnostics.len(), 1);
        let n1 = report.notes.get("n1").unwrap();
        assert_eq!(
            n1.demographics.as_ref().unwrap().gender.as_deref(),
            Some("female")
        );
    }

    fn sections_for(notes: &NoteCollection) -> BTreeMap<String, Vec<Section>> {
        let lex = HeaderLexicon::shipped();
        notes
            .iter()
            .map(|n| (n.note_id.clone(), sectionize(&n.text, &lex)))
            .collect()
    }

    #[test]
    fn filter_boundaries() {
        let policy = FilterPolicy::default();
        policy.validate().unwrap();

        let header = "Social History:\n";
        // 149 tokens rejected, 150 accepted (header tokens count too).
        let n149 = note("a", "p1", AuthorRole::Physician, &format!("{header}{}", words(147)));
        let n150 = note("b", "p2", AuthorRole::Physician, &format!("{header}{}", words(148)));
        assert_eq!(count_tokens(&n149.text), 149);
        assert_eq!(count_tokens(&n150.text), 150);

        let notes = NoteCollection::from_notes([n149, n150]).unwrap();
        let sections = sections_for(&notes);
        let (kept, rejected) = filter_notes(&notes, &policy, &sections).unwrap();
        assert_eq!(kept.len(), 1);
        assert!(kept.get("b").is_some());
        assert_eq!(rejected, vec![("a".to_string(), RejectReason::BelowMinTokens)]);
    }

    #[test]
    fn section_cap_exempts_social_workers() {
        let policy = FilterPolicy::default();
        let long_section = format!("Social History:\n{}", words(501));
        let nurse = note("n", "p1", AuthorRole::RegisteredNurse, &format!("{}\n{long_section}", words(99)));
        let sw = note("s", "p2", AuthorRole::SocialWorker, &format!("{}\n{long_section}", words(99)));
        let notes = NoteCollection::from_notes([nurse, sw]).unwrap();
        let sections = sections_for(&notes);
        let (kept, rejected) = filter_notes(&notes, &policy, &sections).unwrap();
        assert!(kept.get("s").is_some(), "social worker note kept");
        assert_eq!(rejected, vec![("n".to_string(), RejectReason::SectionTooLong)]);
    }

    #[test]
    fn required_section_rule() {
        let policy = FilterPolicy::default();
        let no_required = note("x", "p1", AuthorRole::Physician, &words(200));
        let nurse_ok = note("y", "p2", AuthorRole::RegisteredNurse, &words(200));
        let notes = NoteCollection::from_notes([no_required, nurse_ok]).unwrap();
        let sections = sections_for(&notes);
        let (kept, rejected) = filter_notes(&notes, &policy, &sections).unwrap();
        assert!(kept.get("y").is_some(), "requirement does not apply to RNs");
        assert_eq!(
            rejected,
            vec![("x".to_string(), RejectReason::MissingRequiredSection)]
        );
    }

    #[test]
    fn filter_partitions_and_is_idempotent() {
        let policy = FilterPolicy::default();
        let mut all = Vec::new();
        for i in 0..20 {
            let text = if i % 3 == 0 {
                words(30)
            } else {
                format!("Social History:\n{}", words(200))
            };
            all.push(note(&format!("n{i:02}"), &format!("p{i:02}"), AuthorRole::Physician, &text));
        }
        let notes = NoteCollection::from_notes(all).unwrap();
        let sections = sections_for(&notes);
        let (kept, rejected) = filter_notes(&notes, &policy, &sections).unwrap();
        assert_eq!(kept.len() + rejected.len(), notes.len());
        for (id, _) in &rejected {
            assert!(kept.get(id).is_none());
        }
        let (kept2, rejected2) = filter_notes(&kept, &policy, &sections).unwrap();
        assert_eq!(kept2.len(), kept.len());
        assert!(rejected2.is_empty());
    }

    #[test]
    fn split_sizes_match_published_counts() {
        let mut all = Vec::new();
        for i in 0..770 {
            all.push(note(&format!("n{i:04}"), &format!("p{i:04}"), AuthorRole::Physician, "text here"));
        }
        let notes = NoteCollection::from_notes(all).unwrap();
        let assignment = split_dataset(&notes, [0.6, 0.2, 0.2], 7).unwrap();
        let counts = assignment.counts();
        assert_eq!(counts[&Split::Train], 462);
        assert_eq!(counts[&Split::Dev], 154);
        assert_eq!(counts[&Split::Test], 154);
    }

    #[test]
    fn split_is_deterministic_and_patient_disjoint() {
        let mut all = Vec::new();
        for i in 0..40 {
            // Two notes per patient.
            all.push(note(&format!("a{i:02}"), &format!("p{:02}", i / 2), AuthorRole::Physician, "t"));
        }
        let notes = NoteCollection::from_notes(all).unwrap();
        let s1 = split_dataset(&notes, [0.6, 0.2, 0.2], 42).unwrap();
        let s2 = split_dataset(&notes, [0.6, 0.2, 0.2], 42).unwrap();
        assert_eq!(s1.by_patient, s2.by_patient);

        for n in notes.iter() {
            // Every note's patient has exactly one split.
            assert!(s1.split_of(&n.patient_id).is_some());
        }
    }

    #[test]
    fn split_three_patients() {
        let notes = NoteCollection::from_notes([
            note("a", "p1", AuthorRole::Physician, "t"),
            note("b", "p2", AuthorRole::Physician, "t"),
            note("c", "p3", AuthorRole::Physician, "t"),
        ])
        .unwrap();
        let s = split_dataset(&notes, [0.6, 0.2, 0.2], 1).unwrap();
        let counts = s.counts();
        assert_eq!(counts[&Split::Train], 1);
        assert_eq!(counts[&Split::Dev], 1);
        assert_eq!(counts[&Split::Test], 1);

        let two = NoteCollection::from_notes([
            note("a", "p1", AuthorRole::Physician, "t"),
            note("b", "p2", AuthorRole::Physician, "t"),
        ])
        .unwrap();
        assert!(split_dataset(&two, [0.6, 0.2, 0.2], 1).is_err());
    }

    #[test]
    fn date_window() {
        let w = DateWindow::new(
            NaiveDate::from_ymd_opt(2020, 3, 1).unwrap(),
            NaiveDate::from_ymd_opt(2020, 4, 15).unwrap(),
        );
        assert!(w.contains(NaiveDate::from_ymd_opt(2020, 2, 1).unwrap()));
        assert!(!w.contains(NaiveDate::from_ymd_opt(2020, 1, 30).unwrap()));
        assert!(w.contains(NaiveDate::from_ymd_opt(2020, 7, 14).unwrap()));
        assert!(!w.contains(NaiveDate::from_ymd_opt(2020, 7, 15).unwrap()));
    }
}
