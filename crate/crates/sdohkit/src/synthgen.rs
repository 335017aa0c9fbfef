//! Two-round synthetic SDoH sentence generation and demographic-injection
//! pairing, with file-driven manual validation.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{complete_chat_batch, ChatMessage, LabeledSentence, RemoteBackendConfig, ResponseCache};
use crate::schema::{parse_label_token, Category, Task};

/// One (category, adverse) generation target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GenLabel {
    pub category: Category,
    pub adverse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationStatus {
    Unreviewed,
    Confirmed,
    Corrected,
    Discarded,
}

/// A generated sentence with its generation provenance and review state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSentence {
    pub id: String,
    pub text: String,
    pub category: Category,
    pub adverse: bool,
    pub round: u8,
    pub batch_id: String,
    /// For round-2 sentences: the round-1 batch whose outputs served as
    /// the prompt references.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_batch: Option<String>,
    pub validated: ValidationStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_labels: Option<Vec<GenLabel>>,
}

impl SyntheticSentence {
    /// Labels assigned by the generating prompt.
    pub fn assigned_labels(&self) -> Vec<GenLabel> {
        vec![GenLabel {
            category: self.category,
            adverse: self.adverse,
        }]
    }

    /// Labels after review: the correction when present, otherwise the
    /// assigned labels.
    pub fn effective_labels(&self) -> Vec<GenLabel> {
        self.corrected_labels
            .clone()
            .unwrap_or_else(|| self.assigned_labels())
    }

    /// Task projection of the effective labels.
    pub fn labels_for(&self, task: Task) -> BTreeSet<Category> {
        self.effective_labels()
            .iter()
            .filter(|l| match task {
                Task::Any => true,
                Task::Adverse => l.adverse,
            })
            .map(|l| l.category)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RaceEthnicity {
    Asian,
    Black,
    White,
    Hispanic,
    #[serde(rename = "none")]
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    #[serde(rename = "none")]
    Unspecified,
}

/// Race/ethnicity and gender parsed from the leading bracket tag of an
/// injected line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Descriptor {
    pub race_ethnicity: RaceEthnicity,
    pub gender: Gender,
}

/// A synthetic sentence paired with its demographic-injected rewrite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoPair {
    pub pair_id: String,
    pub original_id: String,
    pub injected_text: String,
    pub race_ethnicity: RaceEthnicity,
    pub gender: Gender,
    pub validated: ValidationStatus,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("no shipped generation prompt for {category} (adverse: {adverse})")]
    UnshippedPrompt { category: Category, adverse: bool },
    #[error("generation prompt requires at least one reference sentence")]
    NoReferences,
    #[error("round 2 requires stored round-1 sentences for {category} (adverse: {adverse})")]
    MissingRoundOne { category: Category, adverse: bool },
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("generation for {batch_id} stalled at {got}/{want} unique sentences")]
    InsufficientGeneration {
        batch_id: String,
        got: usize,
        want: usize,
    },
    #[error("injected line has no leading [..] bracket tag: {0:?}")]
    MissingBracketTag(String),
    #[error("decision references unknown item {0:?}")]
    UnknownItem(String),
    #[error("invalid decision for {id:?}: {message}")]
    InvalidDecision { id: String, message: String },
    #[error("malformed decisions line {line}: {message}")]
    MalformedDecision { line: usize, message: String },
    #[error(transparent)]
    Classify(#[from] crate::classify::ClassifyError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

struct PromptSurface {
    category: Category,
    adverse: bool,
    intro: &'static str,
    request: &'static str,
    references: &'static [&'static str],
}

const PROMPT_SURFACES: [PromptSurface; 9] = [
    PromptSurface {
        category: Category::Housing,
        adverse: true,
        intro: "Examples of housing issues for patients:",
        request: "about various patient's housing issues similar to the examples.",
        references: &[
            "Pt came from Assisted Living Corp. and complained about rent increase.",
            "He says he is worried about making his mortgage payments.",
            "Pt is staying with a friend and does not have a mailing address.",
            "Pt currently staying at Barbara McInnis shelter.",
            "Pt is staying at the Motel for the time being, while on the waitlist for the Hope Lodge.",
        ],
    },
    PromptSurface {
        category: Category::Transportation,
        adverse: true,
        intro: "Examples of transportation issues for patients:",
        request: "about various patient's transportation issues similar to the examples.",
        references: &[
            "Pt lives 30mi away from hospital and complains about needing to transfer three times each way.",
            "Pt missed appointment because her sister couldn't drive her today.",
            "Pt is worried about making appointments because the metro is under construction this month.",
            "Pt is worried about the two hour drive.",
            "She is having trouble lying flat for treatment, she thinks it is because her back hurts after the two hour car ride into clinic.",
            "Pt felt that coming to Los Angeles was hard for them and asked to be referred to Santa Cruz.",
            "He is having trouble getting to and from the hospital.",
        ],
    },
    PromptSurface {
        category: Category::Relationship,
        adverse: true,
        intro: "Examples of divorced, widowed, single, separated issues for patients:",
        request: "about various patients being divorced, widowed, single, or separated issues similar to the examples.",
        references: &[
            "Pt is meeting ex-wife at appointment.",
            "Pt is married but separated.",
            "Pt spouse passed away in October of last year.",
            "Pt is single.",
            "Pt arrived with his girlfriend, and his ex-wife will attend with him at next week's session.",
            "Pt has 3 kids from former marriage",
        ],
    },
    PromptSurface {
        category: Category::Relationship,
        adverse: false,
        intro: "Examples of married/partnered sentences for patients:",
        request: "about various patients being married / partnered similar to the examples.",
        references: &[
            "Pt and her husband came into my office today.",
            "Pt and her fiancée came into my office today.",
            "He is here with his boyfriend.",
            "He is married to Sheila.",
        ],
    },
    PromptSurface {
        category: Category::Parent,
        adverse: true,
        intro: "Examples of parental status for patients:",
        request: "about various patients being a parent to minors similar to the examples.",
        references: &[
            "Pt has 2 children ages 9 and 13.",
            "Pt has 2 teenage children.",
            "Pt was seen today with his daughter Angela, 3 y/o for a routine checkup.",
        ],
    },
    PromptSurface {
        category: Category::Employment,
        adverse: true,
        intro: "Examples of employment issues for patients:",
        request: "about various patient's employment issues similar to the examples.",
        references: &[
            "Pt works part-time at Jim's Fish and is struggling to pay rent.",
            "Pt has been living off of unemployment for the past 2 months.",
            "Used to be a car mechanic, but he has been on disability for the past 2 years since his diagnosis.",
            "He is currently on disability and is also occasionally working as an Uber driver to help cover the bills.",
        ],
    },
    PromptSurface {
        category: Category::Employment,
        adverse: false,
        intro: "Examples of employment sentences for patients:",
        request: "about various patient's employment similar to the examples.",
        references: &[
            "Pt works as an electrician in Rockland.",
            "Pt is a 75yr old retiree.",
            "Pt is attending Cool University full time.",
            "Pt is a semi-retired marketing consultant.",
        ],
    },
    PromptSurface {
        category: Category::Support,
        adverse: true,
        intro: "Examples of social support issues for patients:",
        request: "about various patient's lack of social support similar to the examples.",
        references: &[
            "Pt lives alone.",
            "Pt is struggling to find someone to watch his cat on the days he has to come for treatment.",
        ],
    },
    PromptSurface {
        category: Category::Support,
        adverse: false,
        intro: "Examples of social support sentences for patients:",
        request: "about various patient's social support similar to the examples.",
        references: &[
            "Here today is Pt, her daughter, and supportive wife.",
            "Pt is living with his parents during treatment, while his neighbors watch his cat.",
            "Pt had to borrow money from her friend to catch the bus today.",
            "Pt is currently living with nephew while receiving treatment.",
        ],
    },
];

fn surface_for(category: Category, adverse: bool) -> Result<&'static PromptSurface, SynthError> {
    PROMPT_SURFACES
        .iter()
        .find(|s| s.category == category && s.adverse == adverse)
        .ok_or(SynthError::UnshippedPrompt { category, adverse })
}

/// The shipped (category, adverse) combinations that have prompts.
pub fn shipped_generation_targets() -> Vec<GenLabel> {
    PROMPT_SURFACES
        .iter()
        .map(|s| GenLabel {
            category: s.category,
            adverse: s.adverse,
        })
        .collect()
}

/// The shipped round-1 reference sentences for one target.
pub fn shipped_references(category: Category, adverse: bool) -> Result<Vec<String>, SynthError> {
    Ok(surface_for(category, adverse)?
        .references
        .iter()
        .map(|s| s.to_string())
        .collect())
}

/// Render the four-message generation prompt: a physician system turn,
/// the numbered reference examples, an acknowledgement, and the request
/// for 100 sentences. Round 2 substitutes round-1 outputs as the
/// references.
pub fn build_generation_prompt(
    category: Category,
    adverse: bool,
    references: &[String],
) -> Result<Vec<ChatMessage>, SynthError> {
    let surface = surface_for(category, adverse)?;
    if references.is_empty() {
        return Err(SynthError::NoReferences);
    }
    let numbered: Vec<String> = references
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{}. {}", i + 1, r))
        .collect();
    Ok(vec![
        ChatMessage::system("You are a physician."),
        ChatMessage::user(format!("{} {}", surface.intro, numbered.join("\n"))),
        ChatMessage::assistant("Ok I will remember that."),
        ChatMessage::user(format!(
            "Imagine you are a physician. Please give me 100 sentences from your clinic notes {}",
            surface.request
        )),
    ])
}

/// Split a generation response into candidate sentences: one per line,
/// leading enumeration (`12.`, `3)`, `-`, `•`) stripped, empties dropped.
pub fn parse_generation_response(content: &str) -> Vec<String> {
    content
        .lines()
        .map(|line| {
            let trimmed = line.trim();
            let without_enum = strip_enumeration(trimmed);
            without_enum.trim().to_string()
        })
        .filter(|l| !l.is_empty())
        .collect()
}

fn strip_enumeration(line: &str) -> &str {
    let digits_end = line
        .char_indices()
        .take_while(|(_, c)| c.is_ascii_digit())
        .map(|(i, c)| i + c.len_utf8())
        .last();
    if let Some(end) = digits_end {
        let rest = &line[end..];
        if let Some(stripped) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return stripped;
        }
    }
    line.strip_prefix("- ")
        .or_else(|| line.strip_prefix("• "))
        .unwrap_or(line)
}

const MAX_REQUESTS_PER_TARGET: usize = 8;

/// Generate `n_per_category` unique sentences for each target. Round 1
/// prompts with the shipped references; round 2 prompts with a seeded
/// sample of the stored round-1 outputs. Responses are parsed as
/// numbered lists, deduplicated exactly, and topped up with continuation
/// requests until the quota is reached.
#[allow(clippy::too_many_arguments)]
pub fn run_generation_round(
    config: &RemoteBackendConfig,
    targets: &[GenLabel],
    n_per_category: usize,
    round: u8,
    round_one: Option<&[SyntheticSentence]>,
    references_per_prompt: usize,
    seed: u64,
    cache: Option<&ResponseCache>,
) -> Result<Vec<SyntheticSentence>, SynthError> {
    let mut out = Vec::new();
    for target in targets {
        let (references, reference_batch) = match round {
            1 => (shipped_references(target.category, target.adverse)?, None),
            _ => {
                let pool: Vec<&SyntheticSentence> = round_one
                    .unwrap_or(&[])
                    .iter()
                    .filter(|s| s.category == target.category && s.adverse == target.adverse)
                    .collect();
                if pool.is_empty() {
                    return Err(SynthError::MissingRoundOne {
                        category: target.category,
                        adverse: target.adverse,
                    });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut shuffled = pool.clone();
                shuffled.shuffle(&mut rng);
                let refs: Vec<String> = shuffled
                    .iter()
                    .take(references_per_prompt.max(1))
                    .map(|s| s.text.clone())
                    .collect();
                (refs, Some(pool[0].batch_id.clone()))
            }
        };

        let adverse_tag = if target.adverse { "adverse" } else { "nonadverse" };
        let batch_id = format!(
            "gen-r{round}-{}-{adverse_tag}",
            target.category.canonical_name().to_lowercase()
        );

        let mut messages = build_generation_prompt(target.category, target.adverse, &references)?;
        let mut unique: Vec<String> = Vec::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut requests = 0usize;
        while unique.len() < n_per_category {
            if requests >= MAX_REQUESTS_PER_TARGET {
                return Err(SynthError::InsufficientGeneration {
                    batch_id,
                    got: unique.len(),
                    want: n_per_category,
                });
            }
            let outcomes = complete_chat_batch(config, &[messages.clone()], cache)?;
            let outcome = outcomes
                .into_iter()
                .next()
                .expect("one outcome per request")
                .map_err(SynthError::Backend)?;
            requests += 1;
            for sentence in parse_generation_response(&outcome.content) {
                if unique.len() >= n_per_category {
                    break;
                }
                if seen.insert(sentence.clone()) {
                    unique.push(sentence);
                }
            }
            // Continue the conversation when the quota is not yet met so
            // the follow-up request is distinct (and separately cacheable).
            messages.push(ChatMessage::assistant(outcome.content));
            messages.push(ChatMessage::user(
                "Please continue with more sentences in the same numbered format.",
            ));
        }

        for (i, text) in unique.into_iter().enumerate() {
            out.push(SyntheticSentence {
                id: format!("{batch_id}-{:03}", i + 1),
                text,
                category: target.category,
                adverse: target.adverse,
                round,
                batch_id: batch_id.clone(),
                reference_batch: reference_batch.clone(),
                validated: ValidationStatus::Unreviewed,
                corrected_labels: None,
            });
        }
    }
    Ok(out)
}

const INJECTION_TEMPLATE_SUFFIX: &str = "\n swap the sentences patients above to one of the race/ethnicity [asian, black, white, hispanic] and gender, and put the modified race and gender in bracket at the beginning like this \n Owner operator food truck selling gourmet grilled cheese sandwiches around town => \n [Asian female] Asian woman owner operator of a food truck selling gourmet grilled cheese sandwiches around town";

/// Render the demographic-injection prompt for one batch of sentences
/// (batched, by default ten at a time, to encourage demographic
/// variation across the rewrites).
pub fn build_demo_injection_prompt(
    batch: &[SyntheticSentence],
) -> Result<Vec<ChatMessage>, SynthError> {
    if batch.is_empty() {
        return Err(SynthError::NoReferences);
    }
    let originals: Vec<&str> = batch.iter().map(|s| s.text.as_str()).collect();
    Ok(vec![ChatMessage::user(format!(
        "{}{INJECTION_TEMPLATE_SUFFIX}",
        originals.join("\n")
    ))])
}

/// A parsed line of injection output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDemoLine {
    pub descriptor: Descriptor,
    pub injected_text: String,
    /// Unknown tokens in the bracket tag, mapped to "none" with a note.
    pub warnings: Vec<String>,
}

/// Parse one injected line: the leading `[...]` tag is split on
/// whitespace into race/ethnicity and gender tokens (case-insensitive);
/// the remainder is the injected text. Lines without a bracket tag are
/// rejected.
pub fn parse_demo_output(line: &str) -> Result<ParsedDemoLine, SynthError> {
    let trimmed = line.trim();
    let rest = trimmed
        .strip_prefix('[')
        .ok_or_else(|| SynthError::MissingBracketTag(line.to_string()))?;
    let (tag, remainder) = rest
        .split_once(']')
        .ok_or_else(|| SynthError::MissingBracketTag(line.to_string()))?;

    let mut race = RaceEthnicity::Unspecified;
    let mut gender = Gender::Unspecified;
    let mut warnings = Vec::new();
    for token in tag.split_whitespace() {
        match token.to_ascii_lowercase().as_str() {
            "asian" => race = RaceEthnicity::Asian,
            "black" => race = RaceEthnicity::Black,
            "white" => race = RaceEthnicity::White,
            "hispanic" => race = RaceEthnicity::Hispanic,
            "male" | "man" => gender = Gender::Male,
            "female" | "woman" => gender = Gender::Female,
            other => warnings.push(format!("unknown descriptor token {other:?}")),
        }
    }
    Ok(ParsedDemoLine {
        descriptor: Descriptor {
            race_ethnicity: race,
            gender,
        },
        injected_text: remainder.trim().to_string(),
        warnings,
    })
}

/// A line that could not be paired during injection.
#[derive(Debug, Clone, Serialize)]
pub struct InjectionDiagnostic {
    pub batch_index: usize,
    pub message: String,
}

/// Run demographic injection over validated sentences in batches,
/// pairing response lines with originals by position.
pub fn inject_demographics(
    config: &RemoteBackendConfig,
    sentences: &[SyntheticSentence],
    batch_size: usize,
    cache: Option<&ResponseCache>,
) -> Result<(Vec<DemoPair>, Vec<InjectionDiagnostic>), SynthError> {
    let batch_size = batch_size.max(1);
    let batches: Vec<&[SyntheticSentence]> = sentences.chunks(batch_size).collect();
    let prompts: Vec<Vec<ChatMessage>> = batches
        .iter()
        .map(|b| build_demo_injection_prompt(b))
        .collect::<Result<_, _>>()?;
    let outcomes = complete_chat_batch(config, &prompts, cache)?;

    let mut pairs = Vec::new();
    let mut diagnostics = Vec::new();
    for (batch_index, (batch, outcome)) in batches.iter().zip(outcomes).enumerate() {
        let outcome = match outcome {
            Ok(o) => o,
            Err(message) => {
                diagnostics.push(InjectionDiagnostic {
                    batch_index,
                    message,
                });
                continue;
            }
        };
        let lines: Vec<&str> = outcome
            .content
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        if lines.len() != batch.len() {
            diagnostics.push(InjectionDiagnostic {
                batch_index,
                message: format!(
                    "expected {} injected lines, got {}",
                    batch.len(),
                    lines.len()
                ),
            });
        }
        for (original, line) in batch.iter().zip(lines) {
            match parse_demo_output(line) {
                Ok(parsed) => {
                    for w in &parsed.warnings {
                        diagnostics.push(InjectionDiagnostic {
                            batch_index,
                            message: format!("{}: {w}", original.id),
                        });
                    }
                    pairs.push(DemoPair {
                        pair_id: format!("pair-{}", original.id),
                        original_id: original.id.clone(),
                        injected_text: parsed.injected_text,
                        race_ethnicity: parsed.descriptor.race_ethnicity,
                        gender: parsed.descriptor.gender,
                        validated: ValidationStatus::Unreviewed,
                    });
                }
                Err(e) => diagnostics.push(InjectionDiagnostic {
                    batch_index,
                    message: e.to_string(),
                }),
            }
        }
    }
    Ok((pairs, diagnostics))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Confirmed,
    Corrected,
    Discarded,
}

/// One reviewer decision from decisions.csv.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationDecision {
    pub id: String,
    pub decision: Decision,
    pub corrected_labels: Option<Vec<GenLabel>>,
}

/// Parse decisions.csv: `id,decision,corrected_labels` where the labels
/// column holds `;`-separated `CATEGORY:adverse` or
/// `CATEGORY:nonadverse` tokens (empty unless decision is corrected).
pub fn parse_decisions_csv(text: &str) -> Result<Vec<ValidationDecision>, SynthError> {
    let mut decisions = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line == "id,decision,corrected_labels" {
            continue;
        }
        let parts: Vec<&str> = line.splitn(3, ',').collect();
        if parts.len() < 2 {
            return Err(SynthError::MalformedDecision {
                line: lineno,
                message: "expected `id,decision[,corrected_labels]`".to_string(),
            });
        }
        let decision = match parts[1].trim() {
            "confirmed" => Decision::Confirmed,
            "corrected" => Decision::Corrected,
            "discarded" => Decision::Discarded,
            other => {
                return Err(SynthError::MalformedDecision {
                    line: lineno,
                    message: format!("unknown decision {other:?}"),
                })
            }
        };
        let corrected_labels = match parts.get(2).map(|s| s.trim()).filter(|s| !s.is_empty()) {
            None => None,
            Some(spec_str) => {
                let mut labels = Vec::new();
                for token in spec_str.split(';').filter(|t| !t.trim().is_empty()) {
                    let (cat, adv) = token.split_once(':').ok_or_else(|| {
                        SynthError::MalformedDecision {
                            line: lineno,
                            message: format!("expected CATEGORY:adverse|nonadverse, got {token:?}"),
                        }
                    })?;
                    let category = parse_label_token(cat).map_err(|e| {
                        SynthError::MalformedDecision {
                            line: lineno,
                            message: e.to_string(),
                        }
                    })?;
                    let adverse = match adv.trim() {
                        "adverse" => true,
                        "nonadverse" => false,
                        other => {
                            return Err(SynthError::MalformedDecision {
                                line: lineno,
                                message: format!("expected adverse|nonadverse, got {other:?}"),
                            })
                        }
                    };
                    labels.push(GenLabel { category, adverse });
                }
                Some(labels)
            }
        };
        decisions.push(ValidationDecision {
            id: parts[0].trim().to_string(),
            decision,
            corrected_labels,
        });
    }
    Ok(decisions)
}

/// Validation tallies after applying reviewer decisions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub generated: usize,
    pub confirmed: usize,
    pub corrected: usize,
    pub discarded: usize,
    pub unreviewed: usize,
    /// Retained sentences with at least one any-task label.
    pub any_task_count: usize,
    /// Retained sentences with at least one adverse-task label.
    pub adverse_task_count: usize,
}

/// Apply reviewer decisions to generated sentences. Assigned labels are
/// preserved; corrections land in `corrected_labels`. Decisions naming
/// unknown items are an error.
pub fn record_validation(
    sentences: &mut [SyntheticSentence],
    decisions: &[ValidationDecision],
) -> Result<ValidationReport, SynthError> {
    for decision in decisions {
        let item = sentences
            .iter_mut()
            .find(|s| s.id == decision.id)
            .ok_or_else(|| SynthError::UnknownItem(decision.id.clone()))?;
        match decision.decision {
            Decision::Confirmed => {
                item.validated = ValidationStatus::Confirmed;
                item.corrected_labels = None;
            }
            Decision::Corrected => {
                let labels = decision.corrected_labels.clone().ok_or_else(|| {
                    SynthError::InvalidDecision {
                        id: decision.id.clone(),
                        message: "corrected decision requires corrected_labels".to_string(),
                    }
                })?;
                item.validated = ValidationStatus::Corrected;
                item.corrected_labels = Some(labels);
            }
            Decision::Discarded => {
                item.validated = ValidationStatus::Discarded;
            }
        }
    }

    let count = |status: ValidationStatus| sentences.iter().filter(|s| s.validated == status).count();
    let retained = sentences.iter().filter(|s| {
        matches!(
            s.validated,
            ValidationStatus::Confirmed | ValidationStatus::Corrected
        )
    });
    let mut any_task_count = 0;
    let mut adverse_task_count = 0;
    for s in retained {
        if !s.labels_for(Task::Any).is_empty() {
            any_task_count += 1;
        }
        if !s.labels_for(Task::Adverse).is_empty() {
            adverse_task_count += 1;
        }
    }
    Ok(ValidationReport {
        generated: sentences.len(),
        confirmed: count(ValidationStatus::Confirmed),
        corrected: count(ValidationStatus::Corrected),
        discarded: count(ValidationStatus::Discarded),
        unreviewed: count(ValidationStatus::Unreviewed),
        any_task_count,
        adverse_task_count,
    })
}

/// Apply decisions to demographic pairs (confirmed/discarded only).
pub fn record_pair_validation(
    pairs: &mut [DemoPair],
    decisions: &[ValidationDecision],
) -> Result<(), SynthError> {
    for decision in decisions {
        let item = pairs
            .iter_mut()
            .find(|p| p.pair_id == decision.id)
            .ok_or_else(|| SynthError::UnknownItem(decision.id.clone()))?;
        item.validated = match decision.decision {
            Decision::Confirmed => ValidationStatus::Confirmed,
            Decision::Discarded => ValidationStatus::Discarded,
            Decision::Corrected => {
                return Err(SynthError::InvalidDecision {
                    id: decision.id.clone(),
                    message: "pairs cannot be corrected, only confirmed or discarded".to_string(),
                })
            }
        };
    }
    Ok(())
}

/// The validated test set for one task: retained sentences that carry at
/// least one label under that task. Discarded and unreviewed items never
/// appear.
pub fn validated_for_task(sentences: &[SyntheticSentence], task: Task) -> Vec<LabeledSentence> {
    sentences
        .iter()
        .filter(|s| {
            matches!(
                s.validated,
                ValidationStatus::Confirmed | ValidationStatus::Corrected
            )
        })
        .filter_map(|s| {
            let labels = s.labels_for(task);
            if labels.is_empty() {
                None
            } else {
                Some(LabeledSentence {
                    id: s.id.clone(),
                    text: s.text.clone(),
                    labels,
                })
            }
        })
        .collect()
}
