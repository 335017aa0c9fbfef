//! Demographic-injection bias audit: classify sentence pairs with and
//! without injected descriptors, compare mismatch rates across groups,
//! and test differences with two-proportion z and chi-squared statistics.

pub mod stats;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::classify::{SentenceClassifier, SentenceInput};
use crate::schema::{Category, Task};
use crate::synthgen::{DemoPair, Descriptor, SyntheticSentence};
use stats::{chi_squared_sf, erfc};

#[derive(Debug, Error)]
pub enum BiasError {
    #[error("counts out of range: {0}")]
    BadCounts(String),
    #[error("no outcomes to rate")]
    EmptyInput,
    #[error("bad contingency table: {0}")]
    BadTable(String),
    #[error("summaries use different groupings or tasks")]
    GroupingMismatch,
    #[error("pair references unknown original sentence {0:?}")]
    UnknownOriginal(String),
}

/// The classification of one pair under identical settings, and whether
/// the two label sets differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairOutcome {
    pub pair_id: String,
    pub descriptor: Descriptor,
    /// Gold labels of the original synthetic sentence under the task.
    pub gold_labels: BTreeSet<Category>,
    pub pred_original: BTreeSet<Category>,
    pub pred_injected: BTreeSet<Category>,
    pub mismatch: bool,
}

/// Pairs that could not be classified, with the failure message.
pub type ExcludedPairs = Vec<(String, String)>;

/// Classify both members of every pair with the same backend and compare
/// label sets. A backend failure on either member excludes the pair,
/// returned separately with the failure message.
pub fn evaluate_pairs(
    pairs: &[DemoPair],
    originals: &[SyntheticSentence],
    backend: &dyn SentenceClassifier,
    task: Task,
) -> Result<(Vec<PairOutcome>, ExcludedPairs), BiasError> {
    let by_id: BTreeMap<&str, &SyntheticSentence> =
        originals.iter().map(|s| (s.id.as_str(), s)).collect();

    let mut original_inputs = Vec::with_capacity(pairs.len());
    let mut injected_inputs = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let original = by_id
            .get(pair.original_id.as_str())
            .ok_or_else(|| BiasError::UnknownOriginal(pair.original_id.clone()))?;
        original_inputs.push(SentenceInput {
            id: pair.pair_id.clone(),
            text: original.text.clone(),
        });
        injected_inputs.push(SentenceInput {
            id: pair.pair_id.clone(),
            text: pair.injected_text.clone(),
        });
    }

    let original_preds = backend.classify(&original_inputs, task);
    let injected_preds = backend.classify(&injected_inputs, task);

    let mut outcomes = Vec::new();
    let mut excluded = Vec::new();
    for ((pair, orig), inj) in pairs.iter().zip(original_preds).zip(injected_preds) {
        match (orig, inj) {
            (Ok(pred_original), Ok(pred_injected)) => {
                let mismatch = pred_original != pred_injected;
                let gold_labels = by_id[pair.original_id.as_str()].labels_for(task);
                outcomes.push(PairOutcome {
                    pair_id: pair.pair_id.clone(),
                    descriptor: Descriptor {
                        race_ethnicity: pair.race_ethnicity,
                        gender: pair.gender,
                    },
                    gold_labels,
                    pred_original,
                    pred_injected,
                    mismatch,
                });
            }
            (Err(e), _) | (_, Err(e)) => excluded.push((pair.pair_id.clone(), e)),
        }
    }
    Ok((outcomes, excluded))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Overall,
    RaceEthnicity,
    Gender,
    GoldLabel,
}

/// Mismatch count, pair count and rate for one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRate {
    pub group: String,
    pub mismatches: usize,
    pub pairs: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRates {
    pub group_by: GroupBy,
    pub rates: Vec<GroupRate>,
}

impl GroupRates {
    pub fn get(&self, group: &str) -> Option<&GroupRate> {
        self.rates.iter().find(|r| r.group == group)
    }
}

fn race_name(pair: &PairOutcome) -> String {
    serde_json::to_value(pair.descriptor.race_ethnicity)
        .unwrap()
        .as_str()
        .unwrap()
        .to_string()
}

fn gender_name(pair: &PairOutcome) -> String {
    serde_json::to_value(pair.descriptor.gender)
        .unwrap()
        .as_str()
        .unwrap()
        .to_string()
}

/// Mismatch rates per group. Gold-label grouping counts a pair once per
/// gold label it carries (a pair with two gold labels appears in both
/// groups); pairs with no gold label fall under `NO_SDOH`.
pub fn mismatch_rates(outcomes: &[PairOutcome], group_by: GroupBy) -> Result<GroupRates, BiasError> {
    if outcomes.is_empty() {
        return Err(BiasError::EmptyInput);
    }
    let mut buckets: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut add = |group: String, mismatch: bool| {
        let entry = buckets.entry(group).or_insert((0, 0));
        entry.1 += 1;
        if mismatch {
            entry.0 += 1;
        }
    };
    for outcome in outcomes {
        match group_by {
            GroupBy::Overall => add("overall".to_string(), outcome.mismatch),
            GroupBy::RaceEthnicity => add(race_name(outcome), outcome.mismatch),
            GroupBy::Gender => add(gender_name(outcome), outcome.mismatch),
            GroupBy::GoldLabel => {
                if outcome.gold_labels.is_empty() {
                    add("NO_SDOH".to_string(), outcome.mismatch);
                } else {
                    for label in &outcome.gold_labels {
                        add(label.canonical_name().to_string(), outcome.mismatch);
                    }
                }
            }
        }
    }
    let rates = buckets
        .into_iter()
        .map(|(group, (mismatches, pairs))| GroupRate {
            group,
            mismatches,
            pairs,
            rate: mismatches as f64 / pairs as f64,
        })
        .collect();
    Ok(GroupRates { group_by, rates })
}

/// Pooled-variance two-proportion z-test result. `degenerate` marks a
/// pooled proportion of exactly 0 or 1, where the test is vacuous and
/// p is reported as 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZTestResult {
    pub z: f64,
    pub p_value: f64,
    pub degenerate: bool,
}

/// Two-sided two-proportion z-test with pooled variance:
/// z = (p1 - p2) / sqrt(p(1-p)(1/n1 + 1/n2)).
pub fn two_proportion_z(
    c1: usize,
    n1: usize,
    c2: usize,
    n2: usize,
) -> Result<ZTestResult, BiasError> {
    if n1 == 0 || n2 == 0 {
        return Err(BiasError::BadCounts("sample sizes must be >= 1".to_string()));
    }
    if c1 > n1 || c2 > n2 {
        return Err(BiasError::BadCounts(format!(
            "counts exceed sample sizes ({c1}/{n1}, {c2}/{n2})"
        )));
    }
    let pooled = (c1 + c2) as f64 / (n1 + n2) as f64;
    if pooled == 0.0 || pooled == 1.0 {
        return Ok(ZTestResult {
            z: 0.0,
            p_value: 1.0,
            degenerate: true,
        });
    }
    let p1 = c1 as f64 / n1 as f64;
    let p2 = c2 as f64 / n2 as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let z = (p1 - p2) / se;
    // Two-sided p from the normal survival function.
    let p_value = erfc(z.abs() / std::f64::consts::SQRT_2);
    Ok(ZTestResult {
        z,
        p_value,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquaredResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson chi-squared test of independence on an r x c contingency
/// table, without continuity correction. Zero rows or columns (which
/// force zero expected counts) are rejected.
pub fn chi_squared(table: &[Vec<u64>]) -> Result<ChiSquaredResult, BiasError> {
    let rows = table.len();
    if rows < 2 {
        return Err(BiasError::BadTable("need at least 2 rows".to_string()));
    }
    let cols = table[0].len();
    if cols < 2 {
        return Err(BiasError::BadTable("need at least 2 columns".to_string()));
    }
    if table.iter().any(|r| r.len() != cols) {
        return Err(BiasError::BadTable("ragged rows".to_string()));
    }
    let row_totals: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_totals: Vec<u64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    if row_totals.contains(&0) {
        return Err(BiasError::BadTable("zero row total".to_string()));
    }
    if col_totals.contains(&0) {
        return Err(BiasError::BadTable("zero column total".to_string()));
    }
    let grand: u64 = row_totals.iter().sum();

    let mut statistic = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let expected = row_totals[i] as f64 * col_totals[j] as f64 / grand as f64;
            let diff = table[i][j] as f64 - expected;
            statistic += diff * diff / expected;
        }
    }
    let df = (rows - 1) * (cols - 1);
    Ok(ChiSquaredResult {
        statistic,
        df,
        p_value: chi_squared_sf(statistic, df as f64),
    })
}

/// Grouped mismatch rates for one model on one task.
#[derive(Debug, Clone, Serialize)]
pub struct ModelBiasSummary {
    pub model_id: String,
    pub task: Task,
    pub overall: GroupRates,
    pub by_race: GroupRates,
    pub by_gender: GroupRates,
    pub by_gold_label: GroupRates,
}

/// Build all groupings for one model's outcomes.
pub fn summarize_model(
    model_id: &str,
    task: Task,
    outcomes: &[PairOutcome],
) -> Result<ModelBiasSummary, BiasError> {
    Ok(ModelBiasSummary {
        model_id: model_id.to_string(),
        task,
        overall: mismatch_rates(outcomes, GroupBy::Overall)?,
        by_race: mismatch_rates(outcomes, GroupBy::RaceEthnicity)?,
        by_gender: mismatch_rates(outcomes, GroupBy::Gender)?,
        by_gold_label: mismatch_rates(outcomes, GroupBy::GoldLabel)?,
    })
}

/// One statistical comparison in the significance report.
#[derive(Debug, Clone, Serialize)]
pub struct SignificanceEntry {
    pub test: String,
    pub comparison: String,
    pub model: String,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SignificanceReport {
    pub alpha: f64,
    pub entries: Vec<SignificanceEntry>,
}

/// Compare two models: an overall A-vs-B two-proportion test, a
/// within-model chi-squared across race/ethnicity groups, and a
/// within-model male-vs-female z-test, flagging p <= alpha.
pub fn significance_report(
    a: &ModelBiasSummary,
    b: &ModelBiasSummary,
    alpha: f64,
) -> Result<SignificanceReport, BiasError> {
    if a.task != b.task {
        return Err(BiasError::GroupingMismatch);
    }
    let mut entries = Vec::new();

    let ra = a.overall.get("overall").ok_or(BiasError::EmptyInput)?;
    let rb = b.overall.get("overall").ok_or(BiasError::EmptyInput)?;
    let z = two_proportion_z(ra.mismatches, ra.pairs, rb.mismatches, rb.pairs)?;
    entries.push(SignificanceEntry {
        test: "two_proportion_z".to_string(),
        comparison: format!("overall: {} vs {}", a.model_id, b.model_id),
        model: format!("{} vs {}", a.model_id, b.model_id),
        statistic: z.z,
        p_value: z.p_value,
        significant: !z.degenerate && z.p_value <= alpha,
    });

    for summary in [a, b] {
        // Race groups with pairs; the test needs variation in both
        // dimensions, otherwise report the comparison as vacuous.
        let groups: Vec<&GroupRate> = summary
            .by_race
            .rates
            .iter()
            .filter(|r| r.pairs > 0)
            .collect();
        let table: Vec<Vec<u64>> = groups
            .iter()
            .map(|r| vec![r.mismatches as u64, (r.pairs - r.mismatches) as u64])
            .collect();
        let total_mismatches: u64 = table.iter().map(|r| r[0]).sum();
        let total_matches: u64 = table.iter().map(|r| r[1]).sum();
        let entry = if groups.len() < 2 || total_mismatches == 0 || total_matches == 0 {
            SignificanceEntry {
                test: "chi_squared".to_string(),
                comparison: "race/ethnicity groups".to_string(),
                model: summary.model_id.clone(),
                statistic: 0.0,
                p_value: 1.0,
                significant: false,
            }
        } else {
            let result = chi_squared(&table)?;
            SignificanceEntry {
                test: "chi_squared".to_string(),
                comparison: "race/ethnicity groups".to_string(),
                model: summary.model_id.clone(),
                statistic: result.statistic,
                p_value: result.p_value,
                significant: result.p_value <= alpha,
            }
        };
        entries.push(entry);

        let male = summary.by_gender.get("male");
        let female = summary.by_gender.get("female");
        if let (Some(m), Some(f)) = (male, female) {
            let z = two_proportion_z(f.mismatches, f.pairs, m.mismatches, m.pairs)?;
            entries.push(SignificanceEntry {
                test: "two_proportion_z".to_string(),
                comparison: "female vs male".to_string(),
                model: summary.model_id.clone(),
                statistic: z.z,
                p_value: z.p_value,
                significant: !z.degenerate && z.p_value <= alpha,
            });
        }
    }

    Ok(SignificanceReport { alpha, entries })
}
