//! Classification metrics, discrepancy tables, ablation schedules, and
//! patient-level aggregation against structured Z-codes.

mod agreement;

pub use agreement::{agreement_report, cohen_kappa, krippendorff_alpha, AgreementReport};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::LabeledSentence;
use crate::schema::{Category, ZCodeMap};

/// A class under one-vs-rest evaluation: one of the six categories, the
/// derived No-SDoH class (label set empty), or the derived presence class
/// (label set non-empty) used by the patient-level tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvalLabel {
    Category(Category),
    NoSdoh,
    Presence,
}

impl EvalLabel {
    /// The seven classes in report-table order.
    pub const REPORT_ORDER: [EvalLabel; 7] = [
        EvalLabel::NoSdoh,
        EvalLabel::Category(Category::Employment),
        EvalLabel::Category(Category::Housing),
        EvalLabel::Category(Category::Parent),
        EvalLabel::Category(Category::Relationship),
        EvalLabel::Category(Category::Support),
        EvalLabel::Category(Category::Transportation),
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            EvalLabel::Category(c) => c.display_name(),
            EvalLabel::NoSdoh => "No SDoH",
            EvalLabel::Presence => "Any mention",
        }
    }

    fn holds(self, labels: &BTreeSet<Category>) -> bool {
        match self {
            EvalLabel::Category(c) => labels.contains(&c),
            EvalLabel::NoSdoh => labels.is_empty(),
            EvalLabel::Presence => !labels.is_empty(),
        }
    }
}

impl fmt::Display for EvalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Sentence,
    Patient,
}

/// One-vs-rest confusion counts for a single class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub label: EvalLabel,
    pub granularity: Granularity,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

impl ConfusionCounts {
    pub fn new(
        label: EvalLabel,
        granularity: Granularity,
        tp: usize,
        fp: usize,
        r#fn: usize,
        tn: usize,
    ) -> Self {
        ConfusionCounts {
            label,
            granularity,
            true_positives: tp,
            false_positives: fp,
            false_negatives: r#fn,
            true_negatives: tn,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }
}

/// Precision, recall and F1. Zero denominators yield 0 by convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unit ids differ between golds and predictions (e.g. {example:?})")]
    IdMismatch { example: String },
    #[error("sequences have different lengths ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("degenerate agreement input: no unit has two or more values")]
    DegenerateAgreement,
    #[error("sentence {0:?} has no patient mapping")]
    OrphanSentence(String),
    #[error("patient {0:?} appears in the Z-code file but not in the corpus")]
    UnknownPatient(String),
    #[error("percent {0} is outside 0..=100")]
    BadPercent(u8),
    #[error("the 100% ablation point with a missing synthetic pool leaves an empty training set")]
    EmptyTrainingSet,
    #[error(transparent)]
    Schema(#[from] crate::schema::SchemaError),
}

/// Label sets keyed by unit id (sentence or patient).
pub type UnitLabels = BTreeMap<String, BTreeSet<Category>>;

fn check_aligned(golds: &UnitLabels, preds: &UnitLabels) -> Result<(), EvalError> {
    if golds.len() != preds.len() {
        let example = golds
            .keys()
            .find(|k| !preds.contains_key(*k))
            .or_else(|| preds.keys().find(|k| !golds.contains_key(*k)))
            .cloned()
            .unwrap_or_default();
        return Err(EvalError::IdMismatch { example });
    }
    for k in golds.keys() {
        if !preds.contains_key(k) {
            return Err(EvalError::IdMismatch { example: k.clone() });
        }
    }
    Ok(())
}

/// One-vs-rest confusion counting over aligned label sets.
pub fn confusion(
    golds: &UnitLabels,
    preds: &UnitLabels,
    label: EvalLabel,
    granularity: Granularity,
) -> Result<ConfusionCounts, EvalError> {
    check_aligned(golds, preds)?;
    let mut c = ConfusionCounts::new(label, granularity, 0, 0, 0, 0);
    for (id, gold) in golds {
        let pred = &preds[id];
        match (label.holds(gold), label.holds(pred)) {
            (true, true) => c.true_positives += 1,
            (false, true) => c.false_positives += 1,
            (true, false) => c.false_negatives += 1,
            (false, false) => c.true_negatives += 1,
        }
    }
    Ok(c)
}

/// Confusion for "has at least one label", the patient-level presence
/// comparison.
pub fn presence_confusion(
    golds: &UnitLabels,
    preds: &UnitLabels,
    granularity: Granularity,
) -> Result<ConfusionCounts, EvalError> {
    confusion(golds, preds, EvalLabel::Presence, granularity)
}

/// Compute precision, recall and F1 from counts. Each value is 0 when its
/// denominator is 0; f1 is 0 when precision + recall is 0.
pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.true_positives, c.true_positives + c.false_positives);
    let recall = ratio(c.true_positives, c.true_positives + c.false_negatives);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        precision,
        recall,
        f1,
    }
}

/// Unweighted mean of per-label F1. The default convention averages over
/// all seven classes including No-SDoH; pass `include_no_sdoh = false` to
/// average the six categories only.
pub fn macro_f1(per_label: &[(EvalLabel, Metrics)], include_no_sdoh: bool) -> Result<f64, EvalError> {
    let f1s: Vec<f64> = per_label
        .iter()
        .filter(|(label, _)| include_no_sdoh || *label != EvalLabel::NoSdoh)
        .map(|(_, m)| m.f1)
        .collect();
    if f1s.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(f1s.iter().sum::<f64>() / f1s.len() as f64)
}

/// Per-label confusions and metrics over the seven report classes (or six
/// when `include_no_sdoh` is false), in report order.
pub fn evaluate_labels(
    golds: &UnitLabels,
    preds: &UnitLabels,
    granularity: Granularity,
    include_no_sdoh: bool,
) -> Result<Vec<(EvalLabel, ConfusionCounts, Metrics)>, EvalError> {
    let mut out = Vec::new();
    for label in EvalLabel::REPORT_ORDER {
        if label == EvalLabel::NoSdoh && !include_no_sdoh {
            continue;
        }
        let c = confusion(golds, preds, label, granularity)?;
        let m = metrics(&c);
        out.push((label, c, m));
    }
    Ok(out)
}

/// One row of the discrepancy ranking: a label present only in the gold
/// set paired with a label present only in the prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscrepancyRow {
    pub gold: EvalLabel,
    pub pred: EvalLabel,
    pub count: usize,
}

/// Count ordered (gold-only, pred-only) label pairs across units,
/// substituting No-SDoH for an empty side, ranked by descending count.
pub fn discrepancy_table(
    golds: &UnitLabels,
    preds: &UnitLabels,
) -> Result<Vec<DiscrepancyRow>, EvalError> {
    check_aligned(golds, preds)?;
    let mut counts: BTreeMap<(EvalLabel, EvalLabel), usize> = BTreeMap::new();
    for (id, gold) in golds {
        let pred = &preds[id];
        let gold_only: Vec<EvalLabel> = gold
            .difference(pred)
            .map(|c| EvalLabel::Category(*c))
            .collect();
        let pred_only: Vec<EvalLabel> = pred
            .difference(gold)
            .map(|c| EvalLabel::Category(*c))
            .collect();
        let gold_side = if gold_only.is_empty() {
            if pred_only.is_empty() {
                continue;
            }
            vec![EvalLabel::NoSdoh]
        } else {
            gold_only
        };
        let pred_side = if pred_only.is_empty() {
            vec![EvalLabel::NoSdoh]
        } else {
            pred_only
        };
        for g in &gold_side {
            for p in &pred_side {
                *counts.entry((*g, *p)).or_insert(0) += 1;
            }
        }
    }
    let mut rows: Vec<DiscrepancyRow> = counts
        .into_iter()
        .map(|((gold, pred), count)| DiscrepancyRow { gold, pred, count })
        .collect();
    rows.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(a.gold.cmp(&b.gold))
            .then(a.pred.cmp(&b.pred))
    });
    Ok(rows)
}

/// One ablation training export: the gold sentences retained at this
/// point, optionally augmented with the synthetic pool.
#[derive(Debug, Clone)]
pub struct AblationExport {
    pub percent_removed: u8,
    pub with_synthetic: bool,
    pub sentences: Vec<LabeledSentence>,
}

/// A filled Table-style ablation report row.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub percent_removed: u8,
    pub with_synthetic: bool,
    pub macro_f1: f64,
    pub per_label_f1: Vec<(EvalLabel, f64)>,
}

/// Build the ablation training exports. For each percent `p`,
/// `floor(p% * positives)` positive and `floor(p% * negatives)` negative
/// gold sentences are removed (deterministic for a fixed seed). When a
/// synthetic pool is supplied, each point is emitted both without and
/// with the pool appended. Removal selection is by seeded shuffle;
/// retained sentences keep their original order.
pub fn ablation_schedule(
    train: &[LabeledSentence],
    percents: &[u8],
    seed: u64,
    synthetic: Option<&[LabeledSentence]>,
) -> Result<Vec<AblationExport>, EvalError> {
    for p in percents {
        if *p > 100 {
            return Err(EvalError::BadPercent(*p));
        }
    }
    if synthetic.map(|s| s.is_empty()).unwrap_or(false) && percents.contains(&100) {
        return Err(EvalError::EmptyTrainingSet);
    }

    let positives: Vec<usize> = (0..train.len()).filter(|i| !train[*i].labels.is_empty()).collect();
    let negatives: Vec<usize> = (0..train.len()).filter(|i| train[*i].labels.is_empty()).collect();

    let mut exports = Vec::new();
    for &p in percents {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(p as u64));
        let removed: BTreeSet<usize> = {
            let mut set = BTreeSet::new();
            for pool in [&positives, &negatives] {
                let remove_count = (pool.len() * p as usize) / 100;
                let mut shuffled = pool.clone();
                shuffled.shuffle(&mut rng);
                set.extend(shuffled.into_iter().take(remove_count));
            }
            set
        };
        let retained: Vec<LabeledSentence> = (0..train.len())
            .filter(|i| !removed.contains(i))
            .map(|i| train[i].clone())
            .collect();

        exports.push(AblationExport {
            percent_removed: p,
            with_synthetic: false,
            sentences: retained.clone(),
        });
        if let Some(pool) = synthetic {
            let mut augmented = retained;
            augmented.extend(pool.iter().cloned());
            exports.push(AblationExport {
                percent_removed: p,
                with_synthetic: true,
                sentences: augmented,
            });
        }
    }
    Ok(exports)
}

/// Union of predicted labels across all of a patient's sentences.
/// `sentence_patients` maps sentence id to patient id; a prediction for a
/// sentence without a mapping is an error.
pub fn patient_aggregate(
    preds: &UnitLabels,
    sentence_patients: &BTreeMap<String, String>,
) -> Result<UnitLabels, EvalError> {
    let mut out: UnitLabels = BTreeMap::new();
    // Every known patient appears in the output, even with no labels.
    for patient in sentence_patients.values() {
        out.entry(patient.clone()).or_default();
    }
    for (sentence_id, labels) in preds {
        let patient = sentence_patients
            .get(sentence_id)
            .ok_or_else(|| EvalError::OrphanSentence(sentence_id.clone()))?;
        out.entry(patient.clone()).or_default().extend(labels.iter().copied());
    }
    Ok(out)
}

/// Evaluation of one label source against patient-level gold labels.
#[derive(Debug, Clone, Serialize)]
pub struct SystemEval {
    pub presence: (ConfusionCounts, Metrics),
    pub per_label: Vec<(EvalLabel, ConfusionCounts, Metrics)>,
    pub macro_f1: f64,
}

fn evaluate_system(golds: &UnitLabels, preds: &UnitLabels) -> Result<SystemEval, EvalError> {
    let presence = presence_confusion(golds, preds, Granularity::Patient)?;
    let presence_metrics = metrics(&presence);
    let per_label = evaluate_labels(golds, preds, Granularity::Patient, true)?;
    let keyed: Vec<(EvalLabel, Metrics)> = per_label.iter().map(|(l, _, m)| (*l, *m)).collect();
    let macro_f1 = macro_f1(&keyed, true)?;
    Ok(SystemEval {
        presence: (presence, presence_metrics),
        per_label,
        macro_f1,
    })
}

/// Patient-level comparison of model predictions and mapped Z-codes
/// against gold patient labels.
#[derive(Debug, Clone, Serialize)]
pub struct ZCodeComparison {
    pub model_vs_gold: SystemEval,
    pub zcode_vs_gold: SystemEval,
    /// Z-codes that matched no table entry, with their patients.
    pub unmapped_codes: Vec<(String, String)>,
}

/// Compare patient-level model labels and Z-code-derived labels against
/// gold. All three label sources share the gold patient universe;
/// patients present only in the Z-code file are an error, patients with
/// no codes map to the empty set.
pub fn compare_zcodes(
    gold_patient_labels: &UnitLabels,
    model_patient_labels: &UnitLabels,
    patient_zcodes: &BTreeMap<String, Vec<String>>,
    map: &ZCodeMap,
) -> Result<ZCodeComparison, EvalError> {
    let mut zcode_labels: UnitLabels = BTreeMap::new();
    let mut unmapped = Vec::new();
    for patient in gold_patient_labels.keys() {
        zcode_labels.insert(patient.clone(), BTreeSet::new());
    }
    for (patient, codes) in patient_zcodes {
        if !gold_patient_labels.contains_key(patient) {
            return Err(EvalError::UnknownPatient(patient.clone()));
        }
        let (union, missing) = map.map_codes(codes.iter().map(String::as_str))?;
        for code in missing {
            unmapped.push((patient.clone(), code));
        }
        zcode_labels.insert(patient.clone(), union);
    }
    Ok(ZCodeComparison {
        model_vs_gold: evaluate_system(gold_patient_labels, model_patient_labels)?,
        zcode_vs_gold: evaluate_system(gold_patient_labels, &zcode_labels)?,
        unmapped_codes: unmapped,
    })
}
