//! Chance-corrected inter-annotator agreement: Cohen's kappa for two
//! coders and coincidence-matrix Krippendorff's alpha (nominal metric,
//! missing values supported).

use std::collections::BTreeMap;

use serde::Serialize;

use super::EvalError;
use crate::schema::{Annotation, Category, Task};

/// Cohen's kappa over two aligned binary sequences: (po - pe) / (1 - pe)
/// with marginal-product expected agreement. Returns 1 when observed and
/// expected agreement are both 1.
pub fn cohen_kappa(coder_a: &[bool], coder_b: &[bool]) -> Result<f64, EvalError> {
    if coder_a.len() != coder_b.len() {
        return Err(EvalError::LengthMismatch {
            a: coder_a.len(),
            b: coder_b.len(),
        });
    }
    if coder_a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = coder_a.len() as f64;
    let po = coder_a
        .iter()
        .zip(coder_b)
        .filter(|(a, b)| a == b)
        .count() as f64
        / n;
    let pa1 = coder_a.iter().filter(|v| **v).count() as f64 / n;
    let pb1 = coder_b.iter().filter(|v| **v).count() as f64 / n;
    let pe = pa1 * pb1 + (1.0 - pa1) * (1.0 - pb1);
    if (1.0 - pe).abs() < f64::EPSILON {
        // pe = 1 only when both marginals are degenerate and identical,
        // which forces po = 1.
        return Ok(1.0);
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Krippendorff's alpha for nominal data from a coincidence matrix.
///
/// `units` holds, per unit, the values assigned by whichever coders rated
/// it; units with fewer than two values contribute nothing (missing-data
/// support). Alpha is `1 - Do/De` with
/// `Do = (1/n) * sum of off-diagonal coincidences` and
/// `De = (1/(n(n-1))) * sum over c != k of n_c * n_k`.
pub fn krippendorff_alpha(units: &[Vec<u32>]) -> Result<f64, EvalError> {
    let mut coincidences: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut totals: BTreeMap<u32, f64> = BTreeMap::new();
    let mut n = 0.0;

    for unit in units {
        let m = unit.len();
        if m < 2 {
            continue;
        }
        let weight = 1.0 / (m as f64 - 1.0);
        for (i, &vi) in unit.iter().enumerate() {
            for (j, &vj) in unit.iter().enumerate() {
                if i != j {
                    *coincidences.entry((vi, vj)).or_insert(0.0) += weight;
                }
            }
        }
        n += m as f64;
        for &v in unit {
            *totals.entry(v).or_insert(0.0) += 1.0;
        }
    }

    if n == 0.0 {
        return Err(EvalError::DegenerateAgreement);
    }

    let observed_disagreement: f64 = coincidences
        .iter()
        .filter(|((c, k), _)| c != k)
        .map(|(_, v)| v)
        .sum::<f64>()
        / n;
    let mut expected_pairs = 0.0;
    for (&c, &nc) in &totals {
        for (&k, &nk) in &totals {
            if c != k {
                expected_pairs += nc * nk;
            }
        }
    }
    let expected_disagreement = expected_pairs / (n * (n - 1.0));

    if expected_disagreement == 0.0 {
        // Only one value ever occurs; there is no disagreement to correct
        // for, which we report as perfect agreement.
        return Ok(1.0);
    }
    Ok(1.0 - observed_disagreement / expected_disagreement)
}

/// Class-wise and overall agreement between two annotators on the same
/// sentences.
#[derive(Debug, Clone, Serialize)]
pub struct AgreementReport {
    pub task: Task,
    pub per_label: Vec<(Category, LabelAgreement)>,
    pub overall: LabelAgreement,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LabelAgreement {
    pub alpha: f64,
    pub kappa: f64,
}

/// Build the class-wise agreement table for one task. Units are
/// sentences; both annotators must cover the same sentence ids. Overall
/// values pool every (sentence, category) binary decision.
pub fn agreement_report(
    coder_a: &[Annotation],
    coder_b: &[Annotation],
    task: Task,
) -> Result<AgreementReport, EvalError> {
    fn by_id(anns: &[Annotation]) -> BTreeMap<String, &Annotation> {
        anns.iter().map(|a| (a.sentence_id.clone(), a)).collect()
    }
    let map_a = by_id(coder_a);
    let map_b = by_id(coder_b);
    if map_a.len() != map_b.len() || map_a.keys().any(|k| !map_b.contains_key(k)) {
        let example = map_a
            .keys()
            .find(|k| !map_b.contains_key(*k))
            .or_else(|| map_b.keys().find(|k| !map_a.contains_key(*k)))
            .cloned()
            .unwrap_or_default();
        return Err(EvalError::IdMismatch { example });
    }

    let mut per_label = Vec::new();
    let mut pooled_a = Vec::new();
    let mut pooled_b = Vec::new();
    for cat in Category::ALL {
        let mut seq_a = Vec::with_capacity(map_a.len());
        let mut seq_b = Vec::with_capacity(map_b.len());
        for (id, ann_a) in &map_a {
            let ann_b = map_b[id];
            let has = |ann: &Annotation| {
                crate::schema::project(ann, task).labels.contains(&cat)
            };
            seq_a.push(has(ann_a));
            seq_b.push(has(ann_b));
        }
        pooled_a.extend_from_slice(&seq_a);
        pooled_b.extend_from_slice(&seq_b);
        let kappa = cohen_kappa(&seq_a, &seq_b)?;
        let alpha_units: Vec<Vec<u32>> = seq_a
            .iter()
            .zip(&seq_b)
            .map(|(a, b)| vec![*a as u32, *b as u32])
            .collect();
        let alpha = krippendorff_alpha(&alpha_units)?;
        per_label.push((cat, LabelAgreement { alpha, kappa }));
    }

    let overall_kappa = cohen_kappa(&pooled_a, &pooled_b)?;
    let overall_units: Vec<Vec<u32>> = pooled_a
        .iter()
        .zip(&pooled_b)
        .map(|(a, b)| vec![*a as u32, *b as u32])
        .collect();
    let overall_alpha = krippendorff_alpha(&overall_units)?;

    Ok(AgreementReport {
        task,
        per_label,
        overall: LabelAgreement {
            alpha: overall_alpha,
            kappa: overall_kappa,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{AnnotationPair, Attribute};
    use std::collections::BTreeSet;

    #[test]
    fn kappa_hand_cases() {
        // po = 0.75, pe = 0.5 -> kappa 0.5.
        let a = [true, true, false, false];
        let b = [true, false, false, false];
        assert!((cohen_kappa(&a, &b).unwrap() - 0.5).abs() < 1e-12);

        // po = 0, pe = 0.5 -> kappa -1.
        let a = [true, false];
        let b = [false, true];
        assert!((cohen_kappa(&a, &b).unwrap() + 1.0).abs() < 1e-12);

        // Identical sequences with both classes present.
        let a = [true, false, true, false];
        assert!((cohen_kappa(&a, &a).unwrap() - 1.0).abs() < 1e-12);

        assert!(cohen_kappa(&[true], &[true, false]).is_err());
        assert!(cohen_kappa(&[], &[]).is_err());
    }

    #[test]
    fn alpha_hand_cases() {
        // Same data as the kappa hand case: alpha = 8/15.
        let units: Vec<Vec<u32>> = vec![vec![1, 1], vec![1, 0], vec![0, 0], vec![0, 0]];
        assert!((krippendorff_alpha(&units).unwrap() - 8.0 / 15.0).abs() < 1e-12);

        // Perfect agreement with both classes present.
        let units: Vec<Vec<u32>> = vec![vec![1, 1], vec![0, 0]];
        assert!((krippendorff_alpha(&units).unwrap() - 1.0).abs() < 1e-12);

        // All units single-valued is degenerate.
        let units: Vec<Vec<u32>> = vec![vec![1], vec![0]];
        assert!(krippendorff_alpha(&units).is_err());
    }

    #[test]
    fn alpha_supports_missing_values() {
        // A third coder rated only the first unit; single-valued units
        // are ignored entirely.
        let units: Vec<Vec<u32>> = vec![vec![1, 1, 0], vec![1, 0], vec![0, 0], vec![0, 0], vec![1]];
        let alpha = krippendorff_alpha(&units).unwrap();
        assert!((-1.0..=1.0).contains(&alpha));
    }

    #[test]
    fn kappa_and_alpha_differ_on_two_coder_data() {
        let a = [true, true, false, false];
        let b = [true, false, false, false];
        let kappa = cohen_kappa(&a, &b).unwrap();
        let units: Vec<Vec<u32>> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| vec![*x as u32, *y as u32])
            .collect();
        let alpha = krippendorff_alpha(&units).unwrap();
        assert!((kappa - 0.5).abs() < 1e-12);
        assert!((alpha - 8.0 / 15.0).abs() < 1e-12);
        assert!(kappa != alpha);
    }

    #[test]
    fn report_covers_all_categories() {
        let ann = |id: &str, pairs: &[(Category, Attribute)]| Annotation {
            sentence_id: id.to_string(),
            pairs: pairs
                .iter()
                .map(|(c, a)| AnnotationPair::new(*c, *a).unwrap())
                .collect::<BTreeSet<_>>(),
        };
        let a = vec![
            ann("s1", &[(Category::Support, Attribute::SupportMinus)]),
            ann("s2", &[(Category::Employment, Attribute::Retired)]),
            ann("s3", &[]),
            ann("s4", &[(Category::Relationship, Attribute::Widowed)]),
        ];
        let mut b = a.clone();
        b[1] = ann("s2", &[]);
        let report = agreement_report(&a, &b, Task::Any).unwrap();
        assert_eq!(report.per_label.len(), 6);
        for (_, la) in &report.per_label {
            assert!((-1.0..=1.0).contains(&la.alpha));
            assert!((-1.0..=1.0).contains(&la.kappa));
        }
        let perfect = agreement_report(&a, &a, Task::Any).unwrap();
        assert!((perfect.overall.kappa - 1.0).abs() < 1e-12);
        assert!((perfect.overall.alpha - 1.0).abs() < 1e-12);
    }
}
