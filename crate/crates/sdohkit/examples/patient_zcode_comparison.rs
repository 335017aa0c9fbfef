//! Patient-level aggregation and the structured-data comparison: union
//! sentence predictions per patient, map Z-codes, and score both against
//! gold patient labels.
//!
//! ```bash
//! cargo run --example patient_zcode_comparison
//! ```

use std::collections::BTreeMap;

use sdohkit::evalkit::{compare_zcodes, patient_aggregate, UnitLabels};
use sdohkit::schema::{Category, ZCodeMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Sentence predictions and their patient provenance.
    let mut sentence_patients = BTreeMap::new();
    let mut preds = UnitLabels::new();
    let mut golds = UnitLabels::new();
    let fixture = [
        ("pat1:0", "pat1", vec![], vec![]),
        ("pat1:1", "pat1", vec![Category::Housing], vec![Category::Housing]),
        ("pat1:2", "pat1", vec![], vec![]),
        ("pat2:0", "pat2", vec![Category::Employment], vec![]),
        ("pat2:1", "pat2", vec![], vec![Category::Support]),
        ("pat3:0", "pat3", vec![], vec![]),
    ];
    for (sentence_id, patient, gold, pred) in fixture {
        sentence_patients.insert(sentence_id.to_string(), patient.to_string());
        golds.insert(sentence_id.to_string(), gold.into_iter().collect());
        preds.insert(sentence_id.to_string(), pred.into_iter().collect());
    }

    let gold_patients = patient_aggregate(&golds, &sentence_patients)?;
    let model_patients = patient_aggregate(&preds, &sentence_patients)?;
    println!("patient-level labels (gold vs model):");
    for (patient, gold) in &gold_patients {
        println!("  {patient}: {:?} vs {:?}", gold, model_patients[patient]);
    }

    // Structured Z-codes for the same patients.
    let mut zcodes = BTreeMap::new();
    zcodes.insert("pat1".to_string(), vec!["Z59.0".to_string()]);
    zcodes.insert("pat3".to_string(), vec!["Z75".to_string()]);

    let comparison = compare_zcodes(&gold_patients, &model_patients, &zcodes, &ZCodeMap::shipped())?;
    let (model_presence, model_metrics) = &comparison.model_vs_gold.presence;
    let (zcode_presence, zcode_metrics) = &comparison.zcode_vs_gold.presence;
    println!(
        "\nmodel vs gold presence: tp={} fp={} fn={} tn={} (recall {:.2})",
        model_presence.true_positives,
        model_presence.false_positives,
        model_presence.false_negatives,
        model_presence.true_negatives,
        model_metrics.recall
    );
    println!(
        "zcode vs gold presence: tp={} fp={} fn={} tn={} (recall {:.2})",
        zcode_presence.true_positives,
        zcode_presence.false_positives,
        zcode_presence.false_negatives,
        zcode_presence.true_negatives,
        zcode_metrics.recall
    );
    println!(
        "\nmacro-F1: model {:.3} vs zcodes {:.3}",
        comparison.model_vs_gold.macro_f1, comparison.zcode_vs_gold.macro_f1
    );
    Ok(())
}
