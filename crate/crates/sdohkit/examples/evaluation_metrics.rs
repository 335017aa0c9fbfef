//! The evaluation kit: per-class confusion and F1, seven-class macro-F1,
//! discrepancy ranking, and inter-annotator agreement.
//!
//! ```bash
//! cargo run --example evaluation_metrics
//! ```

use sdohkit::evalkit::{
    agreement_report, cohen_kappa, discrepancy_table, evaluate_labels, krippendorff_alpha,
    macro_f1, metrics, ConfusionCounts, EvalLabel, Granularity, Metrics, UnitLabels,
};
use sdohkit::report;
use sdohkit::schema::{Annotation, AnnotationPair, Attribute, Category, Task};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Published-style confusion counts reconcile with reported recall.
    let presence = ConfusionCounts::new(EvalLabel::Presence, Granularity::Patient, 89, 3, 4, 58);
    let m = metrics(&presence);
    println!(
        "patient any-mention: precision {:.3}, recall {:.3} (89 of 93 found)",
        m.precision, m.recall
    );

    // Sentence-level evaluation over a small fixture.
    let golds: UnitLabels = [
        ("s1", vec![Category::Support]),
        ("s2", vec![]),
        ("s3", vec![Category::Employment]),
        ("s4", vec![Category::Housing, Category::Support]),
        ("s5", vec![]),
    ]
    .into_iter()
    .map(|(id, cats)| (id.to_string(), cats.into_iter().collect()))
    .collect();
    let preds: UnitLabels = [
        ("s1", vec![Category::Support]),
        ("s2", vec![Category::Support]),
        ("s3", vec![]),
        ("s4", vec![Category::Housing]),
        ("s5", vec![]),
    ]
    .into_iter()
    .map(|(id, cats)| (id.to_string(), cats.into_iter().collect()))
    .collect();

    let per_label = evaluate_labels(&golds, &preds, Granularity::Sentence, true)?;
    let keyed: Vec<(EvalLabel, Metrics)> = per_label.iter().map(|(l, _, m)| (*l, *m)).collect();
    println!("\n{}", report::metrics_markdown("Fixture", &keyed, macro_f1(&keyed, true)?));

    println!("discrepancies (gold -> predicted):");
    for row in discrepancy_table(&golds, &preds)? {
        println!("  {} -> {} ({}x)", row.gold, row.pred, row.count);
    }

    // Agreement: two coders over the same sentences.
    let coder = |flip: bool| -> Vec<Annotation> {
        let pair = |c, a| AnnotationPair::new(c, a).unwrap();
        vec![
            Annotation { sentence_id: "s1".into(), pairs: [pair(Category::Support, Attribute::SupportMinus)].into() },
            Annotation {
                sentence_id: "s2".into(),
                pairs: if flip { [pair(Category::Employment, Attribute::Retired)].into() } else { Default::default() },
            },
            Annotation { sentence_id: "s3".into(), pairs: [pair(Category::Employment, Attribute::Retired)].into() },
            Annotation { sentence_id: "s4".into(), pairs: [pair(Category::Housing, Attribute::Undomiciled)].into() },
        ]
    };
    let report_any = agreement_report(&coder(false), &coder(true), Task::Any)?;
    println!("\nagreement (any task):");
    for (category, agreement) in &report_any.per_label {
        println!("  {category:<15} alpha {:+.3}  kappa {:+.3}", agreement.alpha, agreement.kappa);
    }
    println!(
        "  overall         alpha {:+.3}  kappa {:+.3}",
        report_any.overall.alpha, report_any.overall.kappa
    );

    // The two coefficients agree at 1.0 only under perfect agreement.
    let a = [true, true, false, false];
    let b = [true, false, false, false];
    let units: Vec<Vec<u32>> = a.iter().zip(&b).map(|(x, y)| vec![*x as u32, *y as u32]).collect();
    println!(
        "\nhand case: kappa {:.4} vs alpha {:.4}",
        cohen_kappa(&a, &b)?,
        krippendorff_alpha(&units)?
    );
    Ok(())
}
