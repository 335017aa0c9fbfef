//! Build ablation training exports: remove a fixed percentage of
//! positive and negative gold sentences per point, with and without the
//! synthetic pool, plus negative undersampling for the base export.
//!
//! ```bash
//! cargo run --example ablation_schedule
//! ```

use std::collections::BTreeSet;

use sdohkit::classify::{undersample_negatives, LabeledSentence};
use sdohkit::evalkit::ablation_schedule;
use sdohkit::schema::Category;

fn sentences(positives: usize, negatives: usize) -> Vec<LabeledSentence> {
    let mut out = Vec::new();
    for i in 0..positives {
        out.push(LabeledSentence {
            id: format!("pos-{i:04}"),
            text: format!("Positive sentence {i}."),
            labels: [Category::Support].into(),
        });
    }
    for i in 0..negatives {
        out.push(LabeledSentence {
            id: format!("neg-{i:04}"),
            text: format!("Negative sentence {i}."),
            labels: BTreeSet::new(),
        });
    }
    out
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Undersample negatives 3:1 before training.
    let train = sentences(877, 28_992);
    let sampled = undersample_negatives(&train, 3.0, 17)?;
    let positives = sampled.iter().filter(|s| !s.labels.is_empty()).count();
    println!(
        "undersampled export: {} positives + {} negatives",
        positives,
        sampled.len() - positives
    );

    // Ablation points pair each reduction with and without synthetic.
    let synthetic = sentences(180, 0);
    let exports = ablation_schedule(
        &sampled,
        &[10, 25, 40, 50, 70, 75, 90, 100],
        17,
        Some(&synthetic),
    )?;
    println!("\npercent  variant          sentences  positives");
    for export in &exports {
        let pos = export.sentences.iter().filter(|s| !s.labels.is_empty()).count();
        println!(
            "{:>6}%  {:<15} {:>9}  {:>9}",
            export.percent_removed,
            if export.with_synthetic { "gold+synthetic" } else { "gold only" },
            export.sentences.len(),
            pos
        );
    }
    Ok(())
}
