//! The offline keyword baseline: substring rules mapping to categories
//! with an adverse flag, evaluated under both tasks.
//!
//! ```bash
//! cargo run --example lexicon_baseline
//! ```

use sdohkit::classify::{KeywordLexicon, SentenceInput};
use sdohkit::schema::Task;

fn main() {
    let lexicon = KeywordLexicon::shipped();
    let sentences = [
        "Pt lives alone.",
        "He is a retired teacher.",
        "Pt is widowed and was recently evicted.",
        "Her husband accompanies her to every visit.",
        "Weather is nice today.",
    ];

    for text in sentences {
        let prediction = lexicon.classify(text);
        println!("{text}");
        println!("  any:     {:?}", prediction.any);
        println!("  adverse: {:?}", prediction.adverse);
    }

    // Batch form used by the pipeline.
    let inputs: Vec<SentenceInput> = sentences
        .iter()
        .enumerate()
        .map(|(i, text)| SentenceInput {
            id: format!("s{i}"),
            text: text.to_string(),
        })
        .collect();
    let records = lexicon.classify_batch(&inputs, Task::Adverse);
    let positives = records.iter().filter(|r| !r.labels.is_empty()).count();
    println!("\nbatch: {positives}/{} sentences carry adverse labels", records.len());
}
