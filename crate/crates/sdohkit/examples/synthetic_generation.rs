//! The two-round synthetic sentence protocol: shipped generation
//! prompts, numbered-list parsing, and file-driven validation.
//!
//! ```bash
//! cargo run --example synthetic_generation
//! ```

use sdohkit::schema::{Category, Task};
use sdohkit::synthgen::{
    build_generation_prompt, parse_decisions_csv, parse_generation_response, record_validation,
    shipped_generation_targets, shipped_references, validated_for_task, SyntheticSentence,
    ValidationStatus,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Nine shipped (category, adverse) targets have generation prompts.
    println!("shipped generation targets:");
    for target in shipped_generation_targets() {
        println!("  {} (adverse: {})", target.category, target.adverse);
    }

    // Each prompt is a four-message conversation seeded with reference
    // sentences; round 2 would replace these with round-1 outputs.
    let references = shipped_references(Category::Support, true)?;
    let messages = build_generation_prompt(Category::Support, true, &references)?;
    println!("\n=== support/adverse generation prompt ===");
    for message in &messages {
        println!("[{}] {}", message.role, message.content);
    }

    // Responses come back as numbered lists.
    let response = "1. Pt has no one to drive her to appointments.\n\
                    2. Pt reports feeling isolated since the move.\n\
                    2. Pt reports feeling isolated since the move.\n\
                    3. No family nearby to help with daily tasks.";
    let parsed = parse_generation_response(response);
    println!("\nparsed {} candidate sentences (before dedup)", parsed.len());

    // Manual validation is file-driven: a reviewer edits decisions.csv.
    let mut sentences: Vec<SyntheticSentence> = parsed
        .iter()
        .enumerate()
        .map(|(i, text)| SyntheticSentence {
            id: format!("syn-{:02}", i + 1),
            text: text.clone(),
            category: Category::Support,
            adverse: true,
            round: 1,
            batch_id: "example".to_string(),
            reference_batch: None,
            validated: ValidationStatus::Unreviewed,
            corrected_labels: None,
        })
        .collect();
    let decisions = parse_decisions_csv(
        "id,decision,corrected_labels\n\
         syn-01,confirmed,\n\
         syn-02,corrected,SUPPORT:adverse;TRANSPORTATION:adverse\n\
         syn-03,discarded,\n\
         syn-04,confirmed,\n",
    )?;
    let report = record_validation(&mut sentences, &decisions)?;
    println!(
        "validation: {} confirmed, {} corrected, {} discarded ({} retained for the any task)",
        report.confirmed, report.corrected, report.discarded, report.any_task_count
    );

    let test_set = validated_for_task(&sentences, Task::Adverse);
    println!("adverse-task test set: {} sentences", test_set.len());
    Ok(())
}
