//! Demographic-injection pairing: render the batch rewrite prompt and
//! parse the bracket-tagged output lines.
//!
//! ```bash
//! cargo run --example demographic_injection
//! ```

use sdohkit::schema::Category;
use sdohkit::synthgen::{build_demo_injection_prompt, parse_demo_output, SyntheticSentence, ValidationStatus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let batch: Vec<SyntheticSentence> = [
        "Pt lives alone.",
        "Widower admits fears surrounding potential judgment.",
        "Pt works part-time and is struggling to pay rent.",
    ]
    .iter()
    .enumerate()
    .map(|(i, text)| SyntheticSentence {
        id: format!("syn-{i}"),
        text: text.to_string(),
        category: Category::Support,
        adverse: true,
        round: 1,
        batch_id: "example".to_string(),
        reference_batch: None,
        validated: ValidationStatus::Confirmed,
        corrected_labels: None,
    })
    .collect();

    let messages = build_demo_injection_prompt(&batch)?;
    println!("=== injection prompt ===\n{}\n", messages[0].content);

    println!("=== parsing injected lines ===");
    for line in [
        "[Asian female] Asian woman owner operator of a food truck selling gourmet grilled cheese sandwiches around town",
        "[hispanic male] Hispanic widower admits fears surrounding potential judgment.",
        "[Black female] Black woman works part-time and is struggling to pay rent.",
        "no bracket tag here",
    ] {
        match parse_demo_output(line) {
            Ok(parsed) => println!(
                "{:?} + {:?}: {}",
                parsed.descriptor.race_ethnicity, parsed.descriptor.gender, parsed.injected_text
            ),
            Err(e) => println!("rejected: {e}"),
        }
    }
    Ok(())
}
