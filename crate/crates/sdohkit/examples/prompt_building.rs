//! Render the zero-shot and few-shot classification prompts and parse
//! model responses, including salvage of JSON embedded in prose.
//!
//! ```bash
//! cargo run --example prompt_building
//! ```

use sdohkit::classify::{
    build_few_shot_prompt, build_zero_shot_prompt, parse_model_response, Exemplar,
};
use sdohkit::schema::Category;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let zero = build_zero_shot_prompt(&Category::ALL, "Pt lives alone.")?;
    println!("=== zero-shot prompt ===\n{}\n", zero.text);

    let exemplars = vec![
        Exemplar {
            text: "Pt has 2 children ages 9 and 13.".to_string(),
            labels: [Category::Parent].into(),
        },
        Exemplar {
            text: "Pt is a 75yr old retiree.".to_string(),
            labels: [Category::Employment].into(),
        },
    ];
    let few = build_few_shot_prompt(&Category::ALL, &exemplars, "Pt lives alone.")?;
    println!("=== few-shot training block ===");
    for line in few.text.lines().filter(|l| l.starts_with("Sample")) {
        println!("{line}");
    }

    println!("\n=== response parsing ===");
    for raw in [
        r#"{"label": "PARENT"}"#,
        r#"Sure! The best fit is {"label": ["RELAT", "SUPPORT"]}"#,
        r#"{"label": "NO_SDOH"}"#,
        "no idea",
    ] {
        let (labels, status) = parse_model_response(raw);
        println!("{raw:<55} -> {labels:?} ({status:?})");
    }
    Ok(())
}
