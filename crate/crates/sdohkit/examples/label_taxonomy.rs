//! The six-category SDoH taxonomy: attribute-level annotations, the
//! any/adverse task projections, seq2seq output token mapping, and the
//! Z-code table.
//!
//! ```bash
//! cargo run --example label_taxonomy
//! ```

use sdohkit::schema::{
    is_adverse, map_zcode, parse_label_token, project, Annotation, AnnotationPair, Attribute,
    Category, Task,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Attributes are category-scoped; 14 of the 20 are adverse.
    for (category, attribute) in [
        (Category::Employment, Attribute::Retired),
        (Category::Employment, Attribute::Unemployed),
        (Category::Relationship, Attribute::Widowed),
        (Category::Support, Attribute::SupportPlus),
    ] {
        println!(
            "{category} / {attribute}: adverse = {}",
            is_adverse(category, attribute)?
        );
    }

    // One annotated sentence projected onto both tasks.
    let annotation = Annotation {
        sentence_id: "note01:4".to_string(),
        pairs: [
            AnnotationPair::new(Category::Employment, Attribute::Retired)?,
            AnnotationPair::new(Category::Support, Attribute::SupportMinus)?,
        ]
        .into(),
    };
    let any = project(&annotation, Task::Any);
    let adverse = project(&annotation, Task::Adverse);
    println!("\nany labels:     {:?}", any.labels);
    println!("adverse labels: {:?}", adverse.labels);

    // Model output tokens map through the alias table.
    for token in ["RELAT", "housing", "EMPLOY", "FOOD"] {
        match parse_label_token(token) {
            Ok(category) => println!("token {token:?} -> {category}"),
            Err(e) => println!("token {token:?} -> error: {e}"),
        }
    }

    // Z-codes map to adverse-task categories by longest prefix.
    for code in ["Z56.0", "Z59.41", "Z75", "Z55.2", "Z99"] {
        let m = map_zcode(code)?;
        println!(
            "{code:<8} -> {:?} (matched prefix: {:?})",
            m.categories, m.matched_prefix
        );
    }
    Ok(())
}
