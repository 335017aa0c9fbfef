//! Sectionize a clinical note and split it into sentences, including
//! bullet handling and abbreviation-aware boundaries.
//!
//! ```bash
//! cargo run --example sentence_segmentation
//! ```

use sdohkit::segment::{segment_note, segment_sentences, AbbreviationLexicon, HeaderLexicon};

const NOTE: &str = "Seen for follow-up today.\n\
Social History:\n\
Pt lives alone. Dr. Smith discussed transportation options, e.g. volunteer drivers.\n\
• retired teacher • no car • daughter visits weekly\n\
Assessment and Plan:\n\
Continue current regimen. Follow up in 3 months.";

fn main() {
    let lexicon = HeaderLexicon::shipped();
    let abbrevs = AbbreviationLexicon::shipped();

    let (sections, spans) = segment_note(NOTE, &lexicon, &abbrevs);
    println!("sections:");
    for section in &sections {
        println!(
            "  {:<22} chars {:>3}..{:<3}",
            section.name.as_deref().unwrap_or("(preamble)"),
            section.char_start,
            section.char_end
        );
    }
    println!("\nsentences:");
    for span in &spans {
        println!(
            "  [{:>2}] {:<22} {:?}",
            span.sentence_index,
            span.section_name.as_deref().unwrap_or("-"),
            span.text
        );
    }

    // The pure splitter works on any text; bullets never survive.
    let bullets = segment_sentences("• lives with wife • retired teacher");
    assert_eq!(bullets.len(), 2);
    println!("\nbullet split: {:?}", bullets.iter().map(|s| &s.text).collect::<Vec<_>>());

    // Abbreviations do not end sentences.
    let spans = segment_sentences("Dr. Smith saw pt today. Plan unchanged.");
    println!("abbreviation-aware: {:?}", spans.iter().map(|s| &s.text).collect::<Vec<_>>());
}
