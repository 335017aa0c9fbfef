//! Load a note collection, apply the inclusion rules, and split it into
//! patient-disjoint train/dev/test sets.
//!
//! ```bash
//! cargo run --example corpus_pipeline
//! ```

use std::collections::BTreeMap;

use sdohkit::corpus::{filter_notes, load_notes, split_dataset, FilterPolicy, NoteFormat, Split};
use sdohkit::segment::{sectionize, HeaderLexicon};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Materialize the shipped demo corpus into a temp directory.
    let dir = tempfile::tempdir()?;
    let manifest = sdohkit::demo::write_demo_corpus(dir.path(), 17)?;
    println!(
        "demo corpus: {} notes over {} patients",
        manifest.notes, manifest.patients
    );

    let report = load_notes(&dir.path().join("notes.jsonl"), NoteFormat::Jsonl)?;
    println!(
        "loaded {} notes ({} load diagnostics)",
        report.notes.len(),
        report.diagnostics.len()
    );

    // Inclusion rules need each note's sections.
    let lexicon = HeaderLexicon::shipped();
    let sections: BTreeMap<_, _> = report
        .notes
        .iter()
        .map(|n| (n.note_id.clone(), sectionize(&n.text, &lexicon)))
        .collect();
    let policy = FilterPolicy::default();
    let (kept, rejected) = filter_notes(&report.notes, &policy, &sections)?;
    println!("filter: kept {}, rejected {}", kept.len(), rejected.len());
    for (note_id, reason) in &rejected {
        println!("  rejected {note_id}: {reason}");
    }

    // Patient-disjoint 60/20/20 split.
    let assignment = split_dataset(&kept, [0.6, 0.2, 0.2], 17)?;
    let counts = assignment.counts();
    println!(
        "split: {} train / {} dev / {} test patients",
        counts[&Split::Train],
        counts[&Split::Dev],
        counts[&Split::Test]
    );
    Ok(())
}
