//! A fully synthetic 50-note demo corpus for offline, end-to-end runs.
//! Notes, gold annotations, Z-codes, synthetic sentences and demographic
//! pairs are all fabricated; no real patient data anywhere.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AuthorRole, Demographics, Note};
use crate::schema::{Annotation, AnnotationPair, Attribute, Category};
use crate::segment::{segment_note, AbbreviationLexicon, HeaderLexicon};
use crate::synthgen::{DemoPair, Gender, RaceEthnicity, SyntheticSentence, ValidationStatus};

/// A template sentence and the gold (category, attribute) pairs it
/// carries. Some entries are deliberately invisible to the keyword
/// baseline, and a few unlabeled ones bait it into false positives.
const SDOH_TEMPLATES: &[(&str, &[(Category, Attribute)])] = &[
    ("Pt lives alone.", &[(Category::Support, Attribute::SupportMinus)]),
    ("She is a retired teacher.", &[(Category::Employment, Attribute::Retired)]),
    ("Pt is widowed since last spring.", &[(Category::Relationship, Attribute::Widowed)]),
    ("He was laid off from the plant in March.", &[(Category::Employment, Attribute::Unemployed)]),
    ("Pt is currently staying at a shelter downtown.", &[(Category::Housing, Attribute::Undomiciled)]),
    ("She has no car and depends on a neighbor for rides.", &[(Category::Transportation, Attribute::Resource)]),
    ("Pt has 2 teenage children at home.", &[(Category::Parent, Attribute::ChildUnder18)]),
    ("Her husband accompanies her to every visit.", &[
        (Category::Relationship, Attribute::Married),
        (Category::Support, Attribute::SupportPlus),
    ]),
    ("Pt worried about the long drive to radiation.", &[(Category::Transportation, Attribute::Distance)]),
    ("He is married to his high school sweetheart.", &[(Category::Relationship, Attribute::Married)]),
    ("Pt works as an electrician in town.", &[(Category::Employment, Attribute::Employed)]),
    ("Daughter accompanies pt today and helps with meals.", &[(Category::Support, Attribute::SupportPlus)]),
    ("Pt is divorced and estranged from his brother.", &[(Category::Relationship, Attribute::Divorced)]),
    ("They worry about making the mortgage payments this winter.", &[(Category::Housing, Attribute::FinancialStatus)]),
    ("Pt is a full-time student at the community college.", &[(Category::Employment, Attribute::Student)]),
    ("No one to help her at home after surgery.", &[(Category::Support, Attribute::SupportMinus)]),
    ("Pt missed the appointment because her sister couldn't drive her today.", &[
        (Category::Transportation, Attribute::Resource),
    ]),
    ("Pt lives with his nephew during treatment.", &[(Category::Support, Attribute::SupportPlus)]),
    ("Recently evicted and staying with friends for now.", &[(Category::Housing, Attribute::Undomiciled)]),
    ("On disability for the past two years.", &[(Category::Employment, Attribute::Disability)]),
    // Gold positives the keyword baseline misses.
    ("Spouse passed away in October of last year.", &[(Category::Relationship, Attribute::Widowed)]),
    ("Raising a 6 yo and an 11 yo on her own.", &[(Category::Parent, Attribute::ChildUnder18)]),
    ("Between places right now, mail goes to a PO box.", &[(Category::Housing, Attribute::HousingOther)]),
    // Unlabeled sentences that bait keyword false positives.
    ("We discussed the housing of the implant catheter.", &[]),
    ("Transportation of the specimen was delayed overnight.", &[]),
];

const FILLER_SENTENCES: &[&str] = &[
    "Vitals were stable throughout the visit.",
    "Pt denies fevers, chills, or night sweats.",
    "Reviewed the treatment calendar in detail.",
    "No new rash or skin changes were observed.",
    "Pain remains well controlled on the current regimen.",
    "Appetite is fair and weight has been stable.",
    "Laboratory values were reviewed and are within normal limits.",
    "Breath sounds are clear bilaterally.",
    "The plan was discussed and all questions were answered.",
    "Follow-up imaging will be scheduled in three months.",
    "Pt tolerated the procedure without complication.",
    "Bowel and bladder function are at baseline.",
    "Energy levels are slightly reduced but manageable.",
    "Neurological examination is unremarkable.",
    "Medication list was reconciled today.",
    "We reviewed skin care recommendations for the treated field.",
    "Pt ambulates independently without assistive devices.",
    "Hydration and nutrition strategies were reinforced.",
    "There were no treatment interruptions this week.",
    "Pt verbalized understanding of the side effect profile.",
];

const GENDERS: &[&str] = &["female", "male"];
const RACES: &[&str] = &["White", "Black", "Asian", "Other"];
const ETHNICITIES: &[&str] = &["Non-Hispanic", "Hispanic"];

/// Everything the demo corpus writer produced.
#[derive(Debug)]
pub struct DemoManifest {
    pub notes: usize,
    pub annotated_sentences: usize,
    pub gold_positive_sentences: usize,
    pub patients: usize,
    pub synthetic_sentences: usize,
    pub demo_pairs: usize,
}

fn filler_block(rng: &mut ChaCha8Rng, count: usize) -> Vec<String> {
    let mut pool: Vec<&str> = FILLER_SENTENCES.to_vec();
    pool.shuffle(rng);
    pool.iter().cycle().take(count).map(|s| s.to_string()).collect()
}

fn build_note_text(rng: &mut ChaCha8Rng, sdoh: &[&str], style: usize) -> String {
    let hpi = filler_block(rng, 12).join(" ");
    let plan = filler_block(rng, 12).join(" ");
    match style {
        // Bulleted social history.
        0 => {
            let bullets: Vec<String> = sdoh.iter().map(|s| format!("• {s}")).collect();
            format!(
                "HPI:\n{hpi}\nSocial History:\n{}\nAssessment and Plan:\n{plan}",
                bullets.join(" ")
            )
        }
        // Prose social history.
        1 => format!(
            "History of Present Illness:\n{hpi}\nSocial History:\n{} {}\nAssessment and Plan:\n{plan}",
            sdoh.join(" "),
            filler_block(rng, 2).join(" ")
        ),
        // Social-worker style narrative without headers.
        _ => format!(
            "Met with patient today to review supports. {} {} {}",
            sdoh.join(" "),
            hpi,
            plan
        ),
    }
}

/// Write the demo corpus into `dir`: notes.jsonl, annotations.jsonl,
/// zcodes.csv, synthetic.jsonl and demo_pairs.jsonl. Deterministic for a
/// fixed seed.
pub fn write_demo_corpus(dir: &Path, seed: u64) -> io::Result<DemoManifest> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let header_lexicon = HeaderLexicon::shipped();
    let abbrevs = AbbreviationLexicon::shipped();
    let template_lookup: BTreeMap<&str, &[(Category, Attribute)]> =
        SDOH_TEMPLATES.iter().map(|(t, p)| (*t, *p)).collect();

    let roles = [
        AuthorRole::Physician,
        AuthorRole::PhysicianAssistant,
        AuthorRole::NursePractitioner,
        AuthorRole::RegisteredNurse,
        AuthorRole::SocialWorker,
    ];

    let mut notes = Vec::new();
    let mut annotations: Vec<Annotation> = Vec::new();
    let mut gold_positive_sentences = 0usize;
    let patients = 25usize;

    for i in 0..50usize {
        let note_id = format!("note{:03}", i + 1);
        let patient_id = format!("pat{:03}", (i % patients) + 1);
        let author_role = roles[i % roles.len()];
        // Deliberate filter rejects: one short note, one with an
        // over-long section, one physician note without required headers.
        let text = if i == 13 {
            "Social History:\nPt lives alone. Short note.".to_string()
        } else if i == 27 {
            let long = filler_block(&mut rng, 80).join(" ");
            format!("HPI:\n{long}\nSocial History:\nPt lives alone.")
        } else if i == 41 {
            // Physician note with no recognized sections.
            format!("Telephone encounter. {}", filler_block(&mut rng, 25).join(" "))
        } else {
            let sdoh_count = 1 + (i % 3);
            let mut picks: Vec<&str> = Vec::new();
            for _ in 0..sdoh_count {
                picks.push(SDOH_TEMPLATES[rng.random_range(0..SDOH_TEMPLATES.len())].0);
            }
            picks.dedup();
            let style = if author_role == AuthorRole::SocialWorker { 2 } else { i % 2 };
            build_note_text(&mut rng, &picks, style)
        };

        let date = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap()
            + chrono::Duration::days((i as i64) * 5);
        let demographics = Some(Demographics {
            gender: Some(GENDERS[i % GENDERS.len()].to_string()),
            race: Some(RACES[i % RACES.len()].to_string()),
            ethnicity: Some(ETHNICITIES[i % ETHNICITIES.len()].to_string()),
        });
        let note = Note {
            note_id: note_id.clone(),
            patient_id,
            author_role,
            date,
            text,
            demographics,
        };

        // Gold labels come from matching segmented spans back to the
        // template pool, so annotations always align with segmentation.
        let (_, spans) = segment_note(&note.text, &header_lexicon, &abbrevs);
        for span in &spans {
            let sentence_id = format!("{note_id}:{}", span.sentence_index);
            let pairs = template_lookup
                .get(span.text.as_str())
                .copied()
                .unwrap_or(&[]);
            let pair_set: std::collections::BTreeSet<AnnotationPair> = pairs
                .iter()
                .map(|(c, a)| AnnotationPair::new(*c, *a).expect("templates are valid"))
                .collect();
            if !pair_set.is_empty() {
                gold_positive_sentences += 1;
            }
            annotations.push(Annotation {
                sentence_id,
                pairs: pair_set,
            });
        }
        notes.push(note);
    }

    let notes_jsonl: String = notes
        .iter()
        .map(|n| serde_json::to_string(n).expect("note serializes"))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    crate::report::write_atomic(&dir.join("notes.jsonl"), &notes_jsonl)?;

    let annotated_sentences = annotations.len();
    let annotations_jsonl: String = annotations
        .iter()
        .map(|a| serde_json::to_string(a).expect("annotation serializes"))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    crate::report::write_atomic(&dir.join("annotations.jsonl"), &annotations_jsonl)?;

    // Z-codes for a handful of patients, covering every shipped prefix
    // plus one unmapped code.
    let zcode_rows = [
        ("pat001", "Z59.0", "2021-02-01"),
        ("pat002", "Z56.0", "2021-02-03"),
        ("pat003", "Z60.2", "2021-02-05"),
        ("pat004", "Z62", "2021-02-07"),
        ("pat005", "Z63.5", "2021-02-09"),
        ("pat006", "Z75.3", "2021-02-11"),
        ("pat007", "Z55.9", "2021-02-13"),
        ("pat008", "Z99.89", "2021-02-15"),
    ];
    let mut zcodes_csv = String::from("patient_id,code,date\n");
    for (p, c, d) in zcode_rows {
        zcodes_csv.push_str(&format!("{p},{c},{d}\n"));
    }
    crate::report::write_atomic(&dir.join("zcodes.csv"), &zcodes_csv)?;

    // A small validated synthetic set reusing the labeled templates.
    let mut synthetic = Vec::new();
    for (idx, (text, pairs)) in SDOH_TEMPLATES.iter().enumerate() {
        if pairs.is_empty() {
            continue;
        }
        let (category, attribute) = pairs[0];
        let adverse = crate::schema::is_adverse(category, attribute).expect("valid template pair");
        synthetic.push(SyntheticSentence {
            id: format!("demo-syn-{:03}", idx + 1),
            text: text.to_string(),
            category,
            adverse,
            round: 1,
            batch_id: "demo-batch".to_string(),
            reference_batch: None,
            validated: ValidationStatus::Confirmed,
            corrected_labels: None,
        });
    }
    let synthetic_jsonl: String = synthetic
        .iter()
        .map(|s| serde_json::to_string(s).expect("synthetic serializes"))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    crate::report::write_atomic(&dir.join("synthetic.jsonl"), &synthetic_jsonl)?;

    // Demographic pairs: textual injection of a descriptor prefix.
    let race_pool = [
        (RaceEthnicity::Asian, "Asian"),
        (RaceEthnicity::Black, "Black"),
        (RaceEthnicity::White, "White"),
        (RaceEthnicity::Hispanic, "Hispanic"),
    ];
    let gender_pool = [(Gender::Female, "woman"), (Gender::Male, "man")];
    // Some rewrites paraphrase the original the way a generative rewrite
    // would, which is what makes the bias audit non-trivial offline.
    let paraphrases: BTreeMap<&str, &str> = [
        ("Pt lives alone.", "Lives by herself these days."),
        ("She is a retired teacher.", "Formerly taught school, now done working."),
        ("Pt is widowed since last spring.", "Lost a spouse last spring."),
        ("On disability for the past two years.", "Unable to work for two years now."),
        ("Pt worried about the long drive to radiation.", "Concerned about the lengthy trip to radiation."),
    ]
    .into();
    let mut pairs = Vec::new();
    for (i, s) in synthetic.iter().enumerate() {
        let (race, race_str) = race_pool[i % race_pool.len()];
        let (gender, noun) = gender_pool[i % gender_pool.len()];
        let body = paraphrases.get(s.text.as_str()).copied().unwrap_or(s.text.as_str());
        let injected_text = format!("{race_str} {noun}: {body}");
        pairs.push(DemoPair {
            pair_id: format!("demo-pair-{:03}", i + 1),
            original_id: s.id.clone(),
            injected_text,
            race_ethnicity: race,
            gender,
            validated: ValidationStatus::Confirmed,
        });
    }
    let pairs_jsonl: String = pairs
        .iter()
        .map(|p| serde_json::to_string(p).expect("pair serializes"))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    crate::report::write_atomic(&dir.join("demo_pairs.jsonl"), &pairs_jsonl)?;

    Ok(DemoManifest {
        notes: notes.len(),
        annotated_sentences,
        gold_positive_sentences,
        patients,
        synthetic_sentences: synthetic.len(),
        demo_pairs: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{filter_notes, load_notes, FilterPolicy, NoteFormat};
    use std::collections::BTreeMap;

    #[test]
    fn demo_corpus_is_deterministic_and_filterable() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let m = write_demo_corpus(dir_a.path(), 17).unwrap();
        write_demo_corpus(dir_b.path(), 17).unwrap();
        assert_eq!(m.notes, 50);
        assert!(m.gold_positive_sentences > 20);

        for name in ["notes.jsonl", "annotations.jsonl", "zcodes.csv", "synthetic.jsonl", "demo_pairs.jsonl"] {
            let a = std::fs::read_to_string(dir_a.path().join(name)).unwrap();
            let b = std::fs::read_to_string(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical seeds");
        }

        let report = load_notes(&dir_a.path().join("notes.jsonl"), NoteFormat::Jsonl).unwrap();
        assert_eq!(report.notes.len(), 50);
        assert!(report.diagnostics.is_empty());

        let lex = HeaderLexicon::shipped();
        let ab = AbbreviationLexicon::shipped();
        let sections: BTreeMap<String, Vec<crate::segment::Section>> = report
            .notes
            .iter()
            .map(|n| (n.note_id.clone(), crate::segment::sectionize(&n.text, &lex)))
            .collect();
        let (kept, rejected) = filter_notes(&report.notes, &FilterPolicy::default(), &sections).unwrap();
        assert_eq!(rejected.len(), 3, "rejected: {rejected:?}");
        assert_eq!(kept.len(), 47);

        // Annotation ids line up with segmentation output.
        let annotations = std::fs::read_to_string(dir_a.path().join("annotations.jsonl")).unwrap();
        for line in annotations.lines().take(5) {
            let ann: Annotation = serde_json::from_str(line).unwrap();
            let (note_id, idx) = ann.sentence_id.split_once(':').unwrap();
            let note = report.notes.get(note_id).unwrap();
            let (_, spans) = segment_note(&note.text, &lex, &ab);
            let idx: usize = idx.parse().unwrap();
            assert!(idx < spans.len());
        }
    }
}
