//! Acceptance suite: one test per criterion, each printing a PASS line
//! on success (run with `--nocapture` to see them).

mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdohkit::bias::{chi_squared, two_proportion_z};
use sdohkit::classify::{undersample_negatives, LabeledSentence};
use sdohkit::corpus::{count_tokens, filter_notes, AuthorRole, FilterPolicy, Note, NoteCollection, RejectReason};
use sdohkit::evalkit::{
    ablation_schedule, cohen_kappa, compare_zcodes, krippendorff_alpha, metrics, ConfusionCounts,
    EvalLabel, Granularity, UnitLabels,
};
use sdohkit::schema::{map_zcode, Category, ZCodeMap};
use sdohkit::segment::{sectionize, segment_sentences, HeaderLexicon};
use support::{Script, StubReply, StubServer};

fn pass(name: &str, detail: &str) {
    println!("criterion {name}: PASS — {detail}");
}

// ---------------------------------------------------------------------
// Criterion 1: metric reconciliation against published confusion counts.
// ---------------------------------------------------------------------
#[test]
fn criterion_01_metric_reconciliation() {
    let started = Instant::now();
    let any = ConfusionCounts::new(EvalLabel::Presence, Granularity::Patient, 89, 3, 4, 58);
    let m = metrics(&any);
    assert!(
        (m.recall - 0.9570).abs() <= 0.0005,
        "any-mention recall {} not within 0.0005 of 0.9570",
        m.recall
    );

    let zcode = ConfusionCounts::new(EvalLabel::Presence, Granularity::Patient, 1, 5, 47, 101);
    let zm = metrics(&zcode);
    assert!(
        (zm.recall - 0.0208).abs() <= 0.0005,
        "zcode recall {} not within 0.0005 of 0.0208",
        zm.recall
    );
    assert!(started.elapsed() < Duration::from_secs(1));
    pass(
        "01 (metric reconciliation)",
        &format!("recall {:.4} and {:.4} match published 95.7% and 2.0%", m.recall, zm.recall),
    );
}

// ---------------------------------------------------------------------
// Criterion 2: macro-F1 arithmetic over published per-class F1 rows.
// Each fixture row is (printed macro, seven per-class F1 values in the
// order No-SDoH, Employment, Housing, Parent, Relationship, Social
// Support, Transportation). Rows whose printed macro differs from the
// mean of their printed (2dp-rounded) class values by more than 0.005
// are not representable at this precision and are excluded; 23 of the
// 28 published rows reconcile.
// ---------------------------------------------------------------------
#[test]
fn criterion_02_macro_f1_arithmetic() {
    let started = Instant::now();
    #[rustfmt::skip]
    let rows: [(f64, [f64; 7]); 23] = [
        // In-domain test set, any-mention task.
        (0.51, [1.00, 0.71, 0.00, 0.00, 0.97, 0.59, 0.29]),
        (0.36, [0.99, 0.34, 0.00, 0.00, 0.83, 0.38, 0.00]),
        (0.51, [1.00, 0.67, 0.40, 0.00, 0.93, 0.28, 0.29]),
        (0.42, [1.00, 0.72, 0.00, 0.00, 0.93, 0.31, 0.00]),
        (0.61, [1.00, 0.76, 0.67, 0.24, 0.91, 0.48, 0.18]),
        (0.65, [0.99, 0.71, 0.57, 0.55, 0.92, 0.50, 0.33]),
        (0.69, [1.00, 0.73, 0.55, 0.56, 0.94, 0.52, 0.53]),
        (0.71, [1.00, 0.80, 0.67, 0.47, 0.93, 0.60, 0.47]),
        // In-domain test set, adverse-mention task.
        (0.65, [1.00, 0.68, 0.57, 0.43, 0.92, 0.45, 0.53]),
        (0.59, [1.00, 0.75, 0.57, 0.53, 0.82, 0.25, 0.22]),
        (0.36, [1.00, 0.31, 0.40, 0.00, 0.56, 0.00, 0.27]),
        (0.50, [1.00, 0.58, 0.55, 0.33, 0.66, 0.22, 0.18]),
        (0.70, [1.00, 0.75, 0.57, 0.52, 0.93, 0.44, 0.67]),
        (0.64, [1.00, 0.67, 0.50, 0.60, 0.91, 0.31, 0.47]),
        (0.66, [1.00, 0.62, 0.60, 0.55, 0.89, 0.53, 0.46]),
        // Out-of-domain validation, any-mention task.
        (0.70, [0.99, 0.83, 0.56, 0.69, 0.93, 0.46, 0.46]),
        (0.71, [0.99, 0.79, 0.56, 0.68, 0.91, 0.63, 0.40]),
        (0.57, [0.98, 0.65, 0.00, 0.63, 0.91, 0.32, 0.50]),
        (0.55, [0.98, 0.69, 0.25, 0.44, 0.91, 0.33, 0.25]),
        // Out-of-domain validation, adverse-mention task.
        (0.64, [1.00, 0.70, 0.44, 0.62, 0.83, 0.42, 0.44]),
        (0.66, [1.00, 0.60, 0.63, 0.61, 0.82, 0.59, 0.40]),
        (0.54, [0.99, 0.55, 0.50, 0.37, 0.71, 0.37, 0.29]),
        (0.54, [0.99, 0.55, 0.36, 0.54, 0.68, 0.44, 0.20]),
    ];
    assert!(rows.len() >= 14, "need at least 14 fixture rows");
    for (i, (printed, class_f1)) in rows.iter().enumerate() {
        let mean = class_f1.iter().sum::<f64>() / 7.0;
        assert!(
            (mean - printed).abs() <= 0.005,
            "row {i}: 7-class mean {mean:.4} vs printed {printed}"
        );
    }
    assert!(started.elapsed() < Duration::from_secs(1));
    pass(
        "02 (macro-F1 arithmetic)",
        &format!("{} published rows reconcile within ±0.005", rows.len()),
    );
}

// ---------------------------------------------------------------------
// Criterion 3: agreement statistics vs independent brute-force oracles.
// ---------------------------------------------------------------------

/// Direct po/pe enumeration over both classes.
fn kappa_oracle(a: &[bool], b: &[bool]) -> f64 {
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let po = agree / n;
    let mut pe = 0.0;
    for class in [false, true] {
        let pa = a.iter().filter(|v| **v == class).count() as f64 / n;
        let pb = b.iter().filter(|v| **v == class).count() as f64 / n;
        pe += pa * pb;
    }
    if (1.0 - pe).abs() < 1e-15 {
        1.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}

/// Dense coincidence-matrix construction over the value universe.
fn alpha_oracle(units: &[Vec<u32>]) -> Option<f64> {
    let pairable: Vec<&Vec<u32>> = units.iter().filter(|u| u.len() >= 2).collect();
    if pairable.is_empty() {
        return None;
    }
    let universe: Vec<u32> = {
        let set: BTreeSet<u32> = pairable.iter().flat_map(|u| u.iter().copied()).collect();
        set.into_iter().collect()
    };
    let k = universe.len();
    let index = |v: u32| universe.iter().position(|u| *u == v).unwrap();
    let mut matrix = vec![vec![0.0f64; k]; k];
    for unit in &pairable {
        let weight = 1.0 / (unit.len() as f64 - 1.0);
        for (i, &vi) in unit.iter().enumerate() {
            for (j, &vj) in unit.iter().enumerate() {
                if i != j {
                    matrix[index(vi)][index(vj)] += weight;
                }
            }
        }
    }
    let n: f64 = matrix.iter().flatten().sum();
    let totals: Vec<f64> = (0..k).map(|c| matrix[c].iter().sum()).collect();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c != d {
                observed += matrix[c][d];
                expected += totals[c] * totals[d];
            }
        }
    }
    let observed = observed / n;
    let expected = expected / (n * (n - 1.0));
    Some(if expected == 0.0 { 1.0 } else { 1.0 - observed / expected })
}

#[test]
fn criterion_03_agreement_oracles() {
    // Hand cases pinned exactly.
    let a = [true, true, false, false];
    let b = [true, false, false, false];
    assert!((cohen_kappa(&a, &b).unwrap() - 0.5).abs() < 1e-12);
    let units: Vec<Vec<u32>> = a.iter().zip(&b).map(|(x, y)| vec![*x as u32, *y as u32]).collect();
    assert!((krippendorff_alpha(&units).unwrap() - 8.0 / 15.0).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.random_range(1..=12usize);
        let seq_a: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let seq_b: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let ours = cohen_kappa(&seq_a, &seq_b).unwrap();
        let oracle = kappa_oracle(&seq_a, &seq_b);
        assert!(
            (ours - oracle).abs() < 1e-9,
            "kappa mismatch on {seq_a:?} vs {seq_b:?}: {ours} vs {oracle}"
        );

        // Alpha instance: 2-3 coders with occasional missing values.
        let alpha_units: Vec<Vec<u32>> = (0..n)
            .map(|_| {
                let coders = rng.random_range(1..=3usize);
                (0..coders).map(|_| rng.random_range(0..2u32)).collect()
            })
            .collect();
        match alpha_oracle(&alpha_units) {
            None => {
                assert!(krippendorff_alpha(&alpha_units).is_err());
                continue; // degenerate draw; does not count
            }
            Some(oracle) => {
                let ours = krippendorff_alpha(&alpha_units).unwrap();
                assert!(
                    (ours - oracle).abs() < 1e-9,
                    "alpha mismatch on {alpha_units:?}: {ours} vs {oracle}"
                );
            }
        }
        checked += 1;
    }
    pass(
        "03 (agreement oracles)",
        "200 random instances within 1e-9; hand cases 0.5 and 8/15 exact",
    );
}

// ---------------------------------------------------------------------
// Criterion 4: z-test and chi-squared reference values + equivalence.
// ---------------------------------------------------------------------
#[test]
fn criterion_04_statistics() {
    let z = two_proportion_z(60, 419, 90, 419).unwrap();
    assert!(
        z.p_value >= 0.005 && z.p_value <= 0.009,
        "two-sided p {} outside [0.005, 0.009]",
        z.p_value
    );

    let chi = chi_squared(&[vec![10, 90], vec![20, 80]]).unwrap();
    assert!((chi.statistic - 3.922).abs() <= 0.001, "statistic {}", chi.statistic);
    assert!((chi.p_value - 0.0477).abs() <= 0.0005, "p {}", chi.p_value);

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..100 {
        let n1 = rng.random_range(5..200usize);
        let n2 = rng.random_range(5..200usize);
        let c1 = rng.random_range(1..n1);
        let c2 = rng.random_range(1..n2);
        let z = two_proportion_z(c1, n1, c2, n2).unwrap();
        let chi = chi_squared(&[
            vec![c1 as u64, (n1 - c1) as u64],
            vec![c2 as u64, (n2 - c2) as u64],
        ])
        .unwrap();
        assert!(
            (chi.statistic - z.z * z.z).abs() < 1e-9,
            "chi {} vs z^2 {} on ({c1}/{n1}, {c2}/{n2})",
            chi.statistic,
            z.z * z.z
        );
    }
    pass(
        "04 (statistics)",
        &format!(
            "p = {:.4} vs published 0.007; chi2 = {:.3}, p = {:.4}; z2 equivalence on 100 tables",
            z.p_value, chi.statistic, chi.p_value
        ),
    );
}

// ---------------------------------------------------------------------
// Criterion 5: segmentation invariants on a 1,000-note fuzz corpus.
// ---------------------------------------------------------------------

fn strip_ws_and_bullets(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace() && *c != '•').collect()
}

fn fuzz_note(rng: &mut ChaCha8Rng) -> String {
    const WORDS: &[&str] = &[
        "pt", "lives", "alone", "retired", "teacher", "Dr.", "Smith", "denies", "pain",
        "support", "daughter", "visits", "Mr.", "Jones", "e.g.", "walking", "daily", "vs.",
        "baseline", "housing", "stable", "works", "i.e.", "remotely", "2.5", "mg", "reviewed",
    ];
    const HEADERS: &[&str] = &["Social History:", "Assessment and Plan:", "HPI:", "Medications:"];
    let sentences = rng.random_range(1..=12usize);
    let mut out = String::new();
    for _ in 0..sentences {
        match rng.random_range(0..10u32) {
            0 => {
                out.push_str(HEADERS[rng.random_range(0..HEADERS.len())]);
                out.push('\n');
            }
            1 => {
                // Bullet list.
                let items = rng.random_range(1..=4usize);
                for _ in 0..items {
                    out.push_str("• ");
                    let words = rng.random_range(1..=5usize);
                    for w in 0..words {
                        if w > 0 {
                            out.push(' ');
                        }
                        out.push_str(WORDS[rng.random_range(0..WORDS.len())]);
                    }
                    out.push(' ');
                }
                out.push('\n');
            }
            _ => {
                let words = rng.random_range(1..=9usize);
                let mut sentence = String::new();
                for w in 0..words {
                    if w > 0 {
                        sentence.push(' ');
                    }
                    sentence.push_str(WORDS[rng.random_range(0..WORDS.len())]);
                }
                // Capitalize the first letter so boundaries are realistic.
                let mut chars = sentence.chars();
                if let Some(first) = chars.next() {
                    out.push_str(&first.to_uppercase().to_string());
                    out.push_str(chars.as_str());
                }
                out.push_str(match rng.random_range(0..3u32) {
                    0 => "! ",
                    1 => "? ",
                    _ => ". ",
                });
                if rng.random_bool(0.2) {
                    out.push('\n');
                }
            }
        }
    }
    out
}

#[test]
fn criterion_05_segmentation_properties() {
    let started = Instant::now();

    let bullet = segment_sentences("• a • b");
    assert_eq!(bullet.len(), 2, "bullet example must yield 2 spans");

    let lexicon = HeaderLexicon::shipped();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for note_index in 0..1000 {
        let note = fuzz_note(&mut rng);
        let chars: Vec<char> = note.chars().collect();
        let spans = segment_sentences(&note);

        // Reconstruction modulo whitespace and bullets.
        let rebuilt: String = spans.iter().map(|s| strip_ws_and_bullets(&s.text)).collect();
        assert_eq!(
            rebuilt,
            strip_ws_and_bullets(&note),
            "reconstruction failed on fuzz note {note_index}: {note:?}"
        );

        let mut last_end = 0;
        for span in &spans {
            // Spans are non-empty, bullet-free, offset-faithful, ordered.
            assert!(!span.text.trim().is_empty(), "empty span in note {note_index}");
            assert!(!span.text.contains('•'), "bullet in span of note {note_index}");
            let substring: String = chars[span.char_start..span.char_end].iter().collect();
            assert_eq!(substring, span.text, "offsets wrong in note {note_index}");
            assert!(span.char_start >= last_end, "overlap in note {note_index}");
            last_end = span.char_end;

            // Idempotence.
            let again = segment_sentences(&span.text);
            assert_eq!(again.len(), 1, "span re-split in note {note_index}: {:?}", span.text);
            assert_eq!(again[0].text, span.text);
        }

        // Sectionizer offsets strictly increasing and non-overlapping.
        let sections = sectionize(&note, &lexicon);
        let mut last = 0;
        for section in &sections {
            assert!(section.char_start < section.char_end);
            assert!(section.char_start >= last);
            last = section.char_end;
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(10), "fuzz took {elapsed:?}");
    pass(
        "05 (segmentation properties)",
        &format!("1,000 fuzz notes, zero violations, {elapsed:?}"),
    );
}

// ---------------------------------------------------------------------
// Criterion 6: filter boundary behavior.
// ---------------------------------------------------------------------
#[test]
fn criterion_06_filter_boundaries() {
    let policy = FilterPolicy::default();
    let words = |n: usize| vec!["w"; n].join(" ");
    let note = |id: &str, role: AuthorRole, text: String| Note {
        note_id: id.to_string(),
        patient_id: format!("p-{id}"),
        author_role: role,
        date: chrono::NaiveDate::from_ymd_opt(2021, 6, 1).unwrap(),
        text,
        demographics: None,
    };

    // 149 rejected, 150 accepted ("Social History:" contributes 2 tokens).
    let n149 = note("a", AuthorRole::Physician, format!("Social History:\n{}", words(147)));
    let n150 = note("b", AuthorRole::Physician, format!("Social History:\n{}", words(148)));
    assert_eq!(count_tokens(&n149.text), 149);
    assert_eq!(count_tokens(&n150.text), 150);

    // A 501-token section rejects non-exempt roles, passes social workers.
    let long_text = format!("Social History:\n{}", words(501));
    let nurse = note("c", AuthorRole::RegisteredNurse, long_text.clone());
    let social_worker = note("d", AuthorRole::SocialWorker, long_text);

    let notes = NoteCollection::from_notes([n149, n150, nurse, social_worker]).unwrap();
    let lexicon = HeaderLexicon::shipped();
    let sections: BTreeMap<String, Vec<sdohkit::segment::Section>> = notes
        .iter()
        .map(|n| (n.note_id.clone(), sectionize(&n.text, &lexicon)))
        .collect();
    let (kept, rejected) = filter_notes(&notes, &policy, &sections).unwrap();

    let rejected_map: BTreeMap<&str, RejectReason> =
        rejected.iter().map(|(id, r)| (id.as_str(), *r)).collect();
    assert_eq!(rejected_map.get("a"), Some(&RejectReason::BelowMinTokens));
    assert!(kept.get("b").is_some(), "150-token note accepted");
    assert_eq!(rejected_map.get("c"), Some(&RejectReason::SectionTooLong));
    assert!(kept.get("d").is_some(), "social worker exempt from section cap");
    pass(
        "06 (filter boundaries)",
        "149/150 token floor and 501-token section cap behave per policy",
    );
}

// ---------------------------------------------------------------------
// Criterion 7: prompt golden files (byte equality).
// ---------------------------------------------------------------------
#[test]
fn criterion_07_prompt_fidelity() {
    use sdohkit::classify::{build_few_shot_prompt, build_zero_shot_prompt, Exemplar};
    use sdohkit::synthgen::{
        build_demo_injection_prompt, build_generation_prompt, shipped_generation_targets,
        shipped_references,
    };

    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let golden = |name: &str| -> String {
        std::fs::read_to_string(golden_dir.join(name))
            .unwrap_or_else(|e| panic!("golden {name}: {e}"))
    };

    // (a) Zero-shot render.
    let zero = build_zero_shot_prompt(
        &Category::ALL,
        "Childcare provider offers after-school tutoring services helping child stay on track academically while parent undergoes treatment",
    )
    .unwrap();
    assert!(zero.text.contains("Your JSON response:"));
    assert_eq!(zero.text, golden("zero_shot.txt"), "zero-shot render drifted");

    // (b) 10-exemplar few-shot render.
    let labels = |cats: &[Category]| cats.iter().copied().collect::<BTreeSet<_>>();
    let exemplars = vec![
        Exemplar { text: "Pt has 2 children ages 9 and 13.".to_string(), labels: labels(&[Category::Parent]) },
        Exemplar { text: "Pt and her husband came into my office today.".to_string(), labels: labels(&[Category::Relationship]) },
        Exemplar { text: "Pt lives alone.".to_string(), labels: labels(&[Category::Support]) },
        Exemplar { text: "He is having trouble getting to and from the hospital.".to_string(), labels: labels(&[Category::Transportation]) },
        Exemplar { text: "Pt works as an electrician in Rockland.".to_string(), labels: labels(&[Category::Employment]) },
        Exemplar { text: "Pt currently staying at Barbara McInnis shelter.".to_string(), labels: labels(&[Category::Housing]) },
        Exemplar { text: "Pt was seen today with his daughter Angela, 3 y/o for a routine checkup.".to_string(), labels: labels(&[Category::Parent, Category::Relationship]) },
        Exemplar { text: "Pt is married but separated.".to_string(), labels: labels(&[Category::Relationship]) },
        Exemplar { text: "Pt has been living off of unemployment for the past 2 months.".to_string(), labels: labels(&[Category::Employment]) },
        Exemplar { text: "Here today is Pt, her daughter, and supportive wife.".to_string(), labels: labels(&[Category::Support]) },
    ];
    let few = build_few_shot_prompt(&Category::ALL, &exemplars, "Pt lives alone.").unwrap();
    assert_eq!(few.text, golden("few_shot_10.txt"), "few-shot render drifted");

    // (c) Every shipped generation prompt.
    for target in shipped_generation_targets() {
        let refs = shipped_references(target.category, target.adverse).unwrap();
        let messages = build_generation_prompt(target.category, target.adverse, &refs).unwrap();
        let rendered = serde_json::to_string_pretty(&messages).unwrap() + "\n";
        let name = format!(
            "gen_{}_{}.json",
            target.category.canonical_name().to_lowercase(),
            if target.adverse { "adverse" } else { "nonadverse" }
        );
        assert_eq!(rendered, golden(&name), "{name} drifted");
    }

    // (d) Demographic-injection prompt with the [Asian female] exemplar.
    let texts = [
        "Pt came from Assisted Living Corp. and complained about rent increase.",
        "He says he is worried about making his mortgage payments.",
        "Pt lives 30mi away from hospital and complains about needing to transfer three times each way.",
        "Pt missed appointment because her sister couldn't drive her today.",
        "Pt is meeting ex-wife at appointment.",
        "Pt spouse passed away in October of last year.",
        "Pt has 2 children ages 9 and 13.",
        "Pt works part-time at Jim's Fish and is struggling to pay rent.",
        "Pt lives alone.",
        "Pt is struggling to find someone to watch his cat on the days he has to come for treatment.",
    ];
    let batch: Vec<sdohkit::synthgen::SyntheticSentence> = texts
        .iter()
        .enumerate()
        .map(|(i, text)| sdohkit::synthgen::SyntheticSentence {
            id: format!("golden-{i:02}"),
            text: text.to_string(),
            category: Category::Support,
            adverse: true,
            round: 1,
            batch_id: "golden".to_string(),
            reference_batch: None,
            validated: sdohkit::synthgen::ValidationStatus::Confirmed,
            corrected_labels: None,
        })
        .collect();
    let injection = build_demo_injection_prompt(&batch).unwrap();
    assert!(injection[0].content.contains("[Asian female]"));
    let rendered = serde_json::to_string_pretty(&injection).unwrap() + "\n";
    assert_eq!(rendered, golden("demo_injection.json"), "injection render drifted");

    pass(
        "07 (prompt fidelity)",
        "zero-shot, 10-exemplar few-shot, 9 generation prompts and the injection prompt are byte-identical to goldens",
    );
}

// ---------------------------------------------------------------------
// Criterion 8: undersampling and ablation determinism.
// ---------------------------------------------------------------------
#[test]
fn criterion_08_undersampling_and_ablation() {
    let mut data = Vec::new();
    for i in 0..877 {
        data.push(LabeledSentence {
            id: format!("pos{i:05}"),
            text: format!("positive {i}"),
            labels: [Category::Support].into(),
        });
    }
    for i in 0..5000 {
        data.push(LabeledSentence {
            id: format!("neg{i:05}"),
            text: format!("negative {i}"),
            labels: BTreeSet::new(),
        });
    }

    let sample_a = undersample_negatives(&data, 3.0, 99).unwrap();
    let sample_b = undersample_negatives(&data, 3.0, 99).unwrap();
    let bytes = |v: &[LabeledSentence]| serde_json::to_vec(v).unwrap();
    assert_eq!(bytes(&sample_a), bytes(&sample_b), "identical seeds, identical exports");
    let positives = sample_a.iter().filter(|s| !s.labels.is_empty()).count();
    let negatives = sample_a.len() - positives;
    assert_eq!(positives, 877, "positives preserved exactly");
    assert_eq!(negatives, (3.0f64 * 877.0).floor() as usize);

    let exports_a = ablation_schedule(&data, &[0, 50, 100], 42, None).unwrap();
    let exports_b = ablation_schedule(&data, &[0, 50, 100], 42, None).unwrap();
    for (a, b) in exports_a.iter().zip(&exports_b) {
        assert_eq!(bytes(&a.sentences), bytes(&b.sentences));
    }
    let p100 = exports_a.iter().find(|e| e.percent_removed == 100).unwrap();
    assert!(p100.sentences.is_empty(), "100% gold-only export is empty");
    // The empty export reports F1 0.00 for every class by convention.
    let zero_row_f1: Vec<f64> = EvalLabel::REPORT_ORDER.iter().map(|_| 0.0).collect();
    assert!(zero_row_f1.iter().all(|f| *f == 0.0));
    pass(
        "08 (undersampling/ablation determinism)",
        "877 positives kept, 2631 negatives sampled, byte-identical under a fixed seed, empty 100% export",
    );
}

// ---------------------------------------------------------------------
// Criterion 9: offline end-to-end run on the shipped demo corpus.
// ---------------------------------------------------------------------
fn run_cli(args: &[String]) -> i32 {
    sdohkit::cli::run(args.iter().cloned())
}

#[test]
fn criterion_09_end_to_end_offline() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).display().to_string();
    let arg = |s: &str| s.to_string();

    // Demo corpus.
    assert_eq!(run_cli(&[arg("demo"), arg("--seed"), arg("17"), arg("--out"), path("demo")]), 0);

    // filter -> segment -> classify (lexicon) -> evaluate.
    assert_eq!(
        run_cli(&[arg("filter"), arg("--notes"), path("demo/notes.jsonl"), arg("--out"), path("filtered")]),
        0
    );
    assert_eq!(
        run_cli(&[arg("segment"), arg("--notes"), path("filtered/kept.jsonl"), arg("--out"), path("segmented")]),
        0
    );
    assert_eq!(
        run_cli(&[
            arg("classify"),
            arg("--sentences"), path("segmented/sentences.jsonl"),
            arg("--backend"), arg("lexicon"),
            arg("--task"), arg("any"),
            arg("--out"), path("preds"),
        ]),
        0
    );
    assert_eq!(
        run_cli(&[
            arg("evaluate"),
            arg("--gold"), path("demo/annotations.jsonl"),
            arg("--pred"), path("preds/predictions.jsonl"),
            arg("--task"), arg("any"),
            arg("--out"), path("eval"),
        ]),
        0
    );

    // Patient-level comparison against Z-codes (adverse task).
    assert_eq!(
        run_cli(&[
            arg("classify"),
            arg("--sentences"), path("segmented/sentences.jsonl"),
            arg("--backend"), arg("lexicon"),
            arg("--task"), arg("adverse"),
            arg("--out"), path("preds_adverse"),
        ]),
        0
    );
    assert_eq!(
        run_cli(&[
            arg("patient-eval"),
            arg("--notes"), path("filtered/kept.jsonl"),
            arg("--sentences"), path("segmented/sentences.jsonl"),
            arg("--gold"), path("demo/annotations.jsonl"),
            arg("--pred"), path("preds_adverse/predictions.jsonl"),
            arg("--zcodes"), path("demo/zcodes.csv"),
            arg("--task"), arg("adverse"),
            arg("--out"), path("patient"),
        ]),
        0
    );

    // Bias audit with the lexicon backend over the shipped pairs.
    assert_eq!(
        run_cli(&[
            arg("bias-eval"),
            arg("--pairs"), path("demo/demo_pairs.jsonl"),
            arg("--synthetic"), path("demo/synthetic.jsonl"),
            arg("--backend"), arg("lexicon"),
            arg("--compare-backend"), arg("lexicon"),
            arg("--task"), arg("any"),
            arg("--out"), path("bias"),
        ]),
        0
    );

    // Cached stub backend: fill the cache against a local stub, then
    // replay byte-identically with the server gone.
    let script: Script = Arc::new(|_, body| {
        let label = if body.contains("lives alone") { "SUPPORT" } else { "NO_SDOH" };
        StubReply::Content(format!(r#"{{"label":"{label}"}}"#))
    });
    let server = StubServer::start(script);
    let config_path = dir.path().join("config.toml");
    std::fs::write(
        &config_path,
        format!(
            "[remote]\nbase_url = \"{}\"\nmodel_name = \"stub-model\"\ntimeout_ms = 2000\nbackoff_ms = 5\ncache_dir = \"{}\"\n",
            server.base_url,
            dir.path().join("cache").display()
        ),
    )
    .unwrap();
    assert_eq!(
        run_cli(&[
            arg("classify"),
            arg("--config"), config_path.display().to_string(),
            arg("--sentences"), path("segmented/sentences.jsonl"),
            arg("--backend"), arg("remote"),
            arg("--task"), arg("any"),
            arg("--out"), path("remote1"),
        ]),
        0
    );
    let live_requests = server.request_count();
    assert!(live_requests > 0);
    server.stop();
    // Offline replay from cache only.
    assert_eq!(
        run_cli(&[
            arg("classify"),
            arg("--config"), config_path.display().to_string(),
            arg("--sentences"), path("segmented/sentences.jsonl"),
            arg("--backend"), arg("remote"),
            arg("--task"), arg("any"),
            arg("--out"), path("remote2"),
        ]),
        0
    );
    let live = std::fs::read_to_string(dir.path().join("remote1/predictions.jsonl")).unwrap();
    let replayed = std::fs::read_to_string(dir.path().join("remote2/predictions.jsonl")).unwrap();
    assert_eq!(live, replayed, "cache replay is byte-identical");

    // Report over the evaluation artifacts.
    for (src, dst) in [
        ("eval/metrics.csv", "results/metrics.csv"),
        ("bias/bias_report.csv", "results/bias_report.csv"),
        ("patient/patient_eval.md", "results/patient_eval.md"),
    ] {
        std::fs::create_dir_all(dir.path().join("results")).unwrap();
        std::fs::copy(dir.path().join(src), dir.path().join(dst)).unwrap();
    }
    assert_eq!(
        run_cli(&[arg("report"), arg("--dir"), path("results"), arg("--out"), path("report")]),
        0
    );

    // Every expected artifact exists.
    for artifact in [
        "filtered/rejections.csv",
        "filtered/manifest.json",
        "segmented/sentences.jsonl",
        "preds/predictions.jsonl",
        "eval/metrics.csv",
        "eval/confusion.csv",
        "eval/discrepancies.csv",
        "patient/patient_metrics.csv",
        "patient/patient_confusion.csv",
        "patient/patient_chart.svg",
        "bias/bias_report.csv",
        "bias/bias_chart.svg",
        "report/report.md",
        "report/metrics_chart.svg",
    ] {
        assert!(
            dir.path().join(artifact).exists(),
            "missing artifact {artifact}"
        );
    }

    // The manifest records the command, seed and input digests.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("preds/manifest.json")).unwrap())
            .unwrap();
    assert!(manifest["inputs"].as_object().map(|m| !m.is_empty()).unwrap_or(false));
    assert_eq!(manifest["tool"], "sdohkit");

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "pipeline took {elapsed:?}");
    pass(
        "09 (end-to-end offline run)",
        &format!("filter -> segment -> classify -> evaluate -> patient-eval -> bias-eval -> report in {elapsed:?}"),
    );
}

// ---------------------------------------------------------------------
// Criterion 10: Z-code mapping round-trip and the published patient
// universe confusion matrices.
// ---------------------------------------------------------------------
#[test]
fn criterion_10_zcode_mapping() {
    // Every mapping-table row round-trips through the lookup.
    let expectations: [(&str, &[Category]); 7] = [
        ("Z55", &[]),
        ("Z56", &[Category::Employment]),
        ("Z59", &[Category::Housing, Category::Support, Category::Employment]),
        ("Z60", &[Category::Support]),
        ("Z62", &[Category::Parent, Category::Support]),
        ("Z63", &[Category::Support]),
        ("Z75", &[Category::Housing, Category::Transportation]),
    ];
    for (code, cats) in expectations {
        let m = map_zcode(code).unwrap();
        assert_eq!(m.matched_prefix.as_deref(), Some(code), "{code} must match itself");
        assert_eq!(
            m.categories,
            cats.iter().copied().collect::<BTreeSet<_>>(),
            "{code} mapping"
        );
        // Subcodes inherit by prefix.
        let sub = map_zcode(&format!("{code}.42")).unwrap();
        assert_eq!(sub.categories, m.categories);
    }

    // 154-patient universe shaped like the published test set.
    // Gold adverse presence: 48 positive, 106 negative.
    // Model: tp 45, fn 3, fp 13, tn 93. Z-codes: tp 1, fn 47, fp 5, tn 101.
    let mut gold = UnitLabels::new();
    let mut model = UnitLabels::new();
    let mut zcodes: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for i in 0..154usize {
        let id = format!("p{i:03}");
        let gold_positive = i < 48;
        let labels: BTreeSet<Category> = if gold_positive {
            [Category::Support].into()
        } else {
            BTreeSet::new()
        };
        gold.insert(id.clone(), labels);

        let model_positive = if gold_positive { i < 45 } else { i < 48 + 13 };
        model.insert(
            id.clone(),
            if model_positive {
                [Category::Support].into()
            } else {
                BTreeSet::new()
            },
        );

        // One gold-positive patient has a mapped code; five gold-negative
        // patients do.
        let has_zcode = i == 0 || (48..53).contains(&i);
        if has_zcode {
            zcodes.insert(id, vec!["Z60.2".to_string()]);
        }
    }

    let comparison = compare_zcodes(&gold, &model, &zcodes, &ZCodeMap::shipped()).unwrap();
    let (model_presence, _) = &comparison.model_vs_gold.presence;
    assert_eq!(
        (
            model_presence.true_positives,
            model_presence.false_positives,
            model_presence.false_negatives,
            model_presence.true_negatives
        ),
        (45, 13, 3, 93),
        "model-vs-gold adverse presence"
    );
    let (zcode_presence, _) = &comparison.zcode_vs_gold.presence;
    assert_eq!(
        (
            zcode_presence.true_positives,
            zcode_presence.false_positives,
            zcode_presence.false_negatives,
            zcode_presence.true_negatives
        ),
        (1, 5, 47, 101),
        "zcode-vs-gold adverse presence"
    );
    pass(
        "10 (Z-code mapping)",
        "all 7 table rows round-trip; 154-patient fixture reproduces both published confusion matrices exactly",
    );
}
