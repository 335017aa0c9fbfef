//! Demographic-injection bias audit: classify sentence pairs with and
//! without injected descriptors, group the mismatch rates, and run the
//! two-proportion z and chi-squared tests.
//!
//! ```bash
//! cargo run --example bias_audit
//! ```

use sdohkit::bias::{
    chi_squared, evaluate_pairs, mismatch_rates, significance_report, summarize_model,
    two_proportion_z, GroupBy,
};
use sdohkit::classify::KeywordLexicon;
use sdohkit::schema::Task;
use sdohkit::synthgen::{DemoPair, SyntheticSentence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The shipped demo corpus includes validated pairs.
    let dir = tempfile::tempdir()?;
    sdohkit::demo::write_demo_corpus(dir.path(), 17)?;
    let read_jsonl = |name: &str| -> Vec<serde_json::Value> {
        std::fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    };
    let originals: Vec<SyntheticSentence> = read_jsonl("synthetic.jsonl")
        .into_iter()
        .map(|v| serde_json::from_value(v).unwrap())
        .collect();
    let pairs: Vec<DemoPair> = read_jsonl("demo_pairs.jsonl")
        .into_iter()
        .map(|v| serde_json::from_value(v).unwrap())
        .collect();

    let lexicon = KeywordLexicon::shipped();
    let (outcomes, excluded) = evaluate_pairs(&pairs, &originals, &lexicon, Task::Any)?;
    println!("evaluated {} pairs ({} excluded)", outcomes.len(), excluded.len());

    let overall = mismatch_rates(&outcomes, GroupBy::Overall)?;
    let rate = &overall.rates[0];
    println!(
        "overall mismatch rate: {}/{} = {:.3}",
        rate.mismatches, rate.pairs, rate.rate
    );
    for group_by in [GroupBy::RaceEthnicity, GroupBy::Gender, GroupBy::GoldLabel] {
        let rates = mismatch_rates(&outcomes, group_by)?;
        println!("\nby {group_by:?}:");
        for row in &rates.rates {
            println!(
                "  {:<16} {:>3}/{:<3} = {:.3}",
                row.group, row.mismatches, row.pairs, row.rate
            );
        }
    }

    // Statistical tests on published-scale counts.
    let z = two_proportion_z(60, 419, 90, 419)?;
    println!("\ntwo-proportion z (60/419 vs 90/419): z = {:.3}, p = {:.4}", z.z, z.p_value);
    let chi = chi_squared(&[vec![10, 90], vec![20, 80]])?;
    println!(
        "chi-squared [[10,90],[20,80]]: statistic = {:.3}, df = {}, p = {:.4}",
        chi.statistic, chi.df, chi.p_value
    );

    // Comparing a model against itself flags nothing.
    let summary = summarize_model(&lexicon_id(), Task::Any, &outcomes)?;
    let report = significance_report(&summary, &summary, 0.05)?;
    println!("\nsignificance entries (self-comparison):");
    for entry in &report.entries {
        println!(
            "  {:<18} {:<28} p = {:.4} significant = {}",
            entry.test, entry.comparison, entry.p_value, entry.significant
        );
    }
    Ok(())
}

fn lexicon_id() -> String {
    "keyword-lexicon".to_string()
}
