//! The full offline pipeline over the shipped demo corpus, driven
//! through the same subcommand layer as the `sdohkit` binary:
//! demo -> filter -> segment -> classify -> evaluate -> patient-eval ->
//! bias-eval -> report.
//!
//! ```bash
//! cargo run --example end_to_end
//! ```

fn run(args: &[&str]) {
    let code = sdohkit::cli::run(args.iter().map(|s| s.to_string()));
    assert_eq!(code, 0, "step {args:?} failed with exit code {code}");
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = |name: &str| dir.path().join(name).display().to_string();

    run(&["demo", "--seed", "17", "--out", &path("demo")]);
    run(&["filter", "--notes", &path("demo/notes.jsonl"), "--out", &path("filtered")]);
    run(&["segment", "--notes", &path("filtered/kept.jsonl"), "--out", &path("segmented")]);
    run(&[
        "classify",
        "--sentences", &path("segmented/sentences.jsonl"),
        "--backend", "lexicon",
        "--task", "any",
        "--out", &path("preds"),
    ]);
    run(&[
        "evaluate",
        "--gold", &path("demo/annotations.jsonl"),
        "--pred", &path("preds/predictions.jsonl"),
        "--task", "any",
        "--out", &path("eval"),
    ]);
    run(&[
        "classify",
        "--sentences", &path("segmented/sentences.jsonl"),
        "--backend", "lexicon",
        "--task", "adverse",
        "--out", &path("preds_adverse"),
    ]);
    run(&[
        "patient-eval",
        "--notes", &path("filtered/kept.jsonl"),
        "--sentences", &path("segmented/sentences.jsonl"),
        "--gold", &path("demo/annotations.jsonl"),
        "--pred", &path("preds_adverse/predictions.jsonl"),
        "--zcodes", &path("demo/zcodes.csv"),
        "--task", "adverse",
        "--out", &path("patient"),
    ]);
    run(&[
        "bias-eval",
        "--pairs", &path("demo/demo_pairs.jsonl"),
        "--synthetic", &path("demo/synthetic.jsonl"),
        "--backend", "lexicon",
        "--task", "any",
        "--out", &path("bias"),
    ]);

    // Gather the CSVs and render the combined report.
    std::fs::create_dir_all(dir.path().join("results"))?;
    for (src, dst) in [
        ("eval/metrics.csv", "results/metrics.csv"),
        ("bias/bias_report.csv", "results/bias_report.csv"),
        ("patient/patient_eval.md", "results/patient_eval.md"),
    ] {
        std::fs::copy(dir.path().join(src), dir.path().join(dst))?;
    }
    run(&["report", "--dir", &path("results"), "--out", &path("report")]);

    println!("\n=== report.md ===");
    println!("{}", std::fs::read_to_string(dir.path().join("report/report.md"))?);
    println!("(artifacts were written under {})", dir.path().display());
    Ok(())
}
