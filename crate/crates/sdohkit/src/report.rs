//! CSV, Markdown and SVG chart emission for evaluation results. All
//! writers are deterministic: fixed column orders, fixed float
//! formatting, atomic file replacement.

use std::io;
use std::path::{Path, PathBuf};

use crate::bias::{ModelBiasSummary, SignificanceReport};
use crate::evalkit::{AblationRow, AgreementReport, ConfusionCounts, DiscrepancyRow, EvalLabel, Metrics, SystemEval};
use crate::schema::Task;

/// Write via a temp file and rename so readers never observe partial
/// output.
pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let tmp: PathBuf = path.with_extension("tmp~");
    std::fs::write(&tmp, content)?;
    std::fs::rename(tmp, path)
}

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

/// metrics.csv: task,model,label,precision,recall,f1
pub fn metrics_csv(task: Task, model: &str, rows: &[(EvalLabel, Metrics)]) -> String {
    let mut out = String::from("task,model,label,precision,recall,f1\n");
    for (label, m) in rows {
        out.push_str(&format!(
            "{task},{model},{},{},{},{}\n",
            label.display_name(),
            fmt4(m.precision),
            fmt4(m.recall),
            fmt4(m.f1)
        ));
    }
    out
}

/// confusion.csv: task,model,label,granularity,tp,fp,fn,tn
pub fn confusion_csv(task: Task, model: &str, counts: &[ConfusionCounts]) -> String {
    let mut out = String::from("task,model,label,granularity,tp,fp,fn,tn\n");
    for c in counts {
        let granularity = match c.granularity {
            crate::evalkit::Granularity::Sentence => "sentence",
            crate::evalkit::Granularity::Patient => "patient",
        };
        out.push_str(&format!(
            "{task},{model},{},{granularity},{},{},{},{}\n",
            c.label.display_name(),
            c.true_positives,
            c.false_positives,
            c.false_negatives,
            c.true_negatives
        ));
    }
    out
}

/// discrepancies.csv: task,ground_truth,model_prediction,count
pub fn discrepancies_csv(task: Task, rows: &[DiscrepancyRow]) -> String {
    let mut out = String::from("task,ground_truth,model_prediction,count\n");
    for row in rows {
        out.push_str(&format!(
            "{task},{},{},{}\n",
            row.gold.display_name(),
            row.pred.display_name(),
            row.count
        ));
    }
    out
}

/// agreement.csv: task,label,alpha,kappa with a final overall row.
pub fn agreement_csv(report: &AgreementReport) -> String {
    let mut out = String::from("task,label,alpha,kappa\n");
    for (cat, la) in &report.per_label {
        out.push_str(&format!(
            "{},{},{},{}\n",
            report.task,
            cat.display_name(),
            fmt4(la.alpha),
            fmt4(la.kappa)
        ));
    }
    out.push_str(&format!(
        "{},overall,{},{}\n",
        report.task,
        fmt4(report.overall.alpha),
        fmt4(report.overall.kappa)
    ));
    out
}

/// ablation.csv mirroring the ablation table: one row per
/// (percent, variant) with macro plus the seven class columns.
pub fn ablation_csv(task: Task, rows: &[AblationRow]) -> String {
    let mut out = String::from(
        "task,percent_removed,variant,macro_f1,no_sdoh,employment,housing,parent,relationship,social_support,transportation\n",
    );
    for row in rows {
        let variant = if row.with_synthetic {
            "gold+synthetic"
        } else {
            "gold_only"
        };
        let mut cells = Vec::new();
        for label in EvalLabel::REPORT_ORDER {
            let f1 = row
                .per_label_f1
                .iter()
                .find(|(l, _)| *l == label)
                .map(|(_, f1)| *f1)
                .unwrap_or(0.0);
            cells.push(fmt3(f1));
        }
        out.push_str(&format!(
            "{task},{},{variant},{},{}\n",
            row.percent_removed,
            fmt3(row.macro_f1),
            cells.join(",")
        ));
    }
    out
}

/// bias_report.csv: group,task,model,mismatches,pairs,rate,test,statistic,p,significant
pub fn bias_report_csv(
    summaries: &[&ModelBiasSummary],
    significance: Option<&SignificanceReport>,
) -> String {
    let mut out = String::from("group,task,model,mismatches,pairs,rate,test,statistic,p,significant\n");
    for summary in summaries {
        for rates in [
            &summary.overall,
            &summary.by_race,
            &summary.by_gender,
            &summary.by_gold_label,
        ] {
            for rate in &rates.rates {
                out.push_str(&format!(
                    "{},{},{},{},{},{},,,,\n",
                    rate.group,
                    summary.task,
                    summary.model_id,
                    rate.mismatches,
                    rate.pairs,
                    fmt4(rate.rate)
                ));
            }
        }
    }
    if let Some(report) = significance {
        for entry in &report.entries {
            out.push_str(&format!(
                "{},{},{},,,,{},{},{},{}\n",
                entry.comparison,
                summaries.first().map(|s| s.task.to_string()).unwrap_or_default(),
                entry.model,
                entry.test,
                fmt4(entry.statistic),
                fmt4(entry.p_value),
                entry.significant
            ));
        }
    }
    out
}

/// Markdown table of per-label metrics in report order.
pub fn metrics_markdown(title: &str, rows: &[(EvalLabel, Metrics)], macro_f1: f64) -> String {
    let mut out = format!("## {title}\n\n");
    out.push_str("| Class | Precision | Recall | F1 |\n");
    out.push_str("|---|---|---|---|\n");
    for (label, m) in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            label.display_name(),
            fmt3(m.precision),
            fmt3(m.recall),
            fmt3(m.f1)
        ));
    }
    out.push_str(&format!("\nMacro-F1: **{}**\n", fmt3(macro_f1)));
    out
}

/// Markdown grid of ablation rows.
pub fn ablation_markdown(task: Task, rows: &[AblationRow]) -> String {
    let mut out = format!("## Ablation ({task} task)\n\n");
    out.push_str("| Percent removed | Variant | Macro-F1 | No SDoH | Employment | Housing | Parent | Relationship | Social Support | Transportation |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for row in rows {
        let variant = if row.with_synthetic {
            "Gold + synthetic data"
        } else {
            "Gold data only"
        };
        let cells: Vec<String> = EvalLabel::REPORT_ORDER
            .iter()
            .map(|label| {
                row.per_label_f1
                    .iter()
                    .find(|(l, _)| l == label)
                    .map(|(_, f1)| fmt3(*f1))
                    .unwrap_or_else(|| "0.000".to_string())
            })
            .collect();
        out.push_str(&format!(
            "| {}% | {variant} | {} | {} |\n",
            row.percent_removed,
            fmt3(row.macro_f1),
            cells.join(" | ")
        ));
    }
    out
}

/// Markdown summary of patient-level model-vs-zcode comparison.
pub fn patient_eval_markdown(task: Task, model: &SystemEval, zcode: &SystemEval) -> String {
    let mut out = format!("## Patient-level comparison ({task} task)\n\n");
    out.push_str("| Class | Model F1 | Z-code F1 |\n|---|---|---|\n");
    for (label, _, m) in &model.per_label {
        let z = zcode
            .per_label
            .iter()
            .find(|(l, _, _)| l == label)
            .map(|(_, _, m)| m.f1)
            .unwrap_or(0.0);
        out.push_str(&format!(
            "| {} | {} | {} |\n",
            label.display_name(),
            fmt3(m.f1),
            fmt3(z)
        ));
    }
    out.push_str(&format!(
        "\nMacro-F1: model **{}** vs Z-codes **{}**\n",
        fmt3(model.macro_f1),
        fmt3(zcode.macro_f1)
    ));
    let (pc, pm) = &model.presence;
    out.push_str(&format!(
        "\nPresence (any label): model tp={} fp={} fn={} tn={} (recall {})\n",
        pc.true_positives,
        pc.false_positives,
        pc.false_negatives,
        pc.true_negatives,
        fmt3(pm.recall)
    ));
    out
}

/// A grouped bar chart as a self-contained SVG: one cluster per group,
/// one bar per series. Values are fractions in [0, 1].
pub fn grouped_bar_chart_svg(
    title: &str,
    series_names: &[&str],
    groups: &[(String, Vec<f64>)],
) -> String {
    const BAR_WIDTH: f64 = 28.0;
    const BAR_GAP: f64 = 4.0;
    const GROUP_GAP: f64 = 30.0;
    const CHART_HEIGHT: f64 = 220.0;
    const MARGIN_LEFT: f64 = 50.0;
    const MARGIN_TOP: f64 = 40.0;
    const MARGIN_BOTTOM: f64 = 70.0;
    const COLORS: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2"];

    let cluster_width = series_names.len() as f64 * (BAR_WIDTH + BAR_GAP);
    let width = MARGIN_LEFT + groups.len() as f64 * (cluster_width + GROUP_GAP) + 40.0;
    let height = MARGIN_TOP + CHART_HEIGHT + MARGIN_BOTTOM;

    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{:.0}" y="20" font-family="sans-serif" font-size="14" font-weight="bold">{}</text>"#,
        MARGIN_LEFT,
        xml_escape(title)
    ));
    svg.push('\n');

    // Y axis with gridlines at 0, 0.25, 0.5, 0.75, 1.0.
    for i in 0..=4 {
        let value = i as f64 * 0.25;
        let y = MARGIN_TOP + CHART_HEIGHT * (1.0 - value);
        svg.push_str(&format!(
            r##"<line x1="{MARGIN_LEFT:.0}" y1="{y:.1}" x2="{:.0}" y2="{y:.1}" stroke="#ddd"/>"##,
            width - 20.0
        ));
        svg.push_str(&format!(
            r#"<text x="{:.0}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{value:.2}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 3.0
        ));
        svg.push('\n');
    }

    for (gi, (group, values)) in groups.iter().enumerate() {
        let x0 = MARGIN_LEFT + gi as f64 * (cluster_width + GROUP_GAP) + GROUP_GAP / 2.0;
        for (si, value) in values.iter().enumerate() {
            let v = value.clamp(0.0, 1.0);
            let bar_height = CHART_HEIGHT * v;
            let x = x0 + si as f64 * (BAR_WIDTH + BAR_GAP);
            let y = MARGIN_TOP + CHART_HEIGHT - bar_height;
            let color = COLORS[si % COLORS.len()];
            svg.push_str(&format!(
                r#"<rect x="{x:.1}" y="{y:.1}" width="{BAR_WIDTH:.0}" height="{bar_height:.1}" fill="{color}"/>"#
            ));
            svg.push_str(&format!(
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="9" text-anchor="middle">{:.2}</text>"#,
                x + BAR_WIDTH / 2.0,
                y - 3.0,
                v
            ));
            svg.push('\n');
        }
        svg.push_str(&format!(
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            x0 + cluster_width / 2.0,
            MARGIN_TOP + CHART_HEIGHT + 16.0,
            xml_escape(group)
        ));
        svg.push('\n');
    }

    // Legend.
    for (si, name) in series_names.iter().enumerate() {
        let y = MARGIN_TOP + CHART_HEIGHT + 34.0 + si as f64 * 14.0;
        let color = COLORS[si % COLORS.len()];
        svg.push_str(&format!(
            r#"<rect x="{MARGIN_LEFT:.0}" y="{:.1}" width="10" height="10" fill="{color}"/>"#,
            y - 9.0
        ));
        svg.push_str(&format!(
            r#"<text x="{:.0}" y="{y:.1}" font-family="sans-serif" font-size="10">{}</text>"#,
            MARGIN_LEFT + 14.0,
            xml_escape(name)
        ));
        svg.push('\n');
    }

    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::Granularity;

    #[test]
    fn csv_emission_is_deterministic() {
        let rows = vec![
            (
                EvalLabel::NoSdoh,
                Metrics {
                    precision: 1.0,
                    recall: 0.5,
                    f1: 2.0 / 3.0,
                },
            ),
            (
                EvalLabel::Category(crate::schema::Category::Housing),
                Metrics {
                    precision: 0.25,
                    recall: 0.125,
                    f1: 1.0 / 6.0,
                },
            ),
        ];
        let a = metrics_csv(Task::Any, "lexicon", &rows);
        let b = metrics_csv(Task::Any, "lexicon", &rows);
        assert_eq!(a, b);
        assert!(a.starts_with("task,model,label,precision,recall,f1\n"));
        assert!(a.contains("any,lexicon,No SDoH,1.0000,0.5000,0.6667"));
    }

    #[test]
    fn confusion_csv_columns() {
        let counts = vec![ConfusionCounts::new(
            EvalLabel::Presence,
            Granularity::Patient,
            89,
            3,
            4,
            58,
        )];
        let csv = confusion_csv(Task::Any, "m", &counts);
        assert!(csv.contains("any,m,Any mention,patient,89,3,4,58"));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = grouped_bar_chart_svg(
            "Mismatch rates",
            &["fine-tuned", "chat"],
            &[
                ("asian".to_string(), vec![0.12, 0.25]),
                ("black".to_string(), vec![0.18, 0.22]),
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<rect").count(), 4 + 2); // bars + legend swatches
        assert!(svg.contains("Mismatch rates"));
    }

    #[test]
    fn empty_results_are_valid_files() {
        let csv = metrics_csv(Task::Adverse, "m", &[]);
        assert_eq!(csv, "task,model,label,precision,recall,f1\n");
        let md = ablation_markdown(Task::Any, &[]);
        assert!(md.contains("| Percent removed |"));
        let svg = grouped_bar_chart_svg("empty", &[], &[]);
        assert!(svg.contains("</svg>"));
    }
}
