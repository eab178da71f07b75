//! Plain-text tables. Percent metrics show one decimal, tau two; a tau
//! whose Fisher-combined p is not below .05 shows as `n.s.`. The JSON and CSV
//! files keep every raw value.

use crate::experiments::{CellStatus, CellSummary, StudyKind, StudyReport, SIGNIFICANCE};
use crate::metrics::EvaluationReport;

#[derive(Clone, Copy)]
enum Style {
    Percent,
    Tau,
    Decimal(usize),
}

struct Column {
    metric: &'static str,
    header: &'static str,
    style: Style,
}

const fn col(metric: &'static str, header: &'static str, style: Style) -> Column {
    Column { metric, header, style }
}

fn columns(study: StudyKind) -> Vec<Column> {
    match study {
        StudyKind::Granularity => vec![
            col("max_tpr_difference", "max TPR diff (%)", Style::Percent),
            col("soft_accuracy", "soft acc (%)", Style::Percent),
            col("auc", "AUC (%)", Style::Percent),
        ],
        StudyKind::OtherHandling => vec![
            col("other_auc", "Other AUC (%)", Style::Percent),
            col("soft_accuracy", "soft acc (%)", Style::Percent),
            col("max_tpr_difference", "max TPR diff (%)", Style::Percent),
        ],
        StudyKind::SubgroupPredictivity => vec![col("target_auc", "target AUC (%)", Style::Percent)],
        StudyKind::MixtureProbe => vec![
            col("target_auc", "target AUC (%)", Style::Percent),
            col("best_ratio", "ratio", Style::Decimal(2)),
        ],
        StudyKind::RankingReification => vec![
            col("tau", "tau", Style::Tau),
            col("max_tpr_difference", "max TPR diff (%)", Style::Percent),
            col("soft_accuracy", "soft acc (%)", Style::Percent),
            col("rank_a", "rank A", Style::Decimal(1)),
            col("rank_b", "rank B", Style::Decimal(1)),
        ],
    }
}

fn variant_header(study: StudyKind) -> Option<&'static str> {
    match study {
        StudyKind::OtherHandling => Some("strategy"),
        StudyKind::SubgroupPredictivity => Some("donor"),
        StudyKind::MixtureProbe => Some("curve"),
        _ => None,
    }
}

/// `mean±half_width` scaled by `scale`, e.g. `13.9±2.9`.
pub fn format_ci(mean: f64, half_width: Option<f64>, scale: f64, decimals: usize) -> String {
    match half_width {
        Some(h) => format!("{:.*}±{:.*}", decimals, mean * scale, decimals, h * scale),
        None => format!("{:.*}", decimals, mean * scale),
    }
}

fn cell_text(c: &CellSummary, column: &Column) -> String {
    if c.status == CellStatus::NotApplicable {
        return "n/a".into();
    }
    let Some(m) = c.metric(column.metric) else {
        return "-".into();
    };
    let text = match column.style {
        Style::Percent => format_ci(m.mean, m.half_width, 100.0, 1),
        Style::Decimal(d) => format_ci(m.mean, m.half_width, 1.0, d),
        Style::Tau => match c.fisher {
            Some(f) if f.combined_p < SIGNIFICANCE => format_ci(m.mean, m.half_width, 1.0, 2),
            Some(_) => "n.s.".into(),
            None => "-".into(),
        },
    };
    if c.status == CellStatus::Incomplete {
        format!("{text}*")
    } else {
        text
    }
}

fn layout(rows: &[Vec<String>]) -> String {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..width)
        .map(|j| rows.iter().filter_map(|r| r.get(j)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

/// The study table: one row per cell.
pub fn render_report(report: &StudyReport) -> String {
    let cols = columns(report.study);
    let variant = variant_header(report.study);
    let with_point = report.study == StudyKind::MixtureProbe;
    let mut header = vec!["scenario".to_string(), "algorithm".to_string()];
    header.extend(variant.map(String::from));
    if with_point {
        header.push("target rows".into());
    }
    header.extend(cols.iter().map(|c| c.header.to_string()));
    let mut rows = vec![header];
    for c in &report.cells {
        let mut row = vec![c.key.scenario.clone(), c.key.algorithm.clone()];
        if variant.is_some() {
            row.push(c.key.variant.clone());
        }
        if with_point {
            row.push(c.key.point.map(|p| p.to_string()).unwrap_or_else(|| "-".into()));
        }
        row.extend(cols.iter().map(|col| cell_text(c, col)));
        rows.push(row);
    }
    let mut out = layout(&rows);
    if report.cells.iter().any(|c| c.status == CellStatus::Incomplete) {
        out.push_str("* fewer than 2 trials completed\n");
    }
    if !report.dropped_groups.is_empty() {
        out.push_str(&format!("dropped by the group filter: {}\n", report.dropped_groups.join(", ")));
    }
    out
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.1}", 100.0 * x)).unwrap_or_else(|| "-".into())
}

/// Per-group table of a single evaluation.
pub fn render_evaluation(report: &EvaluationReport) -> String {
    let mut rows = vec![["group", "count", "positives", "base rate (%)", "soft TPR (%)", "AUC (%)"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
    for g in &report.groups {
        rows.push(vec![
            g.group.clone(),
            g.count.to_string(),
            g.positives.to_string(),
            pct(Some(g.base_rate)),
            pct(g.soft_tpr),
            pct(g.auc),
        ]);
    }
    let mut out = layout(&rows);
    out.push_str(&format!("soft accuracy (%): {}\n", pct(Some(report.soft_accuracy))));
    out.push_str(&format!("AUC (%): {}\n", pct(report.auc)));
    out.push_str(&format!("max TPR difference (%): {}\n", pct(report.max_tpr_difference())));
    if let Some(k) = report.kendall {
        out.push_str(&format!("Kendall tau (base rate vs TPR): {:.2} (p = {:.3})\n", k.tau, k.p_value));
    }
    for n in &report.notes {
        out.push_str(&format!("note: {n}\n"));
    }
    out
}
