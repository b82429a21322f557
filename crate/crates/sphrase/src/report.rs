//! Evaluation reports as aligned tables or tab-separated lines.

use sphrase_core::eval::CategoryScore;
use sphrase_core::{AnalogyReport, SimilarityReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Table,
    Tsv,
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                s.push_str(&format!("{c:<w$}"));
            } else {
                s.push_str(&format!("  {c:>w$}"));
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    for r in rows {
        line(r);
    }
    out
}

fn analogy_row(c: &CategoryScore) -> Vec<String> {
    vec![c.name.clone(), c.correct.to_string(), c.total.to_string(), format!("{:.4}", c.accuracy())]
}

/// One row per category followed by `all`.
pub fn analogy(report: &AnalogyReport, format: ReportFormat) -> String {
    let mut rows: Vec<Vec<String>> = report.categories.iter().map(analogy_row).collect();
    rows.push(analogy_row(&report.overall()));
    match format {
        ReportFormat::Table => table(&["category", "correct", "total", "accuracy"], &rows),
        ReportFormat::Tsv => rows.iter().map(|r| r.join("\t") + "\n").collect(),
    }
}

/// One row per phrase length: `length, phrases, score` (`-` when empty).
pub fn similarity(report: &SimilarityReport, format: ReportFormat) -> String {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|&(l, n, s)| vec![l.to_string(), n.to_string(), s.map_or("-".into(), |s| format!("{s:.4}"))])
        .collect();
    match format {
        ReportFormat::Table => table(&["length", "phrases", "score"], &rows),
        ReportFormat::Tsv => rows.iter().map(|r| r.join("\t") + "\n").collect(),
    }
}
