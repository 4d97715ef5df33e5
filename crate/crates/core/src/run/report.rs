use super::{write_atomic, RunDir, RunError, RunSummary};
use crate::llm::{Purpose, QueryRecord};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;

pub const REPORT_DIR: &str = "report";

/// One executed step as seen by the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub step: usize,
    pub seconds: f64,
    pub activities: usize,
    pub cumulative_tokens: u64,
    pub cumulative_queries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: RunSummary,
    pub rows: Vec<ReportRow>,
    /// Everything written to `report.txt`.
    pub text: String,
    /// The query table alone.
    pub query_table: String,
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
    out
}

fn per_query(tokens: u64, queries: usize) -> String {
    if queries == 0 {
        "0.00".into()
    } else {
        format!("{:.2}", tokens as f64 / queries as f64)
    }
}

fn query_table(ledger: &[QueryRecord], steps: usize) -> String {
    let column = |purpose: Option<Purpose>| {
        let rs: Vec<&QueryRecord> = ledger.iter().filter(|r| purpose.is_none_or(|p| r.purpose == p)).collect();
        let input: u64 = rs.iter().map(|r| r.input_tokens).sum();
        let output: u64 = rs.iter().map(|r| r.output_tokens).sum();
        let per_step = if steps == 0 { 0.0 } else { rs.len() as f64 / steps as f64 };
        vec![
            rs.len().to_string(),
            per_query(input, rs.len()),
            per_query(output, rs.len()),
            (input + output).to_string(),
            format!("{per_step:.4}"),
        ]
    };
    let cols = [column(Some(Purpose::Grouping)), column(Some(Purpose::Input)), column(None)];
    let labels = [
        "Number of queries",
        "Input tokens per query",
        "Output tokens per query",
        "Total tokens",
        "Queries per step",
    ];
    let rows: Vec<Vec<String>> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut r = vec![l.to_string()];
            r.extend(cols.iter().map(|c| c[i].clone()));
            r
        })
        .collect();
    table(&["", "grouping", "input", "all"], &rows)
}

/// Builds the coverage and token tables of a finished run and writes them
/// under `report/` as CSV files plus a plain-text rendering.
pub fn write_report(dir: &RunDir) -> Result<Report, RunError> {
    let summary = dir.read_summary()?;
    let coverage = dir.read_coverage()?;
    let ledger = dir.read_ledger()?;

    let rows: Vec<ReportRow> = coverage
        .iter()
        .map(|p| ReportRow {
            step: p.step,
            seconds: p.seconds,
            activities: p.activities,
            cumulative_tokens: p.cumulative_tokens,
            cumulative_queries: ledger.iter().filter(|r| r.step <= p.step).count(),
        })
        .collect();

    let out = dir.path(REPORT_DIR);
    fs::create_dir_all(&out).map_err(|e| RunError::Io {
        path: out.clone(),
        source: e,
    })?;
    let by_step: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.step.to_string(), r.activities.to_string()])
        .collect();
    let by_time: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![format!("{:.3}", r.seconds), r.activities.to_string()])
        .collect();
    let tokens: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.step.to_string(),
                r.cumulative_tokens.to_string(),
                r.cumulative_queries.to_string(),
            ]
        })
        .collect();
    let files: [(&str, &[&str], &Vec<Vec<String>>); 3] = [
        ("coverage_by_step", &["step", "activities"], &by_step),
        ("coverage_by_time", &["seconds", "activities"], &by_time),
        ("tokens_by_step", &["step", "cumulative_tokens", "cumulative_queries"], &tokens),
    ];

    let queries = query_table(&ledger, summary.steps);
    let mut text = String::new();
    let _ = writeln!(text, "{}", summary.app_name);
    let _ = writeln!(
        text,
        "steps {}  activities {}/{} ({:.2}%)  abstract states {}  raw states {}",
        summary.steps,
        summary.reached_activities.len(),
        summary.declared_activities,
        summary.coverage * 100.0,
        summary.abstract_states,
        summary.raw_states,
    );
    let _ = writeln!(text, "\n{queries}");
    for (name, header, data) in files {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        for r in data.iter() {
            w.write_record(r).expect("in-memory write");
        }
        write_atomic(&out.join(format!("{name}.csv")), &w.into_inner().expect("in-memory write"))?;
        let _ = writeln!(text, "{name}\n{}", table(header, data));
    }
    write_atomic(&out.join("report.txt"), text.as_bytes())?;
    Ok(Report {
        summary,
        rows,
        text,
        query_table: queries,
    })
}
