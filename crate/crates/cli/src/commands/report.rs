use std::path::{Path, PathBuf};

use clap::Args as ClapArgs;
use framestack_core::{Error, Result};

#[derive(ClapArgs)]
pub struct Args {
    /// Run histories (history.tsv) and/or metric reports, one row each
    #[arg(required = true)]
    files: Vec<PathBuf>,

    /// Which evaluation to pull from a history: the last one or the best
    /// val overall mAP
    #[arg(long, default_value = "last", value_parser = ["last", "best"])]
    select: String,

    /// Emit machine-readable TSV instead of the aligned table
    #[arg(long)]
    tsv: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub metrics: [Option<f64>; 6],
}

pub const METRIC_NAMES: [&str; 6] = ["overall", "head", "medium", "tail", "acc@1", "acc@5"];

fn parse_cell(text: &str) -> Option<f64> {
    if text == "-" {
        None
    } else {
        text.parse().ok()
    }
}

/// Display name for a run file: the parent directory for the standard
/// artifact names, otherwise the file stem.
fn run_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_default();
    if matches!(
        stem.as_str(),
        "history" | "report_val" | "report_test" | "summary"
    ) {
        if let Some(parent) = path.parent().and_then(|p| p.file_name()) {
            return parent.to_string_lossy().to_string();
        }
    }
    stem
}

fn parse_history(text: &str, select: &str) -> Option<[Option<f64>; 6]> {
    let mut chosen: Option<(f64, [Option<f64>; 6])> = None;
    for line in text.lines().skip(2) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 9 {
            continue;
        }
        let row: [Option<f64>; 6] = [
            parse_cell(fields[3]),
            parse_cell(fields[4]),
            parse_cell(fields[5]),
            parse_cell(fields[6]),
            parse_cell(fields[7]),
            parse_cell(fields[8]),
        ];
        let Some(overall) = row[0] else { continue };
        let better = match (&chosen, select) {
            (None, _) => true,
            (Some((best, _)), "best") => overall > *best,
            (Some(_), _) => true, // "last": later rows win
        };
        if better {
            chosen = Some((overall, row));
        }
    }
    chosen.map(|(_, row)| row)
}

fn parse_metrics_report(text: &str) -> [Option<f64>; 6] {
    let mut out = [None; 6];
    let mut in_summary = false;
    for line in text.lines() {
        if line.starts_with("#summary") {
            in_summary = true;
            continue;
        }
        if !in_summary {
            continue;
        }
        if let Some((key, value)) = line.split_once('\t') {
            let slot = match key {
                "overall_map" => 0,
                "head_map" => 1,
                "medium_map" => 2,
                "tail_map" => 3,
                "acc@1" => 4,
                "acc@5" => 5,
                _ => continue,
            };
            out[slot] = parse_cell(value);
        }
    }
    out
}

pub fn summarize_file(path: &Path, select: &str) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = run_name(path);
    let metrics = if text.starts_with("#history") {
        parse_history(&text, select)
            .ok_or_else(|| Error::bad_format(path, "history contains no evaluated epoch"))?
    } else if text.starts_with("#metrics") {
        parse_metrics_report(&text)
    } else {
        return Err(Error::bad_format(
            path,
            "expected a #history or #metrics file",
        ));
    };
    Ok(RunSummary { name, metrics })
}

pub fn render_tsv(rows: &[RunSummary]) -> String {
    let mut out = String::from("method\toverall\thead\tmedium\ttail\tacc@1\tacc@5\n");
    for row in rows {
        out.push_str(&row.name);
        for m in row.metrics {
            match m {
                Some(v) => out.push_str(&format!("\t{v:.6}")),
                None => out.push_str("\t-"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_table(rows: &[RunSummary]) -> String {
    let headers = [
        "method", "overall", "head", "medium", "tail", "acc@1", "acc@5",
    ];
    let mut cells: Vec<Vec<String>> = vec![headers.iter().map(|s| s.to_string()).collect()];
    for row in rows {
        let mut line = vec![row.name.clone()];
        for m in row.metrics {
            line.push(m.map_or("-".to_string(), |v| format!("{v:.4}")));
        }
        cells.push(line);
    }
    let widths: Vec<usize> = (0..headers.len())
        .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (r, row) in cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                out.push_str(&format!("{cell:<width$}", width = widths[0]));
            } else {
                out.push_str(&format!("  {cell:>width$}", width = widths[c]));
            }
        }
        out.push('\n');
        if r == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// Sort rows for display: overall mAP descending, absent values last,
/// names break ties so output is stable.
pub fn sort_rows(rows: &mut [RunSummary]) {
    rows.sort_by(|a, b| {
        match (a.metrics[0], b.metrics[0]) {
            (Some(x), Some(y)) => y.partial_cmp(&x).unwrap(),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then_with(|| a.name.cmp(&b.name))
    });
}

pub fn run(args: Args) -> Result<()> {
    let mut rows = Vec::new();
    for path in &args.files {
        let summary = summarize_file(path, &args.select)?;
        for (slot, value) in summary.metrics.iter().enumerate() {
            if value.is_none() {
                log::warn!(
                    "{}: metric {} is missing; rendering '-'",
                    summary.name,
                    METRIC_NAMES[slot]
                );
            }
        }
        rows.push(summary);
    }
    sort_rows(&mut rows);
    if args.tsv {
        print!("{}", render_tsv(&rows));
    } else {
        print!("{}", render_table(&rows));
    }
    Ok(())
}
