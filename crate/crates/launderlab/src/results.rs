//! Result persistence (CSV with a fixed column list) and plot-ready
//! aggregation (per-group mean and sd as TSV).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::loss::SoftLoss;
use crate::pipeline::ExperimentRecord;

pub const RESULT_COLUMNS: [&str; 12] = [
    "experiment_id",
    "phase",
    "seed",
    "alpha",
    "soft_loss",
    "temperature",
    "size",
    "iteration",
    "train_acc",
    "bench_acc",
    "leakage",
    "wall_time_s",
];

/// Format with 6 significant digits (fixed notation).
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.000000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:e}", x.abs());
    let exp: i32 = sci
        .split('e')
        .nth(1)
        .expect("exponent present")
        .parse()
        .expect("exponent");
    let decimals = (5 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn header_line() -> String {
    RESULT_COLUMNS.join(",")
}

fn record_line(r: &ExperimentRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.experiment_id,
        r.phase,
        r.seed,
        format_sig6(r.alpha),
        r.soft_loss,
        format_sig6(r.temperature),
        r.size,
        r.iteration,
        format_sig6(r.train_acc),
        format_sig6(r.bench_acc),
        format_sig6(r.leakage),
        format_sig6(r.wall_time_s),
    )
}

/// Write records as CSV. In append mode the existing header must match
/// exactly; on mismatch the file is left untouched.
pub fn write_results(records: &[ExperimentRecord], path: &Path, append: bool) -> Result<()> {
    let existing = if append && path.exists() {
        let text = std::fs::read_to_string(path)?;
        if text.is_empty() {
            None
        } else {
            let first = text.lines().next().unwrap_or("");
            if first != header_line() {
                return Err(Error::Format(format!(
                    "cannot append: existing header '{first}' does not match the result schema"
                )));
            }
            Some(text)
        }
    } else {
        None
    };

    let mut out = String::new();
    match existing {
        Some(text) => {
            out.push_str(&text);
            if !out.ends_with('\n') {
                out.push('\n');
            }
        }
        None => {
            out.push_str(&header_line());
            out.push('\n');
        }
    }
    for r in records {
        out.push_str(&record_line(r));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == header_line() => {}
        Some((_, first)) => {
            return Err(Error::Format(format!(
                "unexpected results header '{first}'"
            )))
        }
        None => return Err(Error::Format("empty results file".into())),
    }

    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(line).map_err(|msg| Error::Parse { line: idx + 1, msg })?);
    }
    Ok(records)
}

fn parse_record(line: &str) -> std::result::Result<ExperimentRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != RESULT_COLUMNS.len() {
        return Err(format!(
            "expected {} fields, got {}",
            RESULT_COLUMNS.len(),
            fields.len()
        ));
    }
    let f64_field = |i: usize| -> std::result::Result<f64, String> {
        fields[i]
            .parse()
            .map_err(|_| format!("bad number '{}' in {}", fields[i], RESULT_COLUMNS[i]))
    };
    let int_field = |i: usize| -> std::result::Result<u64, String> {
        fields[i]
            .parse()
            .map_err(|_| format!("bad integer '{}' in {}", fields[i], RESULT_COLUMNS[i]))
    };
    Ok(ExperimentRecord {
        experiment_id: fields[0].to_string(),
        phase: fields[1].to_string(),
        seed: int_field(2)?,
        alpha: f64_field(3)?,
        soft_loss: SoftLoss::from_name(fields[4]).map_err(|e| e.to_string())?,
        temperature: f64_field(5)?,
        size: int_field(6)? as usize,
        iteration: int_field(7)? as u32,
        train_acc: f64_field(8)?,
        bench_acc: f64_field(9)?,
        leakage: f64_field(10)?,
        wall_time_s: f64_field(11)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Alpha,
    Size,
    Loss,
    Iteration,
    Temperature,
}

impl GroupKey {
    pub fn from_name(name: &str) -> Result<GroupKey> {
        match name {
            "alpha" => Ok(GroupKey::Alpha),
            "size" => Ok(GroupKey::Size),
            "loss" => Ok(GroupKey::Loss),
            "iteration" => Ok(GroupKey::Iteration),
            "temperature" => Ok(GroupKey::Temperature),
            other => Err(Error::Config(format!(
                "unknown group key '{other}' (expected alpha|size|loss|iteration|temperature)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// Swept value the group shares.
    pub x: String,
    /// Mean benchmark accuracy of the group.
    pub mean: f64,
    /// Sample standard deviation (0 for singleton groups).
    pub sd: f64,
    pub n: usize,
}

/// Group records by the key and aggregate bench_acc into mean and sd,
/// sorted by group value.
pub fn report(records: &[ExperimentRecord], key: GroupKey) -> Vec<ReportRow> {
    let group_of = |r: &ExperimentRecord| -> (f64, String) {
        match key {
            GroupKey::Alpha => (r.alpha, r.alpha.to_string()),
            GroupKey::Size => (r.size as f64, r.size.to_string()),
            GroupKey::Loss => {
                let ord = if r.soft_loss == SoftLoss::Kld {
                    0.0
                } else {
                    1.0
                };
                (ord, r.soft_loss.to_string())
            }
            GroupKey::Iteration => (f64::from(r.iteration), r.iteration.to_string()),
            GroupKey::Temperature => (r.temperature, r.temperature.to_string()),
        }
    };

    let mut groups: Vec<(f64, String, Vec<f64>)> = Vec::new();
    for r in records {
        let (ord, name) = group_of(r);
        match groups.iter_mut().find(|(_, n, _)| *n == name) {
            Some((_, _, vals)) => vals.push(r.bench_acc),
            None => groups.push((ord, name, vec![r.bench_acc])),
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite group keys"));

    groups
        .into_iter()
        .map(|(_, x, vals)| {
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let sd = if n < 2 {
                0.0
            } else {
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0))
                    .sqrt()
            };
            ReportRow { x, mean, sd, n }
        })
        .collect()
}

/// Plot-ready TSV: x, mean bench accuracy, sd, group size.
pub fn report_tsv(rows: &[ReportRow]) -> String {
    let mut out = String::from("x\tmean\tsd\tn\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            row.x,
            format_sig6(row.mean),
            format_sig6(row.sd),
            row.n
        );
    }
    out
}
