//! `valcon report`: draw bar-chart figures from previously written score
//! tables.
//!
//! Every `scores_*.csv` under the output directory (written by `analyze`
//! or `simulate`) gets a per-topic bar chart with confidence whiskers and
//! the two-distribution flip bound drawn as a dashed rule, plus a sibling
//! CSV listing exactly the bars drawn.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use valcon_core::divergence::flip_bound;
use valcon_core::measures::Interval;
use valcon_core::report::{bar_chart_svg, Bar, ChartConfig};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// One parsed row of a scores CSV; only the columns a chart needs.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub measure: String,
    pub topic_id: String,
    pub value: f64,
    pub ci: Option<Interval>,
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRow>> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(file);
    let bad = |line: usize, what: &str| {
        CliError::Validation(format!("{} record {}: {}", path.display(), line, what))
    };
    let headers = reader
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let (Some(measure_col), Some(topic_col), Some(value_col)) =
        (column("measure"), column("topic_id"), column("value"))
    else {
        return Err(CliError::Validation(format!(
            "{} is not a scores table (missing measure/topic_id/value columns)",
            path.display()
        )));
    };
    let ci_cols = column("ci_low").zip(column("ci_high"));

    let mut rows = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let field = |col: usize| record.get(col).unwrap_or("");
        let value: f64 = field(value_col)
            .parse()
            .map_err(|_| bad(index + 1, "value is not a number"))?;
        let ci = match ci_cols {
            Some((low_col, high_col)) if !field(low_col).is_empty() => {
                let low: f64 = field(low_col)
                    .parse()
                    .map_err(|_| bad(index + 1, "ci_low is not a number"))?;
                let high: f64 = field(high_col)
                    .parse()
                    .map_err(|_| bad(index + 1, "ci_high is not a number"))?;
                Some(Interval { low, high })
            }
            _ => None,
        };
        rows.push(ScoreRow {
            measure: field(measure_col).to_string(),
            topic_id: field(topic_col).to_string(),
            value,
            ci,
        });
    }
    Ok(rows)
}

/// Aggregate rows per topic: bar height is the topic's mean value, and
/// the whisker is the mean interval when every row of the topic has one.
pub fn bars_by_topic(rows: &[ScoreRow]) -> Vec<Bar> {
    let mut by_topic: BTreeMap<&str, Vec<&ScoreRow>> = BTreeMap::new();
    for row in rows {
        by_topic.entry(&row.topic_id).or_default().push(row);
    }
    by_topic
        .into_iter()
        .map(|(topic, group)| {
            let n = group.len() as f64;
            let value = group.iter().map(|r| r.value).sum::<f64>() / n;
            let ci = if group.iter().all(|r| r.ci.is_some()) {
                let low = group.iter().map(|r| r.ci.expect("checked").low).sum::<f64>() / n;
                let high = group.iter().map(|r| r.ci.expect("checked").high).sum::<f64>() / n;
                Some(Interval { low, high })
            } else {
                None
            };
            Bar { label: topic.to_string(), value, ci }
        })
        .collect()
}

/// Every `scores_*.csv` under `dir`, recursively, in sorted path order.
pub fn collect_score_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Config(format!("cannot read directory {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_score_files(&path, out)?;
        } else if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
            if name.starts_with("scores_") && name.ends_with(".csv") {
                out.push(path);
            }
        }
    }
    Ok(())
}

fn figure_paths(scores_path: &Path) -> (PathBuf, PathBuf, String) {
    let stem = scores_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scores")
        .trim_start_matches("scores_")
        .to_string();
    let dir = scores_path.parent().unwrap_or(Path::new("."));
    (
        dir.join(format!("figure_{stem}.svg")),
        dir.join(format!("figure_{stem}_bars.csv")),
        stem,
    )
}

fn write_bars_csv(path: &Path, bars: &[Bar]) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(file);
    let io_err =
        |e: csv::Error| CliError::Config(format!("cannot write {}: {e}", path.display()));
    w.write_record(["label", "value", "ci_low", "ci_high"]).map_err(io_err)?;
    for bar in bars {
        let (low, high) = match bar.ci {
            Some(interval) => (interval.low.to_string(), interval.high.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([bar.label.as_str(), &bar.value.to_string(), &low, &high])
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    cfg.ensure_dirs()?;
    let mut score_files = Vec::new();
    collect_score_files(&cfg.output_dir, &mut score_files)?;
    if score_files.is_empty() {
        println!(
            "no score tables under {}; run the analyze or simulate subcommand first",
            cfg.output_dir.display()
        );
        return Ok(());
    }

    let bound = flip_bound(2);
    for scores_path in score_files {
        let rows = read_scores_csv(&scores_path)?;
        let bars = bars_by_topic(&rows);
        let (svg_path, bars_path, stem) = figure_paths(&scores_path);
        let title = match rows.first() {
            Some(row) => format!("{} by topic", row.measure),
            None => format!("{stem} by topic"),
        };
        let svg = bar_chart_svg(
            &bars,
            &ChartConfig { title, bound: Some(bound), ..ChartConfig::default() },
        );
        fs::write(&svg_path, svg)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", svg_path.display())))?;
        write_bars_csv(&bars_path, &bars)?;
        println!(
            "{} -> {} ({} bar(s))",
            scores_path.display(),
            svg_path.display(),
            bars.len()
        );
    }
    Ok(())
}
