//! Results and summary tables.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use sico::metrics::confusion;
use sico::stats::{paired_t_one_tailed, summarize};

use crate::error::{CliError, CliResult};

pub const RESULTS_HEADER: [&str; 7] =
    ["experiment", "repetition", "split", "accuracy", "kappa", "sensitivity", "specificity"];
pub const SUMMARY_HEADER: [&str; 11] =
    ["experiment", "split", "metric", "n", "mean", "std_error", "mean_diff", "t", "df", "critical", "significant"];

pub const SRC_ON_SOURCE: &str = "h_src@source_test";
pub const SRC_ON_TARGET: &str = "h_src@target_test";
pub const TG_ON_TARGET: &str = "h_tg@target_test";

pub const ALPHA: f64 = 0.05;

/// Evaluation of one classifier on one labeled test set.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub repetition: usize,
    pub split: String,
    pub accuracy: Option<f64>,
    pub kappa: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

impl ResultRow {
    /// Metrics of `predicted` against `truth`; undefined ones stay `None`.
    pub fn evaluate(
        experiment: &str,
        repetition: usize,
        split: &str,
        truth: &[usize],
        predicted: &[usize],
        class_count: usize,
    ) -> CliResult<Self> {
        let counts = confusion(truth, predicted, class_count).map_err(CliError::other)?;
        let (sensitivity, specificity) = match counts.sensitivity_specificity() {
            Ok((a, b)) if class_count == 2 => (Some(a), Some(b)),
            _ => (None, None),
        };
        Ok(Self {
            experiment: experiment.to_string(),
            repetition,
            split: split.to_string(),
            accuracy: counts.accuracy().ok(),
            kappa: counts.kappa().ok(),
            sensitivity,
            specificity,
        })
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "accuracy" => self.accuracy,
            "kappa" => self.kappa,
            "kappa_x100" => self.kappa.map(|k| k * 100.0),
            "sensitivity" => self.sensitivity,
            "specificity" => self.specificity,
            _ => None,
        }
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn parse_opt(s: &str) -> CliResult<Option<f64>> {
    if s == "NA" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| CliError::Data(format!("bad number '{s}' in results table")))
}

pub fn write_results(rows: &[ResultRow], out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(CliError::other)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.repetition.to_string(),
            r.split.clone(),
            fmt_opt(r.accuracy),
            fmt_opt(r.kappa),
            fmt_opt(r.sensitivity),
            fmt_opt(r.specificity),
        ])
        .map_err(CliError::other)?;
    }
    w.flush().map_err(CliError::other)
}

pub fn read_results(input: impl Read) -> CliResult<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(CliError::data)?.clone();
    if header.iter().collect::<Vec<_>>() != RESULTS_HEADER {
        return Err(CliError::Data(format!("unexpected results header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(CliError::data)?;
        rows.push(ResultRow {
            experiment: rec[0].to_string(),
            repetition: rec[1].parse().map_err(|_| CliError::Data(format!("bad repetition '{}'", &rec[1])))?,
            split: rec[2].to_string(),
            accuracy: parse_opt(&rec[3])?,
            kappa: parse_opt(&rec[4])?,
            sensitivity: parse_opt(&rec[5])?,
            specificity: parse_opt(&rec[6])?,
        });
    }
    Ok(rows)
}

/// Per-repetition values of `metric` on `split`, ordered by repetition.
/// `None` if any repetition lacks the value.
pub fn metric_values(rows: &[ResultRow], split: &str, metric: &str) -> Option<Vec<f64>> {
    let by_rep: BTreeMap<usize, Option<f64>> =
        rows.iter().filter(|r| r.split == split).map(|r| (r.repetition, r.metric(metric))).collect();
    if by_rep.is_empty() {
        return None;
    }
    by_rep.into_values().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub split: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub std_error: Option<f64>,
    /// Paired comparison against h_src on the target test set.
    pub test: Option<sico::stats::PairedTTest<f64>>,
}

pub const SUMMARY_METRICS: [&str; 5] = ["accuracy", "kappa", "kappa_x100", "sensitivity", "specificity"];

/// Mean and standard error per (split, metric); the h_tg rows also carry the
/// one-tailed paired t-test against h_src on the same target test sets.
pub fn summarize_results(experiment: &str, rows: &[ResultRow]) -> CliResult<Vec<SummaryRow>> {
    let mut out = Vec::new();
    for split in [SRC_ON_SOURCE, SRC_ON_TARGET, TG_ON_TARGET] {
        for metric in SUMMARY_METRICS {
            let Some(values) = metric_values(rows, split, metric) else { continue };
            let s = summarize(&values).map_err(CliError::other)?;
            let test = if split == TG_ON_TARGET && values.len() >= 2 {
                match metric_values(rows, SRC_ON_TARGET, metric) {
                    Some(base) if base.len() == values.len() => {
                        Some(paired_t_one_tailed(&values, &base, ALPHA).map_err(CliError::other)?)
                    }
                    _ => None,
                }
            } else {
                None
            };
            out.push(SummaryRow {
                experiment: experiment.to_string(),
                split: split.to_string(),
                metric: metric.to_string(),
                n: values.len(),
                mean: s.mean,
                std_error: s.std_error,
                test,
            });
        }
    }
    Ok(out)
}

pub fn write_summary(rows: &[SummaryRow], out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER).map_err(CliError::other)?;
    for r in rows {
        let t = r.test.as_ref();
        w.write_record([
            r.experiment.clone(),
            r.split.clone(),
            r.metric.clone(),
            r.n.to_string(),
            r.mean.to_string(),
            fmt_opt(r.std_error),
            fmt_opt(t.map(|t| t.mean_diff)),
            fmt_opt(t.map(|t| t.t)),
            t.map_or_else(|| "NA".into(), |t| t.df.to_string()),
            fmt_opt(t.map(|t| t.critical)),
            t.map_or_else(|| "NA".into(), |t| t.significant.to_string()),
        ])
        .map_err(CliError::other)?;
    }
    w.flush().map_err(CliError::other)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(rep: usize, split: &str, acc: f64) -> ResultRow {
        ResultRow {
            experiment: "e".into(),
            repetition: rep,
            split: split.into(),
            accuracy: Some(acc),
            kappa: None,
            sensitivity: None,
            specificity: None,
        }
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![row(0, SRC_ON_TARGET, 0.5), row(1, TG_ON_TARGET, 0.1 + 0.2)];
        let mut buf = Vec::new();
        write_results(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("experiment,repetition,split,accuracy,kappa,sensitivity,specificity\n"));
        assert_eq!(read_results(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn summary_pairs_tg_with_src() {
        let mut rows = Vec::new();
        for (r, (a, b)) in [(0.6, 0.9), (0.7, 0.9), (0.65, 0.95)].into_iter().enumerate() {
            rows.push(row(r, SRC_ON_TARGET, a));
            rows.push(row(r, TG_ON_TARGET, b));
        }
        let s = summarize_results("e", &rows).unwrap();
        assert_eq!(s.len(), 2);
        let tg = s.iter().find(|r| r.split == TG_ON_TARGET).unwrap();
        assert!(tg.test.as_ref().unwrap().significant);
        assert!(s.iter().find(|r| r.split == SRC_ON_TARGET).unwrap().test.is_none());
    }
}
