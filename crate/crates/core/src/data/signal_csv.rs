//! Windowed signal CSV: header `window_id,channel,t0,...,t{L-1}[,label]`,
//! one row per (window, channel), channels listed in order.

use std::io::{Read, Write};

use super::{Layout, SampleSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(line, format!("{other:?}")),
    }
}

/// Writes a 1D signal set. The label column is present iff the set is labeled.
pub fn write_signal_csv<T: Scalar>(set: &SampleSet<T>, out: impl Write) -> Result<()> {
    let layout = set.layout();
    if layout.height != 1 {
        return Err(Error::input("signal CSV holds 1D windows only"));
    }
    let labels = set.labels();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["window_id".to_string(), "channel".to_string()];
    header.extend((0..layout.width).map(|t| format!("t{t}")));
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, row) in set.features().iter_rows().enumerate() {
        for c in 0..layout.channels {
            let mut record = vec![i.to_string(), c.to_string()];
            record.extend(row[c * layout.width..(c + 1) * layout.width].iter().map(|v| v.as_f64().to_string()));
            if let Some(labels) = labels {
                record.push(labels[i].to_string());
            }
            w.write_record(&record).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a signal CSV. `class_count` defaults to one more than the largest
/// label (or 1 for unlabeled files).
pub fn read_signal_csv<T: Scalar>(input: impl Read, name: &str, class_count: Option<usize>) -> Result<SampleSet<T>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let has_label = header.iter().next_back() == Some("label");
    let length = header.len().saturating_sub(2 + usize::from(has_label));
    if header.get(0) != Some("window_id") || header.get(1) != Some("channel") || length == 0 {
        return Err(Error::format(1, "header must start with window_id,channel and list time columns"));
    }
    for t in 0..length {
        if header.get(2 + t) != Some(format!("t{t}").as_str()) {
            return Err(Error::format(1, format!("expected column t{t}")));
        }
    }

    let mut values: Vec<T> = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    let mut channels: Option<usize> = None;
    let mut current: Option<(String, usize, Option<usize>)> = None;
    let parse_err = |line: u64, what: &str| Error::format(line, format!("cannot parse {what}"));

    let finish = |cur: Option<(String, usize, Option<usize>)>,
                  line: u64,
                  channels: &mut Option<usize>,
                  labels: &mut Vec<Option<usize>>|
     -> Result<()> {
        if let Some((_, n, label)) = cur {
            match *channels {
                None => *channels = Some(n),
                Some(c) if c != n => return Err(Error::format(line, format!("window has {n} channels, expected {c}"))),
                _ => {}
            }
            labels.push(label);
        }
        Ok(())
    };

    for record in r.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or_default().to_string();
        let channel: usize = record.get(1).unwrap_or_default().parse().map_err(|_| parse_err(line, "channel"))?;
        let label = if has_label {
            let cell = record.get(2 + length).unwrap_or_default();
            if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<usize>().map_err(|_| parse_err(line, "label"))?)
            }
        } else {
            None
        };
        let same_window = current.as_ref().is_some_and(|(cur, _, _)| *cur == id);
        if same_window {
            let cur = current.as_mut().expect("checked");
            if channel != cur.1 {
                return Err(Error::format(line, format!("expected channel {}, found {channel}", cur.1)));
            }
            if label != cur.2 {
                return Err(Error::format(line, "label differs between channels of one window"));
            }
            cur.1 += 1;
        } else {
            finish(current.take(), line, &mut channels, &mut labels)?;
            if channel != 0 {
                return Err(Error::format(line, "window must start at channel 0"));
            }
            current = Some((id, 1, label));
        }
        for t in 0..length {
            let v: f64 =
                record.get(2 + t).unwrap_or_default().trim().parse().map_err(|_| parse_err(line, "sample value"))?;
            if !v.is_finite() {
                return Err(Error::format(line, "non-finite sample value"));
            }
            values.push(T::lit(v));
        }
    }
    finish(current.take(), 0, &mut channels, &mut labels)?;
    let channels = channels.ok_or_else(|| Error::data(format!("'{name}' holds no windows")))?;

    let labels = if labels.iter().all(Option::is_some) && has_label {
        Some(labels.into_iter().map(|l| l.expect("checked")).collect::<Vec<_>>())
    } else if labels.iter().all(Option::is_none) {
        None
    } else {
        return Err(Error::format(0, "some windows are labeled and others are not"));
    };
    let classes = class_count.unwrap_or_else(|| labels.as_ref().and_then(|l| l.iter().max()).map_or(1, |m| m + 1));
    let layout = Layout::signal(channels, length);
    let n = values.len() / layout.size();
    SampleSet::new(name, Matrix::new(n, layout.size(), values)?, layout, labels, classes)
}
