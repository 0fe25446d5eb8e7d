//! Plain-text handoff formats for preprocessed series.
//!
//! RR series: header `peak_time_s,interval_s,valid,repaired`, one row per
//! interval, followed by a final row holding the last peak time and empty
//! interval fields.
//!
//! Traces: a `# sample_rate_hz=<r> start_time_s=<t>` line, a header of
//! channel labels, then one row per sample. All channels share the rate.

use std::io::{BufRead, BufReader, Read, Write};

use thiserror::Error;

use super::SignalTrace;
use crate::preprocess::RrSeries;

#[derive(Debug, Error)]
pub enum SeriesIoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("traces written together must share rate, start and length")]
    Incompatible,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> SeriesIoError {
    SeriesIoError::Parse {
        line,
        message: message.into(),
    }
}

pub fn write_rr_csv<W: Write>(rr: &RrSeries, mut w: W) -> Result<(), SeriesIoError> {
    writeln!(w, "peak_time_s,interval_s,valid,repaired")?;
    for i in 0..rr.intervals_s.len() {
        writeln!(
            w,
            "{},{},{},{}",
            rr.peak_times_s[i],
            rr.intervals_s[i],
            u8::from(rr.valid_mask[i]),
            u8::from(rr.repaired_mask[i])
        )?;
    }
    if let Some(last) = rr.peak_times_s.last() {
        writeln!(w, "{last},,,")?;
    }
    Ok(())
}

pub fn read_rr_csv<R: Read>(r: R) -> Result<RrSeries, SeriesIoError> {
    let mut rr = RrSeries::default();
    let reader = BufReader::new(r);
    let mut saw_tail = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let n = idx + 1;
        if idx == 0 {
            if line.trim() != "peak_time_s,interval_s,valid,repaired" {
                return Err(parse_err(n, "unexpected RR header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if saw_tail {
            return Err(parse_err(n, "rows after the final peak row"));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(n, "expected 4 fields"));
        }
        let t: f64 = fields[0]
            .parse()
            .map_err(|_| parse_err(n, format!("bad peak time `{}`", fields[0])))?;
        rr.peak_times_s.push(t);
        if fields[1].is_empty() {
            saw_tail = true;
            continue;
        }
        let interval: f64 = fields[1]
            .parse()
            .map_err(|_| parse_err(n, format!("bad interval `{}`", fields[1])))?;
        let flag = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(parse_err(n, format!("bad flag `{other}`"))),
        };
        rr.intervals_s.push(interval);
        rr.valid_mask.push(flag(fields[2])?);
        rr.repaired_mask.push(flag(fields[3])?);
    }
    if !rr.peak_times_s.is_empty() && !saw_tail {
        return Err(parse_err(0, "missing final peak row"));
    }
    Ok(rr)
}

pub fn write_trace_csv<W: Write>(traces: &[&SignalTrace], mut w: W) -> Result<(), SeriesIoError> {
    let Some(first) = traces.first() else {
        return Err(SeriesIoError::Incompatible);
    };
    if traces.iter().any(|t| {
        t.sample_rate_hz != first.sample_rate_hz
            || t.start_time_s != first.start_time_s
            || t.samples.len() != first.samples.len()
    }) {
        return Err(SeriesIoError::Incompatible);
    }
    writeln!(
        w,
        "# sample_rate_hz={} start_time_s={}",
        first.sample_rate_hz, first.start_time_s
    )?;
    let labels: Vec<&str> = traces.iter().map(|t| t.channel_label.as_str()).collect();
    writeln!(w, "{}", labels.join(","))?;
    let mut row = String::new();
    for i in 0..first.samples.len() {
        row.clear();
        for (k, t) in traces.iter().enumerate() {
            if k > 0 {
                row.push(',');
            }
            row.push_str(&t.samples[i].to_string());
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<SignalTrace>, SeriesIoError> {
    let mut lines = BufReader::new(r).lines();
    let meta = lines.next().transpose()?.ok_or_else(|| parse_err(1, "empty file"))?;
    let mut rate = None;
    let mut start = 0.0;
    for kv in meta.trim_start_matches('#').split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("bad metadata `{kv}`")))?;
        let v: f64 = v.parse().map_err(|_| parse_err(1, format!("bad number `{v}`")))?;
        match k {
            "sample_rate_hz" => rate = Some(v),
            "start_time_s" => start = v,
            _ => return Err(parse_err(1, format!("unknown key `{k}`"))),
        }
    }
    let rate = rate
        .filter(|r| *r > 0.0)
        .ok_or_else(|| parse_err(1, "missing or non-positive sample_rate_hz"))?;
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| parse_err(2, "missing header"))?;
    let mut traces: Vec<SignalTrace> = header
        .split(',')
        .map(|label| {
            let mut t = SignalTrace::new(label, rate, Vec::new());
            t.start_time_s = start;
            t
        })
        .collect();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let n = idx + 3;
        let mut count = 0;
        for (k, field) in line.split(',').enumerate() {
            let t = traces
                .get_mut(k)
                .ok_or_else(|| parse_err(n, "more fields than channels"))?;
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(n, format!("bad sample `{field}`")))?;
            t.samples.push(v);
            count += 1;
        }
        if count != traces.len() {
            return Err(parse_err(n, "fewer fields than channels"));
        }
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rr_round_trip() {
        let rr = RrSeries {
            peak_times_s: vec![0.0, 0.8, 1.7, 4.5],
            intervals_s: vec![0.8, 0.9, 2.8],
            valid_mask: vec![true, true, false],
            repaired_mask: vec![false, false, false],
        };
        let mut buf = Vec::new();
        write_rr_csv(&rr, &mut buf).unwrap();
        assert_eq!(read_rr_csv(&buf[..]).unwrap(), rr);
    }

    #[test]
    fn trace_round_trip() {
        let a = SignalTrace::new("THOR RES", 25.0, vec![0.1, -0.25, 1e-17]);
        let b = SignalTrace::new("ABDO RES", 25.0, vec![3.0, 2.0, 1.0]);
        let mut buf = Vec::new();
        write_trace_csv(&[&a, &b], &mut buf).unwrap();
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), vec![a, b]);
    }
}
