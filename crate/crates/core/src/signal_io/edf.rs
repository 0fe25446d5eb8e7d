//! Minimal reader/writer for plain EDF (no EDF+ annotation records).
//!
//! Layout: a 256-byte fixed header, 256 bytes of per-signal header fields
//! (each field stored for all signals before the next field), then data
//! records holding `samples_per_record` little-endian `i16` values per signal.

use thiserror::Error;

use super::SignalTrace;

const FIXED_HEADER_LEN: usize = 256;
const SIGNAL_HEADER_LEN: usize = 256;

/// Per-signal field widths, in file order.
const SIGNAL_FIELDS: [usize; 10] = [16, 80, 8, 8, 8, 8, 8, 80, 8, 32];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EdfError {
    #[error("malformed EDF header: {0}")]
    MalformedHeader(String),
    #[error("unsupported EDF variant: {0}")]
    UnsupportedVariant(String),
    #[error("truncated EDF data: data records need {expected} bytes, file holds {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("cannot encode trace as EDF: {0}")]
    Unencodable(String),
}

#[derive(Debug, Clone)]
struct SignalHeader {
    label: String,
    physical_min: f64,
    physical_max: f64,
    digital_min: i32,
    digital_max: i32,
    samples_per_record: usize,
}

fn ascii_field(bytes: &[u8], what: &str) -> Result<String, EdfError> {
    if !bytes.iter().all(|b| (0x20..=0x7e).contains(b)) {
        return Err(EdfError::MalformedHeader(format!("{what}: non-printable ASCII")));
    }
    // Checked above, so this cannot fail.
    Ok(String::from_utf8_lossy(bytes).trim().to_string())
}

fn number_field(bytes: &[u8], what: &str) -> Result<f64, EdfError> {
    let text = ascii_field(bytes, what)?;
    let value: f64 = text
        .parse()
        .map_err(|_| EdfError::MalformedHeader(format!("{what}: `{text}` is not a number")))?;
    if !value.is_finite() {
        return Err(EdfError::MalformedHeader(format!("{what}: `{text}` is not finite")));
    }
    Ok(value)
}

fn integer_field(bytes: &[u8], what: &str) -> Result<i64, EdfError> {
    let text = ascii_field(bytes, what)?;
    text.parse()
        .map_err(|_| EdfError::MalformedHeader(format!("{what}: `{text}` is not an integer")))
}

/// Parse a plain EDF file into one trace per signal, scaled to physical units.
pub fn read_edf(bytes: &[u8]) -> Result<Vec<SignalTrace>, EdfError> {
    if bytes.len() < FIXED_HEADER_LEN {
        return Err(EdfError::MalformedHeader(format!(
            "file is {} bytes, shorter than the {FIXED_HEADER_LEN}-byte fixed header",
            bytes.len()
        )));
    }
    let version = ascii_field(&bytes[0..8], "version")?;
    if version != "0" {
        return Err(EdfError::UnsupportedVariant(format!("version field `{version}`")));
    }
    let reserved = ascii_field(&bytes[192..236], "reserved")?;
    if reserved.starts_with("EDF+") {
        return Err(EdfError::UnsupportedVariant(format!("`{reserved}` files")));
    }
    let header_bytes = integer_field(&bytes[184..192], "header byte count")?;
    let n_records = integer_field(&bytes[236..244], "number of data records")?;
    let record_duration = number_field(&bytes[244..252], "data record duration")?;
    let n_signals = integer_field(&bytes[252..256], "number of signals")?;

    if n_signals <= 0 {
        return Err(EdfError::MalformedHeader(format!("{n_signals} signals")));
    }
    let n_signals = n_signals as usize;
    let expected_header = SIGNAL_HEADER_LEN
        .checked_mul(n_signals)
        .and_then(|v| v.checked_add(FIXED_HEADER_LEN))
        .ok_or_else(|| EdfError::MalformedHeader("signal count overflows".into()))?;
    if header_bytes < 0 || header_bytes as usize != expected_header {
        return Err(EdfError::MalformedHeader(format!(
            "header byte count {header_bytes} inconsistent with {n_signals} signals (expected {expected_header})"
        )));
    }
    if bytes.len() < expected_header {
        return Err(EdfError::MalformedHeader(format!(
            "file ends inside the signal header ({} of {expected_header} bytes)",
            bytes.len()
        )));
    }
    if record_duration <= 0.0 {
        return Err(EdfError::MalformedHeader(format!(
            "record duration {record_duration} must be positive"
        )));
    }

    let signals = parse_signal_headers(&bytes[FIXED_HEADER_LEN..expected_header], n_signals)?;

    let mut rates = Vec::with_capacity(n_signals);
    for s in &signals {
        let rate = s.samples_per_record as f64 / record_duration;
        if record_duration.fract() != 0.0 && (rate - rate.round()).abs() > 1e-9 {
            return Err(EdfError::UnsupportedVariant(format!(
                "signal `{}`: fractional rate {rate} Hz with non-integer record duration {record_duration} s",
                s.label
            )));
        }
        rates.push(rate);
    }

    let samples_per_record: usize = signals.iter().map(|s| s.samples_per_record).sum();
    let record_bytes = samples_per_record
        .checked_mul(2)
        .ok_or_else(|| EdfError::MalformedHeader("record size overflows".into()))?;
    let data = &bytes[expected_header..];
    let n_records = match n_records {
        -1 => {
            if !data.len().is_multiple_of(record_bytes) {
                return Err(EdfError::TruncatedData {
                    expected: (data.len() / record_bytes + 1) * record_bytes,
                    found: data.len(),
                });
            }
            data.len() / record_bytes
        }
        n if n < 0 => {
            return Err(EdfError::MalformedHeader(format!("{n} data records")));
        }
        n => n as usize,
    };
    let data_len = n_records
        .checked_mul(record_bytes)
        .ok_or_else(|| EdfError::MalformedHeader("data size overflows".into()))?;
    if data.len() < data_len {
        return Err(EdfError::TruncatedData {
            expected: data_len,
            found: data.len(),
        });
    }

    let mut out: Vec<Vec<f64>> = signals
        .iter()
        .map(|s| Vec::with_capacity(s.samples_per_record * n_records))
        .collect();
    let gains: Vec<(f64, f64)> = signals
        .iter()
        .map(|s| {
            let gain = (s.physical_max - s.physical_min) / f64::from(s.digital_max - s.digital_min);
            (gain, s.physical_min - gain * f64::from(s.digital_min))
        })
        .collect();
    let mut offset = 0;
    for _ in 0..n_records {
        for (k, s) in signals.iter().enumerate() {
            let (gain, intercept) = gains[k];
            let chunk = &data[offset..offset + 2 * s.samples_per_record];
            out[k].extend(chunk.chunks_exact(2).map(|pair| {
                let digital = i16::from_le_bytes([pair[0], pair[1]]);
                if i32::from(digital) == s.digital_min {
                    s.physical_min
                } else {
                    gain * f64::from(digital) + intercept
                }
            }));
            offset += 2 * s.samples_per_record;
        }
    }

    Ok(signals
        .into_iter()
        .zip(rates)
        .zip(out)
        .map(|((s, rate), samples)| SignalTrace::new(s.label, rate, samples))
        .collect())
}

fn parse_signal_headers(block: &[u8], n: usize) -> Result<Vec<SignalHeader>, EdfError> {
    let mut fields: Vec<Vec<&[u8]>> = Vec::with_capacity(SIGNAL_FIELDS.len());
    let mut pos = 0;
    for width in SIGNAL_FIELDS {
        let column = (0..n).map(|k| &block[pos + k * width..pos + (k + 1) * width]).collect();
        fields.push(column);
        pos += width * n;
    }
    (0..n)
        .map(|k| {
            let label = ascii_field(fields[0][k], "signal label")?;
            let physical_min = number_field(fields[3][k], "physical minimum")?;
            let physical_max = number_field(fields[4][k], "physical maximum")?;
            let digital_min = integer_field(fields[5][k], "digital minimum")?;
            let digital_max = integer_field(fields[6][k], "digital maximum")?;
            let spr = integer_field(fields[8][k], "samples per record")?;
            let digital_range = i64::from(i16::MIN)..=i64::from(i16::MAX);
            if !digital_range.contains(&digital_min) || !digital_range.contains(&digital_max) {
                return Err(EdfError::MalformedHeader(format!(
                    "signal `{label}`: digital range {digital_min}..{digital_max} exceeds 16 bits"
                )));
            }
            if digital_max <= digital_min {
                return Err(EdfError::MalformedHeader(format!(
                    "signal `{label}`: digital maximum {digital_max} not above minimum {digital_min}"
                )));
            }
            if physical_max == physical_min {
                return Err(EdfError::MalformedHeader(format!(
                    "signal `{label}`: empty physical range"
                )));
            }
            if spr <= 0 {
                return Err(EdfError::MalformedHeader(format!(
                    "signal `{label}`: {spr} samples per record"
                )));
            }
            Ok(SignalHeader {
                label,
                physical_min,
                physical_max,
                digital_min: digital_min as i32,
                digital_max: digital_max as i32,
                samples_per_record: spr as usize,
            })
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Rounding {
    Down,
    Up,
    Nearest,
}

/// Render `value` into at most `width` characters, rounding in the requested
/// direction so that physical ranges only ever widen.
fn format_number(value: f64, width: usize, rounding: Rounding) -> Result<String, EdfError> {
    for decimals in (0..width).rev() {
        let scale = 10f64.powi(decimals as i32);
        let scaled = value * scale;
        let rounded = match rounding {
            Rounding::Down => scaled.floor(),
            Rounding::Up => scaled.ceil(),
            Rounding::Nearest => scaled.round(),
        } / scale;
        let mut text = format!("{rounded:.decimals$}");
        if text.contains('.') {
            text = text.trim_end_matches('0').trim_end_matches('.').to_string();
        }
        if text == "-0" {
            text = "0".into();
        }
        if text.len() <= width {
            return Ok(text);
        }
    }
    Err(EdfError::Unencodable(format!(
        "{value} does not fit a {width}-character field"
    )))
}

fn push_field(buf: &mut Vec<u8>, text: &str, width: usize) {
    let mut bytes: Vec<u8> = text.bytes().take(width).collect();
    bytes.resize(width, b' ');
    buf.extend_from_slice(&bytes);
}

/// Encode traces as a plain EDF file with `record_duration_s`-second records.
///
/// Every trace must hold a whole number of records at its own rate. Physical
/// ranges are taken from the data (widened outward to fit the 8-character
/// fields) and samples are quantized to the full 16-bit digital range.
pub fn write_edf(traces: &[SignalTrace], record_duration_s: f64) -> Result<Vec<u8>, EdfError> {
    if traces.is_empty() {
        return Err(EdfError::Unencodable("no traces".into()));
    }
    if !(record_duration_s > 0.0) {
        return Err(EdfError::Unencodable(format!("record duration {record_duration_s}")));
    }
    let mut spr = Vec::with_capacity(traces.len());
    let mut n_records = None;
    for t in traces {
        let per_record = t.sample_rate_hz * record_duration_s;
        if (per_record - per_record.round()).abs() > 1e-9 || per_record < 1.0 {
            return Err(EdfError::Unencodable(format!(
                "`{}`: {} Hz does not give whole samples per {record_duration_s} s record",
                t.channel_label, t.sample_rate_hz
            )));
        }
        let per_record = per_record.round() as usize;
        if t.samples.len() % per_record != 0 {
            return Err(EdfError::Unencodable(format!(
                "`{}`: {} samples is not a whole number of records",
                t.channel_label,
                t.samples.len()
            )));
        }
        let records = t.samples.len() / per_record;
        match n_records {
            None => n_records = Some(records),
            Some(n) if n != records => {
                return Err(EdfError::Unencodable(format!(
                    "`{}` spans {records} records, other channels {n}",
                    t.channel_label
                )))
            }
            _ => {}
        }
        spr.push(per_record);
    }
    let n_records = n_records.unwrap_or(0);
    let ns = traces.len();

    let (digital_min, digital_max) = (i32::from(i16::MIN), i32::from(i16::MAX));
    let mut ranges = Vec::with_capacity(ns);
    for t in traces {
        if let Some(bad) = t.samples.iter().find(|v| !v.is_finite()) {
            return Err(EdfError::Unencodable(format!(
                "`{}` holds non-finite sample {bad}",
                t.channel_label
            )));
        }
        let lo = t.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if t.samples.is_empty() {
            (-1.0, 1.0)
        } else if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo, hi)
        };
        let lo_text = format_number(lo, 8, Rounding::Down)?;
        let hi_text = format_number(hi, 8, Rounding::Up)?;
        // Quantize against the values a reader will see.
        let lo_val: f64 = lo_text.parse().expect("formatted number parses");
        let hi_val: f64 = hi_text.parse().expect("formatted number parses");
        ranges.push((lo_text, hi_text, lo_val, hi_val));
    }

    let header_len = FIXED_HEADER_LEN + SIGNAL_HEADER_LEN * ns;
    let mut buf = Vec::with_capacity(header_len + n_records * spr.iter().sum::<usize>() * 2);
    push_field(&mut buf, "0", 8);
    push_field(&mut buf, "X X X X", 80);
    push_field(&mut buf, "Startdate X X X X", 80);
    push_field(&mut buf, "01.01.00", 8);
    push_field(&mut buf, "00.00.00", 8);
    push_field(&mut buf, &header_len.to_string(), 8);
    push_field(&mut buf, "", 44);
    push_field(&mut buf, &n_records.to_string(), 8);
    push_field(&mut buf, &format_number(record_duration_s, 8, Rounding::Nearest)?, 8);
    push_field(&mut buf, &ns.to_string(), 4);

    for t in traces {
        push_field(&mut buf, &t.channel_label, 16);
    }
    for _ in traces {
        push_field(&mut buf, "", 80);
    }
    for _ in traces {
        push_field(&mut buf, "", 8);
    }
    for r in &ranges {
        push_field(&mut buf, &r.0, 8);
    }
    for r in &ranges {
        push_field(&mut buf, &r.1, 8);
    }
    for _ in traces {
        push_field(&mut buf, &digital_min.to_string(), 8);
    }
    for _ in traces {
        push_field(&mut buf, &digital_max.to_string(), 8);
    }
    for _ in traces {
        push_field(&mut buf, "", 80);
    }
    for s in &spr {
        push_field(&mut buf, &s.to_string(), 8);
    }
    for _ in traces {
        push_field(&mut buf, "", 32);
    }
    debug_assert_eq!(buf.len(), header_len);

    let quantizers: Vec<(f64, f64)> = ranges
        .iter()
        .map(|&(_, _, lo, hi)| {
            let steps = f64::from(digital_max - digital_min);
            (steps / (hi - lo), lo)
        })
        .collect();
    for rec in 0..n_records {
        for (k, t) in traces.iter().enumerate() {
            let (scale, lo) = quantizers[k];
            let chunk = &t.samples[rec * spr[k]..(rec + 1) * spr[k]];
            for &v in chunk {
                let d = ((v - lo) * scale + f64::from(digital_min)).round();
                let d = d.clamp(f64::from(digital_min), f64::from(digital_max)) as i16;
                buf.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    Ok(buf)
}
