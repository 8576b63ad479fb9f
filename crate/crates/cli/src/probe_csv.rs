//! Probe time series as CSV: one row per step, three columns per receiver.

use std::fmt::Write as _;

use twr::fdtd::ProbeRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub offset: usize,
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "parse error at byte {} (line {}): {}", self.offset, self.line, self.message)
    }
}

pub fn header(n_probes: usize) -> String {
    let mut h = String::from("step,time_s");
    for k in 0..n_probes {
        let _ = write!(h, ",r{k}_ez,r{k}_hx,r{k}_hy");
    }
    h
}

/// `time_s` is the time at the end of the step, `(step + 1) * dt`.
pub fn encode(record: &ProbeRecord) -> String {
    let n = record.ez.len();
    let mut s = header(n);
    s.push('\n');
    for q in 0..record.n_steps() {
        let _ = write!(s, "{q},{:e}", (q + 1) as f64 * record.dt);
        for k in 0..n {
            let _ = write!(s, ",{:e},{:e},{:e}", record.ez[k][q], record.hx[k][q], record.hy[k][q]);
        }
        s.push('\n');
    }
    s
}

/// Parses text written by [`encode`]. Probe positions are not stored and come
/// back as `(0, 0)`.
pub fn decode(text: &str) -> Result<ProbeRecord, ParseError> {
    let mut offset = 0;
    let mut lines = text.split_inclusive('\n').enumerate();
    let err = |offset: usize, line: usize, message: String| ParseError { offset, line: line + 1, message };

    let (_, first) = lines.next().ok_or_else(|| err(0, 0, "empty file".into()))?;
    let head: Vec<&str> = first.trim_end_matches(['\n', '\r']).split(',').collect();
    if head.len() < 5 || (head.len() - 2) % 3 != 0 || head[0] != "step" || head[1] != "time_s" {
        return Err(err(0, 0, format!("unrecognised header '{}'", first.trim_end())));
    }
    let n = (head.len() - 2) / 3;
    if head != header(n).split(',').collect::<Vec<_>>() {
        return Err(err(0, 0, format!("unrecognised header '{}'", first.trim_end())));
    }
    offset += first.len();

    let series = || vec![Vec::new(); n];
    let mut rec = ProbeRecord { positions: vec![(0, 0); n], ez: series(), hx: series(), hy: series(), dt: 0.0 };
    let mut times = Vec::new();
    for (ln, raw) in lines {
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.is_empty() {
            offset += raw.len();
            continue;
        }
        let mut col = offset;
        let mut values = Vec::with_capacity(head.len());
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| err(col, ln, format!("expected a number, found '{field}'")))?;
            if !v.is_finite() {
                return Err(err(col, ln, format!("non-finite value '{field}'")));
            }
            values.push(v);
            col += field.len() + 1;
        }
        if values.len() != head.len() {
            return Err(err(offset, ln, format!("expected {} fields, found {}", head.len(), values.len())));
        }
        if values[0] != times.len() as f64 {
            return Err(err(offset, ln, format!("expected step {}, found {}", times.len(), values[0])));
        }
        times.push(values[1]);
        for k in 0..n {
            rec.ez[k].push(values[2 + 3 * k]);
            rec.hx[k].push(values[3 + 3 * k]);
            rec.hy[k].push(values[4 + 3 * k]);
        }
        offset += raw.len();
    }
    if times.is_empty() {
        return Err(err(offset, 1, "no data rows".into()));
    }
    rec.dt = times[0];
    Ok(rec)
}
