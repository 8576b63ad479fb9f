use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::io::write_atomic;

use super::{Result, TrainError, TrainHistory};

pub const CURVE_HEADER: &str = "epoch,train_loss,val_loss,val_accuracy,seconds";

/// Writes `<stem>.csv` and `<stem>.svg`; returns both paths.
pub fn emit_curves(history: &TrainHistory, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    if history.is_empty() {
        return Err(TrainError::InvalidArgument("no epochs to plot".into()));
    }
    let mut csv = String::new();
    csv.push_str(CURVE_HEADER);
    csv.push('\n');
    for k in 0..history.len() {
        let _ = writeln!(
            csv,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            k + 1,
            history.train_loss[k],
            history.val_loss[k],
            history.val_accuracy[k],
            history.seconds[k]
        );
    }
    let with = |ext: &str| {
        let mut s = stem.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    let csv_path = with(".csv");
    let svg_path = with(".svg");
    write_atomic(&csv_path, csv.as_bytes())?;
    write_atomic(&svg_path, render_svg(history).as_bytes())?;
    Ok((csv_path, svg_path))
}

/// Parses a curve CSV written by [`emit_curves`].
pub fn read_curves(path: &Path) -> Result<TrainHistory> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(TrainError::InvalidArgument(format!("{} is not a curve file", path.display())));
    }
    let mut h = TrainHistory::default();
    for (n, line) in lines.enumerate() {
        let f: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| TrainError::InvalidArgument(format!("line {}: {e}", n + 2)))?;
        if f.len() != 5 {
            return Err(TrainError::InvalidArgument(format!("line {}: expected 5 columns", n + 2)));
        }
        h.train_loss.push(f[1]);
        h.val_loss.push(f[2]);
        h.val_accuracy.push(f[3]);
        h.seconds.push(f[4]);
    }
    Ok(h)
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Standalone SVG chart of training and validation loss per epoch. The
/// loss axis is logarithmic when every value is positive.
pub fn render_svg(history: &TrainHistory) -> String {
    let n = history.len();
    let all = history.train_loss.iter().chain(&history.val_loss).copied().filter(|v| v.is_finite());
    let log = all.clone().all(|v| v > 0.0);
    let tf = |v: f64| if log { v.log10() } else { v };
    let (mut lo, mut hi) = all.map(tf).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let px = |k: usize| LEFT + (W - LEFT - RIGHT) * if n > 1 { k as f64 / (n - 1) as f64 } else { 0.5 };
    let py = |v: f64| TOP + (H - TOP - BOTTOM) * (1.0 - (tf(v) - lo) / (hi - lo));
    let points = |series: &[f64]| {
        series
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(k, &v)| format!("{:.2},{:.2}", px(k), py(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT},{TOP} V{} H{}" fill="none" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = TOP + (H - TOP - BOTTOM) * (1.0 - k as f64 / 4.0);
        let label = if log { format!("{:.1e}", 10f64.powf(v)) } else { format!("{v:.3}") };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y:.2}" font-size="11" text-anchor="end" dominant-baseline="middle">{label}</text>"#,
            LEFT - 6.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">epoch (1 to {n})</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-size="14" text-anchor="middle">MSLE loss{}</text>"#,
        W / 2.0,
        if log { " (log scale)" } else { "" }
    );
    let _ = writeln!(
        s,
        r##"<polyline id="train" points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
        points(&history.train_loss)
    );
    let _ = writeln!(
        s,
        r##"<polyline id="validation" points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##,
        points(&history.val_loss)
    );
    let _ = writeln!(s, r##"<text x="{}" y="{}" font-size="12" fill="#1f77b4">train</text>"##, W - 120.0, TOP + 14.0);
    let _ = writeln!(s, r##"<text x="{}" y="{}" font-size="12" fill="#d62728">validation</text>"##, W - 120.0, TOP + 30.0);
    s.push_str("</svg>\n");
    s
}
