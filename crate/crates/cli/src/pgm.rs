//! Binary (P5) portable graymap snapshots of `E_z`.

use twr::fdtd::FieldState;

/// Encodes the field inside `[margin, n - margin)` on both axes. Rows run
/// from high y at the top to low y; mid-gray is zero and the scale is
/// symmetric about the largest magnitude in the frame.
pub fn encode_ez(f: &FieldState, margin: usize) -> Vec<u8> {
    let (i0, i1) = (margin.min(f.nx), f.nx.saturating_sub(margin).max(margin.min(f.nx)));
    let (j0, j1) = (margin.min(f.ny), f.ny.saturating_sub(margin).max(margin.min(f.ny)));
    let (w, h) = (i1 - i0, j1 - j0);
    let peak = (i0..i1)
        .flat_map(|i| (j0..j1).map(move |j| (i, j)))
        .map(|(i, j)| f.ez[f.idx(i, j)].abs())
        .fold(0.0, f64::max);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h);
    for j in (j0..j1).rev() {
        for i in i0..i1 {
            let v = if peak > 0.0 { f.ez[f.idx(i, j)] / peak } else { 0.0 };
            out.push((127.5 + 127.5 * v).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}
