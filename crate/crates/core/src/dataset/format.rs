//! `TWRD` container.
//!
//! ```text
//! "TWRD" | u32 version | u32 mode | u64 num_samples | u32 feature_len
//!        | u32 label_len | u64 meta_len | meta (UTF-8 "key = value" lines)
//!        | num_samples x (feature_len x f32, label_len x f32)
//!        | u64 CRC-64/XZ of every preceding byte
//! ```
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::io::{verify_trailer, write_atomic, ByteReader, ByteWriter, Truncated};
use crate::scene::{Interval, Mode, ParameterRanges, Rect};

use super::{Dataset, DatasetError, DatasetMeta, Normalizer, Result, Sample, SplitAssignment};

pub const MAGIC: &[u8; 4] = b"TWRD";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 4 + 4 + 8;

impl From<Truncated> for DatasetError {
    fn from(t: Truncated) -> Self {
        DatasetError::Truncated { offset: t.offset }
    }
}

pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    let meta = &ds.meta;
    if meta.scene_ids != ds.ids() {
        return Err(DatasetError::InvalidArgument(
            "metadata scene ids do not match the samples".into(),
        ));
    }
    let text = encode_meta(meta);
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(meta.mode.code());
    w.u64(ds.samples.len() as u64);
    w.u32(meta.feature_len as u32);
    w.u32(meta.label_len as u32);
    w.u64(text.len() as u64);
    w.bytes(text.as_bytes());
    for s in &ds.samples {
        if s.features.len() != meta.feature_len || s.labels.len() != meta.label_len {
            return Err(DatasetError::InvalidArgument(format!(
                "sample {} does not match the header widths",
                s.scene_id
            )));
        }
        s.features.iter().for_each(|&v| w.f32(v));
        s.labels.iter().for_each(|&v| w.f32(v));
    }
    Ok(w.finish_with_checksum())
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let bytes = encode_dataset(ds)?;
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&std::fs::read(path)?)
}

pub fn decode_dataset(data: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(data);
    if r.take(4)? != MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(DatasetError::VersionMismatch { found: version });
    }
    let mode_code = r.u32()?;
    let num_samples = r.u64()?;
    let feature_len = r.u32()? as usize;
    let label_len = r.u32()? as usize;
    let meta_len = r.u64()?;

    let mode = Mode::from_code(mode_code)
        .ok_or_else(|| DatasetError::Inconsistent(format!("unknown mode {mode_code}")))?;
    if mode.label_len() != label_len {
        return Err(DatasetError::Inconsistent(format!(
            "mode {mode_code} requires {} labels, header says {label_len}",
            mode.label_len()
        )));
    }
    let row = (feature_len as u128 + label_len as u128) * 4;
    let expected = HEADER_LEN as u128 + meta_len as u128 + num_samples as u128 * row + 8;
    if (data.len() as u128) < expected {
        return Err(DatasetError::Truncated { offset: data.len() });
    }
    if data.len() as u128 > expected {
        return Err(DatasetError::Inconsistent(format!(
            "{} bytes follow the checksum",
            data.len() as u128 - expected
        )));
    }
    if verify_trailer(data)?.is_none() {
        return Err(DatasetError::ChecksumMismatch);
    }

    let text = std::str::from_utf8(r.take(meta_len as usize)?)
        .map_err(|e| DatasetError::Inconsistent(format!("metadata is not UTF-8: {e}")))?;
    let meta = decode_meta(text, mode, feature_len, label_len)?;
    if meta.scene_ids.len() as u64 != num_samples {
        return Err(DatasetError::Inconsistent(format!(
            "metadata lists {} scene ids for {num_samples} samples",
            meta.scene_ids.len()
        )));
    }

    let mut samples = Vec::with_capacity(num_samples as usize);
    for &scene_id in &meta.scene_ids {
        let features = (0..feature_len).map(|_| r.f32()).collect::<std::result::Result<_, _>>()?;
        let labels = (0..label_len).map(|_| r.f32()).collect::<std::result::Result<_, _>>()?;
        samples.push(Sample { scene_id, features, labels });
    }
    Ok(Dataset { meta, samples })
}

fn encode_meta(meta: &DatasetMeta) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("format_version", FORMAT_VERSION.to_string());
    kv("mode", meta.mode.name().into());
    kv("feature_len", meta.feature_len.to_string());
    kv("label_len", meta.label_len.to_string());
    kv("num_samples", meta.scene_ids.len().to_string());
    kv("scene_ids", encode_ids(&meta.scene_ids));
    if let Some(seed) = meta.master_seed {
        kv("master_seed", seed.to_string());
    }
    let r = &meta.ranges;
    kv("ranges.wall_eps", floats(&[r.wall_eps.min, r.wall_eps.max]));
    kv("ranges.wall_thickness", floats(&[r.wall_thickness.min, r.wall_thickness.max]));
    kv("ranges.target_eps", floats(&[r.target_eps.min, r.target_eps.max]));
    let reg = r.target_region;
    kv("ranges.target_region", floats(&[reg.x0, reg.x1, reg.y0, reg.y1]));
    if let Some(split) = &meta.split {
        let (a, b, c) = split.counts();
        kv("split.counts", format!("{a},{b},{c}"));
        kv("split.train", encode_ids(&split.train));
        kv("split.val", encode_ids(&split.val));
        kv("split.test", encode_ids(&split.test));
    }
    kv("normalized", meta.normalization.is_some().to_string());
    if let Some(n) = &meta.normalization {
        kv("normalization.mean", floats(&n.mean));
        kv("normalization.std", floats(&n.std));
    }
    for (k, v) in &meta.settings {
        kv(&format!("gen.{k}"), v.clone());
    }
    s
}

fn floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

/// Compact id list: `0-9,11,14-20`.
fn encode_ids(ids: &[u64]) -> String {
    let mut parts = Vec::new();
    let mut k = 0;
    while k < ids.len() {
        let start = ids[k];
        let mut end = start;
        while k + 1 < ids.len() && ids[k + 1] == end.wrapping_add(1) {
            k += 1;
            end = ids[k];
        }
        parts.push(if start == end { start.to_string() } else { format!("{start}-{end}") });
        k += 1;
    }
    parts.join(",")
}

fn decode_ids(s: &str) -> Option<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.parse().ok()?, b.parse().ok()?);
                if b < a {
                    return None;
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().ok()?),
        }
    }
    Some(out)
}

fn decode_floats(s: &str) -> Option<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().ok())
        .collect()
}

fn decode_meta(text: &str, mode: Mode, feature_len: usize, label_len: usize) -> Result<DatasetMeta> {
    let bad = |msg: String| DatasetError::Inconsistent(msg);
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once(" = ")
            .ok_or_else(|| bad(format!("metadata line {} is not 'key = value'", n + 1)))?;
        map.insert(k.trim().to_string(), v.to_string());
    }
    let get = |k: &str| map.get(k).ok_or_else(|| bad(format!("metadata key '{k}' missing")));
    let ids = |k: &str| -> Result<Vec<u64>> {
        decode_ids(get(k)?).ok_or_else(|| bad(format!("metadata key '{k}' is malformed")))
    };
    let nums = |k: &str, n: Option<usize>| -> Result<Vec<f64>> {
        let v = decode_floats(get(k)?).ok_or_else(|| bad(format!("metadata key '{k}' is malformed")))?;
        match n {
            Some(n) if v.len() != n => Err(bad(format!("metadata key '{k}' needs {n} values"))),
            _ => Ok(v),
        }
    };
    let interval = |k: &str| -> Result<Interval> {
        let v = nums(k, Some(2))?;
        Ok(Interval::new(v[0], v[1]))
    };

    if get("mode")? != mode.name() {
        return Err(bad(format!("metadata mode '{}' disagrees with the header", get("mode")?)));
    }
    for (k, want) in [("feature_len", feature_len), ("label_len", label_len)] {
        if get(k)?.parse::<usize>().ok() != Some(want) {
            return Err(bad(format!("metadata {k} disagrees with the header")));
        }
    }
    let reg = nums("ranges.target_region", Some(4))?;
    let ranges = ParameterRanges {
        wall_eps: interval("ranges.wall_eps")?,
        wall_thickness: interval("ranges.wall_thickness")?,
        target_eps: interval("ranges.target_eps")?,
        target_region: Rect { x0: reg[0], x1: reg[1], y0: reg[2], y1: reg[3] },
    };
    let scene_ids = ids("scene_ids")?;
    let master_seed = match map.get("master_seed") {
        Some(v) => Some(v.parse().map_err(|_| bad("master_seed is malformed".into()))?),
        None => None,
    };
    let split = if map.contains_key("split.train") {
        let s = SplitAssignment { train: ids("split.train")?, val: ids("split.val")?, test: ids("split.test")? };
        let mut all: Vec<u64> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        let mut expected = scene_ids.clone();
        expected.sort_unstable();
        if all != expected {
            return Err(bad("split assignment does not partition the scene ids".into()));
        }
        Some(s)
    } else {
        None
    };
    let normalized = get("normalized")? == "true";
    let normalization = if normalized {
        let n = Normalizer {
            mean: nums("normalization.mean", Some(feature_len))?,
            std: nums("normalization.std", Some(feature_len))?,
        };
        Some(n)
    } else {
        None
    };
    let settings = map
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("gen.").map(|k| (k.to_string(), v.clone())))
        .collect();
    Ok(DatasetMeta {
        mode,
        feature_len,
        label_len,
        scene_ids,
        master_seed,
        ranges,
        settings,
        normalization,
        split,
    })
}
