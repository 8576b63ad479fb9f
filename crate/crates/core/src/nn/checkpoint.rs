//! `TWRM` checkpoints.
//!
//! ```text
//! "TWRM" | u32 version | u32 mode | u32 layer_count
//!        | layer_count x (u32 in, u32 out, f32 dropout, u8 activation)
//!        | per layer: out*in f64 weights, out f64 biases
//!        | u32 stats_len | stats_len f64 means | stats_len f64 stds
//!        | u64 CRC-64/XZ of every preceding byte
//! ```

use std::path::Path;

use crate::dataset::Normalizer;
use crate::io::{verify_trailer, write_atomic, ByteReader, ByteWriter, Truncated};
use crate::scene::Mode;

use super::{Activation, DenseLayer, Network, NnError, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"TWRM";
pub const MODEL_VERSION: u32 = 1;

impl From<Truncated> for NnError {
    fn from(t: Truncated) -> Self {
        NnError::Truncated { offset: t.offset }
    }
}

fn mode_of(net: &Network) -> Result<Mode> {
    Mode::from_label_len(net.output_len())
        .ok_or_else(|| NnError::InvalidArgument(format!("no mode has {} outputs", net.output_len())))
}

pub fn encode_model(net: &Network, stats: &Normalizer) -> Result<Vec<u8>> {
    net.validate()?;
    if stats.len() != net.input_len() || stats.std.len() != stats.mean.len() {
        return Err(NnError::InvalidArgument(format!(
            "normalization covers {} features, network takes {}",
            stats.len(),
            net.input_len()
        )));
    }
    let mut w = ByteWriter::new();
    w.bytes(MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    w.u32(mode_of(net)?.code());
    w.u32(net.layers.len() as u32);
    for (k, l) in net.layers.iter().enumerate() {
        w.u32(l.n_in as u32);
        w.u32(l.n_out as u32);
        w.f32(net.dropout_rates[k] as f32);
        w.u8(net.activations[k].code());
    }
    for l in &net.layers {
        l.weights.iter().for_each(|&v| w.f64(v));
        l.biases.iter().for_each(|&v| w.f64(v));
    }
    w.u32(stats.len() as u32);
    stats.mean.iter().for_each(|&v| w.f64(v));
    stats.std.iter().for_each(|&v| w.f64(v));
    Ok(w.finish_with_checksum())
}

pub fn save_model(net: &Network, stats: &Normalizer, path: &Path) -> Result<()> {
    let bytes = encode_model(net, stats)?;
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(Network, Normalizer)> {
    decode_model(&std::fs::read(path)?)
}

pub fn decode_model(data: &[u8]) -> Result<(Network, Normalizer)> {
    let mut r = ByteReader::new(data);
    if r.take(4)? != MODEL_MAGIC {
        return Err(NnError::BadMagic);
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(NnError::VersionMismatch { found: version });
    }
    let mode_code = r.u32()?;
    let mode = Mode::from_code(mode_code)
        .ok_or_else(|| NnError::Inconsistent(format!("unknown mode {mode_code}")))?;
    let n_layers = r.u32()? as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(NnError::Inconsistent(format!("implausible layer count {n_layers}")));
    }
    let mut shapes = Vec::with_capacity(n_layers);
    let mut params: u128 = 0;
    for k in 0..n_layers {
        let n_in = r.u32()? as usize;
        let n_out = r.u32()? as usize;
        let rate = r.f32()? as f64;
        let code = r.u8()?;
        let act = Activation::from_code(code)
            .ok_or_else(|| NnError::Inconsistent(format!("layer {k} has unknown activation {code}")))?;
        if let Some(&(_, prev_out, _, _)) = shapes.last() {
            if prev_out != n_in {
                return Err(NnError::Inconsistent(format!(
                    "layer {k} takes {n_in} inputs but the previous layer produces {prev_out}"
                )));
            }
        }
        params += n_in as u128 * n_out as u128 + n_out as u128;
        shapes.push((n_in, n_out, rate, act));
    }
    let head = shapes[n_layers - 1].1;
    if head != mode.label_len() {
        return Err(NnError::Inconsistent(format!(
            "mode {} needs {} outputs, last layer has {head}",
            mode.name(),
            mode.label_len()
        )));
    }
    let n_features = shapes[0].0 as u128;
    let expected = r.position() as u128 + params * 8 + 4 + 16 * n_features + 8;
    if (data.len() as u128) < expected {
        return Err(NnError::Truncated { offset: data.len() });
    }
    if data.len() as u128 > expected {
        return Err(NnError::Inconsistent(format!(
            "{} bytes follow the checksum",
            data.len() as u128 - expected
        )));
    }
    if verify_trailer(data)?.is_none() {
        return Err(NnError::ChecksumMismatch);
    }

    let mut layers = Vec::with_capacity(n_layers);
    for &(n_in, n_out, _, _) in &shapes {
        let mut l = DenseLayer::zeros(n_in, n_out);
        for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
            *v = r.f64()?;
        }
        layers.push(l);
    }
    let stats_len = r.u32()? as usize;
    if stats_len as u128 != n_features {
        return Err(NnError::Inconsistent(format!(
            "normalization covers {stats_len} features, network takes {n_features}"
        )));
    }
    let mean = (0..stats_len).map(|_| r.f64()).collect::<std::result::Result<_, _>>()?;
    let std = (0..stats_len).map(|_| r.f64()).collect::<std::result::Result<_, _>>()?;
    let net = Network {
        layers,
        activations: shapes.iter().map(|s| s.3).collect(),
        dropout_rates: shapes.iter().map(|s| s.2).collect(),
    };
    net.validate().map_err(|e| NnError::Inconsistent(e.to_string()))?;
    Ok((net, Normalizer { mean, std }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_network, predict, Matrix};
    use crate::par::Executor;

    fn model() -> (Network, Normalizer) {
        let net = init_network(&[6, 7, 4, 8], &[0.2, 0.1, 0.0], 3).unwrap();
        let stats = Normalizer { mean: vec![0.5; 6], std: vec![2.0; 6] };
        (net, stats)
    }

    #[test]
    fn round_trip() {
        let (net, stats) = model();
        let bytes = encode_model(&net, &stats).unwrap();
        let (back, st) = decode_model(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(st, stats);
        let x = Matrix::from_rows(&[vec![0.1, 0.2, -0.3, 4.0, 0.0, 1.0]]);
        let e = Executor::sequential();
        assert_eq!(predict(&net, &x, &e).unwrap(), predict(&back, &x, &e).unwrap());
        assert_eq!(encode_model(&back, &st).unwrap(), bytes);
    }

    #[test]
    fn distinct_errors() {
        let (net, stats) = model();
        let bytes = encode_model(&net, &stats).unwrap();

        let mut b = bytes.clone();
        b[0] = b'X';
        assert!(matches!(decode_model(&b), Err(NnError::BadMagic)));

        let mut b = bytes.clone();
        b[4] = 9;
        assert!(matches!(decode_model(&b), Err(NnError::VersionMismatch { found: 9 })));

        assert!(matches!(decode_model(&bytes[..bytes.len() - 1]), Err(NnError::Truncated { .. })));

        let mut b = bytes.clone();
        let n = b.len();
        b[n - 20] ^= 1;
        assert!(matches!(decode_model(&b), Err(NnError::ChecksumMismatch)));

        // second layer "in" field: header is 16 bytes, each layer record 13
        let mut b = bytes.clone();
        b[16 + 13] = 5;
        assert!(matches!(decode_model(&b), Err(NnError::Inconsistent(_))));
    }

    #[test]
    fn stats_must_match_input() {
        let (net, _) = model();
        let bad = Normalizer { mean: vec![0.0; 5], std: vec![1.0; 5] };
        assert!(encode_model(&net, &bad).is_err());
    }
}
