use std::fmt::Write as _;
use std::path::Path;

use super::net::SiameseModel;
use super::NetConfig;
use crate::{MraiError, Result};

const MAGIC: &str = "MRAI-MODEL v1";

fn corrupt(msg: impl Into<String>) -> MraiError {
    MraiError::CorruptModel(msg.into())
}

/// Text manifest (configuration and layer shapes) followed by the
/// parameters as little-endian f64.
pub fn encode_model(model: &SiameseModel) -> Vec<u8> {
    let c = &model.config;
    let mut head = String::new();
    let _ = writeln!(head, "{MAGIC}");
    let _ = writeln!(head, "conv_kernels {}", c.conv_kernels);
    let _ = writeln!(head, "dense1 {}", c.dense1);
    let _ = writeln!(head, "dense2 {}", c.dense2);
    let _ = writeln!(head, "embed_dim {}", c.embed_dim);
    let _ = writeln!(head, "dropout_rate {}", c.dropout_rate);
    let _ = writeln!(head, "l2_lambda {}", c.l2_lambda);
    let _ = writeln!(head, "margin {}", c.margin);
    let _ = writeln!(head, "norm_p {}", c.norm_p);
    match c.vector_input {
        Some(d) => {
            let _ = writeln!(head, "vector_input {d}");
        }
        None => {
            let _ = writeln!(head, "vector_input none");
        }
    }
    for (name, range, rows, cols) in model.layout().blocks(c) {
        let _ = writeln!(head, "layer {name} {rows}x{cols} {}", range.len());
    }
    let _ = writeln!(head, "params {}", model.param_count());
    let _ = writeln!(head, "END");
    let mut out = head.into_bytes();
    for p in &model.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<SiameseModel> {
    let end = b"\nEND\n";
    let split = bytes
        .windows(end.len())
        .position(|w| w == end)
        .ok_or_else(|| corrupt("manifest has no END line"))?;
    let head = std::str::from_utf8(&bytes[..split]).map_err(|_| corrupt("manifest is not UTF-8"))?;
    let body = &bytes[split + end.len()..];
    let mut lines = head.lines();
    if lines.next() != Some(MAGIC) {
        return Err(corrupt("not a model file"));
    }
    let mut config = NetConfig::default();
    let mut layers = Vec::new();
    let mut declared = None;
    for line in lines {
        let (key, value) = line.split_once(' ').ok_or_else(|| corrupt(format!("bad line {line:?}")))?;
        let num = |v: &str| v.parse::<usize>().map_err(|_| corrupt(format!("bad value in {line:?}")));
        let real = |v: &str| v.parse::<f64>().map_err(|_| corrupt(format!("bad value in {line:?}")));
        match key {
            "conv_kernels" => config.conv_kernels = num(value)?,
            "dense1" => config.dense1 = num(value)?,
            "dense2" => config.dense2 = num(value)?,
            "embed_dim" => config.embed_dim = num(value)?,
            "dropout_rate" => config.dropout_rate = real(value)?,
            "l2_lambda" => config.l2_lambda = real(value)?,
            "margin" => config.margin = real(value)?,
            "norm_p" => config.norm_p = num(value)? as u32,
            "vector_input" => config.vector_input = if value == "none" { None } else { Some(num(value)?) },
            "layer" => layers.push(value.to_string()),
            "params" => declared = Some(num(value)?),
            _ => return Err(corrupt(format!("unknown key {key:?}"))),
        }
    }
    config.validate().map_err(|e| corrupt(e.to_string()))?;
    let template = SiameseModel::zeros(config)?;
    let expected: Vec<String> = template
        .layout()
        .blocks(&template.config)
        .into_iter()
        .map(|(name, range, rows, cols)| format!("{name} {rows}x{cols} {}", range.len()))
        .collect();
    if layers != expected {
        return Err(corrupt("layer shapes do not match the configuration"));
    }
    let n = template.param_count();
    if declared != Some(n) {
        return Err(corrupt(format!("manifest declares {declared:?} parameters, configuration needs {n}")));
    }
    if body.len() != n * 8 {
        return Err(corrupt(format!("{} parameter bytes, expected {}", body.len(), n * 8)));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    SiameseModel::from_params(template.config, params)
}

pub fn save_model(model: &SiameseModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SiameseModel> {
    decode_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let model = SiameseModel::init(NetConfig::default(), 7).unwrap();
        let bytes = encode_model(&model);
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back, model);
        let input: Vec<f64> = (0..226).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        assert_eq!(model.embed(&input).unwrap(), back.embed(&input).unwrap());
    }

    #[test]
    fn corrupt_files_rejected() {
        let model = SiameseModel::init(NetConfig::default(), 7).unwrap();
        let bytes = encode_model(&model);
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("params 4874\n"));
        assert!(matches!(decode_model(&bytes[..bytes.len() - 3]), Err(MraiError::CorruptModel(_))));
        assert!(matches!(decode_model(&bytes[..bytes.len() - 8]), Err(MraiError::CorruptModel(_))));
        let head_end = bytes.windows(5).position(|w| w == b"\nEND\n").unwrap();
        let mut short = String::from_utf8(bytes[..head_end].to_vec()).unwrap().replace("params 4874", "params 4873");
        short.push_str("\nEND\n");
        let mut tampered = short.into_bytes();
        tampered.extend_from_slice(&bytes[head_end + 5..head_end + 5 + 4873 * 8]);
        assert!(matches!(decode_model(&tampered), Err(MraiError::CorruptModel(_))));
        assert!(matches!(decode_model(b"hello"), Err(MraiError::CorruptModel(_))));
    }
}
