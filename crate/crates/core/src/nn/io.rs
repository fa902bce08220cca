//! Weight persistence.
//!
//! Single self-describing text file holding layer dims, activation tags,
//! row-major weights, biases, and the normalization record. The layout is
//! documented in `docs/weights-format.md`. Floats are written with Rust's
//! shortest round-trip formatting, so save -> load is bit-exact for finite
//! values (non-finite parameters are rejected at construction).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Activation, ChannelNorm, Layer, NnParams};

const MAGIC: &str = "feedgas-nn";
const FORMAT_VERSION: u32 = 1;

/// Serializes a network to the versioned text format.
pub fn params_to_string(params: &NnParams) -> String {
    let mut s = String::new();
    writeln!(s, "{MAGIC} v{FORMAT_VERSION}").unwrap();
    writeln!(s, "layers {}", params.layers().len()).unwrap();
    for (i, layer) in params.layers().iter().enumerate() {
        writeln!(
            s,
            "layer {i} in {} out {} act {}",
            layer.in_dim(),
            layer.out_dim(),
            layer.activation.tag()
        )
        .unwrap();
        for o in 0..layer.out_dim() {
            let row = &layer.weights[o * layer.in_dim()..(o + 1) * layer.in_dim()];
            writeln!(s, "w {}", join_floats(row)).unwrap();
        }
        writeln!(s, "b {}", join_floats(&layer.bias)).unwrap();
    }
    write_norms(&mut s, "norm_in", params.input_norm());
    write_norms(&mut s, "norm_out", params.output_norm());
    writeln!(s, "end").unwrap();
    s
}

fn write_norms(s: &mut String, tag: &str, norms: &[ChannelNorm]) {
    writeln!(s, "{tag} {}", norms.len()).unwrap();
    for n in norms {
        writeln!(s, "n {} {}", n.offset, n.scale).unwrap();
    }
}

fn join_floats(vals: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v}").unwrap();
    }
    out
}

pub fn save_params(params: &NnParams, path: &Path) -> Result<()> {
    fs::write(path, params_to_string(params))?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<NnParams> {
    let text = fs::read_to_string(path)?;
    params_from_str(&text)
}

/// Parses the text format produced by [`params_to_string`].
pub fn params_from_str(text: &str) -> Result<NnParams> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse("empty file"))?;
    let expected = format!("{MAGIC} v{FORMAT_VERSION}");
    if header.trim() != expected {
        return Err(Error::parse(format!(
            "bad header `{header}`, expected `{expected}`"
        )));
    }
    let n_layers = parse_count(lines.next(), "layers")?;
    let mut layers = Vec::with_capacity(n_layers);
    for idx in 0..n_layers {
        let decl = lines
            .next()
            .ok_or_else(|| Error::parse("truncated layer declaration"))?;
        let toks: Vec<&str> = decl.split_whitespace().collect();
        if toks.len() != 8
            || toks[0] != "layer"
            || toks[2] != "in"
            || toks[4] != "out"
            || toks[6] != "act"
        {
            return Err(Error::parse(format!("bad layer declaration `{decl}`")));
        }
        let declared_idx: usize = toks[1]
            .parse()
            .map_err(|_| Error::parse("bad layer index"))?;
        if declared_idx != idx {
            return Err(Error::parse(format!(
                "layer index {declared_idx} out of order (expected {idx})"
            )));
        }
        let in_dim: usize = toks[3].parse().map_err(|_| Error::parse("bad in dim"))?;
        let out_dim: usize = toks[5].parse().map_err(|_| Error::parse("bad out dim"))?;
        let activation = Activation::from_tag(toks[7])?;
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..out_dim {
            let row = parse_float_line(lines.next(), "w", in_dim)?;
            weights.extend(row);
        }
        let bias = parse_float_line(lines.next(), "b", out_dim)?;
        layers.push(Layer::new(in_dim, out_dim, weights, bias, activation)?);
    }
    let mut params = NnParams::new(layers)?;
    let input_norm = parse_norms(&mut lines, "norm_in", params.input_dim())?;
    let output_norm = parse_norms(&mut lines, "norm_out", params.output_dim())?;
    params.set_norms(input_norm, output_norm)?;
    match lines.next() {
        Some("end") => Ok(params),
        other => Err(Error::parse(format!("missing end marker, got {other:?}"))),
    }
}

fn parse_count(line: Option<&str>, tag: &str) -> Result<usize> {
    let line = line.ok_or_else(|| Error::parse(format!("missing `{tag}` line")))?;
    let mut toks = line.split_whitespace();
    if toks.next() != Some(tag) {
        return Err(Error::parse(format!("expected `{tag}` line, got `{line}`")));
    }
    toks.next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(format!("bad count on `{tag}` line")))
}

fn parse_float_line(line: Option<&str>, tag: &str, expected: usize) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| Error::parse(format!("truncated `{tag}` data")))?;
    let mut toks = line.split_whitespace();
    if toks.next() != Some(tag) {
        return Err(Error::parse(format!("expected `{tag}` row, got `{line}`")));
    }
    let vals: Vec<f64> = toks
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::parse(format!("bad float `{t}`")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        return Err(Error::parse(format!(
            "expected {expected} values on `{tag}` row, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn parse_norms<'a, I: Iterator<Item = &'a str>>(
    lines: &mut I,
    tag: &str,
    expected: usize,
) -> Result<Vec<ChannelNorm>> {
    let count = parse_count(lines.next(), tag)?;
    if count != expected {
        return Err(Error::parse(format!(
            "`{tag}` count {count} does not match network dim {expected}"
        )));
    }
    let mut norms = Vec::with_capacity(count);
    for _ in 0..count {
        let vals = parse_float_line(lines.next(), "n", 2)?;
        norms.push(ChannelNorm {
            offset: vals[0],
            scale: vals[1],
        });
    }
    Ok(norms)
}
