//! Plain-text feature dump: a `MSFEAT1 <T> <D> <kind>` header line followed by
//! `T` lines of `D` space-separated decimals.
//!
//! Values are written in shortest round-trip form, so a dump reads back
//! bit-identically. The frame shift is not part of the format; readers supply it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{FeatureKind, FeatureSequence};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &str = "MSFEAT1";

pub fn format_feature_dump(fs: &FeatureSequence) -> String {
    let mut out = format!("{MAGIC} {} {} {}\n", fs.num_frames(), fs.dim(), fs.kind);
    for t in 0..fs.num_frames() {
        let row = fs.frames.row(t);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_feature_dump(path: impl AsRef<Path>, fs: &FeatureSequence) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_feature_dump(fs)).map_err(|e| Error::io(path, e))
}

pub fn parse_feature_dump(text: &str, frame_shift_ms: f64) -> Result<FeatureSequence> {
    let bad = |m: String| Error::FeatureDump(m);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != MAGIC {
        return Err(bad(format!("bad header `{header}`")));
    }
    let t: usize = fields[1].parse().map_err(|_| bad(format!("bad frame count `{}`", fields[1])))?;
    let d: usize = fields[2].parse().map_err(|_| bad(format!("bad dimension `{}`", fields[2])))?;
    let kind: FeatureKind = fields[3].parse().map_err(|_| bad(format!("bad kind `{}`", fields[3])))?;
    let mut data = Vec::with_capacity(t * d);
    for r in 0..t {
        let line = lines.next().ok_or_else(|| bad(format!("expected {t} rows, found {r}")))?;
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|_| bad(format!("row {r}: bad value `{tok}`")))?);
        }
        if data.len() - before != d {
            return Err(bad(format!("row {r} has {} values, expected {d}", data.len() - before)));
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(bad("trailing data after last row".into()));
    }
    FeatureSequence::new(Tensor::from_vec(t, d, data)?, frame_shift_ms, kind)
}

pub fn read_feature_dump(path: impl AsRef<Path>, frame_shift_ms: f64) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_feature_dump(&text, frame_shift_ms)
}
