//! Binary checkpoints plus a `key = value` sidecar (`<path>.config`).
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "MSPK1"
//! u32 n_tensors
//! n × { u32 name_len, name bytes, u32 rows, u32 cols }
//! parameter data (f64) in name-table order
//! u64 adam_step, u64 adam_skipped
//! first moments (f64), then second moments, in name-table order
//! [u8; 32] rng_seed, u64 rng_stream, u128 rng_word_pos
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{read_feature, read_model, write_feature, write_model, ModelShape};
use super::kv::{KeyValues, KvWriter};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::nn::{AdamState, AsrModel, Parameters};
use crate::tensor::Tensor;
use crate::tokens::{Unit, Vocab};

const MAGIC: &[u8; 5] = b"MSPK1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: AsrModel,
    pub feature: FeatureConfig,
    pub vocab: Vocab,
    /// β the model was trained with.
    pub train_beta: f64,
    pub optimizer: AdamState,
    pub rng: ChaCha8Rng,
}

/// `<path>.config`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config");
    PathBuf::from(s)
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let side = sidecar_path(path);
        fs::write(&side, self.sidecar_text()).map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let side = sidecar_path(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_parts(&text, &bytes)
    }

    pub fn sidecar_text(&self) -> String {
        let cfg = self.model.config();
        let mut w = KvWriter::default();
        write_model(&mut w, &ModelShape::from_config(cfg));
        w.put("model.vocab_size", cfg.vocab_size).put("model.feature_dim", cfg.feature_dim);
        write_feature(&mut w, &self.feature);
        w.put("vocab.unit", self.vocab.unit()).put("vocab.symbols", self.vocab.symbols().join(" "));
        w.put("train.beta", self.train_beta);
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let params = self.model.params();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(params.len() as u32).to_le_bytes());
        for (name, t) in params.iter() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        }
        let put = |out: &mut Vec<u8>, t: &Tensor| t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        params.iter().for_each(|(_, t)| put(&mut out, t));
        out.extend_from_slice(&self.optimizer.step.to_le_bytes());
        out.extend_from_slice(&self.optimizer.skipped.to_le_bytes());
        self.optimizer.m.iter().for_each(|t| put(&mut out, t));
        self.optimizer.v.iter().for_each(|t| put(&mut out, t));
        out.extend_from_slice(&self.rng.get_seed());
        out.extend_from_slice(&self.rng.get_stream().to_le_bytes());
        out.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());
        out
    }

    pub fn from_parts(sidecar: &str, bytes: &[u8]) -> Result<Self> {
        let mut kv = KeyValues::parse(sidecar)?;
        let mut shape = ModelShape::default();
        read_model(&mut kv, &mut shape)?;
        let vocab_size: usize = kv.require("model.vocab_size")?;
        let feature_dim: usize = kv.require("model.feature_dim")?;
        let mut feature = FeatureConfig::default();
        read_feature(&mut kv, &mut feature)?;
        let unit: Unit = kv.require("vocab.unit")?;
        let symbols: String = kv.require("vocab.symbols")?;
        let train_beta: f64 = kv.require("train.beta")?;
        kv.finish()?;
        let vocab = Vocab::new(symbols.split_whitespace().map(str::to_owned).collect(), unit)?;
        if vocab.size() != vocab_size {
            return Err(Error::Checkpoint(format!(
                "sidecar vocabulary has {} ids, model expects {vocab_size}",
                vocab.size()
            )));
        }
        let model_cfg = shape.build(feature_dim, vocab_size)?;

        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Checkpoint("bad magic; not an MSPK1 checkpoint".into()));
        }
        let n = r.u32()? as usize;
        let mut table = Vec::with_capacity(n);
        for _ in 0..n {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?
                .to_owned();
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            table.push((name, rows, cols));
        }
        let mut params = Parameters::new();
        for (name, rows, cols) in &table {
            params.insert(name.clone(), r.tensor(*rows, *cols)?);
        }
        let step = r.u64()?;
        let skipped = r.u64()?;
        let m = table.iter().map(|(_, rr, c)| r.tensor(*rr, *c)).collect::<Result<Vec<_>>>()?;
        let v = table.iter().map(|(_, rr, c)| r.tensor(*rr, *c)).collect::<Result<Vec<_>>>()?;
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        let model = AsrModel::from_parts(model_cfg, params)?;
        Ok(Checkpoint { model, feature, vocab, train_beta, optimizer: AdamState { m, v, step, skipped }, rng })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor(&mut self, rows: usize, cols: usize) -> Result<Tensor> {
        let n = rows.checked_mul(cols).ok_or_else(|| Error::Checkpoint("tensor size overflow".into()))?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor size overflow".into()))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Tensor::from_vec(rows, cols, data)
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::nn::ModelConfig;

    fn sample() -> Checkpoint {
        let vocab = Vocab::new(vec!["a".into(), "b".into()], Unit::Char).unwrap();
        let mut cfg = ModelConfig::las_mini(4, vocab.size());
        cfg.enc_width = 6;
        cfg.dec_width = 5;
        let model = AsrModel::new(cfg, 3).unwrap();
        let mut optimizer = AdamState::new(model.params());
        optimizer.step = 7;
        optimizer.m[0].data_mut()[0] = 0.25;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        rng.set_stream(2);
        let _: u64 = rng.random();
        Checkpoint { model, feature: FeatureConfig::default(), vocab, train_beta: 0.3, optimizer, rng }
    }

    #[test]
    fn bytes_round_trip() {
        let ck = sample();
        let back = Checkpoint::from_parts(&ck.sidecar_text(), &ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        let mut a = ck.rng.clone();
        let mut b = back.rng.clone();
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn corruption_is_detected() {
        let ck = sample();
        let mut bytes = ck.to_bytes();
        bytes[0] = b'X';
        assert!(Checkpoint::from_parts(&ck.sidecar_text(), &bytes).is_err());
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_parts(&ck.sidecar_text(), &bytes[..bytes.len() - 1]).is_err());
        let side = ck.sidecar_text().replace("model.enc_width = 6", "model.enc_width = 8");
        assert!(Checkpoint::from_parts(&side, &ck.to_bytes()).is_err());
    }
}
