use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tokens::FIRST_SYMBOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Bidirectional LSTM encoder, attention LSTM decoder.
    LasMini,
    /// Convolutional subsampling + self-attention encoder, attention decoder.
    TransformerMini,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "las_mini" => Ok(Family::LasMini),
            "transformer_mini" => Ok(Family::TransformerMini),
            other => Err(Error::Config(format!("unknown model family `{other}` (las_mini|transformer_mini)"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::LasMini => "las_mini",
            Family::TransformerMini => "transformer_mini",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub family: Family,
    pub enc_layers: usize,
    /// Encoder output width; for `las_mini` each direction gets half.
    pub enc_width: usize,
    pub dec_layers: usize,
    pub dec_width: usize,
    pub vocab_size: usize,
    pub feature_dim: usize,
    /// Attention heads (transformer only).
    pub attention_heads: usize,
    pub dropout: f64,
}

impl ModelConfig {
    pub fn las_mini(feature_dim: usize, vocab_size: usize) -> Self {
        ModelConfig {
            family: Family::LasMini,
            enc_layers: 2,
            enc_width: 64,
            dec_layers: 1,
            dec_width: 64,
            vocab_size,
            feature_dim,
            attention_heads: 1,
            dropout: 0.1,
        }
    }

    pub fn transformer_mini(feature_dim: usize, vocab_size: usize) -> Self {
        ModelConfig {
            family: Family::TransformerMini,
            enc_layers: 4,
            enc_width: 64,
            dec_layers: 2,
            dec_width: 64,
            vocab_size,
            feature_dim,
            attention_heads: 4,
            dropout: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.enc_layers == 0 || self.dec_layers == 0 || self.enc_width == 0 || self.dec_width == 0 {
            return bad("layer counts and widths must be positive".into());
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive".into());
        }
        if self.vocab_size < FIRST_SYMBOL {
            return bad(format!("vocab_size {} leaves no room for blank/sos/eos", self.vocab_size));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        match self.family {
            Family::LasMini => {
                if !self.enc_width.is_multiple_of(2) {
                    return bad(format!("las_mini enc_width {} must be even", self.enc_width));
                }
            }
            Family::TransformerMini => {
                if self.attention_heads == 0 || !self.enc_width.is_multiple_of(self.attention_heads) {
                    return bad(format!("enc_width {} not divisible by {} heads", self.enc_width, self.attention_heads));
                }
                if self.enc_width != self.dec_width {
                    return bad("transformer_mini needs enc_width == dec_width".into());
                }
            }
        }
        Ok(())
    }

    /// Encoder output length for `t` input frames.
    pub fn encoded_len(&self, t: usize) -> usize {
        match self.family {
            Family::LasMini => t,
            Family::TransformerMini => t.div_ceil(4),
        }
    }
}
