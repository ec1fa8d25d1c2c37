use super::config::{Family, ModelConfig};
use super::params::{ParamInit, Parameters};
use super::tape::{Tape, Var};
use super::{las, transformer};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Encoder outputs on a tape.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    /// `T' × enc_width`
    pub states: Var,
    /// `T' × vocab_size`, pre-softmax.
    pub ctc_logits: Var,
}

#[derive(Debug, Clone)]
pub struct DecoderOutput {
    /// `U × vocab_size`, pre-softmax; row `u` predicts the token after `y_in[..=u]`.
    pub logits: Var,
    /// Attention distribution over encoder frames at each step (`U × T'`);
    /// head-averaged for the transformer's last cross-attention layer.
    pub attention: Vec<Vec<f64>>,
}

/// Joint CTC-attention encoder–decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct AsrModel {
    config: ModelConfig,
    params: Parameters,
}

impl AsrModel {
    /// Freshly initialized model; the parameters depend only on `seed` and the config.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = ParamInit::new(seed);
        match config.family {
            Family::LasMini => las::declare(&config, &mut init),
            Family::TransformerMini => transformer::declare(&config, &mut init),
        }
        Ok(AsrModel { config, params: init.finish() })
    }

    /// Rebuilds a model from stored parameters, checking names and shapes
    /// against what `config` declares.
    pub fn from_parts(config: ModelConfig, params: Parameters) -> Result<Self> {
        let reference = AsrModel::new(config.clone(), 0)?;
        if reference.params.names() != params.names() {
            return Err(Error::Checkpoint("parameter names do not match the model config".into()));
        }
        for i in 0..params.len() {
            if reference.params.tensor(i).shape() != params.tensor(i).shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` has shape {:?}, config expects {:?}",
                    params.name(i),
                    params.tensor(i).shape(),
                    reference.params.tensor(i).shape()
                )));
            }
        }
        Ok(AsrModel { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    /// Encodes one utterance (`T × feature_dim`).
    pub fn encode(&self, tape: &mut Tape, x: &Tensor) -> Result<Encoded> {
        if x.cols() != self.config.feature_dim {
            return Err(Error::shape(
                "encoder",
                format!("features have dimension {}, model expects {}", x.cols(), self.config.feature_dim),
            ));
        }
        if x.rows() == 0 {
            return Err(Error::shape("encoder", "empty feature sequence"));
        }
        match self.config.family {
            Family::LasMini => las::encode(self, tape, x),
            Family::TransformerMini => transformer::encode(self, tape, x),
        }
    }

    /// Teacher-forced decoder pass; `y_in` starts with the sos id.
    pub fn decode(&self, tape: &mut Tape, enc: &Encoded, y_in: &[usize]) -> Result<DecoderOutput> {
        if y_in.is_empty() {
            return Err(Error::InvalidArgument("decoder input must contain at least the sos token".into()));
        }
        match self.config.family {
            Family::LasMini => las::decode(self, tape, enc, y_in),
            Family::TransformerMini => transformer::decode(self, tape, enc, y_in),
        }
    }

    pub(crate) fn linear(&self, tape: &mut Tape, x: Var, prefix: &str) -> Result<Var> {
        let w = tape.named(&self.params, &format!("{prefix}.w"));
        let b = tape.named(&self.params, &format!("{prefix}.b"));
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }

    pub(crate) fn layer_norm(&self, tape: &mut Tape, x: Var, prefix: &str) -> Result<Var> {
        let g = tape.named(&self.params, &format!("{prefix}.gain"));
        let b = tape.named(&self.params, &format!("{prefix}.bias"));
        tape.layer_norm(x, g, b)
    }
}

/// Zero-padded batch of feature matrices with their true lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    pub frames: Vec<Tensor>,
    pub lengths: Vec<usize>,
}

impl PaddedBatch {
    pub fn from_sequences(seqs: &[&Tensor]) -> Result<Self> {
        let t_max = seqs.iter().map(|s| s.rows()).max().unwrap_or(0);
        let d = seqs.first().map_or(0, |s| s.cols());
        let mut frames = Vec::with_capacity(seqs.len());
        for s in seqs {
            if s.cols() != d {
                return Err(Error::shape("batch", format!("dimensions {d} and {}", s.cols())));
            }
            let mut padded = Tensor::zeros(t_max, d);
            padded.data_mut()[..s.len()].copy_from_slice(s.data());
            frames.push(padded);
        }
        Ok(PaddedBatch { frames, lengths: seqs.iter().map(|s| s.rows()).collect() })
    }

    /// The unpadded prefix of utterance `i`.
    pub fn utterance(&self, i: usize) -> Tensor {
        let x = &self.frames[i];
        let n = self.lengths[i];
        Tensor::from_vec(n, x.cols(), x.data()[..n * x.cols()].to_vec()).expect("prefix shape")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub states: Tensor,
    pub ctc_logits: Tensor,
}

/// Inference-mode encoder over a padded batch; frames past each length are ignored.
pub fn encoder_forward(model: &AsrModel, batch: &PaddedBatch) -> Result<Vec<EncoderOutput>> {
    (0..batch.frames.len())
        .map(|i| {
            let mut tape = Tape::new();
            let enc = model.encode(&mut tape, &batch.utterance(i))?;
            Ok(EncoderOutput { states: tape.value(enc.states).clone(), ctc_logits: tape.value(enc.ctc_logits).clone() })
        })
        .collect()
}

/// Inference-mode decoder pass: `(U × V logits, U × T' attention)`.
pub fn decoder_forward(model: &AsrModel, enc_states: &Tensor, y_in: &[usize]) -> Result<(Tensor, Vec<Vec<f64>>)> {
    let mut tape = Tape::new();
    let states = tape.constant(enc_states.clone());
    // ctc logits are not used by the decoder
    let enc = Encoded { states, ctc_logits: states };
    let out = model.decode(&mut tape, &enc, y_in)?;
    Ok((tape.value(out.logits).clone(), out.attention))
}
