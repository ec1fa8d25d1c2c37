use std::path::Path;

use super::config::ExperimentConfig;
use super::manifest::{read_manifest, UtteranceRef};
use crate::error::{Error, Result};
use crate::features::{model_input, read_wav, FeatureConfig, FeatureSequence, Waveform};
use crate::tokens::{TokenSequence, Unit, Vocab};

/// A loaded utterance: audio, normalized model input, and target ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub wave: Waveform,
    pub features: FeatureSequence,
    pub tokens: TokenSequence,
}

pub fn load_utterances(refs: &[UtteranceRef], vocab: &Vocab, feature: &FeatureConfig) -> Result<Vec<Utterance>> {
    refs.iter()
        .map(|r| {
            let wave = read_wav(&r.wav_path)?;
            let features = model_input(&wave, feature)?;
            let tokens = vocab.encode(&r.text)?;
            Ok(Utterance { id: r.id.clone(), wave, features, tokens })
        })
        .collect()
}

/// Train/dev/test sets with the vocabulary built from the training transcripts.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub vocab: Vocab,
    pub train: Vec<Utterance>,
    pub dev: Vec<Utterance>,
    pub test: Vec<Utterance>,
}

impl Corpus {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let train_refs = read_manifest(&cfg.dataset.train)?;
        if train_refs.is_empty() {
            return Err(Error::Manifest(format!("{} lists no utterances", cfg.dataset.train.display())));
        }
        let vocab = vocab_for(&train_refs, cfg.dataset.unit)?;
        let load = |p: &Path| -> Result<Vec<Utterance>> { load_utterances(&read_manifest(p)?, &vocab, &cfg.feature) };
        let train = load_utterances(&train_refs, &vocab, &cfg.feature)?;
        let dev = load(&cfg.dataset.dev)?;
        let test = match &cfg.dataset.test {
            Some(p) => load(p)?,
            None => Vec::new(),
        };
        Ok(Corpus { vocab, train, dev, test })
    }
}

pub fn vocab_for(refs: &[UtteranceRef], unit: Unit) -> Result<Vocab> {
    Vocab::from_texts(refs.iter().map(|r| r.text.as_str()), unit)
}
