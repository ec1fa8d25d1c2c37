use std::path::Path;

use super::checkpoint::Checkpoint;
use super::data::{load_utterances, Utterance};
use super::manifest::read_manifest;
use crate::decode::{beam_search_joint, BeamOptions, ErrorCounts, Hypothesis};
use crate::error::{Error, Result};
use crate::nn::AsrModel;
use crate::tokens::{TokenSequence, Vocab};

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedUtterance {
    pub id: String,
    pub hypothesis: Hypothesis,
    pub reference: TokenSequence,
    /// Whether the search reached eos.
    pub ended: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `PER` or `WER`.
    pub metric: &'static str,
    pub counts: ErrorCounts,
    /// Pooled error rate in percent.
    pub error_rate: f64,
    pub utterances: Vec<DecodedUtterance>,
}

impl EvalReport {
    /// `PER 12.5%` followed by the pooled counts.
    pub fn summary(&self) -> String {
        let c = &self.counts;
        format!(
            "{} {:.2}%\nS={} D={} I={} N={} utterances={} unfinished={}\n",
            self.metric,
            self.error_rate,
            c.substitutions,
            c.deletions,
            c.insertions,
            c.ref_len,
            self.utterances.len(),
            self.utterances.iter().filter(|u| !u.ended).count()
        )
    }

    /// One `id<TAB>joint_score<TAB>tokens` line per utterance.
    pub fn decode_lines(&self, vocab: &Vocab) -> String {
        self.utterances
            .iter()
            .map(|u| {
                let toks: Vec<&str> = u.hypothesis.tokens.ids().iter().map(|&i| vocab.symbol(i)).collect();
                format!("{}\t{}\t{}\n", u.id, u.hypothesis.joint_score, toks.join(" "))
            })
            .collect()
    }
}

/// Beam-decodes every utterance and pools the error counts.
pub fn evaluate_utterances(model: &AsrModel, vocab: &Vocab, utts: &[Utterance], opts: &BeamOptions) -> Result<EvalReport> {
    if utts.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let mut counts = ErrorCounts::default();
    let mut out = Vec::with_capacity(utts.len());
    for u in utts {
        let res = beam_search_joint(model, &u.features.frames, opts)?;
        counts += crate::decode::edit_distance(res.best.tokens.ids(), u.tokens.ids());
        out.push(DecodedUtterance {
            id: u.id.clone(),
            hypothesis: res.best,
            reference: u.tokens.clone(),
            ended: res.ended,
        });
    }
    Ok(EvalReport { metric: vocab.unit().metric_name(), error_rate: counts.percent()?, counts, utterances: out })
}

/// Scores a checkpoint on a manifest; transcripts must use the checkpoint's vocabulary.
pub fn evaluate(ckpt: &Checkpoint, manifest: impl AsRef<Path>, opts: &BeamOptions) -> Result<EvalReport> {
    let refs = read_manifest(manifest)?;
    let utts = load_utterances(&refs, &ckpt.vocab, &ckpt.feature)?;
    evaluate_utterances(&ckpt.model, &ckpt.vocab, &utts, opts)
}
