//! Experiment configuration: flat dotted keys, unknown keys rejected.
//!
//! ```text
//! dataset.train = data/train.tsv
//! model.family = transformer_mini
//! train.beta = 0.3
//! augment.mode = mixspeech
//! mix.tau = 0.15
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::kv::{KeyValues, KvWriter};
use crate::augment::{NoisePolicy, SpecAugmentPolicy, DEFAULT_ALPHA, DEFAULT_TAU};
use crate::decode::DEFAULT_BEAM;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::losses::DEFAULT_BETA;
use crate::nn::{Family, ModelConfig};
use crate::tokens::Unit;

/// The single augmentation applied in a run; modes are compared, never stacked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentMode {
    None,
    MixSpeech,
    TriMix,
    SpecAugment,
    Noise,
}

impl FromStr for AugmentMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AugmentMode::None),
            "mixspeech" => Ok(AugmentMode::MixSpeech),
            "tri_mix" => Ok(AugmentMode::TriMix),
            "specaugment" => Ok(AugmentMode::SpecAugment),
            "noise" => Ok(AugmentMode::Noise),
            other => Err(Error::Config(format!(
                "unknown augment mode `{other}` (none|mixspeech|tri_mix|specaugment|noise)"
            ))),
        }
    }
}

impl fmt::Display for AugmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AugmentMode::None => "none",
            AugmentMode::MixSpeech => "mixspeech",
            AugmentMode::TriMix => "tri_mix",
            AugmentMode::SpecAugment => "specaugment",
            AugmentMode::Noise => "noise",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: Option<PathBuf>,
    pub unit: Unit,
}

/// Model hyper-parameters; input and output sizes come from the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelShape {
    pub family: Family,
    pub enc_layers: usize,
    pub enc_width: usize,
    pub dec_layers: usize,
    pub dec_width: usize,
    pub attention_heads: usize,
    pub dropout: f64,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape::from_config(&ModelConfig::transformer_mini(1, 3))
    }
}

impl ModelShape {
    pub fn from_config(c: &ModelConfig) -> Self {
        ModelShape {
            family: c.family,
            enc_layers: c.enc_layers,
            enc_width: c.enc_width,
            dec_layers: c.dec_layers,
            dec_width: c.dec_width,
            attention_heads: c.attention_heads,
            dropout: c.dropout,
        }
    }

    pub fn build(&self, feature_dim: usize, vocab_size: usize) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            family: self.family,
            enc_layers: self.enc_layers,
            enc_width: self.enc_width,
            dec_layers: self.dec_layers,
            dec_width: self.dec_width,
            vocab_size,
            feature_dim,
            attention_heads: self.attention_heads,
            dropout: self.dropout,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub beta: f64,
    pub grad_clip: f64,
    /// Extra training time for runs that mix inputs.
    pub epoch_multiplier: f64,
    /// Stop after this many epochs without a dev improvement; 0 disables.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 16,
            lr: 3e-3,
            seed: 1,
            beta: DEFAULT_BETA,
            grad_clip: 5.0,
            epoch_multiplier: 1.5,
            patience: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub mode: AugmentMode,
    pub tau: f64,
    pub alpha: f64,
    pub specaug: SpecAugmentPolicy,
    pub noise: NoisePolicy,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            mode: AugmentMode::None,
            tau: DEFAULT_TAU,
            alpha: DEFAULT_ALPHA,
            specaug: SpecAugmentPolicy::default(),
            noise: NoisePolicy::default(),
        }
    }
}

impl AugmentConfig {
    /// Whether this run trains on mixed inputs at all.
    pub fn mixes(&self) -> bool {
        matches!(self.mode, AugmentMode::MixSpeech | AugmentMode::TriMix) && self.tau > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    pub beam: usize,
    /// CTC weight in the joint beam score; `None` uses the training β.
    pub beta: Option<f64>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { beam: DEFAULT_BEAM, beta: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub feature: FeatureConfig,
    pub model: ModelShape,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub decode: DecodeConfig,
}

impl ExperimentConfig {
    /// Defaults for a dataset directory written by `synth_dataset`.
    pub fn for_dataset(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        ExperimentConfig {
            dataset: DatasetConfig {
                train: dir.join("train.tsv"),
                dev: dir.join("dev.tsv"),
                test: Some(dir.join("test.tsv")),
                unit: Unit::Char,
            },
            feature: FeatureConfig::default(),
            model: ModelShape::default(),
            train: TrainConfig::default(),
            augment: AugmentConfig::default(),
            decode: DecodeConfig::default(),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        let dataset = DatasetConfig {
            train: resolve(kv.require("dataset.train")?),
            dev: resolve(kv.require("dataset.dev")?),
            test: kv.take::<PathBuf>("dataset.test")?.map(resolve),
            unit: kv.take("dataset.unit")?.unwrap_or(Unit::Char),
        };
        let mut feature = FeatureConfig::default();
        read_feature(&mut kv, &mut feature)?;
        let mut model = ModelShape::default();
        read_model(&mut kv, &mut model)?;

        let mut train = TrainConfig::default();
        kv.take_into("train.epochs", &mut train.epochs)?;
        kv.take_into("train.batch_size", &mut train.batch_size)?;
        kv.take_into("train.lr", &mut train.lr)?;
        kv.take_into("train.seed", &mut train.seed)?;
        kv.take_into("train.beta", &mut train.beta)?;
        kv.take_into("train.grad_clip", &mut train.grad_clip)?;
        kv.take_into("train.epoch_multiplier", &mut train.epoch_multiplier)?;
        kv.take_into("train.patience", &mut train.patience)?;

        let mut augment = AugmentConfig::default();
        kv.take_into("augment.mode", &mut augment.mode)?;
        kv.take_into("mix.tau", &mut augment.tau)?;
        kv.take_into("mix.alpha", &mut augment.alpha)?;
        let sa = &mut augment.specaug;
        kv.take_into("specaug.F", &mut sa.freq_mask_width)?;
        kv.take_into("specaug.mF", &mut sa.n_freq_masks)?;
        kv.take_into("specaug.T", &mut sa.time_mask_width)?;
        kv.take_into("specaug.mT", &mut sa.n_time_masks)?;
        kv.take_into("specaug.p", &mut sa.time_mask_upper)?;
        kv.take_into("specaug.fill", &mut sa.fill)?;
        kv.take_into("noise.snr_db", &mut augment.noise.snr_db)?;

        let mut decode = DecodeConfig::default();
        kv.take_into("decode.beam", &mut decode.beam)?;
        decode.beta = kv.take("decode.beta")?;
        kv.finish()?;

        let cfg = ExperimentConfig { dataset, feature, model, train, augment, decode };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.feature.validate()?;
        self.model.build(self.feature.output_dim(), 4)?;
        let t = &self.train;
        if !(0.0..=1.0).contains(&t.beta) {
            return bad(format!("train.beta {} outside [0, 1]", t.beta));
        }
        if t.epochs == 0 || t.batch_size == 0 {
            return bad("train.epochs and train.batch_size must be positive".into());
        }
        if !positive(t.lr) || !positive(t.grad_clip) || !(t.epoch_multiplier.is_finite() && t.epoch_multiplier >= 1.0) {
            return bad("train.lr and train.grad_clip must be positive, train.epoch_multiplier ≥ 1".into());
        }
        let a = &self.augment;
        if !(0.0..=1.0).contains(&a.tau) {
            return bad(format!("mix.tau {} outside [0, 1]", a.tau));
        }
        if !positive(a.alpha) {
            return bad(format!("mix.alpha {} must be positive", a.alpha));
        }
        a.specaug.validate()?;
        if !a.noise.snr_db.is_finite() {
            return bad("noise.snr_db must be finite".into());
        }
        if self.decode.beam == 0 || self.decode.beta.is_some_and(|b| !(0.0..=1.0).contains(&b)) {
            return bad("decode.beam must be ≥ 1 and decode.beta in [0, 1]".into());
        }
        Ok(())
    }

    pub fn decode_beta(&self) -> f64 {
        self.decode.beta.unwrap_or(self.train.beta)
    }

    /// Epochs actually run: mixing runs get the multiplier.
    pub fn total_epochs(&self) -> usize {
        if self.augment.mixes() {
            (self.train.epochs as f64 * self.train.epoch_multiplier).ceil() as usize
        } else {
            self.train.epochs
        }
    }

    /// Round-trippable text form with absolute paths.
    pub fn to_text(&self) -> String {
        let mut w = KvWriter::default();
        w.put("dataset.train", self.dataset.train.display());
        w.put("dataset.dev", self.dataset.dev.display());
        if let Some(t) = &self.dataset.test {
            w.put("dataset.test", t.display());
        }
        w.put("dataset.unit", self.dataset.unit);
        write_feature(&mut w, &self.feature);
        write_model(&mut w, &self.model);
        let t = &self.train;
        w.put("train.epochs", t.epochs)
            .put("train.batch_size", t.batch_size)
            .put("train.lr", t.lr)
            .put("train.seed", t.seed)
            .put("train.beta", t.beta)
            .put("train.grad_clip", t.grad_clip)
            .put("train.epoch_multiplier", t.epoch_multiplier)
            .put("train.patience", t.patience);
        let a = &self.augment;
        w.put("augment.mode", a.mode).put("mix.tau", a.tau).put("mix.alpha", a.alpha);
        w.put("specaug.F", a.specaug.freq_mask_width)
            .put("specaug.mF", a.specaug.n_freq_masks)
            .put("specaug.T", a.specaug.time_mask_width)
            .put("specaug.mT", a.specaug.n_time_masks)
            .put("specaug.p", a.specaug.time_mask_upper)
            .put("specaug.fill", a.specaug.fill);
        w.put("noise.snr_db", a.noise.snr_db);
        w.put("decode.beam", self.decode.beam);
        if let Some(b) = self.decode.beta {
            w.put("decode.beta", b);
        }
        w.finish()
    }
}

pub(crate) fn read_feature(kv: &mut KeyValues, f: &mut FeatureConfig) -> Result<()> {
    kv.take_into("feature.n_fft", &mut f.n_fft)?;
    kv.take_into("feature.frame_length_ms", &mut f.frame_length_ms)?;
    kv.take_into("feature.frame_shift_ms", &mut f.frame_shift_ms)?;
    kv.take_into("feature.n_mels", &mut f.n_mels)?;
    kv.take_into("feature.n_mfcc", &mut f.n_mfcc)?;
    kv.take_into("feature.log_floor", &mut f.log_floor)?;
    kv.take_into("feature.window", &mut f.window)?;
    kv.take_into("feature.kind", &mut f.kind)?;
    Ok(())
}

pub(crate) fn write_feature(w: &mut KvWriter, f: &FeatureConfig) {
    w.put("feature.n_fft", f.n_fft)
        .put("feature.frame_length_ms", f.frame_length_ms)
        .put("feature.frame_shift_ms", f.frame_shift_ms)
        .put("feature.n_mels", f.n_mels)
        .put("feature.n_mfcc", f.n_mfcc)
        .put("feature.log_floor", f.log_floor)
        .put("feature.window", f.window)
        .put("feature.kind", f.kind);
}

pub(crate) fn read_model(kv: &mut KeyValues, m: &mut ModelShape) -> Result<()> {
    if let Some(family) = kv.take::<Family>("model.family")? {
        // switching family switches the default sizes too
        if family != m.family {
            *m = match family {
                Family::LasMini => ModelShape::from_config(&ModelConfig::las_mini(1, 3)),
                Family::TransformerMini => ModelShape::from_config(&ModelConfig::transformer_mini(1, 3)),
            };
        }
    }
    kv.take_into("model.enc_layers", &mut m.enc_layers)?;
    kv.take_into("model.enc_width", &mut m.enc_width)?;
    kv.take_into("model.dec_layers", &mut m.dec_layers)?;
    kv.take_into("model.dec_width", &mut m.dec_width)?;
    kv.take_into("model.attention_heads", &mut m.attention_heads)?;
    kv.take_into("model.dropout", &mut m.dropout)?;
    Ok(())
}

pub(crate) fn write_model(w: &mut KvWriter, m: &ModelShape) {
    w.put("model.family", m.family)
        .put("model.enc_layers", m.enc_layers)
        .put("model.enc_width", m.enc_width)
        .put("model.dec_layers", m.dec_layers)
        .put("model.dec_width", m.dec_width)
        .put("model.attention_heads", m.attention_heads)
        .put("model.dropout", m.dropout);
}

/// False for NaN as well as non-positive values.
fn positive(x: f64) -> bool {
    x > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "dataset.train = a.tsv\ndataset.dev = b.tsv\n";

    #[test]
    fn defaults_follow_toy_settings() {
        let cfg = ExperimentConfig::parse(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(cfg.dataset.train, PathBuf::from("/data/a.tsv"));
        assert_eq!(cfg.train.beta, 0.3);
        assert_eq!(cfg.train.batch_size, 16);
        assert_eq!(cfg.train.lr, 3e-3);
        assert_eq!(cfg.train.grad_clip, 5.0);
        assert_eq!(cfg.augment.tau, 0.15);
        assert_eq!(cfg.augment.alpha, 0.5);
        assert_eq!(cfg.decode.beam, 20);
        assert_eq!(cfg.augment.mode, AugmentMode::None);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = ExperimentConfig::parse(&format!("{MINIMAL}mix.taw = 0.2\n"), Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("mix.taw"));
    }

    #[test]
    fn ranges_are_checked() {
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}train.beta = 1.5\n"), Path::new(".")).is_err());
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}mix.tau = -0.1\n"), Path::new(".")).is_err());
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}augment.mode = both\n"), Path::new(".")).is_err());
    }

    #[test]
    fn text_round_trip() {
        let text = format!("{MINIMAL}model.family = las_mini\naugment.mode = tri_mix\nspecaug.F = 7\ntrain.seed = 9\n");
        let cfg = ExperimentConfig::parse(&text, Path::new("/x")).unwrap();
        assert_eq!(cfg.model.enc_layers, 2);
        let again = ExperimentConfig::parse(&cfg.to_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn multiplier_only_for_mixing_runs() {
        let mut cfg = ExperimentConfig::parse(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(cfg.total_epochs(), 60);
        cfg.augment.mode = AugmentMode::MixSpeech;
        assert_eq!(cfg.total_epochs(), 90);
        cfg.augment.tau = 0.0;
        assert_eq!(cfg.total_epochs(), 60);
    }
}
