//! Synthetic speech-like corpus: each symbol is a tone followed by an upward
//! chirp at a symbol-specific base frequency; utterances concatenate symbols
//! with duration and amplitude jitter plus light background noise.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::kv::KeyValues;
use super::manifest::{write_manifest, UtteranceRef};
use crate::error::{Error, Result};
use crate::features::{write_wav, Waveform, DEFAULT_SAMPLE_RATE};

pub const MAX_SYMBOLS: usize = 20;
/// Nominal duration of one symbol.
pub const SYMBOL_SECONDS: f64 = 0.12;
const LOWEST_HZ: f64 = 300.0;
const HIGHEST_HZ: f64 = 4800.0;
const CHIRP_RATIO: f64 = 1.2;
const TONE_FRACTION: f64 = 0.5;
const FADE_SECONDS: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_utts: usize,
    pub vocab_size: usize,
    /// Inclusive transcript length range.
    pub len_range: (usize, usize),
    pub seed: u64,
    pub sample_rate_hz: u32,
    pub noise_snr_db: f64,
    /// Relative duration jitter per token (±).
    pub duration_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_utts: 250,
            vocab_size: 8,
            len_range: (3, 8),
            seed: 1,
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            noise_snr_db: 25.0,
            duration_jitter: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.vocab_size == 0 || self.vocab_size > MAX_SYMBOLS {
            return bad(format!("vocab_size {} must be in 1..={MAX_SYMBOLS}", self.vocab_size));
        }
        let (lo, hi) = self.len_range;
        if lo == 0 || lo > hi {
            return bad(format!("length range ({lo}, {hi}) must satisfy 1 ≤ lo ≤ hi"));
        }
        if self.n_utts < 3 {
            return bad("need at least 3 utterances for a train/dev/test split".into());
        }
        if !(0.0..1.0).contains(&self.duration_jitter) || !self.noise_snr_db.is_finite() {
            return bad("duration jitter must be in [0, 1) and the SNR finite".into());
        }
        Ok(())
    }

    /// Reads `synth.*` keys over the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut c = SynthConfig::default();
        kv.take_into("synth.n_utts", &mut c.n_utts)?;
        kv.take_into("synth.vocab_size", &mut c.vocab_size)?;
        kv.take_into("synth.min_len", &mut c.len_range.0)?;
        kv.take_into("synth.max_len", &mut c.len_range.1)?;
        kv.take_into("synth.seed", &mut c.seed)?;
        kv.take_into("synth.sample_rate_hz", &mut c.sample_rate_hz)?;
        kv.take_into("synth.noise_snr_db", &mut c.noise_snr_db)?;
        kv.take_into("synth.duration_jitter", &mut c.duration_jitter)?;
        kv.finish()?;
        c.validate()?;
        Ok(c)
    }
}

/// Symbol names: `a`, `b`, … .
pub fn symbol_names(n: usize) -> Vec<String> {
    (0..n).map(|k| char::from(b'a' + k as u8).to_string()).collect()
}

/// Base frequency of symbol `k` out of `n`, log-spaced between 300 Hz and 4.8 kHz.
pub fn base_frequency(k: usize, n: usize) -> f64 {
    if n <= 1 {
        return LOWEST_HZ;
    }
    LOWEST_HZ * (HIGHEST_HZ / LOWEST_HZ).powf(k as f64 / (n - 1) as f64)
}

/// Unit-amplitude signature of symbol `k`: a steady tone at the base
/// frequency, then a linear chirp up to 1.2× it, with short raised-cosine fades.
pub fn symbol_signature(k: usize, n: usize, seconds: f64, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let len = ((seconds * sr).round() as usize).max(1);
    let f0 = base_frequency(k, n);
    let f1 = f0 * CHIRP_RATIO;
    let tone_len = (len as f64 * TONE_FRACTION) as usize;
    let chirp_s = (len - tone_len) as f64 / sr;
    let fade = ((FADE_SECONDS * sr) as usize).min(len / 2).max(1);
    let mut phase = 0.0;
    (0..len)
        .map(|i| {
            let f = if i < tone_len {
                f0
            } else {
                let t = (i - tone_len) as f64 / sr;
                f0 + (f1 - f0) * t / chirp_s.max(1e-12)
            };
            phase += 2.0 * PI * f / sr;
            let edge = i.min(len - 1 - i);
            let env = if edge < fade { 0.5 - 0.5 * (PI * edge as f64 / fade as f64).cos() } else { 1.0 };
            env * phase.sin()
        })
        .collect()
}

fn silence<R: Rng>(rng: &mut R, lo_s: f64, hi_s: f64, sr: f64) -> usize {
    (rng.random_range(lo_s..hi_s) * sr) as usize
}

/// One utterance for `tokens` (symbol indices).
fn render<R: Rng>(tokens: &[usize], cfg: &SynthConfig, rng: &mut R) -> Result<Waveform> {
    let sr = cfg.sample_rate_hz as f64;
    let mut samples = vec![0.0; silence(rng, 0.03, 0.08, sr)];
    for &k in tokens {
        let jitter = rng.random_range(1.0 - cfg.duration_jitter..=1.0 + cfg.duration_jitter);
        let amp = rng.random_range(0.3..0.8);
        let sig = symbol_signature(k, cfg.vocab_size, SYMBOL_SECONDS * jitter, cfg.sample_rate_hz);
        samples.extend(sig.iter().map(|s| amp * s));
        let gap = silence(rng, 0.0, 0.02, sr);
        samples.extend(std::iter::repeat_n(0.0, gap));
    }
    samples.extend(std::iter::repeat_n(0.0, silence(rng, 0.03, 0.08, sr)));
    let power = samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64;
    let sd = (power / 10f64.powf(cfg.noise_snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for s in &mut samples {
        *s = (*s + normal.sample(rng)).clamp(-1.0, 1.0);
    }
    Waveform::new(samples, cfg.sample_rate_hz)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub train_manifest: PathBuf,
    pub dev_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub train: Vec<UtteranceRef>,
    pub dev: Vec<UtteranceRef>,
    pub test: Vec<UtteranceRef>,
}

/// Sizes of the 80/10/10 split.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let dev = ((n as f64 * 0.1).round() as usize).max(1);
    let test = dev;
    (n - dev - test, dev, test)
}

/// Writes `wavs/*.wav` plus `train.tsv`, `dev.tsv`, `test.tsv` into a new
/// directory `out_dir`; refuses to touch an existing path.
pub fn synth_dataset(cfg: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<SynthOutput> {
    cfg.validate()?;
    let out = out_dir.as_ref();
    if out.exists() {
        return Err(Error::OutputExists(out.to_path_buf()));
    }
    let wav_dir = out.join("wavs");
    fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;

    let names = symbol_names(cfg.vocab_size);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = cfg.n_utts.to_string().len().max(4);
    let mut utts = Vec::with_capacity(cfg.n_utts);
    for i in 0..cfg.n_utts {
        let len = rng.random_range(cfg.len_range.0..=cfg.len_range.1);
        let tokens: Vec<usize> = (0..len).map(|_| rng.random_range(0..cfg.vocab_size)).collect();
        let wave = render(&tokens, cfg, &mut rng)?;
        let id = format!("utt{:0width$}", i + 1);
        let path = wav_dir.join(format!("{id}.wav"));
        write_wav(&path, &wave)?;
        let text: String = tokens.iter().map(|&k| names[k].as_str()).collect();
        utts.push(UtteranceRef { id, wav_path: path, text });
    }
    let (n_train, n_dev, _) = split_sizes(cfg.n_utts);
    let test = utts.split_off(n_train + n_dev);
    let dev = utts.split_off(n_train);
    let train = utts;
    let paths = [out.join("train.tsv"), out.join("dev.tsv"), out.join("test.tsv")];
    write_manifest(&paths[0], &train)?;
    write_manifest(&paths[1], &dev)?;
    write_manifest(&paths[2], &test)?;
    let [train_manifest, dev_manifest, test_manifest] = paths;
    Ok(SynthOutput { train_manifest, dev_manifest, test_manifest, train, dev, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_overrides_defaults() {
        let c = SynthConfig::parse("synth.n_utts = 40\nsynth.max_len = 5\n").unwrap();
        assert_eq!(c.n_utts, 40);
        assert_eq!(c.len_range, (3, 5));
        assert!(SynthConfig::parse("synth.colour = red").is_err());
        assert!(SynthConfig::parse("synth.vocab_size = 21").is_err());
    }

    #[test]
    fn split_is_80_10_10() {
        assert_eq!(split_sizes(250), (200, 25, 25));
        assert_eq!(split_sizes(200), (160, 20, 20));
        assert_eq!(split_sizes(3), (1, 1, 1));
    }

    #[test]
    fn frequencies_span_the_band() {
        assert_eq!(base_frequency(0, 8), 300.0);
        assert!((base_frequency(7, 8) - 4800.0).abs() < 1e-9);
        assert!(base_frequency(19, 20) * CHIRP_RATIO < 8000.0);
    }

    #[test]
    fn signature_length_and_range() {
        let s = symbol_signature(2, 8, 0.12, 16000);
        assert_eq!(s.len(), 1920);
        assert!(s.iter().all(|v| v.abs() <= 1.0));
        assert!(s[0].abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SynthConfig { vocab_size: 21, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = SynthConfig { len_range: (5, 3), ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
