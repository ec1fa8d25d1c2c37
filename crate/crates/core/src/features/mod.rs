//! Acoustic front end: waveform → power spectrogram → log-mel filterbank → MFCC,
//! plus per-utterance mean/variance normalization.
//!
//! All functions are pure; identical inputs give bit-identical outputs.

mod dump;
mod wav;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub use dump::{parse_feature_dump, read_feature_dump, write_feature_dump, format_feature_dump};
pub use wav::{encode_wav, parse_wav, read_wav, write_wav};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
const CMVN_VAR_FLOOR: f64 = 1e-8;

/// Mono PCM samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("waveform has no samples".into()));
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("waveform contains non-finite samples".into()));
        }
        Ok(Waveform { samples, sample_rate_hz })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        let denom = (n.max(2) - 1) as f64;
        (0..n)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / denom;
                match self {
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::Hamming => 0.54 - 0.46 * x.cos(),
                    Window::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

impl FromStr for Window {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(Window::Hann),
            "hamming" => Ok(Window::Hamming),
            "rectangular" => Ok(Window::Rectangular),
            other => Err(Error::FeatureConfig(format!("unknown window `{other}`"))),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Hann => "hann",
            Window::Hamming => "hamming",
            Window::Rectangular => "rectangular",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    LogFbank,
    Mfcc,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::LogFbank => "log_fbank",
            FeatureKind::Mfcc => "mfcc",
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log_fbank" => Ok(FeatureKind::LogFbank),
            "mfcc" => Ok(FeatureKind::Mfcc),
            other => Err(Error::FeatureConfig(format!("unknown feature kind `{other}`"))),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub n_fft: usize,
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub log_floor: f64,
    pub window: Window,
    /// Which representation the model consumes.
    pub kind: FeatureKind,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            n_fft: 512,
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            n_mels: 23,
            n_mfcc: 13,
            log_floor: 1e-10,
            window: Window::Hann,
            kind: FeatureKind::LogFbank,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::FeatureConfig(m));
        if self.n_fft < 2 || !self.n_fft.is_multiple_of(2) {
            return bad(format!("n_fft must be even and ≥ 2, got {}", self.n_fft));
        }
        if !(self.frame_length_ms > 0.0 && self.frame_shift_ms > 0.0) {
            return bad("frame length and shift must be positive".into());
        }
        if self.frame_shift_ms > self.frame_length_ms {
            return bad(format!("frame shift {} ms exceeds frame length {} ms", self.frame_shift_ms, self.frame_length_ms));
        }
        if self.n_mels == 0 || self.n_mels > self.n_fft / 2 + 1 {
            return bad(format!("n_mels {} must be in 1..={}", self.n_mels, self.n_fft / 2 + 1));
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad(format!("n_mfcc {} must be in 1..={}", self.n_mfcc, self.n_mels));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }

    pub fn frame_length(&self, sample_rate: u32) -> usize {
        (self.frame_length_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn frame_shift(&self, sample_rate: u32) -> usize {
        (self.frame_shift_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    /// Dimension of the sequences produced by [`extract`].
    pub fn output_dim(&self) -> usize {
        match self.kind {
            FeatureKind::LogFbank => self.n_mels,
            FeatureKind::Mfcc => self.n_mfcc,
        }
    }

    /// `floor((len − frame_length)/frame_shift) + 1`, or 0 when shorter than a frame.
    pub fn num_frames(&self, n_samples: usize, sample_rate: u32) -> usize {
        let len = self.frame_length(sample_rate);
        let shift = self.frame_shift(sample_rate);
        if n_samples < len {
            0
        } else {
            (n_samples - len) / shift + 1
        }
    }
}

/// `T × D` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub frames: Tensor,
    pub frame_shift_ms: f64,
    pub kind: FeatureKind,
}

impl FeatureSequence {
    pub fn new(frames: Tensor, frame_shift_ms: f64, kind: FeatureKind) -> Result<Self> {
        if frames.rows() == 0 || frames.cols() == 0 {
            return Err(Error::InvalidArgument(format!("feature matrix must be non-empty, got {:?}", frames.shape())));
        }
        if !frames.is_finite() {
            return Err(Error::InvalidArgument("feature matrix contains non-finite values".into()));
        }
        Ok(FeatureSequence { frames, frame_shift_ms, kind })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }
}

/// Squared-magnitude DFT of each windowed frame; frames are zero-padded to `n_fft`.
pub fn power_spectrogram(w: &Waveform, cfg: &FeatureConfig) -> Result<Tensor> {
    cfg.validate()?;
    let len = cfg.frame_length(w.sample_rate_hz);
    let shift = cfg.frame_shift(w.sample_rate_hz);
    if len > cfg.n_fft {
        return Err(Error::FeatureConfig(format!("frame of {len} samples does not fit n_fft {}", cfg.n_fft)));
    }
    if len == 0 || shift == 0 {
        return Err(Error::FeatureConfig("frame length/shift round to zero samples".into()));
    }
    let n_frames = cfg.num_frames(w.len(), w.sample_rate_hz);
    if n_frames == 0 {
        return Err(Error::TooShort { samples: w.len(), frame_len: len });
    }
    let window = cfg.window.coefficients(len);
    let n_bins = cfg.n_fft / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    let mut out = Tensor::zeros(n_frames, n_bins);
    for t in 0..n_frames {
        let frame = &w.samples[t * shift..t * shift + len];
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, (&s, &wv)) in frame.iter().zip(&window).enumerate() {
            buf[i].re = s * wv;
        }
        fft.process(&mut buf);
        for (k, o) in out.row_mut(t).iter_mut().enumerate() {
            *o = buf[k].norm_sqr();
        }
    }
    Ok(out)
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// `n_mels × (n_fft/2+1)` triangular filters, equally spaced on the mel scale
/// from 0 Hz to Nyquist, with weights linear in mel.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32) -> Result<Tensor> {
    let n_bins = n_fft / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2).map(|i| mel_max * i as f64 / (n_mels + 1) as f64).collect();
    let bin_mel: Vec<f64> = (0..n_bins).map(|k| hz_to_mel(k as f64 * sample_rate as f64 / n_fft as f64)).collect();
    let mut fb = Tensor::zeros(n_mels, n_bins);
    for m in 0..n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = fb.row_mut(m);
        for (k, &mel) in bin_mel.iter().enumerate() {
            row[k] = if mel > lo && mel <= mid {
                (mel - lo) / (mid - lo)
            } else if mel > mid && mel < hi {
                (hi - mel) / (hi - mid)
            } else {
                0.0
            };
        }
        if row.iter().all(|&v| v == 0.0) {
            return Err(Error::FeatureConfig(format!(
                "mel filter {m} of {n_mels} covers no FFT bin at n_fft {n_fft}; use fewer mels or a larger n_fft"
            )));
        }
    }
    Ok(fb)
}

/// Natural log of floored mel filter energies; `D = n_mels`.
pub fn log_mel_fbank(spec: &Tensor, cfg: &FeatureConfig, sample_rate: u32) -> Result<FeatureSequence> {
    cfg.validate()?;
    let n_bins = cfg.n_fft / 2 + 1;
    if spec.cols() != n_bins {
        return Err(Error::shape("log_mel_fbank", format!("spectrogram has {} bins, expected {n_bins}", spec.cols())));
    }
    let fb = mel_filterbank(cfg.n_mels, cfg.n_fft, sample_rate)?;
    let mut out = Tensor::zeros(spec.rows(), cfg.n_mels);
    for t in 0..spec.rows() {
        let frame = spec.row(t);
        for m in 0..cfg.n_mels {
            let e: f64 = fb.row(m).iter().zip(frame).map(|(w, p)| w * p).sum();
            out.set(t, m, e.max(cfg.log_floor).ln());
        }
    }
    FeatureSequence::new(out, cfg.frame_shift_ms, FeatureKind::LogFbank)
}

/// Orthonormal DCT-II basis, `n_out × n_in`.
pub fn dct_matrix(n_out: usize, n_in: usize) -> Tensor {
    let mut m = Tensor::zeros(n_out, n_in);
    for k in 0..n_out {
        let s = if k == 0 { (1.0 / n_in as f64).sqrt() } else { (2.0 / n_in as f64).sqrt() };
        for n in 0..n_in {
            m.set(k, n, s * (PI * k as f64 * (2 * n + 1) as f64 / (2 * n_in) as f64).cos());
        }
    }
    m
}

/// Per-frame orthonormal DCT-II, keeping the first `n_mfcc` coefficients.
pub fn mfcc(fb: &FeatureSequence, n_mfcc: usize) -> Result<FeatureSequence> {
    if fb.kind != FeatureKind::LogFbank {
        return Err(Error::FeatureKind { expected: "log_fbank", found: fb.kind.as_str() });
    }
    let d = fb.dim();
    if n_mfcc == 0 || n_mfcc > d {
        return Err(Error::FeatureConfig(format!("n_mfcc {n_mfcc} exceeds input dimension {d}")));
    }
    let basis = dct_matrix(n_mfcc, d);
    let mut out = Tensor::zeros(fb.num_frames(), n_mfcc);
    for t in 0..fb.num_frames() {
        let x = fb.frames.row(t);
        for k in 0..n_mfcc {
            out.set(t, k, basis.row(k).iter().zip(x).map(|(b, v)| b * v).sum());
        }
    }
    FeatureSequence::new(out, fb.frame_shift_ms, FeatureKind::Mfcc)
}

/// Per-utterance, per-dimension standardization with population variance.
pub fn cmvn(fs: &FeatureSequence) -> Result<FeatureSequence> {
    let t = fs.num_frames();
    if t < 2 {
        return Err(Error::InvalidArgument(format!("cmvn needs at least 2 frames, got {t}")));
    }
    let d = fs.dim();
    let mut out = fs.frames.clone();
    for j in 0..d {
        let mean = (0..t).map(|r| fs.frames.get(r, j)).sum::<f64>() / t as f64;
        let var = (0..t).map(|r| (fs.frames.get(r, j) - mean).powi(2)).sum::<f64>() / t as f64;
        let sd = var.max(CMVN_VAR_FLOOR).sqrt();
        for r in 0..t {
            out.set(r, j, (fs.frames.get(r, j) - mean) / sd);
        }
    }
    FeatureSequence::new(out, fs.frame_shift_ms, fs.kind)
}

/// Full front end as configured, without normalization.
pub fn extract(w: &Waveform, cfg: &FeatureConfig) -> Result<FeatureSequence> {
    let spec = power_spectrogram(w, cfg)?;
    let fb = log_mel_fbank(&spec, cfg, w.sample_rate_hz)?;
    match cfg.kind {
        FeatureKind::LogFbank => Ok(fb),
        FeatureKind::Mfcc => mfcc(&fb, cfg.n_mfcc),
    }
}

/// [`extract`] followed by [`cmvn`]: the model-input representation.
pub fn model_input(w: &Waveform, cfg: &FeatureConfig) -> Result<FeatureSequence> {
    cmvn(&extract(w, cfg)?)
}
