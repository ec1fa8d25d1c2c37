use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::Waveform;

pub const DEFAULT_SNR_DB: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePolicy {
    pub snr_db: f64,
}

impl Default for NoisePolicy {
    fn default() -> Self {
        NoisePolicy { snr_db: DEFAULT_SNR_DB }
    }
}

/// Noise variance that puts white noise `snr_db` below a signal of power `signal_power`.
pub fn noise_variance(signal_power: f64, snr_db: f64) -> f64 {
    signal_power / 10f64.powf(snr_db / 10.0)
}

/// Adds white Gaussian noise at the policy SNR, then clips to [-1, 1].
pub fn add_noise<R: Rng + ?Sized>(w: &Waveform, policy: &NoisePolicy, rng: &mut R) -> Result<Waveform> {
    if !policy.snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("SNR must be finite, got {}", policy.snr_db)));
    }
    let power = w.power();
    if power <= 0.0 {
        return Err(Error::InvalidArgument("SNR is undefined for a silent waveform".into()));
    }
    let sd = noise_variance(power, policy.snr_db).sqrt();
    let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let samples = w.samples.iter().map(|s| (s + normal.sample(rng)).clamp(-1.0, 1.0)).collect();
    Waveform::new(samples, w.sample_rate_hz)
}

#[cfg(test)]
mod tests {
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn sine(amp: f64) -> Waveform {
        let s = (0..16000).map(|i| amp * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16000.0).sin()).collect();
        Waveform::new(s, 16000).unwrap()
    }

    #[test]
    fn five_db_ratio() {
        assert!((noise_variance(1.0, 5.0) - 1.0 / 3.1622776601683795).abs() < 1e-12);
    }

    #[test]
    fn silent_input_is_rejected() {
        let w = Waveform::new(vec![0.0; 100], 16000).unwrap();
        assert!(add_noise(&w, &NoisePolicy::default(), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn high_snr_is_nearly_transparent() {
        let w = sine(0.5);
        let y = add_noise(&w, &NoisePolicy { snr_db: 100.0 }, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let rms = (w.samples.iter().zip(&y.samples).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 16000.0).sqrt();
        assert!(rms < 1e-3);
    }

    #[test]
    fn output_is_clipped() {
        let w = sine(0.99);
        let y = add_noise(&w, &NoisePolicy { snr_db: -10.0 }, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(y.samples.iter().all(|s| (-1.0..=1.0).contains(s)));
    }
}
