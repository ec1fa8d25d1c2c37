use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::FeatureSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskFill {
    Zero,
    PerUtteranceMean,
}

impl FromStr for MaskFill {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(MaskFill::Zero),
            "mean" => Ok(MaskFill::PerUtteranceMean),
            other => Err(Error::InvalidArgument(format!("unknown mask fill `{other}` (zero|mean)"))),
        }
    }
}

impl fmt::Display for MaskFill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskFill::Zero => "zero",
            MaskFill::PerUtteranceMean => "mean",
        })
    }
}

/// Frequency/time masking policy (no time warping).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecAugmentPolicy {
    /// Maximum frequency-mask width `F`.
    pub freq_mask_width: usize,
    /// Number of frequency masks `m_F`.
    pub n_freq_masks: usize,
    /// Maximum time-mask width `T`.
    pub time_mask_width: usize,
    /// Number of time masks `m_T`.
    pub n_time_masks: usize,
    /// Upper bound `p` on a time mask as a fraction of the utterance.
    pub time_mask_upper: f64,
    pub fill: MaskFill,
}

impl Default for SpecAugmentPolicy {
    fn default() -> Self {
        SpecAugmentPolicy {
            freq_mask_width: 15,
            n_freq_masks: 2,
            time_mask_width: 40,
            n_time_masks: 2,
            time_mask_upper: 0.2,
            fill: MaskFill::PerUtteranceMean,
        }
    }
}

impl SpecAugmentPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.time_mask_upper) {
            return Err(Error::InvalidArgument(format!("time mask bound p={} outside [0, 1]", self.time_mask_upper)));
        }
        Ok(())
    }
}

/// Applies `m_F` frequency bands then `m_T` time bands; masks may overlap and
/// oversized widths are clamped to the matrix.
pub fn spec_augment<R: Rng + ?Sized>(x: &FeatureSequence, policy: &SpecAugmentPolicy, rng: &mut R) -> Result<FeatureSequence> {
    policy.validate()?;
    let (t_len, d) = (x.num_frames(), x.dim());
    let mut out = x.clone();
    let fill = match policy.fill {
        MaskFill::Zero => 0.0,
        MaskFill::PerUtteranceMean => x.frames.data().iter().sum::<f64>() / x.frames.len() as f64,
    };
    for _ in 0..policy.n_freq_masks {
        let f = rng.random_range(0..=policy.freq_mask_width).min(d);
        let f0 = rng.random_range(0..=d - f);
        for t in 0..t_len {
            out.frames.row_mut(t)[f0..f0 + f].iter_mut().for_each(|v| *v = fill);
        }
    }
    let max_t = policy.time_mask_width.min((policy.time_mask_upper * t_len as f64).floor() as usize);
    for _ in 0..policy.n_time_masks {
        let w = rng.random_range(0..=max_t).min(t_len);
        let t0 = rng.random_range(0..=t_len - w);
        for t in t0..t0 + w {
            out.frames.row_mut(t).iter_mut().for_each(|v| *v = fill);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::features::FeatureKind;
    use crate::tensor::Tensor;

    fn random_seq(t: usize, d: usize, seed: u64) -> FeatureSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..t * d).map(|_| rng.random_range(1.0..2.0)).collect();
        FeatureSequence::new(Tensor::from_vec(t, d, data).unwrap(), 10.0, FeatureKind::LogFbank).unwrap()
    }

    #[test]
    fn empty_policy_is_identity() {
        let x = random_seq(20, 8, 1);
        let policy = SpecAugmentPolicy { freq_mask_width: 0, n_time_masks: 0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(spec_augment(&x, &policy, &mut rng).unwrap(), x);
    }

    #[test]
    fn single_frequency_band() {
        let x = random_seq(30, 20, 4);
        let policy = SpecAugmentPolicy {
            freq_mask_width: 5,
            n_freq_masks: 1,
            time_mask_width: 0,
            n_time_masks: 0,
            fill: MaskFill::Zero,
            ..Default::default()
        };
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = spec_augment(&x, &policy, &mut rng).unwrap();
            let masked: Vec<usize> = (0..20).filter(|&j| (0..30).all(|t| y.frames.get(t, j) == 0.0)).collect();
            let touched: Vec<usize> = (0..20).filter(|&j| (0..30).any(|t| y.frames.get(t, j) != x.frames.get(t, j))).collect();
            assert_eq!(masked, touched);
            assert!(masked.len() <= 5);
            assert!(masked.windows(2).all(|w| w[1] == w[0] + 1), "band not contiguous: {masked:?}");
        }
    }

    #[test]
    fn shape_is_preserved_and_oversized_masks_clamp() {
        let x = random_seq(4, 3, 5);
        let policy = SpecAugmentPolicy {
            freq_mask_width: 50,
            n_freq_masks: 3,
            time_mask_width: 50,
            n_time_masks: 3,
            time_mask_upper: 1.0,
            fill: MaskFill::PerUtteranceMean,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let y = spec_augment(&x, &policy, &mut rng).unwrap();
            assert_eq!(y.frames.shape(), [4, 3]);
        }
    }

    #[test]
    fn invalid_upper_bound() {
        let x = random_seq(4, 3, 5);
        let policy = SpecAugmentPolicy { time_mask_upper: 1.5, ..Default::default() };
        assert!(spec_augment(&x, &policy, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
