use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::tensor::Tensor;
use crate::tokens::TokenSequence;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_TAU: f64 = 0.15;
const LAMBDA_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixWeight {
    pub lambda: f64,
    pub alpha: f64,
}

/// Draws λ ~ Beta(α, α), redrawing until it lies in `(1e-6, 1 − 1e-6)`.
pub fn sample_lambda<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<MixWeight> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("Beta concentration must be positive, got {alpha}")));
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    loop {
        let lambda = beta.sample(rng);
        if lambda > LAMBDA_MARGIN && lambda < 1.0 - LAMBDA_MARGIN {
            return Ok(MixWeight { lambda, alpha });
        }
    }
}

fn check_compatible(a: &FeatureSequence, b: &FeatureSequence) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape("mix", format!("feature dimensions {} and {}", a.dim(), b.dim())));
    }
    if a.kind != b.kind {
        return Err(Error::FeatureKind { expected: a.kind.as_str(), found: b.kind.as_str() });
    }
    Ok(())
}

/// Frame-wise convex combination `Σ wₖ·xₖ`, zero-padding every input to the
/// longest one.
fn weighted_padded_sum(inputs: &[(&FeatureSequence, f64)]) -> Result<FeatureSequence> {
    let first = inputs[0].0;
    for (x, _) in &inputs[1..] {
        check_compatible(first, x)?;
    }
    let t = inputs.iter().map(|(x, _)| x.num_frames()).max().unwrap_or(0);
    let mut out = Tensor::zeros(t, first.dim());
    for (x, w) in inputs {
        let n = x.frames.len();
        out.data_mut()[..n].iter_mut().zip(x.frames.data()).for_each(|(o, v)| *o += w * v);
    }
    FeatureSequence::new(out, first.frame_shift_ms, first.kind)
}

/// `λ·xᵢ + (1−λ)·xⱼ` frame by frame; the shorter input is zero-padded.
pub fn mix_inputs(x_i: &FeatureSequence, x_j: &FeatureSequence, lambda: f64) -> Result<FeatureSequence> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("mix weight {lambda} outside [0, 1]")));
    }
    weighted_padded_sum(&[(x_i, lambda), (x_j, 1.0 - lambda)])
}

/// Equal-weight mixture of three inputs.
pub fn tri_mix(x1: &FeatureSequence, x2: &FeatureSequence, x3: &FeatureSequence) -> Result<FeatureSequence> {
    let w = 1.0 / 3.0;
    weighted_padded_sum(&[(x1, w), (x2, w), (x3, w)])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixPair {
    pub anchor: usize,
    pub partner: usize,
    pub lambda: f64,
}

/// Which batch positions are mixed, with whom, and at what weight.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixPlan {
    pub pairs: Vec<MixPair>,
    /// Positions that are not anchors, in ascending order.
    pub plain: Vec<usize>,
}

/// Number of anchors for proportion `tau` of a batch of `b`: `round(tau·b)`, half up.
pub fn anchor_count(tau: f64, b: usize) -> usize {
    (tau * b as f64 + 0.5).floor() as usize
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("mix proportion tau={tau} outside [0, 1]")));
    }
    Ok(())
}

/// Chooses `round(tau·b)` anchors uniformly; each gets a distinct partner
/// different from itself, and its own λ ~ Beta(α, α).
pub fn plan_mix_batch<R: Rng + ?Sized>(b: usize, tau: f64, alpha: f64, rng: &mut R) -> Result<MixPlan> {
    check_tau(tau)?;
    let k = anchor_count(tau, b);
    if k == 0 {
        return Ok(MixPlan { pairs: Vec::new(), plain: (0..b).collect() });
    }
    if b < 2 {
        return Err(Error::InvalidArgument("mixing needs a batch of at least 2".into()));
    }
    let mut anchors = index::sample(rng, b, k).into_vec();
    anchors.sort_unstable();
    // rejection keeps the assignment uniform over all valid ones
    let partners = loop {
        let cand = index::sample(rng, b, k).into_vec();
        if cand.iter().zip(&anchors).all(|(p, a)| p != a) {
            break cand;
        }
    };
    let mut pairs = Vec::with_capacity(k);
    for (&anchor, &partner) in anchors.iter().zip(&partners) {
        let w = sample_lambda(alpha, rng)?;
        pairs.push(MixPair { anchor, partner, lambda: w.lambda });
    }
    let plain = (0..b).filter(|i| anchors.binary_search(i).is_err()).collect();
    Ok(MixPlan { pairs, plain })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriMixTriple {
    pub anchor: usize,
    pub partners: [usize; 2],
}

/// Tri-mixup plan: `round(tau·b)` anchors, each with two distinct partners
/// drawn uniformly from the rest of the batch.
pub fn plan_tri_mix<R: Rng + ?Sized>(b: usize, tau: f64, rng: &mut R) -> Result<(Vec<TriMixTriple>, Vec<usize>)> {
    check_tau(tau)?;
    let k = anchor_count(tau, b);
    if k == 0 {
        return Ok((Vec::new(), (0..b).collect()));
    }
    if b < 3 {
        return Err(Error::InvalidArgument("tri-mixup needs a batch of at least 3".into()));
    }
    let mut anchors = index::sample(rng, b, k).into_vec();
    anchors.sort_unstable();
    let triples = anchors
        .iter()
        .map(|&anchor| {
            let picks = index::sample(rng, b - 1, 2);
            let skip = |p: usize| if p >= anchor { p + 1 } else { p };
            TriMixTriple { anchor, partners: [skip(picks.index(0)), skip(picks.index(1))] }
        })
        .collect();
    let plain = (0..b).filter(|i| anchors.binary_search(i).is_err()).collect();
    Ok((triples, plain))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub features: FeatureSequence,
    pub tokens: TokenSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedExample {
    pub x_mix: FeatureSequence,
    pub y_i: TokenSequence,
    pub y_j: TokenSequence,
    pub lambda: f64,
    pub source_ids: (String, String),
}

/// Splits a batch into mixed pairs and pass-through examples.
pub fn make_mix_batch<R: Rng + ?Sized>(
    batch: &[Example],
    tau: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<(Vec<MixedExample>, Vec<Example>)> {
    let plan = plan_mix_batch(batch.len(), tau, alpha, rng)?;
    let mixed = plan
        .pairs
        .iter()
        .map(|p| {
            let (a, b) = (&batch[p.anchor], &batch[p.partner]);
            Ok(MixedExample {
                x_mix: mix_inputs(&a.features, &b.features, p.lambda)?,
                y_i: a.tokens.clone(),
                y_j: b.tokens.clone(),
                lambda: p.lambda,
                source_ids: (a.id.clone(), b.id.clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let plain = plan.plain.iter().map(|&i| batch[i].clone()).collect();
    Ok((mixed, plain))
}

#[cfg(test)]
mod tests {
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::features::FeatureKind;

    fn seq(rows: &[Vec<f64>]) -> FeatureSequence {
        FeatureSequence::new(Tensor::from_rows(rows).unwrap(), 10.0, FeatureKind::LogFbank).unwrap()
    }

    #[test]
    fn lambda_rejects_bad_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_lambda(0.0, &mut rng).is_err());
        assert!(sample_lambda(-1.0, &mut rng).is_err());
    }

    #[test]
    fn mix_endpoints_and_midpoint() {
        let a = seq(&[vec![2.0]]);
        let b = seq(&[vec![4.0]]);
        assert_eq!(mix_inputs(&a, &b, 0.5).unwrap().frames.to_rows(), vec![vec![3.0]]);
        assert_eq!(mix_inputs(&a, &b, 1.0).unwrap(), a);
        assert!(mix_inputs(&a, &b, 1.5).is_err());
    }

    #[test]
    fn mix_pads_the_shorter_sequence() {
        let xi = seq(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let xj_rows: Vec<Vec<f64>> = (0..5).map(|t| vec![10.0 * t as f64, -(t as f64)]).collect();
        let xj = seq(&xj_rows);
        let m = mix_inputs(&xi, &xj, 0.25).unwrap();
        assert_eq!(m.num_frames(), 5);
        for t in 0..3 {
            for d in 0..2 {
                let expect = 0.25 * xi.frames.get(t, d) + 0.75 * xj.frames.get(t, d);
                assert_eq!(m.frames.get(t, d), expect);
            }
        }
        for t in 3..5 {
            for d in 0..2 {
                assert_eq!(m.frames.get(t, d), 0.75 * xj.frames.get(t, d));
            }
        }
    }

    #[test]
    fn mix_rejects_dimension_mismatch() {
        let a = seq(&[vec![1.0, 2.0]]);
        let b = seq(&[vec![1.0]]);
        assert!(matches!(mix_inputs(&a, &b, 0.5), Err(Error::Shape { .. })));
        assert!(tri_mix(&a, &a, &b).is_err());
    }

    #[test]
    fn tri_mix_is_the_mean() {
        let m = tri_mix(&seq(&[vec![3.0]]), &seq(&[vec![6.0]]), &seq(&[vec![9.0]])).unwrap();
        assert_eq!(m.frames.to_rows(), vec![vec![6.0]]);
        let x = seq(&[vec![0.3, -1.2], vec![2.5, 4.0]]);
        let same = tri_mix(&x, &x, &x).unwrap();
        for (a, b) in same.frames.data().iter().zip(x.frames.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn anchor_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(plan_mix_batch(10, 0.0, 0.5, &mut rng).unwrap().pairs.len(), 0);
        assert_eq!(plan_mix_batch(20, 0.15, 0.5, &mut rng).unwrap().pairs.len(), 3);
        assert_eq!(anchor_count(0.15, 4), 1);
        assert_eq!(anchor_count(0.15, 2), 0);
        assert!(plan_mix_batch(4, 1.2, 0.5, &mut rng).is_err());
        assert!(plan_mix_batch(1, 1.0, 0.5, &mut rng).is_err());
    }

    #[test]
    fn full_mixing_is_a_derangement_over_many_seeds() {
        for seed in 0..300 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plan = plan_mix_batch(8, 1.0, 0.5, &mut rng).unwrap();
            assert_eq!(plan.pairs.len(), 8);
            assert!(plan.plain.is_empty());
            let mut partners: Vec<usize> = plan.pairs.iter().map(|p| p.partner).collect();
            assert!(plan.pairs.iter().all(|p| p.partner != p.anchor && p.lambda > 0.0 && p.lambda < 1.0));
            partners.sort_unstable();
            partners.dedup();
            assert_eq!(partners.len(), 8);
        }
    }

    #[test]
    fn tri_mix_partners_are_distinct() {
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (triples, plain) = plan_tri_mix(5, 0.6, &mut rng).unwrap();
            assert_eq!(triples.len(), 3);
            assert_eq!(plain.len(), 2);
            for t in triples {
                assert_ne!(t.partners[0], t.partners[1]);
                assert!(t.partners.iter().all(|&p| p != t.anchor && p < 5));
            }
        }
    }

    #[test]
    fn make_mix_batch_carries_targets_and_ids() {
        let batch: Vec<Example> = (0..4)
            .map(|i| Example {
                id: format!("u{i}"),
                features: seq(&vec![vec![i as f64]; i + 1]),
                tokens: TokenSequence::new(vec![3 + i]).unwrap(),
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mixed, plain) = make_mix_batch(&batch, 0.5, 0.5, &mut rng).unwrap();
        assert_eq!(mixed.len(), 2);
        assert_eq!(plain.len(), 2);
        for m in &mixed {
            let i: usize = m.source_ids.0[1..].parse().unwrap();
            let j: usize = m.source_ids.1[1..].parse().unwrap();
            assert_eq!(m.y_i.ids(), [3 + i]);
            assert_eq!(m.y_j.ids(), [3 + j]);
            assert_eq!(m.x_mix.num_frames(), i.max(j) + 1);
        }
    }
}
