//! CTC loss with its gradient, prefix scores, and greedy collapse on a small
//! random posterior matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixspeech::decode::{ctc_prefix_score, greedy_ctc_decode};
use mixspeech::losses::{collapse, ctc_loss, min_frames};
use mixspeech::tensor::{log_softmax_rows, Tensor};

fn main() -> mixspeech::Result<()> {
    let (t, v) = (6, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let logits = Tensor::from_vec(t, v, (0..t * v).map(|_| rng.random_range(-2.0..2.0)).collect())?;
    let lp = log_softmax_rows(&logits);

    let labels = [3, 3, 1];
    println!("labels {labels:?} need at least {} frames", min_frames(&labels));
    let out = ctc_loss(&lp, &labels);
    println!("ctc loss = {:.6} (p = {:.3e})", out.loss, (-out.loss).exp());
    // -d loss / d logprob is the state occupancy, so each row sums to -1.
    for r in 0..t {
        let s: f64 = out.grad.row(r).iter().sum();
        println!("  frame {r}: grad row sum {s:+.6}");
    }

    for prefix in [&[][..], &[3][..], &[3, 3][..], &[3, 3, 1][..]] {
        println!("prefix {prefix:?}: log p(prefix...) = {:.4}", ctc_prefix_score(&lp, prefix));
    }

    let infeasible = ctc_loss(&lp, &[1, 1, 1, 1]);
    println!("[1, 1, 1, 1] in {t} frames: feasible = {}, loss = {}", infeasible.feasible, infeasible.loss);

    let path = [0, 2, 2, 0, 2, 1];
    println!("collapse {path:?} -> {:?}", collapse(&path));
    println!("greedy decode of the random posteriors -> {:?}", greedy_ctc_decode(&lp).ids());
    Ok(())
}
