//! Reverse-mode differentiation on the tape, checked against central
//! finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixspeech::nn::Tape;
use mixspeech::tensor::Tensor;

/// `mean(log_softmax(tanh(x·w)))` as a scalar function of `w`.
fn forward(x: &Tensor, w: &Tensor) -> mixspeech::Result<(Tape, mixspeech::nn::Var, mixspeech::nn::Var)> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let wv = tape.leaf(w.clone());
    let h = tape.matmul(xv, wv)?;
    let h = tape.tanh(h)?;
    let h = tape.log_softmax(h)?;
    let out = tape.mean(h)?;
    Ok((tape, wv, out))
}

fn main() -> mixspeech::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rand = |r, c| Tensor::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect());
    let x = rand(5, 7)?;
    let w = rand(7, 3)?;

    let (tape, wv, out) = forward(&x, &w)?;
    println!("f(w) = {:.6}, tape holds {} nodes", tape.value(out).item(), tape.len());
    let grads = tape.backward(out)?;
    let analytic = grads[wv.index()].clone().expect("w is on the path to the output");

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..w.len() {
        let mut plus = w.clone();
        plus.data_mut()[i] += h;
        let mut minus = w.clone();
        minus.data_mut()[i] -= h;
        let fp = forward(&x, &plus)?;
        let fm = forward(&x, &minus)?;
        let numeric = (fp.0.value(fp.2).item() - fm.0.value(fm.2).item()) / (2.0 * h);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12));
    }
    println!("worst relative error over {} weights: {worst:.2e}", w.len());
    Ok(())
}
