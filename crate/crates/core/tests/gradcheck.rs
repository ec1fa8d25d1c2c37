//! Every tape primitive and the whole multi-task loss against central finite
//! differences.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{op_gradient_error, primitive_cases, random_tensor, relative_error, whole_model_errors, H};
use mixspeech::nn::{Family, Tape};

#[test]
fn primitives_match_finite_differences() {
    for (name, inputs, op) in primitive_cases() {
        let err = op_gradient_error(&inputs, op.as_ref());
        assert!(err < 1e-5, "{name}: relative error {err:.3e}");
    }
}

#[test]
fn dropout_gradient_uses_the_same_mask() {
    let x = random_tensor(5, 7, &mut ChaCha8Rng::seed_from_u64(11));
    let f = |x: &mixspeech::tensor::Tensor| {
        // Same seed, same mask.
        let mut tape = Tape::training(4);
        let v = tape.leaf(x.clone());
        let d = tape.dropout(v, 0.3).unwrap();
        let sq = tape.mul(d, d).unwrap();
        let s = tape.sum(sq).unwrap();
        let g = tape.backward(s).unwrap()[v.index()].clone().unwrap();
        (tape.value(s).item(), g)
    };
    let (_, analytic) = f(&x);
    let mut numeric = vec![0.0; x.len()];
    for (i, n) in numeric.iter_mut().enumerate() {
        let mut p = x.clone();
        p.data_mut()[i] += H;
        let mut m = x.clone();
        m.data_mut()[i] -= H;
        *n = (f(&p).0 - f(&m).0) / (2.0 * H);
    }
    assert!(relative_error(analytic.data(), &numeric) < 1e-5);
}

#[test]
fn transformer_loss_gradient() {
    for (name, err) in whole_model_errors(Family::TransformerMini) {
        assert!(err < 1e-4, "{name}: relative error {err:.3e}");
    }
}

#[test]
fn las_loss_gradient() {
    for (name, err) in whole_model_errors(Family::LasMini) {
        assert!(err < 1e-4, "{name}: relative error {err:.3e}");
    }
}
