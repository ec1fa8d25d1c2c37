//! Alignment counts and pooled error rates.

use mixspeech::decode::{corpus_error_rate, edit_distance};

fn main() -> mixspeech::Result<()> {
    let reference: Vec<&str> = "the cat sat on the mat".split(' ').collect();
    let hyp: Vec<&str> = "the cat sat at mat today".split(' ').collect();
    let c = edit_distance(&hyp, &reference);
    println!(
        "S={} D={} I={} over N={} -> WER {:.1}%",
        c.substitutions,
        c.deletions,
        c.insertions,
        c.ref_len,
        c.percent()?
    );

    let pairs = vec![(vec!['a', 'b', 'c'], vec!['a', 'b', 'c']), (vec!['b'], vec!['a', 'b', 'c', 'd'])];
    println!("pooled character error rate: {:.1}%", corpus_error_rate(&pairs)?);
    Ok(())
}
