//! Joint CTC-attention beam search on a briefly trained toy model, compared
//! with the two greedy decoders.

use mixspeech::decode::{beam_search_joint, encode_one, greedy_attention_decode, greedy_ctc_decode, BeamOptions};
use mixspeech::harness::{synth_dataset, train_corpus, Corpus, ExperimentConfig, SynthConfig, TrainLog};
use mixspeech::tensor::log_softmax_rows;

fn main() -> mixspeech::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let data = dir.path().join("data");
    synth_dataset(&SynthConfig { n_utts: 60, ..SynthConfig::default() }, &data)?;
    let mut cfg = ExperimentConfig::for_dataset(&data);
    cfg.train.epochs = 8;
    let corpus = Corpus::load(&cfg)?;
    let model = train_corpus(&cfg, &corpus, TrainLog::new())?.checkpoint.model;

    for u in corpus.test.iter().take(4) {
        let enc = encode_one(&model, &u.features.frames)?;
        let ctc = greedy_ctc_decode(&log_softmax_rows(&enc.ctc_logits));
        let (att, _) = greedy_attention_decode(&model, &enc.states, enc.states.rows())?;
        println!("{}  reference {:?}", u.id, corpus.vocab.decode(&u.tokens));
        println!("  greedy ctc        {:?}", corpus.vocab.decode(&ctc));
        println!("  greedy attention  {:?}", corpus.vocab.decode(&att));
        for beam in [1, 5, 20] {
            let res = beam_search_joint(&model, &u.features.frames, &BeamOptions { beam, ..BeamOptions::default() })?;
            println!(
                "  beam {beam:2}           {:?}  score {:.3}  ended {}",
                corpus.vocab.decode(&res.best.tokens),
                res.best.joint_score,
                res.ended
            );
        }
    }
    Ok(())
}
