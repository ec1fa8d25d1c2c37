use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;

use mixspeech::features::{encode_wav, parse_wav, read_wav, Waveform};
use mixspeech::harness::{read_manifest, synth_dataset, SynthConfig};
use mixspeech::Error;

/// Power at `n_bins` evenly spaced frequencies up to Nyquist, by direct summation.
fn power_spectrum(x: &[f64], sr: f64, n_bins: usize) -> Vec<f64> {
    (0..n_bins)
        .map(|b| {
            let f = b as f64 * (sr / 2.0) / n_bins as f64;
            let w = 2.0 * PI * f / sr;
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &s) in x.iter().enumerate() {
                re += s * (w * n as f64).cos();
                im -= s * (w * n as f64).sin();
            }
            (re * re + im * im) / x.len() as f64
        })
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig { n_utts: 12, ..Default::default() };
    let a = synth_dataset(&cfg, dir.path().join("a")).unwrap();
    let b = synth_dataset(&cfg, dir.path().join("b")).unwrap();
    for (x, y) in a.train.iter().chain(&a.dev).chain(&a.test).zip(b.train.iter().chain(&b.dev).chain(&b.test)) {
        assert_eq!(x.text, y.text);
        assert_eq!(fs::read(&x.wav_path).unwrap(), fs::read(&y.wav_path).unwrap());
    }
    let c = synth_dataset(&SynthConfig { seed: 2, ..cfg }, dir.path().join("c")).unwrap();
    assert_ne!(fs::read(&a.train[0].wav_path).unwrap(), fs::read(&c.train[0].wav_path).unwrap());
}

#[test]
fn transcripts_respect_length_range_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig { n_utts: 200, len_range: (3, 8), ..Default::default() };
    let out = synth_dataset(&cfg, dir.path().join("d")).unwrap();
    assert_eq!((out.train.len(), out.dev.len(), out.test.len()), (160, 20, 20));
    let all: Vec<_> = out.train.iter().chain(&out.dev).chain(&out.test).collect();
    assert!(all.iter().all(|u| (3..=8).contains(&u.text.chars().count())));
    assert!(all.iter().all(|u| u.text.chars().all(|c| ('a'..='h').contains(&c))));
    assert_eq!(read_manifest(&out.dev_manifest).unwrap(), out.dev);
}

#[test]
fn refuses_existing_directory() {
    let dir = tempfile::tempdir().unwrap();
    let err = synth_dataset(&SynthConfig::default(), dir.path()).unwrap_err();
    assert!(matches!(err, Error::OutputExists(_)));
}

#[test]
fn symbols_have_distinct_spectra() {
    for vocab_size in [8, 20] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig { n_utts: 8 * vocab_size, vocab_size, len_range: (1, 1), ..Default::default() };
        let out = synth_dataset(&cfg, dir.path().join("s")).unwrap();
        let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
        for u in out.train.iter().chain(&out.dev).chain(&out.test) {
            let w = read_wav(&u.wav_path).unwrap();
            let p = power_spectrum(&w.samples, w.sample_rate_hz as f64, 256);
            let e = sums.entry(u.text.clone()).or_insert((vec![0.0; p.len()], 0));
            e.0.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
            e.1 += 1;
        }
        assert_eq!(sums.len(), vocab_size, "every symbol should occur");
        let means: Vec<Vec<f64>> = sums.values().map(|(s, n)| s.iter().map(|v| v / *n as f64).collect()).collect();
        let mut worst: f64 = 0.0;
        for i in 0..means.len() {
            for j in i + 1..means.len() {
                worst = worst.max(cosine(&means[i], &means[j]));
            }
        }
        assert!(worst < 0.95, "vocab {vocab_size}: max cosine similarity {worst:.3}");
    }
}

#[test]
fn wav_files_agree_with_hound() {
    let dir = tempfile::tempdir().unwrap();
    let w = Waveform::new((0..500).map(|i| (i as f64 * 0.05).sin() * 0.9).collect(), 16000).unwrap();
    let path = dir.path().join("x.wav");
    fs::write(&path, encode_wav(&w)).unwrap();
    let mut reader = hound::WavReader::open(&path).unwrap();
    let spec = reader.spec();
    assert_eq!((spec.channels, spec.sample_rate, spec.bits_per_sample), (1, 16000, 16));
    let theirs: Vec<i16> = reader.samples::<i16>().map(Result::unwrap).collect();
    let ours = read_wav(&path).unwrap();
    assert_eq!(theirs.len(), ours.len());
    for (a, b) in theirs.iter().zip(&ours.samples) {
        assert_eq!(*a as f64 / 32768.0, *b);
    }

    // hound-written file with an odd sample rate
    let path = dir.path().join("y.wav");
    let spec = hound::WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut writer = hound::WavWriter::create(&path, spec).unwrap();
    for s in [-32768i16, -1, 0, 1, 32767] {
        writer.write_sample(s).unwrap();
    }
    writer.finalize().unwrap();
    let back = parse_wav(&fs::read(&path).unwrap()).unwrap();
    assert_eq!(back.sample_rate_hz, 8000);
    assert_eq!(back.samples, [-1.0, -1.0 / 32768.0, 0.0, 1.0 / 32768.0, 32767.0 / 32768.0]);
}
