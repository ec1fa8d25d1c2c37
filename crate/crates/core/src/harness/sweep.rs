use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::config::{AugmentMode, ExperimentConfig};
use super::data::Corpus;
use super::train::{train_corpus, RunFiles, TrainLog, TrainOutcome};
use crate::error::{Error, Result};

pub const BETA_GRID: [f64; 4] = [0.0, 0.3, 0.5, 0.7];
pub const TAU_GRID: [f64; 4] = [0.0, 0.15, 0.20, 0.30];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Multi-task weight of the CTC term.
    Beta,
    /// Mixed proportion of each batch; forces `augment.mode = mixspeech`.
    Tau,
}

impl SweepParam {
    pub fn default_grid(self) -> &'static [f64] {
        match self {
            SweepParam::Beta => &BETA_GRID,
            SweepParam::Tau => &TAU_GRID,
        }
    }

    /// Copy of `cfg` with this parameter set to `value` and the seed replaced.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64, seed: u64) -> Result<ExperimentConfig> {
        let mut c = cfg.clone();
        match self {
            SweepParam::Beta => c.train.beta = value,
            SweepParam::Tau => {
                c.augment.mode = AugmentMode::MixSpeech;
                c.augment.tau = value;
            }
        }
        c.train.seed = seed;
        c.validate()?;
        Ok(c)
    }

    fn label(self) -> &'static str {
        match self {
            SweepParam::Beta => "β",
            SweepParam::Tau => "τ",
        }
    }

    fn format_value(self, v: f64) -> String {
        match self {
            SweepParam::Beta => format!("{v}"),
            SweepParam::Tau => format!("{}%", fmt_g(v * 100.0)),
        }
    }
}

fn fmt_g(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    format!("{r}")
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Beta => "beta",
            SweepParam::Tau => "tau",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(SweepParam::Beta),
            "tau" => Ok(SweepParam::Tau),
            _ => Err(Error::Config(format!("unknown sweep parameter {s:?}; expected beta or tau"))),
        }
    }
}

#[derive(Debug)]
pub struct SweepRun {
    pub value: f64,
    pub seed: u64,
    pub outcome: TrainOutcome,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub param: SweepParam,
    pub metric: &'static str,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `errors[v][s]`: best dev error (percent) for value `v`, seed `s`.
    pub errors: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
}

impl SweepTable {
    /// Two aligned rows, e.g. `β  0  0.3` over `PER  26.6%  23.0%`.
    pub fn format_table(&self) -> String {
        let mut top = vec![self.param.label().to_string()];
        let mut bottom = vec![self.metric.to_string()];
        top.extend(self.values.iter().map(|&v| self.param.format_value(v)));
        bottom.extend(self.medians.iter().map(|m| format!("{m:.1}%")));
        let widths: Vec<usize> =
            top.iter().zip(&bottom).map(|(a, b)| a.chars().count().max(b.chars().count())).collect();
        let row = |cells: &[String]| {
            let padded: Vec<String> =
                cells.iter().zip(&widths).map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
            padded.join("  ").trim_end().to_string()
        };
        format!("{}\n{}\n", row(&top), row(&bottom))
    }

    /// One row per (value, seed) plus a median row per value.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{}\tseed\t{}\n", self.param, self.metric.to_lowercase());
        for (i, &v) in self.values.iter().enumerate() {
            for (j, &s) in self.seeds.iter().enumerate() {
                out.push_str(&format!("{v}\t{s}\t{}\n", self.errors[i][j]));
            }
            out.push_str(&format!("{v}\tmedian\t{}\n", self.medians[i]));
        }
        out
    }
}

/// Median; the mean of the middle two for an even count.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of nothing");
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Trains one run per (value, seed) on `corpus` and tabulates the median best dev error.
///
/// With `out_dir`, each run writes its log, config and checkpoint to `<param>=<value>/seed=<seed>/`.
pub fn sweep_corpus(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    param: SweepParam,
    values: &[f64],
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<(SweepTable, Vec<SweepRun>)> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one value and one seed".into()));
    }
    let configs = values
        .iter()
        .map(|&v| seeds.iter().map(|&s| param.apply(cfg, v, s)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for (row, &v) in configs.iter().zip(values) {
        let mut errs = Vec::new();
        for (c, &s) in row.iter().zip(seeds) {
            let outcome = match out_dir {
                Some(dir) => {
                    let d = dir.join(format!("{param}={v}")).join(format!("seed={s}"));
                    fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
                    let files = RunFiles::in_dir(&d);
                    fs::write(&files.config, c.to_text()).map_err(|e| Error::io(&files.config, e))?;
                    let o = train_corpus(c, corpus, TrainLog::to_file(&files.log)?)?;
                    o.checkpoint.save(&files.checkpoint)?;
                    o
                }
                None => train_corpus(c, corpus, TrainLog::new())?,
            };
            errs.push(outcome.best_dev_error);
            runs.push(SweepRun { value: v, seed: s, outcome });
        }
        errors.push(errs);
    }
    let medians = errors.iter().map(|e| median(e)).collect();
    let table = SweepTable {
        param,
        metric: corpus.vocab.unit().metric_name(),
        values: values.to_vec(),
        seeds: seeds.to_vec(),
        errors,
        medians,
    };
    Ok((table, runs))
}

/// Loads the corpus named by `cfg`, sweeps, and writes `sweep_<param>.txt` / `.tsv` when `out_dir` is given.
pub fn sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<SweepTable> {
    let corpus = Corpus::load(cfg)?;
    let (table, _) = sweep_corpus(cfg, &corpus, param, values, seeds, out_dir)?;
    if let Some(dir) = out_dir {
        let txt = dir.join(format!("sweep_{param}.txt"));
        fs::write(&txt, table.format_table()).map_err(|e| Error::io(&txt, e))?;
        let tsv = dir.join(format!("sweep_{param}.tsv"));
        fs::write(&tsv, table.to_tsv()).map_err(|e| Error::io(&tsv, e))?;
    }
    Ok(table)
}
