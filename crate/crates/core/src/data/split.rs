use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Instance;
use crate::error::{Error, Result};

/// Whether test stems may also occur in training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconMode {
    Shared,
    Split,
}

impl std::str::FromStr for LexiconMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(LexiconMode::Shared),
            "split" => Ok(LexiconMode::Split),
            other => Err(Error::Config(format!(
                "unknown lexicon mode `{other}` (expected shared or split)"
            ))),
        }
    }
}

impl std::fmt::Display for LexiconMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LexiconMode::Shared => "shared",
            LexiconMode::Split => "split",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            dev: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.dev, self.test];
        if r.iter().any(|x| !(0.0..=1.0).contains(x)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must be in [0,1] and sum to 1, got {r:?}"
            )));
        }
        Ok(())
    }

    /// Sizes for `n` items; the remainder goes to test.
    fn sizes(&self, n: usize) -> (usize, usize) {
        let train = ((self.train * n as f64).round() as usize).min(n);
        let dev = ((self.dev * n as f64).round() as usize).min(n - train);
        (train, dev)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<Instance>,
    pub dev: Vec<Instance>,
    pub test: Vec<Instance>,
}

pub fn stems(instances: &[Instance]) -> HashSet<&str> {
    instances.iter().map(|i| i.base.as_str()).collect()
}

/// Shared mode shuffles instances and then moves any dev/test instance whose
/// stem is absent from train into train. Split mode partitions the stems.
pub fn split_dataset(
    instances: &[Instance],
    mode: LexiconMode,
    ratios: SplitRatios,
    seed: u64,
) -> Result<Split> {
    ratios.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        LexiconMode::Shared => {
            let mut idx: Vec<usize> = (0..instances.len()).collect();
            idx.shuffle(&mut rng);
            let (nt, nd) = ratios.sizes(idx.len());
            let mut train: Vec<usize> = idx[..nt].to_vec();
            let train_stems: HashSet<&str> =
                train.iter().map(|&i| instances[i].base.as_str()).collect();
            let keep = |part: &[usize], train: &mut Vec<usize>| -> Vec<usize> {
                let mut out = Vec::new();
                for &i in part {
                    if train_stems.contains(instances[i].base.as_str()) {
                        out.push(i);
                    } else {
                        train.push(i);
                    }
                }
                out
            };
            let dev = keep(&idx[nt..nt + nd], &mut train);
            let test = keep(&idx[nt + nd..], &mut train);
            let pick = |ids: &[usize]| ids.iter().map(|&i| instances[i].clone()).collect();
            Ok(Split {
                train: pick(&train),
                dev: pick(&dev),
                test: pick(&test),
            })
        }
        LexiconMode::Split => {
            let mut lemmas: Vec<&str> = instances
                .iter()
                .map(|i| i.base.as_str())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if lemmas.len() < 3 {
                return Err(Error::InsufficientData(format!(
                    "split lexicon needs at least 3 base lemmas, found {}",
                    lemmas.len()
                )));
            }
            lemmas.shuffle(&mut rng);
            let (nt, nd) = ratios.sizes(lemmas.len());
            let train_l: HashSet<&str> = lemmas[..nt].iter().copied().collect();
            let dev_l: HashSet<&str> = lemmas[nt..nt + nd].iter().copied().collect();
            let mut split = Split::default();
            for inst in instances {
                let b = inst.base.as_str();
                let dst = if train_l.contains(b) {
                    &mut split.train
                } else if dev_l.contains(b) {
                    &mut split.dev
                } else {
                    &mut split.test
                };
                dst.push(inst.clone());
            }
            Ok(split)
        }
    }
}
