//! Synthetic derivation data with fully determined answers.
//!
//! Each invented stem appears with every suffix rule. The word right before
//! the slot is a cue that alone determines the rule (`the ___` takes
//! *-ation*, `to ___` keeps the verb, …), and derived forms are plain
//! concatenations, so a model that learns to copy the stem and read the cue
//! can reach perfect accuracy even on unseen stems.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Instance, NULL_SUFFIX};

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const CODAS: &[&str] = &["b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t"];
const FILLERS: &[&str] = &[
    "we", "saw", "that", "it", "was", "quite", "then", "really", "here", "now", "they", "said",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuffixRule {
    pub label: String,
    /// Appended to the stem.
    pub ending: String,
    /// Word immediately left of the slot.
    pub cue: String,
    pub pos: String,
}

impl SuffixRule {
    fn new(label: &str, ending: &str, cue: &str, pos: &str) -> Self {
        SuffixRule {
            label: label.into(),
            ending: ending.into(),
            cue: cue.into(),
            pos: pos.into(),
        }
    }

    /// Identity (verb kept), *-ation*, *-er* and *-ment*.
    pub fn standard() -> Vec<SuffixRule> {
        vec![
            SuffixRule::new(NULL_SUFFIX, "", "to", "VERB"),
            SuffixRule::new("-ation", "ation", "the", "NOUN"),
            SuffixRule::new("-er", "er", "a", "NOUN"),
            SuffixRule::new("-ment", "ment", "his", "NOUN"),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub stems: usize,
    pub rules: Vec<SuffixRule>,
    /// Sentences generated per (stem, rule).
    pub contexts_per_pair: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            stems: 40,
            rules: SuffixRule::standard(),
            contexts_per_pair: 3,
            seed: 7,
        }
    }
}

fn syllable(rng: &mut impl Rng) -> String {
    format!(
        "{}{}",
        ONSETS.choose(rng).unwrap(),
        VOWELS.choose(rng).unwrap()
    )
}

/// A pronounceable stem: two or three consonant–vowel syllables, usually
/// closed by a final consonant.
pub fn pronounceable(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(2..=3);
    let mut s: String = (0..n).map(|_| syllable(rng)).collect();
    if rng.gen_bool(0.7) {
        s.push_str(CODAS.choose(rng).unwrap());
    }
    s
}

/// `n` distinct pronounceable stems.
pub fn nonsense_stems(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let s = pronounceable(&mut rng);
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

/// Stems closed by a consonant so every rule is plain concatenation.
fn synth_stems(n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut s: String = (0..rng.gen_range(1..=2)).map(|_| syllable(rng)).collect();
        s.push_str(CODAS.choose(rng).unwrap());
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

/// Instances in (stem, rule, context) order.
pub fn generate(cfg: &SynthConfig) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stems = synth_stems(cfg.stems, &mut rng);
    let filler = |rng: &mut ChaCha8Rng| FILLERS.choose(rng).unwrap().to_string();
    let mut out = Vec::with_capacity(cfg.stems * cfg.rules.len() * cfg.contexts_per_pair);
    for stem in &stems {
        for rule in &cfg.rules {
            for _ in 0..cfg.contexts_per_pair {
                let left = vec![filler(&mut rng), filler(&mut rng), rule.cue.clone()];
                let right = vec![filler(&mut rng), filler(&mut rng)];
                out.push(Instance {
                    left,
                    right,
                    base: stem.clone(),
                    target: format!("{stem}{}", rule.ending),
                    pos: rule.pos.clone(),
                    suffix: rule.label.clone(),
                });
            }
        }
    }
    out
}
