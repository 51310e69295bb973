use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::pairs::{InflectionTable, LemmaPair};
use super::Instance;

pub const MIN_SENTENCE_LEN: usize = 3;
pub const MAX_SENTENCE_LEN: usize = 50;

/// One instance per occurrence of any inflected form of a pair's derived
/// lemma, in (sentence, token, pair) order. Sentences outside
/// `[MIN_SENTENCE_LEN, MAX_SENTENCE_LEN]` tokens are skipped.
pub fn extract_contexts(
    corpus: &[Vec<String>],
    pairs: &[LemmaPair],
    inflections: &InflectionTable,
) -> Vec<Instance> {
    let mut by_form: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, p) in pairs.iter().enumerate() {
        for form in inflections.forms_of(&p.derived) {
            let e = by_form.entry(form).or_default();
            if !e.contains(&i) {
                e.push(i);
            }
        }
    }
    let mut out = Vec::new();
    for sent in corpus {
        if !(MIN_SENTENCE_LEN..=MAX_SENTENCE_LEN).contains(&sent.len()) {
            continue;
        }
        for (k, tok) in sent.iter().enumerate() {
            let Some(ids) = by_form.get(tok) else { continue };
            for &i in ids {
                let p = &pairs[i];
                out.push(Instance {
                    left: sent[..k].to_vec(),
                    right: sent[k + 1..].to_vec(),
                    base: p.base.clone(),
                    target: tok.clone(),
                    pos: p.pos.as_str().to_owned(),
                    suffix: p.suffix.clone(),
                });
            }
        }
    }
    out
}

/// Number of instances kept from a group of `n`: `min(n, ⌈α·ln(1+n)⌉)`.
pub fn keep_count(n: usize, alpha: f64) -> usize {
    let cap = (alpha * (1.0 + n as f64).ln()).ceil();
    n.min(cap as usize)
}

/// Thins each (base, suffix, surface form) group to [`keep_count`] instances,
/// sampled uniformly with `seed`. Kept instances stay in input order.
pub fn dampen_contexts(instances: &[Instance], alpha: f64, seed: u64) -> Vec<Instance> {
    assert!(alpha > 0.0, "dampening weight must be positive");
    let mut order: Vec<(&str, &str, &str)> = Vec::new();
    let mut groups: HashMap<(&str, &str, &str), Vec<usize>> = HashMap::new();
    for (i, inst) in instances.iter().enumerate() {
        let key = (inst.base.as_str(), inst.suffix.as_str(), inst.target.as_str());
        let g = groups.entry(key).or_default();
        if g.is_empty() {
            order.push(key);
        }
        g.push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    for key in order {
        let members = &groups[&key];
        let k = keep_count(members.len(), alpha);
        if k == members.len() {
            kept.extend_from_slice(members);
        } else {
            kept.extend(sample(&mut rng, members.len(), k).into_iter().map(|j| members[j]));
        }
    }
    kept.sort_unstable();
    kept.into_iter().map(|i| instances[i].clone()).collect()
}
