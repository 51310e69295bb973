#![allow(dead_code)]

pub mod kn;

use derivgen::data::{EmbeddingTable, Instance};
use derivgen::encoder::VariantConfig;
use derivgen::model::{Model, ModelConfig};
use derivgen::param::ParamStore;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPS: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
/// Denominator floor for the relative error. Central differences on a loss
/// of magnitude ~20 carry roughly 1e-16 * 20 / 1e-5 ≈ 2e-10 of rounding
/// noise, so entries with |gradient| below the floor are compared on an
/// absolute scale of 1e-4 * 1e-5 = 1e-9, still five times above that noise.
pub const FD_FLOOR: f64 = 1e-5;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FD_FLOOR)
}

#[derive(Debug, Default)]
pub struct FdReport {
    pub checked: usize,
    /// Entries whose ±ε interval crosses a ReLU or max switch; these are
    /// compared against the one-sided difference on the unswitched side.
    pub one_sided: usize,
    /// Entries where both sides switch branch, so no difference is valid.
    pub unverifiable: usize,
    pub max_rel: f64,
    pub worst: String,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.max_rel < FD_TOL && self.unverifiable == 0
    }

    pub fn merge(&mut self, other: FdReport) {
        self.checked += other.checked;
        self.one_sided += other.one_sided;
        self.unverifiable += other.unverifiable;
        if other.max_rel > self.max_rel {
            self.max_rel = other.max_rel;
            self.worst = other.worst;
        }
    }
}

/// Compares the gradients already accumulated in `target`'s parameters
/// against finite differences of `eval` (loss, branch pattern) for every
/// scalar of every parameter.
///
/// Central differences are used whenever both perturbed passes stay on the
/// unperturbed pass's branch pattern, i.e. the loss is smooth over the whole
/// interval. Otherwise the interval straddles a kink and the central
/// difference is meaningless, so the side that keeps the pattern is used.
pub fn fd_check<M>(
    target: &mut M,
    store: fn(&mut M) -> &mut ParamStore,
    mut eval: impl FnMut(&M) -> (f64, Vec<bool>),
) -> FdReport {
    let mut rep = FdReport::default();
    let (f0, p0) = eval(target);
    let ids: Vec<_> = store(target).ids().collect();
    for id in ids {
        let n = store(target).get(id).value.len();
        for k in 0..n {
            let orig = store(target).get(id).value.data()[k];
            store(target).get_mut(id).value.data_mut()[k] = orig + FD_EPS;
            let (up, pu) = eval(target);
            store(target).get_mut(id).value.data_mut()[k] = orig - FD_EPS;
            let (down, pd) = eval(target);
            // Second-order one-sided difference, using f(x ± 2ε) when that
            // point is still on the unperturbed branch.
            let mut one_sided = |sign: f64, f1: f64, target: &mut M| {
                store(target).get_mut(id).value.data_mut()[k] = orig + 2.0 * sign * FD_EPS;
                let (f2, p2) = eval(target);
                if p2 == p0 {
                    sign * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * FD_EPS)
                } else {
                    sign * (f1 - f0) / FD_EPS
                }
            };
            let numeric = match (pu == p0, pd == p0) {
                (true, true) => (up - down) / (2.0 * FD_EPS),
                (true, false) => {
                    rep.one_sided += 1;
                    one_sided(1.0, up, target)
                }
                (false, true) => {
                    rep.one_sided += 1;
                    one_sided(-1.0, down, target)
                }
                (false, false) => {
                    rep.unverifiable += 1;
                    store(target).get_mut(id).value.data_mut()[k] = orig;
                    continue;
                }
            };
            let p = store(target).get_mut(id);
            p.value.data_mut()[k] = orig;
            let analytic = p.grad.data()[k];
            let e = rel_err(analytic, numeric);
            rep.checked += 1;
            if e > rep.max_rel {
                rep.max_rel = e;
                rep.worst = format!("{}[{k}] analytic {analytic:e} numeric {numeric:e}", p.name);
            }
        }
    }
    rep
}

const WORDS: &[&str] = &["the", "a", "to", "his", "we", "saw", "it", "was", "then", "here"];
const LETTERS: &[char] = &['a', 'b', 'd', 'e', 'i', 'k', 'm', 'n', 'o', 'r', 's', 't'];

pub fn random_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| *LETTERS.choose(rng).unwrap()).collect()
}

/// 5-token contexts on both sides, a 4-character base and a short target.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let ctx = |rng: &mut ChaCha8Rng| {
        (0..5)
            .map(|_| WORDS.choose(rng).unwrap().to_string())
            .collect::<Vec<_>>()
    };
    let left = ctx(rng);
    let right = ctx(rng);
    let base = random_word(rng, 4);
    let extra = rng.gen_range(0..=3);
    let target = format!("{}{}", base, random_word(rng, extra));
    Instance {
        left,
        right,
        base,
        target,
        pos: if rng.gen_bool(0.5) { "NOUN" } else { "VERB" }.into(),
        suffix: "-x".into(),
    }
}

/// The gradient-check configuration: full variant at h=8, l=2, d_c=6.
pub fn small_config(variant: VariantConfig) -> ModelConfig {
    ModelConfig {
        variant,
        hidden: 8,
        layers: 2,
        char_dim: 6,
        word_dim: 6,
        pos_dim: 3,
        ..ModelConfig::default()
    }
}

/// Runs the full-model finite-difference check for one seed.
pub fn model_fd_check(seed: u64, variant: VariantConfig) -> FdReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = random_instance(&mut rng);
    let emb = EmbeddingTable::hashed(6, seed);
    let mut model = Model::for_instances(small_config(variant), std::slice::from_ref(&inst), seed).unwrap();
    model.accumulate_gradients(&inst, &emb).unwrap();
    fd_check(&mut model, Model::params_mut, |m| m.loss_with_pattern(&inst, &emb).unwrap())
}
