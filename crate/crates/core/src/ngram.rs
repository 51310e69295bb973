//! Interpolated modified Kneser–Ney trigram model and the rescoring baseline
//! that picks, among the known surface forms of a lemma, the one the language
//! model prefers in the sentence.
//!
//! Sentences are padded as `<s> <s> w1 … wn </s>`. The trigram order uses raw
//! counts; the bigram order uses continuation counts `N1+(• v w)` and the
//! unigram order `N1+(• w)` over bigram types. Each order has three
//! discounts `D1, D2, D3+` estimated from its counts-of-counts, and the
//! unigram distribution is interpolated with the uniform distribution over
//! the vocabulary (which includes `</s>` and `<unk>` but not `<s>`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Instance;
use crate::error::{Error, Result};
use crate::eval::Predictor;
use crate::model::Prediction;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

/// Discount used when an order's counts-of-counts leave a discount undefined.
pub const FALLBACK_DISCOUNT: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnConfig {
    /// Training words seen at most this many times become `<unk>`.
    pub unk_max_count: usize,
}

impl Default for KnConfig {
    fn default() -> Self {
        KnConfig { unk_max_count: 1 }
    }
}

/// Totals and type counts-by-frequency for one history.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct History {
    total: u64,
    /// Types following the history exactly once, twice, and three or more times.
    types: [u64; 3],
}

impl History {
    fn add(&mut self, count: u64) {
        self.total += count;
        self.types[bucket(count)] += 1;
    }

    fn gamma(&self, d: &[f64; 3]) -> f64 {
        (0..3).map(|k| d[k] * self.types[k] as f64).sum::<f64>() / self.total as f64
    }
}

fn bucket(count: u64) -> usize {
    (count.min(3) - 1) as usize
}

/// Chen–Goodman estimates from counts-of-counts `n[0..4] = n1..n4`.
pub fn modified_kn_discounts(n: [u64; 4]) -> [Option<f64>; 3] {
    let [n1, n2, n3, n4] = n.map(|x| x as f64);
    let y = n1 / (n1 + 2.0 * n2);
    let valid = |d: f64| (d.is_finite() && d > 0.0).then_some(d);
    [
        valid(1.0 - 2.0 * y * n2 / n1),
        valid(2.0 - 3.0 * y * n3 / n2),
        valid(3.0 - 4.0 * y * n4 / n3),
    ]
}

#[derive(Clone, Debug)]
pub struct KnLm {
    words: Vec<String>,
    ids: HashMap<String, u32>,
    trigrams: HashMap<(u32, u32, u32), u64>,
    bigrams: HashMap<(u32, u32), u64>,
    unigrams: Vec<u64>,
    tri_hist: HashMap<(u32, u32), History>,
    bi_hist: HashMap<u32, History>,
    uni_hist: History,
    /// `[unigram, bigram, trigram]` discounts.
    discounts: [[f64; 3]; 3],
}

fn counts_of_counts<'a>(counts: impl Iterator<Item = &'a u64>) -> [u64; 4] {
    let mut n = [0; 4];
    for &c in counts {
        if (1..=4).contains(&c) {
            n[c as usize - 1] += 1;
        }
    }
    n
}

fn order_discounts(order: usize, n: [u64; 4]) -> [f64; 3] {
    let est = modified_kn_discounts(n);
    let mut out = [FALLBACK_DISCOUNT; 3];
    for (k, d) in est.into_iter().enumerate() {
        match d {
            Some(d) => out[k] = d,
            None => log::warn!(
                "order {order}: discount D{} undefined from counts-of-counts {n:?}; using {FALLBACK_DISCOUNT}",
                k + 1
            ),
        }
    }
    out
}

/// Trains on tokenised sentences.
pub fn train_kn(corpus: &[Vec<String>], cfg: KnConfig) -> Result<KnLm> {
    if corpus.is_empty() {
        return Err(Error::EmptyDataset("language model corpus is empty".into()));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for s in corpus {
        for w in s {
            *freq.entry(w.as_str()).or_default() += 1;
        }
    }
    let kept: BTreeSet<&str> = freq
        .iter()
        .filter(|&(w, &c)| c > cfg.unk_max_count && ![BOS, EOS, UNK].contains(w))
        .map(|(&w, _)| w)
        .collect();
    let mut words: Vec<String> = vec![BOS.into(), EOS.into(), UNK.into()];
    words.extend(kept.iter().map(|w| w.to_string()));
    let ids: HashMap<String, u32> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as u32))
        .collect();

    let mut trigrams: HashMap<(u32, u32, u32), u64> = HashMap::new();
    for s in corpus {
        let mut padded = vec![BOS_ID, BOS_ID];
        padded.extend(s.iter().map(|w| ids.get(w.as_str()).copied().unwrap_or(UNK_ID)));
        padded.push(EOS_ID);
        for t in padded.windows(3) {
            *trigrams.entry((t[0], t[1], t[2])).or_default() += 1;
        }
    }
    let mut bigrams: HashMap<(u32, u32), u64> = HashMap::new();
    for &(_, v, w) in trigrams.keys() {
        *bigrams.entry((v, w)).or_default() += 1;
    }
    let mut unigrams = vec![0u64; words.len()];
    for &(_, w) in bigrams.keys() {
        unigrams[w as usize] += 1;
    }

    let mut tri_hist: HashMap<(u32, u32), History> = HashMap::new();
    for (&(u, v, _), &c) in &trigrams {
        tri_hist.entry((u, v)).or_default().add(c);
    }
    let mut bi_hist: HashMap<u32, History> = HashMap::new();
    for (&(v, _), &c) in &bigrams {
        bi_hist.entry(v).or_default().add(c);
    }
    let mut uni_hist = History::default();
    for &c in unigrams.iter().filter(|&&c| c > 0) {
        uni_hist.add(c);
    }

    let discounts = [
        order_discounts(1, counts_of_counts(unigrams.iter())),
        order_discounts(2, counts_of_counts(bigrams.values())),
        order_discounts(3, counts_of_counts(trigrams.values())),
    ];
    Ok(KnLm {
        words,
        ids,
        trigrams,
        bigrams,
        unigrams,
        tri_hist,
        bi_hist,
        uni_hist,
        discounts,
    })
}

impl KnLm {
    /// Predictable vocabulary: every word type plus `</s>` and `<unk>`.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.words[1..].iter().map(String::as_str)
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len() - 1
    }

    /// `[unigram, bigram, trigram]` × `[D1, D2, D3+]`.
    pub fn discounts(&self) -> [[f64; 3]; 3] {
        self.discounts
    }

    fn id(&self, w: &str) -> u32 {
        self.ids.get(w).copied().unwrap_or(UNK_ID)
    }

    fn discounted(&self, order: usize, count: u64) -> f64 {
        if count == 0 {
            0.0
        } else {
            (count as f64 - self.discounts[order][bucket(count)]).max(0.0)
        }
    }

    fn p1(&self, w: u32) -> f64 {
        if w == BOS_ID {
            return 0.0;
        }
        let h = &self.uni_hist;
        self.discounted(0, self.unigrams[w as usize]) / h.total as f64
            + h.gamma(&self.discounts[0]) / self.vocab_size() as f64
    }

    fn p2(&self, w: u32, v: u32) -> f64 {
        match self.bi_hist.get(&v) {
            None => self.p1(w),
            Some(h) => {
                let c = self.bigrams.get(&(v, w)).copied().unwrap_or(0);
                self.discounted(1, c) / h.total as f64 + h.gamma(&self.discounts[1]) * self.p1(w)
            }
        }
    }

    fn p3(&self, w: u32, u: u32, v: u32) -> f64 {
        match self.tri_hist.get(&(u, v)) {
            None => self.p2(w, v),
            Some(h) => {
                let c = self.trigrams.get(&(u, v, w)).copied().unwrap_or(0);
                self.discounted(2, c) / h.total as f64
                    + h.gamma(&self.discounts[2]) * self.p2(w, v)
            }
        }
    }

    /// Smoothed probability of `word` after `context` (oldest first). Only
    /// the last two context words are used; shorter contexts select the
    /// bigram or unigram distribution. Out-of-vocabulary words map to `<unk>`.
    pub fn prob(&self, word: &str, context: &[&str]) -> f64 {
        let w = self.id(word);
        match context {
            [] => self.p1(w),
            [v] => self.p2(w, self.id(v)),
            [.., u, v] => self.p3(w, self.id(u), self.id(v)),
        }
    }

    /// Natural-log probability of the padded sentence.
    pub fn score_sentence<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::EmptyDataset("cannot score an empty sentence".into()));
        }
        let mut ids = vec![BOS_ID, BOS_ID];
        ids.extend(tokens.iter().map(|t| self.id(t.as_ref())));
        ids.push(EOS_ID);
        Ok(ids
            .windows(3)
            .map(|t| self.p3(t[2], t[0], t[1]).ln())
            .sum())
    }

    /// Histories with at least one observation, as word lists (oldest first).
    pub fn observed_contexts(&self) -> Vec<Vec<&str>> {
        let w = |i: u32| self.words[i as usize].as_str();
        let mut out: Vec<Vec<&str>> = vec![vec![]];
        let mut bi: Vec<_> = self.bi_hist.keys().copied().collect();
        bi.sort_unstable();
        out.extend(bi.into_iter().map(|v| vec![w(v)]));
        let mut tri: Vec<_> = self.tri_hist.keys().copied().collect();
        tri.sort_unstable();
        out.extend(tri.into_iter().map(|(u, v)| vec![w(u), w(v)]));
        out
    }

    /// ARPA backoff representation: listed n-grams carry their interpolated
    /// log10 probability and histories carry log10 of their interpolation
    /// weight, so standard backoff scoring reproduces [`KnLm::prob`].
    pub fn to_arpa(&self) -> String {
        let w = |i: u32| self.words[i as usize].as_str();
        let bow1 = |v: u32| {
            self.bi_hist
                .get(&v)
                .map(|h| h.gamma(&self.discounts[1]).log10())
        };
        let bow2 = |u: u32, v: u32| {
            self.tri_hist
                .get(&(u, v))
                .map(|h| h.gamma(&self.discounts[2]).log10())
        };

        let mut bigrams: BTreeSet<(u32, u32)> = self.bigrams.keys().copied().collect();
        // Trigram histories need a bigram line to carry their weight.
        bigrams.extend(self.tri_hist.keys().copied());
        let mut trigrams: Vec<_> = self.trigrams.keys().copied().collect();
        trigrams.sort_unstable();

        let mut out = String::new();
        let _ = writeln!(out, "\\data\\");
        let _ = writeln!(out, "ngram 1={}", self.words.len());
        let _ = writeln!(out, "ngram 2={}", bigrams.len());
        let _ = writeln!(out, "ngram 3={}\n", trigrams.len());
        let line = |out: &mut String, p: f64, gram: &str, bow: Option<f64>| {
            let _ = match bow {
                Some(b) => writeln!(out, "{p}\t{gram}\t{b}"),
                None => writeln!(out, "{p}\t{gram}"),
            };
        };

        let _ = writeln!(out, "\\1-grams:");
        for i in 0..self.words.len() as u32 {
            let p = if i == BOS_ID { -99.0 } else { self.p1(i).log10() };
            line(&mut out, p, w(i), bow1(i));
        }
        let _ = writeln!(out, "\n\\2-grams:");
        for &(v, x) in &bigrams {
            let p = if x == BOS_ID { -99.0 } else { self.p2(x, v).log10() };
            line(&mut out, p, &format!("{} {}", w(v), w(x)), bow2(v, x));
        }
        let _ = writeln!(out, "\n\\3-grams:");
        for &(u, v, x) in &trigrams {
            line(
                &mut out,
                self.p3(x, u, v).log10(),
                &format!("{} {} {}", w(u), w(v), w(x)),
                None,
            );
        }
        let _ = writeln!(out, "\n\\end\\");
        out
    }
}

/// Base lemma → surface forms seen in training (always including the base).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationTable {
    forms: BTreeMap<String, BTreeSet<String>>,
}

impl DerivationTable {
    pub fn from_instances(train: &[Instance]) -> Self {
        let mut forms: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for inst in train {
            let e = forms.entry(inst.base.clone()).or_default();
            e.insert(inst.base.clone());
            e.insert(inst.target.clone());
        }
        DerivationTable { forms }
    }

    /// Sorted candidates for `base`; an unseen base yields only itself.
    pub fn candidates(&self, base: &str) -> Vec<String> {
        match self.forms.get(base) {
            Some(f) => f.iter().cloned().collect(),
            None => vec![base.to_owned()],
        }
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

/// The candidate whose filled-in sentence scores highest; ties go to the
/// lexicographically smallest candidate.
pub fn select_derivation<S: AsRef<str>>(
    lm: &KnLm,
    left: &[S],
    right: &[S],
    candidates: &[S],
) -> Result<String> {
    let mut sorted: Vec<&str> = candidates.iter().map(AsRef::as_ref).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(f64, &str)> = None;
    let mut tokens: Vec<&str> = Vec::with_capacity(left.len() + right.len() + 1);
    for cand in sorted {
        tokens.clear();
        tokens.extend(left.iter().map(AsRef::as_ref));
        tokens.push(cand);
        tokens.extend(right.iter().map(AsRef::as_ref));
        let score = lm.score_sentence(&tokens)?;
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, cand));
        }
    }
    best.map(|(_, c)| c.to_owned())
        .ok_or_else(|| Error::EmptyDataset("no candidate forms".into()))
}

/// Language-model rescoring over the training-data forms of each lemma.
pub struct KnBaseline {
    pub lm: KnLm,
    pub table: DerivationTable,
}

impl KnBaseline {
    /// Trains the language model on the training sentences with the gold
    /// forms in place.
    pub fn train(train: &[Instance], cfg: KnConfig) -> Result<Self> {
        let corpus: Vec<Vec<String>> = train
            .iter()
            .map(|i| {
                let mut s = i.left.clone();
                s.push(i.target.clone());
                s.extend(i.right.iter().cloned());
                s
            })
            .collect();
        Ok(KnBaseline {
            lm: train_kn(&corpus, cfg)?,
            table: DerivationTable::from_instances(train),
        })
    }
}

impl Predictor for KnBaseline {
    fn name(&self) -> String {
        "baseline".into()
    }

    fn predict(&self, inst: &Instance) -> Result<Prediction> {
        let cands = self.table.candidates(&inst.base);
        Ok(Prediction {
            form: select_derivation(&self.lm, &inst.left, &inst.right, &cands)?,
            truncated: false,
        })
    }

    fn supports_split_lexicon(&self) -> bool {
        false
    }
}
