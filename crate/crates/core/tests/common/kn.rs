//! Modified Kneser–Ney computed straight from the definitions by scanning
//! the padded corpus for every query. Slow, but shares nothing with the
//! library implementation beyond the token conventions.

use std::collections::BTreeSet;

pub struct KnReference {
    trigrams: Vec<[String; 3]>,
    vocab: Vec<String>,
    d: [[f64; 3]; 3],
}

fn discounts(counts: &[usize]) -> [f64; 3] {
    let n = |k: usize| counts.iter().filter(|&&c| c == k).count() as f64;
    let (n1, n2, n3, n4) = (n(1), n(2), n(3), n(4));
    let y = n1 / (n1 + 2.0 * n2);
    let ok = |d: f64| if d.is_finite() && d > 0.0 { d } else { 0.75 };
    [
        ok(1.0 - 2.0 * y * n2 / n1),
        ok(2.0 - 3.0 * y * n3 / n2),
        ok(3.0 - 4.0 * y * n4 / n3),
    ]
}

fn d_of(d: &[f64; 3], c: usize) -> f64 {
    d[c.min(3) - 1]
}

impl KnReference {
    pub fn new(corpus: &[Vec<&str>], unk_max_count: usize) -> Self {
        let freq = |w: &str| corpus.iter().flatten().filter(|&&x| x == w).count();
        let map = |w: &str| {
            if freq(w) > unk_max_count {
                w.to_string()
            } else {
                "<unk>".to_string()
            }
        };
        let mut trigrams = Vec::new();
        for s in corpus {
            let mut p = vec!["<s>".to_string(), "<s>".to_string()];
            p.extend(s.iter().map(|w| map(w)));
            p.push("</s>".to_string());
            for t in p.windows(3) {
                trigrams.push([t[0].clone(), t[1].clone(), t[2].clone()]);
            }
        }
        let mut vocab: BTreeSet<String> = corpus.iter().flatten().map(|w| map(w)).collect();
        vocab.insert("</s>".into());
        vocab.insert("<unk>".into());
        let mut r = KnReference {
            trigrams,
            vocab: vocab.into_iter().collect(),
            d: [[0.0; 3]; 3],
        };
        let tri_types: BTreeSet<_> = r.trigrams.iter().cloned().collect();
        let tri_counts: Vec<usize> = tri_types.iter().map(|t| r.c3(&t[0], &t[1], &t[2])).collect();
        let bi_types: BTreeSet<_> = tri_types.iter().map(|t| (t[1].clone(), t[2].clone())).collect();
        let bi_counts: Vec<usize> = bi_types.iter().map(|(v, w)| r.c2(v, w)).collect();
        let uni_types: BTreeSet<_> = bi_types.iter().map(|(_, w)| w.clone()).collect();
        let uni_counts: Vec<usize> = uni_types.iter().map(|w| r.c1(w)).collect();
        r.d = [discounts(&uni_counts), discounts(&bi_counts), discounts(&tri_counts)];
        r
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn discounts(&self) -> [[f64; 3]; 3] {
        self.d
    }

    fn norm(&self, w: &str) -> String {
        if w == "<s>" || self.vocab.iter().any(|v| v == w) {
            w.to_string()
        } else {
            "<unk>".to_string()
        }
    }

    fn c3(&self, u: &str, v: &str, w: &str) -> usize {
        self.trigrams.iter().filter(|t| t[0] == u && t[1] == v && t[2] == w).count()
    }

    fn c2(&self, v: &str, w: &str) -> usize {
        self.trigrams
            .iter()
            .filter(|t| t[1] == v && t[2] == w)
            .map(|t| &t[0])
            .collect::<BTreeSet<_>>()
            .len()
    }

    fn c1(&self, w: &str) -> usize {
        self.trigrams
            .iter()
            .filter(|t| t[2] == w)
            .map(|t| &t[1])
            .collect::<BTreeSet<_>>()
            .len()
    }

    fn all_words(&self) -> Vec<String> {
        let mut v = self.vocab.clone();
        v.push("<s>".into());
        v
    }

    /// `(Σ discounted counts, total, γ)` style interpolation given a count function.
    fn interpolate(&self, d: &[f64; 3], counts: Vec<(String, usize)>, w: &str, lower: f64) -> f64 {
        let total: usize = counts.iter().map(|(_, c)| c).sum();
        if total == 0 {
            return lower;
        }
        let mut gamma = 0.0;
        let mut own = 0.0;
        for (x, c) in &counts {
            if *c > 0 {
                gamma += d_of(d, *c);
                if x == w {
                    own = (*c as f64 - d_of(d, *c)).max(0.0);
                }
            }
        }
        own / total as f64 + gamma / total as f64 * lower
    }

    pub fn p1(&self, w: &str) -> f64 {
        let w = self.norm(w);
        if w == "<s>" {
            return 0.0;
        }
        let counts = self.all_words().into_iter().map(|x| {
            let c = self.c1(&x);
            (x, c)
        });
        self.interpolate(&self.d[0], counts.collect(), &w, 1.0 / self.vocab.len() as f64)
    }

    pub fn p2(&self, w: &str, v: &str) -> f64 {
        let (w, v) = (self.norm(w), self.norm(v));
        let counts = self.all_words().into_iter().map(|x| {
            let c = self.c2(&v, &x);
            (x, c)
        });
        self.interpolate(&self.d[1], counts.collect(), &w, self.p1(&w))
    }

    pub fn p3(&self, w: &str, u: &str, v: &str) -> f64 {
        let (w, u, v) = (self.norm(w), self.norm(u), self.norm(v));
        let counts = self.all_words().into_iter().map(|x| {
            let c = self.c3(&u, &v, &x);
            (x, c)
        });
        self.interpolate(&self.d[2], counts.collect(), &w, self.p2(&w, &v))
    }

    /// Natural-log probability of a padded sentence.
    pub fn score(&self, tokens: &[&str]) -> f64 {
        let mut p = vec!["<s>", "<s>"];
        p.extend_from_slice(tokens);
        p.push("</s>");
        p.windows(3).map(|t| self.p3(t[2], t[0], t[1]).ln()).sum()
    }
}
