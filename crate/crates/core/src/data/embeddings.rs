use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where vectors come from; recorded in checkpoints so inference can rebuild
/// the same table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// Loaded from a text word-vector file.
    File { path: String },
    /// Every word gets a fixed pseudo-random vector derived from its spelling.
    Hashed { seed: u64 },
}

/// Fixed (never trained) word vectors with an UNK fallback.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    unk: Vec<f64>,
    source: EmbeddingSource,
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn hashed_vector(word: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(word) ^ seed.rotate_left(17));
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

impl EmbeddingTable {
    pub fn hashed(dim: usize, seed: u64) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            unk: vec![0.0; dim],
            source: EmbeddingSource::Hashed { seed },
        }
    }

    pub fn from_vectors(dim: usize, vectors: HashMap<String, Vec<f64>>, unk: Vec<f64>) -> Self {
        EmbeddingTable {
            dim,
            vectors,
            unk,
            source: EmbeddingSource::File {
                path: String::new(),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &EmbeddingSource {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        match self.source {
            EmbeddingSource::Hashed { .. } => true,
            EmbeddingSource::File { .. } => self.vectors.contains_key(word),
        }
    }

    pub fn unk(&self) -> &[f64] {
        &self.unk
    }

    pub fn lookup(&self, word: &str) -> Vec<f64> {
        match self.source {
            EmbeddingSource::Hashed { seed } => hashed_vector(word, self.dim, seed),
            EmbeddingSource::File { .. } => self
                .vectors
                .get(word)
                .unwrap_or(&self.unk)
                .clone(),
        }
    }

    /// Fixed vectors for the begin/end-of-sentence markers fed when a
    /// context side is empty.
    pub fn sentinel(&self, end: bool) -> Vec<f64> {
        hashed_vector(if end { "</s>" } else { "<s>" }, self.dim, 0x5e17)
    }
}

/// Reads `word v1 ... vd` lines (an optional `count dim` header is skipped).
/// Only words in `vocab` are retained; UNK is the mean of every vector read.
pub fn load_embeddings(
    path: &Path,
    vocab: Option<&HashSet<String>>,
    expected_dim: Option<usize>,
) -> Result<EmbeddingTable> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dim = expected_dim;
    let mut sum: Vec<f64> = Vec::new();
    let mut n = 0usize;
    let mut vectors = HashMap::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if i == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
            continue;
        }
        let v: Vec<f64> = rest
            .iter()
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path, i + 1, format!("bad number: {e}")))?;
        match dim {
            Some(d) if d != v.len() => {
                return Err(Error::format(
                    path,
                    i + 1,
                    format!("vector has {} components, expected {d}", v.len()),
                ))
            }
            None if v.is_empty() => return Err(Error::format(path, i + 1, "empty vector")),
            None => dim = Some(v.len()),
            _ => {}
        }
        if sum.is_empty() {
            sum = vec![0.0; v.len()];
        }
        sum.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
        n += 1;
        if vocab.is_none_or(|vs| vs.contains(word)) {
            vectors.insert(word.to_owned(), v);
        }
    }
    let dim = dim.ok_or_else(|| Error::format(path, 0, "no vectors found"))?;
    let unk = if n == 0 {
        vec![0.0; dim]
    } else {
        sum.iter().map(|s| s / n as f64).collect()
    };
    if vectors.is_empty() {
        log::warn!(
            "{}: no vocabulary word has a vector; every token maps to UNK",
            path.display()
        );
    }
    Ok(EmbeddingTable {
        dim,
        vectors,
        unk,
        source: EmbeddingSource::File {
            path: path.display().to_string(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn absent_token_is_unk_mean() {
        let f = write("2 3\ncat 1 2 3\ndog 3 2 1\n");
        let t = load_embeddings(f.path(), None, Some(3)).unwrap();
        assert_eq!(t.lookup("cat"), vec![1.0, 2.0, 3.0]);
        assert_eq!(t.lookup("zebra"), vec![2.0, 2.0, 2.0]);
        assert!(!t.contains("zebra"));
    }

    #[test]
    fn three_hundred_dims() {
        let row = |w: &str| {
            let nums: Vec<String> = (0..300).map(|i| format!("{}", i as f64 / 300.0)).collect();
            format!("{w} {}\n", nums.join(" "))
        };
        let f = write(&(row("a") + &row("b")));
        let t = load_embeddings(f.path(), None, None).unwrap();
        assert_eq!(t.dim(), 300);
        assert_eq!(t.lookup("a").len(), 300);
        assert_eq!(t.lookup("q").len(), 300);
    }

    #[test]
    fn inconsistent_dimension_is_format_error() {
        let f = write("a 1 2\nb 1 2 3\n");
        match load_embeddings(f.path(), None, None) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_intersection_is_all_unk() {
        let f = write("a 1 2\nb 3 4\n");
        let vocab: HashSet<String> = ["z".to_owned()].into();
        let t = load_embeddings(f.path(), Some(&vocab), None).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.lookup("z"), vec![2.0, 3.0]);
        assert_eq!(t.lookup("a"), vec![2.0, 3.0]);
    }

    #[test]
    fn hashed_vectors_are_stable() {
        let t = EmbeddingTable::hashed(8, 3);
        assert_eq!(t.lookup("word"), t.lookup("word"));
        assert_ne!(t.lookup("word"), t.lookup("ward"));
        assert_ne!(t.sentinel(false), t.sentinel(true));
    }
}
