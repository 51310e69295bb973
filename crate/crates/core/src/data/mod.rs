//! Dataset construction: lemma pairs, context extraction, dampening, lexicon
//! splits, word vectors and the instance file format.

mod contexts;
mod embeddings;
mod pairs;
mod split;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use contexts::{dampen_contexts, extract_contexts, keep_count, MAX_SENTENCE_LEN, MIN_SENTENCE_LEN};
pub use embeddings::{load_embeddings, EmbeddingSource, EmbeddingTable};
pub use pairs::{
    load_inflections, load_lemma_pairs, parse_lemma_pairs, InflectionTable, LemmaPair, Pos,
    NULL_SUFFIX, RARE_SUFFIX_MAX_PAIRS,
};
pub use split::{split_dataset, stems, LexiconMode, Split, SplitRatios};

use crate::error::{Error, Result};

/// One prediction problem: a sentence with the derived form removed, the
/// base lemma to derive from and the gold surface form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instance {
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub base: String,
    pub target: String,
    pub pos: String,
    pub suffix: String,
}

impl Instance {
    pub fn sentence_len(&self) -> usize {
        self.left.len() + 1 + self.right.len()
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.left.join(" "),
            self.target,
            self.right.join(" "),
            self.base,
            self.pos,
            self.suffix
        )
    }

    pub fn parse_line(line: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(format!("expected 6 tab-separated fields, found {}", fields.len()));
        }
        let words = |s: &str| s.split_whitespace().map(str::to_owned).collect::<Vec<_>>();
        let target = fields[1].trim();
        let base = fields[3].trim();
        if target.is_empty() || base.is_empty() {
            return Err("empty target or base form".into());
        }
        Ok(Instance {
            left: words(fields[0]),
            target: target.to_owned(),
            right: words(fields[2]),
            base: base.to_owned(),
            pos: fields[4].trim().to_owned(),
            suffix: fields[5].trim().to_owned(),
        })
    }
}

pub fn read_instances(path: &Path) -> Result<Vec<Instance>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(Instance::parse_line(&line).map_err(|m| Error::format(path, i + 1, m))?);
    }
    Ok(out)
}

pub fn write_instances(path: &Path, instances: &[Instance]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for inst in instances {
        writeln!(w, "{}", inst.to_line()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a corpus with one whitespace-tokenised sentence per line.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .map(|l| {
            l.map(|l| l.split_whitespace().map(str::to_owned).collect())
                .map_err(|e| Error::io(path, e))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub lemma_pairs: usize,
    pub suffix_types: usize,
    pub instances: usize,
}

/// Counts lemma pairs, suffix labels (including NULL) and instances.
pub fn dataset_stats(pairs: &[LemmaPair], instances: &[Instance]) -> DatasetStats {
    let suffixes: BTreeSet<&str> = pairs.iter().map(|p| p.suffix.as_str()).collect();
    DatasetStats {
        lemma_pairs: pairs.len(),
        suffix_types: suffixes.len(),
        instances: instances.len(),
    }
}
