use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NULL_SUFFIX: &str = "NULL";

/// Suffix labels attested in this many lemma pairs or fewer are dropped.
pub const RARE_SUFFIX_MAX_PAIRS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    #[serde(rename = "NOUN")]
    Noun,
    #[serde(rename = "VERB")]
    Verb,
}

impl Pos {
    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "NOUN",
            Pos::Verb => "VERB",
        }
    }
}

impl std::str::FromStr for Pos {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "NOUN" => Ok(Pos::Noun),
            "VERB" => Ok(Pos::Verb),
            other => Err(format!("unknown POS `{other}` (expected NOUN or VERB)")),
        }
    }
}

/// A base verb and one of its derived lemmas. `suffix == NULL` marks the
/// verb–verb identity pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LemmaPair {
    pub base: String,
    pub derived: String,
    pub suffix: String,
    pub pos: Pos,
}

impl LemmaPair {
    pub fn identity(base: &str) -> Self {
        LemmaPair {
            base: base.to_owned(),
            derived: base.to_owned(),
            suffix: NULL_SUFFIX.to_owned(),
            pos: Pos::Verb,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.suffix == NULL_SUFFIX
    }
}

pub fn load_lemma_pairs(path: &Path) -> Result<Vec<LemmaPair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lemma_pairs(&text, path)
}

/// Parses `base \t derived \t suffix \t pos` rows, drops rare suffixes and
/// adds one identity pair per base verb that lacks one.
pub fn parse_lemma_pairs(text: &str, origin: &Path) -> Result<Vec<LemmaPair>> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() != 4 || f[..3].iter().any(|s| s.is_empty()) {
            return Err(Error::format(
                origin,
                i + 1,
                "expected `base\\tderived\\tsuffix\\tpos`",
            ));
        }
        let pos: Pos = f[3].parse().map_err(|m: String| Error::format(origin, i + 1, m))?;
        let pair = LemmaPair {
            base: f[0].to_owned(),
            derived: f[1].to_owned(),
            suffix: f[2].to_owned(),
            pos,
        };
        if pair.is_identity() != (pair.base == pair.derived) {
            return Err(Error::format(
                origin,
                i + 1,
                "NULL suffix must pair a base form with itself",
            ));
        }
        if seen.insert(pair.clone()) {
            pairs.push(pair);
        }
    }

    let mut per_suffix: HashMap<&str, usize> = HashMap::new();
    for p in pairs.iter().filter(|p| !p.is_identity()) {
        *per_suffix.entry(p.suffix.as_str()).or_default() += 1;
    }
    let rare: HashSet<String> = per_suffix
        .into_iter()
        .filter(|&(_, n)| n <= RARE_SUFFIX_MAX_PAIRS)
        .map(|(s, _)| s.to_owned())
        .collect();
    if !rare.is_empty() {
        let mut r: Vec<_> = rare.iter().cloned().collect();
        r.sort();
        log::info!("dropping rare suffixes: {}", r.join(", "));
    }
    pairs.retain(|p| !rare.contains(&p.suffix));

    let have_identity: HashSet<String> = pairs
        .iter()
        .filter(|p| p.is_identity())
        .map(|p| p.base.clone())
        .collect();
    let mut added = HashSet::new();
    let mut identities = Vec::new();
    for p in &pairs {
        if !have_identity.contains(&p.base) && added.insert(p.base.clone()) {
            identities.push(LemmaPair::identity(&p.base));
        }
    }
    pairs.extend(identities);

    if pairs.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{}: no lemma pairs left after filtering",
            origin.display()
        )));
    }
    Ok(pairs)
}

/// Lemma → inflected surface forms. The lemma itself is always a form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InflectionTable {
    forms: BTreeMap<String, Vec<String>>,
}

impl InflectionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, lemma: &str, forms: impl IntoIterator<Item = String>) {
        let entry = self.forms.entry(lemma.to_owned()).or_default();
        for f in forms {
            if !entry.contains(&f) {
                entry.push(f);
            }
        }
    }

    pub fn forms_of(&self, lemma: &str) -> Vec<String> {
        let mut out = vec![lemma.to_owned()];
        if let Some(fs) = self.forms.get(lemma) {
            out.extend(fs.iter().filter(|f| *f != lemma).cloned());
        }
        out
    }
}

/// Reads `lemma \t form1,form2,...` rows.
pub fn load_inflections(path: &Path) -> Result<InflectionTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table = InflectionTable::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (lemma, forms) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path, i + 1, "expected `lemma\\tform,form,...`"))?;
        let lemma = lemma.trim();
        if lemma.is_empty() {
            return Err(Error::format(path, i + 1, "empty lemma"));
        }
        table.insert(
            lemma,
            forms
                .split(',')
                .map(str::trim)
                .filter(|f| !f.is_empty())
                .map(str::to_owned),
        );
    }
    Ok(table)
}
