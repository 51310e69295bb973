//! Character alphabet and small tag inventories.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BOW: usize = 0;
pub const EOW: usize = 1;
pub const UNK_CHAR: usize = 2;
const NUM_SPECIAL: usize = 3;
const BASE_CHARS: &str = "abcdefghijklmnopqrstuvwxyz-'";

/// Character inventory: begin-of-word, end-of-word, unknown, then characters
/// in sorted order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<char>", into = "Vec<char>")]
pub struct Alphabet {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl From<Vec<char>> for Alphabet {
    fn from(chars: Vec<char>) -> Self {
        Alphabet::from_chars(chars)
    }
}

impl From<Alphabet> for Vec<char> {
    fn from(a: Alphabet) -> Self {
        a.chars
    }
}

impl Alphabet {
    /// Lowercase letters, hyphen and apostrophe plus every character of `words`.
    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut set: BTreeSet<char> = BASE_CHARS.chars().collect();
        for w in words {
            set.extend(w.chars());
        }
        Self::from_chars(set.into_iter().collect())
    }

    pub fn from_chars(chars: Vec<char>) -> Self {
        let index = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + NUM_SPECIAL))
            .collect();
        Alphabet { chars, index }
    }

    pub fn len(&self) -> usize {
        self.chars.len() + NUM_SPECIAL
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn index_of(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(UNK_CHAR)
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    /// Maps characters to indices; characters outside the alphabet become UNK.
    pub fn encode(&self, word: &str) -> Vec<usize> {
        word.chars().map(|c| self.index_of(c)).collect()
    }

    pub fn symbol(&self, index: usize) -> Result<Option<char>> {
        match index {
            BOW | EOW => Ok(None),
            UNK_CHAR => Ok(Some(char::REPLACEMENT_CHARACTER)),
            i if i < self.len() => Ok(Some(self.chars[i - NUM_SPECIAL])),
            i => Err(Error::Vocabulary {
                index: i,
                size: self.len(),
            }),
        }
    }

    /// Renders symbols as text, dropping boundary markers.
    pub fn decode(&self, symbols: &[usize]) -> Result<String> {
        let mut s = String::new();
        for &i in symbols {
            if let Some(c) = self.symbol(i)? {
                s.push(c);
            }
        }
        Ok(s)
    }
}

/// String labels mapped to dense indices, with a reserved unknown slot at 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    tags: Vec<String>,
}

impl TagSet {
    pub fn from_tags<'a>(tags: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = tags.into_iter().collect();
        TagSet {
            tags: set.into_iter().map(str::to_owned).collect(),
        }
    }

    /// Number of slots including unknown.
    pub fn len(&self) -> usize {
        self.tags.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, tag: &str) -> usize {
        self.tags
            .iter()
            .position(|t| t == tag)
            .map_or(0, |i| i + 1)
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}
