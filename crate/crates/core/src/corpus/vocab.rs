use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::instance::RelationInstance;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const E0: usize = 2;
pub const E1: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "E0", "E1"];

/// Token ↔ index map with four fixed reserved entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from(Vec::new())
    }
}

impl From<Vec<String>> for Vocab {
    /// Reserved tokens are forced into their slots whatever the input holds.
    fn from(tokens: Vec<String>) -> Self {
        let mut v = Self {
            tokens: RESERVED.iter().map(|s| s.to_string()).collect(),
            index: HashMap::new(),
        };
        for (i, t) in v.tokens.iter().enumerate() {
            v.index.insert(t.clone(), i);
        }
        for t in tokens {
            v.insert(t);
        }
        v
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    fn insert(&mut self, token: String) -> usize {
        if let Some(&i) = self.index.get(&token) {
            return i;
        }
        let i = self.tokens.len();
        self.index.insert(token.clone(), i);
        self.tokens.push(token);
        i
    }

    /// Tokens seen at least `min_count` times get an index, most frequent first.
    pub fn build<'a>(instances: impl IntoIterator<Item = &'a RelationInstance>, min_count: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for inst in instances {
            for t in &inst.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_count.max(1) && !RESERVED.contains(&t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from(kept.into_iter().map(|(t, _)| t.to_string()).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `token`, or [`UNK`].
    pub fn index(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(words: &str) -> RelationInstance {
        let tokens: Vec<String> = words.split_whitespace().map(String::from).collect();
        RelationInstance {
            id: "i".into(),
            e0_index: 0,
            e1_index: tokens.len() - 1,
            tokens,
            label: None,
        }
    }

    #[test]
    fn empty_corpus_has_only_reserved() {
        let v = Vocab::build(std::iter::empty(), 1);
        assert_eq!(v.len(), 4);
        assert_eq!(v.index("<pad>"), PAD);
        assert_eq!(v.index("E1"), E1);
    }

    #[test]
    fn min_count_one_indexes_everything() {
        let c = [inst("E0 a b E1"), inst("E0 b c E1")];
        let v = Vocab::build(&c, 1);
        assert_eq!(v.len(), 7);
        for t in ["a", "b", "c"] {
            assert!(v.get(t).is_some());
        }
    }

    #[test]
    fn min_count_two_drops_singletons() {
        let c = [inst("E0 a b E1"), inst("E0 b c E1")];
        let v = Vocab::build(&c, 2);
        assert_eq!(v.get("b"), Some(4));
        assert_eq!(v.index("a"), UNK);
        assert_eq!(v.index("c"), UNK);
    }

    #[test]
    fn serde_round_trip_keeps_indices() {
        let v = Vocab::build(&[inst("E0 x y y E1")], 1);
        let s = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&s).unwrap();
        assert_eq!(v, back);
    }
}
