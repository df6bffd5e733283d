//! Prefix and suffix tries over the substring dictionary.
//!
//! Prefix-function entries are inserted forward into the prefix trie,
//! suffix-function entries reversed into the suffix trie. A lookup walks
//! the query and keeps the deepest terminal it passes.

use std::collections::BTreeMap;

use super::dict::SubstringDictionary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupMode {
    Prefix,
    Suffix,
    Contains,
    Exact,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: BTreeMap<char, usize>,
    /// Dictionary position of the entry ending here.
    value: Option<usize>,
}

/// Arena-backed character trie.
#[derive(Debug, Clone)]
pub struct Trie {
    nodes: Vec<TrieNode>,
}

impl Default for Trie {
    fn default() -> Self {
        Trie {
            nodes: vec![TrieNode::default()],
        }
    }
}

impl Trie {
    pub fn insert<I: IntoIterator<Item = char>>(&mut self, key: I, value: usize) {
        let mut at = 0;
        for c in key {
            at = match self.nodes[at].children.get(&c) {
                Some(&next) => next,
                None => {
                    self.nodes.push(TrieNode::default());
                    let next = self.nodes.len() - 1;
                    self.nodes[at].children.insert(c, next);
                    next
                }
            };
        }
        self.nodes[at].value = Some(value);
    }

    /// Value and length of the longest inserted key that prefixes `query`.
    pub fn longest_match<I: IntoIterator<Item = char>>(&self, query: I) -> Option<(usize, usize)> {
        let mut at = 0;
        let mut best = self.nodes[0].value.map(|v| (v, 0));
        for (depth, c) in query.into_iter().enumerate() {
            match self.nodes[at].children.get(&c) {
                Some(&next) => at = next,
                None => break,
            }
            if let Some(v) = self.nodes[at].value {
                best = Some((v, depth + 1));
            }
        }
        best
    }

    pub fn get<I: IntoIterator<Item = char>>(&self, key: I) -> Option<usize> {
        let mut at = 0;
        for c in key {
            at = *self.nodes[at].children.get(&c)?;
        }
        self.nodes[at].value
    }

    /// Every stored key with its value, in character order.
    pub fn entries(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, String::new())];
        while let Some((at, path)) = stack.pop() {
            if let Some(v) = self.nodes[at].value {
                out.push((path.clone(), v));
            }
            for (&c, &next) in self.nodes[at].children.iter().rev() {
                let mut p = path.clone();
                p.push(c);
                stack.push((next, p));
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1 && self.nodes[0].value.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LookupResult {
    pub vector: Vec<f32>,
    /// The dictionary entry used, if any.
    pub key: Option<String>,
    /// Set on a miss; `vector` is then all zeros.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct TriePair {
    pub prefix: Trie,
    pub suffix: Trie,
    dict: SubstringDictionary,
}

impl TriePair {
    pub fn build(dict: &SubstringDictionary) -> Self {
        let mut prefix = Trie::default();
        let mut suffix = Trie::default();
        for (i, key) in dict.keys().iter().enumerate() {
            let p = dict.provenance(i);
            if p.prefix {
                prefix.insert(key.chars(), i);
            }
            if p.suffix {
                suffix.insert(key.chars().rev(), i);
            }
        }
        TriePair {
            prefix,
            suffix,
            dict: dict.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dict.dim
    }

    pub fn dictionary(&self) -> &SubstringDictionary {
        &self.dict
    }

    /// Dictionary position and length of the best match.
    pub fn find(&self, q: &str, mode: LookupMode) -> Option<(usize, usize)> {
        let pre = || self.prefix.longest_match(q.chars()).filter(|m| m.1 > 0);
        let suf = || self.suffix.longest_match(q.chars().rev()).filter(|m| m.1 > 0);
        match mode {
            LookupMode::Prefix => pre(),
            LookupMode::Suffix => suf(),
            LookupMode::Contains | LookupMode::Exact => match (pre(), suf()) {
                (Some(p), Some(s)) => Some(if s.1 > p.1 { s } else { p }),
                (p, s) => p.or(s),
            },
        }
    }

    pub fn lookup(&self, q: &str, mode: LookupMode) -> LookupResult {
        match self.find(q, mode) {
            Some((i, _)) => LookupResult {
                vector: self.dict.vector(i).to_vec(),
                key: Some(self.dict.keys()[i].clone()),
                fallback: false,
            },
            None => LookupResult {
                vector: vec![0.0; self.dict.dim],
                key: None,
                fallback: true,
            },
        }
    }
}
