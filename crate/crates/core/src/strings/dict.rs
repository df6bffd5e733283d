//! The substring dictionary and its binary file format.
//!
//! ```text
//! magic "TCSD" | version u32 | dim u32 | count u64
//! count * (key: u32 len + utf8 | provenance u8: bit0 prefix, bit1 suffix)
//! count * dim * f32
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use super::rule::{Rule, RuleMatcher, StringFunction};
use super::StringsError;

const MAGIC: &[u8; 4] = b"TCSD";
const VERSION: u32 = 1;

/// Which string functions produced an entry; decides which trie holds it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Provenance {
    pub prefix: bool,
    pub suffix: bool,
}

impl Provenance {
    fn bits(self) -> u8 {
        self.prefix as u8 | (self.suffix as u8) << 1
    }

    fn from_bits(b: u8) -> Self {
        Provenance {
            prefix: b & 1 != 0,
            suffix: b & 2 != 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstringDictionary {
    pub dim: usize,
    keys: Vec<String>,
    provenance: Vec<Provenance>,
    /// Row-major `keys.len() x dim`; zero until trained.
    vectors: Vec<f32>,
    index: HashMap<String, usize>,
}

impl SubstringDictionary {
    /// Entries sorted by key.
    pub fn from_entries(entries: BTreeMap<String, Provenance>, dim: usize) -> Self {
        let (keys, provenance): (Vec<String>, Vec<Provenance>) = entries.into_iter().unzip();
        let index = keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        let vectors = vec![0.0; keys.len() * dim];
        SubstringDictionary {
            dim,
            keys,
            provenance,
            vectors,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn position(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        self.provenance[i]
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.position(key).map(|i| self.vector(i))
    }

    pub fn set_vectors(&mut self, vectors: Vec<f32>) {
        assert_eq!(vectors.len(), self.keys.len() * self.dim);
        self.vectors = vectors;
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.keys.len() as u64).to_le_bytes())?;
        for (k, p) in self.keys.iter().zip(&self.provenance) {
            w.write_all(&(k.len() as u32).to_le_bytes())?;
            w.write_all(k.as_bytes())?;
            w.write_all(&[p.bits()])?;
        }
        for v in &self.vectors {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, StringsError> {
        let corrupt = |m: &str| StringsError::Corrupt(m.to_string());
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if &b4 != MAGIC {
            return Err(corrupt("bad magic"));
        }
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != VERSION {
            return Err(corrupt("unsupported version"));
        }
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut entries = BTreeMap::new();
        let mut order = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b4)?;
            let mut buf = vec![0u8; u32::from_le_bytes(b4) as usize];
            r.read_exact(&mut buf)?;
            let key = String::from_utf8(buf).map_err(|_| corrupt("key is not utf-8"))?;
            let mut p = [0u8; 1];
            r.read_exact(&mut p)?;
            order.push(key.clone());
            entries.insert(key, Provenance::from_bits(p[0]));
        }
        if entries.len() != count || order.windows(2).any(|w| w[0] >= w[1]) {
            return Err(corrupt("keys are not sorted and unique"));
        }
        let mut vectors = vec![0f32; count * dim];
        for v in vectors.iter_mut() {
            r.read_exact(&mut b4)?;
            *v = f32::from_le_bytes(b4);
        }
        let mut dict = SubstringDictionary::from_entries(entries, dim);
        dict.vectors = vectors;
        Ok(dict)
    }

    pub fn save(&self, path: &Path) -> Result<(), StringsError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, StringsError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

/// Every substring the rules extract from the corpus, vectors unset.
pub fn build_dictionary<'a, I>(rules: &[Rule], corpus: I, dim: usize) -> SubstringDictionary
where
    I: IntoIterator<Item = &'a str>,
{
    let mut entries: BTreeMap<String, Provenance> = BTreeMap::new();
    if !rules.is_empty() {
        let matcher = RuleMatcher::new(rules);
        let distinct: BTreeSet<&str> = corpus.into_iter().collect();
        for value in distinct {
            matcher.for_each(value, |ri, s| {
                let p = entries.entry(s).or_default();
                match rules[ri].function {
                    StringFunction::Prefix => p.prefix = true,
                    StringFunction::Suffix => p.suffix = true,
                }
            });
        }
    }
    SubstringDictionary::from_entries(entries, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strings::rule::PatternToken::*;

    #[test]
    fn union_of_rule_applications() {
        let rules = vec![
            Rule::new(StringFunction::Prefix, vec![Literal("Din".into())], 3),
            Rule::new(StringFunction::Suffix, vec![Literal("(".into()), Digits, Literal("-".into()), Digits], 2),
            Rule::new(StringFunction::Prefix, vec![Digits], 2),
        ];
        let corpus = ["Dinos in Kas", "Schla in Tra", "(2002-06-29)", "(2014-08-26)"];
        let dict = build_dictionary(&rules, corpus, 4);
        assert_eq!(dict.keys(), ["06", "08", "20", "26", "29", "Din"]);
        let p06 = dict.provenance(dict.position("06").unwrap());
        assert!(p06.prefix && p06.suffix);
        let p08 = dict.provenance(dict.position("08").unwrap());
        assert!(p08.prefix && p08.suffix);
        let p20 = dict.provenance(dict.position("20").unwrap());
        assert!(p20.prefix && !p20.suffix);
    }

    #[test]
    fn no_rules_no_entries() {
        assert!(build_dictionary(&[], ["abc"], 8).is_empty());
    }

    #[test]
    fn file_round_trip() {
        let rules = vec![Rule::new(StringFunction::Prefix, vec![Upper, Lower], 2)];
        let mut dict = build_dictionary(&rules, ["Dinos in Kas", "Schla"], 3);
        let n = dict.len();
        dict.set_vectors((0..n * 3).map(|i| i as f32 * 0.5).collect());
        let mut buf = Vec::new();
        dict.write_to(&mut buf).unwrap();
        let back = SubstringDictionary::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, dict);
        buf[0] = b'X';
        assert!(SubstringDictionary::read_from(&mut buf.as_slice()).is_err());
    }
}
