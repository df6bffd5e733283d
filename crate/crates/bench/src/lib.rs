//! Shared fixtures for the benchmarks.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treecost::plan::Value;
use treecost::strings::{generate_candidate_rules, Provenance, Rule, SearchKind, SubstringDictionary};
use treecost::trainer::{generate_dataset, generate_queries, DatasetConfig, WorkloadConfig};
use treecost::{Dataset, Featurizer, FeaturizerConfig, PlanTree, SampleStore, StringEncoder};

pub fn dataset(rows: usize) -> Dataset {
    generate_dataset(&DatasetConfig {
        title_rows: rows,
        info_rows: rows,
        cast_rows: 0,
        seed: 1,
    })
}

pub fn featurizer(ds: &Dataset) -> Featurizer {
    let cfg = FeaturizerConfig::default();
    let store = Arc::new(SampleStore::draw(ds, cfg.sample_size, 1));
    Featurizer::new(ds.catalog.clone(), store, StringEncoder::Hash, cfg).unwrap()
}

/// Binarized plans joining up to `max_tables` tables.
pub fn plans(ds: &Dataset, n: usize, max_tables: usize) -> Vec<PlanTree> {
    let cfg = WorkloadConfig {
        queries: n,
        tables: (1, max_tables),
        seed: 3,
        ..WorkloadConfig::default()
    };
    generate_queries(ds, &cfg).into_iter().map(PlanTree::binarize).collect()
}

pub fn strings(ds: &Dataset, column: &str) -> Vec<String> {
    let (table, _) = column.split_once('.').unwrap();
    let t = ds.table(table).unwrap();
    let pos = t.column_pos(column).unwrap();
    (0..t.rows())
        .filter_map(|r| match t.value(pos, r) {
            Value::Str(s) => Some(s.to_string()),
            Value::Num(_) => None,
        })
        .collect()
}

/// Candidate rules from random substring queries against `values`.
pub fn candidate_rules(values: &[String], n: usize) -> Vec<Rule> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = BTreeSet::new();
    for _ in 0..n {
        let v = &values[rng.random_range(0..values.len())];
        let chars: Vec<char> = v.chars().collect();
        if chars.len() < 2 {
            continue;
        }
        let a = rng.random_range(0..chars.len() - 1);
        let b = rng.random_range(a + 1..=chars.len());
        let q: String = chars[a..b].iter().collect();
        if let Ok(rules) = generate_candidate_rules(&q, v, SearchKind::Substring) {
            out.extend(rules);
        }
    }
    out.into_iter().collect()
}

pub fn random_dictionary(entries: usize, dim: usize) -> SubstringDictionary {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut map = BTreeMap::new();
    while map.len() < entries {
        let len = rng.random_range(1..10);
        let key: String = (0..len).map(|_| char::from(b'a' + rng.random_range(0..6u8))).collect();
        let prefix = rng.random_bool(0.6);
        map.insert(key, Provenance { prefix, suffix: !prefix || rng.random_bool(0.3) });
    }
    let mut dict = SubstringDictionary::from_entries(map, dim);
    dict.set_vectors(vec![0.5; dict.len() * dim]);
    dict
}
