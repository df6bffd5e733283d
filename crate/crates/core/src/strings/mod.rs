//! String predicate encoding: hash bitmaps, the extraction rule language,
//! rule mining and selection, the substring dictionary, skip-gram vectors
//! and trie lookup.

pub mod dict;
pub mod hash;
pub mod mine;
pub mod pipeline;
pub mod rule;
pub mod select;
pub mod skipgram;
pub mod trie;

pub use dict::{build_dictionary, Provenance, SubstringDictionary};
pub use hash::hash_bitmap;
pub use mine::{generate_candidate_rules, SearchKind};
pub use pipeline::{mine_rules, tuple_sentences, MinedStrings, MiningConfig};
pub use rule::{apply_rule, format_rules, parse_rules, PatternToken, Rule, RuleMatcher, StringFunction};
pub use select::{select_rules, Selection};
pub use skipgram::{train_skipgram, SkipGramConfig};
pub use trie::{LookupMode, LookupResult, TriePair};

#[derive(Debug, thiserror::Error)]
pub enum StringsError {
    #[error("rule syntax: {0}")]
    RuleSyntax(String),
    #[error("query string `{query}` does not occur in `{value}`")]
    QueryNotFound { query: String, value: String },
    #[error("no rule set under budget {budget} covers {}", uncovered.join(", "))]
    InfeasibleBudget { budget: usize, uncovered: Vec<String> },
    #[error("corrupt dictionary file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
