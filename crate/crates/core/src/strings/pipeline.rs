//! End-to-end string mining over a dataset and a workload.

use std::collections::{BTreeSet, HashMap};

use crate::data::{ColumnData, Dataset};
use crate::plan::{CmpOp, Condition, Literal, Operand, PlanTree};

use super::dict::{build_dictionary, SubstringDictionary};
use super::mine::{generate_candidate_rules, SearchKind};
use super::rule::{Rule, RuleMatcher};
use super::select::{select_rules, Selection};
use super::skipgram::{train_skipgram, SkipGramConfig};
use super::trie::LookupMode;
use super::StringsError;

#[derive(Debug, Clone)]
pub struct MiningConfig {
    /// Substring budget `B`; `None` means ten per workload string.
    pub budget: Option<usize>,
    /// Matching values per workload string that feed candidate generation.
    pub values_per_query: usize,
    pub skipgram: SkipGramConfig,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            budget: None,
            values_per_query: 3,
            skipgram: SkipGramConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinedStrings {
    pub selection: Selection,
    pub dictionary: SubstringDictionary,
}

impl MinedStrings {
    pub fn rules(&self) -> &[Rule] {
        &self.selection.rules
    }
}

/// The string a string-valued leaf searches for and how it searches.
/// `LIKE` wildcards are stripped; a pattern with interior `%` keeps its
/// longest piece as a substring search.
pub fn search_string(op: CmpOp, operand: &str) -> (String, SearchKind) {
    if !matches!(op, CmpOp::Like | CmpOp::NotLike) {
        return (operand.to_string(), SearchKind::Exact);
    }
    let starts = operand.starts_with('%');
    let ends = operand.ends_with('%') && operand.len() > 1;
    let inner = operand.trim_start_matches('%').trim_end_matches('%');
    if inner.contains('%') {
        let longest = inner.split('%').max_by_key(|p| p.chars().count()).unwrap_or("");
        return (longest.to_string(), SearchKind::Substring);
    }
    let kind = match (starts, ends) {
        (false, false) => SearchKind::Exact,
        (false, true) => SearchKind::Prefix,
        (true, false) => SearchKind::Suffix,
        (true, true) => SearchKind::Substring,
    };
    (inner.to_string(), kind)
}

pub fn lookup_mode(kind: SearchKind) -> LookupMode {
    match kind {
        SearchKind::Prefix => LookupMode::Prefix,
        SearchKind::Suffix => LookupMode::Suffix,
        SearchKind::Substring => LookupMode::Contains,
        SearchKind::Exact => LookupMode::Exact,
    }
}

/// `(column, query string, kind)` for every string leaf in the workload.
pub fn workload_strings(plans: &[PlanTree]) -> BTreeSet<(String, String, SearchKind)> {
    let mut out = BTreeSet::new();
    let mut visit = |c: &Condition| {
        let strings: Vec<&str> = match &c.operand {
            Operand::Str(s) => vec![s.as_str()],
            Operand::Set(items) => items
                .iter()
                .filter_map(|l| match l {
                    Literal::Str(s) => Some(s.as_str()),
                    Literal::Number(_) => None,
                })
                .collect(),
            _ => Vec::new(),
        };
        for s in strings {
            let (q, kind) = search_string(c.op, s);
            if !q.is_empty() {
                out.insert((c.column.clone(), q, kind));
            }
        }
    };
    for plan in plans {
        for node in plan.root.preorder() {
            if let Some(p) = &node.predicate {
                p.leaves().into_iter().for_each(&mut visit);
            }
        }
    }
    out
}

fn matches_kind(value: &str, q: &str, kind: SearchKind) -> bool {
    match kind {
        SearchKind::Prefix => value.starts_with(q),
        SearchKind::Suffix => value.ends_with(q),
        SearchKind::Substring => value.contains(q),
        SearchKind::Exact => value == q,
    }
}

fn string_column<'a>(ds: &'a Dataset, column: &str) -> Option<&'a [String]> {
    let table = column.split('.').next()?;
    let t = ds.table(table).ok()?;
    match &t.column(column)?.data {
        ColumnData::Str(v) => Some(v),
        _ => None,
    }
}

/// Mines, selects and embeds rules for the workload's string predicates.
/// Workload strings that occur in no value of their column are skipped:
/// no rule can extract them.
pub fn mine_rules(ds: &Dataset, plans: &[PlanTree], cfg: &MiningConfig) -> Result<MinedStrings, StringsError> {
    let mut candidates: BTreeSet<Rule> = BTreeSet::new();
    let mut workload: BTreeSet<String> = BTreeSet::new();
    for (column, q, kind) in workload_strings(plans) {
        let Some(values) = string_column(ds, &column) else {
            continue;
        };
        let mut seen = BTreeSet::new();
        for v in values.iter().filter(|v| matches_kind(v, &q, kind)) {
            if seen.len() >= cfg.values_per_query {
                break;
            }
            if seen.insert(v.as_str()) {
                candidates.extend(generate_candidate_rules(&q, v, kind)?);
            }
        }
        if !seen.is_empty() {
            workload.insert(q);
        }
    }
    let candidates: Vec<Rule> = candidates.into_iter().collect();
    let budget = cfg.budget.unwrap_or(10 * workload.len().max(1));
    let selection = if workload.is_empty() {
        Selection {
            rules: Vec::new(),
            extracted: BTreeSet::new(),
            exact_fallback: false,
        }
    } else {
        select_rules(&candidates, &workload, ds.string_values(), budget)?
    };
    let dict = build_dictionary(&selection.rules, ds.string_values(), cfg.skipgram.dim);
    let sentences = tuple_sentences(ds, &selection.rules, &dict);
    let dictionary = train_skipgram(&sentences, &dict, &cfg.skipgram);
    Ok(MinedStrings { selection, dictionary })
}

/// One sentence per tuple: the dictionary substrings the rules extract from
/// its string values, plus a key token shared by joining tuples.
pub fn tuple_sentences(ds: &Dataset, rules: &[Rule], dict: &SubstringDictionary) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    if dict.is_empty() {
        return out;
    }
    let matcher = RuleMatcher::new(rules);
    let mut memo: HashMap<&str, Vec<String>> = HashMap::new();
    for t in &ds.tables {
        let key_col = key_column(ds, &t.name);
        let strings: Vec<&[String]> = t
            .columns
            .iter()
            .filter_map(|c| match &c.data {
                ColumnData::Str(v) => Some(v.as_slice()),
                _ => None,
            })
            .collect();
        if strings.is_empty() {
            continue;
        }
        for row in 0..t.rows() {
            let mut tokens: BTreeSet<String> = BTreeSet::new();
            for col in &strings {
                let value = col[row].as_str();
                let found = memo.entry(value).or_insert_with(|| {
                    matcher.apply(value).into_iter().filter(|s| dict.contains(s)).collect()
                });
                tokens.extend(found.iter().cloned());
            }
            if tokens.is_empty() {
                continue;
            }
            let mut sentence: Vec<String> = tokens.into_iter().collect();
            if let Some((local, target)) = &key_col {
                if let Some(v) = t.column(local).and_then(|c| c.data.as_f64(row)) {
                    sentence.push(format!("{target}#{v}"));
                }
            }
            out.push(sentence);
        }
    }
    out
}

/// `(column in this table, name used in the token)`: a foreign key is named
/// after the key it references so joining tuples share a token.
fn key_column(ds: &Dataset, table: &str) -> Option<(String, String)> {
    let prefix = format!("{table}.");
    if let Some(fk) = ds.catalog.foreign_keys.iter().find(|fk| fk.from.starts_with(&prefix)) {
        return Some((fk.from.clone(), fk.to.clone()));
    }
    let id = format!("{table}.id");
    ds.table(table).ok()?.column(&id).map(|_| (id.clone(), id))
}
