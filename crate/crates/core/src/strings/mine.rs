//! Candidate rule generation.
//!
//! For each occurrence of the query string inside a matching value, the
//! occurrence is widened into windows that end (prefix rules) or start
//! (suffix rules) at character-run boundaries, up to two words of context.
//! Each window is cut at run boundaries; every full run may be written as
//! its class token or as a literal, partial runs only as literals, and
//! adjacent literals are merged. Every rule produced this way extracts the
//! query string from the value it was mined from.

use std::collections::BTreeSet;

use super::rule::{CharClass, PatternToken, Rule, StringFunction};
use super::StringsError;

/// Maximum tokens per mined pattern.
pub const MAX_PATTERN_TOKENS: usize = 8;
/// Whitespace-delimited words of context on either side of a match.
pub const CONTEXT_WORDS: usize = 2;

/// How the query string relates to the value it matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SearchKind {
    /// `LIKE 'q%'`
    Prefix,
    /// `LIKE '%q'`
    Suffix,
    /// `LIKE '%q%'`
    Substring,
    /// `=` and `IN`
    Exact,
}

pub fn generate_candidate_rules(
    query: &str,
    value: &str,
    kind: SearchKind,
) -> Result<BTreeSet<Rule>, StringsError> {
    let q: Vec<char> = query.chars().collect();
    let v: Vec<char> = value.chars().collect();
    let not_found = || StringsError::QueryNotFound {
        query: query.to_string(),
        value: value.to_string(),
    };
    if q.is_empty() || q.len() > v.len() {
        return Err(not_found());
    }
    let occurrences: Vec<usize> = match kind {
        SearchKind::Prefix => (v[..q.len()] == q[..]).then_some(0).into_iter().collect(),
        SearchKind::Suffix => {
            let s = v.len() - q.len();
            (v[s..] == q[..]).then_some(s).into_iter().collect()
        }
        SearchKind::Exact => (v == q).then_some(0).into_iter().collect(),
        SearchKind::Substring => (0..=v.len() - q.len()).filter(|&s| v[s..s + q.len()] == q[..]).collect(),
    };
    if occurrences.is_empty() {
        return Err(not_found());
    }

    let runs = RunInfo::new(&v);
    let mut out = BTreeSet::new();
    for s in occurrences {
        let e = s + q.len();
        if matches!(kind, SearchKind::Prefix | SearchKind::Substring | SearchKind::Exact) {
            for end in runs.right_ends(e) {
                for pattern in runs.patterns(s, end) {
                    out.insert(Rule::new(StringFunction::Prefix, pattern, q.len()));
                }
            }
        }
        if matches!(kind, SearchKind::Suffix | SearchKind::Substring | SearchKind::Exact) {
            for start in runs.left_starts(s) {
                for pattern in runs.patterns(start, e) {
                    out.insert(Rule::new(StringFunction::Suffix, pattern, q.len()));
                }
            }
        }
    }
    Ok(out)
}

struct RunInfo<'a> {
    text: &'a [char],
    classes: Vec<CharClass>,
}

impl<'a> RunInfo<'a> {
    fn new(text: &'a [char]) -> Self {
        RunInfo {
            text,
            classes: text.iter().map(|&c| CharClass::of(c)).collect(),
        }
    }

    /// A run boundary lies between `pos - 1` and `pos`.
    fn is_boundary(&self, pos: usize) -> bool {
        if pos == 0 || pos >= self.text.len() {
            return true;
        }
        let (a, b) = (self.classes[pos - 1], self.classes[pos]);
        a != b || a == CharClass::Other
    }

    fn is_space(&self, pos: usize) -> bool {
        self.classes[pos] == CharClass::Space
    }

    /// End of the context window to the right of `e`.
    fn right_limit(&self, e: usize) -> usize {
        let n = self.text.len();
        let mut pos = e;
        while pos < n && !self.is_space(pos) {
            pos += 1;
        }
        for _ in 0..CONTEXT_WORDS {
            while pos < n && self.is_space(pos) {
                pos += 1;
            }
            while pos < n && !self.is_space(pos) {
                pos += 1;
            }
        }
        pos
    }

    fn left_limit(&self, s: usize) -> usize {
        let mut pos = s;
        while pos > 0 && !self.is_space(pos - 1) {
            pos -= 1;
        }
        for _ in 0..CONTEXT_WORDS {
            while pos > 0 && self.is_space(pos - 1) {
                pos -= 1;
            }
            while pos > 0 && !self.is_space(pos - 1) {
                pos -= 1;
            }
        }
        pos
    }

    fn right_ends(&self, e: usize) -> Vec<usize> {
        let limit = self.right_limit(e);
        std::iter::once(e)
            .chain((e + 1..=limit).filter(|&p| self.is_boundary(p)))
            .collect()
    }

    fn left_starts(&self, s: usize) -> Vec<usize> {
        let limit = self.left_limit(s);
        std::iter::once(s)
            .chain((limit..s).rev().filter(|&p| self.is_boundary(p)))
            .collect()
    }

    /// All token sequences that match exactly `[a, b)` starting at `a`.
    fn patterns(&self, a: usize, b: usize) -> Vec<Vec<PatternToken>> {
        let mut cuts = vec![a];
        cuts.extend((a + 1..b).filter(|&p| self.is_boundary(p)));
        cuts.push(b);
        let pieces: Vec<(usize, usize, Option<PatternToken>)> = cuts
            .windows(2)
            .map(|w| {
                let (x, y) = (w[0], w[1]);
                let full_run = self.is_boundary(x) && self.is_boundary(y);
                let class_token = if full_run {
                    PatternToken::for_class(self.classes[x])
                } else {
                    None
                };
                (x, y, class_token)
            })
            .collect();

        let mut out = Vec::new();
        let choices: Vec<usize> = pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| p.2.is_some())
            .map(|(i, _)| i)
            .collect();
        // Bitmask over the pieces that may be written as class tokens.
        for mask in 0u64..(1u64 << choices.len().min(20)) {
            let mut tokens: Vec<PatternToken> = Vec::new();
            let mut literal = String::new();
            for (i, (x, y, class_token)) in pieces.iter().enumerate() {
                let as_class = choices
                    .iter()
                    .position(|&c| c == i)
                    .is_some_and(|bit| mask & (1 << bit) != 0);
                if as_class {
                    if !literal.is_empty() {
                        tokens.push(PatternToken::Literal(std::mem::take(&mut literal)));
                    }
                    tokens.push(class_token.clone().unwrap());
                } else {
                    literal.extend(&self.text[*x..*y]);
                }
                if tokens.len() > MAX_PATTERN_TOKENS {
                    break;
                }
            }
            if !literal.is_empty() {
                tokens.push(PatternToken::Literal(literal));
            }
            if tokens.len() <= MAX_PATTERN_TOKENS {
                out.push(tokens);
            }
        }
        out
    }
}
