//! The extraction rule language: a pattern of character-class and literal
//! tokens, a prefix/suffix string function and an extraction length.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::StringsError;

/// Character classes used by pattern tokens. `Other` characters
/// (punctuation, symbols) can only be matched by literals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CharClass {
    Upper,
    Lower,
    Digit,
    Space,
    Other,
}

impl CharClass {
    pub fn of(c: char) -> CharClass {
        if c.is_ascii_uppercase() {
            CharClass::Upper
        } else if c.is_ascii_lowercase() {
            CharClass::Lower
        } else if c.is_ascii_digit() {
            CharClass::Digit
        } else if c.is_whitespace() {
            CharClass::Space
        } else {
            CharClass::Other
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternToken {
    /// `[A-Z]+`
    Upper,
    /// `[a-z]+`
    Lower,
    /// `[0-9]+`
    Digits,
    /// whitespace+
    Space,
    /// exactly this text
    Literal(String),
}

impl PatternToken {
    pub fn class(&self) -> Option<CharClass> {
        match self {
            PatternToken::Upper => Some(CharClass::Upper),
            PatternToken::Lower => Some(CharClass::Lower),
            PatternToken::Digits => Some(CharClass::Digit),
            PatternToken::Space => Some(CharClass::Space),
            PatternToken::Literal(_) => None,
        }
    }

    pub fn for_class(class: CharClass) -> Option<PatternToken> {
        match class {
            CharClass::Upper => Some(PatternToken::Upper),
            CharClass::Lower => Some(PatternToken::Lower),
            CharClass::Digit => Some(PatternToken::Digits),
            CharClass::Space => Some(PatternToken::Space),
            CharClass::Other => None,
        }
    }

    /// Matches at `pos` and returns the end position. Class tokens match a
    /// maximal run: they must start where the run starts and consume it to
    /// its end.
    fn match_at(&self, text: &[char], pos: usize) -> Option<usize> {
        match self {
            PatternToken::Literal(lit) => {
                let mut end = pos;
                for c in lit.chars() {
                    if text.get(end) != Some(&c) {
                        return None;
                    }
                    end += 1;
                }
                Some(end)
            }
            token => {
                let class = token.class().unwrap();
                if pos >= text.len() || CharClass::of(text[pos]) != class {
                    return None;
                }
                if pos > 0 && CharClass::of(text[pos - 1]) == class {
                    return None;
                }
                let mut end = pos + 1;
                while end < text.len() && CharClass::of(text[end]) == class {
                    end += 1;
                }
                Some(end)
            }
        }
    }
}

impl fmt::Display for PatternToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternToken::Upper => f.write_str("P_C"),
            PatternToken::Lower => f.write_str("P_l"),
            PatternToken::Digits => f.write_str("P_n"),
            PatternToken::Space => f.write_str("P_s"),
            PatternToken::Literal(s) => {
                f.write_str("P_t(")?;
                for c in s.chars() {
                    match c {
                        '\\' => f.write_str("\\\\")?,
                        ')' => f.write_str("\\)")?,
                        ' ' => f.write_str("\\s")?,
                        '\t' => f.write_str("\\t")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for PatternToken {
    type Err = StringsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "P_C" => return Ok(PatternToken::Upper),
            "P_l" => return Ok(PatternToken::Lower),
            "P_n" => return Ok(PatternToken::Digits),
            "P_s" => return Ok(PatternToken::Space),
            _ => {}
        }
        let body = s
            .strip_prefix("P_t(")
            .and_then(|b| b.strip_suffix(')'))
            .ok_or_else(|| StringsError::RuleSyntax(format!("bad pattern token `{s}`")))?;
        let mut out = String::new();
        let mut chars = body.chars();
        while let Some(c) = chars.next() {
            if c != '\\' {
                out.push(c);
                continue;
            }
            match chars.next() {
                Some('\\') => out.push('\\'),
                Some(')') => out.push(')'),
                Some('s') => out.push(' '),
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                other => return Err(StringsError::RuleSyntax(format!("bad escape `\\{other:?}` in `{s}`"))),
            }
        }
        if out.is_empty() {
            return Err(StringsError::RuleSyntax("empty literal token".into()));
        }
        Ok(PatternToken::Literal(out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StringFunction {
    Prefix,
    Suffix,
}

/// `⟨F, P, L⟩`: for every match of `pattern`, take the first (Prefix) or
/// last (Suffix) `len` characters of the matched region.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub function: StringFunction,
    pub pattern: Vec<PatternToken>,
    pub len: usize,
}

impl Rule {
    pub fn new(function: StringFunction, pattern: Vec<PatternToken>, len: usize) -> Self {
        Rule { function, pattern, len }
    }

    /// Every extraction, one per match, in match order.
    pub fn extract_all(&self, value: &str) -> Vec<String> {
        let text: Vec<char> = value.chars().collect();
        let mut out = Vec::new();
        for start in 0..text.len() {
            if let Some(end) = match_pattern(&self.pattern, &text, start) {
                out.extend(self.extract_span(&text, start, end));
            }
        }
        out
    }

    /// The extraction from the match `text[start..end]`, if long enough.
    pub(crate) fn extract_span(&self, text: &[char], start: usize, end: usize) -> Option<String> {
        if end - start < self.len || self.len == 0 {
            return None;
        }
        let piece = match self.function {
            StringFunction::Prefix => &text[start..start + self.len],
            StringFunction::Suffix => &text[end - self.len..end],
        };
        Some(piece.iter().collect())
    }

    /// Distinct extractions from one value.
    pub fn apply(&self, value: &str) -> BTreeSet<String> {
        self.extract_all(value).into_iter().collect()
    }
}

/// End of the match of `pattern` starting at `pos`, if any. Matching is
/// deterministic, so there is at most one match per start position.
pub(crate) fn match_pattern(pattern: &[PatternToken], text: &[char], pos: usize) -> Option<usize> {
    pattern.iter().try_fold(pos, |at, tok| tok.match_at(text, at))
}

/// Longest literal token of a pattern: any match contains it.
pub(crate) fn longest_literal(pattern: &[PatternToken]) -> Option<&str> {
    pattern
        .iter()
        .filter_map(|t| match t {
            PatternToken::Literal(s) => Some(s.as_str()),
            _ => None,
        })
        .max_by_key(|s| s.len())
}

/// Rules grouped by pattern, so a value is matched once per distinct
/// pattern rather than once per rule.
#[derive(Debug, Clone)]
pub struct RuleMatcher<'r> {
    rules: &'r [Rule],
    groups: Vec<(&'r [PatternToken], Vec<usize>)>,
}

impl<'r> RuleMatcher<'r> {
    pub fn new(rules: &'r [Rule]) -> Self {
        let mut index: std::collections::HashMap<&[PatternToken], usize> = std::collections::HashMap::new();
        let mut groups: Vec<(&[PatternToken], Vec<usize>)> = Vec::new();
        for (i, r) in rules.iter().enumerate() {
            let g = *index.entry(&r.pattern).or_insert_with(|| {
                groups.push((&r.pattern, Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push(i);
        }
        RuleMatcher { rules, groups }
    }

    /// Distinct patterns with the indices of the rules sharing each.
    pub fn groups(&self) -> &[(&'r [PatternToken], Vec<usize>)] {
        &self.groups
    }

    /// Calls `emit(rule index, extraction)` for every match of `group` in
    /// `text`.
    pub fn for_each_in_group<E: FnMut(usize, String)>(&self, group: usize, text: &[char], emit: &mut E) {
        let (pattern, members) = &self.groups[group];
        for start in 0..text.len() {
            if let Some(end) = match_pattern(pattern, text, start) {
                for &ri in members {
                    if let Some(piece) = self.rules[ri].extract_span(text, start, end) {
                        emit(ri, piece);
                    }
                }
            }
        }
    }

    /// Calls `emit(rule index, extraction)` for every extraction of every
    /// rule from `value`.
    pub fn for_each<E: FnMut(usize, String)>(&self, value: &str, mut emit: E) {
        let text: Vec<char> = value.chars().collect();
        for (g, (pattern, _)) in self.groups.iter().enumerate() {
            if longest_literal(pattern).is_some_and(|lit| !value.contains(lit)) {
                continue;
            }
            self.for_each_in_group(g, &text, &mut emit);
        }
    }

    /// Union of all rules' extractions from `value`.
    pub fn apply(&self, value: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.for_each(value, |_, s| {
            out.insert(s);
        });
        out
    }
}

/// Convenience wrapper over [`Rule::apply`].
pub fn apply_rule(rule: &Rule, value: &str) -> BTreeSet<String> {
    rule.apply(value)
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let func = match self.function {
            StringFunction::Prefix => "Prefix",
            StringFunction::Suffix => "Suffix",
        };
        write!(f, "{func}  ")?;
        for (i, tok) in self.pattern.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{tok}")?;
        }
        write!(f, "  {}", self.len)
    }
}

impl FromStr for Rule {
    type Err = StringsError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.len() < 3 {
            return Err(StringsError::RuleSyntax(format!("expected `F pattern L`, got `{line}`")));
        }
        let function = match words[0] {
            "Prefix" => StringFunction::Prefix,
            "Suffix" => StringFunction::Suffix,
            other => return Err(StringsError::RuleSyntax(format!("unknown string function `{other}`"))),
        };
        let len: usize = words[words.len() - 1]
            .parse()
            .map_err(|e| StringsError::RuleSyntax(format!("bad length: {e}")))?;
        if len == 0 {
            return Err(StringsError::RuleSyntax("length must be at least 1".into()));
        }
        let pattern = words[1..words.len() - 1]
            .iter()
            .map(|w| w.parse())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Rule { function, pattern, len })
    }
}

/// One rule per line; blank lines and `#` comments are skipped.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>, StringsError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect()
}

pub fn format_rules(rules: &[Rule]) -> String {
    rules.iter().map(|r| format!("{r}\n")).collect()
}
