//! Parsing of sectioned classifier responses.
//!
//! The expected response is plain text: a heading line per category followed
//! by `- ` bullets, one comment per line. Parsing is lenient about markdown
//! decoration, numbering and casing, and tolerates small rewordings through a
//! fuzzy fallback controlled by [`MatchPolicy`].

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Category, CommentId};

pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPolicy {
    fuzzy_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("no category headings found in classifier response")]
    NoHeadingsFound,
    #[error("fuzzy threshold {0} is outside (0.5, 1.0]")]
    InvalidThreshold(f64),
}

impl MatchPolicy {
    pub fn new(fuzzy_threshold: f64) -> Result<Self, ParseError> {
        if fuzzy_threshold > 0.5 && fuzzy_threshold <= 1.0 {
            Ok(Self { fuzzy_threshold })
        } else {
            Err(ParseError::InvalidThreshold(fuzzy_threshold))
        }
    }

    pub fn fuzzy_threshold(&self) -> f64 {
        self.fuzzy_threshold
    }
}

impl Default for MatchPolicy {
    fn default() -> Self {
        Self {
            fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawAllocation {
    /// One entry per (matched comment, section). A comment listed under two
    /// headings appears twice.
    pub assignments: Vec<(CommentId, Category)>,
    pub unmatched_response_lines: Vec<String>,
    /// Comments matched only through the fuzzy fallback.
    pub reformulated: Vec<CommentId>,
}

/// Lowercase and collapse runs of whitespace.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn heading_category(line: &str) -> Option<Category> {
    let stripped = line
        .trim()
        .trim_matches(|c: char| matches!(c, '#' | '*' | '_' | '"' | '\'' | '`' | ':' | '“' | '”') || c.is_whitespace())
        .trim_end_matches('?');
    let key = normalize(stripped);
    match key.as_str() {
        "what went well" => Some(Category::WentWell),
        "what did not go well" | "what didn't go well" | "what did not go well?" => Some(Category::DidNotGoWell),
        "unclear/neutral" | "unclear / neutral" | "unclear" | "neutral" | "unclear or neutral" => {
            Some(Category::UnclearNeutral)
        }
        "irrelevant" => Some(Category::Irrelevant),
        _ => None,
    }
}

/// Strips a list marker (`-`, `*`, `•`, `1.`, `1)`) if present.
fn strip_bullet(line: &str) -> (bool, &str) {
    let t = line.trim();
    for marker in ["- ", "* ", "• ", "– ", "— "] {
        if let Some(rest) = t.strip_prefix(marker) {
            return (true, rest);
        }
    }
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(rest) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return (true, rest);
        }
    }
    (false, t)
}

fn unquote(text: &str) -> &str {
    let t = text.trim();
    for (open, close) in [('"', '"'), ('“', '”'), ('\'', '\'')] {
        if t.len() >= 2 && t.starts_with(open) && t.ends_with(close) {
            return t[open.len_utf8()..t.len() - close.len_utf8()].trim();
        }
    }
    t
}

struct Matcher<'a> {
    inputs: &'a [(CommentId, String)],
    normalized: Vec<String>,
    exact: HashMap<String, Vec<usize>>,
    threshold: f64,
    assigned_anywhere: HashSet<usize>,
}

impl<'a> Matcher<'a> {
    fn new(inputs: &'a [(CommentId, String)], policy: &MatchPolicy) -> Self {
        let normalized: Vec<String> = inputs.iter().map(|(_, t)| normalize(t)).collect();
        let mut exact: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, n) in normalized.iter().enumerate() {
            exact.entry(n.clone()).or_default().push(i);
        }
        Self {
            inputs,
            normalized,
            exact,
            threshold: policy.fuzzy_threshold,
            assigned_anywhere: HashSet::new(),
        }
    }

    /// Among equally good candidates prefer an input not yet seen anywhere,
    /// then one not yet seen in the current section. Identical input texts
    /// are thereby spread over distinct response lines.
    fn pick(&self, candidates: &[usize], in_section: &HashSet<usize>) -> usize {
        candidates
            .iter()
            .copied()
            .find(|i| !self.assigned_anywhere.contains(i))
            .or_else(|| candidates.iter().copied().find(|i| !in_section.contains(i)))
            .unwrap_or(candidates[0])
    }

    fn find(&self, line: &str, in_section: &HashSet<usize>) -> Option<(usize, bool)> {
        let key = normalize(line);
        if key.is_empty() {
            return None;
        }
        if let Some(candidates) = self.exact.get(&key) {
            return Some((self.pick(candidates, in_section), false));
        }
        let mut best = 0.0_f64;
        let mut candidates = Vec::new();
        for (i, n) in self.normalized.iter().enumerate() {
            let sim = strsim::normalized_levenshtein(&key, n);
            if sim < self.threshold {
                continue;
            }
            if sim > best {
                best = sim;
                candidates.clear();
            }
            if sim == best {
                candidates.push(i);
            }
        }
        if candidates.is_empty() {
            None
        } else {
            Some((self.pick(&candidates, in_section), true))
        }
    }
}

pub fn parse_allocation(
    response: &str,
    inputs: &[(CommentId, String)],
    policy: &MatchPolicy,
) -> Result<RawAllocation, ParseError> {
    let mut matcher = Matcher::new(inputs, policy);
    let mut raw = RawAllocation::default();
    let mut section: Option<Category> = None;
    let mut in_section: HashSet<usize> = HashSet::new();
    let mut emitted: HashSet<(usize, Category)> = HashSet::new();
    let mut reformulated: HashSet<usize> = HashSet::new();
    let mut saw_heading = false;

    for line in response.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (bulleted, body) = strip_bullet(line);
        if !bulleted {
            if let Some(category) = heading_category(body) {
                section = Some(category);
                saw_heading = true;
                in_section.clear();
                continue;
            }
        }
        let Some(category) = section else {
            raw.unmatched_response_lines.push(line.to_string());
            continue;
        };
        let body = unquote(body);
        match matcher.find(body, &in_section) {
            Some((idx, fuzzy)) => {
                in_section.insert(idx);
                matcher.assigned_anywhere.insert(idx);
                if fuzzy && reformulated.insert(idx) {
                    raw.reformulated.push(inputs[idx].0.clone());
                }
                if emitted.insert((idx, category)) {
                    raw.assignments.push((matcher.inputs[idx].0.clone(), category));
                }
            }
            None => raw.unmatched_response_lines.push(line.to_string()),
        }
    }

    if !saw_heading {
        return Err(ParseError::NoHeadingsFound);
    }
    Ok(raw)
}
