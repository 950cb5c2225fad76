//! Deterministic offline classifier.
//!
//! Rules are evaluated in tiers, first match wins:
//!
//! 1. domain rules from `scrum_rules.txt` (regex, category), which also carry
//!    the markers for non-project chatter;
//! 2. for "X, but Y" statements only the clause after the last "but" is
//!    classified (tiers 1, 3 and 4 applied to that clause);
//! 3. lexicon polarity: positive minus negative term hits, with simple
//!    negation;
//! 4. no signal: unclear/neutral.
//!
//! The lexicon is data. [`Lexicon::from_dir`] loads a replacement set.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::{Regex, RegexBuilder};
use thiserror::Error;

use super::prompt::{heading_phrase, parse_prompt};
use crate::completion::{Completion, CompletionError};
use crate::domain::Category;

const POSITIVE: &str = include_str!("../../data/lexicon/positive.txt");
const NEGATIVE: &str = include_str!("../../data/lexicon/negative.txt");
const SCRUM_RULES: &str = include_str!("../../data/lexicon/scrum_rules.txt");

const NEGATORS: &[&str] = &["not", "no", "never", "hardly", "cannot"];

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{file}:{line}: expected `<pattern>\\t<category>`")]
    MalformedRule { file: String, line: usize },
    #[error("{file}:{line}: {source}")]
    BadPattern {
        file: String,
        line: usize,
        #[source]
        source: regex::Error,
    },
    #[error("{file}:{line}: unknown category `{label}`")]
    UnknownCategory { file: String, line: usize, label: String },
    #[error("reading {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleTier {
    DomainRule,
    ButClause,
    Lexicon,
    NoSignal,
}

#[derive(Debug, Clone)]
struct Rule {
    pattern: Regex,
    category: Category,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    positive: Vec<Vec<String>>,
    negative: Vec<Vec<String>>,
    rules: Vec<Rule>,
}

fn data_lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn parse_terms(src: &str) -> Vec<Vec<String>> {
    let mut terms: Vec<Vec<String>> = data_lines(src)
        .map(|(_, l)| tokenize(l))
        .filter(|t| !t.is_empty())
        .collect();
    // longest phrases first so "too long" wins over "long"
    terms.sort_by_key(|t| std::cmp::Reverse(t.len()));
    terms
}

fn parse_rules(src: &str, file: &str) -> Result<Vec<Rule>, LexiconError> {
    data_lines(src)
        .map(|(line, l)| {
            let (pattern, label) = l.split_once('\t').ok_or_else(|| LexiconError::MalformedRule {
                file: file.to_string(),
                line,
            })?;
            let category = label.trim().parse::<Category>().map_err(|_| LexiconError::UnknownCategory {
                file: file.to_string(),
                line,
                label: label.trim().to_string(),
            })?;
            let pattern = RegexBuilder::new(pattern.trim())
                .case_insensitive(true)
                .build()
                .map_err(|source| LexiconError::BadPattern {
                    file: file.to_string(),
                    line,
                    source,
                })?;
            Ok(Rule { pattern, category })
        })
        .collect()
}

impl Lexicon {
    pub fn from_sources(positive: &str, negative: &str, scrum_rules: &str) -> Result<Self, LexiconError> {
        Ok(Self {
            positive: parse_terms(positive),
            negative: parse_terms(negative),
            rules: parse_rules(scrum_rules, "scrum_rules.txt")?,
        })
    }

    /// Loads `positive.txt`, `negative.txt` and `scrum_rules.txt` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, LexiconError> {
        let read = |name: &str| {
            fs::read_to_string(dir.join(name)).map_err(|source| LexiconError::Io {
                file: dir.join(name).display().to_string(),
                source,
            })
        };
        Self::from_sources(&read("positive.txt")?, &read("negative.txt")?, &read("scrum_rules.txt")?)
    }

    /// The lexicon shipped with the crate.
    pub fn builtin() -> &'static Lexicon {
        static BUILTIN: OnceLock<Lexicon> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            Lexicon::from_sources(POSITIVE, NEGATIVE, SCRUM_RULES).expect("bundled lexicon is valid")
        })
    }
}

/// Lowercase word tokens; hyphens and apostrophes inside words are kept.
fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\''))
        .map(|t| t.trim_matches(|c| c == '-' || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn is_negator(token: &str) -> bool {
    NEGATORS.contains(&token) || token.ends_with("n't")
}

fn last_but_clause(text: &str) -> Option<&str> {
    static BUT: OnceLock<Regex> = OnceLock::new();
    let re = BUT.get_or_init(|| Regex::new(r"(?i)(,\s*|\s)but\s").unwrap());
    let m = re.find_iter(text).last()?;
    let clause = text[m.end()..].trim();
    (!clause.is_empty()).then_some(clause)
}

#[derive(Debug, Clone)]
pub struct FallbackClassifier {
    lexicon: Lexicon,
}

impl Default for FallbackClassifier {
    fn default() -> Self {
        Self::new(Lexicon::builtin().clone())
    }
}

impl FallbackClassifier {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }

    pub fn classify(&self, text: &str) -> Category {
        self.explain(text).0
    }

    /// The label together with the tier that produced it.
    pub fn explain(&self, text: &str) -> (Category, RuleTier) {
        if let Some(c) = self.domain_rule(text) {
            return (c, RuleTier::DomainRule);
        }
        if let Some(clause) = last_but_clause(text) {
            let category = self
                .domain_rule(clause)
                .or_else(|| self.polarity(clause))
                .unwrap_or(Category::UnclearNeutral);
            return (category, RuleTier::ButClause);
        }
        match self.polarity(text) {
            Some(c) => (c, RuleTier::Lexicon),
            None => (Category::UnclearNeutral, RuleTier::NoSignal),
        }
    }

    fn domain_rule(&self, text: &str) -> Option<Category> {
        self.lexicon
            .rules
            .iter()
            .find(|r| r.pattern.is_match(text))
            .map(|r| r.category)
    }

    /// `None` when no lexicon term occurs at all.
    fn polarity(&self, text: &str) -> Option<Category> {
        let tokens = tokenize(text);
        let mut score = 0i32;
        let mut hits = 0usize;
        let mut i = 0;
        while i < tokens.len() {
            let matched = [(&self.lexicon.positive, 1), (&self.lexicon.negative, -1)]
                .into_iter()
                .flat_map(|(terms, sign)| terms.iter().map(move |t| (t, sign)))
                .filter(|(t, _)| tokens[i..].starts_with(t))
                .max_by_key(|(t, _)| t.len());
            match matched {
                Some((term, sign)) => {
                    let negated = tokens[i.saturating_sub(2)..i].iter().any(|t| is_negator(t));
                    score += if negated { -sign } else { sign };
                    hits += 1;
                    i += term.len();
                }
                None => i += 1,
            }
        }
        if hits == 0 {
            return None;
        }
        Some(match score.signum() {
            1 => Category::WentWell,
            -1 => Category::DidNotGoWell,
            _ => Category::UnclearNeutral,
        })
    }
}

/// Classifies with the bundled lexicon.
pub fn fallback_classify(text: &str) -> Category {
    static DEFAULT: OnceLock<FallbackClassifier> = OnceLock::new();
    DEFAULT.get_or_init(FallbackClassifier::default).classify(text)
}

/// Answers rendered classification prompts with the rule engine, in the same
/// sectioned format a chat model is asked for. Comments whose label has no
/// heading in the prompt's template are left out of the response.
#[derive(Debug, Clone, Default)]
pub struct FallbackResponder {
    classifier: FallbackClassifier,
}

impl FallbackResponder {
    pub fn new(classifier: FallbackClassifier) -> Self {
        Self { classifier }
    }
}

impl Completion for FallbackResponder {
    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        let (template, comments) = parse_prompt(prompt).ok_or_else(|| {
            CompletionError::Unavailable("fallback classifier only answers classification prompts".into())
        })?;
        let labels: Vec<Category> = comments.iter().map(|c| self.classifier.classify(c)).collect();
        let mut out = String::new();
        for &category in template.categories() {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "{}", heading_phrase(category));
            for (text, _) in comments.iter().zip(&labels).filter(|(_, l)| **l == category) {
                let _ = writeln!(out, "- {text}");
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::prompt::{build_prompt, TemplateId};

    #[test]
    fn scrum_exemplars() {
        assert_eq!(fallback_classify("Our daily standups were 45 minutes long"), Category::DidNotGoWell);
        assert_eq!(fallback_classify("We played planning poker at the meeting"), Category::WentWell);
        assert_eq!(
            fallback_classify("The laptop battery become empty during the demo, but we had a back-up"),
            Category::WentWell
        );
        assert_eq!(fallback_classify("Estimation"), Category::UnclearNeutral);
    }

    #[test]
    fn tiers_reported() {
        let c = FallbackClassifier::default();
        assert_eq!(c.explain("Our daily standups were 45 minutes long").1, RuleTier::DomainRule);
        assert_eq!(c.explain("Demo was late, but the client was happy").1, RuleTier::ButClause);
        assert_eq!(c.explain("Code reviews were fast").1, RuleTier::Lexicon);
        assert_eq!(c.explain("Estimation").1, RuleTier::NoSignal);
    }

    #[test]
    fn short_standups_are_fine() {
        assert_eq!(fallback_classify("Daily standups took 10 minutes"), Category::WentWell);
        assert_eq!(fallback_classify("Standups ran 20 min every day"), Category::DidNotGoWell);
    }

    #[test]
    fn negation_flips_polarity() {
        assert_eq!(fallback_classify("The staging environment was not stable"), Category::DidNotGoWell);
        assert_eq!(fallback_classify("Tests weren't flaky anymore"), Category::WentWell);
    }

    #[test]
    fn but_clause_decides() {
        assert_eq!(fallback_classify("Great demo, but the CI was slow"), Category::DidNotGoWell);
        assert_eq!(fallback_classify("Great demo, but Thursday"), Category::UnclearNeutral);
    }

    #[test]
    fn non_project_chatter_is_irrelevant() {
        for t in ["Hello everyone", "Test comment please ignore", "asdf", "What is for lunch today?"] {
            assert_eq!(fallback_classify(t), Category::Irrelevant, "{t}");
        }
    }

    #[test]
    fn rule_file_errors_are_located() {
        let err = Lexicon::from_sources("", "", "# c\nfoo\tnope").unwrap_err();
        assert!(matches!(err, LexiconError::UnknownCategory { line: 2, .. }), "{err}");
        let err = Lexicon::from_sources("", "", "foo went_well").unwrap_err();
        assert!(matches!(err, LexiconError::MalformedRule { line: 1, .. }));
        let err = Lexicon::from_sources("", "", "(\twent_well").unwrap_err();
        assert!(matches!(err, LexiconError::BadPattern { line: 1, .. }));
    }

    #[test]
    fn responder_omits_labels_without_heading() {
        let prompt = build_prompt(TemplateId::P1, &["Code reviews were fast", "Estimation", "Flaky tests"]).unwrap();
        let response = FallbackResponder::default().complete(&prompt).unwrap();
        assert_eq!(
            response,
            "What went well?\n- Code reviews were fast\n\nWhat did not go well\n- Flaky tests\n"
        );
    }

    #[test]
    fn responder_rejects_foreign_prompts() {
        assert!(FallbackResponder::default().complete("summarize this").is_err());
    }
}
