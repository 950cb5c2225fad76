//! Prompt templates and rendering.
//!
//! The template texts live in `templates/v1/` and are embedded verbatim.
//! A rendered prompt is the template, a newline, one `- ` bullet per
//! comment, a blank line and the fixed format instruction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Category;

pub const TEMPLATE_VERSION: &str = "v1";

const PROMPT1: &str = include_str!("../../templates/v1/prompt1.txt");
const PROMPT2: &str = include_str!("../../templates/v1/prompt2.txt");
const PROMPT3: &str = include_str!("../../templates/v1/prompt3.txt");

/// Appended after the comment list so responses come back sectioned.
pub const FORMAT_INSTRUCTION: &str = include_str!("../../templates/v1/format_instruction.txt");

const BULLET: &str = "- ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TemplateId {
    P1,
    P2,
    P3,
}

impl TemplateId {
    pub const ALL: [TemplateId; 3] = [TemplateId::P1, TemplateId::P2, TemplateId::P3];

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::P1 => PROMPT1,
            TemplateId::P2 => PROMPT2,
            TemplateId::P3 => PROMPT3,
        }
    }

    /// Categories offered as section headings, in prompt order.
    pub fn categories(self) -> &'static [Category] {
        &Category::ALL[..self.category_count()]
    }

    pub fn category_count(self) -> usize {
        match self {
            TemplateId::P1 => 2,
            TemplateId::P2 => 3,
            TemplateId::P3 => 4,
        }
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(TemplateId::P1),
            2 => Some(TemplateId::P2),
            3 => Some(TemplateId::P3),
            _ => None,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.number())
    }
}

impl FromStr for TemplateId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.trim().trim_start_matches(['P', 'p']);
        digits
            .parse::<u8>()
            .ok()
            .and_then(TemplateId::from_number)
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

/// The section heading the templates use for a category.
pub fn heading_phrase(category: Category) -> &'static str {
    match category {
        Category::WentWell => "What went well?",
        Category::DidNotGoWell => "What did not go well",
        Category::UnclearNeutral => "Unclear/neutral",
        Category::Irrelevant => "Irrelevant",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("no comments to classify")]
    EmptyInput,
    #[error("comment {index} is empty or spans several lines")]
    InvalidComment { index: usize },
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
}

pub fn build_prompt<S: AsRef<str>>(template: TemplateId, comments: &[S]) -> Result<String, PromptError> {
    if comments.is_empty() {
        return Err(PromptError::EmptyInput);
    }
    let body_len: usize = comments.iter().map(|c| c.as_ref().len() + 3).sum();
    let mut out = String::with_capacity(template.text().len() + body_len + FORMAT_INSTRUCTION.len() + 4);
    out.push_str(template.text());
    out.push('\n');
    for (index, comment) in comments.iter().enumerate() {
        let text = comment.as_ref();
        if text.trim().is_empty() || text.contains(['\n', '\r']) {
            return Err(PromptError::InvalidComment { index });
        }
        out.push_str(BULLET);
        out.push_str(text);
        out.push('\n');
    }
    out.push('\n');
    out.push_str(FORMAT_INSTRUCTION);
    Ok(out)
}

/// Inverse of [`build_prompt`]: recovers the template and the comment list
/// from a rendered prompt. Returns `None` for text that was not rendered by
/// `build_prompt`.
pub fn parse_prompt(prompt: &str) -> Option<(TemplateId, Vec<String>)> {
    let template = TemplateId::ALL
        .into_iter()
        .find(|t| prompt.starts_with(t.text()) && prompt[t.text().len()..].starts_with('\n'))?;
    let body = prompt[template.text().len() + 1..].strip_suffix(FORMAT_INSTRUCTION)?;
    let body = body.strip_suffix('\n')?;
    let comments = body
        .lines()
        .map(|line| line.strip_prefix(BULLET).map(str::to_string))
        .collect::<Option<Vec<_>>>()?;
    Some((template, comments))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(haystack: &str, needle: &str) -> usize {
        haystack.matches(needle).count()
    }

    #[test]
    fn prompt2_example() {
        let p = build_prompt(TemplateId::P2, &["Estimation was accurate", "Demo crashed"]).unwrap();
        assert!(p.starts_with(
            "A team is doing their Scrum Retrospective and the following comments have been \
             collected. Please group them in three sets: \"What went well?\", \"What did not go well\" \
             and \"Unclear/neutral\"."
        ));
        let expected_tail = "The list of comments:\n- Estimation was accurate\n- Demo crashed\n\n\
            Answer using the exact section headings above, one comment per line, prefixed with '- '.";
        assert!(p.ends_with(expected_tail), "{p}");
    }

    #[test]
    fn empty_input_rejected() {
        let none: [&str; 0] = [];
        assert_eq!(build_prompt(TemplateId::P1, &none), Err(PromptError::EmptyInput));
    }

    #[test]
    fn multi_line_comment_rejected() {
        assert_eq!(
            build_prompt(TemplateId::P1, &["ok", "a\nb"]),
            Err(PromptError::InvalidComment { index: 1 })
        );
    }

    #[test]
    fn templates_name_their_headings() {
        for t in TemplateId::ALL {
            let text = t.text();
            assert!(!text.ends_with('\n'));
            for c in Category::ALL {
                let offered = t.categories().contains(&c);
                let quoted = format!("\"{}\"", heading_phrase(c));
                // each offered heading is quoted twice: once in the set list, once in the sorting rule
                assert_eq!(count(text, &quoted), if offered { 2 } else { 0 }, "{t} {c}");
            }
        }
    }

    #[test]
    fn fifty_texts_each_once() {
        let texts: Vec<String> = (0..50).map(|i| format!("zq{i:02}x comment number {i} q")).collect();
        let p = build_prompt(TemplateId::P3, &texts).unwrap();
        for t in &texts {
            assert_eq!(count(&p, t), 1, "{t}");
        }
    }

    #[test]
    fn parse_prompt_inverts_build() {
        for t in TemplateId::ALL {
            let texts = ["one", "two - three", "- leading dash"];
            let p = build_prompt(t, &texts).unwrap();
            let (back, comments) = parse_prompt(&p).unwrap();
            assert_eq!(back, t);
            assert_eq!(comments, texts);
        }
        assert_eq!(parse_prompt("hello"), None);
    }

    #[test]
    fn template_ids_parse() {
        assert_eq!("P2".parse::<TemplateId>().unwrap(), TemplateId::P2);
        assert_eq!("3".parse::<TemplateId>().unwrap(), TemplateId::P3);
        assert!("4".parse::<TemplateId>().is_err());
    }
}
