//! Tagged response grammar.
//!
//! Model responses mark their reasoning with a fixed set of blocks:
//!
//! ```text
//! <COT>…</COT>                 short chain of thought
//! <LONG_COT>…</LONG_COT>       long chain of thought
//! <CODE>…\n>>> call()</CODE>   a function followed by its invocation
//! <OBSERVATION>…</OBSERVATION> interpreter output echo
//! <ANSWER>…</ANSWER>           final answer (required)
//! ```
//!
//! Tag names are matched exactly and case-sensitively. Blocks do not nest:
//! the first matching close tag ends a block. Classification precedence is
//! `LONG_COT` > `CODE` > `COT` > bare `ANSWER`.

use serde::{Deserialize, Serialize};

use crate::format::ReasoningFormat;

pub const COT: &str = "COT";
pub const LONG_COT: &str = "LONG_COT";
pub const CODE: &str = "CODE";
pub const OBSERVATION: &str = "OBSERVATION";
pub const ANSWER: &str = "ANSWER";

/// Prefix of the invocation line that closes a `<CODE>` block.
pub const CALL_PREFIX: &str = ">>>";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("code block has no `>>>` call line")]
    MissingCallLine,
    #[error("response is not a code format (found {0})")]
    NotCodeFormat(ReasoningFormat),
}

/// Counts tokens in a response.
pub trait Tokenizer {
    fn count_tokens(&self, text: &str) -> usize;
}

/// Default tokenizer: one token per maximal run of non-whitespace characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn count_tokens(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

impl<F: Fn(&str) -> usize> Tokenizer for F {
    fn count_tokens(&self, text: &str) -> usize {
        self(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub format: ReasoningFormat,
    pub rationale: String,
    /// Contents of the `<CODE>` block; present only for code formats.
    pub code_block: Option<String>,
    /// Expression after the final `>>>` line, empty when absent.
    pub call_line: String,
    pub answer: String,
    pub observation: Option<String>,
    pub token_length: usize,
}

impl ParsedResponse {
    fn malformed(token_length: usize) -> Self {
        ParsedResponse {
            format: ReasoningFormat::Malformed,
            rationale: String::new(),
            code_block: None,
            call_line: String::new(),
            answer: String::new(),
            observation: None,
            token_length,
        }
    }

    /// Canonical tagged text for this response. `Malformed` serializes to an
    /// empty string.
    pub fn to_tagged(&self) -> String {
        let mut out = String::new();
        let mut block = |tag: &str, body: &str| {
            out.push_str(&format!("<{tag}>\n{body}\n</{tag}>\n"));
        };
        match self.format {
            ReasoningFormat::Malformed => return String::new(),
            ReasoningFormat::DirectAnswer => {}
            ReasoningFormat::ShortCot => block(COT, &self.rationale),
            ReasoningFormat::LongCot => block(LONG_COT, &self.rationale),
            ReasoningFormat::CodeText | ReasoningFormat::CodeExec => {
                if !self.rationale.is_empty() {
                    block(COT, &self.rationale);
                }
                block(CODE, self.code_block.as_deref().unwrap_or_default());
                if let Some(obs) = &self.observation {
                    block(OBSERVATION, obs);
                }
            }
        }
        block(ANSWER, &self.answer);
        out
    }
}

/// Contents of every `<tag>…</tag>` block in order. `None` when an open tag
/// has no matching close tag.
fn blocks<'a>(raw: &'a str, tag: &str) -> Option<Vec<&'a str>> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let mut found = Vec::new();
    let mut rest = raw;
    while let Some(start) = rest.find(&open) {
        let body = &rest[start + open.len()..];
        let end = body.find(&close)?;
        found.push(&body[..end]);
        rest = &body[end + close.len()..];
    }
    Some(found)
}

/// Parse with the default whitespace tokenizer.
pub fn parse_response(raw: &str) -> ParsedResponse {
    parse_response_with(raw, &WhitespaceTokenizer)
}

pub fn parse_response_with(raw: &str, tokenizer: &dyn Tokenizer) -> ParsedResponse {
    let token_length = tokenizer.count_tokens(raw);

    let (Some(answers), Some(cots), Some(long_cots), Some(codes), Some(observations)) =
        (blocks(raw, ANSWER), blocks(raw, COT), blocks(raw, LONG_COT), blocks(raw, CODE), blocks(raw, OBSERVATION))
    else {
        return ParsedResponse::malformed(token_length);
    };

    let answer = match answers.last() {
        Some(a) if !a.trim().is_empty() => a.trim().to_string(),
        _ => return ParsedResponse::malformed(token_length),
    };

    let format = if !long_cots.is_empty() {
        ReasoningFormat::LongCot
    } else if !codes.is_empty() {
        ReasoningFormat::CodeText
    } else if !cots.is_empty() {
        ReasoningFormat::ShortCot
    } else {
        ReasoningFormat::DirectAnswer
    };

    let rationale = long_cots.first().or(cots.first()).map(|s| s.trim().to_string()).unwrap_or_default();

    let code_block = if format.is_code() { codes.last().map(|c| c.trim().to_string()) } else { None };
    let call_line = code_block.as_deref().and_then(|c| split_code(c).ok()).map(|(_, call)| call).unwrap_or_default();

    ParsedResponse {
        format,
        rationale,
        code_block,
        call_line,
        answer,
        observation: observations.last().map(|o| o.trim().to_string()),
        token_length,
    }
}

/// Split a code block into `(function_source, call_line)` at its final line
/// beginning with `>>>`.
pub fn split_code(code: &str) -> Result<(String, String), GrammarError> {
    let lines: Vec<&str> = code.lines().collect();
    let idx =
        lines.iter().rposition(|l| l.trim_start().starts_with(CALL_PREFIX)).ok_or(GrammarError::MissingCallLine)?;
    let call = lines[idx].trim_start()[CALL_PREFIX.len()..].trim();
    if call.is_empty() {
        return Err(GrammarError::MissingCallLine);
    }
    let source = lines[..idx].join("\n");
    Ok((source.trim_end().to_string(), call.to_string()))
}

pub fn extract_code(parsed: &ParsedResponse) -> Result<(String, String), GrammarError> {
    if !parsed.format.is_code() {
        return Err(GrammarError::NotCodeFormat(parsed.format));
    }
    split_code(parsed.code_block.as_deref().unwrap_or_default())
}
