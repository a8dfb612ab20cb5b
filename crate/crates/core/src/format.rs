//! The reasoning formats a response can take.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Discrete reasoning style of a single response.
///
/// `CodeExec` is never produced by the tag parser. A code response starts as
/// `CodeText` and is promoted to `CodeExec` only after its program runs to
/// completion (see [`crate::exec::resolve_code_rollout`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningFormat {
    DirectAnswer,
    ShortCot,
    CodeText,
    CodeExec,
    LongCot,
    /// Unparseable rollout. Earns no reward and no encouragement.
    Malformed,
}

impl ReasoningFormat {
    /// The five real formats, cheapest first. `Malformed` is not included.
    pub const ALL: [ReasoningFormat; 5] = [
        ReasoningFormat::DirectAnswer,
        ReasoningFormat::ShortCot,
        ReasoningFormat::CodeText,
        ReasoningFormat::CodeExec,
        ReasoningFormat::LongCot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningFormat::DirectAnswer => "direct_answer",
            ReasoningFormat::ShortCot => "short_cot",
            ReasoningFormat::CodeText => "code_text",
            ReasoningFormat::CodeExec => "code_exec",
            ReasoningFormat::LongCot => "long_cot",
            ReasoningFormat::Malformed => "malformed",
        }
    }

    pub fn is_code(self) -> bool {
        matches!(self, ReasoningFormat::CodeText | ReasoningFormat::CodeExec)
    }

    pub fn is_malformed(self) -> bool {
        self == ReasoningFormat::Malformed
    }
}

impl fmt::Display for ReasoningFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown reasoning format `{0}`")]
pub struct UnknownFormat(pub String);

impl FromStr for ReasoningFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match norm.as_str() {
            "direct_answer" | "direct" => ReasoningFormat::DirectAnswer,
            "short_cot" | "cot" => ReasoningFormat::ShortCot,
            "code_text" => ReasoningFormat::CodeText,
            "code_exec" => ReasoningFormat::CodeExec,
            "long_cot" => ReasoningFormat::LongCot,
            "malformed" => ReasoningFormat::Malformed,
            _ => return Err(UnknownFormat(s.to_string())),
        })
    }
}
