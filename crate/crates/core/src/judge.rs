//! Rule-based answer checking and budgeted majority voting.
//!
//! Multiple-choice answers compare the first standalone option letter.
//! Free-form answers are normalized (trimmed, case-folded, currency and
//! percent symbols and trailing unit words removed, thousands separators
//! dropped) and compared numerically with a relative tolerance when both
//! sides parse as numbers, otherwise as strings.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Relative tolerance for numeric free-form answers.
pub const NUMERIC_REL_TOL: f64 = 1e-6;

pub const CHOICE_LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];

const SYMBOLS: [char; 5] = ['%', '$', '€', '£', '¥'];

/// Trailing words removed from numeric answers.
pub const UNIT_WORDS: &[&str] = &[
    "percent",
    "percentage",
    "dollars",
    "dollar",
    "usd",
    "cents",
    "cent",
    "euros",
    "euro",
    "pounds",
    "yuan",
    "degrees",
    "degree",
    "deg",
    "meters",
    "meter",
    "metres",
    "metre",
    "m",
    "cm",
    "mm",
    "km",
    "kilometers",
    "kilometres",
    "centimeters",
    "millimeters",
    "grams",
    "gram",
    "g",
    "kg",
    "kilograms",
    "mg",
    "liters",
    "litres",
    "liter",
    "litre",
    "l",
    "ml",
    "seconds",
    "second",
    "sec",
    "s",
    "minutes",
    "minute",
    "min",
    "hours",
    "hour",
    "h",
    "days",
    "day",
    "weeks",
    "week",
    "years",
    "year",
    "units",
    "unit",
    "inches",
    "inch",
    "feet",
    "foot",
    "ft",
    "miles",
    "mile",
    "mph",
    "km/h",
    "m/s",
    "sq",
    "square",
    "cubic",
    "points",
    "items",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JudgeError {
    #[error("multiple-choice gold answer must be one of A, B, C, D; got `{0}`")]
    InvalidChoice(String),
    #[error("no samples to vote on")]
    NoSamples,
    #[error("budget {budget} is below the first sample's cost of {first} tokens")]
    BudgetTooSmall { budget: u64, first: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    MultipleChoice,
    FreeForm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub kind: AnswerKind,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
}

impl GoldAnswer {
    pub fn multiple_choice(letter: &str) -> Result<Self, JudgeError> {
        let v = letter.trim().to_ascii_uppercase();
        if v.len() != 1 || !CHOICE_LETTERS.iter().any(|c| v.starts_with(*c)) {
            return Err(JudgeError::InvalidChoice(letter.to_string()));
        }
        Ok(GoldAnswer { kind: AnswerKind::MultipleChoice, value: v, choices: None })
    }

    pub fn free_form(value: impl Into<String>) -> Self {
        GoldAnswer { kind: AnswerKind::FreeForm, value: value.into(), choices: None }
    }
}

/// Extension point for plugging in other correctness checks.
pub trait AnswerJudge {
    fn judge(&self, candidate: &str, gold: &GoldAnswer) -> bool;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleJudge;

impl AnswerJudge for RuleJudge {
    fn judge(&self, candidate: &str, gold: &GoldAnswer) -> bool {
        judge_answer(candidate, gold)
    }
}

/// First letter A–D (either case) not adjacent to another letter or digit.
pub fn extract_choice(candidate: &str) -> Option<char> {
    let chars: Vec<char> = candidate.chars().collect();
    (0..chars.len()).find_map(|i| {
        let c = chars[i].to_ascii_uppercase();
        if !CHOICE_LETTERS.contains(&c) {
            return None;
        }
        let left_ok = i == 0 || !chars[i - 1].is_alphanumeric();
        let right_ok = i + 1 == chars.len() || !chars[i + 1].is_alphanumeric();
        (left_ok && right_ok).then_some(c)
    })
}

/// Canonical form of a free-form answer.
pub fn normalize_free_form(text: &str) -> String {
    let mut s: String = text.trim().to_lowercase();
    s.retain(|c| !SYMBOLS.contains(&c));
    let mut words: Vec<&str> = s.split_whitespace().collect();
    // Drop a trailing period, then unit words after a number.
    if let Some(last) = words.last_mut() {
        *last = last.trim_end_matches('.');
    }
    while words.len() > 1 && UNIT_WORDS.contains(words.last().expect("non-empty")) {
        words.pop();
    }
    let joined = words.join(" ");
    let trimmed = joined.trim_end_matches('.').trim();
    // Thousands separators inside numbers.
    if looks_numeric(&trimmed.replace(',', "")) {
        trimmed.replace(',', "")
    } else {
        trimmed.to_string()
    }
}

fn looks_numeric(s: &str) -> bool {
    parse_number(s).is_some()
}

fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let (n, d) = (num.trim().parse::<f64>().ok()?, den.trim().parse::<f64>().ok()?);
        return (d != 0.0).then(|| n / d).filter(|v| v.is_finite());
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn numbers_match(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= NUMERIC_REL_TOL * a.abs().max(b.abs())
}

pub fn judge_answer(candidate: &str, gold: &GoldAnswer) -> bool {
    match gold.kind {
        AnswerKind::MultipleChoice => match (extract_choice(candidate), extract_choice(&gold.value)) {
            (Some(c), Some(g)) => c == g,
            _ => false,
        },
        AnswerKind::FreeForm => {
            let c = normalize_free_form(candidate);
            let g = normalize_free_form(&gold.value);
            if c.is_empty() {
                return false;
            }
            match (parse_number(&c), parse_number(&g)) {
                (Some(x), Some(y)) => numbers_match(x, y),
                _ => c == g,
            }
        }
    }
}

/// Key under which votes are tallied: trimmed, whitespace-collapsed,
/// case-folded.
pub fn vote_key(answer: &str) -> String {
    answer.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteSample {
    pub answer: String,
    pub tokens: u64,
}

impl VoteSample {
    pub fn new(answer: impl Into<String>, tokens: u64) -> Self {
        VoteSample { answer: answer.into(), tokens }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteOutcome {
    /// Surface form of the winning answer as first seen.
    pub winner: String,
    /// Votes per answer, keyed by first-seen surface form.
    pub counts: std::collections::BTreeMap<String, usize>,
    pub samples_used: usize,
    pub tokens_spent: u64,
}

/// Majority vote over samples taken in order until the next one would
/// overrun `budget`. Ties go to the answer that appeared first.
pub fn majority_vote(samples: &[VoteSample], budget: u64) -> Result<VoteOutcome, JudgeError> {
    let first = samples.first().ok_or(JudgeError::NoSamples)?;
    if first.tokens > budget {
        return Err(JudgeError::BudgetTooSmall { budget, first: first.tokens });
    }
    let mut spent = 0u64;
    // key -> (surface form, count, first index)
    let mut tally: HashMap<String, (String, usize, usize)> = HashMap::new();
    let mut used = 0;
    for (i, s) in samples.iter().enumerate() {
        let Some(total) = spent.checked_add(s.tokens).filter(|&t| t <= budget) else { break };
        spent = total;
        used += 1;
        tally.entry(vote_key(&s.answer)).or_insert_with(|| (s.answer.trim().to_string(), 0, i)).1 += 1;
    }
    let (winner, _, _) = tally
        .values()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .cloned()
        .expect("at least one sample fits the budget");
    Ok(VoteOutcome {
        winner,
        counts: tally.into_values().map(|(surface, n, _)| (surface, n)).collect(),
        samples_used: used,
        tokens_spent: spent,
    })
}
