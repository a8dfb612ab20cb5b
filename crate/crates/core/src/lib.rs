//! Adaptive reasoning-format selection with length-aware group-relative
//! reward shaping.
//!
//! * [`grammar`] parses tagged model responses into one of five formats.
//! * [`reward`] computes the shaped reward chain and group advantages.
//! * [`sim`] trains a categorical format policy against a scenario.
//! * [`exec`] runs code rollouts in a child interpreter with a fallback.
//! * [`judge`] scores answers and aggregates samples by majority vote.

pub mod exec;
pub mod format;
pub mod grammar;
pub mod judge;
pub mod reward;
pub mod sim;

pub use exec::{ExecLimits, ExecOutcome, ExecStatus, Executor, Resolution};
pub use format::ReasoningFormat;
pub use grammar::{extract_code, parse_response, GrammarError, ParsedResponse};
pub use judge::{judge_answer, majority_vote, AnswerJudge, GoldAnswer, JudgeError, RuleJudge, VoteOutcome, VoteSample};
pub use reward::{
    cosine_decay, format_encouragement, group_advantage, length_penalty, shape_group, DecayMode, PenaltyParams,
    RewardError, RewardTrace, Rollout, RolloutGroup, Schedule,
};

// Compile and run the guide's snippets as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/formats-grammar.md")]
    mod formats_grammar {}
    #[doc = include_str!("../../../book/src/reward-shaping.md")]
    mod reward_shaping {}
    #[doc = include_str!("../../../book/src/advantage.md")]
    mod advantage {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/execution.md")]
    mod execution {}
    #[doc = include_str!("../../../book/src/judging.md")]
    mod judging {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
