//! Reward signals: trace parsing and format reward, tool-call correctness
//! with optimal assignment, constraint verifiers, the ternary judge mapping,
//! and length/repetition reward reshaping.

pub mod judge;
pub mod tool;
pub mod trace;
pub mod verify;

pub use judge::{judge_to_reward, Judge, ScriptedJudge, Verdict};
pub use tool::{correctness_reward, correctness_reward_exhaustive, name_overlap, pair_param_score, tool_reward, Correctness, PairScore, MAX_CALLS};
pub use trace::{format_reward, parse_trace, FormatError, ToolCall, ToolCallTrace};
pub use verify::{multiple_choice_verify, verify_constraints, Constraint};

use serde::{Deserialize, Serialize};

/// Additive reward decomposition. `final_reward` is always
/// `format + correct + length_penalty + repetition_penalty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format: f64,
    pub correct: f64,
    pub length_penalty: f64,
    pub repetition_penalty: f64,
    pub final_reward: f64,
}

impl RewardBreakdown {
    pub fn new(format: f64, correct: f64) -> Self {
        RewardBreakdown {
            format,
            correct,
            length_penalty: 0.0,
            repetition_penalty: 0.0,
            final_reward: format + correct,
        }
    }

    fn with_penalties(mut self, length: f64, repetition: f64) -> Self {
        self.length_penalty = length;
        self.repetition_penalty = repetition;
        self.final_reward = self.format + self.correct + length + repetition;
        self
    }
}

/// Knobs for the reshaping penalties.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReshapeConfig {
    /// Repetition penalty gain.
    pub gamma_rep: f64,
    /// Repeated-4-gram fraction below which no penalty applies.
    pub rep_threshold: f64,
}

impl Default for ReshapeConfig {
    fn default() -> Self {
        ReshapeConfig {
            gamma_rep: 1.0,
            rep_threshold: 0.2,
        }
    }
}

/// Fraction of positions that start a 4-gram already seen earlier in `text`
/// (whitespace-delimited words). Zero for texts shorter than 4 words.
pub fn repeated_ngram_fraction(text: &str) -> f64 {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() < 4 {
        return 0.0;
    }
    let total = words.len() - 3;
    let mut seen = std::collections::HashSet::new();
    let mut repeats = 0usize;
    for i in 0..total {
        if !seen.insert(&words[i..i + 4]) {
            repeats += 1;
        }
    }
    repeats as f64 / total as f64
}

/// Reshape a base reward with length and repetition penalties.
///
/// The length penalty ramps linearly from 0 to -1 on the final
/// `ceil(max_len / 8)` tokens of the budget; the repetition penalty is
/// `-gamma * max(0, repeated-4-gram fraction - threshold)`.
pub fn reshape_reward(base: f64, response_len: usize, max_len: usize, text: &str) -> RewardBreakdown {
    reshape_reward_with(base, response_len, max_len, text, &ReshapeConfig::default())
}

pub fn reshape_reward_with(
    base: f64,
    response_len: usize,
    max_len: usize,
    text: &str,
    cfg: &ReshapeConfig,
) -> RewardBreakdown {
    assert!(max_len >= 1, "max_len must be >= 1");
    let buffer = max_len.div_ceil(8);
    let ramp_start = max_len - buffer;
    let length_penalty = if response_len <= ramp_start {
        0.0
    } else {
        -(((response_len - ramp_start) as f64) / buffer as f64).min(1.0)
    };
    let rep_frac = repeated_ngram_fraction(text);
    let repetition_penalty = -cfg.gamma_rep * (rep_frac - cfg.rep_threshold).max(0.0);
    RewardBreakdown::new(0.0, base).with_penalties(length_penalty, repetition_penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn short_clean_response_is_unpenalized() {
        let bd = reshape_reward(1.0, 10, 64, "a b c d e f");
        assert_eq!(bd.length_penalty, 0.0);
        assert_eq!(bd.repetition_penalty, 0.0);
        assert_eq!(bd.final_reward, 1.0);
    }

    #[test]
    fn length_penalty_hits_minus_one_at_the_budget() {
        let bd = reshape_reward(1.0, 64, 64, "x");
        assert_abs_diff_eq!(bd.length_penalty, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bd.final_reward, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn length_penalty_ramps_linearly() {
        // max_len 16 -> buffer 2, ramp over lengths 15 and 16.
        let half = reshape_reward(0.0, 15, 16, "x");
        assert_abs_diff_eq!(half.length_penalty, -0.5, epsilon = 1e-12);
        let full = reshape_reward(0.0, 16, 16, "x");
        assert_abs_diff_eq!(full.length_penalty, -1.0, epsilon = 1e-12);
        let over = reshape_reward(0.0, 40, 16, "x");
        assert_abs_diff_eq!(over.length_penalty, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn periodic_text_matches_sliding_window_oracle() {
        // Independent oracle: scan with an explicit quadratic window compare.
        let text = "ab cd ab cd ab cd ab cd ab cd ab cd ab cd ab cd".repeat(4);
        let words: Vec<&str> = text.split_whitespace().collect();
        let total = words.len() - 3;
        let mut repeats = 0;
        for i in 0..total {
            let mut dup = false;
            for j in 0..i {
                if words[j..j + 4] == words[i..i + 4] {
                    dup = true;
                    break;
                }
            }
            if dup {
                repeats += 1;
            }
        }
        let oracle = repeats as f64 / total as f64;
        assert_abs_diff_eq!(repeated_ngram_fraction(&text), oracle, epsilon = 1e-12);
        // Fully periodic text repeats every 4-gram after the first two.
        assert!(oracle > 0.9);
        let bd = reshape_reward(1.0, 8, 64, &text);
        assert_abs_diff_eq!(
            bd.repetition_penalty,
            -(oracle - 0.2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn breakdown_sum_invariant_holds() {
        let bd = reshape_reward(0.7, 63, 64, "r r r r r r r r r r");
        assert_abs_diff_eq!(
            bd.final_reward,
            bd.format + bd.correct + bd.length_penalty + bd.repetition_penalty,
            epsilon = 1e-12
        );
    }
}
