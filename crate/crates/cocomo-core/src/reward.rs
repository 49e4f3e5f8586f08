//! Reward learning: a tabular Q-table over (context, class) pairs whose
//! values map onto conscious priority levels. Externally observed rewards
//! (and boredom penalties) shape which task families win attention.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::Tick;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RewardError {
    #[error("non-finite reward {0}")]
    NonFiniteReward(f64),
}

/// Learning-rate, discount, exploration, and the value band used for
/// priority normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub alpha: f64,
    pub gamma_d: f64,
    pub epsilon: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: 0.1,
            gamma_d: 0.9,
            epsilon: 0.1,
            v_min: 0.0,
            v_max: 10.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(format!("reward.alpha must be in (0,1], got {}", self.alpha));
        }
        if !(self.gamma_d >= 0.0 && self.gamma_d < 1.0) {
            return Err(format!(
                "reward.gamma_d must be in [0,1), got {}",
                self.gamma_d
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(format!(
                "reward.epsilon must be in [0,1], got {}",
                self.epsilon
            ));
        }
        if !(self.v_min < self.v_max) {
            return Err(format!(
                "reward bounds must satisfy v_min < v_max, got v_min={} v_max={}",
                self.v_min, self.v_max
            ));
        }
        Ok(())
    }
}

/// One observed reward: context is the Q-learning state, class the action.
/// `next_context` defaults to the same context (stationary observation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEvent {
    #[serde(default)]
    pub time: Tick,
    pub context_tag: String,
    pub class_tag: String,
    pub reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_context: Option<String>,
}

/// Tabular state-action values: context -> class -> estimate. Unseen
/// entries read as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    #[serde(flatten)]
    pub config: RewardConfig,
    #[serde(default)]
    pub values: BTreeMap<String, BTreeMap<String, f64>>,
}

impl RewardTable {
    pub fn new(config: RewardConfig) -> Self {
        RewardTable {
            config,
            values: BTreeMap::new(),
        }
    }

    pub fn q(&self, context: &str, class: &str) -> f64 {
        self.values
            .get(context)
            .and_then(|m| m.get(class))
            .copied()
            .unwrap_or(0.0)
    }

    /// Greatest value over the actions known in `context` (0 when none).
    pub fn max_value(&self, context: &str) -> f64 {
        self.values
            .get(context)
            .map(|m| m.values().copied().fold(0.0f64, f64::max))
            .unwrap_or(0.0)
    }

    /// One-step Q-learning update:
    /// Q(s,a) += alpha * (r + gamma_d * max_a' Q(s',a') - Q(s,a)).
    pub fn q_update(
        &mut self,
        context: &str,
        class: &str,
        reward: f64,
        next_context: &str,
    ) -> Result<f64, RewardError> {
        if !reward.is_finite() {
            return Err(RewardError::NonFiniteReward(reward));
        }
        let best_next = self.max_value(next_context);
        let q = self.q(context, class);
        let updated = q + self.config.alpha * (reward + self.config.gamma_d * best_next - q);
        self.values
            .entry(context.to_string())
            .or_default()
            .insert(class.to_string(), updated);
        Ok(updated)
    }

    /// Applies one reward observation.
    pub fn observe(&mut self, event: &RewardEvent) -> Result<f64, RewardError> {
        let next = event
            .next_context
            .as_deref()
            .unwrap_or(event.context_tag.as_str());
        self.q_update(&event.context_tag, &event.class_tag, event.reward, next)
    }

    /// Maps a value estimate onto a conscious level: the estimate is
    /// clamped to [v_min, v_max], normalized, and inverted so that higher
    /// value means a numerically lower (higher-priority) level.
    pub fn priority_for(&self, class: &str, context: &str, levels: usize) -> usize {
        debug_assert!(levels >= 1);
        let v = self.q(context, class).clamp(self.config.v_min, self.config.v_max);
        let norm = (v - self.config.v_min) / (self.config.v_max - self.config.v_min);
        let level = ((1.0 - norm) * (levels - 1) as f64).round() as usize;
        level.min(levels - 1)
    }

    /// `priority_for` with epsilon-greedy exploration: with probability
    /// epsilon the level is drawn uniformly. The generator is consumed only
    /// when epsilon > 0, so epsilon = 0 runs are seed-independent.
    pub fn explore_level<R: Rng>(
        &self,
        class: &str,
        context: &str,
        levels: usize,
        rng: &mut R,
    ) -> usize {
        if self.config.epsilon > 0.0 && rng.gen::<f64>() < self.config.epsilon {
            rng.gen_range(0..levels)
        } else {
            self.priority_for(class, context, levels)
        }
    }

    /// Epsilon-greedy action selection over an explicit action set; greedy
    /// ties break toward the lexicographically smallest action.
    pub fn select_action<R: Rng>(&self, context: &str, actions: &[&str], rng: &mut R) -> String {
        assert!(!actions.is_empty(), "empty action set");
        if self.config.epsilon > 0.0 && rng.gen::<f64>() < self.config.epsilon {
            return actions[rng.gen_range(0..actions.len())].to_string();
        }
        let mut best = actions[0];
        let mut best_q = self.q(context, best);
        for a in &actions[1..] {
            let q = self.q(context, a);
            if q > best_q || (q == best_q && *a < best) {
                best = a;
                best_q = q;
            }
        }
        best.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(alpha: f64, gamma_d: f64) -> RewardTable {
        RewardTable::new(RewardConfig {
            alpha,
            gamma_d,
            epsilon: 0.0,
            ..RewardConfig::default()
        })
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        // alpha = 0 is outside the validated range but the update itself
        // must still be the identity.
        let mut t = table(0.0, 0.9);
        t.q_update("home", "care", 5.0, "home").unwrap();
        assert_eq!(t.q("home", "care"), 0.0);
    }

    #[test]
    fn undiscounted_repeats_converge_to_reward() {
        let mut t = table(0.5, 0.0);
        for _ in 0..200 {
            t.q_update("s", "a", 4.0, "s").unwrap();
        }
        assert!((t.q("s", "a") - 4.0).abs() < 1e-9);
    }

    #[test]
    fn non_finite_reward_is_rejected() {
        let mut t = table(0.1, 0.9);
        assert_eq!(
            t.q_update("s", "a", f64::NAN, "s"),
            Err(RewardError::NonFiniteReward(f64::NAN))
        );
        assert!(t.q_update("s", "a", f64::INFINITY, "s").is_err());
    }

    #[test]
    fn priority_band_endpoints() {
        let mut t = table(1.0, 0.0);
        t.q_update("ctx", "top", 10.0, "ctx").unwrap();
        t.q_update("ctx", "bottom", 0.0, "ctx").unwrap();
        assert_eq!(t.priority_for("top", "ctx", 4), 0);
        assert_eq!(t.priority_for("bottom", "ctx", 4), 3);
        // Values beyond the band clamp to the endpoints.
        t.q_update("ctx", "over", 50.0, "ctx").unwrap();
        assert_eq!(t.priority_for("over", "ctx", 4), 0);
    }

    #[test]
    fn priority_is_monotone_in_value() {
        let cfg = RewardConfig::default();
        let mut t = RewardTable::new(cfg);
        let mut prev_level = None;
        for (i, q) in [9.5, 7.0, 5.0, 2.5, 0.0].iter().enumerate() {
            let class = format!("c{i}");
            t.values
                .entry("ctx".into())
                .or_default()
                .insert(class.clone(), *q);
            let level = t.priority_for(&class, "ctx", 4);
            if let Some(prev) = prev_level {
                assert!(level >= prev, "higher value must not get a lower priority");
            }
            prev_level = Some(level);
        }
    }

    #[test]
    fn observe_defaults_next_context_to_context() {
        let mut a = table(0.3, 0.5);
        let mut b = a.clone();
        let ev = RewardEvent {
            time: 0,
            context_tag: "s".into(),
            class_tag: "a".into(),
            reward: 2.0,
            next_context: None,
        };
        a.observe(&ev).unwrap();
        b.q_update("s", "a", 2.0, "s").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn interleaved_stream_equals_sequential_fold() {
        let stream = [
            ("s", "a", 3.0),
            ("s", "b", -1.0),
            ("t", "a", 0.5),
            ("s", "a", -0.25),
            ("t", "b", 7.0),
            ("s", "b", 2.0),
        ];
        let mut live = table(0.2, 0.8);
        for (s, a, r) in stream {
            live.q_update(s, a, r, s).unwrap();
        }
        // Independent fold: replay the same definition step by step over a
        // plain map.
        let mut oracle: BTreeMap<(String, String), f64> = BTreeMap::new();
        for (s, a, r) in stream {
            let best = oracle
                .iter()
                .filter(|((ctx, _), _)| ctx == s)
                .map(|(_, v)| *v)
                .fold(0.0f64, f64::max);
            let q = oracle.get(&(s.to_string(), a.to_string())).copied().unwrap_or(0.0);
            let updated = q + 0.2 * (r + 0.8 * best - q);
            oracle.insert((s.to_string(), a.to_string()), updated);
        }
        for ((s, a), v) in oracle {
            assert!((live.q(&s, &a) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_positive_feedback_raises_priority() {
        let mut t = RewardTable::new(RewardConfig {
            epsilon: 0.0,
            ..RewardConfig::default()
        });
        let before = t.priority_for("empathy_response", "chat", 4);
        for _ in 0..50 {
            t.q_update("chat", "empathy_response", 8.0, "chat").unwrap();
        }
        let after = t.priority_for("empathy_response", "chat", 4);
        assert!(after < before, "{after} should outrank {before}");
    }

    #[test]
    fn boredom_penalties_demote_a_class() {
        let mut t = RewardTable::new(RewardConfig {
            alpha: 0.5,
            gamma_d: 0.0,
            epsilon: 0.0,
            v_min: -10.0,
            v_max: 10.0,
            ..RewardConfig::default()
        });
        t.q_update("run", "music", 6.0, "run").unwrap();
        let fresh = t.priority_for("music", "run", 4);
        for k in 1..=20u64 {
            let penalty = crate::attention::boredom_penalty(k, 0.5);
            t.q_update("run", "music", penalty, "run").unwrap();
        }
        let bored = t.priority_for("music", "run", 4);
        assert!(bored > fresh, "{bored} should be lower priority than {fresh}");
    }
}
