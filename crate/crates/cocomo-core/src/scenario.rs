//! Scenario files: the JSON input script a simulation run consumes.
//! Validation names the violated invariant so bad files fail loudly.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reward::RewardEvent;
use crate::scheduler::SchedulerConfig;
use crate::task::{StimulusEvent, TaskId, Tick};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

/// One task declaration. Tasks without `initial_level` start in the
/// unconscious pool; with one they start ready at that level. A task with
/// `feedback` acts as an effector on completion: it emits a stimulus at
/// the next tick toward the configured target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub class_tag: String,
    pub work: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<FeedbackSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSpec {
    pub target: TaskId,
    pub intensity: f64,
    #[serde(default = "default_true")]
    pub novel: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemaphoreSpec {
    pub id: String,
    pub permits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub id: String,
    pub parties: usize,
}

/// A synchronization action fired when the task's completed work first
/// reaches `at_progress`, before that tick executes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncAction {
    pub task: TaskId,
    pub at_progress: u64,
    #[serde(flatten)]
    pub op: SyncOp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum SyncOp {
    Acquire { semaphore: String },
    Release { semaphore: String },
    BarrierArrive { barrier: String },
}

/// A complete simulation input: configuration, seed, task set, stimulus
/// and reward scripts, synchronization declarations, and the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub config: SchedulerConfig,
    #[serde(default)]
    pub seed: u64,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub stimuli: Vec<StimulusEvent>,
    #[serde(default)]
    pub reward_events: Vec<RewardEvent>,
    #[serde(default)]
    pub semaphores: Vec<SemaphoreSpec>,
    #[serde(default)]
    pub barriers: Vec<BarrierSpec>,
    #[serde(default)]
    pub sync_script: Vec<SyncAction>,
    #[serde(default = "default_horizon")]
    pub horizon: Tick,
}

fn default_horizon() -> Tick {
    10_000
}

impl Scenario {
    pub fn from_str(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Validation(msg));
        if let Err(msg) = self.config.validate() {
            return fail(format!("config: {msg}"));
        }
        if self.horizon == 0 {
            return fail("horizon must be positive".into());
        }

        let mut ids = BTreeSet::new();
        for task in &self.tasks {
            if !ids.insert(task.id) {
                return fail(format!("tasks: duplicate task id {}", task.id));
            }
            if task.work == 0 {
                return fail(format!("tasks: task {} work must be positive", task.id));
            }
            if let Some(level) = task.initial_level {
                if level >= self.config.levels {
                    return fail(format!(
                        "tasks: task {} initial_level {level} out of range for {} levels",
                        task.id, self.config.levels
                    ));
                }
            }
        }
        for task in &self.tasks {
            if let Some(feedback) = &task.feedback {
                if !ids.contains(&feedback.target) {
                    return fail(format!(
                        "tasks: task {} feedback targets undeclared task {}",
                        task.id, feedback.target
                    ));
                }
                if feedback.intensity < 0.0 || !feedback.intensity.is_finite() {
                    return fail(format!(
                        "tasks: task {} feedback intensity must be finite and non-negative",
                        task.id
                    ));
                }
            }
        }

        let mut last = 0;
        for (i, s) in self.stimuli.iter().enumerate() {
            if s.time < last {
                return fail(format!(
                    "stimuli: not sorted by time at index {i} ({} after {last})",
                    s.time
                ));
            }
            last = s.time;
            if s.intensity < 0.0 || !s.intensity.is_finite() {
                return fail(format!(
                    "stimuli: intensity at index {i} must be finite and non-negative"
                ));
            }
            if !ids.contains(&s.target) {
                return fail(format!(
                    "stimuli: index {i} targets undeclared task {}",
                    s.target
                ));
            }
        }

        let mut last = 0;
        for (i, r) in self.reward_events.iter().enumerate() {
            if r.time < last {
                return fail(format!(
                    "reward_events: not sorted by time at index {i} ({} after {last})",
                    r.time
                ));
            }
            last = r.time;
            if !r.reward.is_finite() {
                return fail(format!("reward_events: reward at index {i} must be finite"));
            }
        }

        let mut sems = BTreeSet::new();
        for sem in &self.semaphores {
            if !sems.insert(sem.id.as_str()) {
                return fail(format!("semaphores: duplicate id {:?}", sem.id));
            }
        }
        let mut barriers = BTreeSet::new();
        for barrier in &self.barriers {
            if !barriers.insert(barrier.id.as_str()) {
                return fail(format!("barriers: duplicate id {:?}", barrier.id));
            }
            if barrier.parties == 0 {
                return fail(format!("barriers: {:?} needs at least one party", barrier.id));
            }
        }

        for (i, action) in self.sync_script.iter().enumerate() {
            let Some(task) = self.tasks.iter().find(|t| t.id == action.task) else {
                return fail(format!(
                    "sync_script: index {i} names undeclared task {}",
                    action.task
                ));
            };
            if action.at_progress >= task.work {
                return fail(format!(
                    "sync_script: index {i} fires at progress {} but task {} only has {} work",
                    action.at_progress, task.id, task.work
                ));
            }
            match &action.op {
                SyncOp::Acquire { semaphore } | SyncOp::Release { semaphore } => {
                    if !sems.contains(semaphore.as_str()) {
                        return fail(format!(
                            "sync_script: index {i} references undeclared semaphore {semaphore:?}"
                        ));
                    }
                }
                SyncOp::BarrierArrive { barrier } => {
                    if !barriers.contains(barrier.as_str()) {
                        return fail(format!(
                            "sync_script: index {i} references undeclared barrier {barrier:?}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path)?;
    Scenario::from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "tasks": [{"id": 1, "class_tag": "probe", "work": 5}],
            "stimuli": [{"time": 0, "target": 1, "intensity": 12.0}]
        })
    }

    #[test]
    fn minimal_file_parses_with_defaults() {
        let sc = Scenario::from_str(&minimal().to_string()).unwrap();
        assert_eq!(sc.config.levels, 4);
        assert_eq!(sc.horizon, 10_000);
        assert_eq!(sc.seed, 0);
        assert!(sc.stimuli[0].novel);
    }

    #[test]
    fn unsorted_stimuli_fail_validation() {
        let mut v = minimal();
        v["stimuli"] = serde_json::json!([
            {"time": 5, "target": 1, "intensity": 1.0},
            {"time": 2, "target": 1, "intensity": 1.0}
        ]);
        let err = Scenario::from_str(&v.to_string()).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(ref m) if m.contains("sorted")));
    }

    #[test]
    fn undeclared_semaphore_fails_validation() {
        let mut v = minimal();
        v["sync_script"] = serde_json::json!([
            {"task": 1, "at_progress": 0, "action": "acquire", "semaphore": "ghost"}
        ]);
        let err = Scenario::from_str(&v.to_string()).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(ref m) if m.contains("ghost")));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = Scenario::from_str("{\n  \"tasks\": [,]\n}").unwrap_err();
        match err {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn duplicate_task_ids_fail_validation() {
        let mut v = minimal();
        v["tasks"] = serde_json::json!([
            {"id": 1, "class_tag": "a", "work": 5},
            {"id": 1, "class_tag": "b", "work": 5}
        ]);
        assert!(Scenario::from_str(&v.to_string()).is_err());
    }

    #[test]
    fn sync_action_past_task_work_fails() {
        let mut v = minimal();
        v["semaphores"] = serde_json::json!([{"id": "s", "permits": 1}]);
        v["sync_script"] = serde_json::json!([
            {"task": 1, "at_progress": 5, "action": "acquire", "semaphore": "s"}
        ]);
        let err = Scenario::from_str(&v.to_string()).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(ref m) if m.contains("progress")));
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let sc = Scenario::from_str(&minimal().to_string()).unwrap();
        let text = serde_json::to_string(&sc).unwrap();
        let back = Scenario::from_str(&text).unwrap();
        assert_eq!(back, sc);
    }
}
