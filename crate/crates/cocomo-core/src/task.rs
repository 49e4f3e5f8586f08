//! Task model: the consciousness-state machine and the stimulus vocabulary
//! shared by the scheduler, the sync primitives, and the simulator.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::Energy;

/// Logical simulation time, in ticks.
pub type Tick = u64;

/// Unique task identifier.
pub type TaskId = u64;

/// Consciousness state of a task.
///
/// `Ready(level)` carries the conscious queue index (0 = highest priority);
/// `Blocked` carries the resource the task is waiting on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsciousnessState {
    Unconscious,
    Ready(usize),
    Attended,
    Blocked(String),
    Completed,
}

impl fmt::Display for ConsciousnessState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConsciousnessState::Unconscious => write!(f, "Unconscious"),
            ConsciousnessState::Ready(l) => write!(f, "Ready({l})"),
            ConsciousnessState::Attended => write!(f, "Attended"),
            ConsciousnessState::Blocked(r) => write!(f, "Blocked({r})"),
            ConsciousnessState::Completed => write!(f, "Completed"),
        }
    }
}

/// Events that drive the consciousness-state machine.
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionEvent {
    /// A wake-threshold crossing promoted the task out of the unconscious
    /// pool; `level` is the conscious queue assigned by the scheduler.
    AwarenessInterrupt { level: usize },
    /// The task becomes the attended task with `quantum` ticks to run.
    Dispatch { quantum: u64 },
    /// Quantum expired; demote one level, clamped at `lowest_level`.
    QuantumEnd { lowest_level: usize },
    /// A higher-priority wake-up displaced the task; it keeps its level
    /// and the remainder of its quantum.
    Preempt,
    /// Energy decayed below the fade threshold; back to the pool.
    Fade,
    /// The task is waiting on a synchronization resource.
    Block { resource: String },
    /// The resource became available; back to the ready queue at the
    /// level held before blocking.
    Unblock,
    /// No work remains.
    Complete,
}

impl fmt::Display for TransitionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionEvent::AwarenessInterrupt { level } => {
                write!(f, "AwarenessInterrupt(level={level})")
            }
            TransitionEvent::Dispatch { quantum } => write!(f, "Dispatch(quantum={quantum})"),
            TransitionEvent::QuantumEnd { .. } => write!(f, "QuantumEnd"),
            TransitionEvent::Preempt => write!(f, "Preempt"),
            TransitionEvent::Fade => write!(f, "Fade"),
            TransitionEvent::Block { resource } => write!(f, "Block({resource})"),
            TransitionEvent::Unblock => write!(f, "Unblock"),
            TransitionEvent::Complete => write!(f, "Complete"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransitionError {
    #[error("illegal transition: task {task} in state {state} cannot take {event}")]
    IllegalTransition {
        task: TaskId,
        state: ConsciousnessState,
        event: String,
    },
}

/// A unit of work with consciousness state, stimulus energy, and scheduling
/// bookkeeping. Work is abstract: one tick of attention consumes one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    /// Task family name, used as the reinforcement-learning action tag.
    pub class_tag: String,
    pub state: ConsciousnessState,
    /// Current conscious level; `None` is the unconscious sentinel.
    pub level: Option<usize>,
    pub energy: Energy,
    pub remaining_work: u64,
    pub quantum_left: u64,
    /// Ticks spent ready since the last dispatch (drives aging).
    pub wait_ticks: u64,
    /// Consecutive full quanta attended without losing the focus (boredom).
    pub consecutive_quanta: u64,
    pub held_resources: BTreeSet<String>,
}

impl Task {
    pub fn new(id: TaskId, class_tag: impl Into<String>, work: u64, now: Tick) -> Self {
        Task {
            id,
            class_tag: class_tag.into(),
            state: ConsciousnessState::Unconscious,
            level: None,
            energy: Energy::zero(now),
            remaining_work: work,
            quantum_left: 0,
            wait_ticks: 0,
            consecutive_quanta: 0,
            held_resources: BTreeSet::new(),
        }
    }

    /// Applies one state-machine event, returning the updated task.
    /// Any (state, event) pair outside the legal table is an error.
    pub fn transition(mut self, event: TransitionEvent) -> Result<Task, TransitionError> {
        self.apply(event)?;
        Ok(self)
    }

    /// In-place form of [`Task::transition`]; the task is untouched when
    /// the event is illegal.
    pub fn apply(&mut self, event: TransitionEvent) -> Result<(), TransitionError> {
        use ConsciousnessState as S;
        use TransitionEvent as E;
        match (&self.state, &event) {
            (S::Unconscious, E::AwarenessInterrupt { level }) => {
                self.state = S::Ready(*level);
                self.level = Some(*level);
                self.wait_ticks = 0;
                self.consecutive_quanta = 0;
            }
            (S::Ready(l), E::Dispatch { quantum }) => {
                debug_assert_eq!(Some(*l), self.level);
                self.state = S::Attended;
                self.quantum_left = *quantum;
                self.wait_ticks = 0;
            }
            (S::Attended, E::QuantumEnd { lowest_level }) => {
                let cur = self.level.unwrap_or(*lowest_level);
                let next = (cur + 1).min(*lowest_level);
                self.state = S::Ready(next);
                self.level = Some(next);
                self.consecutive_quanta += 1;
                self.quantum_left = 0;
            }
            (S::Attended, E::Preempt) => {
                // Not the task's fault: level and remaining quantum survive.
                let cur = self.level.expect("attended task has a level");
                self.state = S::Ready(cur);
            }
            (S::Attended, E::Fade) => {
                self.state = S::Unconscious;
                self.level = None;
                self.quantum_left = 0;
                self.consecutive_quanta = 0;
            }
            (S::Attended, E::Block { resource }) => {
                self.state = S::Blocked(resource.clone());
            }
            (S::Blocked(_), E::Unblock) => {
                let cur = self.level.expect("blocked task kept its level");
                self.state = S::Ready(cur);
            }
            (S::Attended, E::Complete) => {
                self.state = S::Completed;
                self.quantum_left = 0;
            }
            (state, event) => {
                return Err(TransitionError::IllegalTransition {
                    task: self.id,
                    state: state.clone(),
                    event: event.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn is_ready(&self) -> bool {
        matches!(self.state, ConsciousnessState::Ready(_))
    }

    pub fn is_completed(&self) -> bool {
        matches!(self.state, ConsciousnessState::Completed)
    }
}

/// A scripted sensory stimulus: energy injected into one task at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusEvent {
    pub time: Tick,
    pub target: TaskId,
    pub intensity: f64,
    /// Marks a novel (first-seen) event; carried into the interrupt record.
    #[serde(default = "default_novel")]
    pub novel: bool,
}

fn default_novel() -> bool {
    true
}
