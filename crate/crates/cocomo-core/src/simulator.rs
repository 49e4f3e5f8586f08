//! Deterministic discrete-event harness. Each tick: deliver this tick's
//! rewards, then stimuli (receptors; crossings raise awareness interrupts),
//! then fire due synchronization actions and dispatch; then the scheduler
//! executes the tick. Completions of tasks with declared feedback act as
//! effectors, emitting a stimulus at the next tick. Identical scenarios
//! produce identical traces, byte for byte.

use std::collections::VecDeque;

use thiserror::Error;

use crate::metrics::{metrics_of, Metrics};
use crate::scenario::{Scenario, SyncOp, TaskSpec};
use crate::scheduler::{SchedError, Scheduler};
use crate::task::{StimulusEvent, TaskId};
use crate::trace::{Trace, TraceKind, TraceRecord};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("deadlock detected: cycle {cycle:?}")]
    Deadlock { cycle: Vec<TaskId>, trace: Trace },
    #[error(transparent)]
    Sched(#[from] SchedError),
}

struct ScriptState {
    fired: Vec<bool>,
}

/// Runs a validated scenario to quiescence or its horizon.
pub fn run(scenario: &Scenario) -> Result<(Trace, Metrics), SimError> {
    let mut sched = Scheduler::new(scenario.config.clone(), scenario.seed)?;
    for sem in &scenario.semaphores {
        sched.add_semaphore(&sem.id, sem.permits)?;
    }
    for barrier in &scenario.barriers {
        sched.add_barrier(&barrier.id, barrier.parties)?;
    }
    for task in &scenario.tasks {
        sched.admit(task.id, &task.class_tag, task.work, task.initial_level)?;
    }

    let mut trace: Trace = Vec::new();
    let mut script = ScriptState {
        fired: vec![false; scenario.sync_script.len()],
    };
    let mut feedback: VecDeque<StimulusEvent> = VecDeque::new();
    let mut stimuli = scenario.stimuli.iter().peekable();
    let mut rewards = scenario.reward_events.iter().peekable();
    trace.append(&mut sched.take_events());

    while sched.clock < scenario.horizon {
        let t = sched.clock;

        // Quiescence: nothing attended or ready and no event can ever
        // arrive again.
        let idle = sched.attended.is_none() && sched.queues.iter().all(|q| q.is_empty());
        if idle && stimuli.peek().is_none() && rewards.peek().is_none() && feedback.is_empty() {
            break;
        }

        while rewards.peek().is_some_and(|r| r.time <= t) {
            let event = rewards.next().expect("peeked");
            sched.observe_reward(event)?;
        }
        while stimuli.peek().is_some_and(|s| s.time <= t) {
            let stimulus = stimuli.next().expect("peeked");
            sched.apply_stimulus(stimulus)?;
        }
        while feedback.front().is_some_and(|s| s.time <= t) {
            let stimulus = feedback.pop_front().expect("checked");
            sched.apply_stimulus(&stimulus)?;
        }

        // Fire due sync actions for whoever holds the focus, dispatching
        // replacements as tasks block, until the attended task has no
        // pending action (or nothing is dispatchable).
        loop {
            if sched.attended.is_none() && sched.next()?.is_none() {
                break;
            }
            let id = sched.attended.expect("dispatched above");
            let Some(action_idx) = due_action(scenario, &script, &sched, id) else {
                break;
            };
            script.fired[action_idx] = true;
            let blocked = match &scenario.sync_script[action_idx].op {
                SyncOp::Acquire { semaphore } => !sched.acquire(id, semaphore)?,
                SyncOp::Release { semaphore } => {
                    sched.release(id, semaphore)?;
                    false
                }
                SyncOp::BarrierArrive { barrier } => !sched.barrier_arrive(id, barrier)?,
            };
            if blocked {
                trace.append(&mut sched.take_events());
                if let Some(cycle) = sched.detect_deadlock() {
                    return Err(SimError::Deadlock { cycle, trace });
                }
            }
        }
        trace.append(&mut sched.take_events());

        let records = sched.run_tick();
        trace.extend(records.iter().cloned());
        for record in &records {
            if record.kind != TraceKind::Complete {
                continue;
            }
            let id = record.task.expect("completion names its task");
            let Some(fb) = task_spec(scenario, id).and_then(|spec| spec.feedback.as_ref()) else {
                continue;
            };
            let stimulus = StimulusEvent {
                time: record.t + 1,
                target: fb.target,
                intensity: fb.intensity,
                novel: fb.novel,
            };
            trace.push(
                TraceRecord::new(record.t, TraceKind::Feedback, Some(id))
                    .with("at", stimulus.time)
                    .with("intensity", fb.intensity)
                    .with("target", fb.target),
            );
            feedback.push_back(stimulus);
        }
    }

    let bound = scenario.config.starvation_bound();
    let metrics = metrics_of(&trace, bound).expect("own trace is well-formed");
    Ok((trace, metrics))
}

fn task_spec(scenario: &Scenario, id: TaskId) -> Option<&TaskSpec> {
    scenario.tasks.iter().find(|t| t.id == id)
}

fn due_action(
    scenario: &Scenario,
    script: &ScriptState,
    sched: &Scheduler,
    id: TaskId,
) -> Option<usize> {
    let spec = task_spec(scenario, id)?;
    let progress = spec.work - sched.tasks[&id].remaining_work;
    scenario
        .sync_script
        .iter()
        .enumerate()
        .position(|(i, action)| {
            !script.fired[i] && action.task == id && action.at_progress == progress
        })
}
