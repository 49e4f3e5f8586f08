//! The CoCoMo multi-level feedback queue: L conscious priority queues over
//! an unconscious pool. Awareness interrupts promote pool tasks and trigger
//! a global re-prioritization; quantum expiry demotes; energy decay fades
//! tasks back into the pool; aging keeps waiting tasks from starving.
//!
//! The scheduler is single-threaded by contract: the whole state may move
//! between threads but is never mutated concurrently.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{boredom_penalty, AttentionConfig, AttentionError, Energy};
use crate::reward::{RewardConfig, RewardError, RewardEvent, RewardTable};
use crate::sync::{find_cycle, Barrier, Semaphore};
use crate::task::{
    ConsciousnessState, StimulusEvent, Task, TaskId, Tick, TransitionError, TransitionEvent,
};
use crate::trace::{TraceKind, TraceRecord};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SchedError {
    #[error("task {0} already admitted")]
    DuplicateTask(TaskId),
    #[error("task {0} is not in the unconscious pool")]
    NotUnconscious(TaskId),
    #[error("task {0} is already attended")]
    AlreadyAttending(TaskId),
    #[error("task {0} is not the attended task")]
    NotAttended(TaskId),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("unknown semaphore {0:?}")]
    UnknownSemaphore(String),
    #[error("unknown barrier {0:?}")]
    UnknownBarrier(String),
    #[error("level {level} out of range for {levels} conscious levels")]
    InvalidLevel { level: usize, levels: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// Queue shape, quantum sizes, aging period, and the attention and reward
/// parameters the scheduler consults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// Number of conscious priority levels (level 0 is the highest).
    pub levels: usize,
    /// Ticks per quantum at each level, non-decreasing with the index.
    pub quanta: Vec<u64>,
    /// A ready task is promoted one level per this many waited ticks.
    pub aging_period: u64,
    pub attention: AttentionConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    /// Context tag the scheduler uses for its own reward lookups.
    #[serde(default = "default_context")]
    pub context_tag: String,
}

fn default_context() -> String {
    "default".to_string()
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            levels: 4,
            quanta: vec![10, 20, 40, 80],
            aging_period: 100,
            attention: AttentionConfig::default(),
            reward: RewardConfig::default(),
            context_tag: default_context(),
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.levels < 1 {
            return Err(format!("levels must be >= 1, got {}", self.levels));
        }
        if self.quanta.len() != self.levels {
            return Err(format!(
                "quanta must list one quantum per level: {} quanta for {} levels",
                self.quanta.len(),
                self.levels
            ));
        }
        for (i, q) in self.quanta.iter().enumerate() {
            if *q == 0 {
                return Err(format!("quanta[{i}] must be positive"));
            }
            if i > 0 && self.quanta[i - 1] > *q {
                return Err(format!(
                    "quanta must be non-decreasing with the level index, \
                     got quanta[{}]={} > quanta[{}]={}",
                    i - 1,
                    self.quanta[i - 1],
                    i,
                    q
                ));
            }
        }
        if self.aging_period == 0 {
            return Err("aging_period must be positive".to_string());
        }
        self.attention.validate()?;
        self.reward.validate()?;
        Ok(())
    }

    /// The worst-case ready-to-dispatch wait the scheduler guarantees.
    pub fn starvation_bound(&self) -> u64 {
        self.levels as u64 * self.aging_period + self.quanta.iter().sum::<u64>()
    }

    fn lowest_level(&self) -> usize {
        self.levels - 1
    }
}

/// The scheduler state machine. All mutating operations append records to
/// an internal buffer; callers drain it with [`Scheduler::take_events`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scheduler {
    pub config: SchedulerConfig,
    pub queues: Vec<VecDeque<TaskId>>,
    pub unconscious_pool: BTreeSet<TaskId>,
    pub attended: Option<TaskId>,
    pub tasks: BTreeMap<TaskId, Task>,
    pub clock: Tick,
    pub reward: RewardTable,
    semaphores: BTreeMap<String, Semaphore>,
    barriers: BTreeMap<String, Barrier>,
    last_attended: Option<TaskId>,
    events: Vec<TraceRecord>,
    rng: ChaCha8Rng,
}

impl Scheduler {
    pub fn new(config: SchedulerConfig, seed: u64) -> Result<Self, SchedError> {
        config.validate().map_err(SchedError::InvalidConfig)?;
        let reward = RewardTable::new(config.reward.clone());
        let queues = vec![VecDeque::new(); config.levels];
        Ok(Scheduler {
            config,
            queues,
            unconscious_pool: BTreeSet::new(),
            attended: None,
            tasks: BTreeMap::new(),
            clock: 0,
            reward,
            semaphores: BTreeMap::new(),
            barriers: BTreeMap::new(),
            last_attended: None,
            events: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn add_semaphore(&mut self, id: &str, permits: u64) -> Result<(), SchedError> {
        if self.semaphores.contains_key(id) {
            return Err(SchedError::InvalidConfig(format!(
                "semaphore {id:?} declared twice"
            )));
        }
        self.semaphores.insert(id.to_string(), Semaphore::new(id, permits));
        Ok(())
    }

    pub fn add_barrier(&mut self, id: &str, parties: usize) -> Result<(), SchedError> {
        if parties == 0 {
            return Err(SchedError::InvalidConfig(format!(
                "barrier {id:?} needs at least one party"
            )));
        }
        if self.barriers.contains_key(id) {
            return Err(SchedError::InvalidConfig(format!(
                "barrier {id:?} declared twice"
            )));
        }
        self.barriers.insert(id.to_string(), Barrier::new(id, parties));
        Ok(())
    }

    pub fn semaphore(&self, id: &str) -> Option<&Semaphore> {
        self.semaphores.get(id)
    }

    /// Drains the pending trace records.
    pub fn take_events(&mut self) -> Vec<TraceRecord> {
        std::mem::take(&mut self.events)
    }

    fn push(&mut self, record: TraceRecord) {
        self.events.push(record);
    }

    /// Admits a task. Without an initial level it enters the unconscious
    /// pool with zero energy; with one it starts ready at that level.
    pub fn admit(
        &mut self,
        id: TaskId,
        class_tag: &str,
        work: u64,
        initial_level: Option<usize>,
    ) -> Result<(), SchedError> {
        if self.tasks.contains_key(&id) {
            return Err(SchedError::DuplicateTask(id));
        }
        if work == 0 {
            return Err(SchedError::InvalidConfig(format!(
                "task {id}: work must be positive"
            )));
        }
        let mut task = Task::new(id, class_tag, work, self.clock);
        let mut record = TraceRecord::new(self.clock, TraceKind::Admit, Some(id))
            .with("class", class_tag)
            .with("work", work);
        match initial_level {
            None => {
                self.unconscious_pool.insert(id);
            }
            Some(level) => {
                if level >= self.config.levels {
                    return Err(SchedError::InvalidLevel {
                        level,
                        levels: self.config.levels,
                    });
                }
                task.state = ConsciousnessState::Ready(level);
                task.level = Some(level);
                self.queues[level].push_back(id);
                record = record.with("level", level);
            }
        }
        self.tasks.insert(id, task);
        self.push(record);
        Ok(())
    }

    /// Level a conscious task deserves right now: the reward-derived base
    /// minus one level per full aging period already waited, floored at 0.
    /// Preserving the waiting credit across re-prioritizations is what
    /// keeps the starvation bound intact under sustained interrupts.
    fn effective_level(&self, task: &Task) -> usize {
        let base = self.reward.priority_for(
            &task.class_tag,
            &self.config.context_tag,
            self.config.levels,
        );
        let credit = (task.wait_ticks / self.config.aging_period) as usize;
        base.saturating_sub(credit)
    }

    /// Recomputes every conscious task's level from the current reward
    /// values (minus aging credit) and rebuilds the ready queues in
    /// ascending (level, id) order. `keep` skips the recompute for a task
    /// whose level was just assigned. Blocked tasks keep their levels.
    pub fn reprioritize(&mut self, keep: Option<TaskId>) {
        let mut changed: BTreeMap<String, String> = BTreeMap::new();
        let mut ready: Vec<(usize, TaskId)> = Vec::new();
        let ids: Vec<TaskId> = self.tasks.keys().copied().collect();
        for id in ids {
            let task = &self.tasks[&id];
            match task.state.clone() {
                ConsciousnessState::Ready(old) => {
                    let new = if Some(id) == keep {
                        old
                    } else {
                        self.effective_level(task)
                    };
                    if new != old {
                        changed.insert(id.to_string(), format!("{old}->{new}"));
                        let task = self.tasks.get_mut(&id).expect("present");
                        task.state = ConsciousnessState::Ready(new);
                        task.level = Some(new);
                    }
                    ready.push((new, id));
                }
                ConsciousnessState::Attended if Some(id) != keep => {
                    let old = task.level.expect("attended task has a level");
                    let new = self.effective_level(task);
                    if new != old {
                        changed.insert(id.to_string(), format!("{old}->{new}"));
                        let quantum = self.config.quanta[new];
                        let task = self.tasks.get_mut(&id).expect("present");
                        task.level = Some(new);
                        // An attended task promoted into a shorter-quantum
                        // level may not outlive that level's quantum.
                        task.quantum_left = task.quantum_left.min(quantum);
                    }
                }
                _ => {}
            }
        }
        ready.sort_unstable();
        for queue in &mut self.queues {
            queue.clear();
        }
        for (level, id) in ready {
            self.queues[level].push_back(id);
        }
        let mut record = TraceRecord::new(self.clock, TraceKind::Reprioritize, None);
        record.detail = changed;
        self.push(record);
    }

    /// Promotes a pool task whose energy crossed the wake threshold,
    /// re-prioritizes every conscious task, and preempts the attended task
    /// when the newcomer lands on a strictly higher-priority level.
    pub fn on_awareness_interrupt(&mut self, id: TaskId, novel: bool) -> Result<(), SchedError> {
        if !self.unconscious_pool.contains(&id) {
            return Err(SchedError::NotUnconscious(id));
        }
        let class = self.tasks[&id].class_tag.clone();
        let level = self.reward.explore_level(
            &class,
            &self.config.context_tag,
            self.config.levels,
            &mut self.rng,
        );
        self.unconscious_pool.remove(&id);
        self.tasks
            .get_mut(&id)
            .expect("pool task exists")
            .apply(TransitionEvent::AwarenessInterrupt { level })?;
        self.push(
            TraceRecord::new(self.clock, TraceKind::Interrupt, Some(id))
                .with("level", level)
                .with("novel", novel),
        );
        self.reprioritize(Some(id));

        if let Some(att) = self.attended {
            let att_level = self.tasks[&att].level.expect("attended level");
            if level < att_level {
                self.tasks
                    .get_mut(&att)
                    .expect("attended exists")
                    .apply(TransitionEvent::Preempt)?;
                self.queues[att_level].push_back(att);
                self.attended = None;
                self.push(
                    TraceRecord::new(self.clock, TraceKind::Preempt, Some(att))
                        .with("by", id)
                        .with("level", att_level),
                );
            }
        }
        Ok(())
    }

    /// Dispatches the head of the lowest-indexed non-empty queue. A task
    /// resuming from preemption keeps its remaining quantum (clamped to
    /// its level's quantum); everyone else gets a fresh one. Dispatch
    /// refreshes the task's energy to the wake threshold: attention
    /// sustains energy, so fading measures post-attention neglect.
    pub fn next(&mut self) -> Result<Option<TaskId>, SchedError> {
        if let Some(att) = self.attended {
            return Err(SchedError::AlreadyAttending(att));
        }
        let Some(level) = self.queues.iter().position(|q| !q.is_empty()) else {
            return Ok(None);
        };
        let id = self.queues[level].pop_front().expect("non-empty queue");
        let full = self.config.quanta[level];
        let task = self.tasks.get_mut(&id).expect("queued task exists");
        debug_assert_eq!(task.state, ConsciousnessState::Ready(level));
        let quantum = if task.quantum_left > 0 {
            task.quantum_left.min(full)
        } else {
            full
        };
        task.apply(TransitionEvent::Dispatch { quantum })?;
        task.energy = Energy::new(self.config.attention.wake_threshold, self.clock);
        if self.last_attended != Some(id) {
            task.consecutive_quanta = 0;
        }
        self.last_attended = Some(id);
        self.attended = Some(id);
        self.push(
            TraceRecord::new(self.clock, TraceKind::Dispatch, Some(id))
                .with("level", level)
                .with("quantum", quantum),
        );
        Ok(Some(id))
    }

    /// Executes one tick: the attended task consumes one unit of work and
    /// quantum; completion, quantum expiry (with boredom feedback), and
    /// fade checks land on the tick boundary; every ready task accrues one
    /// waited tick and ages across level boundaries. Events emitted here
    /// are stamped with the post-tick clock.
    pub fn run_tick(&mut self) -> Vec<TraceRecord> {
        let end = self.clock + 1;
        let mut waiting: Vec<TaskId> = self
            .queues
            .iter()
            .flat_map(|q| q.iter().copied())
            .collect();
        waiting.sort_unstable();

        if let Some(id) = self.attended {
            let task = self.tasks.get_mut(&id).expect("attended exists");
            debug_assert!(task.remaining_work > 0);
            debug_assert!(task.quantum_left > 0);
            task.remaining_work -= 1;
            task.quantum_left -= 1;
            let done = task.remaining_work == 0;
            let boundary = task.quantum_left == 0;
            if done {
                self.complete_attended(id, end);
            } else if boundary {
                self.quantum_boundary(id, end);
            }
        }

        for id in waiting {
            let task = self.tasks.get_mut(&id).expect("ready task exists");
            task.wait_ticks += 1;
            let due = task.wait_ticks % self.config.aging_period == 0;
            if !due {
                continue;
            }
            if let ConsciousnessState::Ready(level) = task.state {
                if level == 0 {
                    continue;
                }
                let to = level - 1;
                task.state = ConsciousnessState::Ready(to);
                task.level = Some(to);
                self.queues[level].retain(|&t| t != id);
                self.queues[to].push_back(id);
                self.push(
                    TraceRecord::new(end, TraceKind::Age, Some(id))
                        .with("from", level)
                        .with("to", to),
                );
            }
        }

        self.clock = end;
        debug_assert_eq!(self.check_invariants(), Ok(()));
        self.take_events()
    }

    fn complete_attended(&mut self, id: TaskId, end: Tick) {
        let task = self.tasks.get_mut(&id).expect("attended exists");
        task.apply(TransitionEvent::Complete)
            .expect("attended task completes");
        let held: Vec<String> = task.held_resources.iter().cloned().collect();
        self.attended = None;
        self.push(TraceRecord::new(end, TraceKind::Complete, Some(id)));
        // A finished task cannot release what it holds itself anymore;
        // hand every permit back so waiters are not stranded.
        for sem in held {
            self.release_at(id, &sem, end).expect("held semaphore exists");
        }
    }

    fn quantum_boundary(&mut self, id: TaskId, end: Tick) {
        let lowest = self.config.lowest_level();
        let task = &self.tasks[&id];
        let level = task.level.expect("attended level");
        let fades = level == lowest && task.energy.should_fade(&self.config.attention, end);
        if fades {
            let residual = task
                .energy
                .decay(end, self.config.attention.tau)
                .expect("tick moves forward")
                .value;
            self.tasks
                .get_mut(&id)
                .expect("present")
                .apply(TransitionEvent::Fade)
                .expect("attended task fades");
            self.unconscious_pool.insert(id);
            self.attended = None;
            self.push(
                TraceRecord::new(end, TraceKind::Fade, Some(id))
                    .with("energy", format!("{residual:.6}"))
                    .with("level", level),
            );
            return;
        }
        let task = self.tasks.get_mut(&id).expect("present");
        task.apply(TransitionEvent::QuantumEnd {
            lowest_level: lowest,
        })
        .expect("attended task demotes");
        let to = task.level.expect("demoted level");
        let quanta_run = task.consecutive_quanta;
        let class = task.class_tag.clone();
        self.queues[to].push_back(id);
        self.attended = None;
        self.push(
            TraceRecord::new(end, TraceKind::QuantumEnd, Some(id))
                .with("from", level)
                .with("to", to),
        );
        let beta = self.config.attention.boredom_beta;
        if beta > 0.0 {
            let context = self.config.context_tag.clone();
            let penalty = boredom_penalty(quanta_run, beta);
            let q = self
                .reward
                .q_update(&context, &class, penalty, &context)
                .expect("finite boredom penalty");
            self.push(
                TraceRecord::new(end, TraceKind::Reward, Some(id))
                    .with("class", class)
                    .with("context", context)
                    .with("q", q)
                    .with("reward", penalty)
                    .with("source", "boredom"),
            );
        }
    }

    /// Dispatch-if-idle followed by one tick; the plain driver loop for
    /// scheduler-only runs (the simulator interleaves stimuli and sync
    /// actions between the two).
    pub fn step(&mut self) -> Vec<TraceRecord> {
        if self.attended.is_none() {
            self.next().expect("no task attended");
        }
        self.run_tick()
    }

    /// Feeds one stimulus into its target's energy. When the accumulation
    /// crosses the wake threshold and the target sits in the unconscious
    /// pool, the awareness interrupt fires; returns whether it did.
    pub fn apply_stimulus(&mut self, stimulus: &StimulusEvent) -> Result<bool, SchedError> {
        let task = self
            .tasks
            .get_mut(&stimulus.target)
            .ok_or(SchedError::UnknownTask(stimulus.target))?;
        let (energy, crossed) = task.energy.accumulate(stimulus, &self.config.attention)?;
        task.energy = energy;
        if crossed && self.unconscious_pool.contains(&stimulus.target) {
            self.on_awareness_interrupt(stimulus.target, stimulus.novel)?;
            return Ok(true);
        }
        Ok(false)
    }

    /// Applies an externally observed reward to the table.
    pub fn observe_reward(&mut self, event: &RewardEvent) -> Result<(), SchedError> {
        let q = self.reward.observe(event)?;
        self.push(
            TraceRecord::new(self.clock, TraceKind::Reward, None)
                .with("class", &event.class_tag)
                .with("context", &event.context_tag)
                .with("q", q)
                .with("reward", event.reward)
                .with("source", "event"),
        );
        Ok(())
    }

    /// The attended task requests a permit. With permits available it
    /// continues holding one; otherwise it blocks FIFO on the semaphore
    /// and the attended slot frees. Returns whether the permit was taken.
    pub fn acquire(&mut self, id: TaskId, sem_id: &str) -> Result<bool, SchedError> {
        if self.attended != Some(id) {
            return Err(SchedError::NotAttended(id));
        }
        let sem = self
            .semaphores
            .get_mut(sem_id)
            .ok_or_else(|| SchedError::UnknownSemaphore(sem_id.to_string()))?;
        if sem.permits > 0 {
            sem.permits -= 1;
            self.tasks
                .get_mut(&id)
                .expect("attended exists")
                .held_resources
                .insert(sem_id.to_string());
            return Ok(true);
        }
        sem.wait_queue.push_back(id);
        self.tasks
            .get_mut(&id)
            .expect("attended exists")
            .apply(TransitionEvent::Block {
                resource: sem_id.to_string(),
            })?;
        self.attended = None;
        self.push(
            TraceRecord::new(self.clock, TraceKind::Block, Some(id)).with("resource", sem_id),
        );
        Ok(false)
    }

    /// Releases a permit. With waiters present the permit transfers to the
    /// FIFO head, which returns to its prior ready level; releasing
    /// without holding is permitted and mints a permit.
    pub fn release(&mut self, id: TaskId, sem_id: &str) -> Result<(), SchedError> {
        self.release_at(id, sem_id, self.clock)
    }

    fn release_at(&mut self, id: TaskId, sem_id: &str, at: Tick) -> Result<(), SchedError> {
        if !self.semaphores.contains_key(sem_id) {
            return Err(SchedError::UnknownSemaphore(sem_id.to_string()));
        }
        if let Some(task) = self.tasks.get_mut(&id) {
            task.held_resources.remove(sem_id);
        }
        let sem = self.semaphores.get_mut(sem_id).expect("checked above");
        match sem.wait_queue.pop_front() {
            Some(waiter) => {
                let task = self.tasks.get_mut(&waiter).expect("waiter exists");
                task.apply(TransitionEvent::Unblock)?;
                task.held_resources.insert(sem_id.to_string());
                let level = task.level.expect("unblocked task has a level");
                self.queues[level].push_back(waiter);
                self.push(
                    TraceRecord::new(at, TraceKind::Unblock, Some(waiter))
                        .with("resource", sem_id)
                        .with("level", level),
                );
            }
            None => sem.permits += 1,
        }
        Ok(())
    }

    /// The attended task arrives at a barrier. Early arrivals block on the
    /// barrier's internal semaphore; the last arrival wakes them all and
    /// passes through. Returns whether the task passed.
    pub fn barrier_arrive(&mut self, id: TaskId, barrier_id: &str) -> Result<bool, SchedError> {
        if self.attended != Some(id) {
            return Err(SchedError::NotAttended(id));
        }
        let barrier = self
            .barriers
            .get_mut(barrier_id)
            .ok_or_else(|| SchedError::UnknownBarrier(barrier_id.to_string()))?;
        barrier.arrived.insert(id);
        if barrier.arrived.len() == barrier.parties {
            barrier.arrived.clear();
            let resource = barrier.sem.id.clone();
            let waiters: Vec<TaskId> = barrier.sem.wait_queue.drain(..).collect();
            for waiter in waiters {
                let task = self.tasks.get_mut(&waiter).expect("waiter exists");
                task.apply(TransitionEvent::Unblock)?;
                let level = task.level.expect("unblocked task has a level");
                self.queues[level].push_back(waiter);
                self.push(
                    TraceRecord::new(self.clock, TraceKind::Unblock, Some(waiter))
                        .with("resource", &resource)
                        .with("level", level),
                );
            }
            return Ok(true);
        }
        let resource = barrier.sem.id.clone();
        barrier.sem.wait_queue.push_back(id);
        self.tasks
            .get_mut(&id)
            .expect("attended exists")
            .apply(TransitionEvent::Block {
                resource: resource.clone(),
            })?;
        self.attended = None;
        self.push(
            TraceRecord::new(self.clock, TraceKind::Block, Some(id)).with("resource", resource),
        );
        Ok(false)
    }

    /// Builds the wait-for graph (waiter -> every holder of the semaphore
    /// it waits on) and returns the smallest-id-first cycle, if any.
    pub fn detect_deadlock(&self) -> Option<Vec<TaskId>> {
        let mut edges: BTreeMap<TaskId, BTreeSet<TaskId>> = BTreeMap::new();
        for sem in self.semaphores.values() {
            if sem.wait_queue.is_empty() {
                continue;
            }
            let holders: Vec<TaskId> = self
                .tasks
                .values()
                .filter(|t| t.held_resources.contains(&sem.id))
                .map(|t| t.id)
                .collect();
            for &waiter in &sem.wait_queue {
                let entry = edges.entry(waiter).or_default();
                for &holder in &holders {
                    if holder != waiter {
                        entry.insert(holder);
                    }
                }
                for &holder in &holders {
                    edges.entry(holder).or_default();
                }
            }
        }
        find_cycle(&edges)
    }

    /// Structural invariants: every non-completed task lives in exactly
    /// one place, queue membership matches Ready levels, and the attended
    /// task's quantum fits its level.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen: BTreeMap<TaskId, &'static str> = BTreeMap::new();
        let mut place = |id: TaskId, spot: &'static str| -> Result<(), String> {
            if let Some(prev) = seen.insert(id, spot) {
                return Err(format!("task {id} in both {prev} and {spot}"));
            }
            Ok(())
        };
        for &id in &self.unconscious_pool {
            place(id, "pool")?;
        }
        for (level, queue) in self.queues.iter().enumerate() {
            for &id in queue {
                place(id, "queue")?;
                match self.tasks.get(&id) {
                    Some(task) if task.state == ConsciousnessState::Ready(level) => {}
                    Some(task) => {
                        return Err(format!(
                            "task {id} queued at level {level} but in state {}",
                            task.state
                        ))
                    }
                    None => return Err(format!("queued task {id} missing from the map")),
                }
            }
        }
        if let Some(id) = self.attended {
            place(id, "attended")?;
            let task = &self.tasks[&id];
            if task.state != ConsciousnessState::Attended {
                return Err(format!("attended task {id} in state {}", task.state));
            }
            let level = task.level.ok_or_else(|| format!("task {id} lost its level"))?;
            if task.quantum_left > self.config.quanta[level] {
                return Err(format!(
                    "task {id} quantum_left {} exceeds quanta[{level}]={}",
                    task.quantum_left, self.config.quanta[level]
                ));
            }
        }
        for sem in self.semaphores.values().chain(self.barriers.values().map(|b| &b.sem)) {
            if sem.permits > 0 && !sem.wait_queue.is_empty() {
                return Err(format!(
                    "semaphore {:?} has {} permits but {} waiters",
                    sem.id,
                    sem.permits,
                    sem.wait_queue.len()
                ));
            }
            for &id in &sem.wait_queue {
                place(id, "wait_queue")?;
            }
        }
        for (id, task) in &self.tasks {
            let expected = match task.state {
                ConsciousnessState::Unconscious => Some("pool"),
                ConsciousnessState::Ready(_) => Some("queue"),
                ConsciousnessState::Attended => Some("attended"),
                ConsciousnessState::Blocked(_) => Some("wait_queue"),
                ConsciousnessState::Completed => None,
            };
            match (expected, seen.get(id).copied()) {
                (None, None) => {
                    if task.remaining_work != 0 {
                        return Err(format!("completed task {id} still has work"));
                    }
                }
                (Some(want), Some(got)) if want == got => {
                    if task.remaining_work == 0 {
                        return Err(format!("task {id} has no work but is not completed"));
                    }
                }
                (want, got) => {
                    return Err(format!(
                        "task {id} in state {} placed in {got:?}, expected {want:?}",
                        task.state
                    ))
                }
            }
        }
        for id in seen.keys() {
            if !self.tasks.contains_key(id) {
                return Err(format!("structure references unknown task {id}"));
            }
        }
        Ok(())
    }
}
