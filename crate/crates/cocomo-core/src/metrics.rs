//! Metrics: a pure fold over a trace. Recomputing from a persisted trace
//! yields byte-identical results to the metrics a run reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{TaskId, Tick};
use crate::trace::{TraceKind, TraceRecord};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
}

/// Response-time summary for one task class, measured from each awareness
/// interrupt to the task's next dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResponse {
    pub mean: f64,
    pub max: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub response_time: BTreeMap<String, ClassResponse>,
    /// Executed-tick share per dispatch level (index = level).
    pub service_share_per_level: Vec<f64>,
    pub service_share_per_class: BTreeMap<String, f64>,
    /// Ready waits that exceeded the starvation bound.
    pub starvation_events: u64,
    pub starvation_bound: u64,
    /// Ticks from an interrupt to the preemption it caused.
    pub preempt_latency_histogram: BTreeMap<u64, u64>,
    /// Jain's index over per-class service shares; 1.0 when service is
    /// equal across classes (vacuously 1.0 when nothing ran).
    pub fairness_index: f64,
}

#[derive(Default)]
struct TaskFold {
    class: String,
    ready_since: Option<Tick>,
    interrupt_pending: Option<Tick>,
    dispatched: Option<(Tick, usize)>,
}

/// Folds a trace into metrics. `starvation_bound` is the wait bound the
/// scheduler guarantees (`SchedulerConfig::starvation_bound`); it is a
/// parameter because a persisted trace does not carry its configuration.
pub fn metrics_of(trace: &[TraceRecord], starvation_bound: u64) -> Result<Metrics, MetricsError> {
    let mut tasks: BTreeMap<TaskId, TaskFold> = BTreeMap::new();
    let mut last_interrupt: BTreeMap<TaskId, Tick> = BTreeMap::new();
    let mut response: BTreeMap<String, (f64, u64, u64)> = BTreeMap::new();
    let mut level_service: Vec<u64> = Vec::new();
    let mut class_service: BTreeMap<String, u64> = BTreeMap::new();
    let mut starvation_events = 0u64;
    let mut histogram: BTreeMap<u64, u64> = BTreeMap::new();
    let mut end_t = 0;

    let detail_num = |record: &TraceRecord, key: &str| -> Result<u64, MetricsError> {
        record
            .detail
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| {
                MetricsError::MalformedTrace(format!(
                    "{:?} record at t={} lacks numeric {key:?}",
                    record.kind, record.t
                ))
            })
    };
    let need_task = |record: &TraceRecord| -> Result<TaskId, MetricsError> {
        record.task.ok_or_else(|| {
            MetricsError::MalformedTrace(format!(
                "{:?} record at t={} names no task",
                record.kind, record.t
            ))
        })
    };

    for record in trace {
        if record.t < end_t {
            return Err(MetricsError::MalformedTrace(format!(
                "records out of order at t={}",
                record.t
            )));
        }
        end_t = record.t;
        match record.kind {
            TraceKind::Admit => {
                let id = need_task(record)?;
                let class = record.detail.get("class").cloned().ok_or_else(|| {
                    MetricsError::MalformedTrace(format!("Admit for task {id} lacks class"))
                })?;
                class_service.entry(class.clone()).or_insert(0);
                let ready = record.detail.contains_key("level").then_some(record.t);
                tasks.insert(
                    id,
                    TaskFold {
                        class,
                        ready_since: ready,
                        ..TaskFold::default()
                    },
                );
            }
            TraceKind::Interrupt => {
                let id = need_task(record)?;
                let fold = fold_for(&mut tasks, id, record)?;
                fold.interrupt_pending = Some(record.t);
                fold.ready_since = Some(record.t);
                last_interrupt.insert(id, record.t);
            }
            TraceKind::Dispatch => {
                let id = need_task(record)?;
                let level = detail_num(record, "level")? as usize;
                let fold = fold_for(&mut tasks, id, record)?;
                if let Some(since) = fold.ready_since.take() {
                    if record.t - since > starvation_bound {
                        starvation_events += 1;
                    }
                }
                if let Some(raised) = fold.interrupt_pending.take() {
                    let wait = record.t - raised;
                    let entry = response.entry(fold.class.clone()).or_insert((0.0, 0, 0));
                    entry.0 += wait as f64;
                    entry.1 = entry.1.max(wait);
                    entry.2 += 1;
                }
                fold.dispatched = Some((record.t, level));
            }
            TraceKind::QuantumEnd | TraceKind::Preempt => {
                let id = need_task(record)?;
                let t = record.t;
                let class;
                {
                    let fold = fold_for(&mut tasks, id, record)?;
                    class = fold.class.clone();
                    close_service(fold, t, &mut level_service, &mut class_service, &class);
                    fold.ready_since = Some(t);
                }
                if record.kind == TraceKind::Preempt {
                    let by = detail_num(record, "by")?;
                    let raised = last_interrupt.get(&by).copied().ok_or_else(|| {
                        MetricsError::MalformedTrace(format!(
                            "Preempt at t={t} names task {by} with no prior interrupt"
                        ))
                    })?;
                    *histogram.entry(t - raised).or_insert(0) += 1;
                }
            }
            TraceKind::Block | TraceKind::Complete | TraceKind::Fade => {
                let id = need_task(record)?;
                let t = record.t;
                let fold = fold_for(&mut tasks, id, record)?;
                let class = fold.class.clone();
                close_service(fold, t, &mut level_service, &mut class_service, &class);
                fold.ready_since = None;
                fold.interrupt_pending = None;
            }
            TraceKind::Unblock => {
                let id = need_task(record)?;
                let fold = fold_for(&mut tasks, id, record)?;
                fold.ready_since = Some(record.t);
            }
            TraceKind::Age | TraceKind::Reprioritize | TraceKind::Reward | TraceKind::Feedback => {}
        }
    }

    // Close out whatever was still running or waiting when the trace ends.
    for fold in tasks.values_mut() {
        let class = fold.class.clone();
        close_service(fold, end_t, &mut level_service, &mut class_service, &class);
        if let Some(since) = fold.ready_since {
            if end_t - since > starvation_bound {
                starvation_events += 1;
            }
        }
    }

    let total: u64 = class_service.values().sum();
    let share = |ticks: u64| {
        if total == 0 {
            0.0
        } else {
            ticks as f64 / total as f64
        }
    };
    let service_share_per_level: Vec<f64> = level_service.iter().map(|&v| share(v)).collect();
    let service_share_per_class: BTreeMap<String, f64> = class_service
        .iter()
        .map(|(class, &v)| (class.clone(), share(v)))
        .collect();

    let shares: Vec<f64> = service_share_per_class.values().copied().collect();
    let sum: f64 = shares.iter().sum();
    let sum_sq: f64 = shares.iter().map(|x| x * x).sum();
    let fairness_index = if sum_sq == 0.0 || shares.is_empty() {
        1.0
    } else {
        (sum * sum) / (shares.len() as f64 * sum_sq)
    };

    let response_time = response
        .into_iter()
        .map(|(class, (sum, max, count))| {
            (
                class,
                ClassResponse {
                    mean: sum / count as f64,
                    max,
                    count,
                },
            )
        })
        .collect();

    Ok(Metrics {
        response_time,
        service_share_per_level,
        service_share_per_class,
        starvation_events,
        starvation_bound,
        preempt_latency_histogram: histogram,
        fairness_index,
    })
}

fn fold_for<'a>(
    tasks: &'a mut BTreeMap<TaskId, TaskFold>,
    id: TaskId,
    record: &TraceRecord,
) -> Result<&'a mut TaskFold, MetricsError> {
    tasks.get_mut(&id).ok_or_else(|| {
        MetricsError::MalformedTrace(format!(
            "{:?} record at t={} for unadmitted task {id}",
            record.kind, record.t
        ))
    })
}

fn close_service(
    fold: &mut TaskFold,
    until: Tick,
    level_service: &mut Vec<u64>,
    class_service: &mut BTreeMap<String, u64>,
    class: &str,
) {
    if let Some((start, level)) = fold.dispatched.take() {
        let ran = until.saturating_sub(start);
        if level_service.len() <= level {
            level_service.resize(level + 1, 0);
        }
        level_service[level] += ran;
        *class_service.entry(class.to_string()).or_insert(0) += ran;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceKind as K;

    fn rec(t: Tick, kind: K, task: Option<TaskId>) -> TraceRecord {
        TraceRecord::new(t, kind, task)
    }

    #[test]
    fn dispatch_right_after_interrupt_has_zero_response() {
        let trace = vec![
            rec(0, K::Admit, Some(1)).with("class", "siren").with("work", 5),
            rec(3, K::Interrupt, Some(1)).with("level", 0),
            rec(3, K::Dispatch, Some(1)).with("level", 0).with("quantum", 10),
            rec(8, K::Complete, Some(1)),
        ];
        let m = metrics_of(&trace, 550).unwrap();
        let r = &m.response_time["siren"];
        assert_eq!((r.mean, r.max, r.count), (0.0, 0, 1));
        assert_eq!(m.service_share_per_class["siren"], 1.0);
        assert_eq!(m.fairness_index, 1.0);
    }

    #[test]
    fn equal_service_across_classes_is_fair() {
        let mut trace = vec![
            rec(0, K::Admit, Some(1)).with("class", "a").with("work", 10).with("level", 0),
            rec(0, K::Admit, Some(2)).with("class", "b").with("work", 10).with("level", 0),
        ];
        trace.push(rec(0, K::Dispatch, Some(1)).with("level", 0).with("quantum", 10));
        trace.push(rec(10, K::Complete, Some(1)));
        trace.push(rec(10, K::Dispatch, Some(2)).with("level", 0).with("quantum", 10));
        trace.push(rec(20, K::Complete, Some(2)));
        let m = metrics_of(&trace, 550).unwrap();
        assert_eq!(m.fairness_index, 1.0);
        assert_eq!(m.service_share_per_level, vec![1.0]);
    }

    #[test]
    fn empty_trace_yields_vacuous_fairness() {
        let m = metrics_of(&[], 550).unwrap();
        assert_eq!(m.fairness_index, 1.0);
        assert!(m.service_share_per_level.is_empty());
        assert_eq!(m.starvation_events, 0);
    }

    #[test]
    fn starvation_counts_waits_beyond_the_bound() {
        let trace = vec![
            rec(0, K::Admit, Some(1)).with("class", "slow").with("work", 5).with("level", 3),
            rec(700, K::Dispatch, Some(1)).with("level", 3).with("quantum", 80),
        ];
        let m = metrics_of(&trace, 550).unwrap();
        assert_eq!(m.starvation_events, 1);
        // Still-waiting tasks at the end of the trace count too.
        let trace = vec![
            rec(0, K::Admit, Some(1)).with("class", "slow").with("work", 5).with("level", 3),
            rec(600, K::Reprioritize, None),
        ];
        let m = metrics_of(&trace, 550).unwrap();
        assert_eq!(m.starvation_events, 1);
    }

    #[test]
    fn unadmitted_task_is_malformed() {
        let trace = vec![rec(0, K::Dispatch, Some(9)).with("level", 0).with("quantum", 10)];
        assert!(matches!(
            metrics_of(&trace, 550),
            Err(MetricsError::MalformedTrace(_))
        ));
    }

    #[test]
    fn out_of_order_records_are_malformed() {
        let trace = vec![
            rec(5, K::Admit, Some(1)).with("class", "a").with("work", 5),
            rec(4, K::Reprioritize, None),
        ];
        assert!(metrics_of(&trace, 550).is_err());
    }
}
