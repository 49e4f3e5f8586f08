//! Inter-task coordination: counting semaphores (locks are permits = 1),
//! barriers built on top of them, and wait-for-graph deadlock detection.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::task::TaskId;

/// Counting semaphore. Waiters queue FIFO; a release with waiters hands
/// the permit straight to the head, so permits stay 0 while anyone waits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Semaphore {
    pub id: String,
    pub permits: u64,
    pub wait_queue: VecDeque<TaskId>,
}

impl Semaphore {
    pub fn new(id: impl Into<String>, permits: u64) -> Self {
        Semaphore {
            id: id.into(),
            permits,
            wait_queue: VecDeque::new(),
        }
    }
}

/// Rendezvous for a fixed party count, implemented over an internal
/// zero-permit semaphore: early arrivals block on it, the last arrival
/// releases them all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub id: String,
    pub parties: usize,
    pub arrived: BTreeSet<TaskId>,
    pub sem: Semaphore,
}

impl Barrier {
    pub fn new(id: impl Into<String>, parties: usize) -> Self {
        let id = id.into();
        let sem = Semaphore::new(format!("barrier:{id}"), 0);
        Barrier {
            id,
            parties,
            arrived: BTreeSet::new(),
            sem,
        }
    }
}

/// Finds a cycle in a wait-for graph (edges waiter -> holder), exploring
/// nodes and neighbors in ascending id order so the answer is
/// deterministic. The returned cycle is rotated to start at its smallest
/// member and lists each task once.
pub fn find_cycle(edges: &BTreeMap<TaskId, BTreeSet<TaskId>>) -> Option<Vec<TaskId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let mut color: BTreeMap<TaskId, Color> = edges.keys().map(|&k| (k, Color::White)).collect();

    fn dfs(
        node: TaskId,
        edges: &BTreeMap<TaskId, BTreeSet<TaskId>>,
        color: &mut BTreeMap<TaskId, Color>,
        stack: &mut Vec<TaskId>,
    ) -> Option<Vec<TaskId>> {
        color.insert(node, Color::Gray);
        stack.push(node);
        if let Some(next) = edges.get(&node) {
            for &n in next {
                match color.get(&n).copied().unwrap_or(Color::Black) {
                    Color::Gray => {
                        let start = stack.iter().position(|&x| x == n).expect("on stack");
                        return Some(stack[start..].to_vec());
                    }
                    Color::White => {
                        if let Some(cycle) = dfs(n, edges, color, stack) {
                            return Some(cycle);
                        }
                    }
                    Color::Black => {}
                }
            }
        }
        stack.pop();
        color.insert(node, Color::Black);
        None
    }

    let nodes: Vec<TaskId> = edges.keys().copied().collect();
    for node in nodes {
        if color[&node] == Color::White {
            let mut stack = Vec::new();
            if let Some(cycle) = dfs(node, edges, &mut color, &mut stack) {
                return Some(canonical(cycle));
            }
        }
    }
    None
}

/// Rotates a cycle so its smallest task id comes first.
fn canonical(cycle: Vec<TaskId>) -> Vec<TaskId> {
    let min_pos = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, id)| **id)
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut rotated = cycle[min_pos..].to_vec();
    rotated.extend_from_slice(&cycle[..min_pos]);
    rotated
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(TaskId, TaskId)]) -> BTreeMap<TaskId, BTreeSet<TaskId>> {
        let mut g: BTreeMap<TaskId, BTreeSet<TaskId>> = BTreeMap::new();
        for (from, to) in edges {
            g.entry(*from).or_default().insert(*to);
            g.entry(*to).or_default();
        }
        g
    }

    #[test]
    fn empty_graph_has_no_cycle() {
        assert_eq!(find_cycle(&BTreeMap::new()), None);
    }

    #[test]
    fn chain_without_back_edge_is_acyclic() {
        assert_eq!(find_cycle(&graph(&[(1, 2), (2, 3)])), None);
    }

    #[test]
    fn two_task_cross_hold_reports_smallest_first() {
        assert_eq!(find_cycle(&graph(&[(2, 1), (1, 2)])), Some(vec![1, 2]));
    }

    #[test]
    fn finds_cycle_behind_a_tail() {
        // 1 -> 2 -> 3 -> 4 -> 2: cycle is [2, 3, 4].
        assert_eq!(
            find_cycle(&graph(&[(1, 2), (2, 3), (3, 4), (4, 2)])),
            Some(vec![2, 3, 4])
        );
    }

    #[test]
    fn exhaustive_two_node_graphs_agree_with_definition() {
        // Brute force over every digraph on {1, 2}: a cycle exists iff both
        // directed edges are present (self-edges cannot occur in a wait-for
        // graph and are not generated).
        for mask in 0..4u8 {
            let mut edges = Vec::new();
            if mask & 1 != 0 {
                edges.push((1, 2));
            }
            if mask & 2 != 0 {
                edges.push((2, 1));
            }
            let found = find_cycle(&graph(&edges));
            if mask == 3 {
                assert_eq!(found, Some(vec![1, 2]));
            } else {
                assert_eq!(found, None, "mask {mask}");
            }
        }
    }
}
