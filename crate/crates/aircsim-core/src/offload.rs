//! Task routing: pick the reachable operational node with the lowest
//! estimated queueing delay, and account end-to-end delay into a fate.

use crate::model::{SimTime, Task, TaskFate};
use crate::nodes::{ComputeNode, NodeKind};

/// One routing decision, for tracing and post-run audits.
#[derive(Debug, Clone, PartialEq)]
pub struct OffloadDecision {
    pub task_id: u64,
    /// Index into the node table; `None` when nothing was reachable.
    pub chosen: Option<usize>,
    /// (node id, estimated queueing delay) for every consulted node.
    pub estimates: Vec<(u32, SimTime)>,
    pub decided_at: SimTime,
}

/// Node indices a task from `town_ix` can be offloaded to: the town's edge
/// server when operational, plus every UAV parked at the town.
pub fn reachable_nodes(nodes: &[ComputeNode], town_ix: usize, edge_ix: Option<usize>) -> Vec<usize> {
    let mut out = Vec::new();
    if let Some(ix) = edge_ix {
        if !nodes[ix].destroyed {
            out.push(ix);
        }
    }
    for (ix, node) in nodes.iter().enumerate() {
        if node.in_range(town_ix) && !node.destroyed {
            out.push(ix);
        }
    }
    out
}

fn rank(kind: NodeKind) -> u8 {
    // Exact delay ties prefer terrestrial infrastructure.
    match kind {
        NodeKind::Edge => 0,
        NodeKind::Uav => 1,
    }
}

/// Picks the minimum over `(estimate, edge-before-uav, node id)` from an
/// iterator of `(node index, node id, kind, estimate)`.
pub fn best_candidate(
    candidates: impl Iterator<Item = (usize, u32, NodeKind, SimTime)>,
) -> Option<usize> {
    candidates
        .min_by(|a, b| {
            a.3.total_cmp(&b.3)
                .then_with(|| rank(a.2).cmp(&rank(b.2)))
                .then_with(|| a.1.cmp(&b.1))
        })
        .map(|(ix, _, _, _)| ix)
}

/// Hot-path selection using live (zero-staleness) estimates.
pub fn select_node(
    nodes: &[ComputeNode],
    town_ix: usize,
    edge_ix: Option<usize>,
    now: SimTime,
) -> Option<usize> {
    let reachable = reachable_nodes(nodes, town_ix, edge_ix);
    best_candidate(reachable.into_iter().map(|ix| {
        let n = &nodes[ix];
        (ix, n.id, n.kind, n.estimated_queueing_delay(now))
    }))
}

/// Full decision record, including every consulted estimate.
pub fn select_target(
    nodes: &[ComputeNode],
    town_ix: usize,
    edge_ix: Option<usize>,
    task_id: u64,
    now: SimTime,
) -> OffloadDecision {
    let reachable = reachable_nodes(nodes, town_ix, edge_ix);
    let estimates: Vec<(u32, SimTime)> = reachable
        .iter()
        .map(|&ix| (nodes[ix].id, nodes[ix].estimated_queueing_delay(now)))
        .collect();
    let chosen = best_candidate(reachable.into_iter().map(|ix| {
        let n = &nodes[ix];
        (ix, n.id, n.kind, n.estimated_queueing_delay(now))
    }));
    OffloadDecision {
        task_id,
        chosen,
        estimates,
        decided_at: now,
    }
}

/// Resolves a task whose service finished at `service_done_at`: the result
/// still has to travel back one access delay before it counts.
pub fn resolve_fate(task: &Task, service_done_at: SimTime, access_delay: SimTime) -> (TaskFate, SimTime) {
    let completed_at = service_done_at + access_delay;
    let sojourn = completed_at - task.created_at;
    let fate = if sojourn <= task.tolerable_delay {
        TaskFate::Succeeded
    } else {
        TaskFate::FailedDeadline
    };
    (fate, completed_at)
}
