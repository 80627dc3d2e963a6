//! Compute nodes: single-server FIFO queues with work-conserving service,
//! plus the UAV flight state machine.
//!
//! Service is non-preemptive with an infinite buffer; a task's service
//! time is `size / capacity`. The node tracks the virtual time at which
//! all accepted work finishes, which makes the queueing-delay estimate a
//! single subtraction.

use std::collections::VecDeque;

use crate::model::{GeoPosition, SimTime, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Edge,
    Uav,
}

/// Why an enqueue was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Destroyed,
    Flying,
}

/// Aggregate per-node counters for queueing diagnostics and validation.
#[derive(Debug, Clone, Default)]
pub struct NodeStats {
    pub arrivals: u64,
    pub completed: u64,
    /// Sum of (service start - arrival at node) over completed tasks.
    pub wait_sum: f64,
    /// Sum of (service end - arrival at node) over completed tasks.
    pub sojourn_sum: f64,
    /// Time integral of the number of tasks at the node (queued + in service).
    pub tasks_area: f64,
    /// Total work accepted, CPU units.
    pub work_accepted: f64,
    /// Total work completed, CPU units.
    pub work_completed: f64,
    in_node: u64,
    last_change: SimTime,
}

impl NodeStats {
    fn step_to(&mut self, now: SimTime) {
        self.tasks_area += self.in_node as f64 * (now - self.last_change);
        self.last_change = now;
    }
}

/// A task accepted by a node, with its service schedule.
#[derive(Debug, Clone, Copy)]
pub struct InFlightTask {
    pub task: Task,
    /// When the task reached the node (decision time + access delay).
    pub arrived_at: SimTime,
    pub complete_at: SimTime,
}

/// UAV-specific state attached to a compute node.
#[derive(Debug, Clone)]
pub struct UavState {
    /// Horizontal offloading radius, meters. Retained for configuration
    /// fidelity; coverage itself is membership based (see `station`).
    pub radius: f64,
    pub altitude: f64,
    pub speed: f64,
    /// Town index this UAV currently serves; `None` while at base or flying.
    pub station: Option<usize>,
    /// Destination while flying: target position and town (None = base).
    pub destination: Option<(GeoPosition, Option<usize>)>,
    pub flying: bool,
    /// Invalidates in-flight arrival events when a new command preempts them.
    pub flight_seq: u64,
}

impl UavState {
    /// Where this UAV is headed: its station if parked, otherwise its
    /// destination town.
    pub fn target_town(&self) -> Option<usize> {
        if self.flying {
            self.destination.and_then(|(_, town)| town)
        } else {
            self.station
        }
    }
}

/// A single-server FIFO compute node (edge server or UAV).
#[derive(Debug, Clone)]
pub struct ComputeNode {
    pub id: u32,
    pub kind: NodeKind,
    /// Town index for edge servers; UAV association lives in `uav.station`.
    pub town: Option<usize>,
    /// CPU units per second.
    pub capacity: f64,
    /// One-way access delay, charged on upload and on result return.
    pub access_delay: f64,
    pub position: GeoPosition,
    pub destroyed: bool,
    pub uav: Option<UavState>,
    in_service: Option<InFlightTask>,
    waiting: VecDeque<InFlightTask>,
    /// Virtual time at which every accepted unit of work is done.
    work_finish_at: SimTime,
    pub stats: NodeStats,
}

impl ComputeNode {
    pub fn edge(id: u32, town: usize, capacity: f64, access_delay: f64, position: GeoPosition) -> Self {
        Self {
            id,
            kind: NodeKind::Edge,
            town: Some(town),
            capacity,
            access_delay,
            position,
            destroyed: false,
            uav: None,
            in_service: None,
            waiting: VecDeque::new(),
            work_finish_at: 0.0,
            stats: NodeStats::default(),
        }
    }

    pub fn uav(
        id: u32,
        capacity: f64,
        access_delay: f64,
        position: GeoPosition,
        radius: f64,
        altitude: f64,
        speed: f64,
    ) -> Self {
        Self {
            id,
            kind: NodeKind::Uav,
            town: None,
            capacity,
            access_delay,
            position,
            destroyed: false,
            uav: Some(UavState {
                radius,
                altitude,
                speed,
                station: None,
                destination: None,
                flying: false,
                flight_seq: 0,
            }),
            in_service: None,
            waiting: VecDeque::new(),
            work_finish_at: 0.0,
            stats: NodeStats::default(),
        }
    }

    pub fn is_flying(&self) -> bool {
        self.uav.as_ref().is_some_and(|u| u.flying)
    }

    /// True iff this UAV is parked at `town` and accepting tasks.
    pub fn in_range(&self, town: usize) -> bool {
        match &self.uav {
            Some(u) => !u.flying && u.station == Some(town),
            None => false,
        }
    }

    /// Wait a newly accepted task would incur before starting service.
    pub fn estimated_queueing_delay(&self, now: SimTime) -> SimTime {
        debug_assert!(!self.destroyed, "querying a destroyed node");
        (self.work_finish_at - now).max(0.0)
    }

    pub fn queue_len(&self) -> usize {
        self.waiting.len() + usize::from(self.in_service.is_some())
    }

    /// Accepts `task` decided on at `now`. The task physically reaches the
    /// node one access delay later. Returns the completion event time if
    /// the task went straight into service; queued tasks get their
    /// completion scheduled as predecessors finish.
    pub fn enqueue(&mut self, task: Task, now: SimTime) -> Result<Option<SimTime>, RejectReason> {
        if self.destroyed {
            return Err(RejectReason::Destroyed);
        }
        if self.is_flying() {
            return Err(RejectReason::Flying);
        }
        let arrived_at = now + self.access_delay;
        let service = task.size / self.capacity;
        let start = self.work_finish_at.max(arrived_at);
        let complete_at = start + service;
        self.work_finish_at = complete_at;

        self.stats.step_to(now);
        self.stats.in_node += 1;
        self.stats.arrivals += 1;
        self.stats.work_accepted += task.size;

        let entry = InFlightTask {
            task,
            arrived_at,
            complete_at,
        };
        if self.in_service.is_none() {
            debug_assert!(self.waiting.is_empty());
            self.in_service = Some(entry);
            Ok(Some(complete_at))
        } else {
            self.waiting.push_back(entry);
            Ok(None)
        }
    }

    /// Finishes the in-service task at its completion time. Returns the
    /// finished task and, when another task starts service, that task's
    /// completion event time. Returns `None` for stale completion events
    /// (the node was destroyed in the meantime).
    pub fn complete_current(&mut self, now: SimTime) -> Option<(InFlightTask, Option<SimTime>)> {
        if self.destroyed {
            return None;
        }
        let done = self
            .in_service
            .take()
            .expect("completion event fired with no task in service");
        debug_assert!((done.complete_at - now).abs() < 1e-9);

        self.stats.step_to(now);
        self.stats.in_node -= 1;
        self.stats.completed += 1;
        let service = done.task.size / self.capacity;
        self.stats.wait_sum += done.complete_at - service - done.arrived_at;
        self.stats.sojourn_sum += done.complete_at - done.arrived_at;
        self.stats.work_completed += done.task.size;

        let next_completion = self.waiting.pop_front().map(|next| {
            let at = next.complete_at;
            self.in_service = Some(next);
            at
        });
        Some((done, next_completion))
    }

    /// Marks the node destroyed, draining every held task. The caller
    /// assigns their fates.
    pub fn destroy(&mut self, now: SimTime) -> Vec<InFlightTask> {
        debug_assert!(!self.destroyed, "double destroy must be caught at validation");
        self.destroyed = true;
        self.stats.step_to(now);
        self.stats.in_node = 0;
        self.work_finish_at = now;
        let mut drained: Vec<InFlightTask> = self.in_service.take().into_iter().collect();
        drained.extend(self.waiting.drain(..));
        drained
    }

    /// Sends this UAV toward `destination`. Returns the arrival time and
    /// flight sequence number to stamp on the arrival event; `None` means
    /// the flight was zero length and the UAV is already on station.
    pub fn fly_to(
        &mut self,
        destination: GeoPosition,
        town: Option<usize>,
        now: SimTime,
    ) -> Option<(SimTime, u64)> {
        let uav = self.uav.as_mut().expect("fly_to on a non-UAV node");
        debug_assert!(!self.destroyed);
        let dist = self.position.distance(&destination);
        if dist == 0.0 {
            uav.flying = false;
            uav.destination = None;
            uav.station = town;
            return None;
        }
        uav.flying = true;
        uav.station = None;
        uav.destination = Some((destination, town));
        uav.flight_seq += 1;
        Some((now + dist / uav.speed, uav.flight_seq))
    }

    /// Lands the UAV at its destination. Stale events (superseded flights)
    /// are ignored.
    pub fn complete_flight(&mut self, flight_seq: u64) {
        let uav = self.uav.as_mut().expect("complete_flight on a non-UAV node");
        if !uav.flying || uav.flight_seq != flight_seq {
            return;
        }
        let (pos, town) = uav.destination.take().expect("flying without destination");
        self.position = pos;
        uav.station = town;
        uav.flying = false;
    }

    /// Closes the stats integral at the end of a run.
    pub fn finalize_stats(&mut self, now: SimTime) {
        self.stats.step_to(now);
    }

    /// Tasks still held (queued or in service), e.g. pending at run end.
    pub fn held_tasks(&self) -> impl Iterator<Item = &InFlightTask> {
        self.in_service.iter().chain(self.waiting.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(id: u64, size: f64, created_at: f64) -> Task {
        Task {
            id,
            group: 1,
            town: 1,
            created_at,
            size,
            tolerable_delay: 1.0,
        }
    }

    fn idle_edge() -> ComputeNode {
        // 100K units/s, no access delay for easy arithmetic.
        ComputeNode::edge(1, 0, 100_000.0, 0.0, GeoPosition::ground(0.0, 0.0))
    }

    #[test]
    fn service_time_is_size_over_capacity() {
        let mut node = idle_edge();
        let done_at = node.enqueue(task(1, 90.0, 0.0), 0.0).unwrap().unwrap();
        assert!((done_at - 0.0009).abs() < 1e-12);
    }

    #[test]
    fn fifo_back_to_back_completions() {
        let mut node = idle_edge();
        let first = node.enqueue(task(1, 90.0, 0.0), 0.0).unwrap().unwrap();
        assert_eq!(node.enqueue(task(2, 90.0, 0.0), 0.0).unwrap(), None);
        assert!((first - 0.0009).abs() < 1e-12);
        let (done, next) = node.complete_current(first).unwrap();
        assert_eq!(done.task.id, 1);
        let second = next.unwrap();
        assert!((second - 0.0018).abs() < 1e-12);
        let (done, next) = node.complete_current(second).unwrap();
        assert_eq!(done.task.id, 2);
        assert!(next.is_none());
    }

    #[test]
    fn queueing_delay_estimates() {
        let mut node = idle_edge();
        assert_eq!(node.estimated_queueing_delay(0.0), 0.0);
        // 45,000 units of backlog on 100K units/s -> 0.45 s.
        node.enqueue(task(1, 45_000.0, 0.0), 0.0).unwrap();
        assert!((node.estimated_queueing_delay(0.0) - 0.45).abs() < 1e-12);

        let mut uav = ComputeNode::uav(
            2,
            50_000.0,
            0.0,
            GeoPosition::ground(0.0, 0.0),
            100.0,
            200.0,
            60.0,
        );
        uav.uav.as_mut().unwrap().station = Some(0);
        uav.enqueue(task(2, 50_000.0, 0.0), 0.0).unwrap();
        assert!((uav.estimated_queueing_delay(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flying_uav_rejects_tasks_but_keeps_serving() {
        let mut uav = ComputeNode::uav(
            2,
            100_000.0,
            0.0,
            GeoPosition::ground(0.0, 0.0),
            100.0,
            200.0,
            20.0,
        );
        uav.uav.as_mut().unwrap().station = Some(0);
        let done_at = uav.enqueue(task(1, 90.0, 0.0), 0.0).unwrap().unwrap();

        // 1000 m at 20 m/s -> arrival in 50 s.
        let (arrive, seq) = uav
            .fly_to(GeoPosition::new(1000.0, 0.0, 0.0), Some(1), 0.0)
            .unwrap();
        assert_eq!(arrive, 50.0);
        assert!(uav.is_flying());
        assert!(!uav.in_range(0));

        assert_eq!(
            uav.enqueue(task(2, 90.0, 0.0), 0.0),
            Err(RejectReason::Flying)
        );
        // The queued task still completes 0.9 ms after its service start.
        let (done, _) = uav.complete_current(done_at).unwrap();
        assert_eq!(done.task.id, 1);

        uav.complete_flight(seq);
        assert!(uav.in_range(1));
        assert!(!uav.in_range(0));
    }

    #[test]
    fn zero_length_flight_arrives_immediately() {
        let mut uav = ComputeNode::uav(
            2,
            50_000.0,
            0.0,
            GeoPosition::new(5.0, 5.0, 200.0),
            100.0,
            200.0,
            20.0,
        );
        assert!(uav
            .fly_to(GeoPosition::new(5.0, 5.0, 200.0), Some(2), 10.0)
            .is_none());
        assert!(!uav.is_flying());
        assert!(uav.in_range(2));
    }

    #[test]
    fn stale_flight_arrival_is_ignored() {
        let mut uav = ComputeNode::uav(
            2,
            50_000.0,
            0.0,
            GeoPosition::ground(0.0, 0.0),
            100.0,
            200.0,
            20.0,
        );
        let (_, seq1) = uav
            .fly_to(GeoPosition::new(1000.0, 0.0, 0.0), Some(1), 0.0)
            .unwrap();
        // Redirected mid-flight.
        let (_, seq2) = uav
            .fly_to(GeoPosition::new(2000.0, 0.0, 0.0), Some(2), 10.0)
            .unwrap();
        uav.complete_flight(seq1);
        assert!(uav.is_flying());
        uav.complete_flight(seq2);
        assert!(uav.in_range(2));
    }

    #[test]
    fn destroy_drains_queue() {
        let mut node = idle_edge();
        node.enqueue(task(1, 90.0, 0.0), 0.0).unwrap();
        node.enqueue(task(2, 90.0, 0.0), 0.0).unwrap();
        node.enqueue(task(3, 90.0, 0.0), 0.0).unwrap();
        let drained = node.destroy(0.5);
        assert_eq!(drained.len(), 3);
        assert!(node.destroyed);
        assert_eq!(
            node.enqueue(task(4, 90.0, 0.0), 1.0),
            Err(RejectReason::Destroyed)
        );
        // The already-scheduled completion event is now stale.
        assert!(node.complete_current(0.0009).is_none());
    }

    #[test]
    fn destroy_idle_node_drains_nothing() {
        let mut node = idle_edge();
        assert!(node.destroy(1.0).is_empty());
    }

    #[test]
    fn work_conservation_under_continuous_backlog() {
        let mut node = idle_edge();
        // Keep the queue nonempty over [0, 1]: 20 tasks x 10K units at 100K/s.
        for i in 0..20 {
            node.enqueue(task(i, 10_000.0, 0.0), 0.0).unwrap();
        }
        let mut next = Some(0.1);
        let mut completed_by_one = 0.0;
        while let Some(at) = next {
            if at > 1.0 + 1e-9 {
                break;
            }
            let (done, n) = node.complete_current(at).unwrap();
            completed_by_one += done.task.size;
            next = n;
        }
        // capacity x interval = 100K x 1 s, within one service-time grain.
        assert!((completed_by_one - 100_000.0).abs() <= 10_000.0);
    }
}
