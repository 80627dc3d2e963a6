//! The simulation itself: builds the world from a validated scenario and
//! drives arrivals, service completions, flights, the timeline, and the
//! HAP controller through the future-event list.
//!
//! A `Simulation` is strictly single threaded; independent instances
//! share nothing and may run in parallel.

use std::collections::BTreeMap;
use std::io::Write;

use crate::engine::{EventQueue, RandomStream};
use crate::hap::{plan_assignment, DemandEstimate, FleetAssignment, FleetUav};
use crate::metrics::{MetricsCollector, RunSummary};
use crate::model::{ApplicationProfile, GeoPosition, SimTime, Task, TaskFate};
use crate::nodes::ComputeNode;
use crate::offload;
use crate::workload::{
    ArrivalModel, ControllerConfig, DemandMode, FleetConfig, Scenario, ScenarioEffect,
    UserGroup, ValidationError,
};

enum Payload {
    /// One user of `group` produces a task and re-arms its arrival process.
    Arrival { group: usize },
    /// The in-service task of `node` finishes.
    Completion { node: usize },
    /// A UAV reaches its destination.
    FlightArrival { node: usize, flight_seq: u64 },
    /// The `index`-th scenario event takes effect.
    Timeline { index: usize },
    ControllerTick,
}

struct TownState {
    id: u32,
    position: GeoPosition,
    edge: Option<usize>,
    /// Cumulative CPU units offered by this town's users (for measured
    /// demand estimation).
    arrived_work: f64,
}

struct GroupState {
    id: u32,
    town_ix: usize,
    profile: ApplicationProfile,
    active_until: Option<SimTime>,
    arrival: ArrivalModel,
    users: u32,
}

struct ControllerRuntime {
    cfg: ControllerConfig,
    last_assignment: FleetAssignment,
    last_tick_at: SimTime,
    /// `arrived_work` snapshot per town at the previous tick.
    work_snapshot: Vec<f64>,
}

struct StaleTelemetry {
    max_age: SimTime,
    taken_at: SimTime,
    estimates: Vec<SimTime>,
}

pub struct Simulation {
    fel: EventQueue<Payload>,
    duration: SimTime,
    seed: u64,
    towns: Vec<TownState>,
    town_ix_by_id: BTreeMap<u32, usize>,
    nodes: Vec<ComputeNode>,
    node_ix_by_id: BTreeMap<u32, usize>,
    groups: Vec<GroupState>,
    streams: Vec<RandomStream>,
    events: Vec<crate::workload::ScenarioEvent>,
    fleet_cfg: Option<FleetConfig>,
    controller: Option<ControllerRuntime>,
    telemetry: Option<StaleTelemetry>,
    metrics: MetricsCollector,
    next_task_id: u64,
    trace: Option<Box<dyn Write>>,
    finalized: bool,
}

impl Simulation {
    /// Validates `scenario` and builds the initial world.
    pub fn new(scenario: &Scenario) -> Result<Self, Vec<ValidationError>> {
        scenario.validate()?;
        let seed = scenario.seed;

        let mut town_ix_by_id = BTreeMap::new();
        let mut towns: Vec<TownState> = Vec::with_capacity(scenario.towns.len());
        for t in &scenario.towns {
            town_ix_by_id.insert(t.id, towns.len());
            towns.push(TownState {
                id: t.id,
                position: GeoPosition::ground(t.x, t.y),
                edge: None,
                arrived_work: 0.0,
            });
        }

        let mut nodes = Vec::new();
        let mut node_ix_by_id = BTreeMap::new();
        for e in &scenario.edge_servers {
            let town_ix = town_ix_by_id[&e.town];
            let ix = nodes.len();
            nodes.push(ComputeNode::edge(
                e.id,
                town_ix,
                e.capacity,
                e.access_delay,
                towns[town_ix].position,
            ));
            node_ix_by_id.insert(e.id, ix);
            towns[town_ix].edge = Some(ix);
        }

        let metrics = MetricsCollector::new(
            &scenario.towns.iter().map(|t| t.id).collect::<Vec<_>>(),
            scenario.duration,
            scenario.metrics.window,
        );

        let mut sim = Self {
            fel: EventQueue::new(),
            duration: scenario.duration,
            seed,
            towns,
            town_ix_by_id,
            nodes,
            node_ix_by_id,
            groups: Vec::new(),
            streams: Vec::new(),
            events: scenario.events.clone(),
            fleet_cfg: scenario.uav_fleet.clone(),
            controller: scenario.controller.enabled.then(|| ControllerRuntime {
                cfg: scenario.controller.clone(),
                last_assignment: FleetAssignment::default(),
                last_tick_at: 0.0,
                work_snapshot: vec![0.0; scenario.towns.len()],
            }),
            telemetry: (scenario.controller.telemetry_staleness > 0.0).then(|| StaleTelemetry {
                max_age: scenario.controller.telemetry_staleness,
                taken_at: f64::NEG_INFINITY,
                estimates: Vec::new(),
            }),
            metrics,
            next_task_id: 0,
            trace: None,
            finalized: false,
        };

        if let Some(fleet) = sim.fleet_cfg.clone() {
            sim.spawn_uavs(fleet.count, GeoPosition::new(fleet.base_x, fleet.base_y, fleet.altitude));
        }

        // Timeline first: same-time ties then resolve timeline -> ticks.
        for (index, event) in sim.events.clone().iter().enumerate() {
            sim.fel.schedule(event.at, Payload::Timeline { index });
        }
        for group in scenario.groups.clone() {
            sim.add_group(&group, group.active_from);
        }
        if sim.controller.is_some() {
            sim.fel.schedule(0.0, Payload::ControllerTick);
        }
        Ok(sim)
    }

    /// Redirects the per-task decision trace into `sink` (delimited text,
    /// one record per resolved task).
    pub fn set_trace(&mut self, mut sink: Box<dyn Write>) {
        let _ = writeln!(sink, "task,town,created_at,node,fate,completed_at");
        self.trace = Some(sink);
    }

    fn spawn_uavs(&mut self, count: u32, base: GeoPosition) {
        let fleet = self
            .fleet_cfg
            .clone()
            .expect("UAV deployment requires fleet configuration");
        let next_id = self
            .node_ix_by_id
            .keys()
            .max()
            .copied()
            .map_or(1, |m| m + 1);
        for i in 0..count {
            let id = next_id + i;
            let ix = self.nodes.len();
            self.nodes.push(ComputeNode::uav(
                id,
                fleet.capacity,
                fleet.access_delay,
                base,
                fleet.radius,
                fleet.altitude,
                fleet.speed,
            ));
            self.node_ix_by_id.insert(id, ix);
        }
    }

    fn add_group(&mut self, group: &UserGroup, start: SimTime) {
        let gix = self.groups.len();
        self.streams
            .push(RandomStream::new(self.seed, group.id as u64));
        self.groups.push(GroupState {
            id: group.id,
            town_ix: self.town_ix_by_id[&group.town],
            profile: group.profile,
            active_until: group.active_until,
            arrival: group.arrival,
            users: group.users,
        });
        let start = start.max(group.active_from);
        for _ in 0..group.users {
            let gap = self.draw_gap(gix);
            self.fel.schedule(start + gap, Payload::Arrival { group: gix });
        }
    }

    fn draw_gap(&mut self, gix: usize) -> SimTime {
        let mean = self.groups[gix].profile.mean_interarrival;
        match self.groups[gix].arrival {
            ArrivalModel::Poisson => self.streams[gix].sample_exponential(mean),
            ArrivalModel::Fixed => mean,
        }
    }

    pub fn now(&self) -> SimTime {
        self.fel.now()
    }

    pub fn duration(&self) -> SimTime {
        self.duration
    }

    pub fn metrics(&self) -> &MetricsCollector {
        &self.metrics
    }

    pub fn summary(&self) -> RunSummary {
        self.metrics.summary(self.seed)
    }

    pub fn nodes(&self) -> &[ComputeNode] {
        &self.nodes
    }

    pub fn node_by_id(&self, id: u32) -> Option<&ComputeNode> {
        self.node_ix_by_id.get(&id).map(|&ix| &self.nodes[ix])
    }

    /// The controller's most recent fleet plan (empty when disabled).
    pub fn fleet_assignment(&self) -> FleetAssignment {
        self.controller
            .as_ref()
            .map(|c| c.last_assignment.clone())
            .unwrap_or_default()
    }

    /// Runs until `end` (capped at the scenario duration).
    pub fn run_until(&mut self, end: SimTime) {
        let end = end.min(self.duration);
        while let Some((now, payload)) = self.fel.pop_until(end) {
            match payload {
                Payload::Arrival { group } => self.on_arrival(group, now),
                Payload::Completion { node } => self.on_completion(node, now),
                Payload::FlightArrival { node, flight_seq } => {
                    self.nodes[node].complete_flight(flight_seq)
                }
                Payload::Timeline { index } => self.on_timeline(index, now),
                Payload::ControllerTick => self.on_controller_tick(now),
            }
        }
    }

    /// Runs to the scenario horizon and closes the per-node statistics.
    pub fn run_to_end(&mut self) {
        self.run_until(self.duration);
        if !self.finalized {
            for node in &mut self.nodes {
                node.finalize_stats(self.duration);
            }
            self.finalized = true;
        }
    }

    fn on_arrival(&mut self, gix: usize, now: SimTime) {
        let g = &self.groups[gix];
        if let Some(until) = g.active_until {
            if now >= until {
                return;
            }
        }
        let town_ix = g.town_ix;
        let task = Task {
            id: self.next_task_id,
            group: g.id,
            town: self.towns[town_ix].id,
            created_at: now,
            size: g.profile.task_size,
            tolerable_delay: g.profile.tolerable_delay,
        };
        self.next_task_id += 1;
        self.towns[town_ix].arrived_work += task.size;
        self.metrics.record_generated(town_ix);

        let chosen = self.route(town_ix, now);
        match chosen {
            None => {
                self.metrics.record(town_ix, TaskFate::FailedNoTarget, now);
                self.write_trace(&task, None, TaskFate::FailedNoTarget, now);
            }
            Some(ix) => match self.nodes[ix].enqueue(task, now) {
                Ok(Some(done_at)) => {
                    self.fel.schedule(done_at, Payload::Completion { node: ix });
                }
                Ok(None) => {}
                // Unreachable at zero staleness; with stale telemetry a
                // pick can race a state change and the task has nowhere
                // else to go.
                Err(_) => {
                    self.metrics.record(town_ix, TaskFate::FailedNoTarget, now);
                    self.write_trace(&task, None, TaskFate::FailedNoTarget, now);
                }
            },
        }

        let gap = self.draw_gap(gix);
        self.fel.schedule(now + gap, Payload::Arrival { group: gix });
    }

    fn route(&mut self, town_ix: usize, now: SimTime) -> Option<usize> {
        let edge_ix = self.towns[town_ix].edge;
        if let Some(tel) = &mut self.telemetry {
            if now - tel.taken_at >= tel.max_age {
                tel.taken_at = now;
                tel.estimates = self
                    .nodes
                    .iter()
                    .map(|n| {
                        if n.destroyed {
                            f64::INFINITY
                        } else {
                            n.estimated_queueing_delay(now)
                        }
                    })
                    .collect();
            }
            let estimates = &tel.estimates;
            let reachable = offload::reachable_nodes(&self.nodes, town_ix, edge_ix);
            offload::best_candidate(reachable.into_iter().map(|ix| {
                let n = &self.nodes[ix];
                (ix, n.id, n.kind, estimates[ix])
            }))
        } else {
            offload::select_node(&self.nodes, town_ix, edge_ix, now)
        }
    }

    fn on_completion(&mut self, node_ix: usize, now: SimTime) {
        let Some((done, next)) = self.nodes[node_ix].complete_current(now) else {
            return; // node destroyed since the event was scheduled
        };
        if let Some(at) = next {
            self.fel.schedule(at, Payload::Completion { node: node_ix });
        }
        let access = self.nodes[node_ix].access_delay;
        let (fate, completed_at) = offload::resolve_fate(&done.task, now, access);
        let town_ix = self.town_ix_by_id[&done.task.town];
        self.metrics.record(town_ix, fate, completed_at);
        let node_id = self.nodes[node_ix].id;
        self.write_trace(&done.task, Some(node_id), fate, completed_at);
    }

    fn on_timeline(&mut self, index: usize, now: SimTime) {
        match self.events[index].effect.clone() {
            ScenarioEffect::DestroyNode { node } => {
                let ix = self.node_ix_by_id[&node];
                for held in self.nodes[ix].destroy(now) {
                    let town_ix = self.town_ix_by_id[&held.task.town];
                    self.metrics
                        .record(town_ix, TaskFate::FailedNodeDestroyed, now);
                    self.write_trace(&held.task, Some(node), TaskFate::FailedNodeDestroyed, now);
                }
            }
            ScenarioEffect::SetProfile { group, profile } => {
                if let Some(g) = self.groups.iter_mut().find(|g| g.id == group) {
                    g.profile = profile;
                }
            }
            ScenarioEffect::AddGroup(group) => {
                self.add_group(&group, now);
            }
            ScenarioEffect::DeployFleet {
                count,
                base_x,
                base_y,
            } => {
                let altitude = self.fleet_cfg.as_ref().map_or(0.0, |f| f.altitude);
                self.spawn_uavs(count, GeoPosition::new(base_x, base_y, altitude));
            }
        }
    }

    fn offered_load_oracle(&self, town_ix: usize, now: SimTime) -> f64 {
        self.groups
            .iter()
            .filter(|g| g.town_ix == town_ix)
            .filter(|g| g.active_until.is_none_or(|until| now < until))
            .map(|g| g.users as f64 * g.profile.task_size / g.profile.mean_interarrival)
            .sum()
    }

    fn on_controller_tick(&mut self, now: SimTime) {
        let Some(mut ctrl) = self.controller.take() else {
            return;
        };

        let estimates: Vec<DemandEstimate> = (0..self.towns.len())
            .map(|town_ix| {
                let offered = match ctrl.cfg.demand_mode {
                    DemandMode::Oracle => self.offered_load_oracle(town_ix, now),
                    DemandMode::Measured => {
                        let elapsed = now - ctrl.last_tick_at;
                        if elapsed > 0.0 {
                            (self.towns[town_ix].arrived_work - ctrl.work_snapshot[town_ix])
                                / elapsed
                        } else {
                            0.0
                        }
                    }
                };
                let surviving = self.towns[town_ix]
                    .edge
                    .filter(|&ix| !self.nodes[ix].destroyed)
                    .map_or(0.0, |ix| self.nodes[ix].capacity);
                DemandEstimate::new(self.towns[town_ix].id, offered, surviving, ctrl.cfg.rho_target, now)
            })
            .collect();

        let fleet: Vec<FleetUav> = self
            .nodes
            .iter()
            .filter(|n| n.uav.is_some() && !n.destroyed)
            .map(|n| FleetUav {
                id: n.id,
                capacity: n.capacity,
                current_town: n
                    .uav
                    .as_ref()
                    .unwrap()
                    .target_town()
                    .map(|ix| self.towns[ix].id),
            })
            .collect();

        let plan = plan_assignment(&estimates, &fleet);

        let fleet_cfg = self.fleet_cfg.clone();
        for ix in 0..self.nodes.len() {
            let Some(uav) = self.nodes[ix].uav.as_ref() else {
                continue;
            };
            if self.nodes[ix].destroyed {
                continue;
            }
            let current = uav.target_town().map(|t| self.towns[t].id);
            let desired = plan.assigned_town(self.nodes[ix].id);
            if current == desired {
                continue;
            }
            let (dest, town_ix) = match desired {
                Some(town_id) => {
                    let t = self.town_ix_by_id[&town_id];
                    let mut p = self.towns[t].position;
                    p.z = self.nodes[ix].uav.as_ref().unwrap().altitude;
                    (p, Some(t))
                }
                None => {
                    let f = fleet_cfg.as_ref().expect("UAV exists without fleet config");
                    (
                        GeoPosition::new(f.base_x, f.base_y, f.altitude),
                        None,
                    )
                }
            };
            if let Some((arrive, flight_seq)) = self.nodes[ix].fly_to(dest, town_ix, now) {
                self.fel
                    .schedule(arrive, Payload::FlightArrival { node: ix, flight_seq });
            }
        }

        ctrl.last_assignment = plan;
        ctrl.last_tick_at = now;
        for (town_ix, snap) in ctrl.work_snapshot.iter_mut().enumerate() {
            *snap = self.towns[town_ix].arrived_work;
        }
        let next = now + ctrl.cfg.tick_interval;
        if next <= self.duration {
            self.fel.schedule(next, Payload::ControllerTick);
        }
        self.controller = Some(ctrl);
    }

    fn write_trace(&mut self, task: &Task, node: Option<u32>, fate: TaskFate, resolved_at: SimTime) {
        let Some(sink) = &mut self.trace else {
            return;
        };
        let fate = match fate {
            TaskFate::Succeeded => "succeeded",
            TaskFate::FailedDeadline => "failed_deadline",
            TaskFate::FailedNoTarget => "failed_no_target",
            TaskFate::FailedNodeDestroyed => "failed_node_destroyed",
        };
        let node = node.map_or(String::from("-"), |n| n.to_string());
        let _ = writeln!(
            sink,
            "{},{},{:.6},{},{},{:.6}",
            task.id, task.town, task.created_at, node, fate, resolved_at
        );
    }
}

/// Convenience: validate, run to the horizon, and collect the outputs.
pub struct RunOutput {
    pub time_series_csv: String,
    pub summary: RunSummary,
    pub summary_text: String,
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, Vec<ValidationError>> {
    let mut sim = Simulation::new(scenario)?;
    sim.run_to_end();
    let summary = sim.summary();
    Ok(RunOutput {
        time_series_csv: sim.metrics().to_csv(),
        summary_text: summary.to_text(),
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ApplicationProfile;
    use crate::workload::{build_disaster_scenario, EdgeServer, MetricsConfig, Town};

    fn tiny_scenario() -> Scenario {
        Scenario {
            duration: 100.0,
            seed: 7,
            towns: vec![Town {
                id: 1,
                name: "t".into(),
                x: 0.0,
                y: 0.0,
            }],
            edge_servers: vec![EdgeServer {
                id: 1,
                town: 1,
                capacity: 100_000.0,
                access_delay: 0.001,
            }],
            uav_fleet: None,
            groups: vec![UserGroup {
                id: 1,
                town: 1,
                users: 50,
                profile: ApplicationProfile::new(90.0, 1.0, 1.0),
                active_from: 0.0,
                active_until: None,
                arrival: ArrivalModel::Poisson,
            }],
            events: vec![],
            controller: ControllerConfig::default(),
            metrics: MetricsConfig { window: 10.0 },
        }
    }

    #[test]
    fn underloaded_town_succeeds_everywhere() {
        let mut sim = Simulation::new(&tiny_scenario()).unwrap();
        sim.run_to_end();
        let s = sim.summary();
        assert!(s.towns[0].generated > 3000, "generated {}", s.towns[0].generated);
        assert_eq!(s.towns[0].failed_deadline, 0);
        assert_eq!(s.towns[0].failed_no_target, 0);
        assert!(s.overall_success_rate.unwrap() > 0.999);
    }

    #[test]
    fn conservation_holds() {
        let mut scenario = build_disaster_scenario(false);
        scenario.duration = 1500.0;
        scenario.events.retain(|e| e.at <= 1500.0);
        let mut sim = Simulation::new(&scenario).unwrap();
        sim.run_to_end();
        for t in sim.summary().towns {
            assert_eq!(t.generated, t.resolved() + t.pending_at_end, "{t:?}");
        }
    }

    #[test]
    fn identical_seeds_identical_output() {
        let scenario = tiny_scenario();
        let a = run_scenario(&scenario).unwrap();
        let b = run_scenario(&scenario).unwrap();
        assert_eq!(a.time_series_csv, b.time_series_csv);
        assert_eq!(a.summary_text, b.summary_text);
    }

    #[test]
    fn different_seeds_differ() {
        let mut scenario = tiny_scenario();
        let a = run_scenario(&scenario).unwrap();
        scenario.seed = 8;
        let b = run_scenario(&scenario).unwrap();
        assert_ne!(a.time_series_csv, b.time_series_csv);
    }

    #[test]
    fn fixed_arrival_model_is_periodic() {
        let mut scenario = tiny_scenario();
        scenario.groups[0].arrival = ArrivalModel::Fixed;
        scenario.groups[0].users = 1;
        let mut sim = Simulation::new(&scenario).unwrap();
        sim.run_to_end();
        // One user, gap exactly 1 s, horizon 100 s: tasks at 1..=100.
        assert_eq!(sim.summary().towns[0].generated, 100);
    }

    #[test]
    fn destroyed_town_fails_no_target() {
        let mut scenario = tiny_scenario();
        scenario.events.push(crate::workload::ScenarioEvent {
            at: 50.0,
            effect: ScenarioEffect::DestroyNode { node: 1 },
        });
        let mut sim = Simulation::new(&scenario).unwrap();
        sim.run_to_end();
        let t = &sim.summary().towns[0];
        assert!(t.failed_no_target > 1000);
        assert_eq!(t.pending_at_end, 0);
        // Every window after the destruction has rate exactly zero.
        for w in sim.metrics().time_series(0) {
            if w.window_start >= 50.0 {
                assert_eq!(w.rate, Some(0.0), "{w:?}");
            }
        }
    }

    #[test]
    fn invalid_scenario_is_refused() {
        let mut scenario = tiny_scenario();
        scenario.groups[0].users = 0;
        scenario.metrics.window = 0.0;
        let errors = match Simulation::new(&scenario) {
            Err(errors) => errors,
            Ok(_) => panic!("invalid scenario accepted"),
        };
        assert_eq!(errors.len(), 2);
    }
}
