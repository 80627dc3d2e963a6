//! Scenario description: towns, user groups, the event timeline, and the
//! canonical disaster case study. A `Scenario` is immutable once validated;
//! the scenario file on disk is the same structure serialized as TOML.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ApplicationProfile, SimTime};

/// A town: a cluster of static users, optionally backed by an edge server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Town {
    pub id: u32,
    pub name: String,
    pub x: f64,
    pub y: f64,
}

/// Terrestrial edge server owned by a town.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeServer {
    pub id: u32,
    pub town: u32,
    /// CPU units per second.
    pub capacity: f64,
    /// One-way WLAN access delay, seconds. Charged on upload and on result
    /// return.
    #[serde(default = "default_edge_access_delay")]
    pub access_delay: f64,
}

fn default_edge_access_delay() -> f64 {
    0.001
}

/// UAV fleet configuration; every UAV is identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetConfig {
    pub count: u32,
    /// CPU units per second per UAV.
    pub capacity: f64,
    #[serde(default = "default_uav_access_delay")]
    pub access_delay: f64,
    /// Horizontal offloading radius, meters.
    #[serde(default = "default_uav_radius")]
    pub radius: f64,
    /// Operating altitude, meters.
    #[serde(default = "default_uav_altitude")]
    pub altitude: f64,
    /// Cruise speed, meters per second.
    #[serde(default = "default_uav_speed")]
    pub speed: f64,
    /// Staging base (ground coordinates); idle UAVs wait here.
    pub base_x: f64,
    pub base_y: f64,
}

fn default_uav_access_delay() -> f64 {
    0.005
}
fn default_uav_radius() -> f64 {
    100.0
}
fn default_uav_altitude() -> f64 {
    200.0
}
fn default_uav_speed() -> f64 {
    60.0
}

/// How a user's task interarrival gaps are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalModel {
    /// Exponential gaps (Poisson process per user).
    #[default]
    Poisson,
    /// Constant gaps equal to the mean.
    Fixed,
}

/// A cohort of identical users in one town.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserGroup {
    pub id: u32,
    pub town: u32,
    pub users: u32,
    #[serde(flatten)]
    pub profile: ApplicationProfile,
    #[serde(default)]
    pub active_from: SimTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_until: Option<SimTime>,
    #[serde(default, skip_serializing_if = "is_default_arrival")]
    pub arrival: ArrivalModel,
}

fn is_default_arrival(a: &ArrivalModel) -> bool {
    *a == ArrivalModel::Poisson
}

/// A timeline mutation applied at an absolute simulation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioEffect {
    DestroyNode {
        node: u32,
    },
    SetProfile {
        group: u32,
        #[serde(flatten)]
        profile: ApplicationProfile,
    },
    AddGroup(UserGroup),
    DeployFleet {
        count: u32,
        base_x: f64,
        base_y: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub at: SimTime,
    pub effect: ScenarioEffect,
}

/// HAP controller configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub enabled: bool,
    #[serde(default = "default_tick_interval")]
    pub tick_interval: SimTime,
    #[serde(default = "default_rho_target")]
    pub rho_target: f64,
    #[serde(default)]
    pub demand_mode: DemandMode,
    /// Age of the queue-state snapshots users act on; 0 means exact
    /// instantaneous knowledge.
    #[serde(default)]
    pub telemetry_staleness: SimTime,
}

fn default_tick_interval() -> SimTime {
    10.0
}
fn default_rho_target() -> f64 {
    1.0
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            tick_interval: default_tick_interval(),
            rho_target: default_rho_target(),
            demand_mode: DemandMode::default(),
            telemetry_staleness: 0.0,
        }
    }
}

/// How the controller estimates per-town offered load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DemandMode {
    /// From the currently active group parameters (exact).
    #[default]
    Oracle,
    /// From work observed arriving since the previous controller tick.
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Tumbling-window width for the success-rate time series, seconds.
    #[serde(default = "default_window")]
    pub window: SimTime,
}

fn default_window() -> SimTime {
    100.0
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            window: default_window(),
        }
    }
}

/// A complete simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub duration: SimTime,
    pub seed: u64,
    pub towns: Vec<Town>,
    #[serde(default)]
    pub edge_servers: Vec<EdgeServer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uav_fleet: Option<FleetConfig>,
    pub groups: Vec<UserGroup>,
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("duplicate town id {0}")]
    DuplicateTownId(u32),
    #[error("duplicate node id {0}")]
    DuplicateNodeId(u32),
    #[error("duplicate group id {0}")]
    DuplicateGroupId(u32),
    #[error("town {0} has more than one edge server")]
    MultipleEdgeServers(u32),
    #[error("edge server {node} references unknown town {town}")]
    EdgeDanglingTown { node: u32, town: u32 },
    #[error("group {group} references unknown town {town}")]
    GroupDanglingTown { group: u32, town: u32 },
    #[error("group {group}: {field} must be positive, got {value}")]
    NonPositiveGroupField {
        group: u32,
        field: &'static str,
        value: f64,
    },
    #[error("group {0} must have at least one user")]
    EmptyGroup(u32),
    #[error("group {0}: active_from must precede active_until")]
    InvalidActiveWindow(u32),
    #[error("edge server {node}: capacity must be positive, got {value}")]
    NonPositiveCapacity { node: u32, value: f64 },
    #[error("edge server {node}: access delay must be non-negative, got {value}")]
    NegativeAccessDelay { node: u32, value: f64 },
    #[error("uav fleet: {field} must be positive, got {value}")]
    InvalidFleetField { field: &'static str, value: f64 },
    #[error("event at t={at} is beyond scenario duration {duration}")]
    EventBeyondDuration { at: f64, duration: f64 },
    #[error("event at t={at} has negative time")]
    NegativeEventTime { at: f64 },
    #[error("event at t={at} destroys unknown node {node}")]
    DestroyDanglingNode { at: f64, node: u32 },
    #[error("node {node} destroyed more than once")]
    DoubleDestroy { node: u32 },
    #[error("event at t={at} sets profile of unknown group {group}")]
    SetProfileDanglingGroup { at: f64, group: u32 },
    #[error("event at t={at}: {field} must be positive, got {value}")]
    NonPositiveEventField {
        at: f64,
        field: &'static str,
        value: f64,
    },
    #[error("deploy_fleet event at t={at} requires a [uav_fleet] section for UAV parameters")]
    DeployWithoutFleetConfig { at: f64 },
    #[error("controller: tick_interval must be positive, got {0}")]
    NonPositiveTickInterval(f64),
    #[error("controller: rho_target must be in (0, 1], got {0}")]
    InvalidRhoTarget(f64),
    #[error("controller: telemetry_staleness must be non-negative, got {0}")]
    NegativeStaleness(f64),
    #[error("metrics: window must be positive, got {0}")]
    NonPositiveWindow(f64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioFileError {
    #[error("cannot read scenario file: {0}")]
    Io(String),
    #[error("cannot parse scenario file: {0}")]
    Parse(String),
}

fn check_profile(
    group: u32,
    profile: &ApplicationProfile,
    mut report: impl FnMut(ValidationError),
) {
    for (field, value) in [
        ("task_size", profile.task_size),
        ("tolerable_delay", profile.tolerable_delay),
        ("mean_interarrival", profile.mean_interarrival),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            report(ValidationError::NonPositiveGroupField {
                group,
                field,
                value,
            });
        }
    }
}

impl Scenario {
    /// Checks every structural invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<(), Vec<ValidationError>> {
        let mut errors = Vec::new();

        if !(self.duration > 0.0) {
            errors.push(ValidationError::NonPositiveDuration(self.duration));
        }

        let mut town_ids = BTreeSet::new();
        for town in &self.towns {
            if !town_ids.insert(town.id) {
                errors.push(ValidationError::DuplicateTownId(town.id));
            }
        }

        let mut node_ids = BTreeSet::new();
        let mut towns_with_edge = BTreeSet::new();
        for edge in &self.edge_servers {
            if !node_ids.insert(edge.id) {
                errors.push(ValidationError::DuplicateNodeId(edge.id));
            }
            if !town_ids.contains(&edge.town) {
                errors.push(ValidationError::EdgeDanglingTown {
                    node: edge.id,
                    town: edge.town,
                });
            } else if !towns_with_edge.insert(edge.town) {
                errors.push(ValidationError::MultipleEdgeServers(edge.town));
            }
            if !(edge.capacity > 0.0) {
                errors.push(ValidationError::NonPositiveCapacity {
                    node: edge.id,
                    value: edge.capacity,
                });
            }
            if edge.access_delay < 0.0 {
                errors.push(ValidationError::NegativeAccessDelay {
                    node: edge.id,
                    value: edge.access_delay,
                });
            }
        }

        if let Some(fleet) = &self.uav_fleet {
            for (field, value, strict) in [
                ("capacity", fleet.capacity, true),
                ("radius", fleet.radius, true),
                ("speed", fleet.speed, true),
                ("altitude", fleet.altitude, false),
                ("access_delay", fleet.access_delay, false),
            ] {
                let ok = if strict { value > 0.0 } else { value >= 0.0 };
                if !ok || !value.is_finite() {
                    errors.push(ValidationError::InvalidFleetField { field, value });
                }
            }
        }

        let mut group_ids = BTreeSet::new();
        let check_group = |group: &UserGroup, errors: &mut Vec<ValidationError>| {
            if !town_ids.contains(&group.town) {
                errors.push(ValidationError::GroupDanglingTown {
                    group: group.id,
                    town: group.town,
                });
            }
            if group.users == 0 {
                errors.push(ValidationError::EmptyGroup(group.id));
            }
            check_profile(group.id, &group.profile, |e| errors.push(e));
            if let Some(until) = group.active_until {
                if group.active_from >= until {
                    errors.push(ValidationError::InvalidActiveWindow(group.id));
                }
            }
        };
        for group in &self.groups {
            if !group_ids.insert(group.id) {
                errors.push(ValidationError::DuplicateGroupId(group.id));
            }
            check_group(group, &mut errors);
        }

        // Timeline-added groups join the id space; profile updates may
        // target them as well.
        let mut all_group_ids = group_ids.clone();
        for event in &self.events {
            if let ScenarioEffect::AddGroup(group) = &event.effect {
                if !all_group_ids.insert(group.id) {
                    errors.push(ValidationError::DuplicateGroupId(group.id));
                }
            }
        }

        let mut destroyed = BTreeSet::new();
        for event in &self.events {
            if event.at < 0.0 {
                errors.push(ValidationError::NegativeEventTime { at: event.at });
            }
            if event.at > self.duration {
                errors.push(ValidationError::EventBeyondDuration {
                    at: event.at,
                    duration: self.duration,
                });
            }
            match &event.effect {
                ScenarioEffect::DestroyNode { node } => {
                    if !node_ids.contains(node) {
                        errors.push(ValidationError::DestroyDanglingNode {
                            at: event.at,
                            node: *node,
                        });
                    }
                    if !destroyed.insert(*node) {
                        errors.push(ValidationError::DoubleDestroy { node: *node });
                    }
                }
                ScenarioEffect::SetProfile { group, profile } => {
                    if !all_group_ids.contains(group) {
                        errors.push(ValidationError::SetProfileDanglingGroup {
                            at: event.at,
                            group: *group,
                        });
                    }
                    let at = event.at;
                    for (field, value) in [
                        ("task_size", profile.task_size),
                        ("tolerable_delay", profile.tolerable_delay),
                        ("mean_interarrival", profile.mean_interarrival),
                    ] {
                        if !(value > 0.0) || !value.is_finite() {
                            errors.push(ValidationError::NonPositiveEventField {
                                at,
                                field,
                                value,
                            });
                        }
                    }
                }
                ScenarioEffect::AddGroup(group) => check_group(group, &mut errors),
                ScenarioEffect::DeployFleet { count, .. } => {
                    if self.uav_fleet.is_none() && *count > 0 {
                        errors.push(ValidationError::DeployWithoutFleetConfig { at: event.at });
                    }
                }
            }
        }

        if !(self.controller.tick_interval > 0.0) {
            errors.push(ValidationError::NonPositiveTickInterval(
                self.controller.tick_interval,
            ));
        }
        if !(self.controller.rho_target > 0.0 && self.controller.rho_target <= 1.0) {
            errors.push(ValidationError::InvalidRhoTarget(self.controller.rho_target));
        }
        if self.controller.telemetry_staleness < 0.0 {
            errors.push(ValidationError::NegativeStaleness(
                self.controller.telemetry_staleness,
            ));
        }
        if !(self.metrics.window > 0.0) {
            errors.push(ValidationError::NonPositiveWindow(self.metrics.window));
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioFileError> {
        toml::from_str(text).map_err(|e| ScenarioFileError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioFileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioFileError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Groups active at `t`, including timeline additions, as (town id, users,
    /// current profile). Used by oracle demand estimation and tests.
    pub fn town_ids(&self) -> Vec<u32> {
        self.towns.iter().map(|t| t.id).collect()
    }
}

/// Users per town in the canonical disaster scenario, doubled at t=2000.
///
/// The value is calibration, not ground truth: it is picked so that the
/// post-quake per-town load sits just under the edge capacity (stable),
/// the post-doubling load in Towns 1-2 is far above it (collapse), and
/// Town-3's post-doubling overload is slight, giving the gradual decline
/// the baseline exhibits there. It also keeps every town's capacity
/// deficit positive once users double, so the fleet plan is {4, 2, 1}.
pub const DISASTER_USERS_PER_TOWN: u32 = 984;

/// Simulation length of the disaster case study, seconds.
pub const DISASTER_DURATION: SimTime = 4000.0;

/// The canonical earthquake case study: three towns hit at t=1000, demand
/// tripling then doubling of users at t=2000. With `uav_assisted` an
/// 8-UAV fleet and the HAP controller are enabled.
pub fn build_disaster_scenario(uav_assisted: bool) -> Scenario {
    let towns = vec![
        Town {
            id: 1,
            name: "town-1".into(),
            x: 0.0,
            y: 0.0,
        },
        Town {
            id: 2,
            name: "town-2".into(),
            x: 2000.0,
            y: 0.0,
        },
        Town {
            id: 3,
            name: "town-3".into(),
            x: 4000.0,
            y: 0.0,
        },
    ];

    let edge_servers = (1..=3)
        .map(|i| EdgeServer {
            id: i,
            town: i,
            capacity: 100_000.0,
            access_delay: 0.001,
        })
        .collect();

    let users = DISASTER_USERS_PER_TOWN;
    let baseline_profile = |town: u32| ApplicationProfile {
        task_size: 90.0,
        // Town-3's users tolerate more delay.
        tolerable_delay: if town == 3 { 2.0 } else { 1.0 },
        mean_interarrival: 3.33,
    };
    let groups = (1..=3)
        .map(|i| UserGroup {
            id: i,
            town: i,
            users,
            profile: baseline_profile(i),
            active_from: 0.0,
            active_until: None,
            arrival: ArrivalModel::Poisson,
        })
        .collect();

    let mut events = vec![ScenarioEvent {
        at: 1000.0,
        effect: ScenarioEffect::DestroyNode { node: 1 },
    }];
    // Panic triples application usage: mean interarrival drops to 1 s.
    for i in 1..=3 {
        let mut profile = baseline_profile(i);
        profile.mean_interarrival = 1.0;
        events.push(ScenarioEvent {
            at: 1000.0,
            effect: ScenarioEffect::SetProfile { group: i, profile },
        });
    }
    // Rescue operations double the user count; aftershock monitoring in
    // Town-3 brings lighter, more tolerant tasks.
    for i in 1..=3 {
        let profile = if i == 3 {
            ApplicationProfile::new(12.0, 5.0, 1.0)
        } else {
            ApplicationProfile::new(90.0, 1.0, 1.0)
        };
        events.push(ScenarioEvent {
            at: 2000.0,
            effect: ScenarioEffect::AddGroup(UserGroup {
                id: 3 + i,
                town: i,
                users,
                profile,
                active_from: 2000.0,
                active_until: None,
                arrival: ArrivalModel::Poisson,
            }),
        });
    }

    Scenario {
        duration: DISASTER_DURATION,
        seed: 42,
        towns,
        edge_servers,
        uav_fleet: uav_assisted.then(|| FleetConfig {
            count: 8,
            capacity: 50_000.0,
            access_delay: 0.005,
            radius: 100.0,
            altitude: 200.0,
            speed: default_uav_speed(),
            base_x: 2000.0,
            base_y: 0.0,
        }),
        groups,
        events,
        controller: ControllerConfig {
            enabled: uav_assisted,
            ..ControllerConfig::default()
        },
        metrics: MetricsConfig::default(),
    }
}

/// Sorted (group id -> group) view including timeline additions up to `t`.
pub fn groups_as_of(scenario: &Scenario, t: SimTime) -> BTreeMap<u32, UserGroup> {
    let mut map: BTreeMap<u32, UserGroup> = scenario
        .groups
        .iter()
        .map(|g| (g.id, g.clone()))
        .collect();
    for event in &scenario.events {
        if event.at > t {
            continue;
        }
        match &event.effect {
            ScenarioEffect::AddGroup(g) => {
                map.insert(g.id, g.clone());
            }
            ScenarioEffect::SetProfile { group, profile } => {
                if let Some(g) = map.get_mut(group) {
                    g.profile = *profile;
                }
            }
            _ => {}
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disaster_scenario_is_valid() {
        build_disaster_scenario(false).validate().unwrap();
        build_disaster_scenario(true).validate().unwrap();
    }

    #[test]
    fn disaster_scenario_baseline_parameters() {
        let s = build_disaster_scenario(false);
        assert_eq!(s.duration, 4000.0);
        let town2 = s.groups.iter().find(|g| g.town == 2).unwrap();
        assert_eq!(
            town2.profile,
            ApplicationProfile::new(90.0, 1.0, 3.33)
        );
        let town3 = s.groups.iter().find(|g| g.town == 3).unwrap();
        assert_eq!(town3.profile.tolerable_delay, 2.0);
        assert!(s.uav_fleet.is_none());
        assert!(!s.controller.enabled);
    }

    #[test]
    fn disaster_scenario_uav_parameters() {
        let s = build_disaster_scenario(true);
        let fleet = s.uav_fleet.as_ref().unwrap();
        assert_eq!(fleet.count, 8);
        assert_eq!(fleet.capacity, 50_000.0);
        assert_eq!(fleet.radius, 100.0);
        assert_eq!(fleet.altitude, 200.0);
        assert!(s.controller.enabled);
        // Aftershock group in Town-3: 12 units, 5 s tolerable.
        let aftershock = s
            .events
            .iter()
            .find_map(|e| match &e.effect {
                ScenarioEffect::AddGroup(g) if g.town == 3 => Some(g),
                _ => None,
            })
            .unwrap();
        assert_eq!(aftershock.profile, ApplicationProfile::new(12.0, 5.0, 1.0));
        assert_eq!(aftershock.active_from, 2000.0);
    }

    #[test]
    fn event_beyond_duration_rejected() {
        let mut s = build_disaster_scenario(false);
        s.events.push(ScenarioEvent {
            at: 5000.0,
            effect: ScenarioEffect::DestroyNode { node: 2 },
        });
        let errors = s.validate().unwrap_err();
        assert!(errors
            .iter()
            .any(|e| matches!(e, ValidationError::EventBeyondDuration { at, .. } if *at == 5000.0)));
    }

    #[test]
    fn dangling_town_reference_rejected() {
        let mut s = build_disaster_scenario(false);
        s.groups[0].town = 99;
        let errors = s.validate().unwrap_err();
        assert!(errors
            .iter()
            .any(|e| matches!(e, ValidationError::GroupDanglingTown { town: 99, .. })));
    }

    #[test]
    fn all_errors_reported_at_once() {
        let mut s = build_disaster_scenario(false);
        s.groups[0].town = 99;
        s.groups[1].profile.task_size = -1.0;
        s.events.push(ScenarioEvent {
            at: 500.0,
            effect: ScenarioEffect::DestroyNode { node: 1 },
        });
        let errors = s.validate().unwrap_err();
        assert!(errors.len() >= 3, "expected all errors, got {errors:?}");
        assert!(errors
            .iter()
            .any(|e| matches!(e, ValidationError::DoubleDestroy { node: 1 })));
    }

    #[test]
    fn scenario_roundtrips_through_toml() {
        for uav in [false, true] {
            let s = build_disaster_scenario(uav);
            let text = s.to_toml_string();
            let back = Scenario::from_toml_str(&text).unwrap();
            assert_eq!(s, back);
        }
    }

    #[test]
    fn groups_as_of_applies_timeline() {
        let s = build_disaster_scenario(false);
        assert_eq!(groups_as_of(&s, 0.0).len(), 3);
        let at_1500 = groups_as_of(&s, 1500.0);
        assert_eq!(at_1500[&1].profile.mean_interarrival, 1.0);
        let at_2500 = groups_as_of(&s, 2500.0);
        assert_eq!(at_2500.len(), 6);
    }
}
