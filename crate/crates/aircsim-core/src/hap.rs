//! HAP fleet planning: per-town demand estimates and the greedy UAV
//! assignment that relieves the largest capacity deficits first.
//!
//! Planning is pure: the simulation feeds it estimates and the current
//! fleet disposition, and executes the resulting movement commands.

use std::collections::BTreeMap;

use crate::model::SimTime;

/// Capacity situation of one town at estimation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandEstimate {
    pub town: u32,
    /// Aggregate work arrival rate, CPU units/s.
    pub offered_load: f64,
    /// Operational edge capacity in the town, CPU units/s.
    pub surviving_capacity: f64,
    /// Capacity still missing to serve the load at the target utilization.
    pub deficit: f64,
    pub estimated_at: SimTime,
}

impl DemandEstimate {
    pub fn new(
        town: u32,
        offered_load: f64,
        surviving_capacity: f64,
        rho_target: f64,
        estimated_at: SimTime,
    ) -> Self {
        debug_assert!(rho_target > 0.0 && rho_target <= 1.0);
        let deficit = (offered_load / rho_target - surviving_capacity).max(0.0);
        Self {
            town,
            offered_load,
            surviving_capacity,
            deficit,
            estimated_at,
        }
    }

    /// UAVs needed to cover the deficit.
    pub fn required_uavs(&self, uav_capacity: f64) -> u32 {
        debug_assert!(uav_capacity > 0.0);
        (self.deficit / uav_capacity).ceil() as u32
    }
}

/// One fleet member as seen by the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetUav {
    pub id: u32,
    pub capacity: f64,
    /// Town the UAV currently serves or is flying toward; `None` = base.
    pub current_town: Option<u32>,
}

/// Where every UAV should be. Each UAV appears exactly once.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FleetAssignment {
    pub by_town: BTreeMap<u32, Vec<u32>>,
    pub unassigned: Vec<u32>,
}

impl FleetAssignment {
    pub fn assigned_town(&self, uav_id: u32) -> Option<u32> {
        self.by_town
            .iter()
            .find(|(_, ids)| ids.contains(&uav_id))
            .map(|(town, _)| *town)
    }

    pub fn count_for(&self, town: u32) -> usize {
        self.by_town.get(&town).map_or(0, Vec::len)
    }
}

/// Greedy assignment in descending deficit order, capped by fleet size.
///
/// UAVs already serving (or flying toward) a town are kept there as long
/// as the town still needs them, so repeated planning under constant
/// demand issues no movement.
pub fn plan_assignment(estimates: &[DemandEstimate], fleet: &[FleetUav]) -> FleetAssignment {
    let mut assignment = FleetAssignment::default();
    if fleet.is_empty() {
        return assignment;
    }
    let uav_capacity = fleet[0].capacity;

    let mut order: Vec<&DemandEstimate> = estimates.iter().filter(|e| e.deficit > 0.0).collect();
    order.sort_by(|a, b| b.deficit.total_cmp(&a.deficit).then(a.town.cmp(&b.town)));

    let mut claimed = vec![false; fleet.len()];
    let mut remaining = fleet.len();
    for estimate in order {
        if remaining == 0 {
            break;
        }
        let need = (estimate.required_uavs(uav_capacity) as usize).min(remaining);
        let mut ids = Vec::with_capacity(need);
        // Retain incumbents first (lowest id), then pull from the base
        // pool, then strip towns holding surplus.
        for pass in 0..3 {
            for (ix, uav) in fleet.iter().enumerate() {
                if ids.len() == need {
                    break;
                }
                if claimed[ix] {
                    continue;
                }
                let eligible = match pass {
                    0 => uav.current_town == Some(estimate.town),
                    1 => uav.current_town.is_none(),
                    _ => true,
                };
                if eligible {
                    claimed[ix] = true;
                    ids.push(uav.id);
                }
            }
        }
        remaining -= ids.len();
        ids.sort_unstable();
        assignment.by_town.insert(estimate.town, ids);
    }

    assignment.unassigned = fleet
        .iter()
        .enumerate()
        .filter(|(ix, _)| !claimed[*ix])
        .map(|(_, uav)| uav.id)
        .collect();
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fleet(n: u32) -> Vec<FleetUav> {
        (0..n)
            .map(|i| FleetUav {
                id: 100 + i,
                capacity: 50_000.0,
                current_town: None,
            })
            .collect()
    }

    fn est(town: u32, offered: f64, surviving: f64) -> DemandEstimate {
        DemandEstimate::new(town, offered, surviving, 1.0, 0.0)
    }

    #[test]
    fn deficit_arithmetic() {
        // Post-doubling situation with 1000 users/town.
        let t1 = est(1, 180_000.0, 0.0);
        assert_eq!(t1.deficit, 180_000.0);
        let t2 = est(2, 180_000.0, 100_000.0);
        assert_eq!(t2.deficit, 80_000.0);
        let t3 = est(3, 102_000.0, 100_000.0);
        assert_eq!(t3.deficit, 2_000.0);
        assert_eq!(t1.required_uavs(50_000.0), 4);
        assert_eq!(t2.required_uavs(50_000.0), 2);
        assert_eq!(t3.required_uavs(50_000.0), 1);
    }

    #[test]
    fn rho_target_inflates_demand() {
        let e = DemandEstimate::new(1, 90_000.0, 100_000.0, 0.5, 0.0);
        assert_eq!(e.deficit, 80_000.0);
    }

    #[test]
    fn disaster_split_four_two_one() {
        let estimates = vec![
            est(1, 180_000.0, 0.0),
            est(2, 180_000.0, 100_000.0),
            est(3, 102_000.0, 100_000.0),
        ];
        let plan = plan_assignment(&estimates, &fleet(8));
        assert_eq!(plan.count_for(1), 4);
        assert_eq!(plan.count_for(2), 2);
        assert_eq!(plan.count_for(3), 1);
        assert_eq!(plan.unassigned.len(), 1);
    }

    #[test]
    fn zero_deficits_leave_fleet_unassigned() {
        let estimates = vec![est(1, 50_000.0, 100_000.0), est(2, 0.0, 100_000.0)];
        let plan = plan_assignment(&estimates, &fleet(8));
        assert!(plan.by_town.is_empty());
        assert_eq!(plan.unassigned.len(), 8);
    }

    #[test]
    fn saturation_caps_at_fleet_size() {
        let estimates = vec![est(1, 500_000.0, 0.0)];
        let plan = plan_assignment(&estimates, &fleet(8));
        assert_eq!(plan.count_for(1), 8);
        assert!(plan.unassigned.is_empty());
    }

    #[test]
    fn replanning_constant_demand_is_stable() {
        let estimates = vec![est(1, 180_000.0, 0.0), est(2, 180_000.0, 100_000.0)];
        let mut members = fleet(8);
        let first = plan_assignment(&estimates, &members);
        for uav in members.iter_mut() {
            uav.current_town = first.assigned_town(uav.id);
        }
        for _ in 0..3 {
            let next = plan_assignment(&estimates, &members);
            assert_eq!(first, next);
        }
    }

    #[test]
    fn shrinking_need_releases_incumbents_only() {
        let mut members = fleet(4);
        // All four serving town 1.
        for uav in members.iter_mut() {
            uav.current_town = Some(1);
        }
        let estimates = vec![est(1, 100_000.0, 0.0), est(2, 60_000.0, 0.0)];
        let plan = plan_assignment(&estimates, &members);
        assert_eq!(plan.count_for(1), 2);
        assert_eq!(plan.count_for(2), 2);
        // Town 1 kept its lowest-id incumbents.
        assert_eq!(plan.by_town[&1], vec![100, 101]);
    }

    #[test]
    fn every_uav_appears_exactly_once() {
        let estimates = vec![
            est(1, 180_000.0, 0.0),
            est(2, 180_000.0, 100_000.0),
            est(3, 102_000.0, 100_000.0),
        ];
        let plan = plan_assignment(&estimates, &fleet(8));
        let mut all: Vec<u32> = plan.by_town.values().flatten().copied().collect();
        all.extend(&plan.unassigned);
        all.sort_unstable();
        let expected: Vec<u32> = (100..108).collect();
        assert_eq!(all, expected);
    }

    #[test]
    fn no_idle_uav_while_unmet_need_remains() {
        for n in 1..=10u32 {
            let estimates = vec![est(1, 400_000.0, 0.0), est(2, 120_000.0, 0.0)];
            let plan = plan_assignment(&estimates, &fleet(n));
            let total_need = 8 + 3;
            let assigned: usize = plan.by_town.values().map(Vec::len).sum();
            if assigned < total_need {
                assert!(plan.unassigned.is_empty(), "n={n}: {plan:?}");
            }
        }
    }
}
