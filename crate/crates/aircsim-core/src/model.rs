//! Domain types and the air-layer propagation-delay model.
//!
//! Everything here is a plain value type; the simulation engine owns all
//! mutation. Times are continuous seconds, work is abstract CPU units,
//! distances are meters.

use serde::{Deserialize, Serialize};

/// Simulation time in seconds.
pub type SimTime = f64;

/// Abstract work units.
pub type CpuUnits = f64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("altitude must be positive, got {0}")]
    NonPositiveAltitude(f64),
}

/// A point in the simulated world. `z` is altitude above ground, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPosition {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
}

impl GeoPosition {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    /// 3D Euclidean distance in meters.
    pub fn distance(&self, other: &GeoPosition) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// The three aerial layers and their published operating envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AirLayer {
    /// Low-altitude platform (UAVs), 0-10 km.
    Lap,
    /// High-altitude platform (balloons, aircraft), 10-30 km.
    Hap,
    /// Low Earth orbit satellites, 160-2000 km.
    Leo,
}

impl AirLayer {
    /// Operating altitude range in kilometers.
    pub fn altitude_range_km(self) -> (f64, f64) {
        match self {
            AirLayer::Lap => (0.0, 10.0),
            AirLayer::Hap => (10.0, 30.0),
            AirLayer::Leo => (160.0, 2000.0),
        }
    }

    /// Published one-way propagation-delay range in seconds.
    ///
    /// These are the reference values as published (rounded); the physical
    /// function is [`propagation_delay`].
    pub fn delay_range(self) -> (SimTime, SimTime) {
        match self {
            AirLayer::Lap => (0.0, 30e-6),
            AirLayer::Hap => (30e-6, 100e-6),
            AirLayer::Leo => (0.5e-3, 7e-3),
        }
    }
}

/// Straight-line (vertical) propagation delay to an aerial node at the
/// given altitude: `altitude / c`.
pub fn propagation_delay(altitude_meters: f64) -> Result<SimTime, ModelError> {
    if altitude_meters <= 0.0 || !altitude_meters.is_finite() {
        return Err(ModelError::NonPositiveAltitude(altitude_meters));
    }
    Ok(altitude_meters / SPEED_OF_LIGHT)
}

/// What kind of work a user group generates: task size, deadline, and the
/// mean gap between consecutive tasks of one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApplicationProfile {
    pub task_size: CpuUnits,
    pub tolerable_delay: SimTime,
    pub mean_interarrival: SimTime,
}

impl ApplicationProfile {
    pub fn new(task_size: CpuUnits, tolerable_delay: SimTime, mean_interarrival: SimTime) -> Self {
        Self {
            task_size,
            tolerable_delay,
            mean_interarrival,
        }
    }
}

/// Terminal outcome of a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskFate {
    /// Result returned within the tolerable delay.
    Succeeded,
    /// Result returned, but too late.
    FailedDeadline,
    /// No operational node was reachable at creation time.
    FailedNoTarget,
    /// The node holding the task was destroyed before completion.
    FailedNodeDestroyed,
}

/// One offloadable unit of work. Size and deadline are stamped at creation
/// and never change afterwards, even if the owning group's profile does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub id: u64,
    pub group: u32,
    pub town: u32,
    pub created_at: SimTime,
    pub size: CpuUnits,
    pub tolerable_delay: SimTime,
}
