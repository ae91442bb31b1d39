//! Per-robot controllers and the shared movement primitives.

mod dora;
mod frontier;
mod random_walk;

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

pub use dora::{dora_step, DoraInputs};
pub use frontier::{
    classify_cells, classify_cells_excluding, fbe_step, select_goal, CellClass, ExplorationGrid,
    FbeInputs,
};
pub use random_walk::random_walk_step;

use crate::geometry::Vec2;
use crate::world::CellCoord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum ControllerKind {
    #[default]
    Dora,
    Fbe,
    RandomWalk,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::Dora,
        ControllerKind::Fbe,
        ControllerKind::RandomWalk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Dora => "dora",
            ControllerKind::Fbe => "fbe",
            ControllerKind::RandomWalk => "random",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dora" => Ok(ControllerKind::Dora),
            "fbe" => Ok(ControllerKind::Fbe),
            "random" => Ok(ControllerKind::RandomWalk),
            other => Err(format!("expected dora, fbe or random, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGains {
    /// Risk avoidance.
    pub alpha: f64,
    /// Exploration.
    pub beta: f64,
    /// Obstacle avoidance.
    pub gamma: f64,
    /// Distance travelled per tick, meters.
    pub k: f64,
    /// Below this movement-vector norm the robot just drives forward.
    pub stagnation_epsilon: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains {
            alpha: 2.0,
            beta: 1.0,
            gamma: 1.0,
            k: 0.2,
            stagnation_epsilon: 1e-3,
        }
    }
}

/// The 8-cell Moore neighborhood, starting top-left and going clockwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    offsets: [(i32, i32); 8],
}

impl Default for Neighborhood {
    fn default() -> Self {
        Neighborhood::moore()
    }
}

impl Neighborhood {
    pub fn moore() -> Self {
        Neighborhood {
            offsets: [
                (-1, 1),
                (0, 1),
                (1, 1),
                (1, 0),
                (1, -1),
                (0, -1),
                (-1, -1),
                (-1, 0),
            ],
        }
    }

    pub fn offsets(&self) -> &[(i32, i32); 8] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cells(&self, center: CellCoord) -> impl Iterator<Item = CellCoord> + '_ {
        self.offsets
            .iter()
            .map(move |&(dx, dy)| center.offset(dx, dy))
    }
}

fn unit_offset(dx: i32, dy: i32) -> Vec2 {
    let v = Vec2::new(f64::from(dx), f64::from(dy));
    v * (1.0 / v.norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementCommand {
    pub vector: Vec2,
    /// Drive straight along the current heading instead of `vector`.
    pub fallback_forward: bool,
}

impl MovementCommand {
    /// Wraps a movement vector, falling back when it is too short to steer by.
    pub fn from_vector(vector: Vec2, stagnation_epsilon: f64) -> Self {
        let fallback_forward = !vector.is_finite() || vector.norm() < stagnation_epsilon;
        MovementCommand {
            vector,
            fallback_forward,
        }
    }

    pub fn forward() -> Self {
        MovementCommand {
            vector: Vec2::ZERO,
            fallback_forward: true,
        }
    }
}

/// Discrete gradient over the neighborhood: `Σ_j (v(c) - v(c+n_j)) n̂_j`.
/// `values` is queried for the center first, then each neighbor in order;
/// missing values read as `missing_default`.
pub fn local_gradient(
    mut values: impl FnMut(CellCoord) -> Option<f64>,
    center: CellCoord,
    neighborhood: &Neighborhood,
    missing_default: f64,
) -> Vec2 {
    let vc = values(center).unwrap_or(missing_default);
    let mut g = Vec2::ZERO;
    for &(dx, dy) in neighborhood.offsets() {
        let vn = values(center.offset(dx, dy)).unwrap_or(missing_default);
        g += unit_offset(dx, dy) * (vc - vn);
    }
    g
}

/// Body-frame bearings of the 8 proximity sensors.
pub fn sensor_angles() -> [f64; 8] {
    std::array::from_fn(|s| s as f64 * FRAC_PI_4)
}

/// Repulsion from proximity readings (1 = touching, 0 = nothing in range),
/// rotated into the world frame.
pub fn obstacle_avoidance(proximity: &[f64; 8], heading: f64) -> Vec2 {
    let mut o = Vec2::ZERO;
    for (reading, theta) in proximity.iter().zip(sensor_angles()) {
        if *reading > 0.0 {
            o += Vec2::from_angle(theta + heading) * -reading;
        }
    }
    o
}

/// Advances `k` along the normalized command (or along `heading` when
/// falling back). Returns the new position and heading.
pub fn apply_control(
    position: Vec2,
    command: &MovementCommand,
    gains: &ControlGains,
    heading: f64,
) -> (Vec2, f64) {
    match command
        .vector
        .normalized()
        .filter(|_| !command.fallback_forward)
    {
        Some(dir) => (position + dir * gains.k, dir.angle()),
        None => (position + Vec2::from_angle(heading) * gains.k, heading),
    }
}
