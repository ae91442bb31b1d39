use std::f64::consts::TAU;

use crate::geometry::Vec2;
use crate::rng::{self, RandomStream};

use super::{obstacle_avoidance, ControlGains, MovementCommand};

/// Correlated random walk: keep the heading, except with probability
/// `p_turn` pick a fresh uniform one. Always consumes one draw, plus one
/// more when turning.
pub fn random_walk_step(
    heading: f64,
    proximity: &[f64; 8],
    gains: &ControlGains,
    p_turn: f64,
    rng: &mut RandomStream,
) -> MovementCommand {
    let heading = if rng::unit(rng) < p_turn {
        rng::unit(rng) * TAU
    } else {
        heading
    };
    let m: Vec2 = Vec2::from_angle(heading) + obstacle_avoidance(proximity, heading) * gains.gamma;
    MovementCommand::from_vector(m, gains.stagnation_epsilon)
}
