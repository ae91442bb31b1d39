use crate::control::sensor_angles;
use crate::geometry::Vec2;
use crate::world::{discretize, GridWorld};

/// Steps used to march each proximity ray.
const RAY_STEPS: usize = 16;

/// Whether a point robot may stand at `p`.
pub fn is_free(world: &GridWorld, p: Vec2) -> bool {
    let ext = world.extent();
    p.x >= 0.0
        && p.y >= 0.0
        && p.x < ext.x
        && p.y < ext.y
        && world.is_traversable(discretize(p, world.cell_size))
}

/// Readings of the 8 proximity sensors: `1 - d/range` for the first wall or
/// obstacle hit at distance `d` along each ray, 0 when nothing is in range.
pub fn sense_proximity(world: &GridWorld, position: Vec2, heading: f64, range: f64) -> [f64; 8] {
    let mut out = [0.0; 8];
    if range <= 0.0 {
        return out;
    }
    for (reading, theta) in out.iter_mut().zip(sensor_angles()) {
        let dir = Vec2::from_angle(heading + theta);
        for step in 1..=RAY_STEPS {
            let d = range * step as f64 / RAY_STEPS as f64;
            if !is_free(world, position + dir * d) {
                *reading = 1.0 - d / range;
                break;
            }
        }
    }
    out
}

/// Moves from `from` toward `to`, cancelling each displacement component
/// that would leave the arena or enter an obstacle cell. A cancelled
/// component mirrors the heading on that axis. Returns the reached position,
/// the new heading and whether anything was blocked.
pub fn resolve_motion(world: &GridWorld, from: Vec2, to: Vec2, heading: f64) -> (Vec2, f64, bool) {
    let mut p = from;
    let mut h = heading;
    let mut blocked = false;
    if to.x != from.x {
        if is_free(world, Vec2::new(to.x, from.y)) {
            p.x = to.x;
        } else {
            h = std::f64::consts::PI - h;
            blocked = true;
        }
    }
    if to.y != from.y {
        if is_free(world, Vec2::new(p.x, to.y)) {
            p.y = to.y;
        } else {
            h = -h;
            blocked = true;
        }
    }
    (p, h.sin().atan2(h.cos()), blocked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::CellCoord;
    use std::collections::BTreeSet;

    fn world_with(obstacles: &[(i32, i32)]) -> GridWorld {
        let obs: BTreeSet<_> = obstacles
            .iter()
            .map(|&(x, y)| CellCoord::new(x, y))
            .collect();
        GridWorld::new(5, 5, 1.0, 5.0, vec![], obs, 0.0).unwrap()
    }

    #[test]
    fn open_space_reads_nothing() {
        let w = world_with(&[]);
        assert_eq!(sense_proximity(&w, Vec2::new(2.5, 2.5), 0.0, 0.8), [0.0; 8]);
    }

    #[test]
    fn wall_ahead_triggers_front_sensor() {
        let w = world_with(&[]);
        let r = sense_proximity(&w, Vec2::new(4.6, 2.5), 0.0, 0.8);
        assert!(r[0] > 0.0 && r[4] == 0.0);
        // facing north the same wall is on the right-hand side (sensor 6)
        let r = sense_proximity(&w, Vec2::new(4.6, 2.5), std::f64::consts::FRAC_PI_2, 0.8);
        assert!(r[6] > 0.0 && r[0] == 0.0);
    }

    #[test]
    fn obstacle_blocks_and_slides() {
        let w = world_with(&[(3, 2)]);
        let (p, h, blocked) = resolve_motion(&w, Vec2::new(2.9, 2.5), Vec2::new(3.1, 2.7), 0.0);
        assert!(blocked);
        assert_eq!(p, Vec2::new(2.9, 2.7));
        assert!((h - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn walls_contain_the_robot() {
        let w = world_with(&[]);
        let (p, _, blocked) = resolve_motion(&w, Vec2::new(0.1, 4.9), Vec2::new(-0.1, 5.1), 2.0);
        assert!(blocked);
        assert_eq!(p, Vec2::new(0.1, 4.9));
    }
}
