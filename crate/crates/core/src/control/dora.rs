use crate::geometry::Vec2;
use crate::stigmergy::{BroadcastBus, StigmergyReplica};
use crate::world::CellCoord;

use super::{local_gradient, obstacle_avoidance, ControlGains, MovementCommand, Neighborhood};

/// Everything a DORA robot consults in one tick.
pub struct DoraInputs<'a> {
    pub cell: CellCoord,
    pub heading: f64,
    pub radiation: &'a mut StigmergyReplica,
    pub radiation_bus: &'a mut BroadcastBus,
    pub visits: &'a mut StigmergyReplica,
    pub visits_bus: &'a mut BroadcastBus,
    pub proximity: &'a [f64; 8],
    /// Current tick, starting at 1.
    pub tick: u64,
    /// Scale visit-time differences by `1 / max(tick, 1)`.
    pub normalize_epsilon: bool,
    /// Arena size in cells. Neighbors outside it are still read but count as
    /// equal to the center, so walls neither attract nor repel.
    pub extent: Option<(u32, u32)>,
}

/// Risk-aware gradient step: `m = α∇r + β∇ε + γo`.
///
/// Center values come from the robot's own replica without a stigmergy read;
/// the 8 neighbors of each map go through `vget`, so one call performs
/// exactly 16 reads. Missing entries read as 0 in both maps.
pub fn dora_step(
    input: DoraInputs<'_>,
    gains: &ControlGains,
    neighborhood: &Neighborhood,
) -> MovementCommand {
    let DoraInputs {
        cell,
        heading,
        radiation,
        radiation_bus,
        visits,
        visits_bus,
        proximity,
        tick,
        normalize_epsilon,
        extent,
    } = input;
    let inside = |c: CellCoord| {
        extent.is_none_or(|(w, h)| {
            c.x >= 0 && c.y >= 0 && (c.x as i64) < w as i64 && (c.y as i64) < h as i64
        })
    };

    let r_center = radiation.peek(cell).unwrap_or(0.0);
    let grad_r = local_gradient(
        |c| {
            if c == cell {
                return Some(r_center);
            }
            let v = radiation.vget(c, radiation_bus);
            if inside(c) {
                v
            } else {
                Some(r_center)
            }
        },
        cell,
        neighborhood,
        0.0,
    );
    let e_center = visits.peek(cell).unwrap_or(0.0);
    let mut grad_e = local_gradient(
        |c| {
            if c == cell {
                return Some(e_center);
            }
            let v = visits.vget(c, visits_bus);
            if inside(c) {
                v
            } else {
                Some(e_center)
            }
        },
        cell,
        neighborhood,
        0.0,
    );
    if normalize_epsilon {
        grad_e = grad_e * (1.0 / (tick.max(1) as f64));
    }
    let o: Vec2 = obstacle_avoidance(proximity, heading);
    let m = grad_r * gains.alpha + grad_e * gains.beta + o * gains.gamma;
    MovementCommand::from_vector(m, gains.stagnation_epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Maps {
        r: StigmergyReplica,
        e: StigmergyReplica,
        rb: BroadcastBus,
        eb: BroadcastBus,
    }

    impl Maps {
        fn new() -> Self {
            Maps {
                r: StigmergyReplica::new(0),
                e: StigmergyReplica::new(0),
                rb: BroadcastBus::new(0.0, 20, 4),
                eb: BroadcastBus::new(0.0, 20, 4),
            }
        }

        fn step(
            &mut self,
            cell: CellCoord,
            tick: u64,
            gains: &ControlGains,
            normalize: bool,
        ) -> MovementCommand {
            let prox = [0.0; 8];
            dora_step(
                DoraInputs {
                    cell,
                    heading: 0.0,
                    radiation: &mut self.r,
                    radiation_bus: &mut self.rb,
                    visits: &mut self.e,
                    visits_bus: &mut self.eb,
                    proximity: &prox,
                    tick,
                    normalize_epsilon: normalize,
                    extent: None,
                },
                gains,
                &Neighborhood::moore(),
            )
        }
    }

    #[test]
    fn empty_world_stagnates() {
        let mut m = Maps::new();
        let cmd = m.step(CellCoord::new(3, 3), 1, &ControlGains::default(), true);
        assert!(cmd.fallback_forward);
        let c = m.r.account();
        let d = m.e.account();
        assert_eq!(c.reads + d.reads, 16);
    }

    #[test]
    fn heads_toward_old_and_unvisited_cells() {
        // center visited at t-1, east neighbor at t-100, the rest never.
        // Hand evaluation with raw timestamps (t = 200):
        //   east term: (199 - 100) * (1,0) = (99, 0)
        //   the other 7 terms: 199 * n̂_j; their sum is -199 * (1,0)
        //   total = (99 - 199, 0) = (-100, 0)
        let t = 200;
        let mut m = Maps::new();
        let c = CellCoord::new(5, 5);
        m.e.vput(c, (t - 1) as f64, &mut m.eb.clone());
        m.e.vput(c.offset(1, 0), (t - 100) as f64, &mut m.eb.clone());
        // vput averaged nothing: distinct keys
        let g = ControlGains {
            alpha: 0.0,
            ..ControlGains::default()
        };
        let cmd = m.step(c, t, &g, false);
        assert!(!cmd.fallback_forward);
        assert!(
            (cmd.vector.x + 100.0).abs() < 1e-9 && cmd.vector.y.abs() < 1e-9,
            "{:?}",
            cmd.vector
        );
        // direction points at the unvisited west side, within 45° of it
        let west = Vec2::new(-1.0, 0.0);
        let cos = cmd.vector.dot(west) / cmd.vector.norm();
        assert!(cos >= std::f64::consts::FRAC_1_SQRT_2);

        // normalization rescales but keeps the direction
        let cmd_n = m.step(c, t, &g, true);
        assert!((cmd_n.vector.x * t as f64 - cmd.vector.x).abs() < 1e-9);
    }

    #[test]
    fn rising_radiation_to_the_east_pushes_west() {
        let mut m = Maps::new();
        let c = CellCoord::new(5, 5);
        let mut bus = BroadcastBus::new(0.0, 20, 4);
        for dx in -1..=1 {
            for dy in -1..=1 {
                m.r.vput(c.offset(dx, dy), 0.3 + 0.1 * dx as f64, &mut bus);
                m.e.vput(c.offset(dx, dy), 7.0, &mut bus);
            }
        }
        let cmd = m.step(c, 10, &ControlGains::default(), true);
        assert!(cmd.vector.x < 0.0, "{:?}", cmd.vector);
        assert!(cmd.vector.y.abs() < 1e-12);
    }
}
