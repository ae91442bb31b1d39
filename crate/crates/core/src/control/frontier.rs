//! Frontier-based exploration over a shared visit map.

use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::Vec2;
use crate::stigmergy::{BroadcastBus, StigmergyReplica};
use crate::world::CellCoord;

use super::{obstacle_avoidance, ControlGains, MovementCommand, Neighborhood};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Explored,
    Frontier,
    Unexplored,
}

/// Dense explored/blocked bitmap of the arena built from a visit replica.
#[derive(Debug, Clone)]
pub struct ExplorationGrid {
    width: u32,
    height: u32,
    explored: Vec<bool>,
    blocked: Vec<bool>,
}

impl ExplorationGrid {
    pub fn new(
        e_map: &StigmergyReplica,
        width: u32,
        height: u32,
        blocked: &BTreeSet<CellCoord>,
    ) -> Self {
        let n = width as usize * height as usize;
        let mut grid = ExplorationGrid {
            width,
            height,
            explored: vec![false; n],
            blocked: vec![false; n],
        };
        for key in e_map.table().keys() {
            if let Some(i) = grid.index(*key) {
                grid.explored[i] = true;
            }
        }
        for c in blocked {
            if let Some(i) = grid.index(*c) {
                grid.blocked[i] = true;
            }
        }
        grid
    }

    fn index(&self, c: CellCoord) -> Option<usize> {
        let inside = c.x >= 0
            && c.y >= 0
            && (c.x as i64) < self.width as i64
            && (c.y as i64) < self.height as i64;
        inside.then(|| c.y as usize * self.width as usize + c.x as usize)
    }

    /// In the arena, not known to be an obstacle, and never visited.
    fn is_open_unknown(&self, c: CellCoord) -> bool {
        self.index(c)
            .is_some_and(|i| !self.explored[i] && !self.blocked[i])
    }

    pub fn classify(&self, c: CellCoord) -> CellClass {
        match self.index(c) {
            Some(i) if self.explored[i] => {
                if Neighborhood::moore()
                    .cells(c)
                    .any(|n| self.is_open_unknown(n))
                {
                    CellClass::Frontier
                } else {
                    CellClass::Explored
                }
            }
            _ => CellClass::Unexplored,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = CellCoord> + '_ {
        (0..self.height as i32)
            .flat_map(move |y| (0..self.width as i32).map(move |x| CellCoord::new(x, y)))
    }

    pub fn frontier(&self) -> impl Iterator<Item = CellCoord> + '_ {
        self.cells()
            .filter(|c| self.classify(*c) == CellClass::Frontier)
    }
}

/// Labels every cell of the `width x height` extent from the keys present in
/// `e_map`.
pub fn classify_cells(
    e_map: &StigmergyReplica,
    width: u32,
    height: u32,
) -> BTreeMap<CellCoord, CellClass> {
    classify_cells_excluding(e_map, width, height, &BTreeSet::new())
}

/// Like [`classify_cells`], but cells in `blocked` (known obstacles) never
/// make a neighbor a frontier.
pub fn classify_cells_excluding(
    e_map: &StigmergyReplica,
    width: u32,
    height: u32,
    blocked: &BTreeSet<CellCoord>,
) -> BTreeMap<CellCoord, CellClass> {
    let grid = ExplorationGrid::new(e_map, width, height, blocked);
    grid.cells().map(|c| (c, grid.classify(c))).collect()
}

pub struct FbeInputs<'a> {
    pub position: Vec2,
    pub cell: CellCoord,
    pub heading: f64,
    pub visits: &'a mut StigmergyReplica,
    pub visits_bus: &'a mut BroadcastBus,
    pub proximity: &'a [f64; 8],
    pub known_obstacles: &'a BTreeSet<CellCoord>,
    pub width: u32,
    pub height: u32,
    pub cell_size: f64,
}

fn closest(
    from: Vec2,
    cells: impl Iterator<Item = CellCoord>,
    cell_size: f64,
) -> Option<CellCoord> {
    // ties broken by lowest (y, x)
    cells.min_by(|a, b| {
        let da = (a.center(cell_size) - from).norm();
        let db = (b.center(cell_size) - from).norm();
        da.total_cmp(&db).then((a.y, a.x).cmp(&(b.y, b.x)))
    })
}

/// Chooses where an FBE robot heads: the nearest frontier cell, or, once the
/// robot stands on a frontier, the nearest unexplored cell next to it.
pub fn select_goal(
    position: Vec2,
    cell: CellCoord,
    grid: &ExplorationGrid,
    cell_size: f64,
) -> Option<CellCoord> {
    if grid.classify(cell) == CellClass::Frontier {
        let nb = Neighborhood::moore();
        let open = nb.cells(cell).filter(|n| grid.is_open_unknown(*n));
        if let Some(g) = closest(position, open, cell_size) {
            return Some(g);
        }
    }
    closest(position, grid.frontier(), cell_size)
}

/// One FBE tick: 8 neighborhood reads through the stigmergy, then pursuit
/// of the selected goal plus obstacle repulsion.
pub fn fbe_step(input: FbeInputs<'_>, gains: &ControlGains) -> MovementCommand {
    let FbeInputs {
        position,
        cell,
        heading,
        visits,
        visits_bus,
        proximity,
        known_obstacles,
        width,
        height,
        cell_size,
    } = input;
    for n in Neighborhood::moore().cells(cell) {
        visits.vget(n, visits_bus);
    }
    let grid = ExplorationGrid::new(visits, width, height, known_obstacles);
    let Some(goal) = select_goal(position, cell, &grid, cell_size) else {
        return MovementCommand::forward();
    };
    let Some(pursuit) = (goal.center(cell_size) - position).normalized() else {
        return MovementCommand::forward();
    };
    let m = pursuit + obstacle_avoidance(proximity, heading) * gains.gamma;
    MovementCommand::from_vector(m, gains.stagnation_epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn visited(cells: &[(i32, i32)]) -> StigmergyReplica {
        let mut bus = BroadcastBus::new(0.0, 20, 4);
        let mut r = StigmergyReplica::new(0);
        for &(x, y) in cells {
            r.vput(CellCoord::new(x, y), 1.0, &mut bus);
        }
        r
    }

    fn count(m: &BTreeMap<CellCoord, CellClass>, k: CellClass) -> usize {
        m.values().filter(|v| **v == k).count()
    }

    #[test]
    fn classification_examples() {
        let m = classify_cells(&visited(&[]), 5, 5);
        assert_eq!(
            count(&m, CellClass::Explored) + count(&m, CellClass::Frontier),
            0
        );

        let m = classify_cells(&visited(&[(2, 2)]), 5, 5);
        assert_eq!(m[&CellCoord::new(2, 2)], CellClass::Frontier);
        assert_eq!(count(&m, CellClass::Frontier), 1);

        let all: Vec<(i32, i32)> = (0..4).flat_map(|y| (0..4).map(move |x| (x, y))).collect();
        let m = classify_cells(&visited(&all), 4, 4);
        assert_eq!(count(&m, CellClass::Frontier), 0);
        assert_eq!(count(&m, CellClass::Explored), 16);
    }

    #[test]
    fn known_obstacles_do_not_create_frontiers() {
        let all: Vec<(i32, i32)> = (0..3)
            .flat_map(|y| (0..3).map(move |x| (x, y)))
            .filter(|c| *c != (1, 1))
            .collect();
        let r = visited(&all);
        assert_eq!(count(&classify_cells(&r, 3, 3), CellClass::Frontier), 8);
        let blocked: BTreeSet<_> = [CellCoord::new(1, 1)].into_iter().collect();
        assert_eq!(
            count(
                &classify_cells_excluding(&r, 3, 3, &blocked),
                CellClass::Frontier
            ),
            0
        );
    }

    fn step(r: &mut StigmergyReplica, pos: Vec2, w: u32, h: u32) -> MovementCommand {
        let mut bus = BroadcastBus::new(0.0, 20, 4);
        fbe_step(
            FbeInputs {
                position: pos,
                cell: crate::world::discretize(pos, 1.0),
                heading: 0.0,
                visits: r,
                visits_bus: &mut bus,
                proximity: &[0.0; 8],
                known_obstacles: &BTreeSet::new(),
                width: w,
                height: h,
                cell_size: 1.0,
            },
            &ControlGains::default(),
        )
    }

    #[test]
    fn pursues_frontier_due_north() {
        // Fully explored 5x9 strip except the top row: row 7 is the frontier.
        let cells: Vec<(i32, i32)> = (0..8).flat_map(|y| (0..5).map(move |x| (x, y))).collect();
        let mut r = visited(&cells);
        let cmd = step(&mut r, Vec2::new(2.5, 2.5), 5, 9);
        assert!(!cmd.fallback_forward);
        assert!(
            cmd.vector.x.abs() < 1e-12 && (cmd.vector.y - 1.0).abs() < 1e-12,
            "{:?}",
            cmd.vector
        );
        assert_eq!(r.account().reads, 8);
    }

    #[test]
    fn full_coverage_falls_back() {
        let cells: Vec<(i32, i32)> = (0..4).flat_map(|y| (0..4).map(move |x| (x, y))).collect();
        let mut r = visited(&cells);
        assert!(step(&mut r, Vec2::new(1.5, 1.5), 4, 4).fallback_forward);
    }

    #[test]
    fn equidistant_frontiers_break_ties_lexicographically() {
        // Two isolated visited cells at equal distance from the robot.
        let r = visited(&[(1, 3), (3, 1)]);
        let none = BTreeSet::new();
        let pos = Vec2::new(3.5, 3.5);
        let goal = select_goal(
            pos,
            CellCoord::new(3, 3),
            &ExplorationGrid::new(&r, 5, 5, &none),
            1.0,
        );
        assert_eq!(goal, Some(CellCoord::new(3, 1)));
        // identical maps on another replica pick the same goal
        let r2 = visited(&[(3, 1), (1, 3)]);
        let goal2 = select_goal(
            pos,
            CellCoord::new(3, 3),
            &ExplorationGrid::new(&r2, 5, 5, &none),
            1.0,
        );
        assert_eq!(goal, goal2);
    }

    #[test]
    fn on_frontier_heads_into_unexplored_neighbor() {
        let r = visited(&[(0, 0), (1, 0), (0, 1)]);
        let grid = ExplorationGrid::new(&r, 3, 3, &BTreeSet::new());
        let goal = select_goal(Vec2::new(1.5, 0.5), CellCoord::new(1, 0), &grid, 1.0);
        assert_eq!(goal, Some(CellCoord::new(2, 0)));
    }
}
