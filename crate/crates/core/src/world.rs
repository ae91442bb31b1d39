//! The discretized arena: grid extents, obstacles and point radiation
//! sources, plus the ground-truth radiation field robots sample.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::rng::{self, RandomStream};

/// Attempts per obstacle or source before giving up on placement.
const PLACEMENT_RETRIES: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellCoord {
    pub x: i32,
    pub y: i32,
}

impl CellCoord {
    pub const fn new(x: i32, y: i32) -> Self {
        CellCoord { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        CellCoord::new(self.x + dx, self.y + dy)
    }

    /// Euclidean distance in cell units.
    pub fn distance(self, other: CellCoord) -> f64 {
        f64::from(self.x - other.x).hypot(f64::from(self.y - other.y))
    }

    /// Center of the cell in meters.
    pub fn center(self, cell_size: f64) -> Vec2 {
        Vec2::new(
            (f64::from(self.x) + 0.5) * cell_size,
            (f64::from(self.y) + 0.5) * cell_size,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiationSource {
    pub position: CellCoord,
    /// Emitted intensity in `[0, 1]`.
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    pub width: u32,
    pub height: u32,
    /// Meters per cell side.
    pub cell_size: f64,
    /// Decay constant of the inverse-square-like falloff.
    pub decay: f64,
    pub sources: Vec<RadiationSource>,
    pub obstacles: BTreeSet<CellCoord>,
    /// Standard deviation of the Gaussian background term.
    pub background_sigma: f64,
}

/// Radiation a single source contributes at `cell`: `I / (1 + λρ²)` with ρ
/// measured in cells.
pub fn radiation_from_source(source: &RadiationSource, cell: CellCoord, lambda: f64) -> f64 {
    let rho = source.position.distance(cell);
    source.intensity / (1.0 + lambda * rho * rho)
}

/// Floor-divides a metric position into the cell containing it.
pub fn discretize(position: Vec2, cell_size: f64) -> CellCoord {
    CellCoord::new(
        (position.x / cell_size).floor() as i32,
        (position.y / cell_size).floor() as i32,
    )
}

impl GridWorld {
    pub fn new(
        width: u32,
        height: u32,
        cell_size: f64,
        decay: f64,
        sources: Vec<RadiationSource>,
        obstacles: BTreeSet<CellCoord>,
        background_sigma: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "grid must be at least 1x1, got {width}x{height}"
            )));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::invalid("cell_size", "must be positive"));
        }
        if decay.is_nan() || decay < 0.0 {
            return Err(Error::invalid("lambda", "must be non-negative"));
        }
        if background_sigma.is_nan() || background_sigma < 0.0 {
            return Err(Error::invalid("sigma", "must be non-negative"));
        }
        let world = GridWorld {
            width,
            height,
            cell_size,
            decay,
            sources,
            obstacles,
            background_sigma,
        };
        for s in &world.sources {
            if !world.in_bounds(s.position) {
                return Err(Error::Config(format!(
                    "source {:?} outside the grid",
                    s.position
                )));
            }
            if !(0.0..=1.0).contains(&s.intensity) {
                return Err(Error::Config(format!(
                    "source intensity {} outside [0,1]",
                    s.intensity
                )));
            }
            if world.obstacles.contains(&s.position) {
                return Err(Error::Config(format!(
                    "source {:?} placed on an obstacle",
                    s.position
                )));
            }
        }
        if let Some(o) = world.obstacles.iter().find(|o| !world.in_bounds(**o)) {
            return Err(Error::Config(format!("obstacle {o:?} outside the grid")));
        }
        Ok(world)
    }

    pub fn in_bounds(&self, cell: CellCoord) -> bool {
        cell.x >= 0
            && cell.y >= 0
            && (cell.x as i64) < self.width as i64
            && (cell.y as i64) < self.height as i64
    }

    pub fn is_traversable(&self, cell: CellCoord) -> bool {
        self.in_bounds(cell) && !self.obstacles.contains(&cell)
    }

    /// Arena extent in meters.
    pub fn extent(&self) -> Vec2 {
        Vec2::new(
            f64::from(self.width) * self.cell_size,
            f64::from(self.height) * self.cell_size,
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = CellCoord> + '_ {
        (0..self.height as i32)
            .flat_map(move |y| (0..self.width as i32).map(move |x| CellCoord::new(x, y)))
    }

    pub fn free_cells(&self) -> Vec<CellCoord> {
        self.cells()
            .filter(|c| !self.obstacles.contains(c))
            .collect()
    }

    /// Noise-free sum of all source contributions at `cell`.
    pub fn radiation_truth(&self, cell: CellCoord) -> f64 {
        self.sources.iter().fold(0.0, |acc, s| {
            acc + radiation_from_source(s, cell, self.decay)
        })
    }

    /// A sensor reading at `cell`: the source sum plus one Gaussian background
    /// draw, floored at zero.
    pub fn total_radiation(&self, cell: CellCoord, rng: &mut RandomStream) -> f64 {
        let b = self.background_sigma * rng::standard_normal(rng);
        (b + self.radiation_truth(cell)).max(0.0)
    }

    /// `x,y,radiation_truth,obstacle` dump, one row per cell in row-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,radiation_truth,obstacle\n");
        for c in self.cells() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                c.x,
                c.y,
                self.radiation_truth(c),
                u8::from(self.obstacles.contains(&c))
            );
        }
        out
    }
}

/// Builds the random arena for a run: sources first (uniform over cells, no
/// two sharing a cell), then square obstacles that overlap neither a source
/// nor another obstacle.
pub fn generate_world(config: &SimConfig, rng: &mut RandomStream) -> Result<GridWorld> {
    let (w, h) = (config.width, config.height);
    if w == 0 || h == 0 {
        return Err(Error::Config("grid dimensions must be positive".into()));
    }
    let side = obstacle_side_cells(config.obstacle_size, config.cell_size);
    let total = u64::from(w) * u64::from(h);
    let needed =
        config.n_sources as u64 + config.n_obstacles as u64 * u64::from(side) * u64::from(side);
    if needed > total || (config.n_obstacles > 0 && (side > w || side > h)) {
        return Err(Error::Config(format!(
            "{} sources and {} obstacles of {side}x{side} cells do not fit in a {w}x{h} grid",
            config.n_sources, config.n_obstacles
        )));
    }

    let mut sources: Vec<RadiationSource> = Vec::with_capacity(config.n_sources);
    for _ in 0..config.n_sources {
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let cell = CellCoord::new(rng.gen_range(0..w as i32), rng.gen_range(0..h as i32));
            if sources.iter().any(|s| s.position == cell) {
                continue;
            }
            sources.push(RadiationSource {
                position: cell,
                intensity: rng.gen::<f64>(),
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::Config(
                "could not place radiation sources: grid too crowded".into(),
            ));
        }
    }

    let mut obstacles = BTreeSet::new();
    for _ in 0..config.n_obstacles {
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let x0 = rng.gen_range(0..=(w - side) as i32);
            let y0 = rng.gen_range(0..=(h - side) as i32);
            let rect: Vec<CellCoord> = (0..side as i32)
                .flat_map(|dy| (0..side as i32).map(move |dx| CellCoord::new(x0 + dx, y0 + dy)))
                .collect();
            let clash = rect
                .iter()
                .any(|c| obstacles.contains(c) || sources.iter().any(|s| s.position == *c));
            if clash {
                continue;
            }
            obstacles.extend(rect);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::Config(
                "could not place obstacles: grid too crowded".into(),
            ));
        }
    }

    GridWorld::new(
        w,
        h,
        config.cell_size,
        config.lambda,
        sources,
        obstacles,
        config.background_sigma,
    )
}

/// Obstacle side length in whole cells, rounded up.
pub fn obstacle_side_cells(obstacle_size: f64, cell_size: f64) -> u32 {
    // tolerate 0.8/0.2 = 4.000000000000001
    ((obstacle_size / cell_size) - 1e-9).ceil().max(1.0) as u32
}
