//! The deterministic tick loop and run orchestration.
//!
//! Within a tick, active robots act in ascending id order: sense obstacles,
//! compute a command, move, check for failure on the new cell, then write
//! their observations. Both stigmergy buses are flushed once all robots have
//! acted, and a [`MetricsRecord`] is appended.

mod batch;
mod metrics;
mod sensors;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;

pub use batch::{
    aggregate, aggregate_to_csv, batch, world_hash, AggregateRow, BatchResult, RunSummary,
    AGGREGATE_METRICS,
};
pub use metrics::{trace_to_csv, MetricsRecord, TRACE_CSV_HEADER};
pub use sensors::{is_free, resolve_motion, sense_proximity};

use crate::config::{FailureInput, SimConfig};
use crate::control::{
    apply_control, dora_step, fbe_step, random_walk_step, ControllerKind, DoraInputs, FbeInputs,
    Neighborhood,
};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::risk::{failure_probability, sample_failure, FailurePolicy};
use crate::rng::{self, RandomStream};
use crate::stigmergy::{
    merged_view, BroadcastBus, DeliveryReport, OpCounters, StigmergyEntry, StigmergyReplica,
};
use crate::world::{discretize, generate_world, CellCoord, GridWorld};

#[derive(Debug, Clone)]
pub struct RobotState {
    pub id: u32,
    /// Meters.
    pub position: Vec2,
    /// Radians.
    pub heading: f64,
    pub active: bool,
    pub last_cell: CellCoord,
    pub rng: RandomStream,
    /// Obstacle cells this robot has seen up close (used by FBE).
    pub known_obstacles: BTreeSet<CellCoord>,
}

/// One virtual stigmergy: every robot's replica plus the shared medium.
#[derive(Debug, Clone)]
pub struct Layer {
    pub replicas: Vec<StigmergyReplica>,
    pub bus: BroadcastBus,
}

impl Layer {
    fn new(n: usize, config: &SimConfig) -> Self {
        Layer {
            replicas: (0..n as u32).map(StigmergyReplica::new).collect(),
            bus: BroadcastBus::new(
                config.drop_probability,
                config.message_bytes,
                config.anti_entropy_rounds,
            ),
        }
    }

    pub fn merged(&self) -> BTreeMap<CellCoord, StigmergyEntry> {
        merged_view(&self.replicas)
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub config: SimConfig,
    pub world: GridWorld,
    pub robots: Vec<RobotState>,
    /// Sensed radiation map (written by DORA).
    pub radiation: Layer,
    /// Last-visit map (written by DORA and FBE).
    pub visits: Layer,
    /// Offline log of every radiation reading taken, averaged per cell. Not
    /// shared between robots; exists so baseline runs can export a belief map.
    pub survey: BTreeMap<CellCoord, StigmergyEntry>,
    pub explored: BTreeSet<CellCoord>,
    /// Ticks completed so far.
    pub tick: u64,
    pub bus_rng: RandomStream,
    pub trace: Vec<MetricsRecord>,
    neighborhood: Neighborhood,
}

/// Per-tick detail beyond the aggregate record.
#[derive(Debug, Clone)]
pub struct TickReport {
    pub record: MetricsRecord,
    /// Combined counters of both maps for each robot still active at the end
    /// of the tick; `None` for failed robots.
    pub ops: Vec<Option<OpCounters>>,
    pub radiation_delivery: DeliveryReport,
    pub visits_delivery: DeliveryReport,
    /// Robots that failed during this tick.
    pub failed: Vec<u32>,
}

pub fn init_run(config: &SimConfig) -> Result<SimState> {
    config.validate()?;
    let mut world_rng = rng::stream(config.seed, rng::WORLD_STREAM);
    let world = generate_world(config, &mut world_rng)?;
    let free = world.free_cells();
    if config.n_robots > free.len() {
        return Err(Error::Config(format!(
            "{} robots do not fit on {} free cells",
            config.n_robots,
            free.len()
        )));
    }
    let picks = index::sample(&mut world_rng, free.len(), config.n_robots);
    let robots = picks
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let cell = free[p];
            RobotState {
                id: i as u32,
                position: cell.center(world.cell_size),
                heading: world_rng.gen::<f64>() * std::f64::consts::TAU,
                active: true,
                last_cell: cell,
                rng: rng::stream(config.seed, i as u64),
                known_obstacles: BTreeSet::new(),
            }
        })
        .collect();
    Ok(SimState {
        config: config.clone(),
        world,
        robots,
        radiation: Layer::new(config.n_robots, config),
        visits: Layer::new(config.n_robots, config),
        survey: BTreeMap::new(),
        explored: BTreeSet::new(),
        tick: 0,
        bus_rng: rng::stream(config.seed, rng::BUS_STREAM),
        trace: Vec::with_capacity(config.steps),
        neighborhood: Neighborhood::moore(),
    })
}

impl SimState {
    pub fn active_count(&self) -> usize {
        self.robots.iter().filter(|r| r.active).count()
    }

    /// Final radiation belief: the shared map for DORA, the offline survey
    /// log for controllers that do not share radiation.
    pub fn radiation_belief(&self) -> Vec<StigmergyEntry> {
        match self.config.controller {
            ControllerKind::Dora => self.radiation.merged().into_values().collect(),
            _ => self.survey.values().copied().collect(),
        }
    }

    /// Advances the simulation by one tick.
    pub fn tick(&mut self) -> Result<TickReport> {
        if self.tick as usize >= self.config.steps {
            return Err(Error::Contract(format!(
                "run already completed {} steps",
                self.config.steps
            )));
        }
        self.tick += 1;
        let t = self.tick;
        let cfg = &self.config;
        let world = &self.world;
        let gains = cfg.gains;
        let range = cfg.sensor_range * world.cell_size;
        let mut failed = Vec::new();

        for robot in self.robots.iter_mut().filter(|r| r.active) {
            let id = robot.id as usize;
            let proximity = sense_proximity(world, robot.position, robot.heading, range);
            let cell = robot.last_cell;
            let command = match cfg.controller {
                ControllerKind::Dora => dora_step(
                    DoraInputs {
                        cell,
                        heading: robot.heading,
                        radiation: &mut self.radiation.replicas[id],
                        radiation_bus: &mut self.radiation.bus,
                        visits: &mut self.visits.replicas[id],
                        visits_bus: &mut self.visits.bus,
                        proximity: &proximity,
                        tick: t,
                        normalize_epsilon: cfg.normalize_epsilon,
                        extent: cfg.bounded_gradient.then_some((world.width, world.height)),
                    },
                    &gains,
                    &self.neighborhood,
                ),
                ControllerKind::Fbe => fbe_step(
                    FbeInputs {
                        position: robot.position,
                        cell,
                        heading: robot.heading,
                        visits: &mut self.visits.replicas[id],
                        visits_bus: &mut self.visits.bus,
                        proximity: &proximity,
                        known_obstacles: &robot.known_obstacles,
                        width: world.width,
                        height: world.height,
                        cell_size: world.cell_size,
                    },
                    &gains,
                ),
                ControllerKind::RandomWalk => random_walk_step(
                    robot.heading,
                    &proximity,
                    &gains,
                    cfg.p_turn,
                    &mut robot.rng,
                ),
            };

            let (target, heading) = apply_control(robot.position, &command, &gains, robot.heading);
            let (position, heading, _) = resolve_motion(world, robot.position, target, heading);
            robot.position = position;
            robot.heading = heading;

            let new_cell = discretize(position, world.cell_size);
            let sensed = world.total_radiation(new_cell, &mut robot.rng);
            let check = match cfg.failure_policy {
                FailurePolicy::PerCellEntry => new_cell != robot.last_cell,
                FailurePolicy::PerStep => true,
            };
            robot.last_cell = new_cell;
            if check {
                let hazard = match cfg.failure_input {
                    FailureInput::Truth => world.radiation_truth(new_cell),
                    FailureInput::Sensed => sensed,
                };
                if sample_failure(failure_probability(hazard)?, &mut robot.rng) {
                    robot.active = false;
                    failed.push(robot.id);
                    continue;
                }
            }

            match cfg.controller {
                ControllerKind::Dora => {
                    self.radiation.replicas[id].vput(new_cell, sensed, &mut self.radiation.bus);
                    self.visits.replicas[id].vput(new_cell, t as f64, &mut self.visits.bus);
                }
                ControllerKind::Fbe => {
                    self.visits.replicas[id].vput(new_cell, t as f64, &mut self.visits.bus);
                    for n in self.neighborhood.cells(new_cell) {
                        if world.in_bounds(n) && !world.is_traversable(n) {
                            robot.known_obstacles.insert(n);
                        }
                    }
                }
                ControllerKind::RandomWalk => {}
            }
            record_survey(&mut self.survey, new_cell, sensed, t, robot.id);
            self.explored.insert(new_cell);
        }

        let active: Vec<bool> = self.robots.iter().map(|r| r.active).collect();
        let cells: Vec<CellCoord> = self.robots.iter().map(|r| r.last_cell).collect();
        let radius = cfg.comm_radius;
        let link =
            move |a: usize, b: usize| radius.is_none_or(|r| cells[a].distance(cells[b]) <= r);
        let radiation_delivery = self.radiation.bus.flush(
            &mut self.radiation.replicas,
            &active,
            &link,
            &mut self.bus_rng,
        );
        let visits_delivery =
            self.visits
                .bus
                .flush(&mut self.visits.replicas, &active, &link, &mut self.bus_rng);

        let mut ops = Vec::with_capacity(self.robots.len());
        let (mut bytes, mut accesses, mut n_active) = (0u64, 0u64, 0usize);
        for (i, robot) in self.robots.iter().enumerate() {
            let a = self.radiation.replicas[i].account();
            let b = self.visits.replicas[i].account();
            if robot.active {
                let c = OpCounters {
                    reads: a.reads + b.reads,
                    writes: a.writes + b.writes,
                    messages_sent: a.messages_sent + b.messages_sent,
                    bytes_sent: a.bytes_sent + b.bytes_sent,
                };
                bytes += c.bytes_sent;
                accesses += c.accesses();
                n_active += 1;
                ops.push(Some(c));
            } else {
                ops.push(None);
            }
        }
        let mean = |x: u64| {
            if n_active == 0 {
                0.0
            } else {
                x as f64 / n_active as f64
            }
        };
        let record = MetricsRecord {
            tick: t,
            active_robots: n_active,
            explored_cells: self.explored.len(),
            bytes_per_robot: mean(bytes),
            stig_ops_per_robot: mean(accesses),
        };
        self.check_invariants(&record)?;
        self.trace.push(record);
        Ok(TickReport {
            record,
            ops,
            radiation_delivery,
            visits_delivery,
            failed,
        })
    }

    fn check_invariants(&self, record: &MetricsRecord) -> Result<()> {
        if let Some(prev) = self.trace.last() {
            if record.active_robots > prev.active_robots {
                return Err(Error::Invariant("active robot count increased".into()));
            }
            if record.explored_cells < prev.explored_cells {
                return Err(Error::Invariant("explored cell count decreased".into()));
            }
        }
        if let Some(r) = self
            .robots
            .iter()
            .find(|r| !is_free(&self.world, r.position))
        {
            return Err(Error::Invariant(format!(
                "robot {} left the free space at {:?}",
                r.id, r.position
            )));
        }
        Ok(())
    }
}

fn record_survey(
    survey: &mut BTreeMap<CellCoord, StigmergyEntry>,
    cell: CellCoord,
    value: f64,
    tick: u64,
    id: u32,
) {
    let value = survey
        .get(&cell)
        .map_or(value, |old| 0.5 * (old.value + value));
    survey.insert(
        cell,
        StigmergyEntry {
            key: cell,
            value,
            lamport: tick,
            writer_id: id,
        },
    );
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Vec<MetricsRecord>,
    pub state: SimState,
}

impl RunResult {
    pub fn radiation_belief(&self) -> Vec<StigmergyEntry> {
        self.state.radiation_belief()
    }

    pub fn final_active(&self) -> usize {
        self.state.active_count()
    }
}

pub fn run(config: &SimConfig) -> Result<RunResult> {
    let mut state = init_run(config)?;
    for _ in 0..config.steps {
        state.tick()?;
    }
    Ok(RunResult {
        trace: state.trace.clone(),
        state,
    })
}
