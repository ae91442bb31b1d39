//! Simulation parameters, the flat `key=value` config format and built-in
//! presets.

use std::fmt::Write as _;

use crate::control::{ControlGains, ControllerKind};
use crate::error::{Error, Result};
use crate::risk::FailurePolicy;

/// Which radiation value drives the failure draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailureInput {
    /// Noise-free source sum at the cell.
    #[default]
    Truth,
    /// The noisy sensor reading that is also written to the stigmergy.
    Sensed,
}

impl FailureInput {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureInput::Truth => "truth",
            FailureInput::Sensed => "sensed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub width: u32,
    pub height: u32,
    pub cell_size: f64,
    pub n_robots: usize,
    pub n_sources: usize,
    pub n_obstacles: usize,
    /// Obstacle side in meters; rounded up to whole cells.
    pub obstacle_size: f64,
    pub lambda: f64,
    pub background_sigma: f64,
    pub gains: ControlGains,
    pub omega: f64,
    pub p_turn: f64,
    pub drop_probability: f64,
    pub message_bytes: u64,
    /// Broadcast range in cells; `None` is full connectivity.
    pub comm_radius: Option<f64>,
    pub anti_entropy_rounds: usize,
    pub failure_policy: FailurePolicy,
    pub failure_input: FailureInput,
    /// Proximity sensor range in cells.
    pub sensor_range: f64,
    /// Divide visit-time differences by the current tick.
    pub normalize_epsilon: bool,
    /// DORA ignores neighbors outside the arena.
    pub bounded_gradient: bool,
    pub steps: usize,
    pub seed: u64,
    pub controller: ControllerKind,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            width: 20,
            height: 20,
            cell_size: 1.0,
            n_robots: 20,
            n_sources: 2,
            n_obstacles: 5,
            obstacle_size: 0.8,
            lambda: 5.0,
            background_sigma: 0.05,
            gains: ControlGains::default(),
            omega: 0.01,
            p_turn: 0.2,
            drop_probability: 0.0,
            message_bytes: 20,
            comm_radius: None,
            anti_entropy_rounds: 4,
            failure_policy: FailurePolicy::PerCellEntry,
            failure_input: FailureInput::Truth,
            sensor_range: 0.8,
            normalize_epsilon: true,
            bounded_gradient: true,
            steps: 300,
            seed: 0,
            controller: ControllerKind::Dora,
        }
    }
}

const HEADER_MARK: &str = "# dora-explorer resolved config";

pub const PRESETS: &[&str] = &["sim20", "arena"];

/// Built-in experiment configurations.
pub fn preset(name: &str) -> Option<SimConfig> {
    match name {
        "sim20" => Some(SimConfig::default()),
        // 2 m x 2 m at 20 cm cells, one source, no obstacles
        "arena" => {
            let c = SimConfig {
                width: 10,
                height: 10,
                cell_size: 0.2,
                n_robots: 3,
                n_sources: 1,
                n_obstacles: 0,
                steps: 200,
                ..SimConfig::default()
            };
            Some(c)
        }
        _ => None,
    }
}

const KEYS: &[&str] = &[
    "width",
    "height",
    "cell_size",
    "robots",
    "sources",
    "obstacles",
    "obstacle_size",
    "lambda",
    "sigma",
    "alpha",
    "beta",
    "gamma",
    "k",
    "stagnation_epsilon",
    "omega",
    "p_turn",
    "drop_probability",
    "message_bytes",
    "comm_radius",
    "anti_entropy_rounds",
    "failure_policy",
    "failure_input",
    "sensor_range",
    "normalize_epsilon",
    "bounded_gradient",
    "steps",
    "seed",
    "controller",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse `{value}`")))
}

fn parse_count(key: &str, value: &str) -> Result<usize> {
    let n: i64 = parse_num(key, value)?;
    usize::try_from(n).map_err(|_| Error::invalid(key, format!("must be non-negative, got {n}")))
}

impl SimConfig {
    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "width" => {
                self.width = parse_count(key, v)?
                    .try_into()
                    .map_err(|_| Error::invalid(key, "too large"))?
            }
            "height" => {
                self.height = parse_count(key, v)?
                    .try_into()
                    .map_err(|_| Error::invalid(key, "too large"))?
            }
            "cell_size" => self.cell_size = parse_num(key, v)?,
            "robots" => self.n_robots = parse_count(key, v)?,
            "sources" => self.n_sources = parse_count(key, v)?,
            "obstacles" => self.n_obstacles = parse_count(key, v)?,
            "obstacle_size" => self.obstacle_size = parse_num(key, v)?,
            "lambda" => self.lambda = parse_num(key, v)?,
            "sigma" => self.background_sigma = parse_num(key, v)?,
            "alpha" => self.gains.alpha = parse_num(key, v)?,
            "beta" => self.gains.beta = parse_num(key, v)?,
            "gamma" => self.gains.gamma = parse_num(key, v)?,
            "k" => self.gains.k = parse_num(key, v)?,
            "stagnation_epsilon" => self.gains.stagnation_epsilon = parse_num(key, v)?,
            "omega" => self.omega = parse_num(key, v)?,
            "p_turn" => self.p_turn = parse_num(key, v)?,
            "drop_probability" => self.drop_probability = parse_num(key, v)?,
            "message_bytes" => self.message_bytes = parse_count(key, v)? as u64,
            "comm_radius" => {
                self.comm_radius = if v == "none" {
                    None
                } else {
                    Some(parse_num(key, v)?)
                };
            }
            "anti_entropy_rounds" => self.anti_entropy_rounds = parse_count(key, v)?,
            "failure_policy" => {
                self.failure_policy = v.parse().map_err(|e: String| Error::invalid(key, e))?
            }
            "failure_input" => {
                self.failure_input = match v {
                    "truth" => FailureInput::Truth,
                    "sensed" => FailureInput::Sensed,
                    other => {
                        return Err(Error::invalid(
                            key,
                            format!("expected truth or sensed, got `{other}`"),
                        ))
                    }
                }
            }
            "sensor_range" => self.sensor_range = parse_num(key, v)?,
            "normalize_epsilon" => self.normalize_epsilon = parse_num(key, v)?,
            "bounded_gradient" => self.bounded_gradient = parse_num(key, v)?,
            "steps" => {
                let n: i64 = parse_num(key, v)?;
                if n < 1 {
                    return Err(Error::invalid(key, format!("must be at least 1, got {n}")));
                }
                self.steps = n as usize;
            }
            "seed" => self.seed = parse_num(key, v)?,
            "controller" => {
                self.controller = v.parse().map_err(|e: String| Error::invalid(key, e))?
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Merges a `key=value` document over `self`. `#` starts a comment,
    /// `[section]` headers are accepted and ignored.
    pub fn merge_text(mut self, text: &str) -> Result<SimConfig> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("expected key=value, got `{line}`"),
                });
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("unknown key `{key}`"),
                });
            }
            self.set(key, value)?;
        }
        Ok(self)
    }

    /// Parses a config document over the defaults and validates it.
    pub fn parse(text: &str) -> Result<SimConfig> {
        let cfg = SimConfig::default().merge_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(key, reason))
            }
        };
        check(self.width >= 1, "width", "must be at least 1")?;
        check(self.height >= 1, "height", "must be at least 1")?;
        check(
            self.cell_size > 0.0 && self.cell_size.is_finite(),
            "cell_size",
            "must be positive",
        )?;
        check(
            self.obstacle_size > 0.0 && self.obstacle_size.is_finite(),
            "obstacle_size",
            "must be positive",
        )?;
        check(
            self.lambda >= 0.0 && self.lambda.is_finite(),
            "lambda",
            "must be non-negative",
        )?;
        check(
            self.background_sigma >= 0.0 && self.background_sigma.is_finite(),
            "sigma",
            "must be non-negative",
        )?;
        check(self.gains.alpha >= 0.0, "alpha", "must be non-negative")?;
        check(self.gains.beta >= 0.0, "beta", "must be non-negative")?;
        check(self.gains.gamma >= 0.0, "gamma", "must be non-negative")?;
        check(
            self.gains.k > 0.0 && self.gains.k.is_finite(),
            "k",
            "must be positive",
        )?;
        check(
            self.gains.stagnation_epsilon >= 0.0,
            "stagnation_epsilon",
            "must be non-negative",
        )?;
        check(
            self.omega > 0.0 && self.omega.is_finite(),
            "omega",
            "must be positive",
        )?;
        check(
            (0.0..=1.0).contains(&self.p_turn),
            "p_turn",
            "must lie in [0,1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.drop_probability),
            "drop_probability",
            "must lie in [0,1]",
        )?;
        check(
            self.comm_radius.is_none_or(|r| r >= 0.0),
            "comm_radius",
            "must be non-negative",
        )?;
        check(
            self.sensor_range >= 0.0 && self.sensor_range.is_finite(),
            "sensor_range",
            "must be non-negative",
        )?;
        check(self.steps >= 1, "steps", "must be at least 1")?;
        Ok(())
    }

    /// One `key=value` line per parameter, in a fixed order.
    pub fn to_text(&self) -> String {
        let g = &self.gains;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("width", self.width.to_string());
        kv("height", self.height.to_string());
        kv("cell_size", self.cell_size.to_string());
        kv("robots", self.n_robots.to_string());
        kv("sources", self.n_sources.to_string());
        kv("obstacles", self.n_obstacles.to_string());
        kv("obstacle_size", self.obstacle_size.to_string());
        kv("lambda", self.lambda.to_string());
        kv("sigma", self.background_sigma.to_string());
        kv("alpha", g.alpha.to_string());
        kv("beta", g.beta.to_string());
        kv("gamma", g.gamma.to_string());
        kv("k", g.k.to_string());
        kv("stagnation_epsilon", g.stagnation_epsilon.to_string());
        kv("omega", self.omega.to_string());
        kv("p_turn", self.p_turn.to_string());
        kv("drop_probability", self.drop_probability.to_string());
        kv("message_bytes", self.message_bytes.to_string());
        kv(
            "comm_radius",
            self.comm_radius
                .map_or_else(|| "none".to_string(), |r| r.to_string()),
        );
        kv("anti_entropy_rounds", self.anti_entropy_rounds.to_string());
        kv("failure_policy", self.failure_policy.to_string());
        kv("failure_input", self.failure_input.as_str().to_string());
        kv("sensor_range", self.sensor_range.to_string());
        kv("normalize_epsilon", self.normalize_epsilon.to_string());
        kv("bounded_gradient", self.bounded_gradient.to_string());
        kv("steps", self.steps.to_string());
        kv("seed", self.seed.to_string());
        kv("controller", self.controller.to_string());
        s
    }

    /// Provenance header written at the top of every output file.
    pub fn to_header(&self) -> String {
        let mut out = format!("{HEADER_MARK}\n");
        for line in self.to_text().lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    /// Recovers the config from the leading comment block of an output file.
    pub fn from_header(text: &str) -> Result<SimConfig> {
        if text.lines().next() != Some(HEADER_MARK) {
            return Err(Error::Parse {
                line: 1,
                reason: "no config header".into(),
            });
        }
        let body: String = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim())
            .filter(|l| l.contains('='))
            .map(|l| format!("{l}\n"))
            .collect();
        SimConfig::parse(&body)
    }
}
