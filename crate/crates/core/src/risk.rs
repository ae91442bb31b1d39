//! Failure and information-gain models.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::{self, RandomStream};
use crate::world::{radiation_from_source, CellCoord, GridWorld};

/// When the Bernoulli failure draw happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailurePolicy {
    /// Draw once each time a robot's discretized cell changes.
    #[default]
    PerCellEntry,
    /// Draw on every tick.
    PerStep,
}

impl FailurePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            FailurePolicy::PerCellEntry => "per_cell_entry",
            FailurePolicy::PerStep => "per_step",
        }
    }
}

impl fmt::Display for FailurePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailurePolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "per_cell_entry" => Ok(FailurePolicy::PerCellEntry),
            "per_step" => Ok(FailurePolicy::PerStep),
            other => Err(format!(
                "expected per_cell_entry or per_step, got `{other}`"
            )),
        }
    }
}

/// Rate of the exponential revisit model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoModelParams {
    omega: f64,
}

impl InfoModelParams {
    pub fn new(omega: f64) -> Result<Self> {
        if omega > 0.0 && omega.is_finite() {
            Ok(InfoModelParams { omega })
        } else {
            Err(Error::invalid("omega", "must be positive"))
        }
    }

    pub fn omega(self) -> f64 {
        self.omega
    }
}

/// Bernoulli parameter of a failure given the sensed radiation level.
pub fn failure_probability(radiation: f64) -> Result<f64> {
    if radiation.is_nan() || radiation < 0.0 {
        return Err(Error::Contract(format!(
            "radiation must be non-negative, got {radiation}"
        )));
    }
    Ok(radiation.min(1.0))
}

/// Alternative combination treating each source as an independent Bernoulli
/// trial whose parameters multiply. Not used by the engine; kept for
/// comparison with [`failure_probability`].
pub fn product_failure_probability(world: &GridWorld, cell: CellCoord) -> f64 {
    if world.sources.is_empty() {
        return 0.0;
    }
    world
        .sources
        .iter()
        .map(|s| radiation_from_source(s, cell, world.decay).clamp(0.0, 1.0))
        .product()
}

/// Draws `f_i`; `true` means the robot fails. Consumes one RNG sample.
pub fn sample_failure(p: f64, rng: &mut RandomStream) -> bool {
    rng::unit(rng) < p
}

/// Probability of finding useful information in a cell last visited
/// `delta_t` ticks ago. The exponential density is clamped to `[0, 1]`
/// before being complemented; negative elapsed times give 1.
pub fn info_gain_probability(delta_t: f64, params: InfoModelParams) -> f64 {
    let not_useful = if delta_t >= 0.0 {
        (params.omega * (-params.omega * delta_t).exp()).min(1.0)
    } else {
        0.0
    };
    1.0 - not_useful
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn failure_probability_clamps() {
        assert_eq!(failure_probability(0.0).unwrap(), 0.0);
        assert_eq!(failure_probability(1.7).unwrap(), 1.0);
        assert_eq!(failure_probability(0.3).unwrap(), 0.3);
        assert!(matches!(failure_probability(-0.1), Err(Error::Contract(_))));
        assert!(failure_probability(f64::NAN).is_err());
    }

    #[test]
    fn sample_failure_extremes() {
        let mut rng = stream(5, 0);
        assert!((0..10_000).all(|_| !sample_failure(0.0, &mut rng)));
        assert!((0..10_000).all(|_| sample_failure(1.0, &mut rng)));
    }

    #[test]
    fn sample_failure_rate() {
        let mut rng = stream(11, 4);
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_failure(0.1, &mut rng)).count();
        let rate = hits as f64 / n as f64;
        let sigma = (0.1f64 * 0.9 / n as f64).sqrt();
        assert!((rate - 0.1).abs() < 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn info_gain_values() {
        let p = InfoModelParams::new(0.01).unwrap();
        assert!((info_gain_probability(1e9, p) - 1.0).abs() < 1e-12);
        let p = InfoModelParams::new(1.0).unwrap();
        assert_eq!(info_gain_probability(0.0, p), 0.0);
        let p = InfoModelParams::new(0.5).unwrap();
        assert!((info_gain_probability(2.0, p) - (1.0 - 0.5 * (-1.0f64).exp())).abs() < 1e-12);
        assert!((info_gain_probability(2.0, p) - 0.8161).abs() < 1e-4);
        assert_eq!(info_gain_probability(-3.0, p), 1.0);
        // density above 1 is clamped
        let p = InfoModelParams::new(3.0).unwrap();
        assert_eq!(info_gain_probability(0.0, p), 0.0);
    }

    #[test]
    fn omega_must_be_positive() {
        assert!(InfoModelParams::new(0.0).is_err());
        assert!(InfoModelParams::new(-1.0).is_err());
    }

    #[test]
    fn product_form_differs_from_sum_form() {
        let sources = vec![
            crate::world::RadiationSource {
                position: CellCoord::new(0, 0),
                intensity: 0.5,
            },
            crate::world::RadiationSource {
                position: CellCoord::new(0, 0),
                intensity: 0.5,
            },
        ];
        // GridWorld::new does not forbid co-located sources
        let w = GridWorld::new(1, 1, 1.0, 5.0, sources, BTreeSet::new(), 0.0).unwrap();
        let c = CellCoord::new(0, 0);
        assert!((product_failure_probability(&w, c) - 0.25).abs() < 1e-12);
        assert_eq!(failure_probability(w.radiation_truth(c)).unwrap(), 1.0);
    }

    #[test]
    fn idle_survival_curve() {
        // A robot redrawing every tick on a constant-r cell survives t ticks
        // with probability (1-r)^t.
        let r = 0.05;
        let runs = 20_000;
        let horizon = 40;
        let mut alive_at = vec![0usize; horizon + 1];
        let mut rng = stream(77, 1);
        let p = failure_probability(r).unwrap();
        for _ in 0..runs {
            let mut t = 0;
            alive_at[0] += 1;
            while t < horizon && !sample_failure(p, &mut rng) {
                t += 1;
                alive_at[t] += 1;
            }
        }
        for t in [1, 5, 10, 20, 40] {
            let expect = (1.0 - r).powi(t as i32);
            let got = alive_at[t] as f64 / runs as f64;
            let sigma = (expect * (1.0 - expect) / runs as f64).sqrt();
            assert!(
                (got - expect).abs() < 4.0 * sigma,
                "t={t} got {got} expect {expect}"
            );
        }
    }

    proptest! {
        #[test]
        fn info_gain_monotone(omega in 0.001f64..5.0, a in 0.0f64..1e4, b in 0.0f64..1e4) {
            let p = InfoModelParams::new(omega).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(info_gain_probability(lo, p) <= info_gain_probability(hi, p));
            let g = info_gain_probability(lo, p);
            prop_assert!((0.0..=1.0).contains(&g));
        }
    }
}
