//! Synthetic steady-state data from a population of discrete drivers.
//!
//! Each driver has a fixed destination and holds a lane (feed-through or
//! bifurcating). In every round the drivers are visited in random order and
//! each picks the lane with the lower perceived cost: the model cost at the
//! current aggregate shares plus independent uniform noise of half-width
//! `sigma * 0.05 * (cf_i + cb)`. Shares at the end of the last round form the
//! data point.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calibration::DataPoint;
use crate::error::{Error, Result};
use crate::model::{
    bifurcating_cost, feed_through_cost, CostCoefficients, DemandConfig, DivergeInstance, FlowDistribution, Link,
};

const NOISE_SCALE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub n_vehicles: usize,
    /// Driver imperfection in `[0, 1]`.
    pub sigma: f64,
    /// Upper bound on update rounds; stops early once a round has no switch.
    pub rounds: usize,
    pub seed: u64,
    pub total_demand_vph: f64,
    /// Exit-1 demands in vehicles per hour, one data point each.
    pub demand_sweep: Vec<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_vehicles: 5000,
            sigma: 0.5,
            rounds: 500,
            seed: 1,
            total_demand_vph: 3000.0,
            demand_sweep: demand_sweep(1150.0, 1850.0, 50.0).expect("static sweep"),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_vehicles == 0 {
            return Err(Error::Config("n_vehicles must be at least 1".into()));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::Config(format!("sigma must lie in [0, 1], got {}", self.sigma)));
        }
        if !(self.total_demand_vph > 0.0 && self.total_demand_vph.is_finite()) {
            return Err(Error::Config(format!("total demand must be positive, got {}", self.total_demand_vph)));
        }
        for &d in &self.demand_sweep {
            if !(d > 0.0 && d < self.total_demand_vph) {
                return Err(Error::Config(format!(
                    "sweep demand {d} outside (0, {})",
                    self.total_demand_vph
                )));
            }
        }
        Ok(())
    }
}

/// `start, start + step, ..` up to and including `end` (within half a step).
pub fn demand_sweep(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(end >= start) || !start.is_finite() || !end.is_finite() {
        return Err(Error::Argument(format!("invalid sweep {start}:{end}:{step}")));
    }
    let n = ((end - start) / step + 0.5).floor() as usize;
    Ok((0..=n).map(|k| start + step * k as f64).collect())
}

/// Driver counts per destination: link 2 gets the nearest integer to
/// `n * q2`, link 1 the remainder.
pub fn destination_counts(n: usize, demand: &DemandConfig) -> [usize; 2] {
    let n2 = ((n as f64) * demand.q2()).round() as usize;
    let n2 = n2.min(n);
    [n - n2, n2]
}

pub fn simulate_steady_state(g_true: &DivergeInstance, cfg: &SimulationConfig) -> Result<DataPoint> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(simulate(g_true, cfg, &mut rng))
}

pub fn generate_dataset(c_true: &CostCoefficients, cfg: &SimulationConfig) -> Result<Vec<DataPoint>> {
    cfg.validate()?;
    c_true.validate()?;
    if cfg.demand_sweep.is_empty() {
        return Err(Error::Config("demand sweep is empty".into()));
    }
    cfg.demand_sweep
        .iter()
        .enumerate()
        .map(|(k, &d1)| {
            let demand = DemandConfig::from_demands(d1, cfg.total_demand_vph - d1)?;
            let g = DivergeInstance::new(demand, *c_true)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64 + 1);
            Ok(simulate(&g, cfg, &mut rng))
        })
        .collect()
}

struct Population {
    /// Drivers per destination.
    n: [usize; 2],
    /// Bifurcating-lane drivers per destination.
    b: [usize; 2],
    q: [f64; 2],
}

impl Population {
    fn flow(&self) -> FlowDistribution {
        let share = |i: usize| {
            if self.n[i] == 0 {
                (self.q[i], 0.0)
            } else {
                let xb = self.q[i] * self.b[i] as f64 / self.n[i] as f64;
                let xf = self.q[i] * (self.n[i] - self.b[i]) as f64 / self.n[i] as f64;
                (xf, xb)
            }
        };
        let (xf1, xb1) = share(0);
        let (xf2, xb2) = share(1);
        FlowDistribution::from_parts_unchecked(xf1, xb1, xf2, xb2)
    }
}

fn simulate(g: &DivergeInstance, cfg: &SimulationConfig, rng: &mut ChaCha8Rng) -> DataPoint {
    let c = &g.costs;
    let n = destination_counts(cfg.n_vehicles, &g.demand);
    // (destination, on bifurcating lane)
    let mut drivers: Vec<(Link, bool)> = Vec::with_capacity(cfg.n_vehicles);
    let mut pop = Population { n, b: [0, 0], q: [g.demand.q1(), g.demand.q2()] };
    for link in Link::BOTH {
        for _ in 0..n[link.index() - 1] {
            let on_b = rng.random_bool(0.5);
            pop.b[link.index() - 1] += on_b as usize;
            drivers.push((link, on_b));
        }
    }
    let half_width = |link: Link| cfg.sigma * NOISE_SCALE * (c.cf(link) + c.cb);
    let mut order: Vec<usize> = (0..drivers.len()).collect();
    for _ in 0..cfg.rounds {
        order.shuffle(rng);
        let mut switched = false;
        for &d in &order {
            let (link, on_b) = drivers[d];
            let x = pop.flow();
            let h = half_width(link);
            let mut jf = feed_through_cost(c, &x, link);
            let mut jb = bifurcating_cost(c, &x, link);
            if h > 0.0 {
                jf += rng.random_range(-h..=h);
                jb += rng.random_range(-h..=h);
            }
            let want_b = if on_b { jb <= jf } else { jb < jf };
            if want_b != on_b {
                let i = link.index() - 1;
                if want_b {
                    pop.b[i] += 1;
                } else {
                    pop.b[i] -= 1;
                }
                drivers[d].1 = want_b;
                switched = true;
            }
        }
        if !switched {
            break;
        }
    }
    let total = cfg.total_demand_vph;
    DataPoint { demand: g.demand, flow: pop.flow(), total_demand_vph: total }
}
