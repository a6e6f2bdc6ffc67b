//! Calibration of cost coefficients from steady-state flow observations.
//!
//! For fixed coefficients each observed point yields four Wardrop products
//! `xf_i (Jf_i - Jb_i)` and `xb_i (Jb_i - Jf_i)`; a condition is violated when
//! its product exceeds the margin `epsilon`. Calibration looks for the
//! coefficient vector inside a bounded box that violates the fewest
//! conditions. [`build_milp`] writes this down as a big-M mixed-integer
//! program, [`calibrate_exact`] solves it by branch and bound over linear
//! feasibility subproblems, and [`calibrate_search`] is a randomised
//! multi-start heuristic for datasets too large for the exact search.

mod exact;
mod lp;
mod milp;
mod search;
pub mod space;

pub use exact::calibrate_exact;
pub use milp::{build_milp, BinaryIndicator, MilpModel, MilpRow, RowKind};
pub use search::calibrate_search;
pub use space::{CoefficientSpace, LinearRow};

use crate::error::{Error, Result};
use crate::model::{
    check_uniqueness_condition, residuals_unchecked, CostCoefficients, DemandConfig, FlowDistribution, LaneClass,
    Link, UniquenessCheck, FEASIBILITY_TOL,
};

/// One observed steady state: demand split and the four class shares.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataPoint {
    pub demand: DemandConfig,
    pub flow: FlowDistribution,
    /// Total demand in vehicles per hour; bookkeeping only.
    pub total_demand_vph: f64,
}

impl DataPoint {
    pub fn new(demand: DemandConfig, flow: FlowDistribution, total_demand_vph: f64) -> Result<Self> {
        flow.check_feasible(&demand, FEASIBILITY_TOL)?;
        Ok(DataPoint { demand, flow, total_demand_vph })
    }
}

/// Box on the eight coefficients, in canonical order
/// `(cf1, cf2, cb, lambda1, lambda2, mu1, mu2, nu)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientBounds {
    pub lower: [f64; 8],
    pub upper: [f64; 8],
}

impl Default for CoefficientBounds {
    /// Cost rates and `nu` in `[1, 10]`, capacity factors in `[1e-9, 1]`.
    fn default() -> Self {
        let f = crate::model::MIN_CAPACITY_FACTOR;
        CoefficientBounds {
            lower: [1.0, 1.0, 1.0, f, f, f, f, 1.0],
            upper: [10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0, 10.0],
        }
    }
}

impl CoefficientBounds {
    /// Same box with the rate coefficients (`cf1`, `cf2`, `cb`, `nu`) in `[lo, hi]`.
    pub fn with_rate_range(lo: f64, hi: f64) -> Self {
        let mut b = Self::default();
        for k in [0, 1, 2, 7] {
            b.lower[k] = lo;
            b.upper[k] = hi;
        }
        b
    }

    pub fn validate(&self) -> Result<()> {
        for (k, name) in crate::model::COEFFICIENT_NAMES.iter().enumerate() {
            let (lo, hi) = (self.lower[k], self.upper[k]);
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::Config(format!("empty bound for {name}: [{lo}, {hi}]")));
            }
        }
        for k in [0, 1, 2, 7] {
            if self.lower[k] <= 0.0 {
                return Err(Error::Config(format!(
                    "lower bound of {} must be positive",
                    crate::model::COEFFICIENT_NAMES[k]
                )));
            }
        }
        for k in 3..7 {
            if self.lower[k] < crate::model::MIN_CAPACITY_FACTOR || self.upper[k] > 1.0 {
                return Err(Error::Config(format!(
                    "bounds of {} must lie inside [{}, 1]",
                    crate::model::COEFFICIENT_NAMES[k],
                    crate::model::MIN_CAPACITY_FACTOR
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Exact,
    Heuristic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationOptions {
    /// Big-M constant `T`.
    pub big_m: f64,
    /// Margin `epsilon`: a condition counts as violated when its product exceeds it.
    pub epsilon: f64,
    /// Impose `cf1 = cf2 = cb`, `lambda1 = lambda2`, `mu1 = mu2`.
    pub symmetry: bool,
    pub bounds: CoefficientBounds,
    pub solver: SolverKind,
    pub seed: u64,
    /// Restarts of the heuristic search.
    pub restarts: usize,
    /// Largest number of binaries the exact solver accepts.
    pub max_binaries: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            big_m: 1e3,
            epsilon: 1e-6,
            symmetry: false,
            bounds: CoefficientBounds::default(),
            solver: SolverKind::Exact,
            seed: 1,
            restarts: 200,
            max_binaries: 28,
        }
    }
}

impl CalibrationOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.big_m > 0.0 && self.big_m.is_finite()) {
            return Err(Error::Config(format!("big_m must be positive, got {}", self.big_m)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.big_m * 1e-3) {
            return Err(Error::Config(format!(
                "epsilon must satisfy 0 < epsilon << big_m, got {} vs {}",
                self.epsilon, self.big_m
            )));
        }
        self.bounds.validate()
    }

    pub(crate) fn space(&self) -> CoefficientSpace {
        CoefficientSpace::new(self.symmetry, self.bounds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certificate {
    /// Violation count proven minimal.
    Exact,
    /// Best count found by the randomised search.
    Heuristic,
}

/// Violation indicators of one data point, in the order `(f1, b1, f2, b2)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PointFlags {
    pub ef1: bool,
    pub eb1: bool,
    pub ef2: bool,
    pub eb2: bool,
}

impl PointFlags {
    pub fn get(&self, link: Link, class: LaneClass) -> bool {
        match (link, class) {
            (Link::One, LaneClass::FeedThrough) => self.ef1,
            (Link::One, LaneClass::Bifurcating) => self.eb1,
            (Link::Two, LaneClass::FeedThrough) => self.ef2,
            (Link::Two, LaneClass::Bifurcating) => self.eb2,
        }
    }

    pub fn to_array(&self) -> [bool; 4] {
        [self.ef1, self.eb1, self.ef2, self.eb2]
    }

    pub fn count(&self) -> usize {
        self.to_array().iter().filter(|&&b| b).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViolationCount {
    pub count: usize,
    pub flags: Vec<PointFlags>,
    /// Sum of `product - epsilon` over the violated conditions.
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    pub coefficients: CostCoefficients,
    pub violations: usize,
    pub indicator_assignment: Vec<PointFlags>,
    pub certificate: Certificate,
    pub uniqueness: UniquenessCheck,
    /// Tie-break score: summed excess of the violated products.
    pub excess: f64,
}

impl CalibrationResult {
    pub(crate) fn from_count(coefficients: CostCoefficients, count: ViolationCount, certificate: Certificate) -> Self {
        CalibrationResult {
            coefficients,
            violations: count.count,
            indicator_assignment: count.flags,
            certificate,
            uniqueness: check_uniqueness_condition(&coefficients),
            excess: count.excess,
        }
    }
}

/// Counts the Wardrop conditions violated by `data` under coefficients `c`:
/// a condition is violated when its product exceeds `epsilon`.
pub fn count_violations(c: &CostCoefficients, data: &[DataPoint], epsilon: f64) -> Result<ViolationCount> {
    if data.is_empty() {
        return Err(Error::Argument("dataset is empty".into()));
    }
    for (k, p) in data.iter().enumerate() {
        p.flow
            .check_feasible(&p.demand, FEASIBILITY_TOL)
            .map_err(|e| Error::DataPoint { index: k + 1, reason: e.to_string() })?;
    }
    Ok(count_unchecked(c, data, epsilon))
}

pub(crate) fn count_unchecked(c: &CostCoefficients, data: &[DataPoint], epsilon: f64) -> ViolationCount {
    let mut count = 0;
    let mut excess = 0.0;
    let flags = data
        .iter()
        .map(|p| {
            let r = residuals_unchecked(c, &p.flow).to_array();
            let e = r.map(|v| v > epsilon);
            for (v, flagged) in r.iter().zip(e) {
                if flagged {
                    count += 1;
                    excess += v - epsilon;
                }
            }
            PointFlags { ef1: e[0], eb1: e[1], ef2: e[2], eb2: e[3] }
        })
        .collect();
    ViolationCount { count, flags, excess }
}

/// Runs the solver selected in `opts`.
pub fn calibrate(data: &[DataPoint], opts: &CalibrationOptions) -> Result<CalibrationResult> {
    match opts.solver {
        SolverKind::Exact => calibrate_exact(data, opts),
        SolverKind::Heuristic => calibrate_search(data, opts),
    }
}

/// A point-link pair whose two conditions are kept or dropped together.
///
/// With both shares positive the feed-through and bifurcating products have
/// opposite signs, so at most one of them can exceed a non-negative margin:
/// either the pair is satisfied or exactly one condition is violated. Pairs
/// with a zero share reduce to a single condition, and a link without demand
/// contributes nothing.
#[derive(Clone, Debug)]
pub(crate) struct ConditionUnit {
    pub rows: Vec<Vec<f64>>,
}

pub(crate) fn condition_units(space: &CoefficientSpace, data: &[DataPoint]) -> Vec<ConditionUnit> {
    let mut units = Vec::new();
    for p in data {
        for link in Link::BOTH {
            let rows: Vec<Vec<f64>> = [LaneClass::FeedThrough, LaneClass::Bifurcating]
                .into_iter()
                .filter(|&class| p.flow.share(link, class) > 0.0)
                .map(|class| space.product_row(&p.flow, link, class))
                .collect();
            if !rows.is_empty() {
                units.push(ConditionUnit { rows });
            }
        }
    }
    units
}

pub(crate) fn check_data(data: &[DataPoint]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Argument("dataset is empty".into()));
    }
    for (k, p) in data.iter().enumerate() {
        p.flow
            .check_feasible(&p.demand, FEASIBILITY_TOL)
            .map_err(|e| Error::DataPoint { index: k + 1, reason: e.to_string() })?;
    }
    Ok(())
}
