//! Diverge model: demand shares, cost coefficients, flow distributions and
//! the Wardrop conditions that tie them together.
//!
//! A diverge has one entry link with three lanes and two exit links. Lane `a`
//! feeds exit 1 only, lane `c` feeds exit 2 only, and the middle lane `b`
//! bifurcates and may serve either exit. Traffic bound for exit `i` splits into
//! a feed-through share `xf_i` and a bifurcating share `xb_i`.

use crate::error::{Error, Result};

/// Absolute tolerance for conservation and equality checks.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Default tolerance when certifying a Wardrop equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

/// Smallest admissible capacity factor (lambda, mu).
pub const MIN_CAPACITY_FACTOR: f64 = 1e-9;

/// One of the two exit links.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Link {
    One,
    Two,
}

impl Link {
    pub const BOTH: [Link; 2] = [Link::One, Link::Two];

    /// Parses a 1-based link index.
    pub fn from_index(index: usize) -> Result<Link> {
        match index {
            1 => Ok(Link::One),
            2 => Ok(Link::Two),
            _ => Err(Error::Argument(format!("link index must be 1 or 2, got {index}"))),
        }
    }

    /// 1-based index.
    pub fn index(self) -> usize {
        match self {
            Link::One => 1,
            Link::Two => 2,
        }
    }

    pub fn other(self) -> Link {
        match self {
            Link::One => Link::Two,
            Link::Two => Link::One,
        }
    }
}

/// Which entry lane a class of drivers uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LaneClass {
    FeedThrough,
    Bifurcating,
}

/// Normalised demand `(q1, q2)` over the two exit links.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemandConfig {
    q1: f64,
    q2: f64,
}

impl DemandConfig {
    pub fn new(q1: f64, q2: f64) -> Result<Self> {
        if !(q1.is_finite() && q2.is_finite()) {
            return Err(Error::Argument(format!("demand shares must be finite, got ({q1}, {q2})")));
        }
        if q1 < 0.0 || q2 < 0.0 {
            return Err(Error::Argument(format!("demand shares must be non-negative, got ({q1}, {q2})")));
        }
        if (q1 + q2 - 1.0).abs() > FEASIBILITY_TOL {
            return Err(Error::Argument(format!("demand shares must sum to 1, got {q1} + {q2} = {}", q1 + q2)));
        }
        Ok(DemandConfig { q1, q2 })
    }

    /// `q2` is taken as `1 - q1`.
    pub fn from_q1(q1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q1) {
            return Err(Error::Argument(format!("q1 must lie in [0, 1], got {q1}")));
        }
        Self::new(q1, 1.0 - q1)
    }

    /// Normalises raw per-link demands `d1, d2` (any unit, e.g. vph).
    pub fn from_demands(d1: f64, d2: f64) -> Result<Self> {
        let total = d1 + d2;
        if !(total > 0.0) || d1 < 0.0 || d2 < 0.0 {
            return Err(Error::Argument(format!("demands must be non-negative with a positive total, got ({d1}, {d2})")));
        }
        let q1 = d1 / total;
        Self::new(q1, 1.0 - q1)
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    pub fn q2(&self) -> f64 {
        self.q2
    }

    pub fn q(&self, link: Link) -> f64 {
        match link {
            Link::One => self.q1,
            Link::Two => self.q2,
        }
    }
}

/// Cost coefficient vector of a diverge.
///
/// `cf1`, `cf2` scale the feed-through costs, `cb` the bifurcating-lane cost,
/// `lambda_i` / `mu_i` are the same- and cross-destination capacity factors
/// and `nu` penalises destination heterogeneity on the bifurcating lane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostCoefficients {
    pub cf1: f64,
    pub cf2: f64,
    pub cb: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub nu: f64,
}

/// Field names in canonical order, matching [`CostCoefficients::to_array`].
pub const COEFFICIENT_NAMES: [&str; 8] = ["cf1", "cf2", "cb", "lambda1", "lambda2", "mu1", "mu2", "nu"];

impl CostCoefficients {
    /// Builds a validated coefficient vector.
    #[allow(clippy::too_many_arguments)]
    pub fn new(cf1: f64, cf2: f64, cb: f64, lambda1: f64, lambda2: f64, mu1: f64, mu2: f64, nu: f64) -> Result<Self> {
        let c = CostCoefficients { cf1, cf2, cb, lambda1, lambda2, mu1, mu2, nu };
        c.validate()?;
        Ok(c)
    }

    /// Symmetric diverge: `cf1 = cf2 = cb = rate`, shared `lambda`, `mu`.
    pub fn symmetric(rate: f64, lambda: f64, mu: f64, nu: f64) -> Result<Self> {
        Self::new(rate, rate, rate, lambda, lambda, mu, mu, nu)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in COEFFICIENT_NAMES.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(Error::Coefficients(format!("{name} must be finite, got {v}")));
            }
        }
        for (name, v) in [("cf1", self.cf1), ("cf2", self.cf2), ("cb", self.cb), ("nu", self.nu)] {
            if v <= 0.0 {
                return Err(Error::Coefficients(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("mu1", self.mu1), ("mu2", self.mu2)] {
            if !(MIN_CAPACITY_FACTOR..=1.0).contains(&v) {
                return Err(Error::Coefficients(format!("{name} must lie in [{MIN_CAPACITY_FACTOR}, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn cf(&self, link: Link) -> f64 {
        match link {
            Link::One => self.cf1,
            Link::Two => self.cf2,
        }
    }

    pub fn lambda(&self, link: Link) -> f64 {
        match link {
            Link::One => self.lambda1,
            Link::Two => self.lambda2,
        }
    }

    pub fn mu(&self, link: Link) -> f64 {
        match link {
            Link::One => self.mu1,
            Link::Two => self.mu2,
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [self.cf1, self.cf2, self.cb, self.lambda1, self.lambda2, self.mu1, self.mu2, self.nu]
    }

    /// Inverse of [`to_array`](Self::to_array); does not validate.
    pub fn from_array(a: [f64; 8]) -> Self {
        CostCoefficients { cf1: a[0], cf2: a[1], cb: a[2], lambda1: a[3], lambda2: a[4], mu1: a[5], mu2: a[6], nu: a[7] }
    }

    pub fn is_symmetric(&self) -> bool {
        self.cf1 == self.cf2 && self.cf1 == self.cb && self.lambda1 == self.lambda2 && self.mu1 == self.mu2
    }
}

/// Shares of the four driver classes, as fractions of total demand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowDistribution {
    xf1: f64,
    xb1: f64,
    xf2: f64,
    xb2: f64,
}

impl FlowDistribution {
    /// Builds a flow that is feasible for `demand` or fails naming the violated constraint.
    pub fn new(demand: &DemandConfig, xf1: f64, xb1: f64, xf2: f64, xb2: f64) -> Result<Self> {
        let x = FlowDistribution { xf1, xb1, xf2, xb2 };
        x.check_feasible(demand, FEASIBILITY_TOL)?;
        Ok(x)
    }

    /// Feed-through shares are derived as `q_i - xb_i`.
    pub fn from_bifurcating(demand: &DemandConfig, xb1: f64, xb2: f64) -> Result<Self> {
        Self::new(demand, demand.q1() - xb1, xb1, demand.q2() - xb2, xb2)
    }

    pub(crate) fn from_parts_unchecked(xf1: f64, xb1: f64, xf2: f64, xb2: f64) -> Self {
        FlowDistribution { xf1, xb1, xf2, xb2 }
    }

    pub fn xf(&self, link: Link) -> f64 {
        match link {
            Link::One => self.xf1,
            Link::Two => self.xf2,
        }
    }

    pub fn xb(&self, link: Link) -> f64 {
        match link {
            Link::One => self.xb1,
            Link::Two => self.xb2,
        }
    }

    pub fn share(&self, link: Link, class: LaneClass) -> f64 {
        match class {
            LaneClass::FeedThrough => self.xf(link),
            LaneClass::Bifurcating => self.xb(link),
        }
    }

    pub fn xf1(&self) -> f64 {
        self.xf1
    }
    pub fn xb1(&self) -> f64 {
        self.xb1
    }
    pub fn xf2(&self) -> f64 {
        self.xf2
    }
    pub fn xb2(&self) -> f64 {
        self.xb2
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.xf1, self.xb1, self.xf2, self.xb2]
    }

    /// Checks non-negativity and conservation against `demand` within `tol`.
    pub fn check_feasible(&self, demand: &DemandConfig, tol: f64) -> Result<()> {
        for (name, v) in [("xf1", self.xf1), ("xb1", self.xb1), ("xf2", self.xf2), ("xb2", self.xb2)] {
            if !v.is_finite() {
                return Err(Error::Infeasible(format!("{name} is not finite ({v})")));
            }
            if v < -tol {
                return Err(Error::Infeasible(format!("{name} = {v} is negative")));
            }
        }
        for link in Link::BOTH {
            let i = link.index();
            let total = self.xf(link) + self.xb(link);
            let q = demand.q(link);
            if (total - q).abs() > tol {
                return Err(Error::Infeasible(format!(
                    "conservation on link {i}: xf{i} + xb{i} = {total} but q{i} = {q}"
                )));
            }
        }
        Ok(())
    }
}

/// A configured diverge: demand plus cost coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergeInstance {
    pub demand: DemandConfig,
    pub costs: CostCoefficients,
}

impl DivergeInstance {
    pub fn new(demand: DemandConfig, costs: CostCoefficients) -> Result<Self> {
        costs.validate()?;
        Ok(DivergeInstance { demand, costs })
    }
}

/// Feed-through and bifurcating costs for `link` evaluated on raw shares
/// `(xf1, xb1, xf2, xb2)`, without a conservation check.
pub fn lane_costs(c: &CostCoefficients, shares: [f64; 4], link: Link) -> (f64, f64) {
    let (xf, own, cross) = match link {
        Link::One => (shares[0], shares[1], shares[3]),
        Link::Two => (shares[2], shares[3], shares[1]),
    };
    let jf = c.cf(link) * xf;
    let jb = c.cb * (c.lambda(link) * own + c.mu(link) * cross) + c.nu * own * cross;
    (jf, jb)
}

/// Cost seen by feed-through users bound for `link`: `cf_i * xf_i`.
pub fn feed_through_cost(c: &CostCoefficients, x: &FlowDistribution, link: Link) -> f64 {
    lane_costs(c, x.to_array(), link).0
}

/// Cost seen by bifurcating-lane users bound for `link`:
/// `cb * (lambda_i * xb_i + mu_i * xb_j) + nu * xb_i * xb_j`.
pub fn bifurcating_cost(c: &CostCoefficients, x: &FlowDistribution, link: Link) -> f64 {
    lane_costs(c, x.to_array(), link).1
}

/// Index-based variant of [`feed_through_cost`] for 1-based link numbers.
pub fn feed_through_cost_at(c: &CostCoefficients, x: &FlowDistribution, link: usize) -> Result<f64> {
    Ok(feed_through_cost(c, x, Link::from_index(link)?))
}

/// Index-based variant of [`bifurcating_cost`] for 1-based link numbers.
pub fn bifurcating_cost_at(c: &CostCoefficients, x: &FlowDistribution, link: usize) -> Result<f64> {
    Ok(bifurcating_cost(c, x, Link::from_index(link)?))
}

/// Left-hand sides of the four Wardrop inequalities. Each must be `<= 0`
/// at an equilibrium.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WardropResiduals {
    pub rf1: f64,
    pub rb1: f64,
    pub rf2: f64,
    pub rb2: f64,
}

impl WardropResiduals {
    pub fn get(&self, link: Link, class: LaneClass) -> f64 {
        match (link, class) {
            (Link::One, LaneClass::FeedThrough) => self.rf1,
            (Link::One, LaneClass::Bifurcating) => self.rb1,
            (Link::Two, LaneClass::FeedThrough) => self.rf2,
            (Link::Two, LaneClass::Bifurcating) => self.rb2,
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.rf1, self.rb1, self.rf2, self.rb2]
    }

    /// Largest residual (the binding one).
    pub fn max(&self) -> f64 {
        self.to_array().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sum of the positive parts.
    pub fn positive_sum(&self) -> f64 {
        self.to_array().into_iter().map(|r| r.max(0.0)).sum()
    }
}

/// Residuals without a feasibility check; used on hot paths where the flow
/// is feasible by construction.
pub(crate) fn residuals_unchecked(c: &CostCoefficients, x: &FlowDistribution) -> WardropResiduals {
    let gap = |link| feed_through_cost(c, x, link) - bifurcating_cost(c, x, link);
    let g1 = gap(Link::One);
    let g2 = gap(Link::Two);
    WardropResiduals { rf1: x.xf1 * g1, rb1: -x.xb1 * g1, rf2: x.xf2 * g2, rb2: -x.xb2 * g2 }
}

/// Evaluates `xf_i (Jf_i - Jb_i)` and `xb_i (Jb_i - Jf_i)` for both links.
pub fn wardrop_residuals(g: &DivergeInstance, x: &FlowDistribution) -> Result<WardropResiduals> {
    x.check_feasible(&g.demand, FEASIBILITY_TOL)?;
    Ok(residuals_unchecked(&g.costs, x))
}

/// True iff `x` is feasible within `tol` and every residual is `<= tol`.
pub fn is_wardrop_equilibrium(g: &DivergeInstance, x: &FlowDistribution, tol: f64) -> Result<bool> {
    if !(tol >= 0.0) {
        return Err(Error::Argument(format!("tolerance must be non-negative, got {tol}")));
    }
    if x.check_feasible(&g.demand, tol.max(FEASIBILITY_TOL)).is_err() {
        return Ok(false);
    }
    Ok(residuals_unchecked(&g.costs, x).max() <= tol)
}

/// Per-link outcome of the sufficient uniqueness condition
/// `(lambda_i - mu_i) cb >= nu - cf_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniquenessCheck {
    /// `(lambda_i - mu_i) cb - (nu - cf_i)` for links 1 and 2.
    pub margins: [f64; 2],
    pub holds: [bool; 2],
}

impl UniquenessCheck {
    pub fn both(&self) -> bool {
        self.holds[0] && self.holds[1]
    }
}

pub fn uniqueness_margin(c: &CostCoefficients, link: Link) -> f64 {
    (c.lambda(link) - c.mu(link)) * c.cb - (c.nu - c.cf(link))
}

pub fn check_uniqueness_condition(c: &CostCoefficients) -> UniquenessCheck {
    let margins = [uniqueness_margin(c, Link::One), uniqueness_margin(c, Link::Two)];
    // equality is admitted up to rounding
    let holds = margins.map(|m| m >= -FEASIBILITY_TOL);
    UniquenessCheck { margins, holds }
}
