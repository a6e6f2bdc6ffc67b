//! Equilibrium computation through the auxiliary two-player game.
//!
//! Player `i` picks its bifurcating share `y_i = xb_i` in `[0, q_i]` and pays
//! the squared gap between its feed-through and bifurcating costs. With the
//! feed-through share eliminated through conservation, the gap is linear in
//! `y_i`, so the best response has a closed form: the root of the gap clipped
//! to the action set. Pure Nash equilibria of this game are exactly the
//! Wardrop equilibria of the diverge.

use crate::error::{Error, Result};
use crate::model::{
    residuals_unchecked, CostCoefficients, DemandConfig, DivergeInstance, FlowDistribution, Link, WardropResiduals,
};

/// Actions of the auxiliary game, `y_i` in `[0, q_i]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxiliaryAction {
    pub y1: f64,
    pub y2: f64,
}

impl AuxiliaryAction {
    pub fn new(demand: &DemandConfig, y1: f64, y2: f64) -> Result<Self> {
        for (link, y) in [(Link::One, y1), (Link::Two, y2)] {
            let q = demand.q(link);
            if !(0.0..=q).contains(&y) {
                return Err(Error::Argument(format!("y{} = {y} outside [0, {q}]", link.index())));
            }
        }
        Ok(AuxiliaryAction { y1, y2 })
    }

    pub fn get(&self, link: Link) -> f64 {
        match link {
            Link::One => self.y1,
            Link::Two => self.y2,
        }
    }

    fn flow(&self, demand: &DemandConfig) -> FlowDistribution {
        FlowDistribution::from_parts_unchecked(demand.q1() - self.y1, self.y1, demand.q2() - self.y2, self.y2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Bound on the per-sweep change of `y` and, scaled by the largest
    /// coefficient (at least 1), on every residual at exit.
    pub convergence_tol: f64,
    /// Weight of the new best response in `y <- (1 - d) y + d B(y_other)`.
    pub damping: f64,
    /// Step of the brute-force oracle grid.
    pub grid_resolution: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iterations: 10_000, convergence_tol: 1e-12, damping: 0.5, grid_resolution: 1e-3 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Argument("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Argument(format!("convergence_tol must be positive, got {}", self.convergence_tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Argument(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.grid_resolution > 0.0) {
            return Err(Error::Argument(format!("grid_resolution must be positive, got {}", self.grid_resolution)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumReport {
    pub flow: FlowDistribution,
    pub iterations: usize,
    pub residuals: WardropResiduals,
    pub converged: bool,
}

/// Gap `Jf_i - Jb_i` as a function of the two bifurcating shares, with
/// `xf_i = q_i - xb_i`.
fn cost_gap(c: &CostCoefficients, q_i: f64, own: f64, cross: f64, link: Link) -> f64 {
    c.cf(link) * (q_i - own) - (c.cb * (c.lambda(link) * own + c.mu(link) * cross) + c.nu * own * cross)
}

fn interior_root(c: &CostCoefficients, q_i: f64, x_j_b: f64, link: Link) -> f64 {
    let cf = c.cf(link);
    (cf * q_i - c.cb * c.mu(link) * x_j_b) / (cf + c.cb * c.lambda(link) + c.nu * x_j_b)
}

/// Best bifurcating share for `link` given the other link's bifurcating share.
pub fn best_response(c: &CostCoefficients, q_i: f64, x_j_b: f64, link: Link) -> f64 {
    interior_root(c, q_i, x_j_b, link).clamp(0.0, q_i.max(0.0))
}

/// `g(z) = B_i(B_j(z))` for player `i = link`.
pub fn composed_best_response(c: &CostCoefficients, demand: &DemandConfig, z: f64, link: Link) -> f64 {
    let other = link.other();
    let y_j = best_response(c, demand.q(other), z, other);
    best_response(c, demand.q(link), y_j, link)
}

/// Derivative of the interior best response with respect to the other
/// link's bifurcating share, from implicit differentiation of `Jf_i = Jb_i`.
pub fn best_response_slope(c: &CostCoefficients, q_i: f64, x_j_b: f64, link: Link) -> Result<f64> {
    let root = interior_root(c, q_i, x_j_b, link);
    if !(root > 0.0 && root < q_i) {
        return Err(Error::BoundaryBranch { link: link.index(), value: root.clamp(0.0, q_i.max(0.0)), demand: q_i });
    }
    Ok(-(c.cb * c.mu(link) + c.nu * root) / (c.cf(link) + c.cb * c.lambda(link) + c.nu * x_j_b))
}

/// Player cost of the auxiliary game: `(Jf_i - Jb_i)^2` at `xb = y`.
pub fn nash_player_cost(c: &CostCoefficients, q: &DemandConfig, y: &AuxiliaryAction, link: Link) -> f64 {
    let gap = cost_gap(c, q.q(link), y.get(link), y.get(link.other()), link);
    gap * gap
}

pub fn solve_fixed_point(g: &DivergeInstance, opts: &SolverOptions) -> Result<EquilibriumReport> {
    let start = AuxiliaryAction { y1: g.demand.q1() / 2.0, y2: g.demand.q2() / 2.0 };
    solve_fixed_point_from(g, opts, start)
}

/// Largest move, in units of the convergence tolerance, of the final undamped sweep.
const POLISH_REACH: f64 = 100.0;

/// Damped alternating best responses from a given starting action.
pub fn solve_fixed_point_from(
    g: &DivergeInstance,
    opts: &SolverOptions,
    start: AuxiliaryAction,
) -> Result<EquilibriumReport> {
    opts.validate()?;
    g.costs.validate()?;
    let c = &g.costs;
    let (q1, q2) = (g.demand.q1(), g.demand.q2());
    let d = opts.damping;
    let (mut y1, mut y2) = (start.y1.clamp(0.0, q1), start.y2.clamp(0.0, q2));

    // residuals carry the rounding error of the largest cost term
    let scale = c.to_array().into_iter().fold(1.0, f64::max);
    let mut iterations = 0;
    let mut residuals = residuals_unchecked(c, &AuxiliaryAction { y1, y2 }.flow(&g.demand));
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let n1 = ((1.0 - d) * y1 + d * best_response(c, q1, y2, Link::One)).clamp(0.0, q1);
        let n2 = ((1.0 - d) * y2 + d * best_response(c, q2, n1, Link::Two)).clamp(0.0, q2);
        let delta = (n1 - y1).abs().max((n2 - y2).abs());
        y1 = n1;
        y2 = n2;
        if delta <= opts.convergence_tol {
            // One undamped sweep lands clipped shares exactly on their bounds.
            let p1 = best_response(c, q1, y2, Link::One);
            let p2 = best_response(c, q2, p1, Link::Two);
            residuals = residuals_unchecked(c, &AuxiliaryAction { y1, y2 }.flow(&g.demand));
            if (p1 - y1).abs().max((p2 - y2).abs()) <= POLISH_REACH * opts.convergence_tol {
                let polished = residuals_unchecked(c, &AuxiliaryAction { y1: p1, y2: p2 }.flow(&g.demand));
                if polished.max() <= residuals.max().max(opts.convergence_tol * scale) {
                    y1 = p1;
                    y2 = p2;
                    residuals = polished;
                }
            }
            if residuals.max() <= opts.convergence_tol * scale {
                converged = true;
                break;
            }
        }
    }
    let flow = AuxiliaryAction { y1, y2 }.flow(&g.demand);
    if !converged {
        residuals = residuals_unchecked(c, &flow);
    }
    Ok(EquilibriumReport { flow, iterations, residuals, converged })
}

/// Grid `{0, h, 2h, ..} ∪ {q}` over `[0, q]`; the singleton `{0}` when `q = 0`.
pub fn share_grid(q: f64, resolution: f64) -> Vec<f64> {
    if q <= 0.0 {
        return vec![0.0];
    }
    let steps = (q / resolution + 1e-9).floor() as usize;
    let mut pts: Vec<f64> = (0..=steps).map(|k| (k as f64 * resolution).min(q)).collect();
    if q - pts[pts.len() - 1] > 1e-12 {
        pts.push(q);
    }
    pts
}

/// Sum of the positive parts of the Wardrop residuals at `(xb1, xb2)`.
pub fn oracle_objective(g: &DivergeInstance, xb1: f64, xb2: f64) -> f64 {
    let x = FlowDistribution::from_parts_unchecked(g.demand.q1() - xb1, xb1, g.demand.q2() - xb2, xb2);
    residuals_unchecked(&g.costs, &x).positive_sum()
}

/// Exhaustive scan of the `(xb1, xb2)` grid for the point with the smallest
/// oracle objective. Ties go to the lexicographically smallest point.
pub fn solve_grid_oracle(g: &DivergeInstance, resolution: f64) -> Result<FlowDistribution> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::Argument(format!("grid resolution must be positive, got {resolution}")));
    }
    let grid1 = share_grid(g.demand.q1(), resolution);
    let grid2 = share_grid(g.demand.q2(), resolution);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &xb1 in &grid1 {
        for &xb2 in &grid2 {
            let obj = oracle_objective(g, xb1, xb2);
            if obj < best.0 {
                best = (obj, xb1, xb2);
            }
        }
    }
    FlowDistribution::from_bifurcating(&g.demand, best.1, best.2)
}

/// Number of roots of `g(z) - z` on a grid over `[0, q_i]`: sign changes plus
/// grid points where it vanishes.
pub fn count_fixed_point_crossings(c: &CostCoefficients, demand: &DemandConfig, link: Link, resolution: f64) -> usize {
    let mut crossings = 0;
    let mut prev: Option<f64> = None;
    for z in share_grid(demand.q(link), resolution) {
        let h = composed_best_response(c, demand, z, link) - z;
        if h == 0.0 {
            crossings += 1;
        } else if let Some(p) = prev {
            if p != 0.0 && p.signum() != h.signum() {
                crossings += 1;
            }
        }
        prev = Some(h);
    }
    crossings
}
