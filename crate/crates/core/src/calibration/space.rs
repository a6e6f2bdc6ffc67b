//! Linear parameterisation of the calibration problem.
//!
//! The bifurcating cost contains the products `cb * lambda_i` and
//! `cb * mu_i`, so the Wardrop products are not linear in the raw
//! coefficients. They are linear in
//! `theta = (cf1, cf2, cb, a1, a2, b1, b2, nu)` with `a_i = cb * lambda_i`
//! and `b_i = cb * mu_i`; the capacity-factor bounds `lo <= lambda_i <= hi`
//! become the linear rows `lo * cb <= a_i <= hi * cb`. Under the symmetry
//! constraints the vector collapses to `theta = (c, a, b, nu)`.

use crate::model::{CostCoefficients, FlowDistribution, LaneClass, Link};

use super::CoefficientBounds;

/// A linear inequality `coeffs . theta <= rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn activity(&self, theta: &[f64]) -> f64 {
        dot(&self.coeffs, theta)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug)]
pub struct CoefficientSpace {
    symmetric: bool,
    bounds: CoefficientBounds,
}

const FULL_NAMES: [&str; 8] = ["cf1", "cf2", "cb", "cb*lambda1", "cb*lambda2", "cb*mu1", "cb*mu2", "nu"];
const SYMMETRIC_NAMES: [&str; 4] = ["c", "c*lambda", "c*mu", "nu"];

impl CoefficientSpace {
    pub fn new(symmetric: bool, bounds: CoefficientBounds) -> Self {
        CoefficientSpace { symmetric, bounds }
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn dim(&self) -> usize {
        if self.symmetric {
            4
        } else {
            8
        }
    }

    pub fn names(&self) -> &'static [&'static str] {
        if self.symmetric {
            &SYMMETRIC_NAMES
        } else {
            &FULL_NAMES
        }
    }

    fn cf_index(&self, link: Link) -> usize {
        match (self.symmetric, link) {
            (true, _) => 0,
            (false, Link::One) => 0,
            (false, Link::Two) => 1,
        }
    }

    fn a_index(&self, link: Link) -> usize {
        match (self.symmetric, link) {
            (true, _) => 1,
            (false, Link::One) => 3,
            (false, Link::Two) => 4,
        }
    }

    fn b_index(&self, link: Link) -> usize {
        match (self.symmetric, link) {
            (true, _) => 2,
            (false, Link::One) => 5,
            (false, Link::Two) => 6,
        }
    }

    fn cb_index(&self) -> usize {
        if self.symmetric {
            0
        } else {
            2
        }
    }

    fn nu_index(&self) -> usize {
        self.dim() - 1
    }

    /// Rate bounds (cf, cb) folded into the shared rate under symmetry.
    fn rate_bounds(&self, idx: usize) -> (f64, f64) {
        let (lo, hi) = (&self.bounds.lower, &self.bounds.upper);
        if self.symmetric {
            (lo[0].max(lo[1]).max(lo[2]), hi[0].min(hi[1]).min(hi[2]))
        } else {
            (lo[idx], hi[idx])
        }
    }

    /// `(lo, hi)` of `lambda_link` (`cross = false`) or `mu_link` (`cross = true`).
    fn factor_bounds(&self, link: Link, cross: bool) -> (f64, f64) {
        let (lo, hi) = (&self.bounds.lower, &self.bounds.upper);
        let base = if cross { 5 } else { 3 };
        if self.symmetric {
            (lo[base].max(lo[base + 1]), hi[base].min(hi[base + 1]))
        } else {
            let k = base + link.index() - 1;
            (lo[k], hi[k])
        }
    }

    /// Simple bounds on each component of theta.
    pub fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lower = vec![0.0; self.dim()];
        let mut upper = vec![0.0; self.dim()];
        let rate_slots: &[usize] = if self.symmetric { &[0] } else { &[0, 1, 2] };
        for &k in rate_slots {
            let (lo, hi) = self.rate_bounds(k);
            lower[k] = lo;
            upper[k] = hi;
        }
        let (_, cb_hi) = self.rate_bounds(2);
        for link in Link::BOTH {
            for cross in [false, true] {
                let idx = if cross { self.b_index(link) } else { self.a_index(link) };
                let (_, hi) = self.factor_bounds(link, cross);
                lower[idx] = 0.0;
                upper[idx] = hi * cb_hi;
            }
        }
        let nu = self.nu_index();
        lower[nu] = self.bounds.lower[7];
        upper[nu] = self.bounds.upper[7];
        (lower, upper)
    }

    /// Rows tying `a_i`, `b_i` to `cb` through the capacity-factor bounds.
    pub fn coupling_rows(&self) -> Vec<LinearRow> {
        let mut rows = Vec::new();
        let links: &[Link] = if self.symmetric { &[Link::One] } else { &Link::BOTH };
        for &link in links {
            for cross in [false, true] {
                let idx = if cross { self.b_index(link) } else { self.a_index(link) };
                let (lo, hi) = self.factor_bounds(link, cross);
                // a - hi * cb <= 0
                let mut upper = vec![0.0; self.dim()];
                upper[idx] = 1.0;
                upper[self.cb_index()] = -hi;
                rows.push(LinearRow { coeffs: upper, rhs: 0.0 });
                // lo * cb - a <= 0
                let mut lower = vec![0.0; self.dim()];
                lower[idx] = -1.0;
                lower[self.cb_index()] = lo;
                rows.push(LinearRow { coeffs: lower, rhs: 0.0 });
            }
        }
        rows
    }

    /// Coefficient vector `r` with `r . theta` equal to the Wardrop product of
    /// `class` on `link` for the observed flow `x`.
    pub fn product_row(&self, x: &FlowDistribution, link: Link, class: LaneClass) -> Vec<f64> {
        let xf = x.xf(link);
        let xb = x.xb(link);
        let xo = x.xb(link.other());
        // gap = cf xf - a xb - b xo - nu xb xo
        let mut gap = vec![0.0; self.dim()];
        gap[self.cf_index(link)] += xf;
        gap[self.a_index(link)] -= xb;
        gap[self.b_index(link)] -= xo;
        gap[self.nu_index()] -= xb * xo;
        let weight = match class {
            LaneClass::FeedThrough => xf,
            LaneClass::Bifurcating => -xb,
        };
        gap.iter().map(|g| weight * g).collect()
    }

    /// Maps theta back to cost coefficients, clamping capacity factors into
    /// their bounds to absorb rounding in the ratios.
    pub fn to_coefficients(&self, theta: &[f64]) -> CostCoefficients {
        let cb = theta[self.cb_index()];
        let factor = |link: Link, cross: bool| {
            let idx = if cross { self.b_index(link) } else { self.a_index(link) };
            let (lo, hi) = self.factor_bounds(link, cross);
            (theta[idx] / cb).clamp(lo, hi)
        };
        CostCoefficients {
            cf1: theta[self.cf_index(Link::One)],
            cf2: theta[self.cf_index(Link::Two)],
            cb,
            lambda1: factor(Link::One, false),
            lambda2: factor(Link::Two, false),
            mu1: factor(Link::One, true),
            mu2: factor(Link::Two, true),
            nu: theta[self.nu_index()],
        }
    }

    /// Inverse of [`to_coefficients`](Self::to_coefficients). Under symmetry
    /// the link-1 values are used.
    pub fn from_coefficients(&self, c: &CostCoefficients) -> Vec<f64> {
        if self.symmetric {
            vec![c.cf1, c.cf1 * c.lambda1, c.cf1 * c.mu1, c.nu]
        } else {
            vec![c.cf1, c.cf2, c.cb, c.cb * c.lambda1, c.cb * c.lambda2, c.cb * c.mu1, c.cb * c.mu2, c.nu]
        }
    }

    /// Free search coordinates in coefficient units: `(rate, lambda, mu, nu)`
    /// under symmetry, otherwise all eight coefficients.
    pub fn search_dim(&self) -> usize {
        self.dim()
    }

    pub fn search_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        if self.symmetric {
            let (rlo, rhi) = self.rate_bounds(0);
            let (llo, lhi) = self.factor_bounds(Link::One, false);
            let (mlo, mhi) = self.factor_bounds(Link::One, true);
            (vec![rlo, llo, mlo, self.bounds.lower[7]], vec![rhi, lhi, mhi, self.bounds.upper[7]])
        } else {
            (self.bounds.lower.to_vec(), self.bounds.upper.to_vec())
        }
    }

    pub fn search_to_coefficients(&self, v: &[f64]) -> CostCoefficients {
        if self.symmetric {
            CostCoefficients {
                cf1: v[0],
                cf2: v[0],
                cb: v[0],
                lambda1: v[1],
                lambda2: v[1],
                mu1: v[2],
                mu2: v[2],
                nu: v[3],
            }
        } else {
            let mut a = [0.0; 8];
            a.copy_from_slice(v);
            CostCoefficients::from_array(a)
        }
    }

    pub fn coefficients_to_search(&self, c: &CostCoefficients) -> Vec<f64> {
        if self.symmetric {
            vec![c.cf1, c.lambda1, c.mu1, c.nu]
        } else {
            c.to_array().to_vec()
        }
    }
}
