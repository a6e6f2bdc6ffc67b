//! Min-max linear program over the coefficient box.
//!
//! Given product rows `r_1 .. r_m`, finds `theta` in the box (with the
//! coupling rows) minimising `max_k r_k . theta`. A set of conditions can be
//! satisfied together exactly when that minimum is at most `epsilon`.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

use crate::error::{Error, Result};

use super::space::{dot, CoefficientSpace};

#[derive(Clone, Debug)]
pub(crate) struct MinMax {
    pub theta: Vec<f64>,
    /// Largest product at `theta`, evaluated directly; `-inf` without rows.
    pub worst: f64,
}

pub(crate) fn min_max_product(space: &CoefficientSpace, rows: &[&[f64]], big_m: f64) -> Result<MinMax> {
    let (lower, upper) = space.variable_bounds();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = lower.iter().zip(&upper).map(|(&lo, &hi)| lp.add_var(0.0, (lo, hi))).collect();
    let t = lp.add_var(if rows.is_empty() { 0.0 } else { 1.0 }, (-big_m, big_m));
    for row in space.coupling_rows() {
        let mut e = LinearExpr::empty();
        for (&v, &a) in vars.iter().zip(&row.coeffs) {
            if a != 0.0 {
                e.add(v, a);
            }
        }
        lp.add_constraint(e, ComparisonOp::Le, row.rhs);
    }
    for row in rows {
        let mut e = LinearExpr::empty();
        for (&v, &a) in vars.iter().zip(row.iter()) {
            if a != 0.0 {
                e.add(v, a);
            }
        }
        e.add(t, -1.0);
        lp.add_constraint(e, ComparisonOp::Le, 0.0);
    }
    let sol = lp.solve().map_err(|e| match e {
        minilp::Error::Infeasible => Error::Config("coefficient bounds admit no feasible point".into()),
        other => Error::Lp(other.to_string()),
    })?;
    let theta: Vec<f64> = vars
        .iter()
        .zip(lower.iter().zip(&upper))
        .map(|(&v, (&lo, &hi))| sol[v].clamp(lo, hi))
        .collect();
    let worst = rows.iter().map(|r| dot(r, &theta)).fold(f64::NEG_INFINITY, f64::max);
    Ok(MinMax { theta, worst })
}

/// A witness satisfying every row to within `epsilon`, if one exists.
pub(crate) fn feasible_point(
    space: &CoefficientSpace,
    rows: &[&[f64]],
    epsilon: f64,
    big_m: f64,
) -> Result<Option<Vec<f64>>> {
    let mm = min_max_product(space, rows, big_m)?;
    Ok((mm.worst <= epsilon).then_some(mm.theta))
}
