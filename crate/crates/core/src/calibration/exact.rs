//! Exact minimum-violation calibration by branch and bound.
//!
//! Branches on condition units (see [`ConditionUnit`]): a unit is either kept,
//! meaning all of its products must stay at or below `epsilon`, or dropped,
//! costing one violation. Each node asks a min-max LP whether the kept rows
//! are jointly satisfiable inside the coefficient box. Fixing a unit's two
//! binaries to (0, 0) is "keep"; the assignments (1, 0) and (0, 1) both cost
//! one and are dominated by "drop", and (1, 1) is infeasible for a
//! non-negative margin, so this tree covers the full binary search space.

use crate::error::{Error, Result};

use super::lp::{feasible_point, min_max_product};
use super::space::{dot, CoefficientSpace};
use super::{
    check_data, condition_units, count_unchecked, CalibrationOptions, CalibrationResult, Certificate, ConditionUnit,
    DataPoint,
};

pub fn calibrate_exact(data: &[DataPoint], opts: &CalibrationOptions) -> Result<CalibrationResult> {
    check_data(data)?;
    opts.validate()?;
    let binaries = 4 * data.len();
    if binaries > opts.max_binaries {
        return Err(Error::SolverGuard { binaries, limit: opts.max_binaries });
    }
    let space = opts.space();
    let units = condition_units(&space, data);
    // Surfaces an empty box before any branching.
    let start = min_max_product(&space, &[], opts.big_m)?;

    let mut search = Search {
        space: &space,
        units: &units,
        opts,
        best_dropped: units.len() + 1,
        best_theta: start.theta,
    };
    search.seed_incumbent()?;
    search.branch(0, &mut Vec::new(), 0)?;

    let coefficients = space.to_coefficients(&search.best_theta);
    let count = count_unchecked(&coefficients, data, opts.epsilon);
    Ok(CalibrationResult::from_count(coefficients, count, Certificate::Exact))
}

struct Search<'a> {
    space: &'a CoefficientSpace,
    units: &'a [ConditionUnit],
    opts: &'a CalibrationOptions,
    best_dropped: usize,
    best_theta: Vec<f64>,
}

impl Search<'_> {
    fn satisfied(&self, unit: &ConditionUnit, theta: &[f64]) -> bool {
        unit.rows.iter().all(|r| dot(r, theta) <= self.opts.epsilon)
    }

    fn rows_of<'u>(&'u self, kept: &[usize]) -> Vec<&'u [f64]> {
        kept.iter().flat_map(|&u| self.units[u].rows.iter().map(Vec::as_slice)).collect()
    }

    /// Units `from..` not satisfied at `theta`.
    fn misses_after(&self, from: usize, theta: &[f64]) -> usize {
        self.units[from..].iter().filter(|u| !self.satisfied(u, theta)).count()
    }

    fn offer(&mut self, dropped: usize, theta: &[f64]) {
        if dropped < self.best_dropped {
            self.best_dropped = dropped;
            self.best_theta = theta.to_vec();
        }
    }

    fn seed_incumbent(&mut self) -> Result<()> {
        let all: Vec<usize> = (0..self.units.len()).collect();
        let mm = min_max_product(self.space, &self.rows_of(&all), self.opts.big_m)?;
        let misses = self.misses_after(0, &mm.theta);
        self.offer(misses, &mm.theta);
        Ok(())
    }

    fn branch(&mut self, i: usize, kept: &mut Vec<usize>, dropped: usize) -> Result<()> {
        if dropped >= self.best_dropped {
            return Ok(());
        }
        if i == self.units.len() {
            let witness = feasible_point(self.space, &self.rows_of(kept), self.opts.epsilon, self.opts.big_m)?
                .ok_or_else(|| Error::Lp("kept set lost feasibility at a leaf".into()))?;
            self.offer(dropped, &witness);
            return Ok(());
        }
        kept.push(i);
        let witness = feasible_point(self.space, &self.rows_of(kept), self.opts.epsilon, self.opts.big_m)?;
        if let Some(theta) = witness {
            let misses = self.misses_after(i + 1, &theta);
            self.offer(dropped + misses, &theta);
            if misses > 0 {
                self.branch(i + 1, kept, dropped)?;
            }
        }
        kept.pop();
        if dropped + 1 < self.best_dropped {
            self.branch(i + 1, kept, dropped + 1)?;
        }
        Ok(())
    }
}
