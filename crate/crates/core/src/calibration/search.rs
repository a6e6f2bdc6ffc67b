//! Randomised multi-start search for a low-violation coefficient vector.
//!
//! Each start is drawn uniformly from the coefficient box and refined by a
//! shrinking-step coordinate search on `(count, excess)` in lexicographic
//! order. The best candidates are then repaired: starting from the condition
//! units they satisfy, the remaining units are added greedily whenever a
//! linear feasibility check still finds a witness. One more candidate comes
//! from peeling: solve the min-max LP over all units, drop the unit with the
//! largest product, and repeat until the rest is feasible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::CostCoefficients;

use super::lp::{feasible_point, min_max_product};
use super::space::{dot, CoefficientSpace};
use super::{
    check_data, condition_units, count_unchecked, CalibrationOptions, CalibrationResult, Certificate, ConditionUnit,
    DataPoint,
};

const REPAIRED_CANDIDATES: usize = 5;
const STEP_FRACTIONS: [f64; 6] = [0.25, 0.1, 0.03, 0.01, 0.003, 0.001];

#[derive(Clone, Debug)]
struct Candidate {
    v: Vec<f64>,
    count: usize,
    excess: f64,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.count, self.excess) < (other.count, other.excess)
            || ((self.count, self.excess) == (other.count, other.excess) && self.v < other.v)
    }
}

pub fn calibrate_search(data: &[DataPoint], opts: &CalibrationOptions) -> Result<CalibrationResult> {
    check_data(data)?;
    opts.validate()?;
    let space = opts.space();
    let (lo, hi) = space.search_bounds();
    let eval = |v: Vec<f64>| {
        let c = space.search_to_coefficients(&v);
        let n = count_unchecked(&c, data, opts.epsilon);
        Candidate { v, count: n.count, excess: n.excess }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pool: Vec<Candidate> = Vec::new();
    let restarts = opts.restarts.max(1);
    for r in 0..restarts {
        let start: Vec<f64> = if r == 0 {
            lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
        } else {
            lo.iter().zip(&hi).map(|(&a, &b)| if a < b { rng.random_range(a..=b) } else { a }).collect()
        };
        let refined = refine(eval(start), &lo, &hi, &eval);
        let done = refined.count == 0;
        pool.push(refined);
        if done {
            break;
        }
    }
    pool.sort_by(|a, b| (a.count, a.excess).partial_cmp(&(b.count, b.excess)).unwrap().then(a.v.partial_cmp(&b.v).unwrap()));
    let mut best = pool[0].clone();

    if best.count > 0 {
        let units = condition_units(&space, data);
        let peeled = peel(&space, &units, opts)?;
        if let Some(theta) = repair(&space, &units, &peeled, opts)? {
            let repaired = eval(space.coefficients_to_search(&space.to_coefficients(&theta)));
            if repaired.better_than(&best) {
                best = repaired;
            }
        }
        for cand in pool.iter().take(REPAIRED_CANDIDATES) {
            let theta = space.from_coefficients(&space.search_to_coefficients(&cand.v));
            if let Some(theta) = repair(&space, &units, &theta, opts)? {
                let c = space.to_coefficients(&theta);
                let repaired = eval(space.coefficients_to_search(&c));
                if repaired.better_than(&best) {
                    best = repaired;
                }
            }
        }
    }

    let coefficients: CostCoefficients = space.search_to_coefficients(&best.v);
    let count = count_unchecked(&coefficients, data, opts.epsilon);
    Ok(CalibrationResult::from_count(coefficients, count, Certificate::Heuristic))
}

fn refine(mut cur: Candidate, lo: &[f64], hi: &[f64], eval: &impl Fn(Vec<f64>) -> Candidate) -> Candidate {
    for frac in STEP_FRACTIONS {
        let mut improved = true;
        while improved && cur.count > 0 {
            improved = false;
            for k in 0..cur.v.len() {
                let step = frac * (hi[k] - lo[k]);
                if step == 0.0 {
                    continue;
                }
                for dir in [-1.0, 1.0] {
                    let mut v = cur.v.clone();
                    v[k] = (v[k] + dir * step).clamp(lo[k], hi[k]);
                    if v[k] == cur.v[k] {
                        continue;
                    }
                    let next = eval(v);
                    if (next.count, next.excess) < (cur.count, cur.excess) {
                        cur = next;
                        improved = true;
                    }
                }
            }
        }
    }
    cur
}

fn unit_worst(u: &ConditionUnit, theta: &[f64]) -> f64 {
    u.rows.iter().map(|r| dot(r, theta)).fold(f64::NEG_INFINITY, f64::max)
}

fn peel(space: &CoefficientSpace, units: &[ConditionUnit], opts: &CalibrationOptions) -> Result<Vec<f64>> {
    let mut kept: Vec<usize> = (0..units.len()).collect();
    loop {
        let rows: Vec<&[f64]> = kept.iter().flat_map(|&u| units[u].rows.iter().map(Vec::as_slice)).collect();
        let mm = min_max_product(space, &rows, opts.big_m)?;
        if mm.worst <= opts.epsilon || kept.is_empty() {
            return Ok(mm.theta);
        }
        let (pos, _) = kept
            .iter()
            .enumerate()
            .map(|(p, &u)| (p, unit_worst(&units[u], &mm.theta)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        kept.remove(pos);
    }
}

/// Greedily grows the set of units satisfied at `theta`, returning the witness
/// of the final set, or `None` if the initial set is not LP-feasible.
fn repair(
    space: &CoefficientSpace,
    units: &[ConditionUnit],
    theta: &[f64],
    opts: &CalibrationOptions,
) -> Result<Option<Vec<f64>>> {
    let mut kept: Vec<usize> = (0..units.len()).filter(|&u| unit_worst(&units[u], theta) <= opts.epsilon).collect();
    let mut rest: Vec<usize> = (0..units.len()).filter(|u| !kept.contains(u)).collect();
    // least-violated units first
    rest.sort_by(|&a, &b| unit_worst(&units[a], theta).partial_cmp(&unit_worst(&units[b], theta)).unwrap());
    let rows = |kept: &[usize]| -> Vec<&[f64]> {
        kept.iter().flat_map(|&u| units[u].rows.iter().map(Vec::as_slice)).collect()
    };
    let Some(mut witness) = feasible_point(space, &rows(&kept), opts.epsilon, opts.big_m)? else {
        return Ok(None);
    };
    for u in rest {
        if unit_worst(&units[u], &witness) <= opts.epsilon {
            kept.push(u);
            continue;
        }
        kept.push(u);
        match feasible_point(space, &rows(&kept), opts.epsilon, opts.big_m)? {
            Some(w) => witness = w,
            None => {
                kept.pop();
            }
        }
    }
    Ok(Some(witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::calibrate_exact;
    use crate::calibration::tests::equilibrium_point;
    use crate::model::FlowDistribution;

    fn reference() -> CostCoefficients {
        CostCoefficients::symmetric(1.45, 0.87, 0.69, 1.0).unwrap()
    }

    #[test]
    fn noiseless_sweep_reaches_zero() {
        let data: Vec<_> = (0..15).map(|k| equilibrium_point(&reference(), (1150.0 + 50.0 * k as f64) / 3000.0)).collect();
        let r = calibrate_search(&data, &CalibrationOptions { symmetry: true, ..Default::default() }).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.certificate, Certificate::Heuristic);
    }

    #[test]
    fn single_point_within_ten_restarts() {
        let data = vec![equilibrium_point(&reference(), 0.45)];
        let opts = CalibrationOptions { restarts: 10, ..Default::default() };
        assert_eq!(calibrate_search(&data, &opts).unwrap().violations, 0);
        assert_eq!(calibrate_exact(&data, &opts).unwrap().violations, 0);
    }

    #[test]
    fn deterministic_and_never_below_exact() {
        let mut data: Vec<_> = [0.4, 0.5, 0.6].iter().map(|&q| equilibrium_point(&reference(), q)).collect();
        let eq = equilibrium_point(&reference(), 1.0);
        let x = FlowDistribution::from_bifurcating(&eq.demand, eq.flow.xb1() + 0.2, 0.0).unwrap();
        data.push(DataPoint::new(eq.demand, x, 3000.0).unwrap());
        let opts = CalibrationOptions { symmetry: true, restarts: 20, ..Default::default() };
        let a = calibrate_search(&data, &opts).unwrap();
        let b = calibrate_search(&data, &opts).unwrap();
        assert_eq!(a, b);
        let exact = calibrate_exact(&data, &opts).unwrap();
        assert!(a.violations >= exact.violations);
        assert_eq!(a.violations, 1);
    }
}
