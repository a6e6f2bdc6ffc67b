//! Explicit big-M mixed-integer formulation.
//!
//! For each data point and condition with product `p(theta)` and binary `e`:
//!
//! ```text
//!  p - T e <= eps          e = 0  =>  p <= eps    (condition satisfied)
//! -p + T e <= T - eps      e = 1  =>  p >= eps    (condition violated)
//! ```
//!
//! plus the box and coupling rows on `theta`. The objective is `sum e`.
//! The exact solver does not hand this model to a generic MILP code; it is
//! emitted for inspection, export and for checking candidate solutions.

use crate::model::{LaneClass, Link};

use super::space::dot;
use super::{CalibrationOptions, DataPoint, PointFlags};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinaryIndicator {
    /// Zero-based index of the data point.
    pub point: usize,
    pub link: Link,
    pub class: LaneClass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    BigMUpper,
    BigMLower,
    Coupling,
    LowerBound,
    UpperBound,
}

/// `coeffs . theta + weight * e[binary] <= rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct MilpRow {
    pub kind: RowKind,
    pub coeffs: Vec<f64>,
    pub binary: Option<(usize, f64)>,
    pub rhs: f64,
}

impl MilpRow {
    pub fn activity(&self, theta: &[f64], e: &[bool]) -> f64 {
        let b = self.binary.map_or(0.0, |(k, w)| if e[k] { w } else { 0.0 });
        dot(&self.coeffs, theta) + b
    }
}

#[derive(Clone, Debug)]
pub struct MilpModel {
    pub variable_names: Vec<&'static str>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub binaries: Vec<BinaryIndicator>,
    pub rows: Vec<MilpRow>,
    pub big_m: f64,
    pub epsilon: f64,
}

impl MilpModel {
    pub fn continuous_count(&self) -> usize {
        self.variable_names.len()
    }

    pub fn big_m_rows(&self) -> impl Iterator<Item = &MilpRow> {
        self.rows.iter().filter(|r| matches!(r.kind, RowKind::BigMUpper | RowKind::BigMLower))
    }

    pub fn objective(&self, e: &[bool]) -> usize {
        e.iter().filter(|&&b| b).count()
    }

    pub fn is_satisfied(&self, theta: &[f64], e: &[bool], tol: f64) -> bool {
        self.rows.iter().all(|r| r.activity(theta, e) <= r.rhs + tol)
    }

    /// Flattens per-point flags into the binary order of this model.
    pub fn binaries_from_flags(&self, flags: &[PointFlags]) -> Vec<bool> {
        self.binaries.iter().map(|b| flags[b.point].get(b.link, b.class)).collect()
    }
}

pub fn build_milp(data: &[DataPoint], opts: &CalibrationOptions) -> MilpModel {
    let space = opts.space();
    let (lower, upper) = space.variable_bounds();
    let dim = space.dim();
    let (t, eps) = (opts.big_m, opts.epsilon);
    let mut binaries = Vec::with_capacity(4 * data.len());
    let mut rows = Vec::new();
    for (k, p) in data.iter().enumerate() {
        for link in Link::BOTH {
            for class in [LaneClass::FeedThrough, LaneClass::Bifurcating] {
                let idx = binaries.len();
                binaries.push(BinaryIndicator { point: k, link, class });
                let prod = space.product_row(&p.flow, link, class);
                let neg: Vec<f64> = prod.iter().map(|v| -v).collect();
                rows.push(MilpRow { kind: RowKind::BigMUpper, coeffs: prod, binary: Some((idx, -t)), rhs: eps });
                rows.push(MilpRow { kind: RowKind::BigMLower, coeffs: neg, binary: Some((idx, t)), rhs: t - eps });
            }
        }
    }
    for r in space.coupling_rows() {
        rows.push(MilpRow { kind: RowKind::Coupling, coeffs: r.coeffs, binary: None, rhs: r.rhs });
    }
    for j in 0..dim {
        let mut unit = vec![0.0; dim];
        unit[j] = -1.0;
        rows.push(MilpRow { kind: RowKind::LowerBound, coeffs: unit.clone(), binary: None, rhs: -lower[j] });
        unit[j] = 1.0;
        rows.push(MilpRow { kind: RowKind::UpperBound, coeffs: unit, binary: None, rhs: upper[j] });
    }
    MilpModel { variable_names: space.names().to_vec(), lower, upper, binaries, rows, big_m: t, epsilon: eps }
}
