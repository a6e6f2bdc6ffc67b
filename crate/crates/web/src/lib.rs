//! WebAssembly bindings for the browser demo.
//!
//! Coefficients cross the boundary as a flat array in the order
//! `cf1, cf2, cb, lambda1, lambda2, mu1, mu2, nu`.

use diverge_core::equilibrium::{best_response, solve_fixed_point, SolverOptions};
use diverge_core::{check_uniqueness_condition, CostCoefficients, DemandConfig, DivergeInstance, Link};
use wasm_bindgen::prelude::*;

const MAX_SWEEP_POINTS: usize = 10_001;

fn coefficients(raw: &[f64]) -> Result<CostCoefficients, String> {
    let a: [f64; 8] = raw.try_into().map_err(|_| format!("expected 8 coefficients, got {}", raw.len()))?;
    let c = CostCoefficients::from_array(a);
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

fn instance(raw: &[f64], q1: f64) -> Result<DivergeInstance, String> {
    let c = coefficients(raw)?;
    let d = DemandConfig::from_q1(q1).map_err(|e| e.to_string())?;
    DivergeInstance::new(d, c).map_err(|e| e.to_string())
}

/// `[xf1, xb1, xf2, xb2, converged, max_residual, iterations]`.
pub fn equilibrium(raw: &[f64], q1: f64) -> Result<Vec<f64>, String> {
    let g = instance(raw, q1)?;
    let r = solve_fixed_point(&g, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let mut out = r.flow.to_array().to_vec();
    out.extend([f64::from(u8::from(r.converged)), r.residuals.max(), r.iterations as f64]);
    Ok(out)
}

/// Rows of `[q1, xb1, xb2]`, flattened, for `q1` from `lo` to `hi`.
pub fn sweep(raw: &[f64], lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(format!("need 0 <= lo <= hi <= 1, got {lo}..{hi}"));
    }
    if !(step > 0.0) {
        return Err(format!("step must be positive, got {step}"));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if n > MAX_SWEEP_POINTS {
        return Err(format!("sweep would have {n} points, limit is {MAX_SWEEP_POINTS}"));
    }
    let mut out = Vec::with_capacity(3 * n);
    for k in 0..n {
        let q1 = (lo + k as f64 * step).min(hi);
        let g = instance(raw, q1)?;
        let r = solve_fixed_point(&g, &SolverOptions::default()).map_err(|e| e.to_string())?;
        out.extend([q1, r.flow.xb1(), r.flow.xb2()]);
    }
    Ok(out)
}

/// Best-response curves sampled at `samples` points each: first
/// `(xb2, B1(xb2))` pairs over `[0, q2]`, then `(xb1, B2(xb1))` over `[0, q1]`.
pub fn response_curves(raw: &[f64], q1: f64, samples: usize) -> Result<Vec<f64>, String> {
    let c = coefficients(raw)?;
    let d = DemandConfig::from_q1(q1).map_err(|e| e.to_string())?;
    if !(2..=MAX_SWEEP_POINTS).contains(&samples) {
        return Err(format!("samples must lie in 2..={MAX_SWEEP_POINTS}, got {samples}"));
    }
    let mut out = Vec::with_capacity(4 * samples);
    for link in Link::BOTH {
        let qj = d.q(link.other());
        for k in 0..samples {
            let z = qj * k as f64 / (samples - 1) as f64;
            out.extend([z, best_response(&c, d.q(link), z, link)]);
        }
    }
    Ok(out)
}

/// `[margin1, margin2]`; the condition holds on a link iff its margin is `>= 0`.
pub fn margins(raw: &[f64]) -> Result<Vec<f64>, String> {
    Ok(check_uniqueness_condition(&coefficients(raw)?).margins.to_vec())
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn solve_equilibrium(coeffs: &[f64], q1: f64) -> Result<Vec<f64>, JsValue> {
    js(equilibrium(coeffs, q1))
}

#[wasm_bindgen]
pub fn sweep_bifurcating(coeffs: &[f64], lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, JsValue> {
    js(sweep(coeffs, lo, hi, step))
}

#[wasm_bindgen]
pub fn best_response_curves(coeffs: &[f64], q1: f64, samples: usize) -> Result<Vec<f64>, JsValue> {
    js(response_curves(coeffs, q1, samples))
}

#[wasm_bindgen]
pub fn uniqueness_margins(coeffs: &[f64]) -> Result<Vec<f64>, JsValue> {
    js(margins(coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: [f64; 8] = [1.45, 1.45, 1.45, 0.87, 0.87, 0.69, 0.69, 1.0];

    #[test]
    fn even_split_is_symmetric() {
        let r = equilibrium(&REFERENCE, 0.5).unwrap();
        assert_eq!(r.len(), 7);
        assert!((r[1] - r[3]).abs() < 1e-12);
        assert_eq!(r[4], 1.0);
        assert!(r[5] <= 1e-9);
    }

    #[test]
    fn rejects_wrong_arity_and_bad_demand() {
        assert!(equilibrium(&REFERENCE[..7], 0.5).unwrap_err().contains("8 coefficients"));
        assert!(equilibrium(&REFERENCE, 1.5).is_err());
        let mut bad = REFERENCE;
        bad[2] = -1.0;
        assert!(margins(&bad).is_err());
    }

    #[test]
    fn sweep_is_monotone_in_link_one() {
        let s = sweep(&REFERENCE, 0.36, 0.62, 0.01).unwrap();
        assert_eq!(s.len(), 27 * 3);
        let xb1: Vec<f64> = s.chunks(3).map(|r| r[1]).collect();
        assert!(xb1.windows(2).all(|w| w[1] > w[0]));
        assert!(sweep(&REFERENCE, 0.6, 0.4, 0.01).is_err());
        assert!(sweep(&REFERENCE, 0.0, 1.0, 1e-9).is_err());
    }

    #[test]
    fn curves_cross_at_the_equilibrium() {
        let q1 = 0.4;
        let eq = equilibrium(&REFERENCE, q1).unwrap();
        let c = CostCoefficients::from_array(REFERENCE);
        let b1 = best_response(&c, q1, eq[3], Link::One);
        assert!((b1 - eq[1]).abs() < 1e-9);
        let curves = response_curves(&REFERENCE, q1, 11).unwrap();
        assert_eq!(curves.len(), 44);
        assert_eq!(curves[0], 0.0);
        assert!((curves[20] - (1.0 - q1)).abs() < 1e-15);
    }

    #[test]
    fn reference_margins() {
        let m = margins(&REFERENCE).unwrap();
        assert!(m.iter().all(|v| (v - 0.711).abs() < 1e-12));
    }
}
