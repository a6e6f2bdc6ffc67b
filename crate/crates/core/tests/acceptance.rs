//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed; exits non-zero
//! if any criterion fails.

use std::fs;
use std::time::{Duration, Instant};

use diverge_core::calibration::{calibrate_exact, calibrate_search, CalibrationOptions, DataPoint, SolverKind};
use diverge_core::cli::run;
use diverge_core::datagen::{demand_sweep, generate_dataset, SimulationConfig};
use diverge_core::equilibrium::{
    best_response, best_response_slope, nash_player_cost, share_grid, solve_fixed_point, solve_grid_oracle,
    AuxiliaryAction, EquilibriumReport, SolverOptions,
};
use diverge_core::io::read_dataset;
use diverge_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REFERENCE_FILE: &str = "symmetry: true\ncb = 1.45\nlambda1 = 0.87\nmu1 = 0.69\nnu = 1\n";

fn reference() -> CostCoefficients {
    CostCoefficients::symmetric(1.45, 0.87, 0.69, 1.0).unwrap()
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

/// Rates in [1, 5], capacity factors in [0.1, 1] and nu in `nu_range`,
/// redrawn until the uniqueness condition holds on both links.
fn unique_instance(rng: &mut ChaCha8Rng, nu_range: (f64, f64)) -> CostCoefficients {
    loop {
        let mut r = || rng.random_range(1.0..=5.0);
        let (cf1, cf2, cb) = (r(), r(), r());
        let mut f = || rng.random_range(0.1..=1.0);
        let (l1, l2, m1, m2) = (f(), f(), f(), f());
        let nu = rng.random_range(nu_range.0..=nu_range.1);
        let c = CostCoefficients::new(cf1, cf2, cb, l1, l2, m1, m2, nu).unwrap();
        if check_uniqueness_condition(&c).both() {
            return c;
        }
    }
}

fn random_case(rng: &mut ChaCha8Rng) -> DivergeInstance {
    let c = unique_instance(rng, (0.1, 3.0));
    let q1 = rng.random_range(0.0..=1.0);
    DivergeInstance::new(DemandConfig::from_q1(q1).unwrap(), c).unwrap()
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["diverge"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap())
}

fn criterion_1(dir: &tempfile::TempDir) -> Verdict {
    let path = dir.path().join("reference.txt");
    fs::write(&path, REFERENCE_FILE).unwrap();
    let start = Instant::now();
    let (code, out) = cli(&["check", "--coeffs", path.to_str().unwrap()]);
    let elapsed = start.elapsed();
    let margins: Vec<(f64, bool)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2] == "pass")
        })
        .collect();
    let ok = code == 0
        && margins.len() == 2
        && margins.iter().all(|&(m, p)| p && (m - 0.711).abs() <= 1e-12)
        && within(elapsed, Duration::from_millis(1));
    verdict(ok, format!("margins {margins:?}, exit {code}, {elapsed:?}"))
}

fn criterion_2_and_4() -> (Verdict, Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let opts = SolverOptions::default();
    let start = Instant::now();
    let mut solved: Vec<(DivergeInstance, EquilibriumReport)> = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let g = random_case(&mut rng);
        let r = solve_fixed_point(&g, &opts).unwrap();
        solved.push((g, r));
    }
    let elapsed = start.elapsed();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for (g, r) in &solved {
        let res = wardrop_residuals(g, &r.flow).unwrap().max();
        worst = worst.max(res);
        if !r.converged || r.iterations > 10_000 || res > 1e-9 {
            failures += 1;
        }
    }
    let c2 = verdict(
        failures == 0 && within(elapsed, Duration::from_secs(5)),
        format!("{failures} of 1000 failed, worst residual {worst:e}, {elapsed:?}"),
    );

    let mut nash_failures = 0;
    let mut worst_excess = 0.0f64;
    for (g, r) in solved.iter().step_by(20) {
        let d = g.demand;
        let y = AuxiliaryAction::new(&d, r.flow.xb1(), r.flow.xb2()).unwrap();
        for link in Link::BOTH {
            let at = nash_player_cost(&g.costs, &d, &y, link);
            let best = share_grid(d.q(link), 1e-4)
                .into_iter()
                .map(|v| {
                    let dev = match link {
                        Link::One => AuxiliaryAction::new(&d, v, y.y2).unwrap(),
                        Link::Two => AuxiliaryAction::new(&d, y.y1, v).unwrap(),
                    };
                    nash_player_cost(&g.costs, &d, &dev, link)
                })
                .fold(f64::INFINITY, f64::min);
            worst_excess = worst_excess.max(at - best);
            if at > best + 1e-12 {
                nash_failures += 1;
            }
        }
    }
    let c4 = verdict(nash_failures == 0, format!("50 solutions, {nash_failures} player failures, worst excess {worst_excess:e}"));
    (c2, c4)
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let g = random_case(&mut rng);
        let fp = solve_fixed_point(&g, &SolverOptions::default()).unwrap().flow;
        let grid = solve_grid_oracle(&g, 1e-3).unwrap();
        worst = worst.max((fp.xb1() - grid.xb1()).abs()).max((fp.xb2() - grid.xb2()).abs());
    }
    let elapsed = start.elapsed();
    verdict(worst <= 2e-3 && within(elapsed, Duration::from_secs(60)), format!("worst gap {worst:e}, {elapsed:?}"))
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = Instant::now();
    let h = 1e-6;
    let (mut checked, mut out_of_range, mut mismatched) = (0, 0, 0);
    let mut worst_fd = 0.0f64;
    for _ in 0..200 {
        let g = random_case(&mut rng);
        let c = &g.costs;
        for _ in 0..50 {
            let link = if rng.random_bool(0.5) { Link::One } else { Link::Two };
            let (qi, qj) = (g.demand.q(link), g.demand.q(link.other()));
            let z = rng.random_range(0.0..=qj);
            let Ok(slope) = best_response_slope(c, qi, z, link) else { continue };
            if !(-1.0..=0.0).contains(&slope) {
                out_of_range += 1;
            }
            // central difference only where both probes stay on the interior branch
            if z - h < 0.0 || z + h > qj {
                continue;
            }
            if best_response_slope(c, qi, z - h, link).is_err() || best_response_slope(c, qi, z + h, link).is_err() {
                continue;
            }
            let fd = (best_response(c, qi, z + h, link) - best_response(c, qi, z - h, link)) / (2.0 * h);
            worst_fd = worst_fd.max((fd - slope).abs());
            if (fd - slope).abs() > 1e-5 {
                mismatched += 1;
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        out_of_range == 0 && mismatched == 0 && checked > 0 && within(elapsed, Duration::from_secs(5)),
        format!("{checked} interior samples, {out_of_range} out of range, {mismatched} fd mismatches (worst {worst_fd:e}), {elapsed:?}"),
    )
}

fn default_sweep() -> Vec<DemandConfig> {
    demand_sweep(1150.0, 1850.0, 50.0)
        .unwrap()
        .into_iter()
        .map(|d1| DemandConfig::from_demands(d1, 3000.0 - d1).unwrap())
        .collect()
}

fn criterion_6() -> Verdict {
    let c = reference();
    let data: Vec<DataPoint> = default_sweep()
        .into_iter()
        .map(|d| {
            let r = solve_fixed_point(&DivergeInstance::new(d, c).unwrap(), &SolverOptions::default()).unwrap();
            DataPoint::new(d, r.flow, 3000.0).unwrap()
        })
        .collect();
    let start = Instant::now();
    let opts = CalibrationOptions { symmetry: true, max_binaries: 4 * data.len(), ..Default::default() };
    let result = calibrate_exact(&data, &opts).unwrap();
    let elapsed = start.elapsed();
    let mut worst = 0.0f64;
    for p in &data {
        let g = DivergeInstance::new(p.demand, result.coefficients).unwrap();
        let r = solve_fixed_point(&g, &SolverOptions::default()).unwrap();
        for (a, b) in r.flow.to_array().iter().zip(p.flow.to_array()) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        result.violations == 0 && worst <= 1e-6 && within(elapsed, Duration::from_secs(120)),
        format!("K = {}, violations {}, worst reproduction error {worst:e}, {elapsed:?}", data.len(), result.violations),
    )
}

fn criterion_7() -> Verdict {
    let cfg = SimulationConfig { n_vehicles: 5000, sigma: 0.5, ..Default::default() };
    let start = Instant::now();
    let data = generate_dataset(&reference(), &cfg).unwrap();
    let opts = CalibrationOptions { symmetry: true, solver: SolverKind::Heuristic, ..Default::default() };
    let result = calibrate_search(&data, &opts).unwrap();
    let elapsed = start.elapsed();
    let conditions = 4 * data.len();
    let limit = conditions as f64 * 0.2;
    verdict(
        result.violations as f64 <= limit && result.uniqueness.both() && within(elapsed, Duration::from_secs(300)),
        format!(
            "violations {} of {conditions} (limit {limit}), uniqueness margins {:?}, {elapsed:?}",
            result.violations, result.uniqueness.margins
        ),
    )
}

fn criterion_8(dir: &tempfile::TempDir) -> Verdict {
    let coeffs = dir.path().join("reference.txt");
    fs::write(&coeffs, REFERENCE_FILE).unwrap();
    let start = Instant::now();
    let (code, out) = cli(&["sweep", "--coeffs", coeffs.to_str().unwrap(), "--range", "0.36:0.62", "--step", "0.01"]);
    let elapsed = start.elapsed();
    let data = read_dataset(out.as_bytes()).unwrap();
    let xs: Vec<f64> = data.iter().map(|p| p.demand.q1()).collect();
    let ys: Vec<f64> = data.iter().map(|p| p.flow.xb1()).collect();
    let increasing = ys.windows(2).all(|w| w[1] > w[0]);
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    verdict(
        code == 0 && increasing && r2 >= 0.99 && within(elapsed, Duration::from_secs(1)),
        format!("{} rows, strictly increasing {increasing}, R^2 {r2:.6}, {elapsed:?}", data.len()),
    )
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let start = Instant::now();
    let mut failures = 0;
    for _ in 0..10_000 {
        let mut r = || rng.random_range(0.1..=10.0);
        let (cf1, cf2, cb, nu) = (r(), r(), r(), r());
        let mut f = || rng.random_range(1e-3..=1.0);
        let c = CostCoefficients::new(cf1, cf2, cb, f(), f(), f(), f(), nu).unwrap();
        let lo: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..=0.5));
        let hi: [f64; 4] = std::array::from_fn(|k| lo[k] + rng.random_range(0.0..=0.5));
        for link in Link::BOTH {
            let (f0, b0) = lane_costs(&c, lo, link);
            let (f1, b1) = lane_costs(&c, hi, link);
            if f1 < f0 || b1 < b0 {
                failures += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(failures == 0 && within(elapsed, Duration::from_secs(1)), format!("{failures} decreasing pairs, {elapsed:?}"))
}

fn criterion_10() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for set in 0..20 {
        // nu kept at or above 1 so the generating vector lies in the default box
        let c = unique_instance(&mut rng, (1.0, 3.0));
        let k = rng.random_range(1..=6);
        let data: Vec<DataPoint> = (0..k)
            .map(|_| {
                let d = DemandConfig::from_q1(rng.random_range(0.0..=1.0)).unwrap();
                let r = solve_fixed_point(&DivergeInstance::new(d, c).unwrap(), &SolverOptions::default()).unwrap();
                DataPoint::new(d, r.flow, 3000.0).unwrap()
            })
            .collect();
        let opts = CalibrationOptions { seed: set, ..Default::default() };
        let exact = calibrate_exact(&data, &opts).unwrap().violations;
        let heuristic = calibrate_search(&data, &opts).unwrap().violations;
        if exact != heuristic {
            mismatches.push((set, exact, heuristic));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches.is_empty() && within(elapsed, Duration::from_secs(120)),
        format!("mismatches {mismatches:?}, {elapsed:?}"),
    )
}

fn main() {
    let dir = tempfile::TempDir::new().unwrap();
    let (c2, c4) = criterion_2_and_4();
    let verdicts = [
        ("uniqueness margins on the validation coefficients", criterion_1(&dir)),
        ("equilibrium certification on 1000 random instances", c2),
        ("grid oracle agreement on 100 instances", criterion_3()),
        ("auxiliary game costs minimal at the equilibrium", c4),
        ("best-response slope bounds and finite differences", criterion_5()),
        ("noiseless calibration round trip", criterion_6()),
        ("calibration under simulated noise", criterion_7()),
        ("validation sweep shape", criterion_8(&dir)),
        ("cost monotonicity", criterion_9()),
        ("exact and heuristic calibration agree", criterion_10()),
    ];
    let mut failed = 0;
    for (k, (name, v)) in verdicts.iter().enumerate() {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag}: {name}: {}", k + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
