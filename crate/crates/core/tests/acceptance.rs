//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singspline::cheb::{interpolate_with, NodeLayout};
use singspline::harness::{run_convergence, run_convergence_inspect, run_widths, to_csv, ConvergenceReport, RunConfig};
use singspline::mesh1d::{build_mesh1d, ceil_count, Variant1D};
use singspline::minimax::minimax_oracle;
use singspline::spline1d::build_spline1d;
use singspline::widths::rho_sequence;
use singspline::{ClassKind, FunctionClassSpec};
use std::path::PathBuf;
use std::time::{Duration, Instant};

struct Outcome {
    id: u32,
    passed: bool,
    detail: String,
}

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn slope_of(report: &ConvergenceReport) -> f64 {
    report.fit.map_or(f64::NAN, |f| f.slope)
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

fn rate_1d(id: u32, file: &str, limit: Option<Duration>) -> (Outcome, ConvergenceReport) {
    let cfg = config(file);
    let start = Instant::now();
    let report = run_convergence(&cfg).expect("sweep runs");
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed < l);
    let band = report.band;
    let slope = slope_of(&report);
    let outcome = Outcome {
        id,
        passed: report.passed && in_time,
        detail: format!("slope {slope:.4} in [{}, {}], {:.2} s", band[0], band[1], elapsed.as_secs_f64()),
    };
    (outcome, report)
}

fn criterion_2() -> Outcome {
    let (mut o, report) = rate_1d(2, "c02_rate_1d_log_layers.json", None);
    let ratio = spread(report.rows.iter().map(|r| r.subdivisions as f64 / r.n as f64));
    o.passed &= ratio <= 3.0;
    o.detail = format!("{}; sum M_k / N spread {ratio:.3} <= 3", o.detail);
    o
}

fn criterion_4() -> Outcome {
    let base = config("c04_node_count.json");
    let mut mismatches = Vec::new();
    for s in 2..=4u32 {
        let spec = FunctionClassSpec::new(ClassKind::BarQu, s - 1, 1.0, 1, 1).unwrap();
        for &n in &base.n_grid {
            let mesh = build_mesh1d(&spec, n, Variant1D::LogBoundary).unwrap();
            let sp = build_spline1d(|t| t.cos(), &mesh, s as usize, "cos").unwrap();
            let ln_n = ceil_count((n as f64).ln()) as usize;
            let s = s as usize;
            let formula = 2 * ((ln_n - 1) * (s - 1) + (n - 1) * (s - 1)) + 1;
            if sp.node_count() != formula {
                mismatches.push(format!("N={n} s={s}: enumerated {} vs formula {formula}", sp.node_count()));
            }
        }
    }
    Outcome {
        id: 4,
        passed: mismatches.is_empty(),
        detail: if mismatches.is_empty() { "all 9 cases match".into() } else { mismatches.join("; ") },
    }
}

struct TwoD {
    report: ConvergenceReport,
    elapsed: Duration,
    max_jump_ratio: f64,
    tiling: Vec<String>,
    window: Vec<String>,
    nesting: Vec<String>,
}

fn run_2d(file: &str) -> TwoD {
    let cfg = config(file);
    let mut max_jump_ratio = 0.0f64;
    let mut tiling = Vec::new();
    let mut window = Vec::new();
    let mut nesting = Vec::new();
    let start = Instant::now();
    let report = run_convergence_inspect(&cfg, |sp| {
        let n = sp.partition.n;
        let fmax = sp.pieces.iter().flat_map(|p| p.values.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        let jump = sp.max_interface_jump(9).expect("jump sampling");
        max_jump_ratio = max_jump_ratio.max(jump / (1e-9 * (1.0 + fmax)));
        let part = &sp.partition;
        for (list, check) in [
            (&mut tiling, part.check_tiling()),
            (&mut window, part.check_edge_window()),
            (&mut nesting, part.check_vertex_nesting()),
        ] {
            if !check.passed {
                list.push(format!("N={n}: {}", check.detail));
            }
        }
    })
    .expect("sweep runs");
    TwoD { report, elapsed: start.elapsed(), max_jump_ratio, tiling, window, nesting }
}

fn criterion_5(run: &TwoD) -> Outcome {
    let slope = slope_of(&run.report);
    let in_time = run.elapsed < Duration::from_secs(300);
    Outcome {
        id: 5,
        passed: run.report.passed && in_time,
        detail: format!(
            "slope {slope:.4} in [{}, {}], {:.1} s (includes the checks of 7 and 8)",
            run.report.band[0],
            run.report.band[1],
            run.elapsed.as_secs_f64()
        ),
    }
}

fn criterion_6(run: &TwoD) -> Outcome {
    let values: Vec<f64> = run
        .report
        .rows
        .iter()
        .map(|r| {
            let n = r.n_nodes as f64;
            r.sup_error * n / n.ln()
        })
        .collect();
    let ratio = spread(values.iter().cloned());
    Outcome {
        id: 6,
        passed: ratio <= 3.0,
        detail: format!(
            "error*n/ln n = [{}], max/min {ratio:.3} <= 3",
            values.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn criterion_7(runs: &[&TwoD]) -> Outcome {
    let worst = runs.iter().map(|r| r.max_jump_ratio).fold(0.0, f64::max);
    Outcome { id: 7, passed: worst <= 1.0, detail: format!("max jump / (1e-9 (1 + max|f|)) = {worst:.3e}") }
}

fn criterion_8(runs: &[&TwoD]) -> Outcome {
    let problems: Vec<String> = runs.iter().flat_map(|r| r.tiling.iter().chain(&r.window).chain(&r.nesting).cloned()).collect();
    Outcome {
        id: 8,
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            "volumes, edge windows and vertex nesting hold for all 8 partitions".into()
        } else {
            problems.join("; ")
        },
    }
}

fn sampled_error(f: impl Fn(f64) -> f64, p: impl Fn(f64) -> f64) -> f64 {
    (0..=20_000).map(|i| -1.0 + i as f64 / 10_000.0).map(|t| (f(t) - p(t)).abs()).fold(0.0, f64::max)
}

fn criterion_9() -> Outcome {
    let mut worst_equality = 0.0f64;
    for r in 2..=4 {
        let f = |t: f64| t.powi(r);
        let p = interpolate_with(NodeLayout::ChebyshevZeros, f, -1.0, 1.0, r as usize).unwrap();
        let err = sampled_error(f, |t| p.eval(t));
        worst_equality = worst_equality.max((err - 2f64.powi(1 - r)).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_slack = f64::INFINITY;
    for trial in 0..100 {
        let r = 2 + trial % 3;
        let coef: Vec<f64> = (0..=r).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = |t: f64| coef.iter().rev().fold(0.0, |acc, c| acc * t + c);
        let p = interpolate_with(NodeLayout::ChebyshevZeros, f, -1.0, 1.0, r).unwrap();
        // ||f^(r)|| / (r! 2^(r-1)) with f^(r) = r! a_r
        let bound = coef[r].abs() / 2f64.powi(r as i32 - 1);
        worst_slack = worst_slack.min(bound - sampled_error(f, |t| p.eval(t)));
    }
    Outcome {
        id: 9,
        passed: worst_equality <= 1e-9 && worst_slack >= -1e-12,
        detail: format!("|err - 2^(1-r)| <= {worst_equality:.2e}; min slack over 100 polynomials {worst_slack:.2e}"),
    }
}

fn criterion_10() -> Outcome {
    let mut worst = 0.0f64;
    for s in 2..=5 {
        let m = minimax_oracle(|t| t.powi(s), -1.0, 1.0, s as usize - 1, 1e-12).unwrap();
        worst = worst.max((m.error - 2f64.powi(1 - s)).abs());
    }
    Outcome { id: 10, passed: worst <= 1e-7, detail: format!("max |E - 2^(1-s)| = {worst:.2e}") }
}

fn criterion_11() -> Outcome {
    let cfg = config("c11_lower_bound.json");
    let report = run_widths(&cfg).expect("bump families build");
    let slope = report.fit.map_or(f64::NAN, |f| f.slope);
    let worst_ratio = report.rows.iter().map(|r| r.derivative_ratio).fold(0.0, f64::max);
    let spec = cfg.spec().unwrap();
    let s = singspline::derive_params(&spec).unwrap().s;
    let mut residual = 0.0f64;
    let mut layer_counts = Vec::new();
    let mut m_below_n = true;
    for n in [4usize, 8, 16, 32, 64] {
        let rm = rho_sequence(n, s, spec.gamma, spec.u).unwrap();
        residual = residual.max(rm.max_residual());
        m_below_n &= rm.m < n;
        layer_counts.push(format!("{n}:{}", rm.m));
    }
    let passed = report.constraints_hold && report.passed && residual <= 1e-12 && m_below_n;
    Outcome {
        id: 11,
        passed,
        detail: format!(
            "max |D^v phi|/bound {worst_ratio:.7}; eps_N slope {slope:.4} in [{}, {}]; rho residual {residual:.2e}; m < N {} (N:m {})",
            report.band[0],
            report.band[1],
            if m_below_n { "holds" } else { "fails" },
            layer_counts.join(" ")
        ),
    }
}

fn criterion_12(first: &ConvergenceReport) -> Outcome {
    let again = run_convergence(&config("c01_rate_1d.json")).expect("sweep runs");
    let (a, b) = (to_csv(&first.rows), to_csv(&again.rows));
    Outcome { id: 12, passed: a == b, detail: format!("{} bytes, identical: {}", a.len(), a == b) }
}

fn main() {
    let mut outcomes = Vec::new();
    let mut report = |o: Outcome| {
        println!("{} criterion {:>2}: {}", if o.passed { "PASS" } else { "FAIL" }, o.id, o.detail);
        outcomes.push(o.passed);
    };
    let (c1, first) = rate_1d(1, "c01_rate_1d.json", Some(Duration::from_secs(10)));
    report(c1);
    report(criterion_2());
    report(rate_1d(3, "c03_rate_1d_qu.json", Some(Duration::from_secs(10))).0);
    report(criterion_4());
    let below = run_2d("c05_rate_2d_below.json");
    let above = run_2d("c06_rate_2d_above.json");
    report(criterion_5(&below));
    report(criterion_6(&above));
    report(criterion_7(&[&below, &above]));
    report(criterion_8(&[&below, &above]));
    report(criterion_9());
    report(criterion_10());
    report(criterion_11());
    report(criterion_12(&first));
    let failed = outcomes.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
