//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod support;

use std::time::{Duration, Instant};

use annealed_grg::critical::{fit_beta, fit_delta, predicted_exponents, DEFAULT_POINTS, DEFAULT_WINDOW};
use annealed_grg::measures::{step_default_height, DEFAULT_K_TOL, DEFAULT_NODES};
use annealed_grg::meanfield::{pressure_general_best, solve_v_branches, sup_distance, DEFAULT_TOL};
use annealed_grg::simulate::{exact_annealed, exact_annealed_model, ising_kernel, run_mc, GrgInstance, McOptions};
use annealed_grg::{
    concavity_scan, cumulant, detect_k, phi, pressure_rank2, rank2_to_ising, solve_m, solve_v_general, theta_c,
    uniqueness_bound, GridKernel, Kernel, ModelSpec, Observable, PicardOptions, SpinMeasure, Start, WeightModel,
};
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn err(e: annealed_grg::Error) -> String {
    e.to_string()
}

fn ising(beta: f64, w: WeightModel, h: f64) -> Result<ModelSpec, String> {
    ModelSpec::rank2(SpinMeasure::ising(), Observable::identity(), beta.cosh(), beta.sinh(), w, h).map_err(err)
}

fn critical_temperatures() -> Outcome {
    let one = WeightModel::deterministic(1.0).map_err(err)?;
    let m = ModelSpec::rank2(SpinMeasure::ising(), Observable::identity(), 10.0, 1.0, one.clone(), 0.0).map_err(err)?;
    let a = theta_c(&m).map_err(err)?;
    let s1 = SpinMeasure::sphere_marginal(1, DEFAULT_NODES).map_err(err)?;
    let m = ModelSpec::rank2(s1, Observable::identity(), 10.0, 1.0, one, 0.0).map_err(err)?;
    let b = theta_c(&m).map_err(err)?;
    check((a - 1.0).abs() < 1e-10 && (b - 2.0).abs() < 1e-10, format!("Ising {a:.15}, S^1 {b:.15}"))
}

fn ising_beta_c() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for w in [WeightModel::deterministic(1.0), WeightModel::pareto(4.5, 1.0), WeightModel::discrete(vec![(1.0, 0.5), (2.0, 0.5)])] {
        let w = w.map_err(err)?;
        let m = ising(0.5, w.clone(), 0.0)?;
        let tc = theta_c(&m).map_err(err)?;
        // Back to the Ising parametrization with the coupling at θ_c.
        let (_, beta_c) = rank2_to_ising((1.0 + tc * tc).sqrt(), tc).map_err(err)?;
        let expect = (w.mean() / w.second_moment()).asinh();
        ok &= (beta_c - expect).abs() < 1e-10;
        detail.push(format!("{}: {beta_c:.10}", w.describe()));
    }
    let m = ising(0.5, WeightModel::deterministic(1.0).map_err(err)?, 0.0)?;
    let tc = theta_c(&m).map_err(err)?;
    let beta_c = rank2_to_ising((1.0 + tc * tc).sqrt(), tc).map_err(err)?.1;
    ok &= (beta_c - 0.881_373_587_019_543).abs() < 1e-10;
    check(ok, detail.join(", "))
}

fn exponent_table() -> Outcome {
    let spins = [("ising", SpinMeasure::ising()), ("step", SpinMeasure::step(step_default_height(), DEFAULT_NODES).map_err(err)?)];
    let mut cases = Vec::new();
    for (name, mu) in &spins {
        for (wname, w) in [("W=1", WeightModel::deterministic(1.0)), ("pareto3.5", WeightModel::pareto(3.5, 1.0)), ("pareto4.5", WeightModel::pareto(4.5, 1.0))] {
            cases.push((*name, mu.clone(), wname, w.map_err(err)?));
        }
    }
    cases.push(("ising", SpinMeasure::ising(), "pareto5", WeightModel::pareto(5.0, 1.0).map_err(err)?));
    let mut ok = true;
    let mut rows = Vec::new();
    for (name, mu, wname, w) in cases {
        let g = Observable::identity();
        let k = detect_k(&mu, &g, 10, DEFAULT_K_TOL).map_err(err)?;
        let regime = w.classify_tail(k).map_err(err)?;
        let pred = predicted_exponents(k, regime).map_err(err)?;
        let model = ModelSpec::rank2(mu, g, 100.0, 1.0, w, 0.0).map_err(err)?;
        let b = fit_beta(&model, DEFAULT_WINDOW, DEFAULT_POINTS, pred.log_correction).map_err(err)?.estimate;
        let d = fit_delta(&model, DEFAULT_WINDOW, DEFAULT_POINTS, pred.log_correction).map_err(err)?.estimate;
        let good = (b - pred.beta).abs() <= 0.06 && (d - pred.delta).abs() <= 0.2;
        ok &= good;
        rows.push(format!(
            "{name}/{wname}{}: beta {b:.4} ({:.4}) delta {d:.4} ({:.4}){}",
            if pred.log_correction { "+log" } else { "" },
            pred.beta,
            pred.delta,
            if good { "" } else { " OUT" }
        ));
    }
    check(ok, rows.join("; "))
}

fn step_density() -> Outcome {
    let g = Observable::identity();
    let mu = SpinMeasure::step(step_default_height(), DEFAULT_NODES).map_err(err)?;
    let k4 = cumulant(&mu, &g, 4).map_err(err)?;
    let k6 = cumulant(&mu, &g, 6).map_err(err)?;
    let closed = -4.0 * (20.0 + 7.0 * 10f64.sqrt()) / 8505.0;
    let pass = concavity_scan(&mu, &g, 20.0, 200).map_err(err)?.pass;
    let other = SpinMeasure::step(2.0 * (59.0 + 18.0 * 10f64.sqrt()), DEFAULT_NODES).map_err(err)?;
    let fails = !concavity_scan(&other, &g, 20.0, 200).map_err(err)?.pass;
    check(
        k4.abs() < 1e-9 && (k6 - closed).abs() < 1e-7 && pass && fails,
        format!("kappa4 {k4:.2e}, kappa6 {k6:.10} vs {closed:.10}, concavity default={pass}, other root fails={fails}"),
    )
}

fn pressure_consistency() -> Outcome {
    let p45 = WeightModel::pareto(4.5, 1.0).map_err(err)?;
    let one = WeightModel::deterministic(1.0).map_err(err)?;
    let cases = [
        (SpinMeasure::ising(), 3.0, 0.5, one.clone()),
        (SpinMeasure::ising(), 3.0, 2.0, one.clone()),
        (SpinMeasure::uniform(80).map_err(err)?, 8.0, 1.0, p45.clone()),
        (SpinMeasure::uniform(80).map_err(err)?, 8.0, 6.0, p45.clone()),
        (SpinMeasure::beta(2.0, 80).map_err(err)?, 8.0, 2.0, p45.clone()),
        (SpinMeasure::beta(2.0, 80).map_err(err)?, 8.0, 6.0, p45),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (mu, c, theta, w) in cases {
        let g = Observable::identity();
        let r2 = ModelSpec::rank2(mu.clone(), g.clone(), c, theta, w.clone(), 0.0).map_err(err)?;
        let fp = solve_m(&r2, DEFAULT_TOL).map_err(err)?;
        let p2 = pressure_rank2(&r2, &fp).map_err(err)?;
        let grid = GridKernel::from_rank2(r2.rank2_kernel().map_err(err)?, &mu).map_err(err)?;
        let gm = ModelSpec::new(mu.clone(), g, Kernel::Grid(grid), w, 0.0).map_err(err)?;
        let starts = [Start::Paramagnetic, Start::Perturbed(0.5), Start::Perturbed(-0.5)];
        let sols = solve_v_branches(&gm, &starts, PicardOptions::default(), 1e-8).map_err(err)?;
        let (pg, _) = pressure_general_best(&gm, &sols).map_err(err)?;
        worst = worst.max((p2 - pg).abs());
        parts.push(format!("{}/θ={theta}: m+={:.4}", mu.name(), fp.m_plus));
    }
    check(worst < 1e-8, format!("max |difference| {worst:.2e} over {}", parts.join(", ")))
}

fn uniqueness_criterion() -> Outcome {
    let opts = PicardOptions::default();
    let starts: Vec<Start> = (1..=5).map(|s| Start::Random { seed: s, amplitude: 2.0 }).collect();
    let spread = |model: &ModelSpec| -> Result<f64, String> {
        let sols = starts.iter().map(|s| solve_v_general(model, s, opts)).collect::<annealed_grg::Result<Vec<_>>>().map_err(err)?;
        Ok(sols.iter().flat_map(|a| sols.iter().map(move |b| sup_distance(&a.v, &b.v))).fold(0.0, f64::max))
    };
    let m1 = ising(0.4, WeightModel::deterministic(1.0).map_err(err)?, 0.0)?;
    let l1 = uniqueness_bound(m1.kernel(), m1.weights());
    let s1 = spread(&m1)?;

    let mu = SpinMeasure::beta(2.0, 80).map_err(err)?;
    let g = Observable::identity();
    let k = Kernel::Grid(GridKernel::exponential(0.25, &g, &mu).map_err(err)?);
    let w = WeightModel::pareto(4.5, 1.0).map_err(err)?;
    let l2 = uniqueness_bound(&k, &w);
    let m2 = ModelSpec::new(mu, g, k, w, 0.0).map_err(err)?;
    let s2 = spread(&m2)?;
    check(
        l1.holds && l2.holds && s1 < 1e-8 && s2 < 1e-8,
        format!("Ising β=0.4 lhs {:.6} spread {s1:.1e}; beta(2) e^(0.25σσ') Pareto(4.5) lhs {:.6} spread {s2:.1e}", l1.lhs, l2.lhs),
    )
}

fn finite_n_ground_truth() -> Outcome {
    let inst = GrgInstance::new(vec![1.0, 1.0]).map_err(err)?;
    let two = exact_annealed(&inst, &ising_kernel(2f64.ln()).map_err(err)?, &SpinMeasure::ising(), &Observable::identity(), 0.0)
        .map_err(err)?;
    let psi2 = 0.5 * (13.0f64 / 12.0).ln();
    let ok2 = (two.pressure - psi2).abs() < 1e-12;

    let one = WeightModel::deterministic(1.0).map_err(err)?;
    let mut hits = 0;
    let mut idx = 0;
    for beta in [0.5, 1.0, 1.5] {
        for h in [0.0, 0.1, 0.4] {
            let model = ising(beta, one.clone(), h)?;
            let exact = exact_annealed_model(&model, &GrgInstance::from_law(&one, 8).map_err(err)?).map_err(err)?;
            let target = if h == 0.0 { exact.abs_magnetization } else { exact.magnetization };
            let opts = McOptions { sweeps: 200_000, burnin: 2_000, seed: 7, stream: idx, trace_every: 0 };
            let mc = run_mc(&model, 8, &opts).map_err(err)?.0;
            if (mc.order_param_estimate - target).abs() < 3.0 * mc.stderr {
                hits += 1;
            }
            idx += 1;
        }
    }

    let big = ising(2f64.asinh(), one, 0.0)?;
    let target = phi(&big, solve_m(&big, DEFAULT_TOL).map_err(err)?.m_plus).map_err(err)?;
    let mc = run_mc(&big, 2000, &McOptions { sweeps: 2_000, burnin: 200, seed: 11, stream: 0, trace_every: 0 }).map_err(err)?.0;
    let z = (mc.order_param_estimate - target) / mc.stderr;
    check(
        ok2 && hits >= 8 && z.abs() < 3.0 && (target - 0.957504).abs() < 1e-6,
        format!(
            "psi_2 {:.15} vs {psi2:.15}; N=8 MC within 3 se on {hits}/9; N=2000 |B_N| {:.6} ± {:.1e} vs {target:.6} (z={z:.2})",
            two.pressure, mc.order_param_estimate, mc.stderr
        ),
    )
}

fn property_suites() -> Outcome {
    let run = |name: &str, cases: u32, f: &dyn Fn(&mut TestRunner) -> Result<(), String>| -> Result<String, String> {
        let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
        let mut runner = TestRunner::new_with_rng(Config { cases, failure_persistence: None, ..Config::default() }, rng);
        f(&mut runner).map(|_| format!("{name} x{cases}")).map_err(|e| format!("{name}: {e}"))
    };
    let fam = support::family;
    let mut done = Vec::new();
    done.push(run("odd cumulants", 48, &|r| {
        r.run(&(fam(), 0usize..3), |((f, p), g)| support::odd_cumulants_vanish(f, p, g)).map_err(|e| e.to_string())
    })?);
    done.push(run("phi concavity", 48, &|r| {
        r.run(&(fam(), 0usize..3, 0usize..3), |((f, p), g, w)| support::phi_concave(f, p, g, w)).map_err(|e| e.to_string())
    })?);
    done.push(run("m+ monotone", 12, &|r| {
        r.run(&(fam(), 0usize..3, 0usize..3), |((f, p), g, w)| support::monotone_m(f, p, g, w, 0.0)).map_err(|e| e.to_string())
    })?);
    done.push(run("phi'(0)", 48, &|r| {
        r.run(&(fam(), 0usize..3), |((f, p), w)| support::phi_slope(f, p, w)).map_err(|e| e.to_string())
    })?);
    done.push(run("quadrature", 48, &|r| {
        r.run(&fam().boxed(), |(f, p)| support::quadrature_consistent(f, p)).map_err(|e| e.to_string())
    })?);
    Ok(done.join(", "))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("critical temperature closed forms", Duration::from_secs(1), critical_temperatures),
        ("Ising beta_c identity", Duration::from_secs(1), ising_beta_c),
        ("exponent table", Duration::from_secs(300), exponent_table),
        ("step-density construction", Duration::from_secs(10), step_density),
        ("pressure formula consistency", Duration::from_secs(60), pressure_consistency),
        ("uniqueness criterion", Duration::from_secs(60), uniqueness_criterion),
        ("finite-N ground truth", Duration::from_secs(600), finite_n_ground_truth),
        ("property suites", Duration::from_secs(300), property_suites),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let dt = t.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if dt <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; runtime {dt:.1?} over limit {limit:?}")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {}. {name} [{:.2}s]: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1, dt.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
