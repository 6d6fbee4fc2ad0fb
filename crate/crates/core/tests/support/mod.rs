//! Property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use annealed_grg::measures::{log_mgf, tilted_central_moment};
use annealed_grg::meanfield::{theta_c_parts, DEFAULT_TOL};
use annealed_grg::{concavity_scan, cumulant, phi, solve_m, ModelSpec, Observable, SpinMeasure, WeightModel};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const NODES: usize = 120;

/// (family, parameter) → symmetric spin measure.
pub fn measure(family: usize, p: f64, nodes: usize) -> SpinMeasure {
    match family % 5 {
        0 => SpinMeasure::ising(),
        1 => SpinMeasure::uniform(nodes).unwrap(),
        2 => SpinMeasure::beta(p, nodes).unwrap(),
        3 => SpinMeasure::step(p, nodes).unwrap(),
        _ => SpinMeasure::sphere_marginal(1 + (p as u32) % 4, nodes).unwrap(),
    }
}

pub fn observable(i: usize) -> Observable {
    match i % 3 {
        0 => Observable::identity(),
        1 => Observable::cube(),
        _ => Observable::half_sine(),
    }
}

pub fn weights(i: usize) -> WeightModel {
    match i % 3 {
        0 => WeightModel::deterministic(1.0).unwrap(),
        1 => WeightModel::pareto(4.0, 1.0).unwrap(),
        _ => WeightModel::discrete(vec![(0.5, 0.3), (1.0, 0.5), (3.0, 0.2)]).unwrap(),
    }
}

pub fn model(family: usize, p: f64, g: usize, w: usize, theta: f64, h: f64) -> ModelSpec {
    let g = observable(g);
    let c = 1.0 + 2.0 * theta * g.bound().powi(2);
    ModelSpec::rank2(measure(family, p, NODES), g, c, theta, weights(w), h).unwrap()
}

pub fn family() -> impl Strategy<Value = (usize, f64)> {
    (0usize..5, 0.5f64..6.0)
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

pub fn odd_cumulants_vanish(family: usize, p: f64, g: usize) -> Result<(), TestCaseError> {
    let mu = measure(family, p, NODES);
    let g = observable(g);
    for j in 1..=4 {
        let k = cumulant(&mu, &g, 2 * j + 1).map_err(|e| fail(e.to_string()))?;
        if k.abs() >= 1e-10 {
            return Err(fail(format!("{}: kappa_{} = {k:e}", mu.name(), 2 * j + 1)));
        }
    }
    Ok(())
}

/// Second differences of φ on 20 points of (0, θ sup|g|) are ≤ 1e-8 when
/// the concavity certificate passes.
pub fn phi_concave(family: usize, p: f64, g: usize, w: usize) -> Result<(), TestCaseError> {
    let m = model(family, p, g, w, 1.0, 0.0);
    let scan = concavity_scan(m.measure(), m.observable(), 20.0, 200).map_err(|e| fail(e.to_string()))?;
    if !scan.pass {
        return Ok(());
    }
    let top = m.observable().bound();
    let d = top / 21.0;
    for i in 1..=20 {
        let x = d * i as f64;
        let f = |t: f64| phi(&m, t).unwrap();
        let second = f(x - d) - 2.0 * f(x) + f(x + d);
        if second > 1e-8 {
            return Err(fail(format!("{}: second difference {second:e} at m = {x}", m.describe())));
        }
    }
    Ok(())
}

/// m⁺ nondecreasing along 10 θ values and along 10 h values.
pub fn monotone_m(family: usize, p: f64, g: usize, w: usize, h0: f64) -> Result<(), TestCaseError> {
    let base = model(family, p, g, w, 1.0, 0.0);
    let tc = theta_c_parts(&base).map_err(|e| fail(e.to_string()))?.theta_c;
    let solve = |m: &ModelSpec| solve_m(m, DEFAULT_TOL).map(|r| r.m_plus).map_err(|e| fail(e.to_string()));
    let mut last = -1.0;
    for i in 0..10 {
        let theta = tc * (0.5 + 0.2 * i as f64);
        let mut mm = model(family, p, g, w, theta, h0);
        mm = mm.with_h(h0).unwrap();
        let v = solve(&mm)?;
        if v < last - 1e-10 {
            return Err(fail(format!("m+ decreased in theta at {theta}: {last} -> {v}")));
        }
        last = v;
    }
    let at = model(family, p, g, w, tc, 0.0);
    let mut last = -1.0;
    for i in 0..10 {
        let h = 0.05 * i as f64;
        let v = solve(&at.with_h(h).unwrap())?;
        if v < last - 1e-10 {
            return Err(fail(format!("m+ decreased in h at {h}: {last} -> {v}")));
        }
        last = v;
    }
    Ok(())
}

/// φ'(0) by central difference equals E^{sb}[W] α₀(g²). When E[W⁴] is
/// infinite the difference quotient converges only linearly in the step,
/// so the step shrinks to keep the bias below the tolerance.
pub fn phi_slope(family: usize, p: f64, w: usize) -> Result<(), TestCaseError> {
    let m = model(family, p, 0, w, 1.0, 0.0);
    let d = if m.weights().moment(4).is_infinite() { 1e-7 } else { 1e-5 };
    let slope = (phi(&m, d).unwrap() - phi(&m, -d).unwrap()) / (2.0 * d);
    let g2 = m.measure().integrate(|x| x * x).unwrap();
    let expect = m.weights().size_biased_mean() * g2;
    if (slope - expect).abs() >= 1e-6 {
        return Err(fail(format!("{}: phi'(0) = {slope}, expected {expect}", m.describe())));
    }
    Ok(())
}

/// Normalization, node doubling and d/dt log mgf against the tilted mean.
pub fn quadrature_consistent(family: usize, p: f64) -> Result<(), TestCaseError> {
    let a = measure(family, p, NODES);
    let b = measure(family, p, 2 * NODES);
    let one = a.integrate(|_| 1.0).unwrap();
    if (one - 1.0).abs() >= 1e-12 {
        return Err(fail(format!("{}: total mass {one}", a.name())));
    }
    let ia = a.integrate(|x| (5.0 * x).exp()).unwrap();
    let ib = b.integrate(|x| (5.0 * x).exp()).unwrap();
    if ((ia - ib) / ib).abs() >= 1e-10 {
        return Err(fail(format!("{}: doubling changed the e^(5x) integral by {:e}", a.name(), (ia - ib) / ib)));
    }
    let g = Observable::identity();
    for t in [0.1, 1.0, 5.0] {
        let d = 1e-4;
        let fd = (log_mgf(&a, &g, t + d) - log_mgf(&a, &g, t - d)) / (2.0 * d);
        let mean = tilted_central_moment(&a, &g, t, 1).unwrap();
        if (fd - mean).abs() >= 1e-6 {
            return Err(fail(format!("{}: t = {t}: finite difference {fd} vs tilted mean {mean}", a.name())));
        }
    }
    Ok(())
}
