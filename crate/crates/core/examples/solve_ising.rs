//! Scalar fixed point m/θ = φ(m) for Ising spins: magnetization curve in θ
//! and in h, compared with the closed form m = θ tanh(m) at W ≡ 1.

use annealed_grg::critical::write_curve_csv;
use annealed_grg::meanfield::DEFAULT_TOL;
use annealed_grg::{magnetization_curve, solve_m, Control, ModelSpec, Observable, SpinMeasure, WeightModel};

fn main() -> annealed_grg::Result<()> {
    let w = WeightModel::deterministic(1.0)?;
    let model = ModelSpec::rank2(SpinMeasure::ising(), Observable::identity(), 10.0, 2.0, w, 0.0)?;
    let fp = solve_m(&model, DEFAULT_TOL)?;
    println!("theta = 2: m+ = {:.12}, m - 2 tanh m = {:.2e}", fp.m_plus, fp.m_plus - 2.0 * fp.m_plus.tanh());

    let thetas: Vec<f64> = (0..=12).map(|i| 0.7 + 0.1 * i as f64).collect();
    let rows = magnetization_curve(&model, Control::Theta, &thetas)?;
    write_curve_csv(&rows, std::io::stdout())?;

    let pareto = ModelSpec::rank2(SpinMeasure::ising(), Observable::identity(), 10.0, 1.0, WeightModel::pareto(3.5, 1.0)?, 0.0)?;
    let hs: Vec<f64> = (1..=6).map(|i| 10f64.powi(-i)).rev().collect();
    println!("\nPareto(3.5) at theta_c, field response:");
    let at_c = pareto.with_theta(annealed_grg::theta_c(&pareto)?)?;
    for r in magnetization_curve(&at_c, Control::H, &hs)? {
        println!("h = {:.0e}  m+ = {:.6e}", r.h, r.m_plus);
    }
    Ok(())
}
