//! Pressure from the rank-2 formula and from the general functional form,
//! and the approach of the exact finite-N pressure to its limit.

use annealed_grg::meanfield::{finite_volume_offset, solve_v_branches, pressure_general_best, DEFAULT_TOL};
use annealed_grg::simulate::{exact_annealed_model, GrgInstance};
use annealed_grg::{pressure_rank2, solve_m, ModelSpec, Observable, PicardOptions, SpinMeasure, Start, WeightModel};

fn main() -> annealed_grg::Result<()> {
    let w = WeightModel::pareto(4.5, 1.0)?;
    let mu = SpinMeasure::beta(2.0, 60)?;
    println!("{:>6} {:>18} {:>18} {:>10}", "theta", "rank-2 form", "general form", "diff");
    for theta in [1.0, 2.0, 4.0, 6.0] {
        let model = ModelSpec::rank2(mu.clone(), Observable::identity(), 8.0, theta, w.clone(), 0.0)?;
        let fp = solve_m(&model, DEFAULT_TOL)?;
        let p2 = pressure_rank2(&model, &fp)?;
        let sols = solve_v_branches(&model, &[Start::Perturbed(0.5), Start::Perturbed(-0.5)], PicardOptions::default(), 1e-8)?;
        let (pg, _) = pressure_general_best(&model, &sols)?;
        println!("{theta:>6} {p2:>18.12} {pg:>18.12} {:>10.2e}", (p2 - pg).abs());
    }

    // Ising with sinh β = 2 and W ≡ 1: exact (1/N) log Z_N against the limit.
    let beta = 2f64.asinh();
    let one = WeightModel::deterministic(1.0)?;
    let model = ModelSpec::rank2(SpinMeasure::ising(), Observable::identity(), beta.cosh(), beta.sinh(), one.clone(), 0.0)?;
    let limit = pressure_rank2(&model, &solve_m(&model, DEFAULT_TOL)?)? + finite_volume_offset(&one);
    println!("\nlimit of (1/N) log Z_N = {limit:.10}");
    for n in 2..=12 {
        let r = exact_annealed_model(&model, &GrgInstance::from_law(&one, n)?)?;
        println!("N = {n:>2}: psi_N = {:.10}  gap = {:+.3e}", r.pressure, r.pressure - limit);
    }
    Ok(())
}
