//! Critical coupling θ_c = 1 / (E^{sb}[W] α₀(g²)) for a few spin measures
//! and weight laws.

use annealed_grg::meanfield::theta_c_parts;
use annealed_grg::{ModelSpec, Observable, SpinMeasure, WeightModel};

fn main() -> annealed_grg::Result<()> {
    let spins = [
        SpinMeasure::ising(),
        SpinMeasure::uniform(200)?,
        SpinMeasure::beta(2.0, 200)?,
        SpinMeasure::sphere_marginal(1, 200)?,
        SpinMeasure::sphere_marginal(2, 200)?,
    ];
    let laws = [WeightModel::deterministic(1.0)?, WeightModel::pareto(3.5, 1.0)?, WeightModel::pareto(4.5, 1.0)?];
    println!("{:<22} {:<28} {:>10} {:>10} {:>12}", "measure", "weights", "E^sb[W]", "a0(g^2)", "theta_c");
    for mu in &spins {
        for w in &laws {
            let model = ModelSpec::rank2(mu.clone(), Observable::identity(), 10.0, 1.0, w.clone(), 0.0)?;
            let p = theta_c_parts(&model)?;
            println!(
                "{:<22} {:<28} {:>10.6} {:>10.6} {:>12.9}",
                mu.name(),
                w.describe(),
                p.size_biased_mean,
                p.g_second_moment,
                p.theta_c
            );
        }
    }

    // Ising phase transition in the original parametrization: sinh β_c = E[W]/E[W²].
    for w in &laws {
        let beta_c = (w.mean() / w.second_moment()).asinh();
        println!("{}: beta_c = {beta_c:.10}", w.describe());
    }
    Ok(())
}
