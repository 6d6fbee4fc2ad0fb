//! Sufficient condition E^{sb}[W] · ½ δ²(e^Φ) < 1 for a unique functional
//! fixed point, and what happens to random starts on either side of it.

use annealed_grg::kernels::ising_to_rank2;
use annealed_grg::meanfield::{solve_v_branches, sup_distance};
use annealed_grg::{uniqueness_bound, Kernel, ModelSpec, Observable, PicardOptions, SpinMeasure, Start, WeightModel};

fn main() -> annealed_grg::Result<()> {
    let w = WeightModel::deterministic(1.0)?;
    for beta in [0.2, 0.4, 0.6, 1.0] {
        let k = ising_to_rank2(beta)?;
        let u = uniqueness_bound(&Kernel::Rank2(k.clone()), &w);
        let model = ModelSpec::rank2(SpinMeasure::ising(), Observable::identity(), k.c(), k.theta(), w.clone(), 0.0)?;
        let starts: Vec<Start> = (0..5).map(|s| Start::Random { seed: s, amplitude: 2.0 }).collect();
        let sols = solve_v_branches(&model, &starts, PicardOptions::default(), 1e-8)?;
        let spread = sols.iter().flat_map(|a| sols.iter().map(move |b| sup_distance(&a.v, &b.v))).fold(0.0, f64::max);
        println!(
            "beta = {beta}: lhs = {:.6} -> {}; distinct fixed points from 5 random starts: {} (max sup distance {spread:.2e})",
            u.lhs,
            if u.holds { "holds" } else { "inconclusive" },
            sols.len()
        );
    }
    Ok(())
}
