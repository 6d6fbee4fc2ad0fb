//! Functional fixed point V = T(V) for a non-rank-2 kernel e^{β σ σ'} on a
//! Beta(2) spin density, started from several initial potentials.

use annealed_grg::meanfield::{pressure_general_best, solve_v_branches, sup_distance};
use annealed_grg::{uniqueness_bound, GridKernel, Kernel, ModelSpec, Observable, PicardOptions, SpinMeasure, Start, WeightModel};

fn main() -> annealed_grg::Result<()> {
    let mu = SpinMeasure::beta(2.0, 80)?;
    let g = Observable::identity();
    let w = WeightModel::pareto(4.5, 1.0)?;
    for beta in [0.5, 3.0, 6.0] {
        let kernel = Kernel::Grid(GridKernel::exponential(beta, &g, &mu)?);
        let u = uniqueness_bound(&kernel, &w);
        let model = ModelSpec::new(mu.clone(), g.clone(), kernel, w.clone(), 0.0)?;
        let starts = [
            Start::Paramagnetic,
            Start::Perturbed(0.5),
            Start::Perturbed(-0.5),
            Start::Random { seed: 1, amplitude: 1.0 },
            Start::Random { seed: 2, amplitude: 1.0 },
        ];
        let sols = solve_v_branches(&model, &starts, PicardOptions::default(), 1e-8)?;
        let (p, best) = pressure_general_best(&model, &sols)?;
        println!("beta = {beta}: uniqueness lhs = {:.4} ({}), {} branch(es), pressure = {p:.10}", u.lhs, if u.holds { "holds" } else { "inconclusive" }, sols.len());
        for (i, s) in sols.iter().enumerate() {
            let n = s.v.len();
            let skew = sup_distance(&s.v, &s.v.iter().rev().copied().collect::<Vec<_>>());
            println!(
                "  branch {i}{}: V(-1) ~ {:.6}, V(1) ~ {:.6}, asymmetry {skew:.3e}, residual {:.1e}, {} iterations",
                if i == best { " (max pressure)" } else { "" },
                s.v[0],
                s.v[n - 1],
                s.residual,
                s.iterations
            );
        }
    }
    Ok(())
}
