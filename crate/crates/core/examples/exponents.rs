//! Fits β and δ for Ising and step-density spins across weight tails and
//! prints them next to the predicted values.

use annealed_grg::critical::{fit_beta, fit_delta, predicted_exponents, DEFAULT_POINTS, DEFAULT_WINDOW};
use annealed_grg::measures::{detect_k, step_default_height, Observable, SpinMeasure, DEFAULT_K_TOL, DEFAULT_NODES};
use annealed_grg::meanfield::ModelSpec;
use annealed_grg::weights::WeightModel;

fn main() -> annealed_grg::error::Result<()> {
    let spins = [
        ("ising", SpinMeasure::ising()),
        ("step", SpinMeasure::step(step_default_height(), DEFAULT_NODES)?),
    ];
    let tails = [
        ("W=1", WeightModel::deterministic(1.0)?),
        ("pareto 3.5", WeightModel::pareto(3.5, 1.0)?),
        ("pareto 4.5", WeightModel::pareto(4.5, 1.0)?),
        ("pareto 5", WeightModel::pareto(5.0, 1.0)?),
    ];
    println!("{:<6} {:<11} {:>7} {:>9} {:>7} {:>9}", "spin", "weights", "beta*", "beta_fit", "delta*", "delta_fit");
    for (sname, mu) in &spins {
        let g = Observable::identity();
        let k = detect_k(mu, &g, 10, DEFAULT_K_TOL)?;
        for (wname, w) in &tails {
            let regime = w.classify_tail(k)?;
            let pred = predicted_exponents(k, regime)?;
            let model = ModelSpec::rank2(mu.clone(), g.clone(), 100.0, 1.0, w.clone(), 0.0)?;
            let b = fit_beta(&model, DEFAULT_WINDOW, DEFAULT_POINTS, pred.log_correction)?;
            let d = fit_delta(&model, DEFAULT_WINDOW, DEFAULT_POINTS, pred.log_correction)?;
            println!(
                "{sname:<6} {wname:<11} {:>7.4} {:>9.4} {:>7.4} {:>9.4}{}",
                pred.beta,
                b.estimate,
                pred.delta,
                d.estimate,
                if pred.log_correction { "  (log-corrected)" } else { "" }
            );
        }
    }
    Ok(())
}
