//! The step density has vanishing fourth cumulant at its default height,
//! so its first negative cumulant is the sixth and the critical exponents
//! change class.

use annealed_grg::measures::{step_default_height, step_normalizer, DEFAULT_K_TOL};
use annealed_grg::{concavity_scan, cumulant, detect_k, Observable, SpinMeasure};

fn main() -> annealed_grg::Result<()> {
    let g = Observable::identity();
    let b0 = step_default_height();
    let sqrt10 = 10f64.sqrt();
    println!("default height b = {b0:.12}  normalizer = {:.12}", step_normalizer(b0));

    let mu = SpinMeasure::step(b0, 200)?;
    for j in 1..=8 {
        println!("kappa_{j} = {:+.12e}", cumulant(&mu, &g, j)?);
    }
    println!("closed form kappa_6 = {:+.12e}", -4.0 * (20.0 + 7.0 * sqrt10) / 8505.0);
    println!("k = {}", detect_k(&mu, &g, 10, DEFAULT_K_TOL)?);

    // Sweep the height: κ₄ changes sign at the default height.
    println!("\n{:>8} {:>14} {:>3}", "b", "kappa_4", "k");
    for b in [0.5, 1.0, 2.0, 3.0, b0, 5.0] {
        let mu = SpinMeasure::step(b, 200)?;
        let k4 = cumulant(&mu, &g, 4)?;
        let k = detect_k(&mu, &g, 10, DEFAULT_K_TOL).map(|k| k.to_string()).unwrap_or_else(|_| "-".into());
        println!("{b:>8.4} {k4:>+14.6e} {k:>3}");
    }

    // The other root of κ₄ = 0 breaks concavity of the tilted mean.
    let other = 2.0 * (59.0 + 18.0 * sqrt10);
    for b in [b0, other] {
        let r = concavity_scan(&SpinMeasure::step(b, 200)?, &g, 20.0, 200)?;
        println!("b = {b:.6}: concavity {} (worst {:+.3e} at t = {:.3})", if r.pass { "pass" } else { "fail" }, r.worst_value, r.worst_t);
    }
    Ok(())
}
