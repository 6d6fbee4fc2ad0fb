//! Pair interactions K = e^Φ: the rank-2 form c + θ g⊗g and a general
//! grid-sampled form on a measure's support.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{Observable, SpinMeasure};
use crate::weights::WeightModel;

/// K(σ, σ') = c + θ g(σ) g(σ').
#[derive(Debug, Clone)]
pub struct Rank2Kernel {
    c: f64,
    theta: f64,
    g: Observable,
}

/// min over [-1, 1]² of c + θ g(σ) g(σ') > 0, using the range of g.
pub fn rank2_positive(c: f64, theta: f64, g: &Observable) -> bool {
    let (lo, hi) = g.extremes();
    // g·g' ranges over [min of corner products, max of corner products]
    let corners = [lo * lo, lo * hi, hi * hi];
    let worst = if theta >= 0.0 {
        corners.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        corners.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    c + theta * worst > 0.0
}

impl Rank2Kernel {
    /// Fails unless c > 0 and the kernel is strictly positive on [-1, 1]².
    pub fn new(c: f64, theta: f64, g: Observable) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() || !theta.is_finite() {
            return Err(Error::InvalidParameter(format!("need finite c > 0 and theta, got c={c}, theta={theta}")));
        }
        if !rank2_positive(c, theta, &g) {
            return Err(Error::Domain(format!(
                "kernel c + theta*g*g' is not strictly positive (c={c}, theta={theta}, g={})",
                g.name()
            )));
        }
        Ok(Self { c, theta, g })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn g(&self) -> &Observable {
        &self.g
    }

    /// Same kernel with a different θ (positivity re-checked).
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.c, theta, self.g.clone())
    }

    #[inline]
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        self.c + self.theta * self.g.eval(s) * self.g.eval(t)
    }

    /// |θ| (max g - min g)².
    pub fn second_order_variation(&self) -> f64 {
        let r = self.g.range();
        self.theta.abs() * r * r
    }
}

/// Ising coupling e^{βσσ'} on ±1 written as cosh β + sinh β σσ'.
pub fn ising_to_rank2(beta: f64) -> Result<Rank2Kernel> {
    Rank2Kernel::new(beta.cosh(), beta.sinh(), Observable::identity())
}

/// (c̃, β) with c̃ = √(c² - θ²) and β = ½ log((c + θ)/(c - θ)), so that
/// c + θσσ' = c̃ e^{βσσ'} on ±1.
pub fn rank2_to_ising(c: f64, theta: f64) -> Result<(f64, f64)> {
    if !(c > theta.abs()) {
        return Err(Error::Domain(format!("Ising form needs c > |theta|, got c={c}, theta={theta}")));
    }
    Ok(((c * c - theta * theta).sqrt(), 0.5 * ((c + theta) / (c - theta)).ln()))
}

/// e^Φ sampled on a measure's support (atoms first, then quadrature nodes).
#[derive(Debug, Clone)]
pub struct GridKernel {
    nodes: Vec<f64>,
    /// Row-major n×n.
    values: Vec<f64>,
    symmetric: bool,
}

impl GridKernel {
    /// Tabulates `f` on the support of `mu`.
    pub fn from_fn(mu: &SpinMeasure, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let nodes: Vec<f64> = mu.support().map(|p| p.0).collect();
        let n = nodes.len();
        let mut values = Vec::with_capacity(n * n);
        for &s in &nodes {
            for &t in &nodes {
                values.push(f(s, t));
            }
        }
        Self::from_values(nodes, values)
    }

    pub fn from_rank2(k: &Rank2Kernel, mu: &SpinMeasure) -> Result<Self> {
        Self::from_fn(mu, |s, t| k.eval(s, t))
    }

    /// e^{β g(σ) g(σ')}.
    pub fn exponential(beta: f64, g: &Observable, mu: &SpinMeasure) -> Result<Self> {
        Self::from_fn(mu, |s, t| (beta * g.eval(s) * g.eval(t)).exp())
    }

    /// Reads a square table from CSV: the first row lists grid locations,
    /// each following row holds K(x_i, x_j) for j over the grid. Values are
    /// bilinearly interpolated onto the support of `mu`.
    pub fn from_csv(path: &std::path::Path, mu: &SpinMeasure) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Config(format!("{}: empty kernel table", path.display())));
        }
        let grid = rows.remove(0);
        let m = grid.len();
        if m < 2 || rows.len() != m || rows.iter().any(|r| r.len() != m) {
            return Err(Error::Config(format!("{}: expected a grid row plus a {m}x{m} table", path.display())));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] > -1.0 || grid[m - 1] < 1.0 {
            return Err(Error::Config(format!(
                "{}: grid must be strictly increasing and cover [-1, 1]",
                path.display()
            )));
        }
        let locate = |x: f64| -> (usize, f64) {
            let i = grid.partition_point(|&g| g <= x).clamp(1, m - 1) - 1;
            (i, (x - grid[i]) / (grid[i + 1] - grid[i]))
        };
        Self::from_fn(mu, |s, t| {
            let (i, a) = locate(s);
            let (j, b) = locate(t);
            (1.0 - a) * (1.0 - b) * rows[i][j]
                + a * (1.0 - b) * rows[i + 1][j]
                + (1.0 - a) * b * rows[i][j + 1]
                + a * b * rows[i + 1][j + 1]
        })
    }

    fn from_values(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        for (idx, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Evaluation { node: nodes[idx / n], value: v });
            }
        }
        let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let symmetric = (0..n).all(|i| (0..i).all(|j| (values[i * n + j] - values[j * n + i]).abs() <= 1e-14 * scale));
        Ok(Self { nodes, values, symmetric })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nodes.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.nodes.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// sup over node quadruples of f(1,3) - f(2,3) - f(1,4) + f(2,4).
    pub fn second_order_variation(&self) -> f64 {
        let n = self.nodes.len();
        let mut best = 0.0f64;
        for a in 0..n {
            let ra = self.row(a);
            for b in 0..a {
                let rb = self.row(b);
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (x, y) in ra.iter().zip(rb) {
                    let d = x - y;
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                best = best.max(hi - lo);
            }
        }
        best
    }

    /// Whether the table was built on exactly this measure's support.
    pub fn matches(&self, mu: &SpinMeasure) -> bool {
        self.nodes.len() == mu.support_len() && self.nodes.iter().zip(mu.support()).all(|(a, b)| *a == b.0)
    }
}

/// Either kernel representation.
#[derive(Debug, Clone)]
pub enum Kernel {
    Rank2(Rank2Kernel),
    Grid(GridKernel),
}

impl Kernel {
    pub fn second_order_variation(&self) -> f64 {
        match self {
            Kernel::Rank2(k) => k.second_order_variation(),
            Kernel::Grid(k) => k.second_order_variation(),
        }
    }
}

/// Strict positivity of the kernel.
pub fn validate_positive(k: &Kernel) -> bool {
    match k {
        Kernel::Rank2(k) => rank2_positive(k.c, k.theta, &k.g),
        Kernel::Grid(k) => k.min_entry() > 0.0,
    }
}

/// Sufficient condition for a unique fixed point: E^{sb}(W) · ½ δ⁽²⁾(e^Φ) < 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub lhs: f64,
    pub holds: bool,
    pub size_biased_mean: f64,
    pub variation: f64,
}

pub fn uniqueness_bound(k: &Kernel, w: &WeightModel) -> UniquenessReport {
    let sb = w.size_biased_mean();
    let variation = k.second_order_variation();
    let lhs = sb * 0.5 * variation;
    UniquenessReport { lhs, holds: lhs < 1.0, size_biased_mean: sb, variation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ising_conversion_examples() {
        let (ct, beta) = rank2_to_ising(5.0, 3.0).unwrap();
        assert_abs_diff_eq!(ct, 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(beta, 2f64.ln(), epsilon = 1e-15);
        let k = ising_to_rank2(0.0).unwrap();
        assert_eq!((k.c(), k.theta()), (1.0, 0.0));
        let k = ising_to_rank2(0.7).unwrap();
        let (ct, beta) = rank2_to_ising(k.c(), k.theta()).unwrap();
        assert_abs_diff_eq!(beta, 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(ct, 1.0, epsilon = 1e-14);
        assert!(matches!(rank2_to_ising(1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn variation_examples() {
        let ising = SpinMeasure::ising();
        let beta = 2f64.ln();
        let gk = GridKernel::exponential(beta, &Observable::identity(), &ising).unwrap();
        assert_abs_diff_eq!(gk.second_order_variation(), 4.0 * beta.sinh(), epsilon = 1e-14);
        assert_abs_diff_eq!(gk.second_order_variation(), 3.0, epsilon = 1e-14);
        let flat = Rank2Kernel::new(2.0, 0.0, Observable::identity()).unwrap();
        assert_eq!(flat.second_order_variation(), 0.0);
        let k = Rank2Kernel::new(2.0, 0.5, Observable::identity()).unwrap();
        assert_abs_diff_eq!(k.second_order_variation(), 2.0, epsilon = 1e-15);
        let mu = SpinMeasure::uniform(200).unwrap();
        let grid = GridKernel::from_rank2(&k, &mu).unwrap();
        assert_abs_diff_eq!(grid.second_order_variation(), 2.0, epsilon = 1e-3);
        assert!(grid.is_symmetric());
    }

    #[test]
    fn uniqueness_examples() {
        let w = WeightModel::deterministic(1.0).unwrap();
        let ising = SpinMeasure::ising();
        for (beta, holds) in [(0.4, true), (0.6, false)] {
            let k = Kernel::Grid(GridKernel::exponential(beta, &Observable::identity(), &ising).unwrap());
            let r = uniqueness_bound(&k, &w);
            assert_abs_diff_eq!(r.lhs, 2.0 * f64::sinh(beta), epsilon = 1e-14);
            assert_eq!(r.holds, holds);
        }
        let k = Kernel::Rank2(Rank2Kernel::new(1.0, 0.0, Observable::identity()).unwrap());
        assert_eq!(uniqueness_bound(&k, &w).lhs, 0.0);
    }

    #[test]
    fn positivity_examples() {
        let g = Observable::identity();
        assert!(rank2_positive(1.0, 0.5, &g));
        assert!(!rank2_positive(1.0, 1.5, &g));
        assert!(!rank2_positive(1.0, -1.5, &g));
        assert!(Rank2Kernel::new(1.0, 1.5, g.clone()).is_err());
        let mu = SpinMeasure::beta(2.0, 50).unwrap();
        let gk = GridKernel::exponential(3.0, &g, &mu).unwrap();
        assert!(validate_positive(&Kernel::Grid(gk)));
        let even = Observable::from_fn("x^2", |x| x * x).unwrap();
        assert!(rank2_positive(1.0, -0.9, &even));
        assert!(!rank2_positive(1.0, -1.1, &even));
    }

    #[test]
    fn csv_kernel_interpolates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        // K(s, t) = 2 + s t is bilinear, so interpolation is exact
        let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut text = grid.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",") + "\n";
        for &s in &grid {
            text += &(grid.iter().map(|&t| (2.0 + s * t).to_string()).collect::<Vec<_>>().join(",") + "\n");
        }
        std::fs::write(&path, text).unwrap();
        let mu = SpinMeasure::uniform(20).unwrap();
        let k = GridKernel::from_csv(&path, &mu).unwrap();
        assert!(k.matches(&mu));
        for (i, (s, _)) in mu.support().enumerate() {
            for (j, (t, _)) in mu.support().enumerate() {
                assert_abs_diff_eq!(k.at(i, j), 2.0 + s * t, epsilon = 1e-14);
            }
        }
    }
}
