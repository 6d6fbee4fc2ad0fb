//! Single-spin a priori measures on [-1, 1] and the observables `g` that
//! couple to the rank-2 interaction.
//!
//! A [`SpinMeasure`] is stored as a finite list of point masses: the atoms
//! of the measure plus a precomputed quadrature rule for its density part,
//! with each node carrying its full probability mass. All integrals are
//! plain weighted sums over that support, so every operation here is
//! deterministic given the rule.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_jacobi_symmetric, gauss_legendre};

/// Real function on the spin space.
pub type SpinFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default number of quadrature nodes for density parts.
pub const DEFAULT_NODES: usize = 200;

/// Below this magnitude a cumulant counts as zero in [`detect_k`].
pub const DEFAULT_K_TOL: f64 = 1e-9;

/// The step-density height that kills the fourth cumulant while keeping the
/// third tilted cumulant negative: 2(59 - 18√10).
pub fn step_default_height() -> f64 {
    2.0 * (59.0 - 18.0 * 10f64.sqrt())
}

/// Grid used to classify observables (oddness, sign matching, sup norm).
const PROBE_POINTS: usize = 4001;

/// An observable g: [-1, 1] → ℝ together with its symmetry flags.
#[derive(Clone)]
pub struct Observable {
    name: String,
    g: SpinFn,
    odd: bool,
    sign_matched: bool,
    bound: f64,
    lo: f64,
    hi: f64,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("odd", &self.odd)
            .field("sign_matched", &self.sign_matched)
            .field("bound", &self.bound)
            .finish()
    }
}

impl Observable {
    /// Wraps `g`, probing it on a uniform grid to set the `odd` and
    /// `sign_matched` flags and the sup-norm bound.
    pub fn from_fn(name: impl Into<String>, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let name = name.into();
        let g: SpinFn = Arc::new(g);
        let mut odd = true;
        let mut sign_matched = true;
        let mut bound = 0.0f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..PROBE_POINTS {
            let x = -1.0 + 2.0 * k as f64 / (PROBE_POINTS - 1) as f64;
            let v = g(x);
            if !v.is_finite() {
                return Err(Error::Evaluation { node: x, value: v });
            }
            bound = bound.max(v.abs());
            lo = lo.min(v);
            hi = hi.max(v);
            let mirrored = g(-x);
            if (v + mirrored).abs() > 1e-14 * v.abs().max(1.0) {
                odd = false;
            }
            let sx = if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
            let sv = if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
            if sx != sv {
                sign_matched = false;
            }
        }
        Ok(Self { name, g, odd, sign_matched, bound, lo, hi })
    }

    /// g(σ) = σ.
    pub fn identity() -> Self {
        Self::from_fn("sigma", |x| x).expect("identity is finite")
    }

    /// g(σ) = σ³.
    pub fn cube() -> Self {
        Self::from_fn("sigma^3", |x| x * x * x).expect("cube is finite")
    }

    /// g(σ) = sin(πσ/2).
    pub fn half_sine() -> Self {
        Self::from_fn("sin(pi*sigma/2)", |x| (std::f64::consts::FRAC_PI_2 * x).sin())
            .expect("sine is finite")
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_odd(&self) -> bool {
        self.odd
    }

    pub fn is_sign_matched(&self) -> bool {
        self.sign_matched
    }

    /// sup |g| over [-1, 1] (as seen on the probe grid).
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// max g - min g over [-1, 1] (probe grid).
    pub fn range(&self) -> f64 {
        self.hi - self.lo
    }

    /// (min g, max g) over [-1, 1] (probe grid).
    pub fn extremes(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// Builder parameters for [`make_measure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// ½δ₋₁ + ½δ₊₁.
    Ising,
    /// Uniform density on [-1, 1].
    Uniform,
    /// Density ∝ (1 - σ²)^(b-1): a Beta(b, b) law stretched to [-1, 1].
    Beta { b: f64 },
    /// Density 1 on |σ| > 1/3 and `b` on |σ| ≤ 1/3 (normalized).
    Step {
        #[serde(default)]
        b: Option<f64>,
    },
    /// First-coordinate marginal of the uniform law on the sphere S^q ⊂ ℝ^{q+1}.
    SphereMarginal { q: u32 },
    /// Piecewise-linear density through the given (σ, value) points.
    Tabulated { points: Vec<(f64, f64)> },
    /// Finite set of atoms (location, weight); weights are normalized.
    Atoms { atoms: Vec<(f64, f64)> },
}

#[derive(Clone, Debug)]
enum ContinuousSampler {
    Beta(f64),
    Uniform,
    /// Inner height `b` on |σ| ≤ 1/3, height 1 outside.
    Step(f64),
    /// Piecewise-linear density (sorted breakpoints, cumulative masses).
    Linear { points: Vec<(f64, f64)>, cumulative: Vec<f64> },
    /// Draw from the quadrature nodes themselves.
    Nodes,
}

/// A priori single-spin measure on [-1, 1].
#[derive(Clone)]
pub struct SpinMeasure {
    name: String,
    atoms: Vec<(f64, f64)>,
    quad_nodes: Vec<(f64, f64)>,
    density: Option<SpinFn>,
    symmetric: bool,
    sampler: ContinuousSampler,
    tilts: Vec<(f64, Observable)>,
}

impl fmt::Debug for SpinMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpinMeasure")
            .field("name", &self.name)
            .field("atoms", &self.atoms)
            .field("quad_nodes", &self.quad_nodes.len())
            .field("symmetric", &self.symmetric)
            .field("tilts", &self.tilts.iter().map(|t| t.0).collect::<Vec<_>>())
            .finish()
    }
}

impl SpinMeasure {
    fn assemble(
        name: String,
        atoms: Vec<(f64, f64)>,
        quad_nodes: Vec<(f64, f64)>,
        density: Option<SpinFn>,
        sampler: ContinuousSampler,
    ) -> Result<Self> {
        for &(x, w) in atoms.iter().chain(quad_nodes.iter()) {
            if !(-1.0..=1.0).contains(&x) || !x.is_finite() {
                return Err(Error::InvalidParameter(format!("support point {x} outside [-1, 1]")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("non-positive mass {w} at {x}")));
            }
        }
        let total: f64 = atoms.iter().chain(quad_nodes.iter()).map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("measure has zero total mass".into()));
        }
        let atoms: Vec<_> = atoms.into_iter().map(|(x, w)| (x, w / total)).collect();
        let quad_nodes: Vec<_> = quad_nodes.into_iter().map(|(x, w)| (x, w / total)).collect();
        let mut m = Self {
            name,
            atoms,
            quad_nodes,
            density,
            symmetric: false,
            sampler,
            tilts: Vec::new(),
        };
        m.symmetric = m.detect_and_fix_symmetry();
        Ok(m)
    }

    /// Detects mirror symmetry of the support (within 1e-12) and, when
    /// present, makes it exact so that odd integrals cancel pairwise.
    fn detect_and_fix_symmetry(&mut self) -> bool {
        fn mirror(points: &mut [(f64, f64)]) -> bool {
            points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let n = points.len();
            for i in 0..n / 2 {
                let j = n - 1 - i;
                let (xi, wi) = points[i];
                let (xj, wj) = points[j];
                if (xi + xj).abs() > 1e-12 || (wi - wj).abs() > 1e-12 * wi.max(wj) {
                    return false;
                }
            }
            if n % 2 == 1 && points[n / 2].0.abs() > 1e-12 {
                return false;
            }
            for i in 0..n / 2 {
                let j = n - 1 - i;
                let x = 0.5 * (points[j].0 - points[i].0);
                let w = 0.5 * (points[i].1 + points[j].1);
                points[i] = (-x, w);
                points[j] = (x, w);
            }
            if n % 2 == 1 {
                points[n / 2].0 = 0.0;
            }
            true
        }
        let a = mirror(&mut self.atoms);
        let q = mirror(&mut self.quad_nodes);
        a && q
    }

    /// ½δ₋₁ + ½δ₊₁.
    pub fn ising() -> Self {
        Self::from_atoms("ising", vec![(-1.0, 0.5), (1.0, 0.5)]).expect("valid atoms")
    }

    /// Purely atomic measure; weights are normalized.
    pub fn from_atoms(name: impl Into<String>, atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("atom list is empty".into()));
        }
        Self::assemble(name.into(), atoms, Vec::new(), None, ContinuousSampler::Nodes)
    }

    /// Uniform density on [-1, 1] with a Gauss–Legendre rule of `nodes` points.
    pub fn uniform(nodes: usize) -> Result<Self> {
        let rule = gauss_legendre(nodes, -1.0, 1.0)?;
        let quad = rule.into_iter().map(|(x, w)| (x, 0.5 * w)).collect();
        Self::assemble("uniform".into(), Vec::new(), quad, Some(Arc::new(|_| 0.5)), ContinuousSampler::Uniform)
    }

    /// Stretched Beta(b, b) density ∝ (1 - σ²)^(b-1) with a matching
    /// Gauss–Jacobi rule, so singular endpoints (b < 1) are handled exactly.
    pub fn beta(b: f64, nodes: usize) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("beta parameter must be > 0, got {b}")));
        }
        let rule = gauss_jacobi_symmetric(nodes, b - 1.0)?;
        let norm = beta_density_norm(b);
        let density: SpinFn = Arc::new(move |x: f64| {
            if x.abs() >= 1.0 {
                if b == 1.0 { norm } else if b > 1.0 { 0.0 } else { f64::INFINITY }
            } else {
                norm * (1.0 - x * x).powf(b - 1.0)
            }
        });
        let name = if b == 1.0 { "uniform".to_string() } else { format!("beta({b})") };
        Self::assemble(name, Vec::new(), rule, Some(density), ContinuousSampler::Beta(b))
    }

    /// Step density: height 1 on |σ| > 1/3 and `b` on |σ| ≤ 1/3. The rule
    /// uses three Gauss–Legendre panels split exactly at ±1/3.
    pub fn step(b: f64, nodes: usize) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("step height must be > 0, got {b}")));
        }
        let per_panel = nodes.div_ceil(3).max(1);
        let third = 1.0 / 3.0;
        let mut quad = Vec::with_capacity(3 * per_panel);
        for &(lo, hi, height) in &[(-1.0, -third, 1.0), (-third, third, b), (third, 1.0, 1.0)] {
            for (x, w) in gauss_legendre(per_panel, lo, hi)? {
                quad.push((x, w * height));
            }
        }
        let norm = step_normalizer(b);
        let density: SpinFn = Arc::new(move |x: f64| {
            if x.abs() > 1.0 {
                0.0
            } else if x.abs() <= 1.0 / 3.0 {
                b / norm
            } else {
                1.0 / norm
            }
        });
        Self::assemble(format!("step({b})"), Vec::new(), quad, Some(density), ContinuousSampler::Step(b))
    }

    /// First-coordinate marginal of the uniform measure on S^q, which is the
    /// stretched Beta(q/2, q/2) law.
    pub fn sphere_marginal(q: u32, nodes: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameter("sphere dimension q must be >= 1".into()));
        }
        let mut m = Self::beta(q as f64 / 2.0, nodes)?;
        m.name = format!("sphere_marginal({q})");
        Ok(m)
    }

    /// Density given by linear interpolation through `points` (σ ascending,
    /// values ≥ 0). Each segment gets its own Gauss–Legendre panel.
    pub fn tabulated(points: Vec<(f64, f64)>, nodes: usize) -> Result<Self> {
        let mut points = points;
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        if points.len() < 2 {
            return Err(Error::InvalidParameter("tabulated density needs at least two points".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter("tabulated abscissae must be strictly increasing".into()));
            }
        }
        if points[0].0 < -1.0 || points[points.len() - 1].0 > 1.0 {
            return Err(Error::InvalidParameter("tabulated density must live inside [-1, 1]".into()));
        }
        if points.iter().any(|p| !(p.1 >= 0.0) || !p.1.is_finite()) {
            return Err(Error::InvalidParameter("tabulated density values must be finite and >= 0".into()));
        }
        let segs = points.len() - 1;
        let per_seg = (nodes / segs).max(4);
        let mut quad = Vec::new();
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            for (x, qw) in gauss_legendre(per_seg, x0, x1)? {
                let y = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
                if y > 0.0 {
                    quad.push((x, qw * y));
                }
            }
            let last = *cumulative.last().unwrap();
            cumulative.push(last + 0.5 * (y0 + y1) * (x1 - x0));
        }
        let total = *cumulative.last().unwrap();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("tabulated density integrates to zero".into()));
        }
        let table = points.clone();
        let density: SpinFn = Arc::new(move |x: f64| interp_linear(&table, x) / total);
        Self::assemble(
            "tabulated".into(),
            Vec::new(),
            quad,
            Some(density),
            ContinuousSampler::Linear { points, cumulative },
        )
    }

    /// Reads a tabulated density from CSV rows `sigma,value` (an optional
    /// header line is skipped).
    pub fn tabulated_from_csv(path: &std::path::Path, nodes: usize) -> Result<Self> {
        Self::tabulated(read_pairs_csv(path)?, nodes)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Quadrature nodes of the density part, each with its probability mass.
    pub fn quad_nodes(&self) -> &[(f64, f64)] {
        &self.quad_nodes
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Normalized density of the continuous part at σ (zero for atomic measures).
    pub fn density(&self, x: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d(x))
    }

    /// All support points (atoms first, then quadrature nodes) with masses.
    pub fn support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().chain(self.quad_nodes.iter()).copied()
    }

    pub fn support_len(&self) -> usize {
        self.atoms.len() + self.quad_nodes.len()
    }

    /// True when the measure has no density part.
    pub fn is_atomic(&self) -> bool {
        self.quad_nodes.is_empty()
    }

    /// ∫ f dμ as atom sum plus quadrature sum.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (x, w) in self.support() {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::Evaluation { node: x, value: v });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Draws one spin. Tilted measures are sampled by rejection against the
    /// untilted base law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.tilts.is_empty() {
            return self.sample_base(rng);
        }
        let log_cap: f64 = self.tilts.iter().map(|(h, g)| h.abs() * g.bound()).sum();
        loop {
            let x = self.sample_base(rng);
            let log_acc: f64 = self.tilts.iter().map(|(h, g)| h * g.eval(x)).sum::<f64>() - log_cap;
            if rng.random::<f64>() < log_acc.exp() {
                return x;
            }
        }
    }

    fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // masses of a tilted measure are reweighted, so draw atoms from the
        // untilted weights stored alongside: recover them by undoing the tilt
        let atom_mass: f64 = self.base_atom_weights().iter().map(|a| a.1).sum();
        let u: f64 = rng.random();
        if u < atom_mass || self.quad_nodes.is_empty() {
            let atoms = self.base_atom_weights();
            let target = rng.random::<f64>() * atoms.iter().map(|a| a.1).sum::<f64>();
            let mut acc = 0.0;
            for &(x, w) in &atoms {
                acc += w;
                if target < acc {
                    return x;
                }
            }
            return atoms.last().map(|a| a.0).unwrap_or(0.0);
        }
        match &self.sampler {
            ContinuousSampler::Uniform => rng.random_range(-1.0..1.0),
            ContinuousSampler::Beta(b) => {
                let d = Beta::new(*b, *b).expect("b > 0 checked at construction");
                2.0 * d.sample(rng) - 1.0
            }
            ContinuousSampler::Step(b) => {
                let inner = 2.0 / 3.0 * b;
                let outer = 4.0 / 3.0;
                if rng.random::<f64>() * (inner + outer) < inner {
                    rng.random_range(-1.0 / 3.0..1.0 / 3.0)
                } else {
                    let x = rng.random_range(1.0 / 3.0..1.0);
                    if rng.random::<bool>() { x } else { -x }
                }
            }
            ContinuousSampler::Linear { points, cumulative } => sample_linear(points, cumulative, rng),
            ContinuousSampler::Nodes => {
                let nodes = self.base_node_weights();
                let total: f64 = nodes.iter().map(|n| n.1).sum();
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                for &(x, w) in &nodes {
                    acc += w;
                    if target < acc {
                        return x;
                    }
                }
                nodes.last().map(|n| n.0).unwrap_or(0.0)
            }
        }
    }

    fn untilt_factor(&self, x: f64) -> f64 {
        (-self.tilts.iter().map(|(h, g)| h * g.eval(x)).sum::<f64>()).exp()
    }

    fn base_atom_weights(&self) -> Vec<(f64, f64)> {
        if self.tilts.is_empty() {
            return self.atoms.clone();
        }
        let total = self.base_total();
        self.atoms.iter().map(|&(x, w)| (x, w * self.untilt_factor(x) / total)).collect()
    }

    fn base_node_weights(&self) -> Vec<(f64, f64)> {
        if self.tilts.is_empty() {
            return self.quad_nodes.clone();
        }
        let total = self.base_total();
        self.quad_nodes.iter().map(|&(x, w)| (x, w * self.untilt_factor(x) / total)).collect()
    }

    fn base_total(&self) -> f64 {
        self.support().map(|(x, w)| w * self.untilt_factor(x)).sum()
    }
}

fn beta_density_norm(b: f64) -> f64 {
    // 1 / (2^{2b-1} B(b, b))
    let log_b = 2.0 * ln_gamma(b) - ln_gamma(2.0 * b);
    (-(2.0 * b - 1.0) * std::f64::consts::LN_2 - log_b).exp()
}

/// Total mass of the unnormalized step density: (4 + 2b)/3. At the default
/// height this equals 8(10 - 3√10).
pub fn step_normalizer(b: f64) -> f64 {
    (4.0 + 2.0 * b) / 3.0
}

fn interp_linear(points: &[(f64, f64)], x: f64) -> f64 {
    if x < points[0].0 || x > points[points.len() - 1].0 {
        return 0.0;
    }
    let idx = points.partition_point(|p| p.0 <= x).clamp(1, points.len() - 1);
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn sample_linear<R: Rng + ?Sized>(points: &[(f64, f64)], cumulative: &[f64], rng: &mut R) -> f64 {
    let total = *cumulative.last().unwrap();
    invert_linear_cdf(points, cumulative, rng.random::<f64>() * total)
}

/// Inverse of the (unnormalized) CDF of a piecewise-linear density;
/// `cumulative[i]` is the mass left of `points[i]`.
pub(crate) fn invert_linear_cdf(points: &[(f64, f64)], cumulative: &[f64], target: f64) -> f64 {
    let seg = cumulative.partition_point(|&c| c <= target).clamp(1, points.len() - 1) - 1;
    let (x0, y0) = points[seg];
    let (x1, y1) = points[seg + 1];
    let r = target - cumulative[seg];
    let dx = x1 - x0;
    let slope = (y1 - y0) / dx;
    // solve y0 s + slope s²/2 = r for s in [0, dx]
    let s = if slope.abs() < 1e-14 * y0.abs().max(1e-300) {
        if y0 > 0.0 { r / y0 } else { 0.5 * dx }
    } else {
        let disc = (y0 * y0 + 2.0 * slope * r).max(0.0);
        2.0 * r / (y0 + disc.sqrt()).max(1e-300)
    };
    x0 + s.clamp(0.0, dx)
}

/// Reads two-column numeric CSV; a non-numeric first line is treated as a header.
pub(crate) fn read_pairs_csv(path: &std::path::Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Config(format!("{}: row {} has fewer than two columns", path.display(), i + 1)));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => out.push((a, b)),
            _ if i == 0 => continue,
            _ => return Err(Error::Config(format!("{}: row {} is not numeric", path.display(), i + 1))),
        }
    }
    Ok(out)
}

/// Builds a measure from its spec. `nodes` sets the quadrature order of the
/// density part.
pub fn make_measure(spec: &MeasureSpec, nodes: usize) -> Result<SpinMeasure> {
    match spec {
        MeasureSpec::Ising => Ok(SpinMeasure::ising()),
        MeasureSpec::Uniform => SpinMeasure::uniform(nodes),
        MeasureSpec::Beta { b } => SpinMeasure::beta(*b, nodes),
        MeasureSpec::Step { b } => {
            let default = step_default_height();
            let b = b.unwrap_or(default);
            if (b - default).abs() > 1e-12 {
                eprintln!(
                    "warning: step height {b} differs from 2(59-18*sqrt(10)); \
                     the fourth cumulant will not vanish"
                );
            }
            SpinMeasure::step(b, nodes)
        }
        MeasureSpec::SphereMarginal { q } => SpinMeasure::sphere_marginal(*q, nodes),
        MeasureSpec::Tabulated { points } => SpinMeasure::tabulated(points.clone(), nodes),
        MeasureSpec::Atoms { atoms } => SpinMeasure::from_atoms("atoms", atoms.clone()),
    }
}

/// log ∫ e^{t g} dμ, evaluated with a max shift.
pub fn log_mgf(mu: &SpinMeasure, g: &Observable, t: f64) -> f64 {
    let vals: Vec<(f64, f64)> = mu.support().map(|(x, w)| (t * g.eval(x), w)).collect();
    let shift = vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = vals.iter().map(|&(e, w)| w * (e - shift).exp()).sum();
    shift + s.ln()
}

/// Mean (order 1), variance (order 2) or third central moment (order 3) of
/// g under the tilted law dν_t ∝ e^{t g} dμ. These are exactly the first
/// three t-derivatives of [`log_mgf`].
pub fn tilted_central_moment(mu: &SpinMeasure, g: &Observable, t: f64, order: u32) -> Result<f64> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidParameter(format!("central moment order must be 1, 2 or 3, got {order}")));
    }
    let vals: Vec<(f64, f64)> = mu.support().map(|(x, w)| (g.eval(x), w)).collect();
    let shift = vals.iter().map(|v| t * v.0).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = vals.iter().map(|&(gv, w)| w * (t * gv - shift).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mean = vals.iter().zip(&weights).map(|(v, q)| q * v.0).sum::<f64>() / z;
    if order == 1 {
        return Ok(mean);
    }
    let central = vals
        .iter()
        .zip(&weights)
        .map(|(v, q)| q * (v.0 - mean).powi(order as i32))
        .sum::<f64>()
        / z;
    Ok(central)
}

/// Raw moments ∫ g^j dμ for j = 1..=n.
fn raw_moments(mu: &SpinMeasure, g: &Observable, n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n + 1];
    m[0] = 1.0;
    for (x, w) in mu.support() {
        let gv = g.eval(x);
        let mut p = 1.0;
        for mj in m.iter_mut().skip(1) {
            p *= gv;
            *mj += w * p;
        }
    }
    m
}

/// Cumulants κ_1..κ_n from raw moments via
/// κ_n = m_n - Σ_{k=1}^{n-1} C(n-1, k-1) κ_k m_{n-k}.
pub fn cumulants_from_moments(m: &[f64]) -> Vec<f64> {
    let n = m.len() - 1;
    let mut kappa = vec![0.0; n + 1];
    for order in 1..=n {
        let mut acc = m[order];
        let mut binom = 1.0; // C(order-1, k-1) for k = 1
        for k in 1..order {
            acc -= binom * kappa[k] * m[order - k];
            binom = binom * (order - k) as f64 / k as f64;
        }
        kappa[order] = acc;
    }
    kappa
}

/// j-th cumulant of g under μ (the j-th t-derivative of log μ(e^{tg}) at 0).
pub fn cumulant(mu: &SpinMeasure, g: &Observable, j: usize) -> Result<f64> {
    if !(1..=10).contains(&j) {
        return Err(Error::UnsupportedOrder(j));
    }
    let m = raw_moments(mu, g, j);
    Ok(cumulants_from_moments(&m)[j])
}

/// Smallest even k ≥ 4 whose cumulant is below -tol.
///
/// Odd cumulants must vanish (symmetric μ, odd g); this is checked rather
/// than assumed.
pub fn detect_k(mu: &SpinMeasure, g: &Observable, k_max: usize, tol: f64) -> Result<usize> {
    if !mu.is_symmetric() || !g.is_odd() {
        return Err(Error::Domain("detect_k requires a symmetric measure and an odd observable".into()));
    }
    if k_max > 10 {
        return Err(Error::UnsupportedOrder(k_max));
    }
    let m = raw_moments(mu, g, k_max.max(1));
    let kappa = cumulants_from_moments(&m);
    for j in (1..=k_max).step_by(2) {
        if kappa[j].abs() >= 1e-10 {
            return Err(Error::Domain(format!("odd cumulant kappa_{j} = {:e} does not vanish", kappa[j])));
        }
    }
    for k in (4..=k_max).step_by(2) {
        if kappa[k] < -tol {
            return Ok(k);
        }
    }
    Err(Error::KNotFound {
        k_max,
        tol,
        cumulants: kappa[1..].to_vec(),
    })
}

/// Outcome of [`concavity_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub pass: bool,
    /// Largest third tilted cumulant seen on the grid.
    pub worst_value: f64,
    pub worst_t: f64,
    pub t_max: f64,
    pub n_points: usize,
}

/// Checks ∂³/∂t³ log μ(e^{tg}) < 0 on a geometric grid in (0, t_max]
/// spanning four decades.
pub fn concavity_scan(mu: &SpinMeasure, g: &Observable, t_max: f64, n_points: usize) -> Result<ConcavityReport> {
    if !(t_max > 0.0) || n_points < 2 {
        return Err(Error::InvalidParameter("concavity scan needs t_max > 0 and n_points >= 2".into()));
    }
    let t_min = t_max * 1e-4;
    let ratio = (t_max / t_min).powf(1.0 / (n_points - 1) as f64);
    let mut worst_value = f64::NEG_INFINITY;
    let mut worst_t = t_min;
    for i in 0..n_points {
        let t = if i == n_points - 1 { t_max } else { t_min * ratio.powi(i as i32) };
        let v = tilted_central_moment(mu, g, t, 3)?;
        if v > worst_value {
            worst_value = v;
            worst_t = t;
        }
    }
    Ok(ConcavityReport {
        pass: worst_value < 0.0,
        worst_value,
        worst_t,
        t_max,
        n_points,
    })
}

/// The normalized tilted measure α_h ∝ e^{h g} μ. The quadrature rule is
/// reused; masses are reweighted.
pub fn tilt_field(mu: &SpinMeasure, g: &Observable, h: f64) -> SpinMeasure {
    if h == 0.0 {
        return mu.clone();
    }
    let shift = mu.support().map(|(x, _)| h * g.eval(x)).fold(f64::NEG_INFINITY, f64::max);
    let reweight = |pts: &[(f64, f64)]| -> Vec<(f64, f64)> {
        pts.iter().map(|&(x, w)| (x, w * (h * g.eval(x) - shift).exp())).collect()
    };
    let mut atoms = reweight(&mu.atoms);
    let mut quad = reweight(&mu.quad_nodes);
    let z: f64 = atoms.iter().chain(quad.iter()).map(|p| p.1).sum();
    for p in atoms.iter_mut().chain(quad.iter_mut()) {
        p.1 /= z;
    }
    let log_z = log_mgf(mu, g, h);
    let density = mu.density.clone().map(|d| {
        let g = g.clone();
        Arc::new(move |x: f64| d(x) * (h * g.eval(x) - log_z).exp()) as SpinFn
    });
    let mut tilts = mu.tilts.clone();
    tilts.push((h, g.clone()));
    SpinMeasure {
        name: format!("{}|h={h}", mu.name),
        atoms,
        quad_nodes: quad,
        density,
        symmetric: false,
        sampler: mu.sampler.clone(),
        tilts,
    }
}

/// Symmetric measure folded onto σ > 0 for an odd observable.
///
/// Every support point σ > 0 is paired with -σ, so log μ(e^{tg}) and the
/// tilted mean become sums of cosh and g·sinh terms. This avoids the
/// cancellation in Σ w g e^{tg} at small t, where the tilted mean is O(t).
#[derive(Debug, Clone)]
pub struct OddProfile {
    /// (g(σ), 2·mass(σ)) over support points σ > 0.
    pairs: Vec<(f64, f64)>,
    zero_mass: f64,
    g_max: f64,
    second_moment: f64,
}

impl OddProfile {
    pub fn new(mu: &SpinMeasure, g: &Observable) -> Result<Self> {
        if !mu.is_symmetric() {
            return Err(Error::Domain(format!("measure {} is not symmetric", mu.name())));
        }
        if !g.is_odd() {
            return Err(Error::Domain(format!("observable {} is not odd", g.name())));
        }
        let mut pairs = Vec::new();
        let mut zero_mass = 0.0;
        for (x, w) in mu.support() {
            if x > 0.0 {
                pairs.push((g.eval(x), 2.0 * w));
            } else if x == 0.0 {
                zero_mass += w;
            }
        }
        let g_max = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
        let second_moment = pairs.iter().map(|&(gv, p)| p * gv * gv).sum();
        Ok(Self { pairs, zero_mass, g_max, second_moment })
    }

    /// μ(g²).
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// (log μ(e^{tg}), tilted mean) in one pass.
    pub fn log_mgf_and_mean(&self, t: f64) -> (f64, f64) {
        let big = t.abs() * self.g_max;
        if big < 1.0 {
            // log1p form: cosh(x) - 1 = 2 sinh²(x/2)
            let mut excess = 0.0;
            let mut num = 0.0;
            for &(gv, p) in &self.pairs {
                let x = t * gv;
                let sh = (0.5 * x).sinh();
                excess += p * 2.0 * sh * sh;
                num += p * gv * x.sinh();
            }
            (excess.ln_1p(), num / (1.0 + excess))
        } else {
            let mut z = self.zero_mass * (-big).exp();
            let mut num = 0.0;
            for &(gv, p) in &self.pairs {
                let x = (t * gv).abs();
                let ep = (x - big).exp();
                let em = (-x - big).exp();
                z += p * 0.5 * (ep + em);
                num += p * gv.abs() * 0.5 * (ep - em);
            }
            (big + z.ln(), t.signum() * num / z)
        }
    }

    pub fn log_mgf(&self, t: f64) -> f64 {
        self.log_mgf_and_mean(t).0
    }

    /// Tilted mean ν_t(g) = ∂/∂t log μ(e^{tg}).
    pub fn mean(&self, t: f64) -> f64 {
        self.log_mgf_and_mean(t).1
    }

    /// ν_t(g)/t, finite at t = 0 where it equals μ(g²).
    pub fn mean_over_t(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.second_moment;
        }
        let big = t.abs() * self.g_max;
        if big < 1.0 {
            let mut excess = 0.0;
            let mut num = 0.0;
            for &(gv, p) in &self.pairs {
                let x = t * gv;
                let sh = (0.5 * x).sinh();
                excess += p * 2.0 * sh * sh;
                // g sinh(tg)/t = g² · sinh(x)/x
                let sinhc = if x == 0.0 { 1.0 } else { x.sinh() / x };
                num += p * gv * gv * sinhc;
            }
            num / (1.0 + excess)
        } else {
            self.mean(t) / t
        }
    }
}
