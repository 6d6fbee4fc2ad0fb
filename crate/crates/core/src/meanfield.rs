//! Mean-field fixed points: the scalar equation m/θ = φ(m) for rank-2
//! kernels, the functional equation V = T(V) for general kernels, and the
//! annealed pressure evaluated at their solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{validate_positive, GridKernel, Kernel, Rank2Kernel};
use crate::measures::{concavity_scan, tilt_field, ConcavityReport, Observable, OddProfile, SpinMeasure};
use crate::weights::WeightModel;

/// Default bracket tolerance of [`solve_m`].
pub const DEFAULT_TOL: f64 = 1e-12;

/// Precomputed sums for the rank-2 path.
#[derive(Debug, Clone)]
struct Rank2Sums {
    profile: OddProfile,
    /// (w, P-probability) from the weight rule.
    plain: Vec<(f64, f64)>,
    /// (w, size-biased probability w p / Σ w p).
    biased: Vec<(f64, f64)>,
}

/// A fully specified model: a priori measure, observable, kernel, weight
/// law and external field.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    measure: SpinMeasure,
    observable: Observable,
    kernel: Kernel,
    weights: WeightModel,
    h: f64,
    concavity: Option<ConcavityReport>,
    sums: Option<Rank2Sums>,
}

impl ModelSpec {
    /// Validates the combination. Rank-2 kernels need a symmetric measure
    /// and an odd, sign-matched observable; grid kernels must be tabulated
    /// on the measure's support.
    pub fn new(measure: SpinMeasure, observable: Observable, kernel: Kernel, weights: WeightModel, h: f64) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::InvalidParameter(format!("field h must be finite, got {h}")));
        }
        if !validate_positive(&kernel) {
            return Err(Error::Domain("kernel is not strictly positive".into()));
        }
        let sums = match &kernel {
            Kernel::Rank2(k) => {
                if !measure.is_symmetric() {
                    return Err(Error::Domain(format!("rank-2 path needs a symmetric measure; {} is not", measure.name())));
                }
                if !observable.is_odd() || !observable.is_sign_matched() {
                    return Err(Error::Domain(format!("rank-2 path needs an odd, sign-matched g; {} is not", observable.name())));
                }
                if k.g().name() != observable.name() {
                    return Err(Error::InvalidParameter(format!(
                        "kernel observable {} differs from model observable {}",
                        k.g().name(),
                        observable.name()
                    )));
                }
                let plain = weights.rule().to_vec();
                let z: f64 = plain.iter().map(|&(w, p)| w * p).sum();
                let biased = plain.iter().map(|&(w, p)| (w, w * p / z)).collect();
                Some(Rank2Sums { profile: OddProfile::new(&measure, &observable)?, plain, biased })
            }
            Kernel::Grid(k) => {
                if !k.matches(&measure) {
                    return Err(Error::InvalidParameter("grid kernel was not tabulated on this measure's support".into()));
                }
                None
            }
        };
        Ok(Self { measure, observable, kernel, weights, h, concavity: None, sums })
    }

    /// Convenience constructor for K = c + θ g⊗g.
    pub fn rank2(measure: SpinMeasure, g: Observable, c: f64, theta: f64, weights: WeightModel, h: f64) -> Result<Self> {
        let k = Rank2Kernel::new(c, theta, g.clone())?;
        Self::new(measure, g, Kernel::Rank2(k), weights, h)
    }

    /// Runs the concavity scan of log α₀(e^{tg}) over t ∈ (0, t_max] and
    /// attaches the report.
    pub fn certify(mut self, t_max: f64, n_points: usize) -> Result<Self> {
        self.concavity = Some(concavity_scan(&self.measure, &self.observable, t_max, n_points)?);
        Ok(self)
    }

    /// Default certificate: scan up to t = 20 on 200 points.
    pub fn certified(self) -> Result<Self> {
        self.certify(20.0, 200)
    }

    pub fn measure(&self) -> &SpinMeasure {
        &self.measure
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn weights(&self) -> &WeightModel {
        &self.weights
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn concavity(&self) -> Option<&ConcavityReport> {
        self.concavity.as_ref()
    }

    pub fn is_certified(&self) -> bool {
        self.concavity.is_some_and(|c| c.pass)
    }

    pub fn rank2_kernel(&self) -> Result<&Rank2Kernel> {
        match &self.kernel {
            Kernel::Rank2(k) => Ok(k),
            Kernel::Grid(_) => Err(Error::Unsupported("operation needs a rank-2 kernel".into())),
        }
    }

    /// θ of the rank-2 kernel.
    pub fn theta(&self) -> Result<f64> {
        Ok(self.rank2_kernel()?.theta())
    }

    /// Same model with a different coupling θ.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        let k = self.rank2_kernel()?.with_theta(theta)?;
        let mut out = self.clone();
        out.kernel = Kernel::Rank2(k);
        Ok(out)
    }

    /// Same model with a different field.
    pub fn with_h(&self, h: f64) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::InvalidParameter(format!("field h must be finite, got {h}")));
        }
        let mut out = self.clone();
        out.h = h;
        Ok(out)
    }

    /// The tilted a priori measure α_h.
    pub fn tilted_measure(&self) -> SpinMeasure {
        tilt_field(&self.measure, &self.observable, self.h)
    }

    fn sums(&self) -> Result<&Rank2Sums> {
        self.sums
            .as_ref()
            .ok_or_else(|| Error::Unsupported("operation needs a rank-2 kernel".into()))
    }

    /// Human-readable summary of the resolved model.
    pub fn describe(&self) -> String {
        let kernel = match &self.kernel {
            Kernel::Rank2(k) => format!("rank2(c={}, theta={}, g={})", k.c(), k.theta(), k.g().name()),
            Kernel::Grid(k) => format!("grid({} nodes)", k.len()),
        };
        format!(
            "measure={} ({} support points, symmetric={}), g={} (odd={}, sign_matched={}), kernel={}, weights={}, h={}",
            self.measure.name(),
            self.measure.support_len(),
            self.measure.is_symmetric(),
            self.observable.name(),
            self.observable.is_odd(),
            self.observable.is_sign_matched(),
            kernel,
            self.weights.describe(),
            self.h
        )
    }
}

/// φ(m) = E^{sb}[ν_{Wm+h}(g)], the size-biased tilted mean of g.
pub fn phi(model: &ModelSpec, m: f64) -> Result<f64> {
    let s = model.sums()?;
    Ok(s.biased.iter().map(|&(w, q)| q * s.profile.mean(w * m + model.h)).sum())
}

/// φ(m)/m at h = 0, finite at m = 0.
fn phi_over_m(s: &Rank2Sums, m: f64) -> f64 {
    s.biased.iter().map(|&(w, q)| q * w * s.profile.mean_over_t(w * m)).sum()
}

/// Ingredients and value of θ_c = 1/(E^{sb}(W) α₀(g²)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalCoupling {
    pub theta_c: f64,
    pub size_biased_mean: f64,
    pub g_second_moment: f64,
}

pub fn theta_c_parts(model: &ModelSpec) -> Result<CriticalCoupling> {
    if !model.measure.is_symmetric() || !model.observable.is_odd() {
        return Err(Error::Domain("critical coupling needs a symmetric measure and an odd g".into()));
    }
    let sb = model.weights.size_biased_mean();
    let g2 = model.measure.integrate(|x| model.observable.eval(x).powi(2))?;
    if !(g2 > 0.0) {
        return Err(Error::Degenerate(format!("g has zero variance under {}", model.measure.name())));
    }
    Ok(CriticalCoupling { theta_c: 1.0 / (sb * g2), size_biased_mean: sb, g_second_moment: g2 })
}

pub fn theta_c(model: &ModelSpec) -> Result<f64> {
    Ok(theta_c_parts(model)?.theta_c)
}

/// Solution of the scalar fixed-point equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub m_plus: f64,
    /// |m/θ - φ(m)|.
    pub residual: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
    pub phi_at_solution: f64,
    /// Whether a passing concavity certificate was attached to the model.
    pub certified: bool,
    pub theta: f64,
    pub h: f64,
}

/// Solves m/θ = φ(m) for the nonnegative branch m⁺ by bisection.
///
/// At h = 0 and θ ≤ θ_c the answer is exactly 0. Above θ_c the root of
/// θφ(m)/m - 1 is bracketed in (0, θ sup|g|] and bisected geometrically
/// first, so very small m⁺ is resolved to full relative precision. With a
/// field the root of θφ(m) - m is bisected on [0, θ sup|g|]. Negative fields
/// use m(-h) = -m(h). The bracket is shrunk until its width is below
/// `tol · min(1, m)`.
pub fn solve_m(model: &ModelSpec, tol: f64) -> Result<FixedPointResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
    }
    let theta = model.theta()?;
    if model.h < 0.0 {
        let mut r = solve_m(&model.with_h(-model.h)?, tol)?;
        r.m_plus = -r.m_plus;
        r.phi_at_solution = -r.phi_at_solution;
        r.bracket = (-r.bracket.1, -r.bracket.0);
        r.h = model.h;
        return Ok(r);
    }
    let s = model.sums()?;
    let certified = model.is_certified();
    let upper = theta.abs() * model.observable.bound();
    let finish = |m: f64, iterations: usize, bracket: (f64, f64)| -> Result<FixedPointResult> {
        let ph = phi(model, m)?;
        let residual = if theta == 0.0 { m.abs() } else { (m / theta - ph).abs() };
        Ok(FixedPointResult { m_plus: m, residual, iterations, bracket, phi_at_solution: ph, certified, theta, h: model.h })
    };
    if theta <= 0.0 {
        // no positive feedback: m = θφ(m) ≤ 0 < m for h ≥ 0 unless m = 0
        if model.h == 0.0 || theta == 0.0 {
            return finish(0.0, 0, (0.0, 0.0));
        }
    }
    if model.h == 0.0 {
        let tc = theta_c(model)?;
        if theta <= tc {
            return finish(0.0, 0, (0.0, 0.0));
        }
        let q = |m: f64| theta * phi_over_m(s, m) - 1.0;
        let mut lo = 1e-200_f64;
        let mut hi = upper;
        if q(lo) <= 0.0 {
            // θ is within rounding of θ_c
            return finish(0.0, 0, (0.0, 0.0));
        }
        let qh = q(hi);
        if qh >= 0.0 {
            if qh == 0.0 {
                return finish(hi, 0, (hi, hi));
            }
            return Err(Error::Solver(format!("no sign change of theta*phi(m)/m - 1 on (0, {hi}]")));
        }
        let mut it = 0;
        while hi - lo > tol * lo.min(1.0) {
            let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            if mid <= lo || mid >= hi {
                break;
            }
            if q(mid) > 0.0 { lo = mid } else { hi = mid }
            it += 1;
        }
        return finish(0.5 * (lo + hi), it, (lo, hi));
    }
    let r = |m: f64| -> Result<f64> { Ok(theta * phi(model, m)? - m) };
    let mut lo = 0.0_f64;
    let mut hi = upper;
    if r(lo)? <= 0.0 {
        return Err(Error::Solver("theta*phi(0) <= 0 with a positive field".into()));
    }
    if r(hi)? > 0.0 {
        return Err(Error::Solver(format!("no sign change of theta*phi(m) - m on [0, {hi}]")));
    }
    let mut it = 0;
    while hi - lo > tol * lo.min(1.0) || lo == 0.0 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if r(mid)? > 0.0 { lo = mid } else { hi = mid }
        it += 1;
        if it > 5000 {
            break;
        }
    }
    finish(0.5 * (lo + hi), it, (lo, hi))
}

/// Rank-2 pressure (c/2)E[W] - ½E[W] m²/θ + E[log α_h(e^{W m g})].
pub fn pressure_rank2(model: &ModelSpec, fp: &FixedPointResult) -> Result<f64> {
    let s = model.sums()?;
    let k = model.rank2_kernel()?;
    let ew = model.weights.mean();
    let m = fp.m_plus;
    let quad = if m == 0.0 { 0.0 } else { 0.5 * ew * m * m / k.theta() };
    let base = s.profile.log_mgf(model.h);
    let log_term: f64 = s.plain.iter().map(|&(w, p)| p * (s.profile.log_mgf(w * m + model.h) - base)).sum();
    Ok(0.5 * k.c() * ew - quad + log_term)
}

/// The rank-2 pressure as a function of a trial m (maximized at m⁺).
pub fn pressure_rank2_at(model: &ModelSpec, m: f64) -> Result<f64> {
    let theta = model.theta()?;
    let fp = FixedPointResult {
        m_plus: m,
        residual: f64::NAN,
        iterations: 0,
        bracket: (m, m),
        phi_at_solution: f64::NAN,
        certified: false,
        theta,
        h: model.h,
    };
    pressure_rank2(model, &fp)
}

/// The pressure formulas keep the diagonal-free pair sum Σ_{i<j} p_ij
/// inside the constant; the limit of (1/N) log Z_N of the finite annealed
/// measure is the pressure plus this offset, -E[W]/2.
pub fn finite_volume_offset(weights: &WeightModel) -> f64 {
    -0.5 * weights.mean()
}

/// JSON record of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveRecord {
    pub theta: f64,
    pub h: f64,
    pub m_plus: f64,
    pub residual: f64,
    pub iterations: usize,
    pub pressure: f64,
}

/// Solves and evaluates the pressure in one go.
pub fn solve_record(model: &ModelSpec, tol: f64) -> Result<SolveRecord> {
    let fp = solve_m(model, tol)?;
    Ok(SolveRecord {
        theta: fp.theta,
        h: fp.h,
        m_plus: fp.m_plus,
        residual: fp.residual,
        iterations: fp.iterations,
        pressure: pressure_rank2(model, &fp)?,
    })
}

/// Initial potential for [`solve_v_general`].
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// V ≡ ∫∫ K dα dα.
    Paramagnetic,
    /// Paramagnetic guess plus ε g.
    Perturbed(f64),
    /// Paramagnetic guess plus independent uniform noise of the given
    /// amplitude at every node.
    Random { seed: u64, amplitude: f64 },
    Custom(Vec<f64>),
}

/// Options for the functional solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-12, max_iter: 100_000 }
    }
}

/// Fixed point V = T(V) on the support nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialSolution {
    pub nodes: Vec<f64>,
    pub v: Vec<f64>,
    /// sup |T(V) - V|.
    pub residual: f64,
    pub iterations: usize,
    pub damping: f64,
}

/// Data shared by T and the general pressure: grid kernel, α_h masses and
/// the weight rule.
struct Functional {
    kernel: GridKernel,
    /// log α_h masses on the support.
    log_mass: Vec<f64>,
    mass: Vec<f64>,
    plain: Vec<(f64, f64)>,
    biased: Vec<(f64, f64)>,
}

impl Functional {
    fn new(model: &ModelSpec) -> Result<Self> {
        let kernel = match &model.kernel {
            Kernel::Grid(k) => k.clone(),
            Kernel::Rank2(k) => GridKernel::from_rank2(k, &model.measure)?,
        };
        let tilted = model.tilted_measure();
        let mass: Vec<f64> = tilted.support().map(|p| p.1).collect();
        let log_mass = mass.iter().map(|m| m.ln()).collect();
        let plain = model.weights.rule().to_vec();
        let z: f64 = plain.iter().map(|&(w, p)| w * p).sum();
        let biased = plain.iter().map(|&(w, p)| (w, w * p / z)).collect();
        Ok(Self { kernel, log_mass, mass, plain, biased })
    }

    /// Normalized ν^{w,V} on the nodes, returned with log α(e^{wV}).
    fn tilted(&self, w: f64, v: &[f64], out: &mut [f64]) -> f64 {
        let mut shift = f64::NEG_INFINITY;
        for (o, (&lm, &vb)) in out.iter_mut().zip(self.log_mass.iter().zip(v)) {
            *o = lm + w * vb;
            shift = shift.max(*o);
        }
        let mut z = 0.0;
        for o in out.iter_mut() {
            *o = (*o - shift).exp();
            z += *o;
        }
        for o in out.iter_mut() {
            *o /= z;
        }
        shift + z.ln()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut avg = vec![0.0; n];
        let mut buf = vec![0.0; n];
        for &(w, q) in &self.biased {
            self.tilted(w, v, &mut buf);
            for (a, b) in avg.iter_mut().zip(&buf) {
                *a += q * b;
            }
        }
        (0..n).map(|a| self.kernel.row(a).iter().zip(&avg).map(|(k, p)| k * p).sum()).collect()
    }
}

/// Solves V = T(V) by damped Picard iteration V ← (1-λ)V + λT(V), where
/// T(V)(σ) = E^{sb}[∫ ν^{W,V}(dσ') K(σ, σ')]. Rank-2 kernels are tabulated
/// on the measure's support first.
pub fn solve_v_general(model: &ModelSpec, start: &Start, opts: PicardOptions) -> Result<PotentialSolution> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidParameter(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    let f = Functional::new(model)?;
    let nodes: Vec<f64> = model.measure.support().map(|p| p.0).collect();
    let n = nodes.len();
    let para: f64 = {
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                acc += f.mass[a] * f.mass[b] * f.kernel.at(a, b);
            }
        }
        acc
    };
    let mut v: Vec<f64> = match start {
        Start::Paramagnetic => vec![para; n],
        Start::Perturbed(eps) => nodes.iter().map(|&x| para + eps * model.observable.eval(x)).collect(),
        Start::Random { seed, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n).map(|_| para + amplitude * rng.random_range(-1.0..1.0)).collect()
        }
        Start::Custom(v0) => {
            if v0.len() != n {
                return Err(Error::InvalidParameter(format!("custom start has {} entries, expected {n}", v0.len())));
            }
            v0.clone()
        }
    };
    let lambda = opts.damping;
    let mut history = Vec::new();
    for it in 1..=opts.max_iter {
        let tv = f.apply(&v);
        let residual = tv.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(Error::Solver(format!("potential diverged at iteration {it}")));
        }
        if history.len() < 10_000 {
            history.push(residual);
        }
        if residual < opts.tol {
            return Ok(PotentialSolution { nodes, v: tv, residual, iterations: it, damping: lambda });
        }
        for (x, t) in v.iter_mut().zip(&tv) {
            *x = (1.0 - lambda) * *x + lambda * t;
        }
    }
    let last = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NonConvergence { iterations: opts.max_iter, last, history })
}

/// Runs several starts and keeps the distinct limits (sup-distance above
/// `distinct_tol`).
pub fn solve_v_branches(model: &ModelSpec, starts: &[Start], opts: PicardOptions, distinct_tol: f64) -> Result<Vec<PotentialSolution>> {
    let mut found: Vec<PotentialSolution> = Vec::new();
    for s in starts {
        let sol = solve_v_general(model, s, opts)?;
        let dup = found.iter().any(|f| sup_distance(&f.v, &sol.v) < distinct_tol);
        if !dup {
            found.push(sol);
        }
    }
    Ok(found)
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// -(E[W]/2) E^{sb}[ν^{W,V}(V)] + E[log α_h(e^{WV})].
pub fn pressure_general(model: &ModelSpec, sol: &PotentialSolution) -> Result<f64> {
    let f = Functional::new(model)?;
    if sol.v.len() != f.mass.len() {
        return Err(Error::InvalidParameter("potential does not live on this model's support".into()));
    }
    let n = sol.v.len();
    let mut buf = vec![0.0; n];
    let mut energy = 0.0;
    for &(w, q) in &f.biased {
        f.tilted(w, &sol.v, &mut buf);
        energy += q * buf.iter().zip(&sol.v).map(|(p, v)| p * v).sum::<f64>();
    }
    let mut log_term = 0.0;
    for &(w, p) in &f.plain {
        log_term += p * f.tilted(w, &sol.v, &mut buf);
    }
    Ok(-0.5 * model.weights.mean() * energy + log_term)
}

/// Largest pressure over several fixed points, with the index of the
/// maximizing branch.
pub fn pressure_general_best(model: &ModelSpec, sols: &[PotentialSolution]) -> Result<(f64, usize)> {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, s) in sols.iter().enumerate() {
        let p = pressure_general(model, s)?;
        if p > best.0 {
            best = (p, i);
        }
    }
    if sols.is_empty() {
        return Err(Error::InvalidParameter("no fixed points supplied".into()));
    }
    Ok(best)
}

/// Ising coupling v from the weighted self-consistency
/// sinh(β) E^{sb}[tanh(W v)] = v, solved through the rank-2 map.
pub fn ising_order_parameter(beta: f64, weights: WeightModel, tol: f64) -> Result<f64> {
    let k = crate::kernels::ising_to_rank2(beta)?;
    let model = ModelSpec::rank2(SpinMeasure::ising(), Observable::identity(), k.c(), k.theta(), weights, 0.0)?;
    Ok(solve_m(&model, tol)?.m_plus)
}
