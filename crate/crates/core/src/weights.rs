//! Vertex-weight laws W: moments, truncated moments, size-biased
//! expectations and reproducible finite-N weight sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{invert_linear_cdf, read_pairs_csv};
use crate::quadrature::{gauss_legendre, integrate_adaptive};

/// Absolute tolerance of adaptive size-biased integrals.
pub const SB_ABS_TOL: f64 = 1e-10;
/// Subdivision cap of adaptive size-biased integrals.
pub const SB_MAX_SEGMENTS: usize = 1 << 20;

/// Nodes per unit panel of the fixed weight rule.
const RULE_PANEL_NODES: usize = 16;

/// Weight law specification, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Deterministic { w: f64 },
    Discrete { atoms: Vec<(f64, f64)> },
    /// Survival P(W > w) = (w / w_min)^{-(tau-1)} for w >= w_min.
    Pareto {
        tau: f64,
        #[serde(default = "one")]
        w_min: f64,
    },
    /// Piecewise-linear density through (w, value) points on (0, w_cap].
    Tabulated { points: Vec<(f64, f64)> },
}

fn one() -> f64 {
    1.0
}

/// A moment that is either a finite number or divergent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Moment::Infinite)
    }
}

/// Tail class of W relative to the cumulant order k of the spin model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", content = "tau", rename_all = "snake_case")]
pub enum TailRegime {
    /// E[W^k] < ∞.
    FiniteMoment,
    /// Power law with τ ∈ (3, k+1).
    PowerLaw(f64),
    /// Power law with τ = k+1 exactly.
    Boundary(f64),
}

/// How [`WeightModel::weight_sequence`] picks the N weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SequenceMode {
    /// w_i = Q((i - 1/2)/N): deterministic.
    #[default]
    Quantile,
    /// i.i.d. draws by inverse transform.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Deterministic(f64),
    /// Sorted by weight.
    Discrete(Vec<(f64, f64)>),
    Pareto { tau: f64, w_min: f64 },
    Tabulated { points: Vec<(f64, f64)>, cumulative: Vec<f64> },
}

/// Distribution of the asymptotic vertex weight W.
#[derive(Debug, Clone)]
pub struct WeightModel {
    law: Law,
    mean: f64,
    second: f64,
    rule: Vec<(f64, f64)>,
}

impl WeightModel {
    pub fn from_spec(spec: &WeightSpec) -> Result<Self> {
        match spec {
            WeightSpec::Deterministic { w } => Self::deterministic(*w),
            WeightSpec::Discrete { atoms } => Self::discrete(atoms.clone()),
            WeightSpec::Pareto { tau, w_min } => Self::pareto(*tau, *w_min),
            WeightSpec::Tabulated { points } => Self::tabulated(points.clone()),
        }
    }

    pub fn deterministic(w: f64) -> Result<Self> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter(format!("deterministic weight must be > 0, got {w}")));
        }
        Ok(Self { law: Law::Deterministic(w), mean: w, second: w * w, rule: vec![(w, 1.0)] })
    }

    /// Finite law on (weight, probability) pairs; probabilities must sum to one.
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("discrete weight law has no atoms".into()));
        }
        if atoms.iter().any(|&(w, p)| !(w > 0.0) || !w.is_finite() || !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("discrete weights and probabilities must be > 0".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}, not 1")));
        }
        let mut atoms: Vec<_> = atoms.into_iter().map(|(w, p)| (w, p / total)).collect();
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mean = atoms.iter().map(|&(w, p)| p * w).sum();
        let second = atoms.iter().map(|&(w, p)| p * w * w).sum();
        Ok(Self { rule: atoms.clone(), law: Law::Discrete(atoms), mean, second })
    }

    /// Pure power law with survival (w / w_min)^{-(τ-1)}. Requires τ > 3 so
    /// that E[W²] is finite.
    pub fn pareto(tau: f64, w_min: f64) -> Result<Self> {
        if !tau.is_finite() || tau <= 3.0 {
            return Err(Error::OutOfScope(format!("Pareto exponent tau = {tau} must exceed 3 (E[W^2] < inf)")));
        }
        if !(w_min > 0.0) || !w_min.is_finite() {
            return Err(Error::InvalidParameter(format!("w_min must be > 0, got {w_min}")));
        }
        let a = tau - 1.0;
        let mean = a / (a - 1.0) * w_min;
        let second = a / (a - 2.0) * w_min * w_min;
        Ok(Self { rule: pareto_rule(tau, w_min)?, law: Law::Pareto { tau, w_min }, mean, second })
    }

    /// Piecewise-linear density through (w, value) points with w > 0.
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        let mut points = points;
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        if points.len() < 2 {
            return Err(Error::InvalidParameter("tabulated weight density needs at least two points".into()));
        }
        if !(points[0].0 > 0.0) || points.iter().any(|p| !p.0.is_finite()) {
            return Err(Error::InvalidParameter("tabulated weights must be finite and > 0".into()));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter("tabulated weights must be strictly increasing".into()));
        }
        if points.iter().any(|p| !(p.1 >= 0.0) || !p.1.is_finite()) {
            return Err(Error::InvalidParameter("tabulated density values must be finite and >= 0".into()));
        }
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0));
        }
        let total = *cumulative.last().unwrap();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("tabulated weight density integrates to zero".into()));
        }
        let points: Vec<_> = points.into_iter().map(|(w, d)| (w, d / total)).collect();
        let cumulative: Vec<_> = cumulative.into_iter().map(|c| c / total).collect();
        let mut rule = Vec::new();
        for seg in points.windows(2) {
            let (w0, d0) = seg[0];
            let (w1, d1) = seg[1];
            for (w, qw) in gauss_legendre(RULE_PANEL_NODES, w0, w1)? {
                let d = d0 + (d1 - d0) * (w - w0) / (w1 - w0);
                if d > 0.0 {
                    rule.push((w, qw * d));
                }
            }
        }
        let z: f64 = rule.iter().map(|r| r.1).sum();
        for r in &mut rule {
            r.1 /= z;
        }
        let mean = rule.iter().map(|&(w, p)| p * w).sum();
        let second = rule.iter().map(|&(w, p)| p * w * w).sum();
        Ok(Self { law: Law::Tabulated { points, cumulative }, mean, second, rule })
    }

    /// Reads a tabulated density from CSV rows `w,density`.
    pub fn tabulated_from_csv(path: &std::path::Path) -> Result<Self> {
        Self::tabulated(read_pairs_csv(path)?)
    }

    /// E[W].
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// E[W²].
    pub fn second_moment(&self) -> f64 {
        self.second
    }

    /// E^{sb}[W] = E[W²]/E[W].
    pub fn size_biased_mean(&self) -> f64 {
        self.second / self.mean
    }

    /// Fixed discretization of P as (w, probability) pairs.
    ///
    /// Pareto laws use composite Gauss–Legendre on unit panels in
    /// x = log(w / w_min), long enough that the dropped tail of E[W²] is
    /// below 1e-15 relative. Mean-field sums use this rule so that φ is a
    /// smooth function of m.
    pub fn rule(&self) -> &[(f64, f64)] {
        &self.rule
    }

    /// The Pareto exponent, if W is a power law.
    pub fn tau(&self) -> Option<f64> {
        match self.law {
            Law::Pareto { tau, .. } => Some(tau),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.law {
            Law::Deterministic(w) => format!("deterministic({w})"),
            Law::Discrete(a) => format!("discrete({} atoms)", a.len()),
            Law::Pareto { tau, w_min } => format!("pareto(tau={tau}, w_min={w_min})"),
            Law::Tabulated { points, .. } => format!("tabulated({} points)", points.len()),
        }
    }

    /// E[W^k], or [`Moment::Infinite`] when it diverges.
    pub fn moment(&self, k: u32) -> Moment {
        match &self.law {
            Law::Deterministic(w) => Moment::Finite(w.powi(k as i32)),
            Law::Discrete(atoms) => Moment::Finite(atoms.iter().map(|&(w, p)| p * w.powi(k as i32)).sum()),
            Law::Pareto { tau, w_min } => {
                let a = tau - 1.0;
                let kf = k as f64;
                if kf >= a {
                    Moment::Infinite
                } else {
                    Moment::Finite(a / (a - kf) * w_min.powi(k as i32))
                }
            }
            // the rule is exact for polynomial times piecewise-linear density
            Law::Tabulated { .. } => Moment::Finite(self.rule.iter().map(|&(w, p)| p * w.powi(k as i32)).sum()),
        }
    }

    /// E[W^k 1{W ≤ R}].
    pub fn truncated_moment(&self, k: u32, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("truncation level must be > 0, got {r}")));
        }
        let kf = k as f64;
        Ok(match &self.law {
            Law::Deterministic(w) => {
                if *w <= r { w.powi(k as i32) } else { 0.0 }
            }
            Law::Discrete(atoms) => atoms.iter().filter(|a| a.0 <= r).map(|&(w, p)| p * w.powi(k as i32)).sum(),
            Law::Pareto { tau, w_min } => {
                if r <= *w_min {
                    return Ok(0.0);
                }
                let a = tau - 1.0;
                let e = kf - a;
                let scale = w_min.powf(a);
                if e.abs() < 1e-12 {
                    a * scale * (r / w_min).ln()
                } else {
                    a / e * (r.powf(e) - w_min.powf(e)) * scale
                }
            }
            Law::Tabulated { points, .. } => {
                let mut acc = 0.0;
                for seg in points.windows(2) {
                    let (w0, d0) = seg[0];
                    let (w1, d1) = seg[1];
                    if w0 >= r {
                        break;
                    }
                    let hi = w1.min(r);
                    let (v, _) = integrate_adaptive(
                        |w| w.powf(kf) * (d0 + (d1 - d0) * (w - w0) / (w1 - w0)),
                        w0,
                        hi,
                        1e-14,
                        1e-13,
                        SB_MAX_SEGMENTS,
                    )?;
                    acc += v;
                }
                acc
            }
        })
    }

    /// E[f(W)].
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        match &self.law {
            Law::Deterministic(w) => finite_at(*w, f(*w)),
            Law::Discrete(atoms) => {
                let mut acc = 0.0;
                for &(w, p) in atoms {
                    acc += p * finite_at(w, f(w))?;
                }
                Ok(acc)
            }
            Law::Pareto { tau, w_min } => pareto_expect(*tau, *w_min, &f),
            Law::Tabulated { points, .. } => {
                let mut acc = 0.0;
                for seg in points.windows(2) {
                    let (w0, d0) = seg[0];
                    let (w1, d1) = seg[1];
                    let (v, _) = integrate_adaptive(
                        |w| f(w) * (d0 + (d1 - d0) * (w - w0) / (w1 - w0)),
                        w0,
                        w1,
                        SB_ABS_TOL,
                        1e-12,
                        SB_MAX_SEGMENTS,
                    )?;
                    acc += v;
                }
                Ok(acc)
            }
        }
    }

    /// E^{sb}[f(W)] = E[W f(W)] / E[W].
    pub fn size_biased_expect(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        if let Law::Deterministic(w) = self.law {
            return finite_at(w, f(w));
        }
        Ok(self.expect(|w| w * f(w))? / self.mean)
    }

    /// Quantile function Q(u), u ∈ [0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.law {
            Law::Deterministic(w) => *w,
            Law::Discrete(atoms) => {
                let mut acc = 0.0;
                for &(w, p) in atoms {
                    acc += p;
                    if u < acc {
                        return w;
                    }
                }
                atoms.last().unwrap().0
            }
            Law::Pareto { tau, w_min } => w_min * (1.0 - u).powf(-1.0 / (tau - 1.0)),
            Law::Tabulated { points, cumulative } => invert_linear_cdf(points, cumulative, u),
        }
    }

    /// N weights: quantile grid (i - 1/2)/N, or i.i.d. inverse-transform
    /// draws from a ChaCha stream seeded with `seed`.
    pub fn weight_sequence(&self, n: usize, mode: SequenceMode, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidParameter("weight sequence length must be >= 1".into()));
        }
        Ok(match mode {
            SequenceMode::Quantile => (0..n).map(|i| self.quantile((i as f64 + 0.5) / n as f64)).collect(),
            SequenceMode::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| self.quantile(rng.random::<f64>())).collect()
            }
        })
    }

    /// Tail regime relative to the spin-model order k.
    pub fn classify_tail(&self, k: usize) -> Result<TailRegime> {
        match self.law {
            Law::Pareto { tau, .. } => {
                if tau <= 3.0 {
                    return Err(Error::OutOfScope(format!("tau = {tau} <= 3")));
                }
                let edge = k as f64 + 1.0;
                if (tau - edge).abs() <= 1e-12 {
                    Ok(TailRegime::Boundary(tau))
                } else if tau < edge {
                    Ok(TailRegime::PowerLaw(tau))
                } else {
                    Ok(TailRegime::FiniteMoment)
                }
            }
            _ => Ok(TailRegime::FiniteMoment),
        }
    }
}

fn finite_at(w: f64, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation { node: w, value: v })
    }
}

fn pareto_rule(tau: f64, w_min: f64) -> Result<Vec<(f64, f64)>> {
    let a = tau - 1.0;
    let span = (36.0 / (tau - 3.0)).clamp(40.0, 700.0).ceil() as usize;
    let panel = gauss_legendre(RULE_PANEL_NODES, 0.0, 1.0)?;
    let mut rule = Vec::with_capacity(span * RULE_PANEL_NODES);
    for j in 0..span {
        for &(t, qw) in &panel {
            let x = j as f64 + t;
            rule.push((w_min * x.exp(), qw * a * (-a * x).exp()));
        }
    }
    let z: f64 = rule.iter().map(|r| r.1).sum();
    for r in &mut rule {
        r.1 /= z;
    }
    Ok(rule)
}

/// E[f(W)] for a Pareto law. With u = P(W > w) = e^{-s} the integral becomes
/// ∫_0^∞ f(w_min e^{s/(τ-1)}) e^{-s} ds, integrated on doubling panels in s.
fn pareto_expect(tau: f64, w_min: f64, f: &impl Fn(f64) -> f64) -> Result<f64> {
    const S_MAX: f64 = 700.0;
    let a = tau - 1.0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut total = 0.0;
    let mut last = 0.0;
    while lo < S_MAX {
        let (v, _) = integrate_adaptive(
            |s| {
                let w = w_min * (s / a).exp();
                let fw = f(w);
                if fw == 0.0 { 0.0 } else { fw * (-s).exp() }
            },
            lo,
            hi,
            SB_ABS_TOL,
            1e-12,
            SB_MAX_SEGMENTS,
        )?;
        total += v;
        last = v;
        lo = hi;
        hi = (2.0 * hi).min(S_MAX);
    }
    if !total.is_finite() || last.abs() > 1e-8 * total.abs().max(1e-300) && last.abs() > SB_ABS_TOL {
        return Err(Error::Integration(format!(
            "integrand is not integrable against the Pareto(tau={tau}) law: tail panel contributes {last:e}"
        )));
    }
    Ok(total)
}
