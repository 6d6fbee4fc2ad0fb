//! Finite-N ground truth: exact enumeration of the annealed measure on a
//! generalized random graph, and a joint edge/spin Gibbs sampler.
//!
//! The annealed weight of a spin configuration is
//! Π α_h(σ_i) · Π_{i<j} (1 + p_ij (K(σ_i, σ_j) - 1)). Augmenting with the
//! edge indicators gives a joint law whose edge conditional is an exact
//! Bernoulli and whose spin conditional only involves neighbours.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{Kernel, Rank2Kernel};
use crate::meanfield::ModelSpec;
use crate::measures::{tilt_field, Observable, SpinMeasure};
use crate::weights::{SequenceMode, WeightModel};

/// Largest state space `exact_annealed` will enumerate.
pub const EXACT_STATE_LIMIT: u128 = 1 << 20;
/// Largest N the sampler accepts (each sweep touches all N²/2 pairs).
pub const MC_MAX_N: usize = 10_000;
/// Number of batches for the batch-means standard error.
pub const BATCHES: usize = 32;

/// Weights of an N-vertex generalized random graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrgInstance {
    weights: Vec<f64>,
    l_n: f64,
}

impl GrgInstance {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("graph needs at least one vertex".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Domain(format!("vertex weights must be positive and finite, got {w}")));
        }
        let l_n = weights.iter().sum();
        Ok(Self { weights, l_n })
    }

    /// N weights from the deterministic quantile sequence of `law`.
    pub fn from_law(law: &WeightModel, n: usize) -> Result<Self> {
        Self::new(law.weight_sequence(n, SequenceMode::Quantile, 0)?)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn l_n(&self) -> f64 {
        self.l_n
    }

    /// p_ij = w_i w_j / (l_N + w_i w_j).
    pub fn edge_prob(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::Domain(format!("no self-loops: edge_prob({i}, {i})")));
        }
        let n = self.n();
        if i >= n || j >= n {
            return Err(Error::Domain(format!("vertex index out of range for N={n}")));
        }
        Ok(self.p(i, j))
    }

    #[inline]
    fn p(&self, i: usize, j: usize) -> f64 {
        let ww = self.weights[i] * self.weights[j];
        ww / (self.l_n + ww)
    }

    /// Size-biased empirical mean Σ w_i x_i / Σ w_i.
    fn biased_mean(&self, x: impl Iterator<Item = f64>) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() / self.l_n
    }
}

/// Exact annealed quantities at finite N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactResult {
    pub n: usize,
    /// (1/N) log of the annealed partition sum with normalized α_h.
    pub pressure: f64,
    /// E[B_N] with B_N = Σ w_i g(σ_i) / Σ w_i.
    pub magnetization: f64,
    /// E|B_N|, the finite-N order parameter when h = 0.
    pub abs_magnetization: f64,
    /// Unweighted E[(1/N) Σ g(σ_i)].
    pub raw_magnetization: f64,
    pub states: u128,
}

/// Finite spin alphabet with a kernel table.
#[derive(Debug, Clone)]
struct Alphabet {
    values: Vec<f64>,
    g: Vec<f64>,
    probs: Vec<f64>,
    /// Row-major A×A table of K.
    k: Vec<f64>,
}

impl Alphabet {
    fn new(kernel: &Kernel, mu: &SpinMeasure, g: &Observable, h: f64) -> Result<Self> {
        let tilted = tilt_field(mu, g, h);
        let support: Vec<(f64, f64)> = tilted.support().collect();
        let a = support.len();
        let k = match kernel {
            Kernel::Rank2(r) => {
                let mut k = Vec::with_capacity(a * a);
                for &(s, _) in &support {
                    for &(t, _) in &support {
                        k.push(r.eval(s, t));
                    }
                }
                k
            }
            Kernel::Grid(grid) => {
                if !grid.matches(mu) {
                    return Err(Error::InvalidParameter("grid kernel was not built on this measure's support".into()));
                }
                (0..a).flat_map(|i| grid.row(i).to_vec()).collect()
            }
        };
        Ok(Self {
            values: support.iter().map(|p| p.0).collect(),
            g: support.iter().map(|p| g.eval(p.0)).collect(),
            probs: support.iter().map(|p| p.1).collect(),
            k,
        })
    }

    fn len(&self) -> usize {
        self.values.len()
    }
}

/// Enumerates every configuration of an atomic spin measure.
pub fn exact_annealed(inst: &GrgInstance, kernel: &Kernel, mu: &SpinMeasure, g: &Observable, h: f64) -> Result<ExactResult> {
    if !mu.is_atomic() {
        return Err(Error::InvalidParameter(format!("exact enumeration needs an atomic measure, got {}", mu.name())));
    }
    let alpha = Alphabet::new(kernel, mu, g, h)?;
    let a = alpha.len();
    let n = inst.n();
    let states = (a as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if states > EXACT_STATE_LIMIT {
        return Err(Error::Capacity { states, limit: EXACT_STATE_LIMIT });
    }
    let log_p: Vec<f64> = alpha.probs.iter().map(|p| p.ln()).collect();
    // log(1 + p_ij (K(a, b) - 1)) for each pair i < j.
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let p = inst.p(i, j);
            let table: Vec<f64> = alpha.k.iter().map(|&k| (p * (k - 1.0)).ln_1p()).collect();
            pairs.push((i, j, table));
        }
    }
    let mut labels = vec![0usize; n];
    let (mut max, mut z) = (f64::NEG_INFINITY, 0.0);
    let (mut sm, mut sa, mut sr) = (0.0, 0.0, 0.0);
    for _ in 0..states {
        let mut lw: f64 = labels.iter().map(|&s| log_p[s]).sum();
        for (i, j, t) in &pairs {
            lw += t[labels[*i] * a + labels[*j]];
        }
        let b = inst.biased_mean(labels.iter().map(|&s| alpha.g[s]));
        let raw = labels.iter().map(|&s| alpha.g[s]).sum::<f64>() / n as f64;
        if lw > max {
            let r = (max - lw).exp();
            z *= r;
            sm *= r;
            sa *= r;
            sr *= r;
            max = lw;
        }
        let e = (lw - max).exp();
        z += e;
        sm += e * b;
        sa += e * b.abs();
        sr += e * raw;
        for s in labels.iter_mut() {
            *s += 1;
            if *s < a {
                break;
            }
            *s = 0;
        }
    }
    Ok(ExactResult {
        n,
        pressure: (max + z.ln()) / n as f64,
        magnetization: sm / z,
        abs_magnetization: sa / z,
        raw_magnetization: sr / z,
        states,
    })
}

/// `exact_annealed` on the model's kernel, measure and field.
pub fn exact_annealed_model(model: &ModelSpec, inst: &GrgInstance) -> Result<ExactResult> {
    exact_annealed(inst, model.kernel(), model.measure(), model.observable(), model.h())
}

#[derive(Debug, Clone)]
enum Space {
    Discrete(Alphabet),
    /// Rank-2 kernel on a measure with a density; K = c + θ g g'.
    Continuous { alpha_h: SpinMeasure, c: f64, theta: f64 },
}

/// Spins, present edges and sweep counter of one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub spins: Vec<f64>,
    /// Alphabet labels for discrete spin spaces, empty otherwise.
    pub labels: Vec<usize>,
    /// g(σ_i), kept in sync with `spins`.
    pub g: Vec<f64>,
    pub neighbours: Vec<Vec<u32>>,
    pub edges: usize,
    pub sweep: u64,
}

/// Per-sweep observables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepStats {
    pub b_n: f64,
    pub raw: f64,
    /// Σ over present edges of log K(σ_i, σ_j).
    pub energy_proxy: f64,
    pub edges: usize,
    pub proposed: usize,
    pub accepted: usize,
}

/// Joint edge/spin Gibbs sampler for one graph instance.
#[derive(Debug, Clone)]
pub struct JointSampler {
    inst: GrgInstance,
    g: Observable,
    space: Space,
}

impl JointSampler {
    /// Atomic measures and grid kernels run heat-bath updates over the
    /// finite support; rank-2 kernels on densities use Metropolis with
    /// proposals drawn from α_h.
    pub fn new(inst: GrgInstance, kernel: &Kernel, mu: &SpinMeasure, g: &Observable, h: f64) -> Result<Self> {
        let space = match kernel {
            Kernel::Rank2(r) if !mu.is_atomic() => Space::Continuous { alpha_h: tilt_field(mu, g, h), c: r.c(), theta: r.theta() },
            _ => Space::Discrete(Alphabet::new(kernel, mu, g, h)?),
        };
        Ok(Self { inst, g: g.clone(), space })
    }

    pub fn from_model(model: &ModelSpec, inst: GrgInstance) -> Result<Self> {
        Self::new(inst, model.kernel(), model.measure(), model.observable(), model.h())
    }

    pub fn instance(&self) -> &GrgInstance {
        &self.inst
    }

    /// Spins drawn i.i.d. from α_h, no edges.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> ChainState {
        let n = self.inst.n();
        let (spins, labels): (Vec<f64>, Vec<usize>) = match &self.space {
            Space::Discrete(al) => {
                let labels: Vec<usize> = (0..n).map(|_| draw_label(&al.probs, rng)).collect();
                (labels.iter().map(|&s| al.values[s]).collect(), labels)
            }
            Space::Continuous { alpha_h, .. } => ((0..n).map(|_| alpha_h.sample(rng)).collect(), Vec::new()),
        };
        let g = spins.iter().map(|&x| self.g.eval(x)).collect();
        ChainState { spins, labels, g, neighbours: vec![Vec::new(); n], edges: 0, sweep: 0 }
    }

    #[inline]
    fn kval(&self, st: &ChainState, i: usize, j: usize) -> f64 {
        match &self.space {
            Space::Discrete(al) => al.k[st.labels[i] * al.len() + st.labels[j]],
            Space::Continuous { c, theta, .. } => c + theta * st.g[i] * st.g[j],
        }
    }

    /// Chain state with the given spins (which must lie in the alphabet for
    /// discrete spaces) and no edges.
    pub fn state_from_spins(&self, spins: &[f64]) -> Result<ChainState> {
        let n = self.inst.n();
        if spins.len() != n {
            return Err(Error::InvalidParameter(format!("expected {n} spins, got {}", spins.len())));
        }
        let labels = match &self.space {
            Space::Discrete(al) => spins
                .iter()
                .map(|x| {
                    al.values
                        .iter()
                        .position(|v| v == x)
                        .ok_or_else(|| Error::InvalidParameter(format!("spin {x} is not in the alphabet")))
                })
                .collect::<Result<Vec<_>>>()?,
            Space::Continuous { .. } => Vec::new(),
        };
        Ok(ChainState {
            spins: spins.to_vec(),
            labels,
            g: spins.iter().map(|&x| self.g.eval(x)).collect(),
            neighbours: vec![Vec::new(); n],
            edges: 0,
            sweep: 0,
        })
    }

    /// Conditional probability that edge {i, j} is present given the spins.
    pub fn edge_conditional(&self, st: &ChainState, i: usize, j: usize) -> Result<f64> {
        let p = self.inst.edge_prob(i, j)?;
        let k = self.kval(st, i, j);
        Ok(p * k / (1.0 + p * (k - 1.0)))
    }

    /// Redraws every edge independently from its conditional law; returns
    /// the number of edges present.
    pub fn edge_stage<R: Rng + ?Sized>(&self, st: &mut ChainState, rng: &mut R) -> usize {
        let n = self.inst.n();
        for nb in st.neighbours.iter_mut() {
            nb.clear();
        }
        let mut edges = 0;
        for i in 0..n {
            for j in i + 1..n {
                let p = self.inst.p(i, j);
                let k = self.kval(st, i, j);
                let q = p * k / (1.0 + p * (k - 1.0));
                if rng.random::<f64>() < q {
                    st.neighbours[i].push(j as u32);
                    st.neighbours[j].push(i as u32);
                    edges += 1;
                }
            }
        }
        st.edges = edges;
        edges
    }

    /// Updates every spin once given the current edges; returns
    /// (proposed, accepted). Heat-bath updates always count as accepted.
    pub fn spin_stage<R: Rng + ?Sized>(&self, st: &mut ChainState, rng: &mut R) -> (usize, usize) {
        let n = self.inst.n();
        let (mut proposed, mut accepted) = (0, 0);
        match &self.space {
            Space::Discrete(al) => {
                let a = al.len();
                let mut logw = vec![0.0; a];
                for i in 0..n {
                    for (s, lw) in logw.iter_mut().enumerate() {
                        *lw = al.probs[s].ln()
                            + st.neighbours[i].iter().map(|&j| al.k[s * a + st.labels[j as usize]].ln()).sum::<f64>();
                    }
                    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
                    let s = draw_label(&w, rng);
                    st.labels[i] = s;
                    st.spins[i] = al.values[s];
                    st.g[i] = al.g[s];
                    proposed += 1;
                    accepted += 1;
                }
            }
            Space::Continuous { alpha_h, c, theta } => {
                for i in 0..n {
                    let x = alpha_h.sample(rng);
                    let gx = self.g.eval(x);
                    let log_ratio: f64 = st.neighbours[i]
                        .iter()
                        .map(|&j| {
                            let gj = st.g[j as usize];
                            ((c + theta * gx * gj) / (c + theta * st.g[i] * gj)).ln()
                        })
                        .sum();
                    proposed += 1;
                    if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
                        st.spins[i] = x;
                        st.g[i] = gx;
                        accepted += 1;
                    }
                }
            }
        }
        (proposed, accepted)
    }

    /// One sweep: the edge stage followed by the spin stage.
    pub fn sweep<R: Rng + ?Sized>(&self, st: &mut ChainState, rng: &mut R) -> SweepStats {
        let n = self.inst.n();
        let edges = self.edge_stage(st, rng);
        let (proposed, accepted) = self.spin_stage(st, rng);
        st.sweep += 1;

        let mut energy = 0.0;
        for i in 0..n {
            for &j in &st.neighbours[i] {
                if (j as usize) > i {
                    energy += self.kval(st, i, j as usize).ln();
                }
            }
        }
        SweepStats {
            b_n: self.inst.biased_mean(st.g.iter().copied()),
            raw: st.g.iter().sum::<f64>() / n as f64,
            energy_proxy: energy,
            edges,
            proposed,
            accepted,
        }
    }
}

fn draw_label<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &x) in w.iter().enumerate() {
        u -= x;
        if u < 0.0 {
            return i;
        }
    }
    w.len() - 1
}

/// Sampler settings. Each chain uses the ChaCha8 stream `stream` of `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McOptions {
    pub sweeps: usize,
    pub burnin: usize,
    pub seed: u64,
    pub stream: u64,
    /// Record every n-th sweep in the trace; 0 disables it.
    pub trace_every: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { sweeps: 10_000, burnin: 1_000, seed: 0, stream: 0, trace_every: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub sweep: u64,
    pub b_n: f64,
    pub energy_proxy: f64,
    pub edges_count: usize,
}

/// Time-averaged order parameter with batch-means error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub n: usize,
    pub sweeps: usize,
    pub burnin: usize,
    pub seed: u64,
    pub chains: usize,
    /// Mean of |B_N| at h = 0, of B_N otherwise.
    pub order_param_estimate: f64,
    pub stderr: f64,
    pub acceptance_rate: f64,
    /// Unweighted magnetization, same sign convention.
    pub raw_magnetization: f64,
    pub absolute: bool,
}

/// Mean and batch-means standard error.
pub fn batch_means(x: &[f64], batches: usize) -> (f64, f64) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let nb = batches.min(n);
    if nb < 2 {
        return (mean, f64::NAN);
    }
    let size = n / nb;
    let bm: Vec<f64> = (0..nb).map(|b| x[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let bmean = bm.iter().sum::<f64>() / nb as f64;
    let var = bm.iter().map(|v| (v - bmean).powi(2)).sum::<f64>() / (nb - 1) as f64;
    (mean, (var / nb as f64).sqrt())
}

fn check_mc(n: usize, opts: &McOptions) -> Result<()> {
    if n == 0 || opts.sweeps == 0 {
        return Err(Error::Domain(format!("need N > 0 and sweeps > 0, got N={n}, sweeps={}", opts.sweeps)));
    }
    if n > MC_MAX_N {
        return Err(Error::Domain(format!("N={n} exceeds the sampler limit {MC_MAX_N}")));
    }
    Ok(())
}

/// Runs one chain on the quantile weight sequence of the model's law.
pub fn run_mc(model: &ModelSpec, n: usize, opts: &McOptions) -> Result<(McSummary, Vec<TraceRow>)> {
    check_mc(n, opts)?;
    let sampler = JointSampler::from_model(model, GrgInstance::from_law(model.weights(), n)?)?;
    let absolute = model.h() == 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(opts.stream);
    let mut st = sampler.initial_state(&mut rng);
    for _ in 0..opts.burnin {
        sampler.sweep(&mut st, &mut rng);
    }
    let mut b = Vec::with_capacity(opts.sweeps);
    let mut raw = 0.0;
    let (mut proposed, mut accepted) = (0usize, 0usize);
    let mut trace = Vec::new();
    for s in 0..opts.sweeps {
        let stats = sampler.sweep(&mut st, &mut rng);
        let sign = if absolute && stats.b_n < 0.0 { -1.0 } else { 1.0 };
        b.push(if absolute { stats.b_n.abs() } else { stats.b_n });
        raw += sign * stats.raw;
        proposed += stats.proposed;
        accepted += stats.accepted;
        if opts.trace_every > 0 && s % opts.trace_every == 0 {
            trace.push(TraceRow { sweep: st.sweep, b_n: stats.b_n, energy_proxy: stats.energy_proxy, edges_count: stats.edges });
        }
    }
    let (mean, stderr) = batch_means(&b, BATCHES);
    Ok((
        McSummary {
            n,
            sweeps: opts.sweeps,
            burnin: opts.burnin,
            seed: opts.seed,
            chains: 1,
            order_param_estimate: mean,
            stderr,
            acceptance_rate: accepted as f64 / proposed as f64,
            raw_magnetization: raw / opts.sweeps as f64,
            absolute,
        },
        trace,
    ))
}

/// Independent chains on streams `opts.stream + c`, run in parallel and
/// averaged; the combined error treats chains as independent.
pub fn run_mc_chains(model: &ModelSpec, n: usize, opts: &McOptions, chains: usize) -> Result<McSummary> {
    if chains == 0 {
        return Err(Error::Domain("need at least one chain".into()));
    }
    let runs = (0..chains as u64)
        .into_par_iter()
        .map(|c| run_mc(model, n, &McOptions { stream: opts.stream + c, trace_every: 0, ..*opts }).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    let k = chains as f64;
    let mut out = runs[0].clone();
    out.chains = chains;
    out.order_param_estimate = runs.iter().map(|r| r.order_param_estimate).sum::<f64>() / k;
    out.stderr = runs.iter().map(|r| r.stderr * r.stderr).sum::<f64>().sqrt() / k;
    out.acceptance_rate = runs.iter().map(|r| r.acceptance_rate).sum::<f64>() / k;
    out.raw_magnetization = runs.iter().map(|r| r.raw_magnetization).sum::<f64>() / k;
    Ok(out)
}

/// Trace CSV `sweep,B_N,energy_proxy,edges_count` preceded by `# seed=`.
pub fn write_trace_csv<W: std::io::Write>(rows: &[TraceRow], seed: u64, mut out: W) -> Result<()> {
    writeln!(out, "# seed={seed}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sweep", "B_N", "energy_proxy", "edges_count"])?;
    for r in rows {
        w.write_record([r.sweep.to_string(), format!("{:.16e}", r.b_n), format!("{:.16e}", r.energy_proxy), r.edges_count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Ising coupling e^{βσσ'} as a kernel, for the sampler and enumeration.
pub fn ising_kernel(beta: f64) -> Result<Kernel> {
    Ok(Kernel::Rank2(Rank2Kernel::new(beta.cosh(), beta.sinh(), Observable::identity())?))
}
