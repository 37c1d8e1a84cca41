//! Multinomial No-U-Turn sampler with a diagonal metric.
//!
//! Warmup adapts the step size by dual averaging throughout. Draws from the
//! second half of warmup (up to the last tenth) estimate the diagonal
//! inverse metric, after which the step size is re-initialised and dual
//! averaging restarts for the remaining iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::log_add_exp;

/// Energy error above which a trajectory is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// A differentiable log density on R^d.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Returns log p(x) and writes ∇ log p(x) into `grad`.
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Adapter for closures.
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F> FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnDensity { dim, f }
    }
}

impl<F> LogDensity for FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(x, grad)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NutsConfig {
    pub warmup: usize,
    pub samples: usize,
    pub target_accept: f64,
    pub max_depth: usize,
    pub chains: usize,
    pub seed: u64,
    /// Starting point; zeros when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for NutsConfig {
    fn default() -> Self {
        NutsConfig { warmup: 1000, samples: 1000, target_accept: 0.8, max_depth: 10, chains: 4, seed: 0, init: None }
    }
}

/// Post-warmup output of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// `samples × dim` draws.
    pub draws: Vec<Vec<f64>>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub divergences: usize,
    pub mean_accept: f64,
    pub tree_depths: Vec<u8>,
    pub leapfrog_steps: usize,
}

impl Chain {
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[i]).collect()
    }
}

#[derive(Clone, Debug)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

/// One leapfrog step of size `eps` under inverse metric `inv_metric`.
pub fn leapfrog<D: LogDensity + ?Sized>(
    target: &D,
    q: &mut [f64],
    p: &mut [f64],
    grad: &mut [f64],
    eps: f64,
    inv_metric: &[f64],
) -> f64 {
    for i in 0..q.len() {
        p[i] += 0.5 * eps * grad[i];
        q[i] += eps * inv_metric[i] * p[i];
    }
    let logp = target.log_density_and_grad(q, grad);
    for i in 0..q.len() {
        p[i] += 0.5 * eps * grad[i];
    }
    logp
}

/// Kinetic energy `½ pᵀ M⁻¹ p`.
pub fn kinetic(p: &[f64], inv_metric: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
}

struct Subtree {
    lsw: f64,
    rho: Vec<f64>,
    proposal: Point,
    /// Momenta at the first and last state built, in build order.
    p_first: Vec<f64>,
    p_last: Vec<f64>,
}

struct Sampler<'a, D: LogDensity + ?Sized> {
    target: &'a D,
    inv_metric: Vec<f64>,
    eps: f64,
    max_depth: usize,
    rng: ChaCha8Rng,
    chain: usize,
    iteration: usize,
    // Per-transition statistics.
    sum_accept: f64,
    n_leapfrog: usize,
    divergent: bool,
}

fn dot_sharp(rho: &[f64], p: &[f64], inv_metric: &[f64]) -> f64 {
    rho.iter().zip(p).zip(inv_metric).map(|((r, p), m)| r * p * m).sum()
}

impl<D: LogDensity + ?Sized> Sampler<'_, D> {
    fn hamiltonian(&self, pt: &Point) -> f64 {
        -pt.logp + kinetic(&pt.p, &self.inv_metric)
    }

    fn step(&mut self, pt: &mut Point, eps: f64) -> Result<()> {
        pt.logp = leapfrog(self.target, &mut pt.q, &mut pt.p, &mut pt.grad, eps, &self.inv_metric);
        if pt.logp.is_finite() && pt.grad.iter().any(|g| !g.is_finite()) {
            let idx = pt.grad.iter().position(|g| !g.is_finite()).unwrap_or(0);
            return Err(Error::NonFinite(format!(
                "gradient component {idx} at chain {}, iteration {}",
                self.chain, self.iteration
            )));
        }
        Ok(())
    }

    fn turning(&self, rho: &[f64], p_a: &[f64], p_b: &[f64]) -> bool {
        dot_sharp(rho, p_a, &self.inv_metric) <= 0.0 || dot_sharp(rho, p_b, &self.inv_metric) <= 0.0
    }

    /// Builds a subtree of `2^depth` states continuing from `edge`, which is
    /// advanced in place. `None` marks a divergent or turning subtree.
    fn build(&mut self, edge: &mut Point, depth: usize, eps: f64, h0: f64) -> Result<Option<Subtree>> {
        if depth == 0 {
            self.step(edge, eps)?;
            self.n_leapfrog += 1;
            let h = self.hamiltonian(edge);
            let dh = if h.is_nan() { f64::INFINITY } else { h - h0 };
            if dh > DIVERGENCE_THRESHOLD {
                self.divergent = true;
                return Ok(None);
            }
            self.sum_accept += (-dh).exp().min(1.0);
            return Ok(Some(Subtree {
                lsw: -dh,
                rho: edge.p.clone(),
                proposal: edge.clone(),
                p_first: edge.p.clone(),
                p_last: edge.p.clone(),
            }));
        }
        let Some(first) = self.build(edge, depth - 1, eps, h0)? else { return Ok(None) };
        let Some(second) = self.build(edge, depth - 1, eps, h0)? else { return Ok(None) };
        let lsw = log_add_exp(first.lsw, second.lsw);
        let take_second = self.rng.random::<f64>() < (second.lsw - lsw).exp();
        let rho: Vec<f64> = first.rho.iter().zip(&second.rho).map(|(a, b)| a + b).collect();
        if self.turning(&rho, &first.p_first, &second.p_last) {
            return Ok(None);
        }
        // Extra checks across the seam between the two halves.
        let rho_a: Vec<f64> = first.rho.iter().zip(&second.p_first).map(|(a, b)| a + b).collect();
        if self.turning(&rho_a, &first.p_first, &second.p_first) {
            return Ok(None);
        }
        let rho_b: Vec<f64> = second.rho.iter().zip(&first.p_last).map(|(a, b)| a + b).collect();
        if self.turning(&rho_b, &first.p_last, &second.p_last) {
            return Ok(None);
        }
        Ok(Some(Subtree {
            lsw,
            rho,
            proposal: if take_second { second.proposal } else { first.proposal },
            p_first: first.p_first,
            p_last: second.p_last,
        }))
    }

    /// One NUTS transition from `current`; returns the tree depth reached.
    fn transition(&mut self, current: &mut Point) -> Result<usize> {
        self.sum_accept = 0.0;
        self.n_leapfrog = 0;
        self.divergent = false;
        let mut start = current.clone();
        for (pi, m) in start.p.iter_mut().zip(&self.inv_metric) {
            let z: f64 = self.rng.sample(StandardNormal);
            *pi = z / m.sqrt();
        }
        let h0 = self.hamiltonian(&start);
        let mut left = start.clone();
        let mut right = start.clone();
        let mut rho = start.p.clone();
        let mut lsw = 0.0;
        let mut proposal = start.q.clone();
        let mut proposal_logp = start.logp;
        let mut proposal_grad = start.grad.clone();
        let mut depth = 0;
        while depth < self.max_depth {
            let forward = self.rng.random::<bool>();
            let eps = if forward { self.eps } else { -self.eps };
            let edge = if forward { &mut right } else { &mut left };
            let sub = self.build(edge, depth, eps, h0)?;
            depth += 1;
            let Some(sub) = sub else { break };
            if self.rng.random::<f64>() < (sub.lsw - lsw).exp() {
                proposal = sub.proposal.q;
                proposal_logp = sub.proposal.logp;
                proposal_grad = sub.proposal.grad;
            }
            lsw = log_add_exp(lsw, sub.lsw);
            for (r, s) in rho.iter_mut().zip(&sub.rho) {
                *r += s;
            }
            // Momenta at the backward and forward extremes, both oriented in
            // forward time.
            if self.turning(&rho, &left.p, &right.p) {
                break;
            }
        }
        current.q = proposal;
        current.logp = proposal_logp;
        current.grad = proposal_grad;
        Ok(depth)
    }

    fn accept_rate(&self) -> f64 {
        if self.n_leapfrog == 0 {
            0.0
        } else {
            self.sum_accept / self.n_leapfrog as f64
        }
    }

    /// Doubles or halves ε until the one-step acceptance crosses 0.5.
    fn initial_step_size(&mut self, at: &Point) -> Result<f64> {
        let mut eps = if self.eps.is_finite() && self.eps > 0.0 { self.eps } else { 1.0 };
        let mut pt = at.clone();
        let h_of = |s: &mut Self, eps: f64, pt: &mut Point| -> Result<f64> {
            *pt = at.clone();
            for (pi, m) in pt.p.iter_mut().zip(&s.inv_metric) {
                let z: f64 = s.rng.sample(StandardNormal);
                *pi = z / m.sqrt();
            }
            let h0 = s.hamiltonian(pt);
            s.step(pt, eps)?;
            let h = s.hamiltonian(pt);
            Ok(if h.is_nan() { f64::NEG_INFINITY } else { h0 - h })
        };
        let first = h_of(self, eps, &mut pt)?;
        let up = first > (0.5f64).ln();
        for _ in 0..100 {
            let next = if up { eps * 2.0 } else { eps / 2.0 };
            let dh = h_of(self, next, &mut pt)?;
            let crossed = if up { dh < (0.5f64).ln() } else { dh > (0.5f64).ln() };
            if crossed {
                return Ok(if up { eps } else { next });
            }
            eps = next;
        }
        Ok(eps)
    }
}

struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps_bar: f64,
    t: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, delta: f64) -> Self {
        DualAveraging { mu: (10.0 * eps).ln(), h_bar: 0.0, log_eps_bar: 0.0, t: 0.0, delta }
    }

    fn update(&mut self, accept: f64) -> f64 {
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.delta - accept);
        let log_eps = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.t.powf(-Self::KAPPA);
        self.log_eps_bar = eta * log_eps + (1.0 - eta) * self.log_eps_bar;
        log_eps.exp()
    }

    fn final_step(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Welford accumulator for the metric estimate.
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Welford { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / self.n as f64;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    /// Sample variance shrunk towards 1e-3, as in common practice.
    fn regularized(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|m2| {
                let var = m2 / (n - 1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// Runs one chain.
pub fn run_chain<D: LogDensity + ?Sized>(target: &D, config: &NutsConfig, chain: usize) -> Result<Chain> {
    let dim = target.dim();
    if dim == 0 {
        return Err(Error::Config("target has no dimensions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);
    let q0 = match &config.init {
        Some(x) if x.len() != dim => {
            return Err(Error::DimensionMismatch { context: "initial point".into(), expected: dim, found: x.len() })
        }
        Some(x) => x.clone(),
        None => vec![0.0; dim],
    };
    let mut grad = vec![0.0; dim];
    let logp = target.log_density_and_grad(&q0, &mut grad);
    if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("log density or gradient at the initial point of chain {chain}")));
    }
    let mut current = Point { q: q0, p: vec![0.0; dim], grad, logp };
    let mut s = Sampler {
        target,
        inv_metric: vec![1.0; dim],
        eps: 1.0,
        max_depth: config.max_depth,
        rng,
        chain,
        iteration: 0,
        sum_accept: 0.0,
        n_leapfrog: 0,
        divergent: false,
    };
    s.eps = s.initial_step_size(&current)?;
    let mut da = DualAveraging::new(s.eps, config.target_accept);

    let w = config.warmup;
    let adapt_metric = w >= 20;
    let window_start = w / 2;
    let window_end = w * 9 / 10;
    let mut welford = Welford::new(dim);
    for it in 0..w {
        s.iteration = it;
        s.transition(&mut current)?;
        s.eps = da.update(s.accept_rate());
        if adapt_metric && it >= window_start && it < window_end {
            welford.push(&current.q);
            if it + 1 == window_end && welford.n >= 2 {
                s.inv_metric = welford.regularized();
                s.eps = s.initial_step_size(&current)?;
                da = DualAveraging::new(s.eps, config.target_accept);
            }
        }
    }
    if w > 0 {
        s.eps = da.final_step();
    }

    let mut out = Chain {
        draws: Vec::with_capacity(config.samples),
        step_size: s.eps,
        inv_metric: s.inv_metric.clone(),
        divergences: 0,
        mean_accept: 0.0,
        tree_depths: Vec::with_capacity(config.samples),
        leapfrog_steps: 0,
    };
    for it in 0..config.samples {
        s.iteration = w + it;
        let depth = s.transition(&mut current)?;
        out.divergences += s.divergent as usize;
        out.mean_accept += s.accept_rate();
        out.leapfrog_steps += s.n_leapfrog;
        out.tree_depths.push(depth as u8);
        out.draws.push(current.q.clone());
    }
    if config.samples > 0 {
        out.mean_accept /= config.samples as f64;
    }
    Ok(out)
}

/// Runs `config.chains` chains in parallel. Chain `c` depends only on
/// `(config.seed, c)`.
pub fn nuts_sample<D: LogDensity + ?Sized>(target: &D, config: &NutsConfig) -> Result<Vec<Chain>> {
    if config.chains == 0 {
        return Err(Error::Config("at least one chain is required".into()));
    }
    if !(0.0..1.0).contains(&config.target_accept) || config.target_accept == 0.0 {
        return Err(Error::Config(format!("target_accept must lie in (0, 1), got {}", config.target_accept)));
    }
    (0..config.chains).into_par_iter().map(|c| run_chain(target, config, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(dim: usize) -> FnDensity<impl Fn(&[f64], &mut [f64]) -> f64 + Sync> {
        FnDensity::new(dim, |x: &[f64], g: &mut [f64]| {
            for i in 0..x.len() {
                g[i] = -x[i];
            }
            -0.5 * x.iter().map(|v| v * v).sum::<f64>()
        })
    }

    #[test]
    fn leapfrog_is_reversible() {
        let target = quadratic(3);
        let m = vec![1.0, 0.5, 2.0];
        let q0 = vec![0.3, -1.2, 0.7];
        let p0 = vec![1.0, 0.2, -0.4];
        let mut q = q0.clone();
        let mut p = p0.clone();
        let mut g = vec![0.0; 3];
        target.log_density_and_grad(&q, &mut g);
        for _ in 0..25 {
            leapfrog(&target, &mut q, &mut p, &mut g, 0.1, &m);
        }
        p.iter_mut().for_each(|v| *v = -*v);
        for _ in 0..25 {
            leapfrog(&target, &mut q, &mut p, &mut g, 0.1, &m);
        }
        for i in 0..3 {
            assert!((q[i] - q0[i]).abs() < 1e-8);
            assert!((-p[i] - p0[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn energy_error_is_second_order() {
        // Over a fixed integration time the energy error is O(ε²); a lone
        // step's local error is one order higher.
        let target = quadratic(1);
        let m = [1.0];
        let dh = |steps: usize| {
            let eps = 1.0 / steps as f64;
            let mut q = vec![1.0];
            let mut p = vec![0.5];
            let mut g = vec![0.0];
            let lp0 = target.log_density_and_grad(&q, &mut g);
            let h0 = -lp0 + kinetic(&p, &m);
            let mut lp = lp0;
            for _ in 0..steps {
                lp = leapfrog(&target, &mut q, &mut p, &mut g, eps, &m);
            }
            (-lp + kinetic(&p, &m) - h0).abs()
        };
        let ratio = dh(10) / dh(20);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn same_seed_same_chains() {
        let target = quadratic(2);
        let cfg = NutsConfig { warmup: 100, samples: 50, chains: 2, seed: 11, ..NutsConfig::default() };
        let a = nuts_sample(&target, &cfg).unwrap();
        let b = nuts_sample(&target, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].draws, a[1].draws);
    }

    #[test]
    fn non_finite_gradient_is_located() {
        let target = FnDensity::new(1, |x: &[f64], g: &mut [f64]| {
            g[0] = if x[0].abs() > 0.5 { f64::NAN } else { -x[0] };
            -0.5 * x[0] * x[0]
        });
        let cfg = NutsConfig { warmup: 50, samples: 50, chains: 1, ..NutsConfig::default() };
        let err = nuts_sample(&target, &cfg).unwrap_err().to_string();
        assert!(err.contains("chain 0"), "{err}");
    }

    #[test]
    fn bad_initial_point_is_rejected() {
        let target = FnDensity::new(1, |_: &[f64], g: &mut [f64]| {
            g[0] = 0.0;
            f64::NEG_INFINITY
        });
        assert!(nuts_sample(&target, &NutsConfig::default()).is_err());
    }
}
