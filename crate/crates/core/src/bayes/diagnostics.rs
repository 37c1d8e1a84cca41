//! Split R-hat and bulk effective sample size.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::nuts::Chain;
use crate::math::{mean, sample_variance};

pub const RHAT_THRESHOLD: f64 = 1.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarDiagnostics {
    /// NaN when undefined (e.g. constant draws).
    pub rhat: f64,
    pub ess: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub scalars: Vec<ScalarDiagnostics>,
    pub divergences: usize,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> f64 {
        self.scalars.iter().map(|s| s.rhat).fold(f64::NAN, f64::max)
    }
    pub fn any_flagged(&self) -> bool {
        self.scalars.iter().any(|s| s.flagged)
    }
}

/// Halves every chain; a trailing odd draw is dropped.
fn split(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Potential scale reduction over already split chains.
fn rhat_of(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    if m < 2.0 || n < 2.0 {
        return f64::NAN;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| sample_variance(c)).sum::<f64>() / m;
    let b = n * sample_variance(&means);
    if !(w > 0.0) {
        return f64::NAN;
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Split R-hat of one scalar given its per-chain draws.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    rhat_of(&split(chains))
}

fn autocovariance(centered: &[f64], lag: usize) -> f64 {
    let n = centered.len();
    centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
}

/// Multi-chain ESS with Geyer's initial monotone sequence estimator.
fn ess_of(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    if n < 4 {
        return f64::NAN;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| sample_variance(c)).sum::<f64>() / m as f64;
    let b_over_n = if m > 1 { sample_variance(&means) } else { 0.0 };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if !(var_plus > 0.0) {
        return f64::NAN;
    }
    let centered: Vec<Vec<f64>> =
        chains.iter().zip(&means).map(|(c, mu)| c.iter().map(|v| v - mu).collect()).collect();
    let rho = |t: usize| -> f64 {
        let mean_acov = centered.iter().map(|c| autocovariance(c, t)).sum::<f64>() / m as f64;
        1.0 - (w - mean_acov) / var_plus
    };
    // Pair sums P_k = ρ_{2k} + ρ_{2k+1}, kept while positive and forced
    // monotone non-increasing.
    let mut pairs = Vec::new();
    let mut t = 0;
    while t + 1 < n {
        let p = rho(t) + rho(t + 1);
        if p <= 0.0 {
            break;
        }
        let p = pairs.last().map_or(p, |&prev: &f64| p.min(prev));
        pairs.push(p);
        t += 2;
    }
    let tau = -1.0 + 2.0 * pairs.iter().sum::<f64>();
    let total = (m * n) as f64;
    let tau = tau.max(1.0 / total.log10());
    total / tau
}

/// Replaces draws by normal scores of their pooled ranks (average ranks for ties).
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut all: Vec<(f64, usize, usize)> = Vec::new();
    for (c, chain) in chains.iter().enumerate() {
        for (i, &v) in chain.iter().enumerate() {
            all.push((v, c, i));
        }
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = all.len() as f64;
    let normal = Normal::standard();
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let z = normal.inverse_cdf((rank - 0.375) / (s + 0.25));
        for k in i..=j {
            out[all[k].1][all[k].2] = z;
        }
        i = j + 1;
    }
    out
}

/// Bulk ESS: rank-normalized split chains.
pub fn bulk_ess(chains: &[Vec<f64>]) -> f64 {
    let split = split(chains);
    if split.iter().flatten().all(|v| *v == split[0][0]) {
        return f64::NAN;
    }
    ess_of(&rank_normalize(&split))
}

/// Diagnostics for one scalar.
pub fn scalar_diagnostics(chains: &[Vec<f64>]) -> ScalarDiagnostics {
    let rhat = split_rhat(chains);
    ScalarDiagnostics { rhat, ess: bulk_ess(chains), flagged: !(rhat <= RHAT_THRESHOLD) }
}

/// Diagnostics for every coordinate of the sampled vectors.
pub fn diagnostics(chains: &[Chain]) -> Diagnostics {
    let dim = chains.first().and_then(|c| c.draws.first()).map_or(0, |d| d.len());
    let scalars = (0..dim)
        .map(|i| {
            let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.column(i)).collect();
            scalar_diagnostics(&cols)
        })
        .collect();
    Diagnostics { scalars, divergences: chains.iter().map(|c| c.divergences).sum() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_draws(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn constant_chains_are_flagged() {
        let d = scalar_diagnostics(&[vec![1.0; 100], vec![1.0; 100]]);
        assert!(d.rhat.is_nan());
        assert!(d.flagged);
    }

    #[test]
    fn independent_normal_chains_converge() {
        let d = scalar_diagnostics(&[normal_draws(1, 1000), normal_draws(2, 1000)]);
        assert!(d.rhat < 1.05, "{}", d.rhat);
        assert!(!d.flagged);
    }

    #[test]
    fn iid_ess_is_close_to_draw_count() {
        let chains = [normal_draws(3, 1000), normal_draws(4, 1000)];
        let ess = bulk_ess(&chains);
        assert!((ess - 2000.0).abs() <= 400.0, "{ess}");
        let single = bulk_ess(&[normal_draws(5, 1000)]);
        assert!((single - 1000.0).abs() <= 200.0, "{single}");
    }

    #[test]
    fn shifted_chains_are_flagged() {
        let a = normal_draws(6, 500);
        let b: Vec<f64> = normal_draws(7, 500).iter().map(|v| v + 3.0).collect();
        assert!(split_rhat(&[a, b]) > 1.5);
    }

    #[test]
    fn autocorrelated_chain_has_smaller_ess() {
        let e = normal_draws(8, 2000);
        let mut x = vec![0.0; 2000];
        for i in 1..2000 {
            x[i] = 0.9 * x[i - 1] + e[i];
        }
        // AR(1) with φ = 0.9: ESS ≈ n (1 − φ)/(1 + φ) ≈ 105.
        let ess = bulk_ess(&[x]);
        assert!(ess > 50.0 && ess < 250.0, "{ess}");
    }
}
