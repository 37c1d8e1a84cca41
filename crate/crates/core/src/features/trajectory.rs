//! Geometry of a text's embedding trajectory: how far it travels, how much
//! space it covers, and how directly it moves through that space.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::path::{sequential_length, shortest_hamiltonian_path};
use crate::error::{Error, Result};

/// Jitter added to each principal variance before taking the determinant.
pub const VOLUME_EPSILON: f64 = 1e-8;
/// Maximum number of principal directions used for volume.
pub const VOLUME_DIMS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub speed: f64,
    pub volume: f64,
    /// `None` for fewer than three vectors.
    pub circuitousness: Option<f64>,
    /// Set when the shortest path was found heuristically.
    pub approximate: bool,
}

/// Total step distance divided by the number of vectors.
pub fn speed(vectors: &[Vec<f64>]) -> f64 {
    if vectors.len() < 2 {
        return 0.0;
    }
    sequential_length(vectors) / vectors.len() as f64
}

/// `sqrt(det(C + eps I))` where `C` is the sample covariance of the vectors
/// projected onto their top `min(5, n - 1)` principal directions.
pub fn volume(vectors: &[Vec<f64>]) -> f64 {
    let n = vectors.len();
    if n < 2 {
        return 0.0;
    }
    let d = vectors[0].len();
    let mut x = DMatrix::<f64>::from_fn(n, d, |i, j| vectors[i][j]);
    for j in 0..d {
        let m = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-m);
    }
    // The Gram matrix shares its nonzero spectrum with the covariance and is
    // smaller whenever there are fewer vectors than dimensions.
    let scatter = if n <= d { &x * x.transpose() } else { x.transpose() * &x };
    let scatter = scatter / (n - 1) as f64;
    let mut eig: Vec<f64> = scatter.symmetric_eigenvalues().iter().map(|v| v.max(0.0)).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let k = VOLUME_DIMS.min(n - 1).min(eig.len());
    eig[..k].iter().map(|l| l + VOLUME_EPSILON).product::<f64>().sqrt()
}

/// In-order path length over the shortest Hamiltonian path length.
pub fn circuitousness(vectors: &[Vec<f64>]) -> Option<(f64, bool)> {
    if vectors.len() < 3 {
        return None;
    }
    let actual = sequential_length(vectors);
    let best = shortest_hamiltonian_path(vectors);
    // The in-order path is itself a Hamiltonian path.
    let shortest = best.length.min(actual);
    if shortest == 0.0 {
        return Some((1.0, best.approximate));
    }
    Some((actual / shortest, best.approximate))
}

pub fn trajectory_features(vectors: &[Vec<f64>]) -> Result<Trajectory> {
    if vectors.is_empty() {
        return Err(Error::Degenerate("trajectory features need at least one vector".into()));
    }
    let circ = circuitousness(vectors);
    Ok(Trajectory {
        speed: speed(vectors),
        volume: volume(vectors),
        circuitousness: circ.map(|c| c.0),
        approximate: circ.is_some_and(|c| c.1),
    })
}
