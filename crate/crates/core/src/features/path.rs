//! Shortest Hamiltonian path through a point set, endpoints free.
//!
//! Exact Held-Karp dynamic programming up to [`EXACT_LIMIT`] points; beyond
//! that, nearest-neighbour construction from several starts refined by 2-opt,
//! with the result flagged approximate.

use crate::math::euclidean;

pub const EXACT_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianPath {
    pub length: f64,
    pub order: Vec<usize>,
    pub approximate: bool,
}

fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points.iter().map(|a| points.iter().map(|b| euclidean(a, b)).collect()).collect()
}

pub fn path_length(points: &[Vec<f64>], order: &[usize]) -> f64 {
    order.windows(2).map(|w| euclidean(&points[w[0]], &points[w[1]])).sum()
}

/// In-order path length of the points as given.
pub fn sequential_length(points: &[Vec<f64>]) -> f64 {
    points.windows(2).map(|w| euclidean(&w[0], &w[1])).sum()
}

pub fn shortest_hamiltonian_path(points: &[Vec<f64>]) -> HamiltonianPath {
    match points.len() {
        0 => HamiltonianPath { length: 0.0, order: vec![], approximate: false },
        1 => HamiltonianPath { length: 0.0, order: vec![0], approximate: false },
        n if n <= EXACT_LIMIT => held_karp(&distance_matrix(points)),
        _ => heuristic(&distance_matrix(points)),
    }
}

fn held_karp(d: &[Vec<f64>]) -> HamiltonianPath {
    let n = d.len();
    let full = 1usize << n;
    // cost[mask * n + last]: shortest path visiting `mask`, ending at `last`.
    let mut cost = vec![f64::INFINITY; full * n];
    let mut prev = vec![usize::MAX; full * n];
    for i in 0..n {
        cost[(1 << i) * n + i] = 0.0;
    }
    for mask in 1..full {
        for last in 0..n {
            let c = cost[mask * n + last];
            if mask & (1 << last) == 0 || c == f64::INFINITY {
                continue;
            }
            for next in 0..n {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let m2 = mask | (1 << next);
                let cand = c + d[last][next];
                if cand < cost[m2 * n + next] {
                    cost[m2 * n + next] = cand;
                    prev[m2 * n + next] = last;
                }
            }
        }
    }
    let mask = full - 1;
    let (mut last, length) = (0..n)
        .map(|i| (i, cost[mask * n + i]))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    let mut order = Vec::with_capacity(n);
    let mut m = mask;
    loop {
        order.push(last);
        let p = prev[m * n + last];
        m &= !(1 << last);
        if p == usize::MAX {
            break;
        }
        last = p;
    }
    order.reverse();
    HamiltonianPath { length, order, approximate: false }
}

fn nearest_neighbour(d: &[Vec<f64>], start: usize) -> Vec<usize> {
    let n = d.len();
    let mut visited = vec![false; n];
    let mut order = vec![start];
    visited[start] = true;
    let mut cur = start;
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !visited[j])
            .min_by(|&a, &b| d[cur][a].total_cmp(&d[cur][b]))
            .expect("unvisited point remains");
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    order
}

/// 2-opt for an open path: reverse `order[i..=j]` while that shortens it.
fn two_opt(d: &[Vec<f64>], order: &mut [usize]) {
    let n = order.len();
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let before_old = if i > 0 { d[order[i - 1]][order[i]] } else { 0.0 };
                let after_old = if j + 1 < n { d[order[j]][order[j + 1]] } else { 0.0 };
                let before_new = if i > 0 { d[order[i - 1]][order[j]] } else { 0.0 };
                let after_new = if j + 1 < n { d[order[i]][order[j + 1]] } else { 0.0 };
                if before_new + after_new < before_old + after_old - 1e-12 {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
    }
}

fn heuristic(d: &[Vec<f64>]) -> HamiltonianPath {
    let n = d.len();
    let starts: Vec<usize> = if n <= 64 { (0..n).collect() } else { (0..8).map(|k| k * (n - 1) / 7).collect() };
    let mut candidates: Vec<Vec<usize>> = starts.into_iter().map(|s| nearest_neighbour(d, s)).collect();
    candidates.push((0..n).collect());
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mut order in candidates {
        two_opt(d, &mut order);
        let len: f64 = order.windows(2).map(|w| d[w[0]][w[1]]).sum();
        if best.as_ref().map_or(true, |(b, _)| len < *b) {
            best = Some((len, order));
        }
    }
    let (length, order) = best.expect("at least one candidate");
    HamiltonianPath { length, order, approximate: true }
}

/// Length of a minimum spanning tree: a lower bound on any Hamiltonian path.
pub fn spanning_tree_length(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..n {
        let u = (0..n).filter(|&i| !in_tree[i]).min_by(|&a, &b| best[a].total_cmp(&best[b])).unwrap();
        in_tree[u] = true;
        total += best[u];
        for v in 0..n {
            if !in_tree[v] {
                best[v] = best[v].min(euclidean(&points[u], &points[v]));
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    /// Exhaustive oracle over all permutations.
    fn brute_force(points: &[Vec<f64>]) -> f64 {
        fn permute(points: &[Vec<f64>], order: &mut Vec<usize>, used: &mut Vec<bool>, best: &mut f64) {
            if order.len() == points.len() {
                *best = best.min(path_length(points, order));
                return;
            }
            for i in 0..points.len() {
                if !used[i] {
                    used[i] = true;
                    order.push(i);
                    permute(points, order, used, best);
                    order.pop();
                    used[i] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        permute(points, &mut Vec::new(), &mut vec![false; points.len()], &mut best);
        best
    }

    #[test]
    fn collinear_span() {
        let pts = vec![vec![0.0], vec![2.0], vec![1.0]];
        let p = shortest_hamiltonian_path(&pts);
        assert_eq!(p.length, 2.0);
        assert!(!p.approximate);
    }

    #[test]
    fn exact_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=8 {
            for _ in 0..5 {
                let pts = random_points(&mut rng, n, 3);
                let p = shortest_hamiltonian_path(&pts);
                assert!((p.length - brute_force(&pts)).abs() < 1e-12, "n = {n}");
                assert!((path_length(&pts, &p.order) - p.length).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn approximate_beyond_limit_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = random_points(&mut rng, 13, 2);
        let p = shortest_hamiltonian_path(&pts);
        assert!(p.approximate);
        assert!(p.length >= spanning_tree_length(&pts) - 1e-12);
        // Dropping a point never lengthens the optimum (triangle inequality),
        // so every 12-point exact optimum bounds the 13-point path from below.
        for skip in 0..13 {
            let sub: Vec<Vec<f64>> = pts.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, p)| p.clone()).collect();
            assert!(p.length >= shortest_hamiltonian_path(&sub).length - 1e-12);
        }
        let mut sorted = p.order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..13).collect::<Vec<_>>());
    }
}
