use rand::Rng;

use super::adaptive::{mh_step_cached, AdaptiveTuner, Support};
use crate::error::{Error, Result};
use crate::graph::CarDecomposition;
use crate::sparse::SparseMatrix;

/// Greedy colouring of the pattern of a symmetric matrix, visiting indices
/// in order and giving each the smallest colour unused by its neighbours.
/// Indices sharing a colour are conditionally independent given the rest.
pub fn color_blocks(q: &SparseMatrix) -> Vec<Vec<usize>> {
    let n = q.ncols();
    let mut color = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut taken = Vec::new();
    for i in 0..n {
        taken.clear();
        for (j, _) in q.col(i) {
            if j != i && color[j] != usize::MAX {
                taken.push(color[j]);
            }
        }
        taken.sort_unstable();
        taken.dedup();
        let c = taken.iter().enumerate().find(|(k, &c)| *k != c).map_or(taken.len(), |(k, _)| k);
        color[i] = c;
        if c == blocks.len() {
            blocks.push(Vec::new());
        }
        blocks[c].push(i);
    }
    blocks
}

/// Observation model seen from one latent node.
pub trait NodeLikelihood {
    /// Log-likelihood contribution of everything that depends on node `i`
    /// when its value is `value`, all other nodes held fixed.
    fn node_log_lik(&self, i: usize, value: f64) -> f64;

    /// Called after node `i` moved from `old` to `new`.
    fn node_changed(&mut self, i: usize, old: f64, new: f64);
}

/// Data-free likelihood; the update then targets the prior.
pub struct Flat;

impl NodeLikelihood for Flat {
    fn node_log_lik(&self, _: usize, _: f64) -> f64 {
        0.0
    }

    fn node_changed(&mut self, _: usize, _: f64, _: f64) {}
}

/// One sweep of single-site random-walk MH over all nodes, block by block,
/// each node targeting its likelihood times the conditional Gaussian prior
/// `N(Σ_j C_ij η_j, M_ii)`. Returns the number of accepted moves.
pub fn one_at_a_time_block_update<R: Rng + ?Sized>(
    eta: &mut [f64],
    car: &CarDecomposition,
    blocks: &[Vec<usize>],
    likelihood: &mut impl NodeLikelihood,
    tuners: &mut [AdaptiveTuner],
    rng: &mut R,
) -> Result<usize> {
    if car.m.len() != eta.len() || tuners.len() != eta.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} nodes, {} conditionals, {} tuners",
            eta.len(),
            car.m.len(),
            tuners.len()
        )));
    }
    let mut accepted = 0;
    for block in blocks {
        for &i in block {
            let (mean, var) = car.conditional(i, eta);
            let mut target = |v: f64| likelihood.node_log_lik(i, v) - (v - mean) * (v - mean) / (2.0 * var);
            let current = eta[i];
            let lp = target(current);
            let (new, _, acc) = mh_step_cached(&mut target, current, lp, Support::Real, &mut tuners[i], rng)?;
            if acc {
                eta[i] = new;
                likelihood.node_changed(i, current, new);
                accepted += 1;
            }
        }
    }
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(n: usize, edges: &[(usize, usize)]) -> SparseMatrix {
        let mut t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        t.extend(edges.iter().map(|&(i, j)| (i, j, 1.0)));
        SparseMatrix::from_symmetric_triplets(n, &t).unwrap()
    }

    #[test]
    fn path_of_three() {
        assert_eq!(color_blocks(&pattern(3, &[(0, 1), (1, 2)])), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn complete_graph_gives_singletons() {
        let e: Vec<_> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).collect();
        assert_eq!(color_blocks(&pattern(4, &e)), vec![vec![0], vec![1], vec![2], vec![3]]);
    }
}
