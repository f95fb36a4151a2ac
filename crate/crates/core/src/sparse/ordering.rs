use super::SparseMatrix;

/// Fill-reducing minimum-degree ordering of a symmetric pattern.
///
/// Simulates elimination on the graph of the matrix, always removing a node
/// of smallest current degree (ties go to the lowest index) and turning its
/// neighbourhood into a clique. Returns `perm` with `perm[k]` the original
/// index placed at position `k`.
pub fn minimum_degree(m: &SparseMatrix) -> Vec<usize> {
    let n = m.ncols();
    let mut adj: Vec<Vec<usize>> = (0..n)
        .map(|j| m.col(j).map(|(i, _)| i).filter(|&i| i != j).collect())
        .collect();
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut merged: Vec<usize> = Vec::new();
    for _ in 0..n {
        let mut best = usize::MAX;
        let mut best_deg = usize::MAX;
        for (v, nb) in adj.iter().enumerate() {
            if !eliminated[v] && nb.len() < best_deg {
                best = v;
                best_deg = nb.len();
            }
        }
        eliminated[best] = true;
        perm.push(best);
        let neighbours = std::mem::take(&mut adj[best]);
        for &u in &neighbours {
            merged.clear();
            let (mut a, mut b) = (0, 0);
            let au = &adj[u];
            while a < au.len() || b < neighbours.len() {
                let x = au.get(a).copied().unwrap_or(usize::MAX);
                let y = neighbours.get(b).copied().unwrap_or(usize::MAX);
                let next = x.min(y);
                if x == next {
                    a += 1;
                }
                if y == next {
                    b += 1;
                }
                if next != u && next != best {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
        }
    }
    perm
}
