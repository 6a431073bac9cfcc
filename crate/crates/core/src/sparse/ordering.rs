use std::collections::BTreeSet;

/// Minimum-degree elimination order on an undirected graph given as sorted
/// adjacency lists (no self loops). Returns `perm` with `perm[k]` the vertex
/// eliminated at step `k`. Ties break on the lower vertex index, so the
/// result is deterministic.
///
/// Elimination is simulated explicitly: removing a vertex joins its
/// remaining neighbours into a clique.
pub fn minimum_degree(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut adj: Vec<Vec<usize>> = adjacency.to_vec();
    let mut eliminated = vec![false; n];
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut perm = Vec::with_capacity(n);

    while let Some(&(deg, v)) = queue.iter().next() {
        queue.remove(&(deg, v));
        eliminated[v] = true;
        perm.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &a in &nbrs {
            let old = adj[a].len();
            // adj[a] := (adj[a] ∪ nbrs) \ {a, v}
            let merged = merge_excluding(&adj[a], &nbrs, a, v);
            adj[a] = merged;
            let new = adj[a].len();
            if old != new {
                queue.remove(&(old, a));
                queue.insert((new, a));
            }
        }
        debug_assert!(nbrs.iter().all(|&a| !eliminated[a]));
    }
    perm
}

fn merge_excluding(x: &[usize], y: &[usize], skip_a: usize, skip_b: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        let next = match (x.get(i), y.get(j)) {
            (Some(&a), Some(&b)) if a == b => {
                i += 1;
                j += 1;
                a
            }
            (Some(&a), Some(&b)) if a < b => {
                i += 1;
                a
            }
            (Some(_), Some(&b)) => {
                j += 1;
                b
            }
            (Some(&a), None) => {
                i += 1;
                a
            }
            (None, Some(&b)) => {
                j += 1;
                b
            }
            (None, None) => unreachable!(),
        };
        if next != skip_a && next != skip_b {
            out.push(next);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_graph_eliminates_leaves_first() {
        // centre 0 connected to 1..=4
        let adj = vec![vec![1, 2, 3, 4], vec![0], vec![0], vec![0], vec![0]];
        let p = minimum_degree(&adj);
        assert_eq!(p[0], 1);
        let mut sorted = p.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        // the hub never has to go before two leaves are gone
        let hub_pos = p.iter().position(|&v| v == 0).unwrap();
        assert!(hub_pos >= 3);
    }

    #[test]
    fn path_is_a_permutation() {
        let n = 10;
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        let mut p = minimum_degree(&adj);
        p.sort();
        assert_eq!(p, (0..n).collect::<Vec<_>>());
    }
}
