//! Dense linear solves and strongly connected components for the pair-chain
//! systems of policy evaluation.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::numeric::Scalar;

/// Solves `a x = b` for square nonsingular `a` by Gaussian elimination with
/// pivots chosen by [`Scalar::pivot_weight`]. Returns `None` if `a` is singular.
pub fn solve_dense<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Option<Vec<S>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .filter(|r| !a[*r][col].is_nearly_zero())
            .max_by(|x, y| {
                a[*x][col]
                    .pivot_weight()
                    .partial_cmp(&a[*y][col].pivot_weight())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(y.cmp(x))
            })?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col].clone();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone() / p.clone();
            for c in col..n {
                let delta = f.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - delta;
            }
            b[r] = b[r].clone() - f * b[col].clone();
        }
    }
    let mut x = vec![S::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            if !a[r][c].is_zero() {
                acc = acc - a[r][c].clone() * x[c].clone();
            }
        }
        x[r] = acc / a[r][r].clone();
    }
    Some(x)
}

/// Strongly connected components of the graph on `0..n`, sinks first.
pub fn sccs(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (a, b) in edges {
        g.add_edge(nodes[a], nodes[b], ());
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|ix| ix.index()).collect();
            c.sort_unstable();
            c
        })
        .collect()
}
