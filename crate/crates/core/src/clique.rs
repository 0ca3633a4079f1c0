//! Maximal feature cliques by max-degree splitting.
//!
//! The search picks the vertex of maximum degree within the current vertex
//! set, recurses into its neighborhood, and then treats each of its
//! non-neighbors in turn as a new pivot over the neighbors it has among the
//! vertices not yet handled. When a neighborhood has no internal edge, every
//! member closes its own clique. The raw output may repeat cliques or contain
//! subsumed ones; those are filtered before returning.

use rayon::prelude::*;

use crate::bits::BitSet;
use crate::model::{FeatureClique, FeatureId, Pattern};
use crate::size2::FeatureGraph;

struct Dense {
    vertices: Vec<FeatureId>,
    adj: Vec<BitSet>,
}

impl Dense {
    fn new(graph: &FeatureGraph) -> Self {
        let vertices: Vec<FeatureId> = graph.vertices().collect();
        let n = vertices.len();
        let adj = vertices
            .iter()
            .map(|&v| {
                BitSet::from_indices(
                    n,
                    graph
                        .neighbors(v)
                        .iter()
                        .map(|u| vertices.binary_search(u).expect("neighbor is a vertex")),
                )
            })
            .collect();
        Self { vertices, adj }
    }

    fn n(&self) -> usize {
        self.vertices.len()
    }

    fn has_internal_edge(&self, set: &BitSet) -> bool {
        set.iter().any(|v| self.adj[v].intersection_len(set) > 0)
    }

    /// Vertex of maximum degree inside `set`; the lowest index wins ties.
    fn max_degree(&self, set: &BitSet) -> usize {
        let mut best = None;
        let mut best_deg = 0;
        for v in set.iter() {
            let deg = self.adj[v].intersection_len(set);
            if best.is_none() || deg > best_deg {
                best = Some(v);
                best_deg = deg;
            }
        }
        best.expect("non-empty vertex set")
    }

    fn emit(acc: &[usize], out: &mut Vec<Vec<usize>>) {
        if acc.len() >= 2 {
            let mut c = acc.to_vec();
            c.sort_unstable();
            out.push(c);
        }
    }

    /// Extends `acc + pivot` by the maximal cliques of `sub`.
    fn branch(&self, pivot: usize, sub: BitSet, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        acc.push(pivot);
        if self.has_internal_edge(&sub) {
            self.search(sub, acc, out);
        } else if sub.is_empty() {
            Self::emit(acc, out);
        } else {
            for u in sub.iter() {
                acc.push(u);
                Self::emit(acc, out);
                acc.pop();
            }
        }
        acc.pop();
    }

    /// The pivot's own branch plus one `(pivot', neighborhood)` task per
    /// non-neighbor, in processing order.
    fn split(&self, set: &BitSet) -> (usize, BitSet, Vec<(usize, BitSet)>) {
        let pivot = self.max_degree(set);
        let link = self.adj[pivot].intersection(set);
        let mut remaining = set.clone();
        remaining.remove(pivot);
        let not_link: Vec<usize> = remaining.iter().filter(|&v| !link.contains(v)).collect();
        let mut tasks = Vec::with_capacity(not_link.len());
        for v in not_link {
            remaining.remove(v);
            tasks.push((v, self.adj[v].intersection(&remaining)));
        }
        (pivot, link, tasks)
    }

    fn search(&self, set: BitSet, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if set.is_empty() {
            Self::emit(acc, out);
            return;
        }
        let (pivot, link, tasks) = self.split(&set);
        self.branch(pivot, link, acc, out);
        for (v, second) in tasks {
            self.branch(v, second, acc, out);
        }
    }
}

/// Drops duplicates and cliques strictly contained in another, then sorts.
fn keep_maximal(n: usize, mut raw: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    raw.sort_unstable();
    raw.dedup();
    raw.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut kept: Vec<(Vec<usize>, BitSet)> = Vec::with_capacity(raw.len());
    for c in raw {
        let bits = BitSet::from_indices(n, c.iter().copied());
        let subsumed = kept
            .iter()
            .take_while(|(k, _)| k.len() > c.len())
            .any(|(_, kb)| bits.is_subset(kb));
        if !subsumed {
            kept.push((c, bits));
        }
    }
    kept.into_iter().map(|(c, _)| c).collect()
}

/// All maximal cliques with at least two vertices, in canonical order.
pub fn maximal_cliques(graph: &FeatureGraph) -> Vec<FeatureClique> {
    let dense = Dense::new(graph);
    let n = dense.n();
    if n == 0 {
        return Vec::new();
    }
    let all = BitSet::from_indices(n, 0..n);
    let (pivot, link, tasks) = dense.split(&all);

    let mut raw = Vec::new();
    dense.branch(pivot, link, &mut Vec::new(), &mut raw);
    let rest: Vec<Vec<Vec<usize>>> = tasks
        .into_par_iter()
        .map(|(v, second)| {
            let mut out = Vec::new();
            dense.branch(v, second, &mut Vec::new(), &mut out);
            out
        })
        .collect();
    raw.extend(rest.into_iter().flatten());

    let mut cliques: Vec<FeatureClique> = keep_maximal(n, raw)
        .into_iter()
        .map(|c| Pattern::from_sorted(c.into_iter().map(|i| dense.vertices[i]).collect()))
        .collect();
    cliques.sort();
    cliques
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(u32, u32)]) -> FeatureGraph {
        FeatureGraph::from_edges(edges.iter().map(|&(a, b)| (FeatureId(a), FeatureId(b))))
    }

    fn ids(cliques: &[FeatureClique]) -> Vec<Vec<u32>> {
        cliques
            .iter()
            .map(|c| c.iter().map(|f| f.0).collect())
            .collect()
    }

    #[test]
    fn empty_graph() {
        assert!(maximal_cliques(&FeatureGraph::default()).is_empty());
    }

    #[test]
    fn isolated_vertices_are_dropped() {
        let mut g = graph(&[(0, 1)]);
        g.add_vertex(FeatureId(7));
        assert_eq!(ids(&maximal_cliques(&g)), [[0, 1]]);
    }

    #[test]
    fn complete_graph_is_one_clique() {
        let edges: Vec<(u32, u32)> = (0..6).flat_map(|a| (a + 1..6).map(move |b| (a, b))).collect();
        assert_eq!(ids(&maximal_cliques(&graph(&edges))), [vec![0, 1, 2, 3, 4, 5]]);
    }

    #[test]
    fn non_adjacent_neighbors_each_close_a_clique() {
        // star: the center's neighborhood has no internal edge
        assert_eq!(
            ids(&maximal_cliques(&graph(&[(0, 1), (0, 2), (0, 3)]))),
            [[0, 1], [0, 2], [0, 3]]
        );
    }

    #[test]
    fn two_triangles_sharing_an_edge() {
        let g = graph(&[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(ids(&maximal_cliques(&g)), [[0, 1, 2], [1, 2, 3]]);
    }

    #[test]
    fn subset_filter() {
        let kept = keep_maximal(4, vec![vec![0, 1], vec![0, 1, 2], vec![0, 1, 2], vec![2, 3]]);
        assert_eq!(kept, [vec![0, 1, 2], vec![2, 3]]);
    }
}
