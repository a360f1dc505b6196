//! Contact graphs on at most 16 vertices: isomorphism, automorphisms and a
//! canonical labeling.
//!
//! Graphs are small enough (n ≤ 8 in practice) that exhaustive backtracking
//! with degree pruning is fast. The canonical form uses
//! individualization–refinement: an ordered partition is refined by
//! neighbour counts until equitable, then every non-singleton cell is
//! split in turn and the lexicographically smallest adjacency code over all
//! leaves is kept.

use std::fmt;

use crate::error::{Error, Result};
use crate::geom::{Bond, Configuration, ConstraintSet, DIAMETER};

pub const MAX_VERTICES: usize = 16;

/// Symmetric adjacency matrix stored as one bitmask per vertex.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContactGraph {
    n: usize,
    rows: [u16; MAX_VERTICES],
}

impl ContactGraph {
    pub fn empty(n: usize) -> Self {
        assert!(n <= MAX_VERTICES, "at most {MAX_VERTICES} vertices");
        Self {
            n,
            rows: [0; MAX_VERTICES],
        }
    }

    pub fn from_bonds(n: usize, bonds: &[Bond]) -> Result<Self> {
        let mut g = Self::empty(n);
        for b in bonds {
            if b.j >= n || b.i >= b.j {
                return Err(Error::InvalidBond(b.i, b.j));
            }
            g.add_edge(b.i, b.j);
        }
        Ok(g)
    }

    pub fn from_constraints(n: usize, alpha: &ConstraintSet) -> Result<Self> {
        Self::from_bonds(n, alpha.bonds())
    }

    /// Contact graph of a configuration: pairs closer than `cutoff`.
    pub fn from_configuration(x: &Configuration, cutoff: f64) -> Self {
        let n = x.n();
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                if x.distance(i, j) < cutoff {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }

    /// Contacts of a configuration at unit distance within `tol`.
    pub fn from_contacts(x: &Configuration, tol: f64) -> Self {
        Self::from_configuration(x, DIAMETER + tol)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        self.rows[i] |= 1 << j;
        self.rows[j] |= 1 << i;
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.rows[i] &= !(1 << j);
        self.rows[j] &= !(1 << i);
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.rows[i] >> j & 1 == 1
    }

    pub fn row(&self, i: usize) -> u16 {
        self.rows[i]
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.rows[i].count_ones()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|i| self.degree(i) as usize).sum::<usize>() / 2
    }

    pub fn bonds(&self) -> Vec<Bond> {
        let mut out = Vec::with_capacity(self.edge_count());
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has_edge(i, j) {
                    out.push(Bond { i, j });
                }
            }
        }
        out
    }

    pub fn constraints(&self) -> ConstraintSet {
        ConstraintSet::new(self.bonds())
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let full: u16 = if self.n == 16 { u16::MAX } else { (1 << self.n) - 1 };
        let mut seen: u16 = 1;
        let mut frontier: u16 = 1;
        while frontier != 0 {
            let mut next = 0;
            for i in 0..self.n {
                if frontier >> i & 1 == 1 {
                    next |= self.rows[i];
                }
            }
            frontier = next & !seen;
            seen |= next;
        }
        seen == full
    }

    /// Number of edges with both ends in the vertex set `mask`.
    pub fn induced_edges(&self, mask: u16) -> u32 {
        let mut total = 0;
        for i in 0..self.n {
            if mask >> i & 1 == 1 {
                total += (self.rows[i] & mask).count_ones();
            }
        }
        total / 2
    }

    /// The graph with vertex `i` renamed to `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let mut g = Self::empty(self.n);
        for b in self.bonds() {
            g.add_edge(perm[b.i], perm[b.j]);
        }
        g
    }

    /// Upper-triangle adjacency bits of the graph whose vertex at position `k`
    /// is `order[k]`, packed column by column with the first pair most
    /// significant.
    fn code_for(&self, order: &[usize]) -> u128 {
        let mut code: u128 = 0;
        for j in 1..self.n {
            for i in 0..j {
                code = code << 1 | self.has_edge(order[i], order[j]) as u128;
            }
        }
        code
    }

    /// Canonical adjacency code; two graphs are isomorphic iff codes agree.
    pub fn canonical_code(&self) -> u128 {
        self.canonical_labeling().1
    }

    /// Canonical form of the graph.
    pub fn canonical(&self) -> Self {
        let (order, _) = self.canonical_labeling();
        let mut perm = vec![0; self.n];
        for (k, &v) in order.iter().enumerate() {
            perm[v] = k;
        }
        self.relabeled(&perm)
    }

    /// Returns `(order, code)` where `order[k]` is the vertex placed at
    /// position `k` of the canonical form.
    pub fn canonical_labeling(&self) -> (Vec<usize>, u128) {
        let mut cells: Vec<Vec<usize>> = vec![(0..self.n).collect()];
        refine(self, &mut cells);
        let mut best: Option<(u128, Vec<usize>)> = None;
        search_canonical(self, cells, &mut best);
        let (code, order) = best.expect("at least one leaf");
        (order, code)
    }

    /// Sorted degree sequence, an isomorphism invariant.
    pub fn degree_sequence(&self) -> Vec<u32> {
        let mut d: Vec<u32> = (0..self.n).map(|i| self.degree(i)).collect();
        d.sort_unstable();
        d
    }
}

impl fmt::Debug for ContactGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContactGraph(n={}, {})", self.n, self)
    }
}

impl fmt::Display for ContactGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.bonds().iter().map(|b| b.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Splits cells by the number of neighbours in each other cell until stable.
/// Cell order is deterministic given the input, so refinement commutes with
/// relabeling.
fn refine(g: &ContactGraph, cells: &mut Vec<Vec<usize>>) {
    loop {
        let mut changed = false;
        let masks: Vec<u16> = cells
            .iter()
            .map(|c| c.iter().fold(0u16, |m, &v| m | 1 << v))
            .collect();
        let mut next: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
        for cell in cells.iter() {
            if cell.len() == 1 {
                next.push(cell.clone());
                continue;
            }
            let mut keyed: Vec<(Vec<u32>, usize)> = cell
                .iter()
                .map(|&v| (masks.iter().map(|&m| (g.row(v) & m).count_ones()).collect(), v))
                .collect();
            keyed.sort();
            let mut start = 0;
            for k in 1..=keyed.len() {
                if k == keyed.len() || keyed[k].0 != keyed[start].0 {
                    next.push(keyed[start..k].iter().map(|(_, v)| *v).collect());
                    start = k;
                }
            }
            if next.len() > masks.len() {
                changed = true;
            }
        }
        *cells = next;
        if !changed {
            return;
        }
    }
}

fn search_canonical(g: &ContactGraph, cells: Vec<Vec<usize>>, best: &mut Option<(u128, Vec<usize>)>) {
    let Some(target) = cells.iter().position(|c| c.len() > 1) else {
        let order: Vec<usize> = cells.iter().map(|c| c[0]).collect();
        let code = g.code_for(&order);
        if best.as_ref().map_or(true, |(b, _)| code < *b) {
            *best = Some((code, order));
        }
        return;
    };
    for &v in &cells[target] {
        let mut branch = Vec::with_capacity(cells.len() + 1);
        branch.extend_from_slice(&cells[..target]);
        branch.push(vec![v]);
        branch.push(cells[target].iter().copied().filter(|&w| w != v).collect());
        branch.extend_from_slice(&cells[target + 1..]);
        refine(g, &mut branch);
        search_canonical(g, branch, best);
    }
}

/// Lexicographically least permutation `p` with `a.has_edge(i,j) == b.has_edge(p[i],p[j])`.
pub fn isomorphism(a: &ContactGraph, b: &ContactGraph) -> Option<Vec<usize>> {
    if a.n != b.n || a.edge_count() != b.edge_count() || a.degree_sequence() != b.degree_sequence() {
        return None;
    }
    let mut perm = Vec::with_capacity(a.n);
    let mut first = None;
    extend_maps(a, b, &mut perm, 0, &mut |p| {
        first = Some(p.to_vec());
        false
    });
    first
}

/// All automorphisms of `g` in lexicographic order.
pub fn automorphisms(g: &ContactGraph) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm = Vec::with_capacity(g.n);
    extend_maps(g, g, &mut perm, 0, &mut |p| {
        out.push(p.to_vec());
        true
    });
    out
}

/// Depth-first extension of a partial vertex map; `visit` returns whether to continue.
fn extend_maps(
    a: &ContactGraph,
    b: &ContactGraph,
    perm: &mut Vec<usize>,
    used: u16,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    let i = perm.len();
    if i == a.n {
        return visit(perm);
    }
    for t in 0..b.n {
        if used >> t & 1 == 1 || a.degree(i) != b.degree(t) {
            continue;
        }
        let consistent = perm
            .iter()
            .enumerate()
            .all(|(k, &pk)| a.has_edge(i, k) == b.has_edge(t, pk));
        if !consistent {
            continue;
        }
        perm.push(t);
        let go_on = extend_maps(a, b, perm, used | 1 << t, visit);
        perm.pop();
        if !go_on {
            return false;
        }
    }
    true
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn octahedron_graph() -> ContactGraph {
        // K_{2,2,2}: antipodal pairs (0,1), (2,3), (4,5) are the non-edges.
        let mut g = ContactGraph::empty(6);
        for i in 0..6 {
            for j in i + 1..6 {
                if j != i + 1 || i % 2 == 1 {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }

    pub(crate) fn polytetrahedron_graph() -> ContactGraph {
        // Three tetrahedra glued face to face: 0-1-2-3, 1-2-3-4, 2-3-4-5 style chain.
        let mut g = ContactGraph::empty(6);
        for &(i, j) in &[
            (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3),
            (1, 4), (2, 4), (3, 4),
            (1, 5), (2, 5), (4, 5),
        ] {
            g.add_edge(i, j);
        }
        g
    }

    fn brute_force_isomorphic(a: &ContactGraph, b: &ContactGraph) -> bool {
        fn permute(k: usize, p: &mut Vec<usize>, a: &ContactGraph, b: &ContactGraph) -> bool {
            if k == p.len() {
                return a.relabeled(p) == *b;
            }
            for s in k..p.len() {
                p.swap(k, s);
                if permute(k + 1, p, a, b) {
                    return true;
                }
                p.swap(k, s);
            }
            false
        }
        let mut p: Vec<usize> = (0..a.n()).collect();
        permute(0, &mut p, a, b)
    }

    #[test]
    fn octahedron_shape() {
        let g = octahedron_graph();
        assert_eq!(g.edge_count(), 12);
        assert!((0..6).all(|i| g.degree(i) == 4));
        assert!(!g.has_edge(0, 1) && !g.has_edge(2, 3) && !g.has_edge(4, 5));
    }

    #[test]
    fn self_isomorphism_is_identity() {
        let g = polytetrahedron_graph();
        assert_eq!(isomorphism(&g, &g), Some((0..6).collect()));
    }

    #[test]
    fn relabeled_graphs_are_isomorphic() {
        let g = octahedron_graph();
        let perm = [3, 5, 0, 4, 1, 2];
        let h = g.relabeled(&perm);
        let p = isomorphism(&g, &h).expect("isomorphic");
        assert_eq!(g.relabeled(&p), h);
        assert_eq!(g.canonical_code(), h.canonical_code());
        let back = isomorphism(&h, &g).expect("symmetric");
        assert_eq!(h.relabeled(&back), g);
    }

    #[test]
    fn octahedron_and_polytetrahedron_differ() {
        let a = polytetrahedron_graph();
        let b = octahedron_graph();
        assert!(isomorphism(&a, &b).is_none());
        assert!(!brute_force_isomorphic(&a, &b));
        assert_ne!(a.canonical_code(), b.canonical_code());
    }

    #[test]
    fn automorphism_counts() {
        assert_eq!(automorphisms(&octahedron_graph()).len(), 48);
        let mut k4 = ContactGraph::empty(4);
        for i in 0..4 {
            for j in i + 1..4 {
                k4.add_edge(i, j);
            }
        }
        assert_eq!(automorphisms(&k4).len(), 24);
        assert_eq!(automorphisms(&polytetrahedron_graph()).len(), 4);
    }

    #[test]
    fn canonical_code_matches_brute_force_on_small_graphs() {
        // every graph on 5 vertices, compared pairwise through both routes
        let pairs: Vec<(usize, usize)> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        let graphs: Vec<ContactGraph> = (0u32..1 << pairs.len())
            .step_by(7)
            .map(|mask| {
                let mut g = ContactGraph::empty(5);
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    if mask >> k & 1 == 1 {
                        g.add_edge(i, j);
                    }
                }
                g
            })
            .collect();
        for a in graphs.iter().step_by(3) {
            for b in graphs.iter().step_by(5) {
                assert_eq!(
                    a.canonical_code() == b.canonical_code(),
                    brute_force_isomorphic(a, b),
                    "{a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn canonical_form_is_fixed_point() {
        let g = polytetrahedron_graph().relabeled(&[5, 2, 4, 0, 1, 3]);
        let c = g.canonical();
        assert_eq!(c.canonical(), c);
        assert_eq!(c, polytetrahedron_graph().canonical());
    }

    #[test]
    fn induced_edges_and_connectivity() {
        let g = octahedron_graph();
        assert_eq!(g.induced_edges(0b000111), 2);
        assert!(g.is_connected());
        assert!(!ContactGraph::empty(3).is_connected());
    }
}
