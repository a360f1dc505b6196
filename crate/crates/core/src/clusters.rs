//! Rigid clusters: realization of contact graphs, rigidity, symmetry and
//! multiplicity, and the per-`n` catalog of rigid modes.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{
    self, bond_excess, internal_tangents, newton_project, superpose, Bond, Configuration,
    ConstraintSet, PROJECTION_TOL,
};
use crate::graph::{automorphisms, ContactGraph};

/// Default number of random restarts before a graph is declared unrealizable.
pub const MAX_RESTARTS: usize = 200;

/// Superposition RMSD below which a permutation counts as a symmetry.
pub const SYMMETRY_RMSD: f64 = 1e-6;

/// Non-bonded pairs must stay at least this far beyond contact in a realization.
const CLEARANCE: f64 = 1e-6;

/// How particle-relabeling multiplicities are counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MultiplicityConvention {
    /// `n! / |G|` with `G` the full point group including improper operations.
    /// This reproduces the published per-mode numbers.
    #[default]
    Table,
    /// `C_0 n! / σ` with `σ` the proper-rotation count and `C_0 = 2` for chiral
    /// clusters. Exactly twice the table value for every cluster.
    PaperFormula,
}

/// Where a catalog came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum CatalogSource {
    File,
    Enumerated,
}

/// Symmetry data of a realized cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Symmetry {
    /// Automorphisms realizable as proper rotations.
    pub sigma: usize,
    /// Automorphisms realizable as improper isometries.
    pub improper: usize,
    /// True when no automorphism is realizable as an improper isometry.
    pub chiral: bool,
}

impl Symmetry {
    pub fn group_order(&self) -> usize {
        self.sigma + self.improper
    }
}

/// A realized rigid cluster.
#[derive(Clone, Debug)]
pub struct RigidMode {
    pub id: usize,
    pub graph: ContactGraph,
    pub representative: Configuration,
    pub symmetry: Symmetry,
    /// Multiplicity in the table convention.
    pub multiplicity: u64,
    pub h: f64,
    pub inertia: f64,
}

impl RigidMode {
    /// Builds the mode data from a realized configuration of `graph`.
    pub fn from_realization(id: usize, graph: ContactGraph, x: Configuration) -> Result<Self> {
        let alpha = graph.constraints();
        let symmetry = symmetry_number(&graph, &x);
        let h = geom::vibrational_factor(&x, &alpha)?;
        let inertia = geom::rotational_factor(&x)?;
        let mut mode = Self {
            id,
            graph,
            representative: x,
            symmetry,
            multiplicity: 0,
            h,
            inertia,
        };
        mode.multiplicity = rigid_multiplicity(&mode, MultiplicityConvention::Table)?;
        Ok(mode)
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn sigma(&self) -> usize {
        self.symmetry.sigma
    }

    pub fn chiral(&self) -> bool {
        self.symmetry.chiral
    }

    pub fn constraints(&self) -> ConstraintSet {
        self.graph.constraints()
    }

    /// Geometric partition function of the mode class, `n_α h I`.
    pub fn z(&self) -> f64 {
        self.multiplicity as f64 * self.h * self.inertia
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Multiplicity of a rigid mode in the requested convention.
pub fn rigid_multiplicity(mode: &RigidMode, convention: MultiplicityConvention) -> Result<u64> {
    let n_fact = factorial(mode.n());
    let (num, den) = match convention {
        MultiplicityConvention::Table => (n_fact, mode.symmetry.group_order() as u64),
        MultiplicityConvention::PaperFormula => {
            let c0 = if mode.symmetry.chiral { 2 } else { 1 };
            (c0 * n_fact, mode.symmetry.sigma as u64)
        }
    };
    if den == 0 || num % den != 0 {
        return Err(Error::NonIntegerMultiplicity(num as f64 / den.max(1) as f64));
    }
    Ok(num / den)
}

/// True when the constraint manifold of `graph` has no internal tangent at `x`.
pub fn is_rigid(x: &Configuration, graph: &ContactGraph) -> bool {
    matches!(internal_tangents(x, &graph.constraints()), Ok(t) if t.is_empty())
}

/// Counts automorphisms of `graph` realizable as proper and improper isometries of `x`.
pub fn symmetry_number(graph: &ContactGraph, x: &Configuration) -> Symmetry {
    let mut sigma = 0;
    let mut improper = 0;
    for p in automorphisms(graph) {
        let y = x.permuted(&p);
        if superpose(x, &y, true).1 < SYMMETRY_RMSD {
            sigma += 1;
        }
        if superpose(x, &y, false).1 < SYMMETRY_RMSD {
            improper += 1;
        }
    }
    Symmetry {
        sigma,
        improper,
        chiral: improper == 0,
    }
}

/// True when `a` and `b` realize the same graph as congruent clusters
/// (mirror images count as congruent).
pub fn same_realization(graph: &ContactGraph, a: &Configuration, b: &Configuration) -> bool {
    automorphisms(graph)
        .iter()
        .any(|p| {
            let y = b.permuted(p);
            superpose(a, &y, true).1 < SYMMETRY_RMSD || superpose(a, &y, false).1 < SYMMETRY_RMSD
        })
}

/// Finds a configuration with every bond of `graph` at unit length and
/// every other pair strictly apart.
pub fn realize(graph: &ContactGraph, seed: u64) -> Result<Configuration> {
    realize_with(graph, seed, MAX_RESTARTS)
}

pub fn realize_with(graph: &ContactGraph, seed: u64, max_restarts: usize) -> Result<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_restarts {
        if let Some(x) = attempt_realization(graph, &mut rng) {
            return Ok(x);
        }
    }
    Err(Error::Unrealizable(max_restarts))
}

/// Distinct (non-congruent) realizations found over `attempts` random starts.
pub fn realize_all(graph: &ContactGraph, seed: u64, attempts: usize) -> Vec<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<Configuration> = Vec::new();
    for _ in 0..attempts {
        if let Some(x) = attempt_realization(graph, &mut rng) {
            if !found.iter().any(|y| same_realization(graph, y, &x)) {
                found.push(x);
            }
        }
    }
    found
}

fn attempt_realization(graph: &ContactGraph, rng: &mut ChaCha8Rng) -> Option<Configuration> {
    let n = graph.n();
    let side = 0.8 * (n as f64).cbrt();
    let coords: Vec<f64> = (0..3 * n).map(|_| side * (rng.random::<f64>() - 0.5)).collect();
    let x = Configuration::new(coords).ok()?;
    let x = levenberg_marquardt(graph, x)?;
    let alpha = graph.constraints();
    let x = newton_project(&x, &alpha, PROJECTION_TOL).ok()?;
    if alpha.max_residual(&x) > 1e-10 {
        return None;
    }
    let clear = x.min_free_excess(&alpha).map_or(true, |(_, y)| y > CLEARANCE);
    clear.then_some(x)
}

/// Least squares on bond excesses plus a one-sided overlap penalty.
fn levenberg_marquardt(graph: &ContactGraph, mut x: Configuration) -> Option<Configuration> {
    let n = graph.n();
    let dim = 3 * n;
    let pairs: Vec<(Bond, bool)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| Bond { i, j }))
        .map(|b| (b, graph.has_edge(b.i, b.j)))
        .collect();
    let eval = |x: &Configuration| -> (DVector<f64>, DMatrix<f64>) {
        let mut r = DVector::zeros(pairs.len());
        let mut jac = DMatrix::zeros(pairs.len(), dim);
        for (k, &(b, bonded)) in pairs.iter().enumerate() {
            let y = bond_excess(x, b);
            // Non-bonded pairs are kept a little beyond contact.
            let y = if bonded { y } else { (y - 0.05).min(0.0) };
            if y == 0.0 {
                continue;
            }
            r[k] = y;
            let d = x.point(b.j) - x.point(b.i);
            let u = d / d.norm().max(1e-12);
            for c in 0..3 {
                jac[(k, 3 * b.i + c)] = -u[c];
                jac[(k, 3 * b.j + c)] = u[c];
            }
        }
        (r, jac)
    };
    let (mut r, mut jac) = eval(&x);
    let mut cost = r.norm_squared();
    let mut mu = 1e-2;
    for _ in 0..300 {
        if cost < 1e-20 {
            break;
        }
        let jt = jac.transpose();
        let mut a = &jt * &jac;
        for k in 0..dim {
            a[(k, k)] += mu * (1.0 + a[(k, k)]);
        }
        let g = &jt * &r;
        let step = a.cholesky()?.solve(&(-g));
        let trial = x.displaced(&step, 1.0);
        let (r2, jac2) = eval(&trial);
        let c2 = r2.norm_squared();
        if c2 < cost {
            x = trial;
            r = r2;
            jac = jac2;
            let gain = cost - c2;
            cost = c2;
            mu = (mu / 3.0).max(1e-12);
            if gain < 1e-16 * cost.max(1e-300) && cost > 1e-8 {
                return None;
            }
        } else {
            mu *= 4.0;
            if mu > 1e8 {
                return None;
            }
        }
    }
    (cost < 1e-12).then_some(x.centered())
}

/// Immutable catalog of rigid modes for one particle count.
#[derive(Clone, Debug)]
pub struct ModeCatalog {
    pub n: usize,
    pub rigid: Vec<RigidMode>,
    pub source: CatalogSource,
    index: HashMap<u128, usize>,
}

impl ModeCatalog {
    /// Builds a catalog from realized modes. Ids are assigned in order of
    /// decreasing `n_α h I`, the equilibrium weight of each rigid mode.
    pub fn new(n: usize, mut rigid: Vec<RigidMode>, source: CatalogSource) -> Self {
        rigid.sort_by(|a, b| {
            b.z()
                .total_cmp(&a.z())
                .then(a.graph.canonical_code().cmp(&b.graph.canonical_code()))
        });
        let mut index = HashMap::new();
        for (k, mode) in rigid.iter_mut().enumerate() {
            mode.id = k + 1;
            index.insert(mode.graph.canonical_code(), k);
        }
        Self {
            n,
            rigid,
            source,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.rigid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rigid.is_empty()
    }

    pub fn by_id(&self, id: usize) -> Option<&RigidMode> {
        self.rigid.get(id.checked_sub(1)?)
    }

    /// Catalog entry isomorphic to `graph`.
    pub fn lookup(&self, graph: &ContactGraph) -> Option<&RigidMode> {
        self.index.get(&graph.canonical_code()).map(|&k| &self.rigid[k])
    }

    /// Sum of `n_α h I` over all rigid modes.
    pub fn z0(&self) -> f64 {
        self.rigid.iter().map(RigidMode::z).sum()
    }

    /// Adjacency-list text, one mode per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for m in &self.rigid {
            let _ = writeln!(out, "n={} id={} bonds={}", self.n, m.id, m.graph);
        }
        out
    }
}

/// Parses adjacency-list text: `n=<n> id=<k> bonds=i-j,i-j,...` per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_catalog(text: &str) -> Result<Vec<(usize, usize, ContactGraph)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::Parse {
            line: lineno + 1,
            msg: msg.to_string(),
        };
        let mut n = None;
        let mut id = None;
        let mut bonds = None;
        for field in line.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| err("expected key=value"))?;
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(|_| err("bad n"))?),
                "id" => id = Some(value.parse::<usize>().map_err(|_| err("bad id"))?),
                "bonds" => {
                    let mut list = Vec::new();
                    for pair in value.split(',').filter(|s| !s.is_empty()) {
                        let (a, b) = pair.split_once('-').ok_or_else(|| err("bad bond"))?;
                        let a = a.parse().map_err(|_| err("bad bond index"))?;
                        let b = b.parse().map_err(|_| err("bad bond index"))?;
                        list.push(Bond::new(a, b).map_err(|_| err("self bond"))?);
                    }
                    bonds = Some(list);
                }
                _ => return Err(err("unknown key")),
            }
        }
        let n = n.ok_or_else(|| err("missing n"))?;
        if n > crate::graph::MAX_VERTICES {
            return Err(err("n too large"));
        }
        let id = id.ok_or_else(|| err("missing id"))?;
        let bonds = bonds.ok_or_else(|| err("missing bonds"))?;
        let graph = ContactGraph::from_bonds(n, &bonds).map_err(|_| err("bond index out of range"))?;
        out.push((n, id, graph));
    }
    Ok(out)
}

/// Realizes every graph in adjacency-list text and builds the catalog.
pub fn catalog_from_text(n: usize, text: &str) -> Result<ModeCatalog> {
    let entries = parse_catalog(text)?;
    let modes = entries
        .into_par_iter()
        .filter(|(m, _, _)| *m == n)
        .map(|(_, id, graph)| {
            let x = realize(&graph, id as u64)?;
            RigidMode::from_realization(id, graph, x)
        })
        .collect::<Result<Vec<_>>>()?;
    if modes.is_empty() {
        return Err(Error::Missing(format!("catalog has no entries for n={n}")));
    }
    Ok(ModeCatalog::new(n, modes, CatalogSource::File))
}

/// Loads a catalog file.
pub fn load_catalog(path: &Path, n: usize) -> Result<ModeCatalog> {
    let text = std::fs::read_to_string(path)?;
    catalog_from_text(n, &text)
}

/// Adjacency lists shipped with the crate for `n = 5..=8`.
pub fn shipped_catalog_text(n: usize) -> Option<&'static str> {
    match n {
        5 => Some(include_str!("../data/rigid_n5.txt")),
        6 => Some(include_str!("../data/rigid_n6.txt")),
        7 => Some(include_str!("../data/rigid_n7.txt")),
        8 => Some(include_str!("../data/rigid_n8.txt")),
        _ => None,
    }
}

/// The shipped catalog for `n`.
pub fn shipped_catalog(n: usize) -> Result<ModeCatalog> {
    let text = shipped_catalog_text(n).ok_or_else(|| Error::Missing(format!("no shipped catalog for n={n}")))?;
    catalog_from_text(n, text)
}

/// Graphs with `3n - 6` edges that pass the combinatorial necessary
/// conditions for a rigid sphere packing: connected, minimum degree 3, and
/// every vertex subset of size `k ≥ 2` spans at most `3k - 6` edges
/// (`k = 2`: one edge). Returned up to isomorphism, in canonical form.
pub fn candidate_graphs(n: usize) -> Vec<ContactGraph> {
    let target = 3 * n - 6;
    let mut level: Vec<ContactGraph> = vec![ContactGraph::empty(n)];
    for edges in 0..target {
        let remaining = target - edges - 1;
        let mut seen: HashSet<u128> = HashSet::new();
        let mut next = Vec::new();
        for g in &level {
            for i in 0..n {
                for j in i + 1..n {
                    if g.has_edge(i, j) {
                        continue;
                    }
                    let mut h = g.clone();
                    h.add_edge(i, j);
                    let deficit: u32 = (0..n).map(|v| 3u32.saturating_sub(h.degree(v))).sum();
                    if deficit as usize > 2 * remaining || !sparse_around(&h, i, j) {
                        continue;
                    }
                    let canon = h.canonical();
                    if seen.insert(canon.canonical_code()) {
                        next.push(canon);
                    }
                }
            }
        }
        level = next;
    }
    level
        .into_iter()
        .filter(|g| g.is_connected() && (0..n).all(|v| g.degree(v) >= 3))
        .collect()
}

/// Checks the subset edge bound for every subset containing the new edge `i-j`.
fn sparse_around(g: &ContactGraph, i: usize, j: usize) -> bool {
    let n = g.n();
    let others: Vec<usize> = (0..n).filter(|&v| v != i && v != j).collect();
    let base: u16 = 1 << i | 1 << j;
    for mask in 0u32..1 << others.len() {
        let mut set = base;
        for (k, &v) in others.iter().enumerate() {
            if mask >> k & 1 == 1 {
                set |= 1 << v;
            }
        }
        let k = set.count_ones() as usize;
        let bound = if k == 2 { 1 } else { 3 * k - 6 };
        if g.induced_edges(set) as usize > bound {
            return false;
        }
    }
    true
}

/// Enumerates rigid clusters from scratch: every candidate graph is
/// realized from random starts, rigidity is checked, and distinct
/// realizations are kept.
pub fn enumerate_catalog(n: usize, restarts: usize) -> Result<ModeCatalog> {
    let candidates = candidate_graphs(n);
    log::info!("n={n}: {} candidate graphs", candidates.len());
    let found: Vec<Vec<(ContactGraph, Configuration)>> = candidates
        .par_iter()
        .enumerate()
        .map(|(k, g)| {
            realize_all(g, k as u64, restarts)
                .into_iter()
                .filter(|x| is_rigid(x, g))
                .map(|x| (g.clone(), x))
                .collect()
        })
        .collect();
    let modes = found
        .into_iter()
        .flatten()
        .map(|(g, x)| RigidMode::from_realization(0, g, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeCatalog::new(n, modes, CatalogSource::Enumerated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{octahedron_graph, polytetrahedron_graph};
    use crate::graph::isomorphism;

    fn complete(n: usize) -> ContactGraph {
        let mut g = ContactGraph::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j);
            }
        }
        g
    }

    #[test]
    fn tetrahedron_realization_and_symmetry() {
        let g = complete(4);
        let x = realize(&g, 1).unwrap();
        for b in g.bonds() {
            assert!(bond_excess(&x, b).abs() < 1e-10);
        }
        assert!(is_rigid(&x, &g));
        let s = symmetry_number(&g, &x);
        assert_eq!((s.sigma, s.chiral, s.group_order()), (12, false, 24));
    }

    #[test]
    fn octahedron_mode() {
        let g = octahedron_graph();
        let x = realize(&g, 3).unwrap();
        let mode = RigidMode::from_realization(2, g, x).unwrap();
        assert_eq!(mode.sigma(), 24);
        assert!(!mode.chiral());
        assert_eq!(mode.multiplicity, 15);
        assert_eq!(rigid_multiplicity(&mode, MultiplicityConvention::PaperFormula).unwrap(), 30);
        assert!((mode.inertia - 2.83).abs() < 0.01);
        assert!((mode.h - 0.034).abs() < 0.001);
    }

    #[test]
    fn polytetrahedron_mode() {
        let g = polytetrahedron_graph();
        let x = realize(&g, 5).unwrap();
        let mode = RigidMode::from_realization(1, g, x).unwrap();
        assert_eq!((mode.sigma(), mode.chiral()), (2, false));
        assert_eq!(mode.multiplicity, 180);
        assert!((mode.inertia - 3.16).abs() < 0.01);
        assert!((mode.h - 0.061).abs() < 0.001);
    }

    #[test]
    fn flexible_graphs_are_not_rigid() {
        let g = octahedron_graph();
        let x = realize(&g, 3).unwrap();
        let mut minus = g.clone();
        minus.remove_edge(0, 2);
        assert!(!is_rigid(&x, &minus));
        let mut square = ContactGraph::empty(4);
        for (i, j) in [(0, 1), (1, 2), (2, 3), (0, 3)] {
            square.add_edge(i, j);
        }
        let x = Configuration::from_points(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.2], [0.0, 1.0, 0.0]]);
        assert!(!is_rigid(&x, &square));
    }

    #[test]
    fn k5_is_unrealizable() {
        assert!(matches!(realize_with(&complete(5), 0, 10), Err(Error::Unrealizable(10))));
    }

    #[test]
    fn catalog_text_round_trip() {
        let text = "# comment\nn=6 id=7 bonds=0-1,0-2\n\nn=6 id=8 bonds=2-3\n";
        let parsed = parse_catalog(text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].2.edge_count(), 2);
        assert!(matches!(parse_catalog("n=6 bonds=0-0"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_catalog("n=4 id=1 bonds=0-9").is_err());
        assert!(parse_catalog("n=4 id=1").is_err());
    }

    #[test]
    fn candidate_counts_small() {
        assert_eq!(candidate_graphs(4).len(), 1);
        assert_eq!(candidate_graphs(5).len(), 1);
    }

    #[test]
    fn lookup_finds_relabeled_graph() {
        let cat = shipped_catalog(6).unwrap();
        let relabeled = octahedron_graph().relabeled(&[4, 0, 5, 1, 3, 2]);
        let m = cat.lookup(&relabeled).unwrap();
        assert!(isomorphism(&m.graph, &relabeled).is_some());
        assert_eq!(m.id, 2);
        assert_eq!(cat.by_id(1).unwrap().multiplicity, 180);
    }
}
