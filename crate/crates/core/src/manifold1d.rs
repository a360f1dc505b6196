//! One-dimensional floppy modes: breaking one bond of a rigid cluster leaves
//! a curve of configurations that ends when a new bond forms.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::clusters::{ModeCatalog, RigidMode};
use crate::error::{Error, Result};
use crate::geom::{
    self, bond_excess, constraint_jacobian, internal_tangents, newton_project, symmetric_length,
    Bond, Configuration, ConstraintSet, QuotientChart, PROJECTION_TOL,
};
use crate::graph::ContactGraph;

/// Arc-length step used for lines unless overridden.
pub const DEFAULT_DS: f64 = 0.01;

/// A bond is considered formed once its excess is below this in magnitude.
pub const FORMATION_TOL: f64 = 1e-10;

/// Two bonds forming within this excess of each other are reported as a tie.
pub const TIE_TOL: f64 = 1e-8;

/// Step halvings allowed when a projection fails.
const MAX_HALVINGS: u32 = 6;

/// One point on a traced manifold.
#[derive(Clone, Debug)]
pub struct Sample {
    pub x: Configuration,
    /// Quotient-metric arc length from the start of the walk.
    pub s: f64,
    pub h: f64,
    pub inertia: f64,
}

/// Raw result of walking along a one-dimensional constraint manifold.
#[derive(Clone, Debug)]
pub struct Walk {
    pub alpha: ConstraintSet,
    pub opened: Bond,
    pub samples: Vec<Sample>,
    /// The bond that formed at the far end.
    pub formed: Bond,
    /// Other pairs that reached contact at the same time as `formed`.
    pub ties: Vec<Bond>,
}

impl Walk {
    pub fn length(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.s)
    }

    pub fn end(&self) -> &Configuration {
        &self.samples.last().expect("walk has samples").x
    }

    /// Bonds at the far end: `alpha` plus the newly formed one.
    pub fn end_constraints(&self) -> ConstraintSet {
        self.alpha.with(self.formed)
    }
}

/// Tuning for line walks.
#[derive(Clone, Copy, Debug)]
pub struct WalkOptions {
    pub ds: f64,
    /// Walks longer than this are abandoned.
    pub max_length: f64,
}

impl Default for WalkOptions {
    fn default() -> Self {
        Self {
            ds: DEFAULT_DS,
            max_length: 20.0,
        }
    }
}

/// Unit tangent of the one-dimensional manifold of `alpha` at `x`.
fn line_tangent(x: &Configuration, alpha: &ConstraintSet) -> Result<DVector<f64>> {
    let basis = internal_tangents(x, alpha)?;
    match basis.dim() {
        1 => Ok(basis.vectors[0].clone()),
        found => Err(Error::Singular { expected: 1, found }),
    }
}

/// Gradient of the excess of `b` dotted with `v`.
fn opening_rate(x: &Configuration, b: Bond, v: &DVector<f64>) -> Result<f64> {
    let row = constraint_jacobian(x, &ConstraintSet::new(vec![b]))?;
    Ok(row.row(0).transpose().dot(v))
}

fn sample_at(x: Configuration, s: f64, alpha: &ConstraintSet) -> Result<Sample> {
    let h = geom::vibrational_factor(&x, alpha)?;
    let inertia = geom::rotational_factor(&x)?;
    Ok(Sample { x, s, h, inertia })
}

/// Walks the manifold of `alpha` from `start`, moving in the direction that
/// lengthens `opened`, until some pair outside `alpha` comes into contact.
///
/// `start` must satisfy `alpha` and have `opened` at (or near) contact. Arc
/// length is accumulated in the quotient metric.
pub fn walk_line(start: &Configuration, alpha: &ConstraintSet, opened: Bond, opts: WalkOptions) -> Result<Walk> {
    let mut x = newton_project(start, alpha, PROJECTION_TOL)?;
    let mut v = line_tangent(&x, alpha)?;
    if opening_rate(&x, opened, &v)? < 0.0 {
        v = -v;
    }
    let start_embedding = x.bond_distances();
    let mut chart = QuotientChart::at(&x)?;
    let mut samples = vec![sample_at(x.clone(), 0.0, alpha)?];
    let mut s = 0.0;
    loop {
        let (next, t) = advance(&x, &v, alpha, opts.ds)?;
        let crossing = first_crossing(&x, &v, &next, t, alpha)?;
        let (next, formed) = match crossing {
            Some((t_hit, bond)) => {
                let hit = newton_project(&x.displaced(&v, t_hit), alpha, PROJECTION_TOL)?;
                let hit = newton_project(&hit, &alpha.with(bond), PROJECTION_TOL)?;
                (hit, Some(bond))
            }
            None => (next, None),
        };
        let next_chart = QuotientChart::at(&next)?;
        s += symmetric_length(&chart, &next_chart);
        if let Some(bond) = formed {
            let ties = tied_pairs(&next, &alpha.with(bond));
            if !ties.is_empty() {
                log::warn!("bond {bond} formed together with {:?}", ties);
            }
            samples.push(sample_at(next, s, alpha)?);
            return Ok(Walk {
                alpha: alpha.clone(),
                opened,
                samples,
                formed: bond,
                ties,
            });
        }
        if s > 4.0 * opts.ds && next.bond_distances().distance(&start_embedding) < 0.5 * opts.ds {
            return Err(Error::ClosedLine);
        }
        if s > opts.max_length {
            return Err(Error::Trace(format!("no bond formed within length {}", opts.max_length)));
        }
        let mut w = line_tangent(&next, alpha)?;
        if w.dot(&v) < 0.0 {
            w = -w;
        }
        samples.push(sample_at(next.clone(), s, alpha)?);
        x = next;
        v = w;
        chart = next_chart;
    }
}

/// Predictor–corrector step, halving the step on projection failure.
fn advance(x: &Configuration, v: &DVector<f64>, alpha: &ConstraintSet, ds: f64) -> Result<(Configuration, f64)> {
    let mut t = ds;
    for _ in 0..=MAX_HALVINGS {
        match newton_project(&x.displaced(v, t), alpha, PROJECTION_TOL) {
            Ok(next) => return Ok((next, t)),
            Err(Error::ProjectionFailed { .. }) => t *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Trace(format!("projection failed even at step {t:.2e}")))
}

/// Finds the earliest bond formation between `x` (parameter 0) and `next`
/// (parameter `t`), refining each candidate pair by bisection.
fn first_crossing(
    x: &Configuration,
    v: &DVector<f64>,
    next: &Configuration,
    t: f64,
    alpha: &ConstraintSet,
) -> Result<Option<(f64, Bond)>> {
    let n = x.n();
    let mut best: Option<(f64, Bond)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let b = Bond { i, j };
            if alpha.contains(b) || bond_excess(next, b) >= 0.0 {
                continue;
            }
            let root = bisect_contact(x, v, alpha, b, t)?;
            if best.map_or(true, |(tb, _)| root < tb) {
                best = Some((root, b));
            }
        }
    }
    Ok(best)
}

fn bisect_contact(x: &Configuration, v: &DVector<f64>, alpha: &ConstraintSet, b: Bond, t: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, t);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let y = bond_excess(&newton_project(&x.displaced(v, mid), alpha, PROJECTION_TOL)?, b);
        if y.abs() < FORMATION_TOL || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if y > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn tied_pairs(x: &Configuration, bonds: &ConstraintSet) -> Vec<Bond> {
    let n = x.n();
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| Bond { i, j }))
        .filter(|&b| !bonds.contains(b) && bond_excess(x, b).abs() < TIE_TOL)
        .collect()
}

/// Rigid cluster reached at the end of a walk.
pub fn identify_endpoint(walk: &Walk, catalog: &ModeCatalog) -> Result<usize> {
    let bonds = walk.end_constraints();
    let x = walk.end();
    let tangents = internal_tangents(x, &bonds)?;
    if !tangents.is_empty() {
        return Err(Error::Singular {
            expected: 0,
            found: tangents.dim(),
        });
    }
    let graph = ContactGraph::from_constraints(x.n(), &bonds)?;
    catalog
        .lookup(&graph)
        .map(|m| m.id)
        .ok_or(Error::UnknownEndpoint)
}

/// Trapezoid rule for `∫ h I ds` and `∫ (h I)^{-1} ds` over a sample chain.
pub fn line_integrals(samples: &[Sample]) -> (f64, f64) {
    let mut zeta = 0.0;
    let mut q = 0.0;
    for w in samples.windows(2) {
        let ds = w[1].s - w[0].s;
        let (f0, f1) = (w[0].h * w[0].inertia, w[1].h * w[1].inertia);
        zeta += 0.5 * ds * (f0 + f1);
        q += 0.5 * ds * (1.0 / f0 + 1.0 / f1);
    }
    (zeta, q)
}

fn trapezoid(samples: &[Sample], f: impl Fn(&Sample) -> f64) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (w[1].s - w[0].s) * (f(&w[0]) + f(&w[1])))
        .sum()
}

/// A deduplicated one-dimensional mode.
#[derive(Clone, Debug)]
pub struct LineManifold {
    pub id: usize,
    pub alpha: ConstraintSet,
    pub samples: Vec<Sample>,
    /// Rigid mode ids at `s = 0` and `s = length`.
    pub endpoints: (usize, usize),
    pub length: f64,
    pub zeta: f64,
    pub q: f64,
    /// Multiplicity in the table convention.
    pub multiplicity: u64,
    /// Canonical code of the constraint graph.
    pub code: u128,
}

impl LineManifold {
    fn from_walk(walk: Walk, start: usize, end: usize) -> Result<Self> {
        let (zeta, q) = line_integrals(&walk.samples);
        let code = ContactGraph::from_constraints(walk.end().n(), &walk.alpha)?.canonical_code();
        Ok(Self {
            id: 0,
            alpha: walk.alpha,
            length: walk.samples.last().map_or(0.0, |s| s.s),
            samples: walk.samples,
            endpoints: (start, end),
            zeta,
            q,
            multiplicity: 0,
            code,
        })
    }

    /// `n_α ζ_α`.
    pub fn z(&self) -> f64 {
        self.multiplicity as f64 * self.zeta
    }

    pub fn mean_h(&self) -> f64 {
        trapezoid(&self.samples, |s| s.h) / self.length
    }

    pub fn mean_inertia(&self) -> f64 {
        trapezoid(&self.samples, |s| s.inertia) / self.length
    }

    pub fn is_self_line(&self) -> bool {
        self.endpoints.0 == self.endpoints.1
    }

    /// Key used for classing traces: constraint graph and unordered endpoint types.
    pub fn class_key(&self) -> (u128, usize, usize) {
        let (a, b) = self.endpoints;
        (self.code, a.min(b), a.max(b))
    }
}

/// Breaks `broken` in `mode` and follows the resulting line to its far end.
pub fn trace_line(mode: &RigidMode, broken: Bond, opts: WalkOptions, catalog: &ModeCatalog) -> Result<LineManifold> {
    let alpha = mode.constraints().without(broken);
    let walk = walk_line(&mode.representative, &alpha, broken, opts)?;
    let end = identify_endpoint(&walk, catalog)?;
    LineManifold::from_walk(walk, mode.id, end)
}

/// Which line class each bond of each rigid mode leads to.
#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub mode: usize,
    pub bond: Bond,
    pub line: usize,
}

/// All one-dimensional modes of a particle count.
#[derive(Clone, Debug)]
pub struct LineCatalog {
    pub n: usize,
    pub lines: Vec<LineManifold>,
    pub traces: Vec<TraceRecord>,
    /// `nu[(rigid id, line id)]`: bonds of one copy of the rigid mode leading to the line class.
    pub nu: BTreeMap<(usize, usize), usize>,
}

impl LineCatalog {
    pub fn by_id(&self, id: usize) -> Option<&LineManifold> {
        self.lines.iter().find(|l| l.id == id)
    }

    pub fn nu(&self, rigid: usize, line: usize) -> usize {
        self.nu.get(&(rigid, line)).copied().unwrap_or(0)
    }

    pub fn z1(&self) -> f64 {
        self.lines.iter().map(LineManifold::z).sum()
    }

    /// Line class whose constraint graph is isomorphic to `graph`, if any.
    pub fn lookup(&self, graph: &ContactGraph) -> Option<&LineManifold> {
        let code = graph.canonical_code();
        self.lines.iter().find(|l| l.code == code)
    }
}

/// `Σ_i n_i ν_i / n_c`, the multiplicity of a floppy class from the corner
/// tallies. `tallies` lists `(n_i, ν_i)` per corner type.
pub fn floppy_multiplicity(tallies: &[(u64, usize)], corners: usize) -> Result<u64> {
    let total: u64 = tallies.iter().map(|&(m, nu)| m * nu as u64).sum();
    if corners == 0 || total % corners as u64 != 0 {
        return Err(Error::NonIntegerMultiplicity(total as f64 / corners.max(1) as f64));
    }
    Ok(total / corners as u64)
}

/// Groups traced lines into classes and tallies the connectivity counts.
pub fn dedupe_lines(
    n: usize,
    traced: Vec<(usize, Bond, LineManifold)>,
    catalog: &ModeCatalog,
    first_id: usize,
) -> Result<LineCatalog> {
    let mut classes: BTreeMap<(u128, usize, usize), Vec<(usize, Bond, LineManifold)>> = BTreeMap::new();
    for item in traced {
        classes.entry(item.2.class_key()).or_default().push(item);
    }
    let mut lines = Vec::new();
    let mut traces = Vec::new();
    let mut nu = BTreeMap::new();
    for (k, (_, members)) in classes.into_iter().enumerate() {
        let id = first_id + k;
        let mut per_mode: BTreeMap<usize, usize> = BTreeMap::new();
        for (mode, bond, _) in &members {
            *per_mode.entry(*mode).or_default() += 1;
            traces.push(TraceRecord {
                mode: *mode,
                bond: *bond,
                line: id,
            });
        }
        let tallies: Vec<(u64, usize)> = per_mode
            .iter()
            .map(|(&m, &count)| {
                nu.insert((m, id), count);
                (catalog.by_id(m).expect("mode id").multiplicity, count)
            })
            .collect();
        let mut line = members.into_iter().next().expect("non-empty class").2;
        line.id = id;
        line.multiplicity = floppy_multiplicity(&tallies, 2)?;
        lines.push(line);
    }
    Ok(LineCatalog { n, lines, traces, nu })
}

/// Traces every bond of every rigid mode and classes the results.
pub fn build_line_catalog(catalog: &ModeCatalog, opts: WalkOptions) -> Result<LineCatalog> {
    let jobs: Vec<(&RigidMode, Bond)> = catalog
        .rigid
        .iter()
        .flat_map(|m| m.graph.bonds().into_iter().map(move |b| (m, b)))
        .collect();
    let traced = jobs
        .par_iter()
        .map(|&(m, b)| trace_line(m, b, opts, catalog).map(|l| (m.id, b, l)))
        .collect::<Result<Vec<_>>>()?;
    dedupe_lines(catalog.n, traced, catalog, catalog.len() + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusters::shipped_catalog;

    #[test]
    fn trapezoid_on_constant_integrand() {
        let x = Configuration::from_points(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let samples: Vec<Sample> = (0..=10)
            .map(|k| Sample {
                x: x.clone(),
                s: 0.1 * k as f64,
                h: 0.5,
                inertia: 4.0,
            })
            .collect();
        let (zeta, q) = line_integrals(&samples);
        assert!((zeta - 2.0).abs() < 1e-12);
        assert!((q - 0.5).abs() < 1e-12);
    }

    #[test]
    fn multiplicity_examples() {
        assert_eq!(floppy_multiplicity(&[(180, 1), (15, 12)], 2).unwrap(), 180);
        assert_eq!(floppy_multiplicity(&[(180, 4)], 2).unwrap(), 360);
        assert!(floppy_multiplicity(&[(15, 1)], 2).is_err());
    }

    #[test]
    fn octahedron_bond_leads_to_polytetrahedron() {
        let cat = shipped_catalog(6).unwrap();
        let octa = cat.by_id(2).unwrap();
        let bond = octa.graph.bonds()[0];
        let line = trace_line(octa, bond, WalkOptions::default(), &cat).unwrap();
        assert_eq!(line.endpoints, (2, 1));
        assert_eq!(line.alpha.len(), 11);
        for w in line.samples.windows(2) {
            let ds = w[1].s - w[0].s;
            assert!(ds > 0.0 && ds < 1.5 * DEFAULT_DS);
        }
        for s in &line.samples {
            assert!(line.alpha.max_residual(&s.x) < 1e-10);
            assert!(s.x.min_free_excess(&line.alpha).unwrap().1 > -1e-9);
        }
    }
}
