//! Two-dimensional floppy modes.
//!
//! A face is reached by breaking two bonds of a rigid cluster. Its boundary
//! is a loop of one-dimensional modes joined at rigid corners. The interior
//! is sampled by walking inward from the boundary, mapped to a disk with a
//! convex-combination (Floater) parameterization, triangulated in the
//! plane, relaxed with spring forces measured in bond-distance space, and
//! finally integrated with piecewise-linear elements whose edge lengths are
//! measured in the quotient metric.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::clusters::{ModeCatalog, RigidMode};
use crate::error::{Error, Result};
use crate::geom::{
    self, bond_excess, constraint_jacobian, internal_tangents, newton_project, pair_jacobian,
    symmetric_length, Bond, Configuration, ConstraintSet, QuotientChart, QuotientPoint,
    PROJECTION_TOL,
};
use crate::graph::ContactGraph;
use crate::manifold1d::{floppy_multiplicity, identify_endpoint, walk_line, LineCatalog, Sample, WalkOptions};

/// Sampling step for faces.
pub const FACE_DS: f64 = 0.05;

/// Boundary loops longer than this are reported as a topology error.
pub const MAX_EDGES: usize = 12;

/// Triangles with smaller quotient area are left out of integrals.
pub const MIN_TRIANGLE_AREA: f64 = 1e-14;

/// Cleanup rounds in strict mode.
const POLISH_ROUNDS: usize = 8;

/// In strict mode, bad triangles with a side longer than this many `ds` get
/// a new point at that side's midpoint.
const LONG_EDGE: f64 = 2.0;

/// How corners are spread around the parameter circle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CornerAngles {
    /// Equal angles between consecutive corners.
    #[default]
    Uniform,
    /// Angles proportional to the quotient length of each boundary edge.
    ArcLength,
}

/// Meshing parameters.
#[derive(Clone, Copy, Debug)]
pub struct FaceOptions {
    pub ds: f64,
    /// Neighbours used in the convex-combination weights.
    pub neighbors: usize,
    pub dt: f64,
    /// Rest length of the springs relative to the mean edge length.
    pub pressure: f64,
    pub steps_per_retriangulation: usize,
    pub max_rounds: usize,
    /// Keep relaxing until the worst triangle reaches `min_quality`, then
    /// clean up the slivers that relaxation leaves behind.
    pub strict: bool,
    pub min_quality: f64,
    pub corner_angles: CornerAngles,
}

impl Default for FaceOptions {
    fn default() -> Self {
        Self {
            ds: FACE_DS,
            neighbors: 12,
            dt: 0.1,
            pressure: 1.2,
            steps_per_retriangulation: 3,
            max_rounds: 40,
            strict: false,
            min_quality: 0.2,
            corner_angles: CornerAngles::Uniform,
        }
    }
}

/// A rigid corner of a face boundary.
#[derive(Clone, Debug)]
pub struct Corner {
    pub mode: usize,
    /// The two bonds present at the corner but not on the face.
    pub extras: (Bond, Bond),
    pub x: Configuration,
}

/// One side of a face: a piece of a one-dimensional mode.
#[derive(Clone, Debug)]
pub struct BoundaryEdge {
    /// Extra bond held at contact along the edge.
    pub kept: Bond,
    /// Bond released at the edge's first corner.
    pub opened: Bond,
    /// Bond formed at the edge's last corner.
    pub formed: Bond,
    /// Matching class in the line catalog, when one was supplied.
    pub line: Option<usize>,
    pub samples: Vec<Sample>,
}

impl BoundaryEdge {
    pub fn length(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.s)
    }
}

/// Closed boundary loop; edge `k` runs from corner `k` to corner `k + 1`.
#[derive(Clone, Debug)]
pub struct Boundary {
    pub alpha: ConstraintSet,
    pub corners: Vec<Corner>,
    pub edges: Vec<BoundaryEdge>,
}

impl Boundary {
    pub fn corner_modes(&self) -> Vec<usize> {
        self.corners.iter().map(|c| c.mode).collect()
    }

    pub fn edge_lines(&self) -> Vec<Option<usize>> {
        self.edges.iter().map(|e| e.line).collect()
    }

    /// Smallest rotation or reflection of the cyclic corner sequence.
    pub fn corner_key(&self) -> Vec<usize> {
        canonical_cycle(&self.corner_modes())
    }
}

/// Lexicographically smallest rotation of `seq` or of its reverse.
pub fn canonical_cycle(seq: &[usize]) -> Vec<usize> {
    let n = seq.len();
    let mut best: Option<Vec<usize>> = None;
    for reversed in [false, true] {
        for r in 0..n {
            let cand: Vec<usize> = (0..n)
                .map(|k| if reversed { seq[(r + n - k) % n] } else { seq[(r + k) % n] })
                .collect();
            if best.as_ref().map_or(true, |b| cand < *b) {
                best = Some(cand);
            }
        }
    }
    best.unwrap_or_default()
}

/// Walks around the face of `alpha` starting from the rigid corner `start`
/// where the extra bonds `extras` are in contact. At each corner the older
/// extra bond is released and the newer one kept, until the loop returns
/// to the starting pair.
pub fn trace_boundary(
    start: &Configuration,
    alpha: &ConstraintSet,
    extras: (Bond, Bond),
    ds: f64,
    catalog: &ModeCatalog,
    lines: Option<&LineCatalog>,
) -> Result<Boundary> {
    let n = start.n();
    let opts = WalkOptions { ds, ..WalkOptions::default() };
    let start_set: BTreeSet<Bond> = [extras.0, extras.1].into();
    let mut corners = Vec::new();
    let mut edges = Vec::new();
    let mut x = start.clone();
    let (mut release, mut keep) = extras;
    let first_mode = catalog
        .lookup(&ContactGraph::from_constraints(n, &alpha.with(release).with(keep))?)
        .ok_or(Error::UnknownEndpoint)?
        .id;
    corners.push(Corner {
        mode: first_mode,
        extras,
        x: x.clone(),
    });
    for _ in 0..MAX_EDGES {
        let edge_alpha = alpha.with(keep);
        let walk = walk_line(&x, &edge_alpha, release, opts)?;
        let end_mode = identify_endpoint(&walk, catalog)?;
        let formed = walk.formed;
        let line = lines.and_then(|cat| {
            let code = ContactGraph::from_constraints(n, &edge_alpha).ok()?.canonical_code();
            let (a, b) = (corners.last().expect("corner").mode, end_mode);
            cat.lines
                .iter()
                .find(|l| l.class_key() == (code, a.min(b), a.max(b)))
                .map(|l| l.id)
        });
        x = walk.end().clone();
        edges.push(BoundaryEdge {
            kept: keep,
            opened: release,
            formed,
            line,
            samples: walk.samples,
        });
        let now: BTreeSet<Bond> = [keep, formed].into();
        if now == start_set {
            return Ok(Boundary {
                alpha: alpha.clone(),
                corners,
                edges,
            });
        }
        corners.push(Corner {
            mode: end_mode,
            extras: (keep, formed),
            x: x.clone(),
        });
        release = keep;
        keep = formed;
    }
    Err(Error::Topology(MAX_EDGES))
}

fn free_pairs(n: usize, alpha: &ConstraintSet) -> Vec<Bond> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| Bond { i, j }))
        .filter(|&b| !alpha.contains(b))
        .collect()
}

/// Most overlapping pair outside `alpha`, if any pair is below contact.
fn violation(x: &Configuration, free: &[Bond]) -> Option<(Bond, f64)> {
    free.iter()
        .map(|&b| (b, bond_excess(x, b)))
        .filter(|&(_, y)| y < 0.0)
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Projection of `v` onto the span of an orthonormal basis (given as columns).
fn project_onto(basis: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    basis * (basis.transpose() * v)
}

/// Interior points generated by walking inward from every non-corner
/// boundary sample until the walk leaves the face. A point is rejected if
/// it lies within `ds / 2` (in bond-distance space) of a point already kept,
/// boundary points included.
pub fn sample_interior(boundary: &Boundary, ds: f64) -> Result<Vec<Configuration>> {
    let alpha = &boundary.alpha;
    let n = boundary.corners[0].x.n();
    let free = free_pairs(n, alpha);
    let mut kept_emb: Vec<QuotientPoint> = boundary
        .edges
        .iter()
        .flat_map(|e| e.samples.iter().map(|s| s.x.bond_distances()))
        .collect();
    let radius = 0.5 * ds;
    let mut interior = Vec::new();
    let max_steps = (8.0 / ds) as usize;
    for edge in &boundary.edges {
        let last = edge.samples.len().saturating_sub(1);
        for sample in &edge.samples[1..last.max(1)] {
            let mut x = sample.x.clone();
            let tangent = internal_tangents(&x, alpha)?.matrix(3 * n);
            let grad = constraint_jacobian(&x, &ConstraintSet::new(vec![edge.kept]))?
                .row(0)
                .transpose();
            let mut v = project_onto(&tangent, &grad);
            if v.norm() < 1e-12 {
                continue;
            }
            v.normalize_mut();
            for _ in 0..max_steps {
                let Ok(next) = newton_project(&x.displaced(&v, ds), alpha, PROJECTION_TOL) else {
                    break;
                };
                if violation(&next, &free).is_some() {
                    break;
                }
                let emb = next.bond_distances();
                if kept_emb.iter().all(|e| e.distance(&emb) >= radius) {
                    kept_emb.push(emb);
                    interior.push(next.clone());
                }
                let tangent = internal_tangents(&next, alpha)?.matrix(3 * n);
                let w = project_onto(&tangent, &v);
                if w.norm() < 1e-12 {
                    break;
                }
                v = w.normalize();
                x = next;
            }
        }
    }
    Ok(interior)
}

/// Planar coordinates from convex combinations.
///
/// `boundary` lists `(point index, angle)` for points pinned to the unit
/// circle. Every other point is placed at the weighted average of its `k`
/// nearest neighbours in bond-distance space with weights proportional to
/// inverse distance. The linear system is solved by Gauss–Seidel, warm
/// started from `warm` when given.
pub fn floater_parameterize(
    points: &[QuotientPoint],
    boundary: &[(usize, f64)],
    k: usize,
    warm: Option<&[[f64; 2]]>,
) -> Result<Vec<[f64; 2]>> {
    let n = points.len();
    let mut uv = vec![[0.0, 0.0]; n];
    let mut pinned = vec![false; n];
    for &(i, theta) in boundary {
        uv[i] = [theta.cos(), theta.sin()];
        pinned[i] = true;
    }
    if let Some(w) = warm {
        for i in 0..n {
            if !pinned[i] && i < w.len() {
                uv[i] = w[i];
            }
        }
    }
    let mut k = k.max(1);
    loop {
        let weights = neighbor_weights(points, &pinned, k);
        if connected_to_boundary(&weights, &pinned) {
            gauss_seidel(&mut uv, &weights, &pinned)?;
            return Ok(uv);
        }
        if k >= n {
            return Err(Error::Parameterization(
                "interior points are not connected to the boundary".into(),
            ));
        }
        k += 4;
    }
}

fn neighbor_weights(points: &[QuotientPoint], pinned: &[bool], k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            if pinned[i] {
                return Vec::new();
            }
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (points[i].distance(&points[j]), j))
                .collect();
            let take = k.min(d.len());
            d.select_nth_unstable_by(take.saturating_sub(1), |a, b| a.0.total_cmp(&b.0));
            d.truncate(take);
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let raw: Vec<(usize, f64)> = d.iter().map(|&(dist, j)| (j, 1.0 / dist.max(1e-12))).collect();
            let total: f64 = raw.iter().map(|w| w.1).sum();
            raw.into_iter().map(|(j, w)| (j, w / total)).collect()
        })
        .collect()
}

fn connected_to_boundary(weights: &[Vec<(usize, f64)>], pinned: &[bool]) -> bool {
    // A free point is anchored if its neighbour chain reaches a pinned point.
    let n = pinned.len();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, w) in weights.iter().enumerate() {
        for &(j, _) in w {
            reverse[j].push(i);
        }
    }
    let mut anchored = pinned.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&i| pinned[i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &reverse[j] {
            if !anchored[i] {
                anchored[i] = true;
                stack.push(i);
            }
        }
    }
    anchored.iter().all(|&a| a)
}

/// Successive over-relaxation on the convex-combination system. Plain
/// Gauss-Seidel stalls on fine meshes, where the spectral radius nears one,
/// but the weights are not symmetric and over-relaxation occasionally fails
/// to settle; plain sweeps from the original start are then the fallback.
fn gauss_seidel(uv: &mut [[f64; 2]], weights: &[Vec<(usize, f64)>], pinned: &[bool]) -> Result<()> {
    let free = pinned.iter().filter(|&&p| !p).count().max(1) as f64;
    let omega = (2.0 / (1.0 + (PI / free.sqrt()).sin())).min(1.95);
    let start = uv.to_vec();
    if sweeps(uv, weights, pinned, omega, 100_000) {
        return Ok(());
    }
    log::debug!("over-relaxation did not settle; retrying with plain sweeps");
    uv.copy_from_slice(&start);
    if sweeps(uv, weights, pinned, 1.0, 1_000_000) {
        return Ok(());
    }
    Err(Error::Parameterization("convex-combination system did not converge".into()))
}

fn sweeps(uv: &mut [[f64; 2]], weights: &[Vec<(usize, f64)>], pinned: &[bool], omega: f64, limit: usize) -> bool {
    for _ in 0..limit {
        let mut change: f64 = 0.0;
        for i in 0..uv.len() {
            if pinned[i] {
                continue;
            }
            let mut p = [0.0, 0.0];
            for &(j, w) in &weights[i] {
                p[0] += w * uv[j][0];
                p[1] += w * uv[j][1];
            }
            change = change.max((p[0] - uv[i][0]).abs()).max((p[1] - uv[i][1]).abs());
            uv[i] = [uv[i][0] + omega * (p[0] - uv[i][0]), uv[i][1] + omega * (p[1] - uv[i][1])];
        }
        if change < 1e-12 {
            return true;
        }
    }
    false
}

/// Delaunay triangles of planar points.
pub fn delaunay(planar: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let pts: Vec<delaunator::Point> = planar.iter().map(|p| delaunator::Point { x: p[0], y: p[1] }).collect();
    let tri = delaunator::triangulate(&pts);
    tri.triangles.chunks_exact(3).map(|t| [t[0], t[1], t[2]]).collect()
}

/// Area of a triangle from its side lengths.
pub fn heron(a: f64, b: f64, c: f64) -> f64 {
    let s = 0.5 * (a + b + c);
    (s * (s - a) * (s - b) * (s - c)).max(0.0).sqrt()
}

/// `2 r_in / r_out` from side lengths: 1 for equilateral, 0 for degenerate.
pub fn triangle_quality(a: f64, b: f64, c: f64) -> f64 {
    let prod = a * b * c;
    if prod <= 0.0 {
        return 0.0;
    }
    ((b + c - a) * (c + a - b) * (a + b - c) / prod).max(0.0)
}

/// Flips interior edges while that raises the worse quality of the two
/// adjacent triangles. `len` measures edges on the manifold. A flip is only
/// taken when the quad is convex in that metric (the angles at both ends of
/// the shared edge stay below π), so the triangulation never folds. Returns
/// the number of flips.
pub fn improve_by_flips(triangles: &mut [[usize; 3]], len: impl Fn(usize, usize) -> f64) -> usize {
    // Angle at `p` in the triangle (p, q, r).
    let angle = |p: usize, q: usize, r: usize| {
        let (a, b, c) = (len(p, q), len(p, r), len(q, r));
        ((a * a + b * b - c * c) / (2.0 * a * b)).clamp(-1.0, 1.0).acos()
    };
    let quality = |a: usize, b: usize, c: usize| triangle_quality(len(a, b), len(b, c), len(c, a));
    let mut flips = 0;
    for _ in 0..100 {
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, t) in triangles.iter().enumerate() {
            for e in 0..3 {
                owner.insert((t[e], t[(e + 1) % 3]), k);
            }
        }
        let mut touched = vec![false; triangles.len()];
        let mut pass = 0;
        for k1 in 0..triangles.len() {
            for e in 0..3 {
                if touched[k1] {
                    break;
                }
                let t1 = triangles[k1];
                let (a, b, c) = (t1[e], t1[(e + 1) % 3], t1[(e + 2) % 3]);
                let Some(&k2) = owner.get(&(b, a)) else { continue };
                if touched[k2] {
                    continue;
                }
                let t2 = triangles[k2];
                let d = t2.into_iter().find(|&v| v != a && v != b).unwrap();
                if owner.contains_key(&(c, d)) || owner.contains_key(&(d, c)) {
                    continue;
                }
                let convex = angle(a, b, c) + angle(a, b, d) < PI - 1e-6 && angle(b, a, c) + angle(b, a, d) < PI - 1e-6;
                if !convex {
                    continue;
                }
                let before = quality(a, b, c).min(quality(b, a, d));
                let after = quality(a, d, c).min(quality(d, b, c));
                if after > before * (1.0 + 1e-9) {
                    triangles[k1] = [a, d, c];
                    triangles[k2] = [d, b, c];
                    touched[k1] = true;
                    touched[k2] = true;
                    pass += 1;
                }
            }
        }
        flips += pass;
        if pass == 0 {
            break;
        }
    }
    flips
}

/// Triangulated face with everything needed for integration.
#[derive(Clone, Debug)]
pub struct FaceMesh {
    pub points: Vec<Configuration>,
    pub planar: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Indices of boundary points in loop order.
    pub boundary: Vec<usize>,
    pub h: Vec<f64>,
    pub inertia: Vec<f64>,
    /// Quotient-metric triangle areas.
    pub areas: Vec<f64>,
    /// Quality `2 r_in / r_out` per triangle, in quotient lengths.
    pub quality: Vec<f64>,
}

impl FaceMesh {
    pub fn euler_characteristic(&self) -> i64 {
        let mut vertices = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                vertices.insert(t[k]);
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// True when every edge is shared by at most two triangles and exactly
    /// the boundary-loop edges are used once.
    pub fn is_manifold_with_boundary(&self) -> bool {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().all(|&c| c <= 2)
    }

    pub fn min_quality(&self) -> f64 {
        self.quality.iter().copied().fold(1.0, f64::min)
    }

    /// Piecewise-linear integral of a vertex field.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        fem_integrate(&self.triangles, &self.areas, f)
    }
}

/// `Σ_T area(T) · mean of f over the vertices of T`, skipping degenerate triangles.
pub fn fem_integrate(triangles: &[[usize; 3]], areas: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    triangles
        .iter()
        .zip(areas)
        .filter(|(_, &a)| a >= MIN_TRIANGLE_AREA)
        .map(|(t, &a)| a * (f(t[0]) + f(t[1]) + f(t[2])) / 3.0)
        .sum()
}

#[derive(Clone, Copy, Debug)]
struct BoundarySlot {
    point: usize,
    edge: usize,
    t: f64,
}

/// Mutable state of the mesh during relaxation.
struct Mesher<'a> {
    alpha: &'a ConstraintSet,
    free: Vec<Bond>,
    opts: FaceOptions,
    points: Vec<Configuration>,
    emb: Vec<QuotientPoint>,
    is_boundary: Vec<bool>,
    slots: Vec<BoundarySlot>,
    edge_lengths: Vec<f64>,
    edge_kept: Vec<Bond>,
    planar: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
}

impl<'a> Mesher<'a> {
    fn new(boundary: &'a Boundary, interior: Vec<Configuration>, opts: FaceOptions) -> Self {
        let n = boundary.corners[0].x.n();
        let mut points = Vec::new();
        let mut slots = Vec::new();
        for (k, edge) in boundary.edges.iter().enumerate() {
            // The last sample of each edge is the next edge's first corner.
            // Strict mode skips samples crowding a neighbour, which would
            // otherwise leave slivers between consecutive boundary points.
            let end = edge.length();
            let mut last = f64::NEG_INFINITY;
            for (j, s) in edge.samples[..edge.samples.len() - 1].iter().enumerate() {
                let crowded = s.s - last < 0.25 * opts.ds || end - s.s < 0.25 * opts.ds;
                if opts.strict && j > 0 && crowded {
                    continue;
                }
                last = s.s;
                slots.push(BoundarySlot {
                    point: points.len(),
                    edge: k,
                    t: s.s,
                });
                points.push(s.x.clone());
            }
        }
        let n_boundary = points.len();
        points.extend(interior);
        let emb = points.iter().map(Configuration::bond_distances).collect();
        let mut is_boundary = vec![false; points.len()];
        is_boundary[..n_boundary].iter_mut().for_each(|b| *b = true);
        Self {
            alpha: &boundary.alpha,
            free: free_pairs(n, &boundary.alpha),
            opts,
            points,
            emb,
            is_boundary,
            slots,
            edge_lengths: boundary.edges.iter().map(BoundaryEdge::length).collect(),
            edge_kept: boundary.edges.iter().map(|e| e.kept).collect(),
            planar: Vec::new(),
            triangles: Vec::new(),
        }
    }

    fn boundary_angles(&self) -> Vec<(usize, f64)> {
        let m = self.edge_lengths.len();
        let corner_angle: Vec<f64> = match self.opts.corner_angles {
            CornerAngles::Uniform => (0..=m).map(|k| TAU * k as f64 / m as f64).collect(),
            CornerAngles::ArcLength => {
                let total: f64 = self.edge_lengths.iter().sum();
                let mut acc = vec![0.0];
                for l in &self.edge_lengths {
                    acc.push(acc.last().unwrap() + TAU * l / total);
                }
                acc
            }
        };
        self.slots
            .iter()
            .map(|s| {
                let frac = (s.t / self.edge_lengths[s.edge]).clamp(0.0, 1.0);
                let a0 = corner_angle[s.edge];
                (s.point, a0 + frac * (corner_angle[s.edge + 1] - a0))
            })
            .collect()
    }

    fn retriangulate(&mut self) -> Result<()> {
        let warm = (self.planar.len() == self.points.len()).then(|| self.planar.clone());
        self.planar = floater_parameterize(&self.emb, &self.boundary_angles(), self.opts.neighbors, warm.as_deref())?;
        self.triangles = delaunay(&self.planar);
        Ok(())
    }

    fn bars(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.into_iter().collect()
    }

    fn bond_space_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (&self.emb[t[0]], &self.emb[t[1]], &self.emb[t[2]]);
                heron(a.distance(b), b.distance(c), c.distance(a))
            })
            .sum()
    }

    fn spring_step(&mut self) -> Result<()> {
        let bars = self.bars();
        if bars.is_empty() {
            return Ok(());
        }
        let dim = self.emb[0].0.len();
        let lengths: Vec<f64> = bars.iter().map(|&(a, b)| self.emb[a].distance(&self.emb[b])).collect();
        let rest = self.opts.pressure * lengths.iter().sum::<f64>() / lengths.len() as f64;
        let mut force = vec![DVector::<f64>::zeros(dim); self.points.len()];
        for (&(a, b), &len) in bars.iter().zip(&lengths) {
            let push = rest - len;
            if push <= 0.0 || len < 1e-14 {
                continue;
            }
            for k in 0..dim {
                let d = (self.emb[a].0[k] - self.emb[b].0[k]) / len * push;
                force[a][k] += d;
                force[b][k] -= d;
            }
        }
        let moves: Vec<Option<Configuration>> = (0..self.points.len())
            .into_par_iter()
            .map(|i| {
                if self.is_boundary[i] {
                    return None;
                }
                self.moved(i, &(&force[i] * self.opts.dt)).ok()
            })
            .collect();
        let mut dropped = vec![false; self.points.len()];
        for (i, mv) in moves.into_iter().enumerate() {
            let Some(x) = mv else { continue };
            match violation(&x, &self.free) {
                None => {
                    self.emb[i] = x.bond_distances();
                    self.points[i] = x;
                }
                Some((pair, _)) => {
                    if !self.absorb(i, x, pair) {
                        dropped[i] = true;
                    }
                }
            }
        }
        self.compact(&dropped);
        Ok(())
    }

    /// Moves point `i` by the bond-space displacement `f`, staying on the face.
    fn moved(&self, i: usize, f: &DVector<f64>) -> Result<Configuration> {
        let x = &self.points[i];
        let basis = internal_tangents(x, self.alpha)?;
        let t = basis.matrix(3 * x.n());
        let push = pair_jacobian(x)? * &t;
        let coeff = push
            .svd(true, true)
            .solve(f, 1e-10)
            .map_err(|e| Error::Quality(e.to_string()))?;
        newton_project(&x.displaced(&(&t * coeff), 1.0), self.alpha, PROJECTION_TOL)
    }

    /// Puts an escaped point onto the boundary edge that holds `pair` at contact.
    /// Returns false if the point should be dropped.
    fn absorb(&mut self, i: usize, x: Configuration, pair: Bond) -> bool {
        let Ok(y) = newton_project(&x, &self.alpha.with(pair), PROJECTION_TOL) else {
            return false;
        };
        if violation(&y, &self.free.iter().copied().filter(|&b| b != pair).collect::<Vec<_>>()).is_some() {
            return false;
        }
        let emb = y.bond_distances();
        let radius = 0.5 * self.opts.ds;
        let too_close = self
            .slots
            .iter()
            .any(|s| self.emb[s.point].distance(&emb) < radius);
        if too_close {
            return false;
        }
        // Locate the point along the matching edge by projecting onto the
        // polyline of existing boundary samples.
        let mut best: Option<(f64, usize, f64)> = None;
        let m = self.slots.len();
        for k in 0..m {
            let s0 = self.slots[k];
            if self.edge_kept[s0.edge] != pair {
                continue;
            }
            let next = self.slots[(k + 1) % m];
            let t1 = if next.edge == s0.edge { next.t } else { self.edge_lengths[s0.edge] };
            let p1 = &self.emb[next.point];
            let p0 = &self.emb[s0.point];
            let seg: Vec<f64> = p1.0.iter().zip(&p0.0).map(|(a, b)| a - b).collect();
            let rel: Vec<f64> = emb.0.iter().zip(&p0.0).map(|(a, b)| a - b).collect();
            let len2: f64 = seg.iter().map(|v| v * v).sum();
            let lam = if len2 > 0.0 {
                (seg.iter().zip(&rel).map(|(a, b)| a * b).sum::<f64>() / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let dist2: f64 = rel.iter().zip(&seg).map(|(r, s)| (r - lam * s).powi(2)).sum();
            if best.map_or(true, |(d, _, _)| dist2 < d) {
                best = Some((dist2, k, s0.t + lam * (t1 - s0.t)));
            }
        }
        let Some((_, k, t)) = best else {
            return false;
        };
        let edge = self.slots[k].edge;
        self.slots.insert(k + 1, BoundarySlot { point: i, edge, t });
        self.is_boundary[i] = true;
        self.emb[i] = emb;
        self.points[i] = y;
        true
    }

    fn compact(&mut self, dropped: &[bool]) {
        if !dropped.iter().any(|&d| d) {
            return;
        }
        let mut remap = vec![usize::MAX; dropped.len()];
        let mut next = 0;
        for (i, &d) in dropped.iter().enumerate() {
            if !d {
                remap[i] = next;
                next += 1;
            }
        }
        fn keep<T>(v: &mut Vec<T>, dropped: &[bool]) {
            let mut k = 0;
            v.retain(|_| {
                k += 1;
                !dropped[k - 1]
            });
        }
        keep(&mut self.points, dropped);
        keep(&mut self.emb, dropped);
        keep(&mut self.is_boundary, dropped);
        if self.planar.len() == dropped.len() {
            keep(&mut self.planar, dropped);
        }
        for s in &mut self.slots {
            s.point = remap[s.point];
        }
        self.triangles.clear();
    }

    fn relax(&mut self) -> Result<()> {
        self.retriangulate()?;
        let mut history = vec![self.bond_space_area()];
        for _ in 0..self.opts.max_rounds {
            for _ in 0..self.opts.steps_per_retriangulation {
                self.spring_step()?;
            }
            self.retriangulate()?;
            history.push(self.bond_space_area());
            let k = history.len();
            let settled = k > 3 && (history[k - 1] - history[k - 4]).abs() < self.opts.ds / 20.0;
            if settled && (!self.opts.strict || self.min_quality() > self.opts.min_quality) {
                break;
            }
        }
        if self.opts.strict {
            self.polish()?;
        }
        Ok(())
    }

    /// Strict-mode cleanup. Edges flip towards better triangles. The interior
    /// apex of a remaining cap moves to the centroid of its neighbours, or is
    /// dropped when that leaves the face; over-long sides get a midpoint.
    fn polish(&mut self) -> Result<()> {
        for _ in 0..POLISH_ROUNDS {
            let charts = self.points.par_iter().map(QuotientChart::at).collect::<Result<Vec<_>>>()?;
            let len = |a: usize, b: usize| symmetric_length(&charts[a], &charts[b]);
            improve_by_flips(&mut self.triangles, len);
            let mut apexes = BTreeSet::new();
            let mut long = BTreeSet::new();
            for t in &self.triangles {
                let e = [len(t[1], t[2]), len(t[2], t[0]), len(t[0], t[1])];
                if triangle_quality(e[0], e[1], e[2]) > self.opts.min_quality {
                    continue;
                }
                // The apex sits opposite the longest side.
                let k = (0..3).max_by(|&i, &j| e[i].total_cmp(&e[j])).unwrap();
                if !self.is_boundary[t[k]] {
                    apexes.insert(t[k]);
                }
                if e[k] > LONG_EDGE * self.opts.ds {
                    let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                    long.insert((a.min(b), a.max(b)));
                }
            }
            if apexes.is_empty() && long.is_empty() {
                return Ok(());
            }
            let mut ring: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
            for t in &self.triangles {
                for k in 0..3 {
                    if apexes.contains(&t[k]) {
                        ring.entry(t[k]).or_default().extend([t[(k + 1) % 3], t[(k + 2) % 3]]);
                    }
                }
            }
            let mut dropped = vec![false; self.points.len()];
            for (i, nb) in ring {
                let own = &self.emb[i].0;
                let shift = DVector::from_fn(own.len(), |k, _| {
                    nb.iter().map(|&j| self.emb[j].0[k]).sum::<f64>() / nb.len() as f64 - own[k]
                });
                match self.moved(i, &shift) {
                    Ok(x) if violation(&x, &self.free).is_none() => {
                        self.emb[i] = x.bond_distances();
                        self.points[i] = x;
                    }
                    _ => dropped[i] = true,
                }
            }
            // Fill voids: walk from one end of each over-long edge to its midpoint.
            let mut added = Vec::new();
            for (a, b) in long {
                let (from, to) = if self.is_boundary[a] { (b, a) } else { (a, b) };
                let half = DVector::from_fn(self.emb[from].0.len(), |k, _| 0.5 * (self.emb[to].0[k] - self.emb[from].0[k]));
                let Ok(x) = self.moved(from, &half) else { continue };
                let emb = x.bond_distances();
                let near = |q: &QuotientPoint| q.distance(&emb) < 0.5 * self.opts.ds;
                if violation(&x, &self.free).is_none()
                    && !self.emb.iter().any(near)
                    && !added.iter().any(|(_, q)| near(q))
                {
                    added.push((x, emb));
                }
            }
            self.compact(&dropped);
            for (x, emb) in added {
                self.emb.push(emb);
                self.points.push(x);
                self.is_boundary.push(false);
            }
            self.retriangulate()?;
        }
        let charts = self.points.par_iter().map(QuotientChart::at).collect::<Result<Vec<_>>>()?;
        improve_by_flips(&mut self.triangles, |a, b| symmetric_length(&charts[a], &charts[b]));
        Ok(())
    }

    fn min_quality(&self) -> f64 {
        let charts: Vec<QuotientChart> = self.points.par_iter().filter_map(|x| QuotientChart::at(x).ok()).collect();
        if charts.len() != self.points.len() {
            return 0.0;
        }
        self.triangles
            .iter()
            .map(|t| {
                let l = |a: usize, b: usize| symmetric_length(&charts[t[a]], &charts[t[b]]);
                triangle_quality(l(0, 1), l(1, 2), l(2, 0))
            })
            .fold(1.0, f64::min)
    }

    fn finish(self) -> Result<FaceMesh> {
        let charts = self
            .points
            .par_iter()
            .map(QuotientChart::at)
            .collect::<Result<Vec<_>>>()?;
        let triangles = self.triangles;
        let mut areas = Vec::with_capacity(triangles.len());
        let mut quality = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let l = |a: usize, b: usize| symmetric_length(&charts[t[a]], &charts[t[b]]);
            let (a, b, c) = (l(0, 1), l(1, 2), l(2, 0));
            areas.push(heron(a, b, c));
            quality.push(triangle_quality(a, b, c));
        }
        let skipped = areas.iter().filter(|&&a| a < MIN_TRIANGLE_AREA).count();
        if skipped > 0 {
            log::warn!("{skipped} degenerate triangles left out of the integrals");
        }
        let h = self
            .points
            .par_iter()
            .map(|x| geom::vibrational_factor(x, self.alpha))
            .collect::<Result<Vec<_>>>()?;
        let inertia = self
            .points
            .iter()
            .map(geom::rotational_factor)
            .collect::<Result<Vec<_>>>()?;
        Ok(FaceMesh {
            boundary: self.slots.iter().map(|s| s.point).collect(),
            points: self.points,
            planar: self.planar,
            triangles,
            h,
            inertia,
            areas,
            quality,
        })
    }
}

/// Delaunay triangulation of the parameterized points followed by spring
/// relaxation. Boundary samples stay fixed; interior points that leave the
/// face are pushed onto the boundary edge they crossed.
pub fn triangulate_and_relax(boundary: &Boundary, interior: Vec<Configuration>, opts: FaceOptions) -> Result<FaceMesh> {
    let mut mesher = Mesher::new(boundary, interior, opts);
    mesher.relax()?;
    mesher.finish()
}

/// A deduplicated two-dimensional mode.
#[derive(Clone, Debug)]
pub struct FaceManifold {
    pub id: usize,
    pub alpha: ConstraintSet,
    pub boundary: Boundary,
    pub mesh: Option<FaceMesh>,
    /// `∫ h I` over the face.
    pub zeta: f64,
    /// `∫ 1`.
    pub area: f64,
    pub mean_h: f64,
    pub mean_inertia: f64,
    pub multiplicity: u64,
    pub code: u128,
}

impl FaceManifold {
    pub fn z(&self) -> f64 {
        self.multiplicity as f64 * self.zeta
    }

    pub fn corners(&self) -> Vec<usize> {
        self.boundary.corner_modes()
    }

    pub fn class_key(&self) -> (u128, Vec<usize>) {
        (self.code, self.boundary.corner_key())
    }

    /// Samples the interior, meshes, and integrates.
    pub fn mesh_and_integrate(&mut self, opts: FaceOptions) -> Result<()> {
        let interior = sample_interior(&self.boundary, opts.ds)?;
        let mesh = triangulate_and_relax(&self.boundary, interior, opts)?;
        let chi = mesh.euler_characteristic();
        if chi != 1 {
            log::warn!("face {} mesh has Euler characteristic {chi}", self.id);
        }
        self.area = mesh.integrate(|_| 1.0);
        self.zeta = mesh.integrate(|i| mesh.h[i] * mesh.inertia[i]);
        self.mean_h = mesh.integrate(|i| mesh.h[i]) / self.area;
        self.mean_inertia = mesh.integrate(|i| mesh.inertia[i]) / self.area;
        self.mesh = Some(mesh);
        Ok(())
    }
}

/// Traces the boundary of the face obtained by breaking `pair` in `mode`.
pub fn face_from_pair(
    mode: &RigidMode,
    pair: (Bond, Bond),
    ds: f64,
    catalog: &ModeCatalog,
    lines: Option<&LineCatalog>,
) -> Result<FaceManifold> {
    let alpha = mode.constraints().without(pair.0).without(pair.1);
    let dim = internal_tangents(&mode.representative, &alpha)?.dim();
    if dim != 2 {
        return Err(Error::Singular { expected: 2, found: dim });
    }
    let boundary = trace_boundary(&mode.representative, &alpha, pair, ds, catalog, lines)?;
    let code = ContactGraph::from_constraints(mode.n(), &alpha)?.canonical_code();
    Ok(FaceManifold {
        id: 0,
        alpha,
        boundary,
        mesh: None,
        zeta: 0.0,
        area: 0.0,
        mean_h: 0.0,
        mean_inertia: 0.0,
        multiplicity: 0,
        code,
    })
}

/// All two-dimensional modes of a particle count.
#[derive(Clone, Debug)]
pub struct FaceCatalog {
    pub n: usize,
    pub faces: Vec<FaceManifold>,
    /// `nu[(rigid id, face id)]`: bond pairs of one copy of the rigid mode leading to the face class.
    pub nu: BTreeMap<(usize, usize), usize>,
}

impl FaceCatalog {
    pub fn z2(&self) -> f64 {
        self.faces.iter().map(FaceManifold::z).sum()
    }

    pub fn by_id(&self, id: usize) -> Option<&FaceManifold> {
        self.faces.iter().find(|f| f.id == id)
    }
}

/// Traces every bond pair of every rigid mode, classes the faces, and
/// meshes one representative per class.
pub fn build_face_catalog(
    catalog: &ModeCatalog,
    lines: &LineCatalog,
    opts: FaceOptions,
    first_id: usize,
) -> Result<FaceCatalog> {
    let jobs: Vec<(&RigidMode, (Bond, Bond))> = catalog
        .rigid
        .iter()
        .flat_map(|m| {
            let bonds = m.graph.bonds();
            let mut pairs = Vec::new();
            for a in 0..bonds.len() {
                for b in a + 1..bonds.len() {
                    pairs.push((m, (bonds[a], bonds[b])));
                }
            }
            pairs
        })
        .collect();
    let traced = jobs
        .par_iter()
        .map(|&(m, pair)| face_from_pair(m, pair, opts.ds, catalog, Some(lines)).map(|f| (m.id, f)))
        .collect::<Result<Vec<_>>>()?;
    let mut classes: BTreeMap<(u128, Vec<usize>), Vec<(usize, FaceManifold)>> = BTreeMap::new();
    for (mode, face) in traced {
        classes.entry(face.class_key()).or_default().push((mode, face));
    }
    let mut faces = Vec::new();
    let mut nu = BTreeMap::new();
    for (k, (_, members)) in classes.into_iter().enumerate() {
        let id = first_id + k;
        let mut per_mode: BTreeMap<usize, usize> = BTreeMap::new();
        for (mode, _) in &members {
            *per_mode.entry(*mode).or_default() += 1;
        }
        let tallies: Vec<(u64, usize)> = per_mode
            .iter()
            .map(|(&m, &c)| {
                nu.insert((m, id), c);
                (catalog.by_id(m).expect("mode id").multiplicity, c)
            })
            .collect();
        let mut face = members.into_iter().next().expect("non-empty class").1;
        face.id = id;
        face.multiplicity = floppy_multiplicity(&tallies, face.boundary.corners.len())?;
        faces.push(face);
    }
    faces
        .par_iter_mut()
        .map(|f| f.mesh_and_integrate(opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(FaceCatalog {
        n: catalog.n,
        faces,
        nu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heron_and_quality_of_simple_triangles() {
        assert!((heron(3.0, 4.0, 5.0) - 6.0).abs() < 1e-12);
        assert!((triangle_quality(1.0, 1.0, 1.0) - 1.0).abs() < 1e-12);
        assert_eq!(triangle_quality(1.0, 1.0, 2.0), 0.0);
    }

    #[test]
    fn fem_on_flat_right_triangle() {
        let area = heron(1.0, 1.0, 2f64.sqrt());
        assert!((fem_integrate(&[[0, 1, 2]], &[area], |_| 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flips_replace_a_flat_diagonal() {
        // A thin rhombus split along its long diagonal gives two slivers.
        let p: [[f64; 2]; 4] = [[0.0, 0.0], [2.0, 0.0], [1.0, 0.3], [1.0, -0.3]];
        let len = |a: usize, b: usize| ((p[a][0] - p[b][0]).powi(2) + (p[a][1] - p[b][1]).powi(2)).sqrt();
        let mut tris = [[0, 1, 2], [1, 0, 3]];
        assert_eq!(improve_by_flips(&mut tris, len), 1);
        assert_eq!(tris, [[0, 3, 2], [3, 1, 2]]);
        assert_eq!(improve_by_flips(&mut tris, len), 0);

        // Here the flip would raise the worst quality, but the quad is reflex
        // at the first corner, so the other diagonal leaves the surface.
        let q: [[f64; 2]; 4] = [[0.0, 0.0], [2.0, 0.0], [1.0, 0.3], [-1.0, -0.05]];
        let len = |a: usize, b: usize| ((q[a][0] - q[b][0]).powi(2) + (q[a][1] - q[b][1]).powi(2)).sqrt();
        let mut tris = [[0, 1, 2], [1, 0, 3]];
        let before = tris;
        improve_by_flips(&mut tris, len);
        assert_eq!(tris, before);
    }

    #[test]
    fn canonical_cycle_is_rotation_and_reflection_invariant() {
        assert_eq!(canonical_cycle(&[2, 1, 1, 1]), vec![1, 1, 1, 2]);
        assert_eq!(canonical_cycle(&[1, 2, 1, 3]), canonical_cycle(&[3, 1, 2, 1]));
        assert_eq!(canonical_cycle(&[1, 2, 3]), canonical_cycle(&[3, 2, 1]));
    }

    #[test]
    fn single_interior_point_lands_on_barycenter() {
        // Four pinned points at equal bond-space distance from the free one.
        let pts: Vec<QuotientPoint> = vec![
            QuotientPoint(vec![1.0, 0.0]),
            QuotientPoint(vec![0.0, 1.0]),
            QuotientPoint(vec![-1.0, 0.0]),
            QuotientPoint(vec![0.0, -1.0]),
            QuotientPoint(vec![0.0, 0.0]),
        ];
        let boundary: Vec<(usize, f64)> = (0..4).map(|k| (k, TAU * k as f64 / 4.0 + 0.3)).collect();
        let uv = floater_parameterize(&pts, &boundary, 4, None).unwrap();
        assert!(uv[4][0].abs() < 1e-10 && uv[4][1].abs() < 1e-10);
    }

    #[test]
    fn delaunay_of_square_with_center() {
        let tris = delaunay(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]);
        assert_eq!(tris.len(), 4);
    }
}
