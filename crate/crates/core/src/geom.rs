//! Configuration-space primitives for clusters of unit-diameter spheres.
//!
//! A configuration of `n` spheres is a point in `R^{3n}` stored as
//! `(x_0, y_0, z_0, x_1, ...)`. Bonds are unit-distance contacts; the
//! excess `|x_i - x_j| - 1` of a bond is its constraint function. Everything
//! here is a pure function of its inputs.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Sphere diameter. All lengths are measured in units of it.
pub const DIAMETER: f64 = 1.0;

/// Eigenvalues of the constraint Gram matrix below this are numerical zeros.
pub const EIGEN_ZERO: f64 = 1e-8;

/// Singular values of the tangent-space matrix below this span the null space.
pub const NULL_TOL: f64 = 1e-7;

/// Default residual tolerance for projections onto a constraint manifold.
pub const PROJECTION_TOL: f64 = 1e-12;

const PROJECTION_MAX_ITER: usize = 50;

/// Particle coordinates of a cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    coords: Vec<f64>,
}

impl Configuration {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() % 3 != 0 || coords.is_empty() {
            return Err(Error::BadLength(coords.len()));
        }
        Ok(Self { coords })
    }

    pub fn from_points(points: &[[f64; 3]]) -> Self {
        Self {
            coords: points.iter().flatten().copied().collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.coords.len() / 3
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }

    pub fn from_dvector(v: &DVector<f64>) -> Self {
        Self {
            coords: v.as_slice().to_vec(),
        }
    }

    pub fn point(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.coords[3 * i], self.coords[3 * i + 1], self.coords[3 * i + 2])
    }

    pub fn set_point(&mut self, i: usize, p: &Vector3<f64>) {
        self.coords[3 * i..3 * i + 3].copy_from_slice(p.as_slice());
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.point(i) - self.point(j)).norm()
    }

    pub fn center_of_mass(&self) -> Vector3<f64> {
        let n = self.n();
        (0..n).map(|i| self.point(i)).sum::<Vector3<f64>>() / n as f64
    }

    /// Translates the cluster so that its center of mass is the origin.
    pub fn center(&mut self) {
        let c = self.center_of_mass();
        for i in 0..self.n() {
            let p = self.point(i) - c;
            self.set_point(i, &p);
        }
    }

    pub fn centered(&self) -> Self {
        let mut out = self.clone();
        out.center();
        out
    }

    /// Returns `self + t * dir`.
    pub fn displaced(&self, dir: &DVector<f64>, t: f64) -> Self {
        let coords = self
            .coords
            .iter()
            .zip(dir.iter())
            .map(|(a, b)| a + t * b)
            .collect();
        Self { coords }
    }

    /// Applies `p -> rot * p + shift` to every particle.
    pub fn transformed(&self, rot: &Matrix3<f64>, shift: &Vector3<f64>) -> Self {
        let mut out = self.clone();
        for i in 0..self.n() {
            out.set_point(i, &(rot * self.point(i) + shift));
        }
        out
    }

    /// Relabels particles: particle `i` of the result is particle `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for (i, &p) in perm.iter().enumerate() {
            out.set_point(i, &self.point(p));
        }
        out
    }

    /// Embedding in bond-distance space: all pairwise distances in `(0,1), (0,2), ...` order.
    pub fn bond_distances(&self) -> QuotientPoint {
        let n = self.n();
        let mut d = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                d.push(self.distance(i, j));
            }
        }
        QuotientPoint(d)
    }

    /// Smallest excess over all pairs that are not in `bonds`, with the pair attaining it.
    pub fn min_free_excess(&self, bonds: &ConstraintSet) -> Option<(Bond, f64)> {
        let n = self.n();
        let mut best: Option<(Bond, f64)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let b = Bond { i, j };
                if bonds.contains(b) {
                    continue;
                }
                let y = self.distance(i, j) - DIAMETER;
                if best.map_or(true, |(_, v)| y < v) {
                    best = Some((b, y));
                }
            }
        }
        best
    }
}

/// An unordered pair of particles with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
}

impl Bond {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self { i: a, j: b }),
            std::cmp::Ordering::Greater => Ok(Self { i: b, j: a }),
            std::cmp::Ordering::Equal => Err(Error::InvalidBond(a, b)),
        }
    }

    /// Index of this pair in the bond-distance embedding of an `n`-particle cluster.
    pub fn pair_index(&self, n: usize) -> usize {
        self.i * n - self.i * (self.i + 1) / 2 + (self.j - self.i - 1)
    }
}

impl std::fmt::Display for Bond {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.i, self.j)
    }
}

/// A sorted, duplicate-free list of active bonds.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ConstraintSet {
    bonds: Vec<Bond>,
}

impl ConstraintSet {
    pub fn new(mut bonds: Vec<Bond>) -> Self {
        bonds.sort();
        bonds.dedup();
        Self { bonds }
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }

    pub fn contains(&self, b: Bond) -> bool {
        self.bonds.binary_search(&b).is_ok()
    }

    pub fn without(&self, b: Bond) -> Self {
        Self {
            bonds: self.bonds.iter().copied().filter(|&c| c != b).collect(),
        }
    }

    pub fn with(&self, b: Bond) -> Self {
        let mut bonds = self.bonds.clone();
        bonds.push(b);
        Self::new(bonds)
    }

    pub fn max_residual(&self, x: &Configuration) -> f64 {
        self.bonds
            .iter()
            .map(|&b| bond_excess(x, b).abs())
            .fold(0.0, f64::max)
    }
}

impl FromIterator<Bond> for ConstraintSet {
    fn from_iter<I: IntoIterator<Item = Bond>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangentKind {
    RigidBody,
    Internal,
}

/// Orthonormal vectors in `R^{3n}`.
#[derive(Clone, Debug)]
pub struct TangentBasis {
    pub vectors: Vec<DVector<f64>>,
    pub kind: TangentKind,
}

impl TangentBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Basis vectors as the columns of a matrix.
    pub fn matrix(&self, len: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(len, self.vectors.len());
        for (k, v) in self.vectors.iter().enumerate() {
            m.set_column(k, v);
        }
        m
    }

    /// Orthogonal projection of `v` onto the span of the basis.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for t in &self.vectors {
            out.axpy(t.dot(v), t, 1.0);
        }
        out
    }
}

/// Vector of all pairwise distances of a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct QuotientPoint(pub Vec<f64>);

impl QuotientPoint {
    pub fn distance(&self, other: &QuotientPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Excess length `|x_i - x_j| - d` of a bond.
pub fn bond_excess(x: &Configuration, b: Bond) -> f64 {
    x.distance(b.i, b.j) - DIAMETER
}

fn unit_separation(x: &Configuration, b: Bond) -> Result<Vector3<f64>> {
    let r = x.point(b.j) - x.point(b.i);
    let len = r.norm();
    if len < 1e-12 {
        return Err(Error::CoincidentParticles(b.i, b.j));
    }
    Ok(r / len)
}

/// Gradients of the bond excesses, one row per bond.
pub fn constraint_jacobian(x: &Configuration, alpha: &ConstraintSet) -> Result<DMatrix<f64>> {
    let mut jac = DMatrix::zeros(alpha.len(), 3 * x.n());
    for (k, &b) in alpha.bonds().iter().enumerate() {
        let u = unit_separation(x, b)?;
        for d in 0..3 {
            jac[(k, 3 * b.i + d)] = -u[d];
            jac[(k, 3 * b.j + d)] = u[d];
        }
    }
    Ok(jac)
}

/// Jacobian of the bond-distance embedding (all pairs).
pub fn pair_jacobian(x: &Configuration) -> Result<DMatrix<f64>> {
    let n = x.n();
    let all: ConstraintSet = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| Bond { i, j }))
        .collect();
    constraint_jacobian(x, &all)
}

fn gram_schmidt(candidates: Vec<DVector<f64>>, tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(candidates.len());
    for mut v in candidates {
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > tol {
            basis.push(v / norm);
        }
    }
    basis
}

/// Orthonormal basis for infinitesimal translations and rotations at `x`.
pub fn rigid_body_tangents(x: &Configuration) -> Result<TangentBasis> {
    let n = x.n();
    let c = x.center_of_mass();
    let mut candidates = Vec::with_capacity(6);
    for axis in 0..3 {
        let mut t = DVector::zeros(3 * n);
        for i in 0..n {
            t[3 * i + axis] = 1.0;
        }
        candidates.push(t);
    }
    let scale = (0..n).map(|i| (x.point(i) - c).norm()).fold(0.0, f64::max).max(1e-300);
    for axis in 0..3 {
        let mut w = Vector3::zeros();
        w[axis] = 1.0;
        let mut t = DVector::zeros(3 * n);
        for i in 0..n {
            let r = w.cross(&(x.point(i) - c));
            t.rows_mut(3 * i, 3).copy_from(&r);
        }
        candidates.push(t / scale);
    }
    let vectors = gram_schmidt(candidates, 1e-8);
    if vectors.len() < 6 {
        return Err(Error::Collinear);
    }
    Ok(TangentBasis {
        vectors,
        kind: TangentKind::RigidBody,
    })
}

/// Orthonormal basis of the null space of `[∇y_1 .. ∇y_m, t_1 .. t_6]^T`.
///
/// For a regular point the dimension is `3n - 6 - m`; a larger null space means
/// the constraints are dependent and is reported as a singularity.
pub fn internal_tangents(x: &Configuration, alpha: &ConstraintSet) -> Result<TangentBasis> {
    let dim = 3 * x.n();
    let jac = constraint_jacobian(x, alpha)?;
    let rigid = rigid_body_tangents(x)?;
    let rows = alpha.len() + 6;
    let size = rows.max(dim);
    // Padding with zero rows makes the SVD return a full right basis.
    let mut m = DMatrix::zeros(size, dim);
    m.view_mut((0, 0), (alpha.len(), dim)).copy_from(&jac);
    for (k, t) in rigid.vectors.iter().enumerate() {
        m.row_mut(alpha.len() + k).copy_from(&t.transpose());
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.max().max(1.0);
    let vectors: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < NULL_TOL * smax)
        .map(|(k, _)| v_t.row(k).transpose())
        .collect();
    let expected = dim.saturating_sub(6 + alpha.len());
    if vectors.len() > expected {
        return Err(Error::Singular {
            expected,
            found: vectors.len(),
        });
    }
    let vectors = gram_schmidt(vectors, 1e-10);
    Ok(TangentBasis {
        vectors,
        kind: TangentKind::Internal,
    })
}

/// Orthonormal basis of the horizontal space: the complement of rigid motions.
pub fn horizontal_tangents(x: &Configuration) -> Result<TangentBasis> {
    internal_tangents(x, &ConstraintSet::default())
}

/// Projects `x` onto `{y_k = 0 : k in alpha}` along `x + Σ λ_k ∇y_k(x)`.
///
/// Newton iteration on the multipliers; the result is recentred.
pub fn newton_project(x: &Configuration, alpha: &ConstraintSet, tol: f64) -> Result<Configuration> {
    let m = alpha.len();
    if m == 0 {
        return Ok(x.centered());
    }
    let base = x.to_dvector();
    let jac0 = constraint_jacobian(x, alpha)?;
    let jac0_t = jac0.transpose();
    let mut lambda = DVector::zeros(m);
    let mut residual = f64::INFINITY;
    for _ in 0..PROJECTION_MAX_ITER {
        let trial = Configuration::from_dvector(&(&base + &jac0_t * &lambda));
        let y = DVector::from_iterator(m, alpha.bonds().iter().map(|&b| bond_excess(&trial, b)));
        residual = y.amax();
        if !residual.is_finite() {
            break;
        }
        if residual < tol {
            return Ok(trial.centered());
        }
        let jac = constraint_jacobian(&trial, alpha)?;
        let system = &jac * &jac0_t;
        let Some(delta) = system.lu().solve(&y) else {
            break;
        };
        lambda -= delta;
    }
    Err(Error::ProjectionFailed {
        residual,
        iterations: PROJECTION_MAX_ITER,
    })
}

/// Non-zero eigenvalues of `Σ ∇y_k ∇y_k^T`, i.e. the eigenvalues of `J J^T`.
pub fn constraint_spectrum(x: &Configuration, alpha: &ConstraintSet) -> Result<Vec<f64>> {
    let jac = constraint_jacobian(x, alpha)?;
    let gram = &jac * jac.transpose();
    let mut eig: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Vibrational factor `h = Π λ_i^{-1/2}` over the `m` non-zero eigenvalues of
/// the constraint Gram matrix.
pub fn vibrational_factor(x: &Configuration, alpha: &ConstraintSet) -> Result<f64> {
    let eig = constraint_spectrum(x, alpha)?;
    let found = eig.iter().filter(|&&l| l > EIGEN_ZERO).count();
    if found < alpha.len() {
        return Err(Error::Singular {
            expected: alpha.len(),
            found,
        });
    }
    Ok((-0.5 * eig.iter().map(|l| l.ln()).sum::<f64>()).exp())
}

/// Moment of inertia tensor about the center of mass (unit masses).
pub fn inertia_tensor(x: &Configuration) -> Matrix3<f64> {
    let c = x.center_of_mass();
    let mut t = Matrix3::zeros();
    for i in 0..x.n() {
        let r = x.point(i) - c;
        t += Matrix3::identity() * r.norm_squared() - r * r.transpose();
    }
    t
}

/// Rotational factor `I = sqrt(det 𝐈)`.
pub fn rotational_factor(x: &Configuration) -> Result<f64> {
    let det = inertia_tensor(x).determinant();
    if det <= 1e-14 {
        return Err(Error::Collinear);
    }
    Ok(det.sqrt())
}

/// Local linearization of the bond-distance embedding at a configuration.
///
/// Horizontal unit vectors in `R^{3n}` have unit length in the quotient
/// metric; their images in bond-distance space span the quotient tangent
/// space there. `length_of` measures a bond-space separation by projecting
/// it onto that tangent space and reading off the horizontal coefficients.
#[derive(Clone, Debug)]
pub struct QuotientChart {
    embedding: QuotientPoint,
    pinv: DMatrix<f64>,
}

impl QuotientChart {
    pub fn at(x: &Configuration) -> Result<Self> {
        let horizontal = horizontal_tangents(x)?;
        Self::with_basis(x, &horizontal)
    }

    /// Chart restricted to the span of a given orthonormal (horizontal) basis.
    pub fn with_basis(x: &Configuration, basis: &TangentBasis) -> Result<Self> {
        let dim = 3 * x.n();
        let push = pair_jacobian(x)? * basis.matrix(dim);
        let pinv = push
            .pseudo_inverse(1e-10)
            .map_err(|e| Error::Trace(e.to_string()))?;
        Ok(Self {
            embedding: x.bond_distances(),
            pinv,
        })
    }

    pub fn embedding(&self) -> &QuotientPoint {
        &self.embedding
    }

    /// Quotient-metric length of the separation `other - self` seen from this chart.
    pub fn length_to(&self, other: &QuotientPoint) -> f64 {
        let v = DVector::from_iterator(
            other.0.len(),
            other.0.iter().zip(&self.embedding.0).map(|(a, b)| a - b),
        );
        (&self.pinv * v).norm()
    }

    /// Horizontal coefficients of a bond-space vector.
    pub fn coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.pinv * v
    }
}

/// First-order quotient-space distance between two nearby configurations:
/// the average of the separation lengths measured in the tangent spaces at
/// both ends.
pub fn quotient_distance(x1: &Configuration, x2: &Configuration) -> Result<f64> {
    let c1 = QuotientChart::at(x1)?;
    let c2 = QuotientChart::at(x2)?;
    Ok(symmetric_length(&c1, &c2))
}

pub fn symmetric_length(c1: &QuotientChart, c2: &QuotientChart) -> f64 {
    0.5 * (c1.length_to(&c2.embedding) + c2.length_to(&c1.embedding))
}

/// Optimal superposition of `moving` onto `reference` (both centred first).
///
/// Returns the rotation `R` minimizing `Σ |R m_i - r_i|^2`, restricted to
/// proper or improper orthogonal maps, and the resulting RMSD.
pub fn superpose(reference: &Configuration, moving: &Configuration, proper: bool) -> (Matrix3<f64>, f64) {
    let a = reference.centered();
    let b = moving.centered();
    let mut cov = Matrix3::zeros();
    for i in 0..a.n() {
        cov += a.point(i) * b.point(i).transpose();
    }
    let svd = cov.svd(true, true);
    let u = svd.u.expect("u");
    let v_t = svd.v_t.expect("v_t");
    let mut d = Matrix3::identity();
    let det = (u * v_t).determinant();
    if (proper && det < 0.0) || (!proper && det > 0.0) {
        // nalgebra does not sort singular values; flip the weakest direction.
        let weakest = svd.singular_values.imin();
        d[(weakest, weakest)] = -1.0;
    }
    let rot = u * d * v_t;
    let mut sq = 0.0;
    for i in 0..a.n() {
        sq += (rot * b.point(i) - a.point(i)).norm_squared();
    }
    (rot, (sq / a.n() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn octahedron() -> Configuration {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Configuration::from_points(&[
            [s, 0.0, 0.0],
            [-s, 0.0, 0.0],
            [0.0, s, 0.0],
            [0.0, -s, 0.0],
            [0.0, 0.0, s],
            [0.0, 0.0, -s],
        ])
    }

    fn unit_bonds(x: &Configuration) -> ConstraintSet {
        let n = x.n();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| Bond { i, j }))
            .filter(|&b| bond_excess(x, b).abs() < 1e-9)
            .collect()
    }

    fn dimer(len: f64) -> Configuration {
        Configuration::from_points(&[[0.0, 0.0, 0.0], [len, 0.0, 0.0]])
    }

    #[test]
    fn bond_excess_examples() {
        let b = Bond::new(0, 1).unwrap();
        assert_eq!(bond_excess(&dimer(1.0), b), 0.0);
        assert_eq!(bond_excess(&dimer(2.0), b), 1.0);
        assert_relative_eq!(bond_excess(&dimer(0.9), b), -0.1, epsilon = 1e-15);
    }

    #[test]
    fn bond_rejects_self_pair() {
        assert!(Bond::new(2, 2).is_err());
        assert_eq!(Bond::new(3, 1).unwrap(), Bond { i: 1, j: 3 });
    }

    #[test]
    fn pair_index_enumerates_upper_triangle() {
        let n = 6;
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                assert_eq!(Bond { i, j }.pair_index(n), k);
                k += 1;
            }
        }
    }

    #[test]
    fn dimer_jacobian_row() {
        let alpha = ConstraintSet::new(vec![Bond { i: 0, j: 1 }]);
        let j = constraint_jacobian(&dimer(1.0), &alpha).unwrap();
        assert_eq!(j.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_relative_eq!(j.row(0).norm_squared(), 2.0);
    }

    #[test]
    fn coincident_particles_error() {
        let alpha = ConstraintSet::new(vec![Bond { i: 0, j: 1 }]);
        assert!(matches!(
            constraint_jacobian(&dimer(0.0), &alpha),
            Err(Error::CoincidentParticles(0, 1))
        ));
    }

    #[test]
    fn octahedron_factors() {
        let x = octahedron();
        let alpha = unit_bonds(&x);
        assert_eq!(alpha.len(), 12);
        assert!(internal_tangents(&x, &alpha).unwrap().is_empty());
        let h = vibrational_factor(&x, &alpha).unwrap();
        assert!((h - 0.034).abs() < 0.0005, "h = {h}");
        assert_relative_eq!(rotational_factor(&x).unwrap(), 8f64.sqrt(), epsilon = 1e-12);
        let minus_one = alpha.without(alpha.bonds()[0]);
        assert_eq!(internal_tangents(&x, &minus_one).unwrap().dim(), 1);
    }

    #[test]
    fn dimer_vibrational_factor() {
        let alpha = ConstraintSet::new(vec![Bond { i: 0, j: 1 }]);
        assert_relative_eq!(
            vibrational_factor(&dimer(1.0), &alpha).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-14
        );
    }

    #[test]
    fn rigid_basis_is_orthonormal() {
        let basis = rigid_body_tangents(&octahedron()).unwrap();
        assert_eq!(basis.dim(), 6);
        let m = basis.matrix(18);
        let gram = m.transpose() * &m;
        assert!((gram - DMatrix::identity(6, 6)).amax() < 1e-10);
        // translation patterns
        let t = &basis.vectors[0];
        assert_relative_eq!(t[0], 1.0 / 6f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(t[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn collinear_is_rejected() {
        let x = Configuration::from_points(&[[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert!(matches!(rigid_body_tangents(&x), Err(Error::Collinear)));
        assert!(rotational_factor(&x).is_err());
    }

    #[test]
    fn projection_of_stretched_dimer() {
        let alpha = ConstraintSet::new(vec![Bond { i: 0, j: 1 }]);
        let x = Configuration::from_points(&[[0.0; 3], [1.01, 0.0, 0.0]]);
        let p = newton_project(&x, &alpha, PROJECTION_TOL).unwrap();
        assert!(bond_excess(&p, alpha.bonds()[0]).abs() < PROJECTION_TOL);
        let d = p.point(1) - p.point(0);
        assert_relative_eq!(d.y, 0.0);
        assert!(d.x > 0.0);
    }

    #[test]
    fn projection_fixes_points_on_manifold() {
        let x = octahedron();
        let alpha = unit_bonds(&x);
        let p = newton_project(&x, &alpha, PROJECTION_TOL).unwrap();
        assert!((p.to_dvector() - x.to_dvector()).amax() < 1e-12);
    }

    #[test]
    fn inertia_scales_cubically() {
        let x = octahedron();
        let scaled = Configuration::new(x.as_slice().iter().map(|v| 1.7 * v).collect()).unwrap();
        assert_relative_eq!(
            rotational_factor(&scaled).unwrap(),
            1.7f64.powi(3) * rotational_factor(&x).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn quotient_distance_ignores_rigid_motion() {
        let x = octahedron().displaced(&DVector::from_fn(18, |i, _| 0.03 * ((i * 7 % 5) as f64 - 2.0)), 1.0);
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        let y = x.transformed(&rot, &Vector3::new(0.5, -2.0, 1.0));
        assert!(quotient_distance(&x, &y).unwrap() < 1e-8);
        assert_eq!(quotient_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn quotient_distance_of_internal_step() {
        let x = octahedron();
        let alpha = unit_bonds(&x);
        let alpha = alpha.without(alpha.bonds()[0]);
        let v = internal_tangents(&x, &alpha).unwrap().vectors[0].clone();
        let ds = 1e-3;
        let y = newton_project(&x.displaced(&v, ds), &alpha, PROJECTION_TOL).unwrap();
        let d = quotient_distance(&x, &y).unwrap();
        assert!((d - ds).abs() < 10.0 * ds * ds, "d = {d}");
        assert_eq!(d, quotient_distance(&y, &x).unwrap());
    }

    #[test]
    fn superposition_detects_mirror_images() {
        let x = octahedron().displaced(&DVector::from_fn(18, |i, _| 0.02 * (i as f64).sin()), 1.0);
        let mirror = x.transformed(&Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)), &Vector3::zeros());
        let (_, rmsd_improper) = superpose(&x, &mirror, false);
        assert!(rmsd_improper < 1e-10);
    }
}
