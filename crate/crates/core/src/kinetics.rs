//! Transition rates between rigid clusters along one-dimensional modes.
//!
//! Along a line the committor solves a one-dimensional Smoluchowski
//! problem with weight `hI`, so it is a normalized running integral of
//! `(hI)^{-1}`. The flux through a line is `1/Q` with `Q = ∫ (hI)^{-1} ds`;
//! summing over lines and weighting by how many copies of each line leave
//! a cluster gives the rate matrix.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::clusters::ModeCatalog;
use crate::error::{Error, Result};
use crate::manifold1d::{LineCatalog, LineManifold};

/// Grouping threshold used when merging nearly identical clusters.
///
/// The close pairs for seven and eight spheres are joined by lines of
/// length 0.078 to 0.11, while every other pair of distinct clusters is at
/// least 0.38 apart, so any value in between gives the same groups.
pub const GROUPING_THRESHOLD: f64 = 0.12;

/// Committor `q(s)` along a line, from `q = 0` at the start cluster to `q = 1` at the far end.
#[derive(Clone, Debug, Serialize)]
pub struct CommittorProfile {
    pub line: usize,
    pub s: Vec<f64>,
    pub q: Vec<f64>,
}

pub fn committor(line: &LineManifold) -> Result<CommittorProfile> {
    if line.samples.iter().any(|p| !(p.h * p.inertia > 0.0)) {
        return Err(Error::Singular {
            expected: 1,
            found: 0,
        });
    }
    let mut acc = 0.0;
    let mut q = Vec::with_capacity(line.samples.len());
    q.push(0.0);
    for w in line.samples.windows(2) {
        let f0 = 1.0 / (w[0].h * w[0].inertia);
        let f1 = 1.0 / (w[1].h * w[1].inertia);
        acc += 0.5 * (w[1].s - w[0].s) * (f0 + f1);
        q.push(acc);
    }
    for v in &mut q {
        *v /= acc;
    }
    Ok(CommittorProfile {
        line: line.id,
        s: line.samples.iter().map(|p| p.s).collect(),
        q,
    })
}

/// Whether rates count every transition or only those that do not pass
/// through a floppy intermediate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub enum RateKind {
    #[default]
    Geometric,
    /// Geometric rates times `1 / (1 + Z_1/(κ Z_0))`.
    Restricted { kappa: f64 },
}

/// Rates `R_ab` between rigid clusters, indexed by mode id order of the catalog.
#[derive(Clone, Debug, Serialize)]
pub struct RateNetwork {
    /// Mode id of each row and column.
    pub modes: Vec<usize>,
    #[serde(serialize_with = "serialize_matrix")]
    pub rates: DMatrix<f64>,
    pub z0: f64,
    pub z1: f64,
    /// `n_a ζ_a` per mode, same order as `modes`.
    pub weights: Vec<f64>,
    pub kind: RateKind,
}

fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

impl RateNetwork {
    fn index(&self, id: usize) -> Option<usize> {
        self.modes.iter().position(|&m| m == id)
    }

    /// `R_ab` by mode id.
    pub fn rate(&self, a: usize, b: usize) -> Option<f64> {
        Some(self.rates[(self.index(a)?, self.index(b)?)])
    }

    /// Equilibrium fraction `π_a = n_a ζ_a / Z_0` among rigid clusters.
    pub fn occupancy(&self, a: usize) -> Option<f64> {
        Some(self.weights[self.index(a)?] / self.z0)
    }

    /// Per-cluster rate of leaving `a` towards `b`, `R_ab / π_a`.
    pub fn outgoing_rate(&self, a: usize, b: usize) -> Option<f64> {
        Some(self.rate(a, b)? / self.occupancy(a)?)
    }

    /// Rates with the floppy-intermediate correction at sticky parameter `kappa`.
    pub fn restricted(&self, kappa: f64) -> Self {
        let factor = 1.0 / (1.0 + self.z1 / (kappa * self.z0));
        Self {
            rates: &self.rates * factor,
            kind: RateKind::Restricted { kappa },
            ..self.clone()
        }
    }

    /// Expected transition counts `R T / κ` over a run of length `duration`.
    pub fn expected_counts(&self, kappa: f64, duration: f64) -> DMatrix<f64> {
        &self.rates * (duration / kappa)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.modes.len();
        (0..n).all(|i| (0..n).all(|j| (self.rates[(i, j)] - self.rates[(j, i)]).abs() <= tol * self.rates[(i, j)].abs().max(1.0)))
    }
}

/// Assembles `R_ab = Z_0^{-1} Σ_k n_a ν_{a,k} / Q_k`.
///
/// A line joining a cluster to itself is counted once from each end, so
/// `n_a ν_{a,k} = 2 n_k` and self rates carry the factor two automatically.
pub fn assemble_rates(catalog: &ModeCatalog, lines: &LineCatalog) -> Result<RateNetwork> {
    let modes: Vec<usize> = catalog.rigid.iter().map(|m| m.id).collect();
    let pos: BTreeMap<usize, usize> = modes.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let z0 = catalog.z0();
    let mut rates = DMatrix::zeros(modes.len(), modes.len());
    for line in &lines.lines {
        if !(line.q > 0.0) {
            return Err(Error::Singular {
                expected: 1,
                found: 0,
            });
        }
        let (a, b) = line.endpoints;
        let (Some(&ia), Some(&ib)) = (pos.get(&a), pos.get(&b)) else {
            log::warn!("line {} ends at an unidentified cluster; left out of the rates", line.id);
            continue;
        };
        let na = catalog.rigid[ia].multiplicity as f64;
        let nb = catalog.rigid[ib].multiplicity as f64;
        let from_a = na * lines.nu(a, line.id) as f64 / line.q;
        if a == b {
            rates[(ia, ia)] += from_a / z0;
        } else {
            let from_b = nb * lines.nu(b, line.id) as f64 / line.q;
            if (from_a - from_b).abs() > 1e-9 * from_a.max(from_b) {
                return Err(Error::NonIntegerMultiplicity(from_a / from_b));
            }
            rates[(ia, ib)] += from_a / z0;
            rates[(ib, ia)] += from_b / z0;
        }
    }
    Ok(RateNetwork {
        weights: catalog.rigid.iter().map(|m| m.z()).collect(),
        modes,
        rates,
        z0,
        z1: lines.z1(),
        kind: RateKind::Geometric,
    })
}

/// Clusters merged because they are joined by a very short line.
#[derive(Clone, Debug, Serialize)]
pub struct Grouping {
    /// Group index of each mode, same order as the catalog.
    pub group_of: BTreeMap<usize, usize>,
    pub groups: Vec<Vec<usize>>,
    pub threshold: f64,
}

/// Merges rigid clusters whose shortest connecting line is shorter than
/// `threshold` in quotient arc length. Lines joining a cluster to itself
/// are ignored.
pub fn group_near_modes(catalog: &ModeCatalog, lines: &LineCatalog, threshold: f64) -> Grouping {
    let ids: Vec<usize> = catalog.rigid.iter().map(|m| m.id).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for line in &lines.lines {
        let (a, b) = line.endpoints;
        if a == b || line.length >= threshold {
            continue;
        }
        let (Some(ia), Some(ib)) = (ids.iter().position(|&m| m == a), ids.iter().position(|&m| m == b)) else {
            continue;
        };
        let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut roots: BTreeMap<usize, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of = BTreeMap::new();
    for i in 0..ids.len() {
        let r = find(&mut parent, i);
        let g = *roots.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(ids[i]);
        group_of.insert(ids[i], g);
    }
    Grouping {
        group_of,
        groups,
        threshold,
    }
}

impl Grouping {
    /// Sums rates between groups. Transitions inside a group are dropped,
    /// since a trajectory cannot resolve them.
    pub fn coarse_rates(&self, network: &RateNetwork) -> DMatrix<f64> {
        let k = self.groups.len();
        let mut out = DMatrix::zeros(k, k);
        for (i, a) in network.modes.iter().enumerate() {
            for (j, b) in network.modes.iter().enumerate() {
                let (ga, gb) = (self.group_of[a], self.group_of[b]);
                if ga != gb || a == b {
                    out[(ga, gb)] += network.rates[(i, j)];
                }
            }
        }
        out
    }

    pub fn is_trivial(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Configuration;
    use crate::manifold1d::Sample;
    use approx::assert_relative_eq;

    fn synthetic_line(f: impl Fn(f64) -> f64) -> LineManifold {
        let samples = (0..=100)
            .map(|k| {
                let s = 0.01 * k as f64;
                Sample {
                    x: Configuration::new(vec![0.0; 6]).unwrap(),
                    s,
                    h: f(s),
                    inertia: 1.0,
                }
            })
            .collect();
        LineManifold {
            id: 3,
            alpha: Default::default(),
            samples,
            endpoints: (1, 2),
            length: 1.0,
            zeta: 0.0,
            q: 0.0,
            multiplicity: 1,
            code: 0,
        }
    }

    #[test]
    fn constant_weight_gives_linear_committor() {
        let c = committor(&synthetic_line(|_| 2.0)).unwrap();
        for (s, q) in c.s.iter().zip(&c.q) {
            assert_relative_eq!(*s, *q, epsilon = 1e-12);
        }
    }

    #[test]
    fn committor_is_monotone_and_pinned() {
        let c = committor(&synthetic_line(|s| 0.1 + s * s)).unwrap();
        assert_eq!(c.q[0], 0.0);
        assert_relative_eq!(*c.q.last().unwrap(), 1.0, epsilon = 1e-14);
        assert!(c.q.windows(2).all(|w| w[1] > w[0]));
        // Small weight near s = 0 makes the committor rise steeply there.
        assert!(c.q[10] > 0.2);
    }

    #[test]
    fn vanishing_weight_is_rejected() {
        assert!(committor(&synthetic_line(|s| s)).is_err());
    }
}
