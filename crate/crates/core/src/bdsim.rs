//! Overdamped Langevin dynamics of short-range attractive spheres.
//!
//! This is the verification harness for the asymptotic landscape: a forward
//! Euler integrator for `dx = -∇U dt + √(2 dt) ξ` with `D = β = 1`, an
//! online classifier that maps the current contact graph to a catalogued
//! mode, and bookkeeping of occupation times and rigid-to-rigid transitions.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::clusters::ModeCatalog;
use crate::error::{Error, Result};
use crate::geom::Configuration;
use crate::graph::ContactGraph;
use crate::manifold1d::LineCatalog;
use crate::manifold2d::FaceCatalog;
use crate::statmech::{kappa_closed_form, kappa_quadrature, PotentialSpec};

/// Soft spherical wall around the center of mass.
///
/// Without it a detached sphere diffuses away and, in three dimensions,
/// need never return. The default radius is far outside any bonded
/// arrangement of up to eight spheres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Wall {
    pub radius: f64,
    pub stiffness: f64,
}

impl Default for Wall {
    fn default() -> Self {
        Self {
            radius: 3.0,
            stiffness: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimParams {
    pub n: usize,
    pub potential: PotentialSpec,
    pub dt: f64,
    pub total_time: f64,
    pub classify_interval: f64,
    /// Pairs closer than this count as bonded when classifying.
    pub bond_cutoff: f64,
    pub seed: u64,
    pub replicas: usize,
    pub wall: Option<Wall>,
}

/// Largest stable-in-practice time step: one sixth of `1/(m² U''(1))`.
pub fn default_dt(depth: f64, range: f64, core: f64) -> f64 {
    1.0 / 6.0 / (core * core * 2.0 * depth * range * range)
}

impl SimParams {
    /// Morse-with-core parameters with every other setting at its default.
    pub fn morse(n: usize, depth: f64, range: f64) -> Self {
        Self {
            n,
            potential: PotentialSpec::morse(depth, range),
            dt: default_dt(depth, range, 2.0),
            total_time: 100.0,
            classify_interval: 1e-2,
            bond_cutoff: 1.0 + 2.0 / range,
            seed: 0,
            replicas: 1,
            wall: Some(Wall::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        let bad = |msg: &str| Error::Parse {
            line: 0,
            msg: msg.to_string(),
        };
        if self.n < 2 || self.n > crate::graph::MAX_VERTICES {
            return Err(bad("n must be between 2 and 16"));
        }
        if let PotentialSpec::MorseWithCore {
            depth, range, core, ..
        } = self.potential
        {
            if self.dt > default_dt(depth, range, core) * (1.0 + 1e-12) {
                return Err(bad("dt exceeds (1/6)/(m^2 U''(1))"));
            }
        }
        if !(self.dt > 0.0 && self.total_time > 0.0 && self.classify_interval >= self.dt) {
            return Err(bad("dt, total_time and classify_interval must be positive with dt <= classify_interval"));
        }
        if self.replicas == 0 {
            return Err(bad("replicas must be at least 1"));
        }
        Ok(())
    }

    /// Sticky parameter of the simulated potential.
    pub fn kappa(&self) -> Result<f64> {
        Ok(kappa_closed_form(&self.potential)?.kappa)
    }

    /// Exact well weight of the simulated potential; see [`kappa_quadrature`].
    pub fn kappa_quadrature(&self) -> Result<f64> {
        Ok(kappa_quadrature(&self.potential)?.kappa)
    }

    /// Parses a `key = value` run file. Recognized keys are `n`, `E`, `rho`,
    /// `m`, `dt`, `total_time`, `seed`, `classify_interval`, `replicas`,
    /// `wall_radius` (0 disables the wall) and `wall_stiffness`. Blank lines
    /// and `#` comments are ignored.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: k + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            kv.insert(key.trim().to_string(), (k + 1, value.trim().to_string()));
        }
        fn take<T: std::str::FromStr>(kv: &mut BTreeMap<String, (usize, String)>, key: &str) -> Result<Option<T>> {
            match kv.remove(key) {
                None => Ok(None),
                Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad value for {key}: {v:?}"),
                }),
            }
        }
        let missing = |key: &str| Error::Parse {
            line: 0,
            msg: format!("missing key {key}"),
        };
        let n: usize = take(&mut kv, "n")?.ok_or_else(|| missing("n"))?;
        let depth: f64 = take(&mut kv, "E")?.ok_or_else(|| missing("E"))?;
        let range: f64 = take(&mut kv, "rho")?.ok_or_else(|| missing("rho"))?;
        let core: f64 = take(&mut kv, "m")?.unwrap_or(2.0);
        let mut p = Self::morse(n, depth, range);
        if let PotentialSpec::MorseWithCore { core: c, .. } = &mut p.potential {
            *c = core;
        }
        p.dt = take(&mut kv, "dt")?.unwrap_or(default_dt(depth, range, core));
        if let Some(t) = take(&mut kv, "total_time")? {
            p.total_time = t;
        }
        if let Some(s) = take(&mut kv, "seed")? {
            p.seed = s;
        }
        if let Some(c) = take(&mut kv, "classify_interval")? {
            p.classify_interval = c;
        }
        if let Some(r) = take(&mut kv, "replicas")? {
            p.replicas = r;
        }
        let radius: Option<f64> = take(&mut kv, "wall_radius")?;
        let stiffness: Option<f64> = take(&mut kv, "wall_stiffness")?;
        p.wall = match radius {
            Some(r) if r <= 0.0 => None,
            r => Some(Wall {
                radius: r.unwrap_or(Wall::default().radius),
                stiffness: stiffness.unwrap_or(Wall::default().stiffness),
            }),
        };
        if let Some((key, (line, _))) = kv.into_iter().next() {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key {key}"),
            });
        }
        p.validate()?;
        Ok(p)
    }

    pub fn to_config(&self) -> String {
        let PotentialSpec::MorseWithCore {
            depth, range, core, ..
        } = self.potential
        else {
            return String::new();
        };
        let (radius, stiffness) = self.wall.map_or((0.0, 0.0), |w| (w.radius, w.stiffness));
        format!(
            "n = {}\nE = {depth}\nrho = {range}\nm = {core}\ndt = {:e}\ntotal_time = {}\nseed = {}\nclassify_interval = {}\nreplicas = {}\nwall_radius = {radius}\nwall_stiffness = {stiffness}\n",
            self.n, self.dt, self.total_time, self.seed, self.classify_interval, self.replicas
        )
    }
}

/// Energy and radial force of the pair potential at separation `r`.
pub fn potential_eval(r: f64, spec: &PotentialSpec) -> (f64, f64) {
    spec.eval(r)
}

/// Writes `-∇U` into `force` and returns the total energy.
pub fn forces(x: &[[f64; 3]], params: &SimParams, force: &mut [[f64; 3]]) -> f64 {
    let n = x.len();
    let rc = match params.potential {
        PotentialSpec::MorseWithCore { cutoff, .. } => cutoff,
        PotentialSpec::Tabulated { ref r, .. } => *r.last().unwrap_or(&0.0),
    };
    let rc2 = rc * rc;
    force.iter_mut().for_each(|f| *f = [0.0; 3]);
    let mut energy = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = [x[j][0] - x[i][0], x[j][1] - x[i][1], x[j][2] - x[i][2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if r2 >= rc2 {
                continue;
            }
            let r = r2.sqrt();
            let (u, f) = params.potential.eval(r);
            energy += u;
            // f is -dU/dr; positive pushes j away from i.
            for k in 0..3 {
                let c = f * d[k] / r;
                force[j][k] += c;
                force[i][k] -= c;
            }
        }
    }
    if let Some(w) = params.wall {
        let mut com = [0.0; 3];
        for p in x {
            for k in 0..3 {
                com[k] += p[k] / n as f64;
            }
        }
        let mut back = [0.0; 3];
        for (i, p) in x.iter().enumerate() {
            let d = [p[0] - com[0], p[1] - com[1], p[2] - com[2]];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if r > w.radius {
                let excess = r - w.radius;
                energy += 0.5 * w.stiffness * excess * excess;
                for k in 0..3 {
                    let c = w.stiffness * excess * d[k] / r;
                    force[i][k] -= c;
                    back[k] += c;
                }
            }
        }
        // The center of mass depends on every particle.
        for f in force.iter_mut() {
            for k in 0..3 {
                f[k] += back[k] / n as f64;
            }
        }
    }
    energy
}

/// One forward Euler step. `noise` supplies standard normal variates; a
/// closure returning zero gives the deterministic gradient flow.
pub fn step(x: &mut [[f64; 3]], params: &SimParams, force: &mut [[f64; 3]], noise: &mut impl FnMut() -> f64) {
    forces(x, params, force);
    let dt = params.dt;
    let amp = (2.0 * dt).sqrt();
    for (p, f) in x.iter_mut().zip(force.iter()) {
        for k in 0..3 {
            p[k] += f[k] * dt + amp * noise();
        }
    }
}

/// Identity of a catalogued mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ModeKey {
    pub dimension: usize,
    pub id: usize,
}

/// Lookup from canonical contact-graph code to catalogued mode.
///
/// Distinct classes can share a contact graph when its manifold has several
/// components. The classifier cannot tell them apart, so such classes are
/// reported under the smallest id and listed in `aliases`.
#[derive(Clone, Debug, Default)]
pub struct ModeIndex {
    pub n: usize,
    codes: HashMap<u128, ModeKey>,
    pub aliases: BTreeMap<usize, Vec<usize>>,
}

impl ModeIndex {
    pub fn new(rigid: &ModeCatalog, lines: Option<&LineCatalog>, faces: Option<&FaceCatalog>) -> Self {
        let mut idx = Self {
            n: rigid.n,
            ..Self::default()
        };
        for m in &rigid.rigid {
            idx.insert(m.graph.canonical_code(), 0, m.id);
        }
        for l in lines.into_iter().flat_map(|c| &c.lines) {
            idx.insert(l.code, 1, l.id);
        }
        for f in faces.into_iter().flat_map(|c| &c.faces) {
            idx.insert(f.code, 2, f.id);
        }
        idx
    }

    /// Index over explicit `(dimension, id, graph)` triples, as stored in a
    /// landscape export.
    pub fn from_graphs(n: usize, graphs: &[(usize, usize, ContactGraph)]) -> Self {
        let mut idx = Self {
            n,
            ..Self::default()
        };
        for (dimension, id, g) in graphs {
            idx.insert(g.canonical_code(), *dimension, *id);
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    fn insert(&mut self, code: u128, dimension: usize, id: usize) {
        match self.codes.get(&code) {
            Some(k) => self.aliases.entry(k.id).or_default().push(id),
            None => {
                self.codes.insert(code, ModeKey { dimension, id });
            }
        }
    }

    pub fn get(&self, graph: &ContactGraph) -> Option<ModeKey> {
        self.codes.get(&graph.canonical_code()).copied()
    }

    /// The id a class is reported under by the classifier.
    pub fn representative(&self, id: usize) -> usize {
        self.aliases
            .iter()
            .find(|(_, v)| v.contains(&id))
            .map_or(id, |(k, _)| *k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classified {
    Mode(ModeKey),
    /// Fewer than `3n - 8` bonds.
    Unclassified,
    /// Enough bonds but no catalogued graph: a mode missing from the catalogs.
    Unknown { bonds: usize },
}

/// Maps a configuration to a catalogued mode by its contact graph at `cutoff`.
pub fn classify(x: &Configuration, cutoff: f64, index: &ModeIndex) -> (Classified, ContactGraph) {
    let g = ContactGraph::from_configuration(x, cutoff);
    let bonds = g.edge_count();
    let n = x.n();
    let c = if bonds + 8 < 3 * n {
        Classified::Unclassified
    } else {
        match index.get(&g) {
            Some(k) => Classified::Mode(k),
            None => Classified::Unknown { bonds },
        }
    };
    (c, g)
}

/// Accumulated statistics of one or more trajectories.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SimTrace {
    pub n: usize,
    pub seeds: Vec<u64>,
    /// Classified time per mode id.
    pub occupancy: BTreeMap<usize, f64>,
    /// Time in dimension 0, 1, 2, and unclassified.
    pub dimension_time: [f64; 4],
    /// Rigid-to-rigid transition counts keyed by (from, to).
    #[serde(serialize_with = "serialize_pairs")]
    pub transitions: BTreeMap<(usize, usize), u64>,
    /// Samples with at least `3n - 8` bonds that matched no catalogued mode.
    pub anomalies: u64,
    /// Times at which the classified mode changed, with the new mode id
    /// (`None` when unclassified). Only kept for single trajectories.
    pub events: Vec<(f64, Option<usize>)>,
    pub elapsed: f64,
    pub wall_seconds: f64,
}

fn serialize_pairs<S: serde::Serializer>(m: &BTreeMap<(usize, usize), u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<(usize, usize, u64)> = m.iter().map(|(&(a, b), &c)| (a, b, c)).collect();
    rows.serialize(s)
}

impl SimTrace {
    pub fn merge(mut self, other: SimTrace) -> Self {
        self.seeds.extend(other.seeds);
        for (k, v) in other.occupancy {
            *self.occupancy.entry(k).or_default() += v;
        }
        for k in 0..4 {
            self.dimension_time[k] += other.dimension_time[k];
        }
        for (k, v) in other.transitions {
            *self.transitions.entry(k).or_default() += v;
        }
        self.anomalies += other.anomalies;
        self.events.clear();
        self.elapsed += other.elapsed;
        self.wall_seconds += other.wall_seconds;
        self
    }

    /// Fraction of dimension-`p` time spent in each mode of that dimension.
    pub fn probabilities(&self, index: &ModeIndex, p: usize) -> BTreeMap<usize, f64> {
        let total = self.dimension_time[p];
        self.occupancy
            .iter()
            .filter(|(id, _)| index.codes.values().any(|k| k.id == **id && k.dimension == p))
            .map(|(&id, &t)| (id, if total > 0.0 { t / total } else { 0.0 }))
            .collect()
    }

    /// Simulated `Z_{p+1}/Z_p`, estimated as `(time in p+1)/(time in p)` times κ.
    pub fn ratio(&self, p: usize, kappa: f64) -> f64 {
        kappa * self.dimension_time[p + 1] / self.dimension_time[p]
    }

    pub fn count(&self, a: usize, b: usize) -> u64 {
        self.transitions.get(&(a, b)).copied().unwrap_or(0)
    }
}

/// Samples a rigid cluster with probability `n_α ζ_α / Z_0` and returns its representative.
pub fn initial_condition(catalog: &ModeCatalog, seed: u64) -> Result<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let total = catalog.z0();
    let mut u = rng.random::<f64>() * total;
    for m in &catalog.rigid {
        u -= m.z();
        if u <= 0.0 {
            return Ok(m.representative.centered());
        }
    }
    catalog
        .rigid
        .last()
        .map(|m| m.representative.centered())
        .ok_or_else(|| Error::Missing("empty rigid catalog".into()))
}

/// Runs one trajectory from `start`.
pub fn run(params: &SimParams, index: &ModeIndex, start: &Configuration) -> Result<SimTrace> {
    params.validate()?;
    if start.n() != params.n || index.n != params.n {
        return Err(Error::Inconsistent(format!(
            "simulation n={} but start has n={} and catalogs n={}",
            params.n,
            start.n(),
            index.n
        )));
    }
    let clock = Instant::now();
    let n = params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut noise = || rng.sample::<f64, _>(StandardNormal);
    let mut x: Vec<[f64; 3]> = (0..n).map(|i| start.point(i).into()).collect();
    let mut f = vec![[0.0; 3]; n];
    let steps_per_sample = (params.classify_interval / params.dt).round().max(1.0) as u64;
    let interval = steps_per_sample as f64 * params.dt;
    let samples = (params.total_time / interval).ceil() as u64;

    let mut trace = SimTrace {
        n,
        seeds: vec![params.seed],
        ..SimTrace::default()
    };
    let mut last_rigid: Option<(ContactGraph, usize)> = None;
    let mut last_mode: Option<Option<usize>> = None;
    let mut conf = start.clone();
    for k in 0..samples {
        for _ in 0..steps_per_sample {
            step(&mut x, params, &mut f, &mut noise);
        }
        let t = (k + 1) as f64 * interval;
        for (i, p) in x.iter().enumerate() {
            conf.set_point(i, &(*p).into());
        }
        let (c, g) = classify(&conf, params.bond_cutoff, index);
        let mode = match c {
            Classified::Mode(key) => {
                trace.dimension_time[key.dimension] += interval;
                *trace.occupancy.entry(key.id).or_default() += interval;
                if key.dimension == 0 {
                    if let Some((prev, prev_id)) = &last_rigid {
                        if *prev != g {
                            *trace.transitions.entry((*prev_id, key.id)).or_default() += 1;
                        }
                    }
                    last_rigid = Some((g, key.id));
                }
                Some(key.id)
            }
            Classified::Unclassified => {
                trace.dimension_time[3] += interval;
                None
            }
            Classified::Unknown { bonds } => {
                trace.dimension_time[3] += interval;
                trace.anomalies += 1;
                log::warn!("t={t:.3}: {bonds}-bond contact graph not in the catalogs");
                None
            }
        };
        if last_mode != Some(mode) {
            trace.events.push((t, mode));
            last_mode = Some(mode);
        }
    }
    trace.elapsed = samples as f64 * interval;
    trace.wall_seconds = clock.elapsed().as_secs_f64();
    Ok(trace)
}

/// Runs `params.replicas` independent trajectories with seeds `seed, seed+1, …`
/// and merges their statistics.
pub fn run_replicas(params: &SimParams, index: &ModeIndex, catalog: &ModeCatalog) -> Result<SimTrace> {
    let traces: Vec<SimTrace> = (0..params.replicas as u64)
        .into_par_iter()
        .map(|k| {
            let p = SimParams {
                seed: params.seed.wrapping_add(k),
                ..params.clone()
            };
            let start = initial_condition(catalog, p.seed)?;
            run(&p, index, &start)
        })
        .collect::<Result<_>>()?;
    let single = traces.len() == 1;
    let mut it = traces.into_iter();
    let first = it.next().ok_or_else(|| Error::Missing("no replicas".into()))?;
    let merged = if single { first } else { it.fold(first, SimTrace::merge) };
    Ok(merged)
}

/// Spearman rank correlation with average ranks for ties.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut e = k;
            while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[k]] {
                e += 1;
            }
            let avg = 0.5 * (k + e) as f64 + 1.0;
            for &i in &idx[k..=e] {
                r[i] = avg;
            }
            k = e + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - mean) * (y - mean)).sum();
    let va: f64 = ra.iter().map(|x| (x - mean).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mean).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusters::shipped_catalog;
    use approx::assert_relative_eq;

    #[test]
    fn potential_truncation_and_minimum() {
        let p = SimParams::morse(2, 8.5, 30.0);
        let rc = 1.0 + 4.0 / 30.0;
        assert_eq!(potential_eval(rc, &p.potential), (0.0, 0.0));
        // The linear truncation term tilts the well, moving the minimum just
        // past contact where the Morse slope balances U'(r_c).
        let (u1, _) = potential_eval(1.0, &p.potential);
        let c: f64 = 9.169889893024159 / (2.0 * 8.5 * 30.0);
        let r_min = 1.0 - ((1.0 + (1.0 - 4.0 * c).sqrt()) / 2.0).ln() / 30.0;
        let (u_min, f_min) = potential_eval(r_min, &p.potential);
        assert!(f_min.abs() < 1e-8, "{f_min}");
        assert!(u_min < u1 && u1 - u_min < 0.1);
        for r in [0.97, 0.99, 1.05, 1.1] {
            assert!(potential_eval(r, &p.potential).0 > u1);
        }
    }

    #[test]
    fn zero_noise_zero_force_is_stationary() {
        let p = SimParams::morse(3, 8.5, 30.0);
        let mut x = vec![[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [0.0, 5.0, 0.0]];
        let p = SimParams { wall: None, ..p };
        let before = x.clone();
        let mut f = vec![[0.0; 3]; 3];
        step(&mut x, &p, &mut f, &mut || 0.0);
        assert_eq!(x, before);
    }

    #[test]
    fn forces_match_energy_gradient() {
        let p = SimParams {
            wall: Some(Wall {
                radius: 0.6,
                stiffness: 50.0,
            }),
            ..SimParams::morse(3, 8.5, 30.0)
        };
        let x = vec![[0.0, 0.0, 0.0], [1.02, 0.0, 0.0], [0.5, 0.98, 0.1]];
        let mut f = vec![[0.0; 3]; 3];
        forces(&x, &p, &mut f);
        let mut scratch = vec![[0.0; 3]; 3];
        let h = 1e-6;
        for i in 0..3 {
            for k in 0..3 {
                let mut a = x.clone();
                let mut b = x.clone();
                a[i][k] += h;
                b[i][k] -= h;
                let g = (forces(&a, &p, &mut scratch) - forces(&b, &p, &mut scratch)) / (2.0 * h);
                assert!((f[i][k] + g).abs() < 1e-4 * g.abs().max(1.0), "{i} {k}: {} vs {}", f[i][k], -g);
            }
        }
    }

    #[test]
    fn free_diffusion_variance() {
        let p = SimParams {
            wall: None,
            dt: 1e-3,
            ..SimParams::morse(1, 8.5, 30.0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut noise = || rng.sample::<f64, _>(StandardNormal);
        let trials = 2000;
        let steps = 100;
        let mut f = vec![[0.0; 3]];
        let mut acc = 0.0;
        for _ in 0..trials {
            let mut x = vec![[0.0; 3]];
            for _ in 0..steps {
                step(&mut x, &p, &mut f, &mut noise);
            }
            acc += x[0][0] * x[0][0];
        }
        let var = acc / trials as f64;
        let t = steps as f64 * p.dt;
        // Standard error of a chi-square sample mean: 2t sqrt(2/N).
        let se = 2.0 * t * (2.0 / trials as f64).sqrt();
        assert!((var - 2.0 * t).abs() < 3.0 * se, "{var} vs {}", 2.0 * t);
    }

    #[test]
    fn classification_of_octahedron_and_neighbours() {
        let cat = shipped_catalog(6).unwrap();
        let idx = ModeIndex::new(&cat, None, None);
        let octa = cat.rigid.iter().find(|m| m.sigma() == 24).unwrap();
        let (c, _) = classify(&octa.representative, 1.0 + 2.0 / 30.0, &idx);
        assert_eq!(
            c,
            Classified::Mode(ModeKey {
                dimension: 0,
                id: octa.id
            })
        );
        let spread = octa.representative.displaced(&(octa.representative.to_dvector() * 3.0), 1.0);
        assert_eq!(classify(&spread, 1.0 + 2.0 / 30.0, &idx).0, Classified::Unclassified);
    }

    #[test]
    fn config_round_trip() {
        let text = "# run\nn = 6\nE = 8.5\nrho = 30\ntotal_time = 2300\nseed = 11\n";
        let p = SimParams::from_config(text).unwrap();
        assert_eq!(p.n, 6);
        assert_eq!(p.seed, 11);
        assert_relative_eq!(p.dt, default_dt(8.5, 30.0, 2.0));
        assert_eq!(SimParams::from_config(&p.to_config()).unwrap(), p);
        assert!(SimParams::from_config("n = 6\nE = 8.5\n").is_err());
        assert!(SimParams::from_config("n = 6\nE = 8.5\nrho = 30\nbogus = 1\n").is_err());
        assert!(SimParams::from_config("n = 6\nE = 8.5\nrho = 30\ndt = 1e-3\n").is_err());
    }

    #[test]
    fn rank_correlation_basics() {
        assert_relative_eq!(rank_correlation(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_relative_eq!(rank_correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
    }
}
