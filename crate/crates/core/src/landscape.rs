//! The full landscape of one particle count: rigid clusters, lines, faces.

use serde::Serialize;

use crate::clusters::{rigid_multiplicity, shipped_catalog, ModeCatalog, MultiplicityConvention};
use crate::error::{Error, Result};
use crate::kinetics::{assemble_rates, group_near_modes, Grouping, RateNetwork};
use crate::manifold1d::{build_line_catalog, LineCatalog, WalkOptions};
use crate::manifold2d::{build_face_catalog, FaceCatalog, FaceOptions};
use crate::statmech::{LandscapeSummary, ModeRow};

#[derive(Clone, Copy, Debug, Default)]
pub struct LandscapeOptions {
    pub walk: WalkOptions,
    pub faces: FaceOptions,
    /// Skip the two-dimensional modes entirely.
    pub skip_faces: bool,
}

/// Every computed mode of dimension at most two.
#[derive(Clone, Debug)]
pub struct Landscape {
    pub n: usize,
    pub rigid: ModeCatalog,
    pub lines: LineCatalog,
    pub faces: Option<FaceCatalog>,
}

impl Landscape {
    /// Builds lines and faces on top of a rigid catalog.
    pub fn compute(rigid: ModeCatalog, opts: LandscapeOptions) -> Result<Self> {
        let lines = build_line_catalog(&rigid, opts.walk)?;
        log::info!("n={}: {} line classes", rigid.n, lines.lines.len());
        let faces = if opts.skip_faces {
            None
        } else {
            let first = rigid.len() + lines.lines.len() + 1;
            let f = build_face_catalog(&rigid, &lines, opts.faces, first)?;
            log::info!("n={}: {} face classes", rigid.n, f.faces.len());
            Some(f)
        };
        Ok(Self {
            n: rigid.n,
            rigid,
            lines,
            faces,
        })
    }

    /// Convenience wrapper using the shipped rigid catalog.
    pub fn shipped(n: usize, opts: LandscapeOptions) -> Result<Self> {
        Self::compute(shipped_catalog(n)?, opts)
    }

    pub fn counts(&self) -> [usize; 3] {
        [
            self.rigid.len(),
            self.lines.lines.len(),
            self.faces.as_ref().map_or(0, |f| f.faces.len()),
        ]
    }

    /// Per-mode rows and totals with multiplicities in `convention`.
    pub fn summary(&self, convention: MultiplicityConvention) -> Result<LandscapeSummary> {
        let scale = convention_factor(&self.rigid, convention)?;
        let top = 3 * self.n - 6;
        let mut rows = Vec::new();
        for m in &self.rigid.rigid {
            rows.push(ModeRow {
                id: m.id,
                dimension: 0,
                bonds: top,
                mean_h: m.h,
                mean_inertia: m.inertia,
                volume: None,
                multiplicity: m.multiplicity * scale,
                zeta: m.h * m.inertia,
                corners: Vec::new(),
            });
        }
        for l in &self.lines.lines {
            rows.push(ModeRow {
                id: l.id,
                dimension: 1,
                bonds: top - 1,
                mean_h: l.mean_h(),
                mean_inertia: l.mean_inertia(),
                volume: Some(l.length),
                multiplicity: l.multiplicity * scale,
                zeta: l.zeta,
                corners: vec![l.endpoints.0, l.endpoints.1],
            });
        }
        for f in self.faces.iter().flat_map(|c| &c.faces) {
            rows.push(ModeRow {
                id: f.id,
                dimension: 2,
                bonds: top - 2,
                mean_h: f.mean_h,
                mean_inertia: f.mean_inertia,
                volume: Some(f.area),
                multiplicity: f.multiplicity * scale,
                zeta: f.zeta,
                corners: f.corners(),
            });
        }
        Ok(LandscapeSummary::totals(self.n, rows))
    }

    pub fn rates(&self) -> Result<RateNetwork> {
        assemble_rates(&self.rigid, &self.lines)
    }

    pub fn grouping(&self, threshold: f64) -> Grouping {
        group_near_modes(&self.rigid, &self.lines, threshold)
    }
}

/// Ratio between multiplicities in `convention` and the stored table values.
fn convention_factor(rigid: &ModeCatalog, convention: MultiplicityConvention) -> Result<u64> {
    let mut factor = None;
    for m in &rigid.rigid {
        let v = rigid_multiplicity(m, convention)?;
        if v % m.multiplicity != 0 {
            return Err(Error::NonIntegerMultiplicity(v as f64 / m.multiplicity as f64));
        }
        let f = v / m.multiplicity;
        match factor {
            None => factor = Some(f),
            Some(g) if g != f => {
                return Err(Error::Inconsistent(format!(
                    "convention {convention:?} rescales modes unevenly ({g} vs {f})"
                )))
            }
            _ => {}
        }
    }
    Ok(factor.unwrap_or(1))
}

/// Table-I style totals line.
#[derive(Clone, Debug, Serialize)]
pub struct TotalsRow {
    pub n: usize,
    pub count0: usize,
    pub count1: usize,
    pub count2: usize,
    pub z0: f64,
    pub z1: f64,
    pub z2: f64,
    pub ratio10: f64,
    pub ratio21: f64,
}

impl From<&LandscapeSummary> for TotalsRow {
    fn from(s: &LandscapeSummary) -> Self {
        Self {
            n: s.n,
            count0: s.counts[0],
            count1: s.counts[1],
            count2: s.counts[2],
            z0: s.z[0],
            z1: s.z[1],
            z2: s.z[2],
            ratio10: s.z[1] / s.z[0],
            ratio21: s.z[2] / s.z[1],
        }
    }
}
