//! Plain-text exports of catalogs, summaries, rates and simulation traces.
//!
//! Every CSV starts with one `#` line stating units and provenance, then a
//! header row. Readers that honour `#` comments (the `csv` crate with
//! `comment(Some(b'#'))`, pandas with `comment="#"`) load them directly.

use std::io::Write;

use serde::Serialize;

use crate::bdsim::SimTrace;
use crate::error::{Error, Result};
use crate::kinetics::{committor, RateNetwork};
use crate::landscape::{Landscape, TotalsRow};
use crate::manifold1d::LineCatalog;
use crate::manifold2d::FaceCatalog;
use crate::statmech::LandscapeSummary;

/// Units line shared by the geometric exports.
pub const GEOMETRIC_UNITS: &str = "geometric units: lengths in sphere diameters, volumes in the quotient (bond-distance) metric";

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_records<W: Write, T: Serialize>(mut out: W, note: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
    writeln!(out, "# {note}")?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

#[derive(Serialize)]
struct ModeRecord {
    mode: usize,
    dimension: usize,
    bonds: usize,
    mean_h: f64,
    mean_inertia: f64,
    volume: Option<f64>,
    multiplicity: u64,
    zeta: f64,
    z: f64,
    free_energy: Option<f64>,
    corners: String,
}

/// Per-mode table: mode, h̄, Ī, S, n_α, ζ_α, n_α ζ_α, corners, and the free
/// energy at `kappa` when given.
pub fn write_modes<W: Write>(out: W, summary: &LandscapeSummary, kappa: Option<f64>) -> Result<()> {
    let rows = summary.rows.iter().map(|r| ModeRecord {
        mode: r.id,
        dimension: r.dimension,
        bonds: r.bonds,
        mean_h: r.mean_h,
        mean_inertia: r.mean_inertia,
        volume: r.volume,
        multiplicity: r.multiplicity,
        zeta: r.zeta,
        z: r.z(),
        free_energy: kappa.map(|k| summary.free_energy(r, k)),
        corners: join(&r.corners),
    });
    write_records(out, &format!("{GEOMETRIC_UNITS}; free energy in k_B T"), rows)
}

pub fn write_totals<W: Write>(out: W, summary: &LandscapeSummary) -> Result<()> {
    write_records(out, GEOMETRIC_UNITS, [TotalsRow::from(summary)])
}

#[derive(Serialize)]
struct LineRecord {
    line: usize,
    start: usize,
    end: usize,
    length: f64,
    zeta: f64,
    q: f64,
    mean_h: f64,
    mean_inertia: f64,
    multiplicity: u64,
    bonds: String,
}

pub fn write_lines<W: Write>(out: W, lines: &LineCatalog) -> Result<()> {
    let rows = lines.lines.iter().map(|l| LineRecord {
        line: l.id,
        start: l.endpoints.0,
        end: l.endpoints.1,
        length: l.length,
        zeta: l.zeta,
        q: l.q,
        mean_h: l.mean_h(),
        mean_inertia: l.mean_inertia(),
        multiplicity: l.multiplicity,
        bonds: l.alpha.bonds().iter().map(ToString::to_string).collect::<Vec<_>>().join(" "),
    });
    write_records(out, GEOMETRIC_UNITS, rows)
}

#[derive(Serialize)]
struct LineSampleRecord {
    line: usize,
    s: f64,
    h: f64,
    inertia: f64,
    committor: f64,
}

/// Arc length, `h`, `I` and committor along every line.
pub fn write_line_samples<W: Write>(out: W, lines: &LineCatalog) -> Result<()> {
    let mut rows = Vec::new();
    for l in &lines.lines {
        let q = committor(l)?;
        for (p, qv) in l.samples.iter().zip(q.q) {
            rows.push(LineSampleRecord {
                line: l.id,
                s: p.s,
                h: p.h,
                inertia: p.inertia,
                committor: qv,
            });
        }
    }
    write_records(out, GEOMETRIC_UNITS, rows)
}

#[derive(Serialize)]
struct FaceRecord {
    face: usize,
    corners: String,
    edges: String,
    area: f64,
    zeta: f64,
    mean_h: f64,
    mean_inertia: f64,
    multiplicity: u64,
    vertices: usize,
    triangles: usize,
    min_quality: f64,
}

pub fn write_faces<W: Write>(out: W, faces: &FaceCatalog) -> Result<()> {
    let rows = faces.faces.iter().map(|f| {
        let edges: Vec<usize> = f.boundary.edge_lines().into_iter().map(|e| e.unwrap_or(0)).collect();
        let mesh = f.mesh.as_ref();
        FaceRecord {
            face: f.id,
            corners: join(&f.corners()),
            edges: join(&edges),
            area: f.area,
            zeta: f.zeta,
            mean_h: f.mean_h,
            mean_inertia: f.mean_inertia,
            multiplicity: f.multiplicity,
            vertices: mesh.map_or(0, |m| m.points.len()),
            triangles: mesh.map_or(0, |m| m.triangles.len()),
            min_quality: mesh.map_or(f64::NAN, |m| m.min_quality()),
        }
    });
    write_records(out, &format!("{GEOMETRIC_UNITS}; edge 0 means an unidentified boundary line"), rows)
}

#[derive(Serialize)]
struct FaceJson<'a> {
    id: usize,
    bonds: Vec<String>,
    corners: Vec<usize>,
    edges: Vec<Option<usize>>,
    area: f64,
    zeta: f64,
    multiplicity: u64,
    planar: &'a [[f64; 2]],
    triangles: &'a [[usize; 3]],
    boundary: &'a [usize],
    h: &'a [f64],
    inertia: &'a [f64],
    /// Bond-distance embedding of each vertex.
    embedding: Vec<Vec<f64>>,
}

/// Meshes of every face with their planar parameterization and quotient embedding.
pub fn write_faces_json<W: Write>(out: W, faces: &FaceCatalog) -> Result<()> {
    let empty = crate::manifold2d::FaceMesh {
        points: Vec::new(),
        planar: Vec::new(),
        triangles: Vec::new(),
        boundary: Vec::new(),
        h: Vec::new(),
        inertia: Vec::new(),
        areas: Vec::new(),
        quality: Vec::new(),
    };
    let items: Vec<FaceJson> = faces
        .faces
        .iter()
        .map(|f| {
            let m = f.mesh.as_ref().unwrap_or(&empty);
            FaceJson {
                id: f.id,
                bonds: f.alpha.bonds().iter().map(ToString::to_string).collect(),
                corners: f.corners(),
                edges: f.boundary.edge_lines(),
                area: f.area,
                zeta: f.zeta,
                multiplicity: f.multiplicity,
                planar: &m.planar,
                triangles: &m.triangles,
                boundary: &m.boundary,
                h: &m.h,
                inertia: &m.inertia,
                embedding: m.points.iter().map(|p| p.bond_distances().0).collect(),
            }
        })
        .collect();
    serde_json::to_writer(out, &items).map_err(|e| Error::Io(e.into()))
}

#[derive(Serialize)]
struct RateRecord {
    from: usize,
    to: usize,
    geometric: f64,
    restricted: f64,
    outgoing: f64,
    expected_count: Option<f64>,
}

/// Rate matrix in long form with both conventions side by side.
///
/// The restricted column needs `kappa`. With a finite `kappa` and a
/// `duration`, the expected transition counts `R T / κ` are added using the
/// restricted rates when `restricted` is set and the geometric ones otherwise.
pub fn write_rates<W: Write>(
    out: W,
    network: &RateNetwork,
    kappa: f64,
    duration: Option<f64>,
    restricted: bool,
) -> Result<()> {
    let limited = network.restricted(kappa);
    let basis = if restricted { &limited } else { network };
    let counts = duration.filter(|_| kappa.is_finite()).map(|t| basis.expected_counts(kappa, t));
    let mut rows = Vec::new();
    for (i, &a) in network.modes.iter().enumerate() {
        for (j, &b) in network.modes.iter().enumerate() {
            rows.push(RateRecord {
                from: a,
                to: b,
                geometric: network.rates[(i, j)],
                restricted: limited.rates[(i, j)],
                outgoing: network.outgoing_rate(a, b).unwrap_or(f64::NAN),
                expected_count: counts.as_ref().map(|c| c[(i, j)]),
            });
        }
    }
    let basis = if restricted { "restricted" } else { "leading-order" };
    let note = format!(
        "rates are geometric; dimensional rates are kappa^-1 D/d^2 times the above; restricted uses kappa = {kappa}; expected counts use the {basis} rates"
    );
    write_records(out, &note, rows)
}

#[derive(Serialize)]
struct GraphRecord {
    mode: usize,
    dimension: usize,
    bonds: String,
}

/// Contact graph of every mode, enough to classify simulation snapshots
/// without recomputing the landscape.
pub fn write_graphs<W: Write>(out: W, landscape: &Landscape) -> Result<()> {
    let mut rows = Vec::new();
    let fmt = |b: &[crate::geom::Bond]| b.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    for m in &landscape.rigid.rigid {
        rows.push(GraphRecord {
            mode: m.id,
            dimension: 0,
            bonds: fmt(&m.graph.bonds()),
        });
    }
    for l in &landscape.lines.lines {
        rows.push(GraphRecord {
            mode: l.id,
            dimension: 1,
            bonds: fmt(l.alpha.bonds()),
        });
    }
    for f in landscape.faces.iter().flat_map(|c| &c.faces) {
        rows.push(GraphRecord {
            mode: f.id,
            dimension: 2,
            bonds: fmt(f.alpha.bonds()),
        });
    }
    write_records(out, &format!("n = {}", landscape.n), rows)
}

/// Parses a bond list written as `0-1 0-2 ...`.
pub fn parse_bonds(text: &str) -> Result<Vec<crate::geom::Bond>> {
    text.split_whitespace()
        .map(|tok| {
            let (a, b) = tok.split_once('-').ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("bad bond {tok:?}"),
            })?;
            let parse = |v: &str| {
                v.parse::<usize>().map_err(|_| Error::Parse {
                    line: 0,
                    msg: format!("bad bond {tok:?}"),
                })
            };
            crate::geom::Bond::new(parse(a)?, parse(b)?)
        })
        .collect()
}

#[derive(Serialize)]
struct EventRecord {
    time: f64,
    mode: i64,
}

/// Mode changes of a trajectory; `-1` marks unclassified stretches.
pub fn write_trace<W: Write>(out: W, trace: &SimTrace) -> Result<()> {
    let rows = trace.events.iter().map(|&(t, m)| EventRecord {
        time: t,
        mode: m.map_or(-1, |v| v as i64),
    });
    write_records(out, "time in units of d^2/D; mode -1 is unclassified", rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statmech::ModeRow;

    #[test]
    fn modes_csv_has_comment_header_and_rows() {
        let rows = vec![ModeRow {
            id: 1,
            dimension: 0,
            bonds: 12,
            mean_h: 0.5,
            mean_inertia: 2.0,
            volume: None,
            multiplicity: 3,
            zeta: 1.0,
            corners: vec![],
        }];
        let s = LandscapeSummary::totals(6, rows);
        let mut buf = Vec::new();
        write_modes(&mut buf, &s, Some(1.0)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# "));
        assert!(lines[1].starts_with("mode,dimension,bonds"));
        assert_eq!(lines.len(), 3);
        assert!(!text.contains('\r'));
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        assert_eq!(rdr.records().count(), 1);
    }
}
