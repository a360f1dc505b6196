use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use sticky_landscape::bdsim::{run_replicas, ModeIndex, SimParams};
use sticky_landscape::clusters::{catalog_from_text, enumerate_catalog, parse_catalog, shipped_catalog, ModeCatalog, MultiplicityConvention};
use sticky_landscape::export;
use sticky_landscape::graph::ContactGraph;
use sticky_landscape::landscape::{Landscape, LandscapeOptions};
use sticky_landscape::manifold1d::WalkOptions;
use sticky_landscape::manifold2d::FaceOptions;
use sticky_landscape::statmech::{critical_temperature, illustrative_kappa, log_estimate, yields};
use sticky_landscape::bdsim::rank_correlation;

use crate::failure::{Failure, Outcome};
use crate::manifest::RunManifest;
use crate::plot::{render, Axis, Series};
use crate::{CatalogArgs, CompareArgs, Convention, EnumerateArgs, LandscapeArgs, Multiplicity, RatesArgs, SimulateArgs};

fn load_rigid(args: &CatalogArgs, manifest: &mut RunManifest) -> Outcome<ModeCatalog> {
    match &args.catalog {
        Some(path) => {
            let text = manifest.read(path)?;
            Ok(catalog_from_text(args.n, &text)?)
        }
        None => Ok(shipped_catalog(args.n)?),
    }
}

fn walk(args: &CatalogArgs) -> WalkOptions {
    WalkOptions {
        ds: args.line_ds,
        ..WalkOptions::default()
    }
}

/// Renders into a buffer with one of the export writers and records the file.
fn emit(
    manifest: &mut RunManifest,
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut Vec<u8>) -> sticky_landscape::Result<()>,
) -> Outcome {
    let mut buf = Vec::new();
    f(&mut buf)?;
    manifest.write(dir, name, &buf)?;
    Ok(())
}

fn yields_plot(z: [f64; 3], title: &str) -> String {
    let temps: Vec<f64> = (0..=200).map(|k| 0.3 + 2.7 * k as f64 / 200.0).collect();
    let curves: Vec<Vec<(f64, f64)>> = (0..3)
        .map(|p| temps.iter().map(|&t| (t, yields(z, illustrative_kappa(t))[p])).collect())
        .collect();
    let x = Axis::fit("temperature (k_B T / |U_0| scaled, kappa = e^{4/T}/sqrt(15/T))", [0.3, 3.0], false);
    let y = Axis::fit("yield", [0.0, 1.0], false);
    let colors = ["black", "blue", "green"];
    let series: Vec<Series> = curves
        .into_iter()
        .enumerate()
        .map(|(p, points)| Series {
            name: format!("p = {p}"),
            color: colors[p],
            points,
            line: true,
        })
        .collect();
    render(title, &x, &y, &series, false)
}

pub fn landscape(a: &LandscapeArgs, out: &Path) -> Outcome {
    fs::create_dir_all(out)?;
    let mut m = RunManifest::new(
        "landscape",
        json!({
            "n": a.catalog.n,
            "catalog": a.catalog.catalog,
            "line_ds": a.catalog.line_ds,
            "ds": a.ds,
            "strict": a.strict,
            "no_faces": a.no_faces,
            "multiplicity": format!("{:?}", a.multiplicity),
            "kappa": a.kappa,
        }),
    );
    let rigid = load_rigid(&a.catalog, &mut m)?;
    let opts = LandscapeOptions {
        walk: walk(&a.catalog),
        faces: FaceOptions {
            ds: a.ds,
            strict: a.strict,
            ..FaceOptions::default()
        },
        skip_faces: a.no_faces,
    };
    let l = Landscape::compute(rigid, opts)?;
    let convention = match a.multiplicity {
        Multiplicity::Table => MultiplicityConvention::Table,
        Multiplicity::Formula => MultiplicityConvention::PaperFormula,
    };
    let summary = l.summary(convention)?;

    m.write(out, "rigid.txt", l.rigid.to_text().as_bytes())?;
    emit(&mut m, out, "modes.csv", |b| export::write_modes(b, &summary, a.kappa))?;
    emit(&mut m, out, "totals.csv", |b| export::write_totals(b, &summary))?;
    emit(&mut m, out, "lines.csv", |b| export::write_lines(b, &l.lines))?;
    emit(&mut m, out, "line_samples.csv", |b| export::write_line_samples(b, &l.lines))?;
    emit(&mut m, out, "graphs.csv", |b| export::write_graphs(b, &l))?;
    if let Some(faces) = &l.faces {
        emit(&mut m, out, "faces.csv", |b| export::write_faces(b, faces))?;
        emit(&mut m, out, "faces.json", |b| export::write_faces_json(b, faces))?;
        let svg = yields_plot(summary.z, &format!("yields, n = {}", l.n));
        m.write(out, "yields.svg", svg.as_bytes())?;
    }
    m.finish(out)?;

    let [c0, c1, c2] = summary.counts;
    let [z0, z1, z2] = summary.z;
    println!("n,count0,count1,count2,z0,z1,z2,ratio10,ratio21");
    println!("{},{c0},{c1},{c2},{z0:.4},{z1:.4},{z2:.4},{:.4},{:.4}", l.n, z1 / z0, z2 / z1);
    Ok(())
}

pub fn rates(a: &RatesArgs, out: &Path) -> Outcome {
    fs::create_dir_all(out)?;
    let mut m = RunManifest::new(
        "rates",
        json!({
            "n": a.catalog.n,
            "catalog": a.catalog.catalog,
            "line_ds": a.catalog.line_ds,
            "kappa": a.kappa,
            "convention": format!("{:?}", a.convention),
            "duration": a.duration,
            "group": a.group,
        }),
    );
    let rigid = load_rigid(&a.catalog, &mut m)?;
    let l = Landscape::compute(
        rigid,
        LandscapeOptions {
            walk: walk(&a.catalog),
            skip_faces: true,
            ..LandscapeOptions::default()
        },
    )?;
    let network = l.rates()?;
    let restricted = a.convention == Convention::Restricted;
    emit(&mut m, out, "rates.csv", |b| export::write_rates(b, &network, a.kappa, a.duration, restricted))?;

    let chosen = if restricted { network.restricted(a.kappa) } else { network.clone() };
    if let Some(threshold) = a.group {
        let grouping = l.grouping(threshold);
        let coarse = grouping.coarse_rates(&chosen);
        let mut text = String::from("# rates between groups of nearly coincident clusters; intra-group transitions dropped\nfrom_group,to_group,from_members,to_members,rate\n");
        for (i, gi) in grouping.groups.iter().enumerate() {
            for (j, gj) in grouping.groups.iter().enumerate() {
                let members = |g: &[usize]| g.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
                text.push_str(&format!("{i},{j},{},{},{}\n", members(gi), members(gj), coarse[(i, j)]));
            }
        }
        m.write(out, "grouped_rates.csv", text.as_bytes())?;
        println!("groups: {:?}", grouping.groups);
    }
    m.finish(out)?;

    let label = if a.duration.is_some() && a.kappa.is_finite() { "expected counts" } else { "geometric rates" };
    println!("{label} ({:?}), modes {:?}", a.convention, chosen.modes);
    let shown = match a.duration {
        Some(t) if a.kappa.is_finite() => chosen.expected_counts(a.kappa, t),
        _ => chosen.rates.clone(),
    };
    for row in shown.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("{}", cells.join(","));
    }
    Ok(())
}

/// Flattened simulation summary, written by `simulate` and read by `compare`.
#[derive(Debug, Serialize, Deserialize)]
struct SimReport {
    n: usize,
    kappa: f64,
    seeds: Vec<u64>,
    elapsed: f64,
    dimension_time: [f64; 4],
    occupancy: BTreeMap<usize, f64>,
    transitions: Vec<(usize, usize, u64)>,
    anomalies: u64,
    ratio10: f64,
    ratio21: f64,
    /// Well weight of the simulated potential by quadrature.
    kappa_quadrature: f64,
    ratio10_quadrature: f64,
    ratio21_quadrature: f64,
    wall_seconds: f64,
    parameters: serde_json::Value,
}

fn load_index(dir: &Path, n: usize, m: &mut RunManifest) -> Outcome<(ModeCatalog, ModeIndex)> {
    let rigid_text = m.read(&dir.join("rigid.txt"))?;
    let entries = parse_catalog(&rigid_text)?;
    if !entries.iter().any(|(k, _, _)| *k == n) {
        return Err(Failure::Inconsistent(format!("landscape in {} is not for n={n}", dir.display())));
    }
    let rigid = catalog_from_text(n, &rigid_text)?;
    let graphs_text = m.read(&dir.join("graphs.csv"))?;
    #[derive(Deserialize)]
    struct Row {
        mode: usize,
        dimension: usize,
        bonds: String,
    }
    let mut graphs = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(graphs_text.as_bytes());
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        let bonds = export::parse_bonds(&row.bonds)?;
        graphs.push((row.dimension, row.mode, ContactGraph::from_bonds(n, &bonds)?));
    }
    Ok((rigid, ModeIndex::from_graphs(n, &graphs)))
}

pub fn simulate(a: &SimulateArgs, out: &Path) -> Outcome {
    let mut m = RunManifest::new("simulate", json!({ "config": a.config, "landscape": a.landscape, "seed": a.seed }));
    let text = m.read(&a.config)?;
    let mut params = SimParams::from_config(&text)?;
    if let Some(seed) = a.seed {
        params.seed = seed;
    }
    m.seed = Some(params.seed);
    let (rigid, index) = match &a.landscape {
        Some(dir) => load_index(dir, params.n, &mut m)?,
        None => {
            let l = Landscape::shipped(params.n, LandscapeOptions::default())?;
            let idx = ModeIndex::new(&l.rigid, Some(&l.lines), l.faces.as_ref());
            (l.rigid, idx)
        }
    };
    if !index.aliases.is_empty() {
        log::warn!("classes sharing a contact graph are reported together: {:?}", index.aliases);
    }
    let trace = run_replicas(&params, &index, &rigid)?;
    let kappa = params.kappa()?;
    let kappa_q = params.kappa_quadrature()?;
    fs::create_dir_all(out)?;
    emit(&mut m, out, "trace.csv", |b| export::write_trace(b, &trace))?;
    m.write(out, "config.txt", params.to_config().as_bytes())?;
    let report = SimReport {
        n: params.n,
        kappa,
        seeds: trace.seeds.clone(),
        elapsed: trace.elapsed,
        dimension_time: trace.dimension_time,
        occupancy: trace.occupancy.clone(),
        transitions: trace.transitions.iter().map(|(&(x, y), &c)| (x, y, c)).collect(),
        anomalies: trace.anomalies,
        ratio10: trace.ratio(0, kappa),
        ratio21: trace.ratio(1, kappa),
        kappa_quadrature: kappa_q,
        ratio10_quadrature: trace.ratio(0, kappa_q),
        ratio21_quadrature: trace.ratio(1, kappa_q),
        wall_seconds: trace.wall_seconds,
        parameters: serde_json::to_value(&params)?,
    };
    m.write(out, "summary.json", (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    m.finish(out)?;
    println!(
        "n={} kappa={kappa:.3} time={:.1} Z1/Z0={:.3} Z2/Z1={:.3} (with quadrature kappa {kappa_q:.3}: {:.3}, {:.3}) anomalies={}",
        params.n, trace.elapsed, report.ratio10, report.ratio21, report.ratio10_quadrature, report.ratio21_quadrature, trace.anomalies
    );
    Ok(())
}

#[derive(Deserialize)]
struct TotalsIn {
    n: usize,
    z0: f64,
    z1: f64,
    z2: f64,
}

#[derive(Deserialize)]
struct ModeIn {
    mode: usize,
    dimension: usize,
    z: f64,
}

#[derive(Deserialize)]
struct RateIn {
    from: usize,
    to: usize,
    geometric: f64,
}

fn read_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Outcome<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    Ok(rdr.deserialize().collect::<Result<Vec<T>, _>>()?)
}

pub fn compare(a: &CompareArgs, out: &Path) -> Outcome {
    let mut m = RunManifest::new("compare", json!({ "theory": a.theory, "sim": a.sim }));
    let summary_path = a.sim.join("summary.json");
    if !summary_path.exists() {
        return Err(Failure::Inconsistent(format!("no simulation summary in {}", a.sim.display())));
    }
    let sim: SimReport = serde_json::from_str(&m.read(&summary_path)?)?;
    let totals: Vec<TotalsIn> = read_csv(&m.read(&a.theory.join("totals.csv"))?)?;
    let totals = totals
        .into_iter()
        .next()
        .ok_or_else(|| Failure::Missing(format!("empty totals in {}", a.theory.display())))?;
    if totals.n != sim.n {
        return Err(Failure::Inconsistent(format!("theory is for n={} but simulation for n={}", totals.n, sim.n)));
    }
    let modes: Vec<ModeIn> = read_csv(&m.read(&a.theory.join("modes.csv"))?)?;
    let z = [totals.z0, totals.z1, totals.z2];
    fs::create_dir_all(out)?;

    // Mode probabilities within each dimension.
    let mut scatter = String::from("# probability of each mode among modes of its dimension\nmode,dimension,theory,simulated\n");
    let mut pairs = Vec::new();
    let mut series: Vec<Series> = ["black", "blue", "green"]
        .iter()
        .enumerate()
        .map(|(p, c)| Series {
            name: format!("p = {p}"),
            color: c,
            points: Vec::new(),
            line: false,
        })
        .collect();
    for md in modes.iter().filter(|md| md.dimension < 3) {
        let theory = md.z / z[md.dimension];
        let t = sim.dimension_time[md.dimension];
        let simulated = if t > 0.0 { sim.occupancy.get(&md.mode).copied().unwrap_or(0.0) / t } else { 0.0 };
        scatter.push_str(&format!("{},{},{theory},{simulated}\n", md.mode, md.dimension));
        pairs.push((theory, simulated));
        series[md.dimension].points.push((theory, simulated));
    }
    m.write(out, "scatter.csv", scatter.as_bytes())?;
    let (th, si): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let rho = rank_correlation(&th, &si);
    let x = Axis::fit("theory", th.iter().copied(), true);
    let y = Axis::fit("simulation", si.iter().copied(), true);
    let svg = render(&format!("mode probabilities, n = {}, rank correlation {rho:.3}", sim.n), &x, &y, &series, true);
    m.write(out, "scatter.svg", svg.as_bytes())?;

    let ratios = format!(
        "# Z_(p+1)/Z_p; simulated values are (time in p+1)/(time in p) times kappa, closed form {} or quadrature {}\np,theory,simulated,simulated_quadrature\n0,{},{},{}\n1,{},{},{}\n",
        sim.kappa,
        sim.kappa_quadrature,
        z[1] / z[0],
        sim.ratio10,
        sim.ratio10_quadrature,
        z[2] / z[1],
        sim.ratio21,
        sim.ratio21_quadrature
    );
    m.write(out, "ratios.csv", ratios.as_bytes())?;

    let rates_path = a.theory.join("rates.csv");
    if rates_path.exists() {
        let rates: Vec<RateIn> = read_csv(&m.read(&rates_path)?)?;
        let factor = 1.0 / (1.0 + z[1] / (sim.kappa * z[0]));
        let observed: BTreeMap<(usize, usize), u64> = sim.transitions.iter().map(|&(p, q, c)| ((p, q), c)).collect();
        let mut text = format!(
            "# transitions over time {} at kappa = {} (closed form) or {} (quadrature); expected = rate * time / kappa\nfrom,to,expected_leading,expected_restricted,expected_quadrature,observed\n",
            sim.elapsed, sim.kappa, sim.kappa_quadrature
        );
        for r in rates {
            let e = r.geometric * sim.elapsed / sim.kappa;
            let o = observed.get(&(r.from, r.to)).copied().unwrap_or(0);
            let eq = r.geometric * sim.elapsed / sim.kappa_quadrature;
            text.push_str(&format!("{},{},{e},{},{eq},{o}\n", r.from, r.to, e * factor));
        }
        m.write(out, "counts.csv", text.as_bytes())?;
    } else {
        log::warn!("no rates.csv in {}; skipping transition counts", a.theory.display());
    }

    let mut title = format!("yields, n = {}", sim.n);
    if let Ok(t0) = critical_temperature(z[0], z[1], illustrative_kappa, (0.2, 10.0)) {
        title.push_str(&format!(", T_0 = {t0:.3} (log estimate {:.3})", log_estimate(z[0], z[1])));
    }
    m.write(out, "yields.svg", yields_plot(z, &title).as_bytes())?;
    m.finish(out)?;
    println!("rank correlation {rho:.3}; Z1/Z0 theory {:.3} sim {:.3}; Z2/Z1 theory {:.3} sim {:.3}", z[1] / z[0], sim.ratio10, z[2] / z[1], sim.ratio21);
    Ok(())
}

pub fn enumerate(a: &EnumerateArgs, out: &Path) -> Outcome {
    fs::create_dir_all(out)?;
    let mut m = RunManifest::new("enumerate", json!({ "n": a.n, "restarts": a.restarts }));
    let catalog = enumerate_catalog(a.n, a.restarts)?;
    let name = format!("rigid_n{}.txt", a.n);
    m.write(out, &name, catalog.to_text().as_bytes())?;
    m.finish(out)?;
    println!("n={} rigid clusters={} Z0={:.4}", a.n, catalog.len(), catalog.z0());
    Ok(())
}
