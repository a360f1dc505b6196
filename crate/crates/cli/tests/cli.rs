use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sticky(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sticky"))
        .args(args)
        .output()
        .expect("run sticky")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(file: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(file).unwrap();
    assert!(!text.contains('\r'), "{} has CR line endings", file.display());
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with('#'), "{} lacks its note line", file.display());
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn unknown_n_is_a_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = sticky(&["landscape", "--n", "12", "--out", path(dir.path())]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn absent_catalog_file_is_a_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = sticky(&["rates", "--n", "6", "--catalog", "/nonexistent/rigid.txt", "--out", path(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn nonpositive_kappa_is_a_usage_error() {
    for k in ["0", "-3"] {
        let out = sticky(&["rates", "--n", "6", &format!("--kappa={k}")]);
        assert_eq!(code(&out), 2);
        assert!(String::from_utf8_lossy(&out.stderr).contains("kappa must be positive"));
    }
}

#[test]
fn rates_for_six_spheres() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = sticky(&["rates", "--n", "6", "--kappa", "16", "--duration", "2300", "--out", path(d)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&d.join("rates.csv"));
    assert_eq!(rows[0], ["from", "to", "geometric", "restricted", "outgoing", "expected_count"]);
    let get = |a: &str, b: &str, col: usize| -> f64 {
        rows.iter().find(|r| r[0] == a && r[1] == b).unwrap()[col].parse().unwrap()
    };
    assert!((get("1", "1", 5) - 1568.0).abs() < 5.0);
    assert!((get("1", "2", 5) - 153.8).abs() < 1.0);
    assert_eq!(get("2", "2", 5), 0.0);
    let note = fs::read_to_string(d.join("rates.csv")).unwrap();
    assert!(note.lines().next().unwrap().contains("kappa^-1 D/d^2"));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "rates");
    assert_eq!(manifest["parameters"]["kappa"], 16.0);
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|o| o == "rates.csv"));
}

#[test]
fn infinite_kappa_gives_the_geometric_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = sticky(&["rates", "--n", "6", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&dir.path().join("rates.csv"));
    let poly: f64 = rows[1][2].parse().unwrap();
    assert!((poly - 10.908).abs() < 0.01);
    assert!(rows[1..].iter().all(|r| r[2].parse::<f64>().unwrap().is_finite()));
}

#[test]
fn landscape_is_reproducible_and_feeds_compare() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = sticky(&["landscape", "--n", "5", "--out", path(d)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["modes.csv", "totals.csv", "lines.csv", "line_samples.csv", "faces.csv", "graphs.csv", "rigid.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    let totals = csv_rows(&a.join("totals.csv"));
    assert_eq!(&totals[1][..4], ["5", "1", "2", "4"]);

    // A six-sphere simulation cannot be compared with a five-sphere landscape.
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "n = 6\nE = 8.5\nrho = 30\ntotal_time = 0.2\nseed = 3\n").unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(code(&sticky(&["simulate", "--config", path(&cfg), "--out", path(&sim)])), 0);
    let cmp = sticky(&["compare", "--theory", path(&a), "--sim", path(&sim), "--out", path(&dir.path().join("c"))]);
    assert_eq!(code(&cmp), 3);

    // Neither can a landscape be used to classify a run of another size.
    let out = sticky(&["simulate", "--config", path(&cfg), "--landscape", path(&a), "--out", path(&sim)]);
    assert_eq!(code(&out), 3);
}

#[test]
fn compare_without_simulation_is_inconsistent() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let out = sticky(&["compare", "--theory", path(dir.path()), "--sim", path(&empty), "--out", path(&dir.path().join("c"))]);
    assert_eq!(code(&out), 3);
}

#[test]
fn simulate_and_compare_six_spheres() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let theory = d.join("theory");
    assert_eq!(code(&sticky(&["landscape", "--n", "6", "--out", path(&theory)])), 0);
    assert_eq!(code(&sticky(&["rates", "--n", "6", "--out", path(&theory)])), 0);
    let cfg = d.join("run.cfg");
    fs::write(&cfg, "# short run\nn = 6\nE = 8.5\nrho = 30\ntotal_time = 2\nseed = 5\n").unwrap();
    let (s1, s2) = (d.join("s1"), d.join("s2"));
    for s in [&s1, &s2] {
        let out = sticky(&["simulate", "--config", path(&cfg), "--landscape", path(&theory), "--out", path(s)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(s1.join("trace.csv")).unwrap(), fs::read(s2.join("trace.csv")).unwrap());

    let cmp = d.join("cmp");
    let out = sticky(&["compare", "--theory", path(&theory), "--sim", path(&s1), "--out", path(&cmp)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let scatter = csv_rows(&cmp.join("scatter.csv"));
    assert_eq!(scatter.len(), 1 + 20);
    let theory_sum: f64 = scatter[1..].iter().filter(|r| r[1] == "0").map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((theory_sum - 1.0).abs() < 1e-12);
    let counts = csv_rows(&cmp.join("counts.csv"));
    assert_eq!(counts[0].last().unwrap(), "observed");
    for svg in ["scatter.svg", "yields.svg"] {
        assert!(fs::read_to_string(cmp.join(svg)).unwrap().starts_with("<svg"));
    }
}

#[test]
fn enumerated_catalog_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&sticky(&["enumerate", "--n", "5", "--out", path(d)])), 0);
    let catalog = d.join("rigid_n5.txt");
    let out = sticky(&["landscape", "--n", "5", "--catalog", path(&catalog), "--no-faces", "--out", path(&d.join("l"))]);
    assert_eq!(code(&out), 0);
    let manifest = fs::read_to_string(d.join("l/manifest.json")).unwrap();
    assert!(manifest.contains("rigid_n5.txt"));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("5,1,2,0,1.7889"), "{stdout}");
}
