//! A single bonded pair: the simplest place where the dynamics, the
//! potential, and the sticky parameter must all agree.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sticky_landscape::bdsim::{step, SimParams};
use sticky_landscape::statmech::{kappa_closed_form, kappa_quadrature, PotentialSpec};

const E: f64 = 8.5;
const RHO: f64 = 30.0;

fn cutoff() -> f64 {
    1.0 + 4.0 / RHO
}

/// Trapezoid rule for `f` on `[a, b]`.
fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, k: usize) -> f64 {
    let h = (b - a) / k as f64;
    let inner: f64 = (1..k).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

#[test]
fn bound_weight_matches_quadrature_kappa() {
    let spec = PotentialSpec::morse(E, RHO);
    let weight = quad(|r| (-spec.eval(r).0).exp(), 0.5, cutoff(), 200_000);
    let exact = kappa_quadrature(&spec).unwrap().kappa;
    assert!((weight / exact - 1.0).abs() < 1e-4, "well weight {weight} vs {exact}");
}

#[test]
fn closed_form_kappa_underestimates_the_well() {
    // Ratios of the well weight to the closed form, from an independent
    // quadrature: the Morse side is softer than its quadratic expansion.
    for (e, rho, ratio) in [(8.5, 30.0, 1.2779), (10.0, 50.0, 1.2499), (10.6, 150.0, 1.2417)] {
        let spec = PotentialSpec::morse(e, rho);
        let q = kappa_quadrature(&spec).unwrap().kappa;
        let c = kappa_closed_form(&spec).unwrap().kappa;
        assert!((q / c - ratio).abs() < 1e-3, "E={e} rho={rho}: {}", q / c);
    }
}

#[test]
fn bond_length_histogram_follows_boltzmann_weight() {
    let params = SimParams {
        wall: None,
        ..SimParams::morse(2, E, RHO)
    };
    let spec = params.potential.clone();
    let rc = cutoff();
    let (lo, hi) = (0.96, rc);
    let bins = 12;
    let width = (hi - lo) / bins as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut noise = || rng.sample::<f64, _>(StandardNormal);
    let mut x = vec![[0.0; 3], [1.0, 0.0, 0.0]];
    let mut f = vec![[0.0; 3]; 2];
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for k in 0..3_000_000u64 {
        step(&mut x, &params, &mut f, &mut noise);
        let d: f64 = (0..3).map(|c| (x[1][c] - x[0][c]).powi(2)).sum::<f64>().sqrt();
        if d > rc + 0.2 {
            // Broken bond: put the pair back in contact. Rare at this depth.
            x = vec![[0.0; 3], [1.0, 0.0, 0.0]];
            continue;
        }
        if k % 10 == 0 && d < rc {
            total += 1;
            if (lo..hi).contains(&d) {
                counts[((d - lo) / width) as usize] += 1;
            }
        }
    }

    let weight = |r: f64| (-spec.eval(r).0).exp() * r * r;
    let norm = quad(weight, 0.5, rc, 100_000);
    for (b, &c) in counts.iter().enumerate() {
        let a = lo + b as f64 * width;
        let expected = quad(weight, a, a + width, 2000) / norm;
        let observed = c as f64 / total as f64;
        // Samples are correlated over roughly the vibration time, so the
        // band is wider than a Poisson estimate.
        assert!(
            (observed - expected).abs() < 0.01 + 0.1 * expected,
            "bin {b} at r={a:.4}: observed {observed:.4}, expected {expected:.4}"
        );
    }
}
