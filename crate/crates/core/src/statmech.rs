//! Equilibrium statistical mechanics on the geometric landscape.
//!
//! Temperature and potential enter only through the sticky parameter κ.
//! A mode with `m` bonds has partition function `κ^m n_α ζ_α`, so free
//! energies, yields, and crossover temperatures follow from the geometric
//! totals `Z_p` and one number.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// The constant `c` in the sticky limit for hard spheres.
pub const HARD_SPHERE_C: f64 = 2.0 / PI;

/// A pair potential in units of `k_B T` at the reference temperature.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum PotentialSpec {
    /// Morse well `E e^{-ρ(r-1)}(e^{-ρ(r-1)} - 2)` for `r ≥ 1`, a parabolic
    /// core `½ m² U''(1) (r-1)² - E` for `r < 1`, and a linear shift so that
    /// energy and force vanish at the cutoff `r_c`.
    MorseWithCore {
        depth: f64,
        range: f64,
        core: f64,
        cutoff: f64,
    },
    /// Potential values on a grid of separations, interpolated by a natural cubic spline.
    Tabulated { r: Vec<f64>, u: Vec<f64> },
}

impl PotentialSpec {
    /// Morse-with-core potential with the default core multiplier 2 and
    /// cutoff `1 + 4/ρ`.
    pub fn morse(depth: f64, range: f64) -> Self {
        Self::MorseWithCore {
            depth,
            range,
            core: 2.0,
            cutoff: 1.0 + 4.0 / range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::MorseWithCore {
                depth,
                range,
                core,
                cutoff,
            } => {
                if *depth > 0.0 && *range > 0.0 && *core > 0.0 && *cutoff > 1.0 {
                    Ok(())
                } else {
                    Err(Error::PotentialShape)
                }
            }
            Self::Tabulated { r, u } => {
                let sorted = r.windows(2).all(|w| w[0] < w[1]);
                if r.len() == u.len() && r.len() >= 4 && sorted {
                    Ok(())
                } else {
                    Err(Error::PotentialShape)
                }
            }
        }
    }

    /// Energy and force `-dU/dr` at separation `r`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        match self {
            Self::MorseWithCore {
                depth,
                range,
                core,
                cutoff,
            } => morse_core_eval(r, *depth, *range, *core, *cutoff),
            Self::Tabulated { r: rs, u } => {
                let (v, d) = Spline::new(rs, u).eval(r);
                (v, -d)
            }
        }
    }
}

fn morse(r: f64, e: f64, rho: f64) -> (f64, f64) {
    let a = (-rho * (r - 1.0)).exp();
    (e * a * (a - 2.0), 2.0 * e * rho * a * (1.0 - a))
}

fn morse_core_eval(r: f64, e: f64, rho: f64, m: f64, rc: f64) -> (f64, f64) {
    if r >= rc {
        return (0.0, 0.0);
    }
    let (uc, dc) = morse(rc, e, rho);
    let shift = uc + dc * (r - rc);
    let (u, du) = if r >= 1.0 {
        morse(r, e, rho)
    } else {
        let k = m * m * 2.0 * e * rho * rho;
        (0.5 * k * (r - 1.0).powi(2) - e, k * (r - 1.0))
    };
    (u - shift, -(du - dc))
}

/// How a sticky parameter was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    ClosedForm,
    Laplace,
    Quadrature,
    Assigned,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StickyParameter {
    pub kappa: f64,
    pub provenance: Provenance,
}

impl StickyParameter {
    pub fn assigned(kappa: f64) -> Result<Self> {
        if kappa > 0.0 && kappa.is_finite() {
            Ok(Self {
                kappa,
                provenance: Provenance::Assigned,
            })
        } else {
            Err(Error::PotentialShape)
        }
    }
}

/// Sticky parameter of the truncated Morse-with-core potential.
///
/// The well depth is `-U_trunc(1) = E + U(r_c) + U'(r_c)(1 - r_c)` where
/// `U` is the untruncated Morse form; the Laplace widths of the Morse side
/// and of the stiffer core side add up to the `(m+1)/m` prefactor.
pub fn kappa_closed_form(spec: &PotentialSpec) -> Result<StickyParameter> {
    let PotentialSpec::MorseWithCore {
        depth,
        range,
        core,
        cutoff,
    } = *spec
    else {
        return Err(Error::PotentialShape);
    };
    spec.validate()?;
    let (uc, dc) = morse(cutoff, depth, range);
    let well = depth + uc + dc * (1.0 - cutoff);
    let curvature = 2.0 * depth * range * range;
    let kappa = (core + 1.0) / core * well.exp() / curvature.sqrt() * (PI / 2.0).sqrt();
    Ok(StickyParameter {
        kappa,
        provenance: Provenance::ClosedForm,
    })
}

/// Sticky parameter as the exact Boltzmann weight of the well, `∫ e^{-U(r)} dr`
/// from deep inside the core out to the cutoff (composite Simpson rule).
///
/// The Morse well is softer outside `r = 1` than its quadratic approximation,
/// so at moderate depth this is noticeably larger than [`kappa_closed_form`]:
/// about 20.6 against 16.2 for `E = 8.5`, `ρ = 30`. It is the weight that a
/// simulation actually samples.
pub fn kappa_quadrature(spec: &PotentialSpec) -> Result<StickyParameter> {
    spec.validate()?;
    let (lo, hi) = match spec {
        PotentialSpec::MorseWithCore {
            depth,
            range,
            core,
            cutoff,
        } => {
            let core_width = 1.0 / (core * range * (2.0 * depth).sqrt());
            ((1.0 - 40.0 * core_width).max(1e-3), *cutoff)
        }
        PotentialSpec::Tabulated { r, .. } => (r[0], r[r.len() - 1]),
    };
    let panels = 40_000;
    let h = (hi - lo) / panels as f64;
    let w = |r: f64| (-spec.eval(r).0).exp();
    let mut sum = w(lo) + w(hi);
    for k in 1..panels {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * w(lo + k as f64 * h);
    }
    let kappa = sum * h / 3.0;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::PotentialShape);
    }
    Ok(StickyParameter {
        kappa,
        provenance: Provenance::Quadrature,
    })
}

/// Laplace-limit sticky parameter `e^{-U_0/T} / sqrt(c U''(r_0)/T)` of a
/// potential with an interior minimum in `bracket`.
pub fn kappa_laplace(u: impl Fn(f64) -> f64, bracket: (f64, f64), temperature: f64) -> Result<StickyParameter> {
    let (r0, u0) = find_minimum(&u, bracket)?;
    if u0 >= 0.0 {
        return Err(Error::PotentialShape);
    }
    let h = 1e-4;
    let u2 = (-u(r0 + 2.0 * h) + 16.0 * u(r0 + h) - 30.0 * u0 + 16.0 * u(r0 - h) - u(r0 - 2.0 * h))
        / (12.0 * h * h);
    if u2 <= 0.0 {
        return Err(Error::PotentialShape);
    }
    Ok(StickyParameter {
        kappa: laplace_kappa(u0, HARD_SPHERE_C * u2, temperature),
        provenance: Provenance::Laplace,
    })
}

/// `e^{-U_0/T} / sqrt(c U''/T)` given the well depth `U_0` and `c U''`.
pub fn laplace_kappa(u0: f64, c_curvature: f64, temperature: f64) -> f64 {
    (-u0 / temperature).exp() / (c_curvature / temperature).sqrt()
}

fn find_minimum(u: &impl Fn(f64) -> f64, (lo, hi): (f64, f64)) -> Result<(f64, f64)> {
    // Coarse scan, then golden-section refinement around the best grid point.
    let steps = 2000;
    let dr = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|k| lo + k as f64 * dr)
        .min_by(|a, b| u(*a).total_cmp(&u(*b)))
        .ok_or(Error::PotentialShape)?;
    if best <= lo + dr || best >= hi - dr {
        return Err(Error::PotentialShape);
    }
    let (mut a, mut b) = (best - dr, best + dr);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if u(c) < u(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let r0 = 0.5 * (a + b);
    Ok((r0, u(r0)))
}

/// Natural cubic spline through tabulated points.
struct Spline<'a> {
    x: &'a [f64],
    y: &'a [f64],
    m: Vec<f64>,
}

impl<'a> Spline<'a> {
    fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal solve for second derivatives with zero end values.
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
                c[i] = h1 / diag;
                let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
                d[i] = (rhs - h0 * d[i - 1]) / diag;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        Self { x, y, m }
    }

    fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.x.len();
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let a = (self.x[k + 1] - t) / h;
        let b = (t - self.x[k]) / h;
        let v = a * self.y[k] + b * self.y[k + 1]
            + ((a * a * a - a) * self.m[k] + (b * b * b - b) * self.m[k + 1]) * h * h / 6.0;
        let d = (self.y[k + 1] - self.y[k]) / h
            + (-(3.0 * a * a - 1.0) * self.m[k] + (3.0 * b * b - 1.0) * self.m[k + 1]) * h / 6.0;
        (v, d)
    }
}

/// Free energy `F_α / k_B T = -m ln κ - ln(n_α ζ_α)`.
pub fn free_energy(bonds: usize, z: f64, kappa: f64) -> f64 {
    -(bonds as f64) * kappa.ln() - z.ln()
}

/// One row of the per-mode table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeRow {
    pub id: usize,
    pub dimension: usize,
    pub bonds: usize,
    pub mean_h: f64,
    pub mean_inertia: f64,
    /// Quotient volume; absent for rigid modes.
    pub volume: Option<f64>,
    pub multiplicity: u64,
    pub zeta: f64,
    pub corners: Vec<usize>,
}

impl ModeRow {
    /// `n_α ζ_α`.
    pub fn z(&self) -> f64 {
        self.multiplicity as f64 * self.zeta
    }
}

/// Per-mode rows with the totals `Z_0, Z_1, Z_2`.
#[derive(Clone, Debug, Serialize)]
pub struct LandscapeSummary {
    pub n: usize,
    pub rows: Vec<ModeRow>,
    pub z: [f64; 3],
    pub counts: [usize; 3],
}

impl LandscapeSummary {
    /// Aggregates rows into dimension totals.
    pub fn totals(n: usize, rows: Vec<ModeRow>) -> Self {
        let mut z = [0.0; 3];
        let mut counts = [0; 3];
        for r in &rows {
            if r.dimension < 3 {
                z[r.dimension] += r.z();
                counts[r.dimension] += 1;
            }
        }
        Self { n, rows, z, counts }
    }

    pub fn ratio(&self, p: usize) -> f64 {
        self.z[p + 1] / self.z[p]
    }

    /// Total partition function `Σ_p κ^{3n-6-p} Z_p` (up to dropped constants).
    pub fn partition_function(&self, kappa: f64) -> f64 {
        let top = 3 * self.n - 6;
        (0..3).map(|p| kappa.powi((top - p) as i32) * self.z[p]).sum()
    }

    /// Free energy of a mode row at `κ`.
    pub fn free_energy(&self, row: &ModeRow, kappa: f64) -> f64 {
        free_energy(row.bonds, row.z(), kappa)
    }

    pub fn yields(&self, kappa: f64) -> [f64; 3] {
        yields(self.z, kappa)
    }
}

/// `y_p = κ^{2-p} Z_p / (κ² Z_0 + κ Z_1 + Z_2)`.
pub fn yields(z: [f64; 3], kappa: f64) -> [f64; 3] {
    // Scale by the largest power of κ to stay finite at the extremes.
    let (a, b, c) = if kappa >= 1.0 {
        (z[0], z[1] / kappa, z[2] / (kappa * kappa))
    } else {
        (z[0] * kappa * kappa, z[1] * kappa, z[2])
    };
    let total = a + b + c;
    [a / total, b / total, c / total]
}

/// Temperature at which `κ(T) Z_p = Z_{p+1}`, by bisection on `[lo, hi]`.
/// `kappa_of_t` must be monotone on the bracket.
pub fn critical_temperature(z_p: f64, z_next: f64, kappa_of_t: impl Fn(f64) -> f64, (lo, hi): (f64, f64)) -> Result<f64> {
    let target = (z_next / z_p).ln();
    let g = |t: f64| kappa_of_t(t).ln() - target;
    let (mut a, mut b) = (lo, hi);
    let (ga, gb) = (g(a), g(b));
    if !(ga * gb <= 0.0) {
        return Err(Error::NoRoot { lo, hi });
    }
    let rising = gb > ga;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (g(mid) < 0.0) == rising {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-14 * b.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// The rough estimate `1 / ln(Z_{p+1}/Z_p)` quoted alongside the exact root.
pub fn log_estimate(z_p: f64, z_next: f64) -> f64 {
    1.0 / (z_next / z_p).ln()
}

/// `κ(T) = e^{4/T} / sqrt(15/T)`: the illustrative temperature dependence
/// with `U_0 = -4` and `c U'' = 15`.
pub fn illustrative_kappa(temperature: f64) -> f64 {
    laplace_kappa(-4.0, 15.0, temperature)
}
