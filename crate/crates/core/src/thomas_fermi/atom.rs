//! Thomas-Fermi atoms and ions from the universal equation
//! `χ'' = χ^{3/2}/√x`, `χ(0) = 1`.
//!
//! Integration runs in `t = √x`, where the system
//! `dχ/dt = 2tχ'`, `dχ'/dt = 2χ^{3/2}` is regular at the origin.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::ode::{integrate, OdeOptions, Trajectory};
use super::{check_constant_identity, density_prefactor, length_scale};
use crate::error::{invalid, Error, Result};
use crate::quadrature::simpson;

/// Exponent of the leading correction `χ ≈ 144/x³ (1 + A x^{-α})`.
pub fn tail_exponent() -> f64 {
    (73f64.sqrt() - 7.0) / 2.0
}

/// Start of the inward integration for the neutral profile.
const TAIL_START: f64 = 1e5;
/// Largest `t = √x` explored by shooting.
const SHOOT_T_MAX: f64 = 1e3;

fn rhs(t: f64, y: &[f64; 3]) -> [f64; 3] {
    let c = y[0].max(0.0);
    [2.0 * t * y[1], 2.0 * c * c.sqrt(), 2.0 * t * c]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotOutcome {
    /// `χ` reached zero at finite `x`: the slope is too steep.
    Steep,
    /// `χ'` turned positive, so `χ` grows: the slope is too shallow.
    Shallow,
    Undecided,
}

/// Integrate outward from `χ(0) = 1`, `χ'(0) = slope` until the shooting
/// dichotomy decides.
pub fn shoot(slope: f64, opts: &OdeOptions) -> Result<(ShotOutcome, Trajectory<3>)> {
    let traj = integrate(rhs, 0.0, [1.0, slope, 0.0], SHOOT_T_MAX, opts, |_, y| y[0] < 0.0 || y[1] > 0.0)?;
    let (_, y) = traj.last();
    let outcome = if !traj.stopped {
        ShotOutcome::Undecided
    } else if y[0] < 0.0 {
        ShotOutcome::Steep
    } else {
        ShotOutcome::Shallow
    };
    Ok((outcome, traj))
}

/// Initial slope `χ'(0)` of the neutral solution by bisection shooting.
pub fn shooting_slope(opts: &OdeOptions) -> Result<f64> {
    let (mut lo, mut hi) = (-1.7, -1.5);
    if shoot(lo, opts)?.0 != ShotOutcome::Steep || shoot(hi, opts)?.0 != ShotOutcome::Shallow {
        return Err(Error::Internal("shooting bracket [-1.7, -1.5] does not straddle the solution".into()));
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        match shoot(mid, opts)?.0 {
            ShotOutcome::Steep => lo = mid,
            ShotOutcome::Shallow => hi = mid,
            ShotOutcome::Undecided => return Ok(mid),
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The neutral universal function `χ`, tabulated by inward integration from
/// its large-`x` asymptotics and normalised to `χ(0) = 1` by scaling.
#[derive(Debug, Clone)]
pub struct NeutralProfile {
    /// Nodes in `t`, descending; state `(χ, χ', ∫_x^∞ χ)`.
    traj: Trajectory<3>,
    tail_coefficient: f64,
    total_integral: f64,
    shooting_slope: f64,
}

impl NeutralProfile {
    fn build() -> Result<Self> {
        let opts = OdeOptions::default();
        let alpha = tail_exponent();
        let x = TAIL_START;
        let mut a = -10.0;
        let mut traj = None;
        for _ in 0..30 {
            let chi = 144.0 / x.powi(3) + a * x.powf(-3.0 - alpha);
            let dchi = -432.0 / x.powi(4) - (3.0 + alpha) * a * x.powf(-4.0 - alpha);
            let rest = 72.0 / (x * x) + a * x.powf(-2.0 - alpha) / (2.0 + alpha);
            let tr = integrate(
                |t, y: &[f64; 3]| {
                    let d = rhs(t, y);
                    [d[0], d[1], -d[2]]
                },
                x.sqrt(),
                [chi, dchi, rest],
                0.0,
                &OdeOptions {
                    h_max: 0.5,
                    ..opts
                },
                |_, _| false,
            )?;
            let c = tr.last().1[0];
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Internal(format!("inward integration gave χ(0) = {c}")));
            }
            traj = Some(tr);
            if (c - 1.0).abs() < 1e-13 {
                break;
            }
            a *= c.powf(alpha / 3.0);
        }
        let traj = traj.unwrap();
        let (_, y0) = traj.last();
        if (y0[0] - 1.0).abs() > 1e-11 {
            return Err(Error::Internal("neutral profile normalisation did not converge".into()));
        }
        let shooting = shooting_slope(&opts)?;
        if (shooting - y0[1]).abs() > 1e-8 {
            return Err(Error::Internal(format!(
                "slope mismatch between shooting ({shooting}) and inward integration ({})",
                y0[1]
            )));
        }
        Ok(NeutralProfile {
            total_integral: y0[2],
            tail_coefficient: a,
            shooting_slope: shooting,
            traj,
        })
    }

    /// Shared instance; built once per process.
    pub fn get() -> Result<Arc<NeutralProfile>> {
        static CELL: OnceLock<std::result::Result<Arc<NeutralProfile>, String>> = OnceLock::new();
        CELL.get_or_init(|| NeutralProfile::build().map(Arc::new).map_err(|e| e.to_string()))
            .clone()
            .map_err(Error::Internal)
    }

    /// `χ'(0)` from shooting.
    pub fn slope(&self) -> f64 {
        self.shooting_slope
    }

    /// `χ'(0)` from the inward integration.
    pub fn inward_slope(&self) -> f64 {
        self.traj.last().1[1]
    }

    pub fn tail_coefficient(&self) -> f64 {
        self.tail_coefficient
    }

    /// `(χ(x), χ'(x), ∫_0^x χ)`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let x = x.max(0.0);
        if x >= TAIL_START {
            let alpha = tail_exponent();
            let a = self.tail_coefficient;
            let chi = 144.0 / x.powi(3) + a * x.powf(-3.0 - alpha);
            let dchi = -432.0 / x.powi(4) - (3.0 + alpha) * a * x.powf(-4.0 - alpha);
            let rest = 72.0 / (x * x) + a * x.powf(-2.0 - alpha) / (2.0 + alpha);
            return (chi, dchi, self.total_integral - rest);
        }
        let t = x.sqrt();
        let k = self.traj.segment(t);
        let (y, _) = self.traj.hermite_on(k, t);
        (y[0], y[1], self.total_integral - y[2])
    }

    pub fn chi(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// `∫_0^x χ`.
    pub fn integral(&self, x: f64) -> f64 {
        self.eval(x).2
    }

    /// `∫_0^∞ χ`.
    pub fn total_integral(&self) -> f64 {
        self.total_integral
    }
}

/// `χ'(0)` of the neutral Thomas-Fermi function.
pub fn tf_universal_slope() -> Result<f64> {
    Ok(NeutralProfile::get()?.slope())
}

/// Outward solution for an ion: `χ` on `[0, x₀]` with `χ(x₀) = 0`.
#[derive(Debug, Clone)]
struct IonProfile {
    traj: Trajectory<3>,
    x0: f64,
    slope_at_cutoff: f64,
}

impl IonProfile {
    fn eval(&self, x: f64) -> (f64, f64) {
        if x >= self.x0 {
            return (0.0, self.slope_at_cutoff);
        }
        let t = x.max(0.0).sqrt();
        let k = self.traj.segment(t);
        let (y, _) = self.traj.hermite_on(k, t);
        (y[0].max(0.0), y[1])
    }
}

/// The zero of `χ` on the last segment of a steep shot.
fn ion_from_shot(traj: Trajectory<3>) -> IonProfile {
    let k = traj.t.len() - 2;
    let (mut lo, mut hi) = (traj.t[k], traj.t[k + 1]);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if traj.hermite_on(k, mid).0[0] > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let t0 = 0.5 * (lo + hi);
    let slope = traj.hermite_on(k, t0).0[1];
    IonProfile {
        traj,
        x0: t0 * t0,
        slope_at_cutoff: slope,
    }
}

/// Solve `-x₀ χ'(x₀) = q` for `0 < q < 1` by bisection on the initial slope.
fn ion_profile(q: f64, neutral_slope: f64, opts: &OdeOptions) -> Result<(f64, IonProfile)> {
    let charge = |s: f64| -> Result<Option<IonProfile>> {
        let (outcome, traj) = shoot(s, opts)?;
        Ok(match outcome {
            ShotOutcome::Steep => Some(ion_from_shot(traj)),
            _ => None,
        })
    };
    let q_of = |p: &Option<IonProfile>| p.as_ref().map_or(0.0, |p| -p.x0 * p.slope_at_cutoff);
    let mut gap = 0.25;
    let mut lo = neutral_slope - gap;
    while q_of(&charge(lo)?) < q {
        gap *= 2.0;
        lo = neutral_slope - gap;
        if gap > 1e6 {
            return Err(Error::Internal("could not bracket the ionic slope".into()));
        }
    }
    let mut hi = neutral_slope;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if q_of(&charge(mid)?) >= q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let profile = charge(lo)?.ok_or_else(|| Error::Internal("ionic shot did not terminate".into()))?;
    Ok((lo, profile))
}

/// Radial samples of a Thomas-Fermi atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSamples {
    pub r: Vec<f64>,
    pub rho: Vec<f64>,
    /// Electrostatic potential `φ` (nuclear plus electronic).
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfAtomSolution {
    pub z: f64,
    /// Requested electron number.
    pub n: f64,
    /// Electrons actually bound, `min(N, Z)`.
    pub n_bound: f64,
    /// `χ'(0)` of the (possibly ionic) universal solution.
    pub slope: f64,
    /// Chemical potential in hartree (zero for the neutral atom).
    pub mu: f64,
    /// Cutoff radius in units of `b`; `None` for the neutral atom.
    pub x0: Option<f64>,
    /// Length scale `b` in bohr, `r = b x`.
    pub b: f64,
    pub c_k: f64,
    /// Energy from the slope formula, hartree.
    pub energy: f64,
    /// Energy from quadrature of the functional, hartree.
    pub energy_quadrature: f64,
    pub kinetic: f64,
    pub attraction: f64,
    pub repulsion: f64,
    /// `∫ρ` by quadrature.
    pub electron_count: f64,
    pub radial: RadialSamples,
}

/// Radial nodes used for atom samples and quadrature.
pub const RADIAL_POINTS: usize = 4001;

/// Thomas-Fermi atom with charge `z` and `n` electrons. For `n ≥ z` the
/// neutral atom is returned.
pub fn tf_atom(z: f64, n: f64, c_k: f64) -> Result<TfAtomSolution> {
    if !(z > 0.0 && z.is_finite()) || !(n > 0.0 && n.is_finite()) {
        return Err(invalid(format!("need Z > 0 and N > 0, got Z = {z}, N = {n}")));
    }
    if !(c_k > 0.0) {
        return Err(invalid(format!("kinetic prefactor must be positive, got {c_k}")));
    }
    check_constant_identity()?;
    let neutral = NeutralProfile::get()?;
    let b = length_scale(z, c_k);
    let kappa = density_prefactor(c_k);
    let n_bound = n.min(z);

    let (slope, mu, x0, chi): (f64, f64, Option<f64>, Box<dyn Fn(f64) -> f64>) = if n >= z {
        let p = neutral.clone();
        (neutral.slope(), 0.0, None, Box::new(move |x| p.chi(x)))
    } else {
        let (s, ion) = ion_profile(1.0 - n / z, neutral.slope(), &OdeOptions::default())?;
        let x0 = ion.x0;
        (s, (z - n) / (b * x0), Some(x0), Box::new(move |x| ion.eval(x).0))
    };

    let r_min = 1e-6 * b;
    let r_max = x0.map_or(1e4 * b, |x0| x0 * b);
    let grid = crate::quadrature::LogGrid::new(r_min, r_max, RADIAL_POINTS);
    let mut rho = Vec::with_capacity(RADIAL_POINTS);
    let mut phi = Vec::with_capacity(RADIAL_POINTS);
    for &r in &grid.r {
        let inner = (z * chi(r / b) / r).max(0.0);
        rho.push(kappa * inner * inner.sqrt());
        phi.push(inner + mu);
    }
    if let Some(last) = rho.last_mut() {
        if x0.is_some() {
            *last = 0.0;
        }
    }

    let four_pi = 4.0 * std::f64::consts::PI;
    let integrate = |f: &dyn Fn(usize) -> f64| {
        let v: Vec<f64> = (0..grid.r.len()).map(|i| grid.r[i] * f(i)).collect();
        simpson(&v, grid.step)
    };
    // ∫_0^{r_min} of the r^{-3/2} core is below 1e-8 relative; it is added analytically.
    let core = |power: f64, coeff: f64| coeff * r_min.powf(power) / power;
    let rho0 = kappa * (z / r_min).powf(1.5);
    let count = integrate(&|i| four_pi * grid.r[i].powi(2) * rho[i]) + core(1.5, four_pi * rho0 * r_min.powf(1.5));
    let kinetic = c_k * integrate(&|i| four_pi * grid.r[i].powi(2) * rho[i].powf(5.0 / 3.0))
        + core(0.5, c_k * four_pi * rho0.powf(5.0 / 3.0) * r_min.powf(2.5));
    let attraction =
        -z * (integrate(&|i| four_pi * grid.r[i] * rho[i]) + core(0.5, four_pi * rho0 * r_min.powf(1.5)));
    let enclosed = grid.cumulative(|r| {
        let inner = (z * chi(r / b) / r).max(0.0);
        four_pi * r * r * kappa * inner * inner.sqrt()
    });
    // Beyond the ion radius the enclosed charge is constant.
    let outside = enclosed.last().map_or(0.0, |q| 0.5 * q * q / r_max) * f64::from(u8::from(x0.is_some()));
    let repulsion = 0.5 * integrate(&|i| (enclosed[i] / grid.r[i]).powi(2)) + outside;
    let energy_quadrature = kinetic + attraction + repulsion;
    let energy = 3.0 / 7.0 * (z * z * slope / b + mu * (z - n_bound));

    let rel = ((energy - energy_quadrature) / energy).abs();
    if rel > 1e-3 {
        log::warn!("TF energy cross-check: slope formula {energy}, quadrature {energy_quadrature}");
    }
    Ok(TfAtomSolution {
        z,
        n,
        n_bound,
        slope,
        mu,
        x0,
        b,
        c_k,
        energy,
        energy_quadrature,
        kinetic,
        attraction,
        repulsion,
        electron_count: count,
        radial: RadialSamples { r: grid.r, rho, phi },
    })
}

impl TfAtomSolution {
    /// Max over nodes of `|ρ^{2/3} - C [φ - μ]_+| / max(1, C [φ - μ]_+)`
    /// with `C = 3/(5c_K)`.
    pub fn tf_equation_residual(&self) -> f64 {
        let c = 3.0 / (5.0 * self.c_k);
        self.radial
            .rho
            .iter()
            .zip(&self.radial.phi)
            .map(|(rho, phi)| {
                let rhs = c * (phi - self.mu).max(0.0);
                (rho.powf(2.0 / 3.0) - rhs).abs() / rhs.max(1.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,rho,phi")?;
        for i in 0..self.radial.r.len() {
            writeln!(out, "{:e},{:e},{:e}", self.radial.r[i], self.radial.rho[i], self.radial.phi[i])?;
        }
        Ok(())
    }
}
