//! Diatomic experiments built on the Müller solver: dissociation curves,
//! Born-Oppenheimer minima, binding reports, the united-atom comparison,
//! trace saturation and the distance to the Thomas-Fermi density.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{build_even_tempered_basis, BasisSet, NuclearFrame, Primitive};
use crate::energy::MullerSystem;
use crate::error::{invalid, Error, Result};
use crate::quadrature::LogGrid;
use crate::solver::{minimize_from, minimize_system, transfer_sqrt, SolveOptions, SolveResult, TraceMode};
use crate::thomas_fermi::TfAtomSolution;

/// Default golden-section resolution in bohr.
pub const BO_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Even-tempered primitives per nucleus.
    pub n_basis: usize,
    pub solve: SolveOptions,
    /// Energy accuracy attributed to a converged solve (hartree).
    pub energy_tolerance: f64,
    /// Carry each scan point's solution to the next separation.
    pub warm_start: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            n_basis: 6,
            solve: SolveOptions::relaxed(true),
            energy_tolerance: 1e-6,
            warm_start: true,
        }
    }
}

impl ExperimentOptions {
    fn with_shift(&self, shift_included: bool) -> Self {
        let mut o = self.clone();
        o.solve.shift_included = shift_included;
        o
    }
}

/// Union of the two atoms' even-tempered sets, each on its own nucleus.
pub fn diatomic_system(z1: f64, z2: f64, r: f64, n_basis: usize) -> Result<MullerSystem> {
    let frame = NuclearFrame::diatomic(z1, z2, r)?;
    let p = frame.positions();
    let basis = build_even_tempered_basis(z1, n_basis, p[0])?.union(&build_even_tempered_basis(z2, n_basis, p[1])?);
    MullerSystem::new(basis, frame)
}

pub fn atom_system(z: f64, n_basis: usize) -> Result<MullerSystem> {
    MullerSystem::new(build_even_tempered_basis(z, n_basis, [0.0; 3])?, NuclearFrame::atom(z, [0.0; 3])?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomEnergy {
    pub z: f64,
    pub n: f64,
    /// Objective under the options' convention.
    pub energy: f64,
    pub unshifted: f64,
    pub shifted: f64,
    pub trace: f64,
    pub converged: bool,
}

/// Atomic energy in the single-centre basis; an empty atom has energy 0.
pub fn atom_energy(z: f64, n: f64, opts: &ExperimentOptions) -> Result<AtomEnergy> {
    if n < 0.0 {
        return Err(invalid(format!("electron number must be nonnegative, got {n}")));
    }
    if n == 0.0 {
        return Ok(AtomEnergy {
            z,
            n,
            energy: 0.0,
            unshifted: 0.0,
            shifted: 0.0,
            trace: 0.0,
            converged: true,
        });
    }
    let res = minimize_system(&atom_system(z, opts.n_basis)?, n, &opts.solve)?;
    Ok(AtomEnergy {
        z,
        n,
        energy: res.objective(opts.solve.shift_included),
        unshifted: res.breakdown.total_electronic,
        shifted: res.breakdown.shifted,
        trace: res.trace_at_solution,
        converged: res.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub r: f64,
    pub electronic: f64,
    /// `electronic + Z1 Z2 / R`.
    pub total: f64,
    /// `electronic + tr γ/8 + Z1 Z2 / R`.
    pub shifted_total: f64,
    pub trace: f64,
    pub converged: bool,
    pub warm_started: bool,
}

impl CurvePoint {
    fn from_result(r: f64, res: &SolveResult, warm_started: bool) -> Self {
        let b = &res.breakdown;
        CurvePoint {
            r,
            electronic: b.total_electronic,
            total: b.total,
            shifted_total: b.shifted + b.nuclear_repulsion,
            trace: res.trace_at_solution,
            converged: res.converged,
            warm_started,
        }
    }

    pub fn value(&self, shift_included: bool) -> f64 {
        if shift_included {
            self.shifted_total
        } else {
            self.total
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissociationCurve {
    pub z1: f64,
    pub z2: f64,
    pub n: f64,
    pub split: (f64, f64),
    pub shift_included: bool,
    pub mode: TraceMode,
    /// Sum of the split's atomic energies in the curve's convention.
    pub asymptote: f64,
    pub points: Vec<CurvePoint>,
}

impl DissociationCurve {
    pub fn values(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.r, p.value(self.shift_included))).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,electronic,total,shifted_total,trace,converged,warm_started")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.r, p.electronic, p.total, p.shifted_total, p.trace, p.converged, p.warm_started
            )?;
        }
        Ok(())
    }
}

fn check_split(n: f64, split: (f64, f64)) -> Result<()> {
    if split.0 < 0.0 || split.1 < 0.0 || split.0 + split.1 > n + 1e-12 {
        return Err(invalid(format!(
            "split ({}, {}) must be nonnegative with N1 + N2 ≤ N = {n}",
            split.0, split.1
        )));
    }
    Ok(())
}

fn solve_cold(z1: f64, z2: f64, n: f64, r: f64, opts: &ExperimentOptions) -> Result<(MullerSystem, SolveResult)> {
    let system = diatomic_system(z1, z2, r, opts.n_basis)?;
    let res = minimize_system(&system, n, &opts.solve)?;
    Ok((system, res))
}

/// Energy curve over increasing separations `r_list` (bohr).
pub fn dissociation_scan(
    z1: f64,
    z2: f64,
    n: f64,
    split: (f64, f64),
    r_list: &[f64],
    opts: &ExperimentOptions,
) -> Result<DissociationCurve> {
    if r_list.is_empty() {
        return Err(invalid("separation list is empty"));
    }
    if r_list.windows(2).any(|w| w[1] <= w[0]) || r_list[0] <= 0.0 {
        return Err(invalid("separations must be positive and strictly increasing"));
    }
    check_split(n, split)?;
    let shift = opts.solve.shift_included;
    let asymptote = atom_energy(z1, split.0, opts)?.energy + atom_energy(z2, split.1, opts)?.energy;

    let points = if opts.warm_start {
        let mut points = Vec::with_capacity(r_list.len());
        let mut previous: Option<(MullerSystem, SolveResult)> = None;
        for &r in r_list {
            let system = diatomic_system(z1, z2, r, opts.n_basis)?;
            let mut warm = None;
            if let Some((ps, pr)) = &previous {
                let start = transfer_sqrt(ps, pr, &system);
                let res = minimize_from(&system, n, &opts.solve, &start)?;
                if res.converged {
                    warm = Some(res);
                } else {
                    log::info!("warm start at R = {r} did not converge; solving cold");
                }
            }
            let warm_started = warm.is_some();
            let res = match warm {
                Some(res) => res,
                None => minimize_system(&system, n, &opts.solve)?,
            };
            points.push(CurvePoint::from_result(r, &res, warm_started));
            previous = Some((system, res));
        }
        points
    } else {
        r_list
            .par_iter()
            .map(|&r| solve_cold(z1, z2, n, r, opts).map(|(_, res)| CurvePoint::from_result(r, &res, false)))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(DissociationCurve {
        z1,
        z2,
        n,
        split,
        shift_included: shift,
        mode: opts.solve.mode,
        asymptote,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoMinimum {
    pub r_star: f64,
    pub energy: f64,
    /// The lowest sampled point is the largest separation.
    pub dissociative: bool,
    /// The lowest sampled point is on either end of the sample.
    pub at_boundary: bool,
    pub evaluations: usize,
    pub converged: bool,
}

/// Golden-section search for a minimum of `f` on `[a, b]` down to width `tol`.
pub fn golden_section_min(mut f: impl FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64, usize)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evals = 2;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
        evals += 1;
    }
    Ok(if fc <= fd { (c, fc, evals) } else { (d, fd, evals) })
}

/// Refine the discrete minimum of sampled `(R, E)` pairs with golden-section
/// search between its neighbours, calling `eval` at probe separations.
pub fn born_oppenheimer_min(
    samples: &[(f64, f64)],
    eval: impl FnMut(f64) -> Result<f64>,
    tol: f64,
) -> Result<BoMinimum> {
    if samples.len() < 3 {
        return Err(invalid(format!("need at least 3 converged points, got {}", samples.len())));
    }
    let mut best = 0;
    for (i, s) in samples.iter().enumerate() {
        if s.1 < samples[best].1 {
            best = i;
        }
    }
    let last = samples.len() - 1;
    if best == 0 || best == last {
        return Ok(BoMinimum {
            r_star: samples[best].0,
            energy: samples[best].1,
            dissociative: best == last,
            at_boundary: true,
            evaluations: 0,
            converged: true,
        });
    }
    let (r, e, evaluations) = golden_section_min(eval, samples[best - 1].0, samples[best + 1].0, tol)?;
    let (r_star, energy) = if e <= samples[best].1 { (r, e) } else { samples[best] };
    Ok(BoMinimum {
        r_star,
        energy,
        dissociative: false,
        at_boundary: false,
        evaluations,
        converged: true,
    })
}

/// Born-Oppenheimer minimum of a computed curve, re-solving at probe points.
pub fn refine_curve_minimum(curve: &DissociationCurve, opts: &ExperimentOptions) -> Result<BoMinimum> {
    let shift = curve.shift_included;
    let samples: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.converged)
        .map(|p| (p.r, p.value(shift)))
        .collect();
    let mut all_converged = true;
    let mut min = born_oppenheimer_min(
        &samples,
        |r| {
            let (_, res) = solve_cold(curve.z1, curve.z2, curve.n, r, opts)?;
            all_converged &= res.converged;
            Ok(CurvePoint::from_result(r, &res, false).value(shift))
        },
        BO_RESOLUTION,
    )?;
    min.converged = all_converged;
    Ok(min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Binds,
    Inconclusive,
    /// The molecule lies above the split's atoms by more than the tolerance.
    Exceeds,
}

impl Verdict {
    pub fn classify(margin: f64, tolerance: f64) -> Self {
        if margin < -10.0 * tolerance {
            Verdict::Binds
        } else if margin > 10.0 * tolerance {
            Verdict::Exceeds
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub n1: f64,
    pub n2: f64,
    /// Born-Oppenheimer molecular energy.
    pub left: f64,
    /// `E_atom(N1, Z1) + E_atom(N2, Z2)`.
    pub right: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionReport {
    pub shift_included: bool,
    pub minimum: BoMinimum,
    pub splits: Vec<SplitRecord>,
    pub curve: DissociationCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingReport {
    pub z1: f64,
    pub z2: f64,
    pub n: f64,
    pub tolerance: f64,
    /// Energies including `tr γ/8`.
    pub shifted: ConventionReport,
    /// Plain Müller energies.
    pub unshifted: ConventionReport,
}

/// Compare the Born-Oppenheimer molecular energy with each split's atoms, in
/// both the shifted and the unshifted convention (relaxed trace in both).
pub fn binding_report(
    z1: f64,
    z2: f64,
    n: f64,
    splits: &[(f64, f64)],
    r_list: &[f64],
    opts: &ExperimentOptions,
) -> Result<BindingReport> {
    if splits.is_empty() {
        return Err(invalid("no charge splits given"));
    }
    for &s in splits {
        check_split(n, s)?;
    }
    let convention = |shift: bool| -> Result<ConventionReport> {
        let o = ExperimentOptions {
            solve: SolveOptions {
                mode: TraceMode::TraceLe,
                ..opts.solve.clone()
            },
            ..opts.with_shift(shift)
        };
        let curve = dissociation_scan(z1, z2, n, splits[0], r_list, &o)?;
        let minimum = refine_curve_minimum(&curve, &o)?;
        let mut cache: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        let mut atom = |z: f64, k: f64| -> Result<f64> {
            let key = (z.to_bits(), k.to_bits());
            if let Some(e) = cache.get(&key) {
                return Ok(*e);
            }
            let e = atom_energy(z, k, &o)?.energy;
            cache.insert(key, e);
            Ok(e)
        };
        let mut records = Vec::with_capacity(splits.len());
        for &(n1, n2) in splits {
            let right = atom(z1, n1)? + atom(z2, n2)?;
            let margin = minimum.energy - right;
            records.push(SplitRecord {
                n1,
                n2,
                left: minimum.energy,
                right,
                margin,
                verdict: Verdict::classify(margin, opts.energy_tolerance),
            });
        }
        Ok(ConventionReport {
            shift_included: shift,
            minimum,
            splits: records,
            curve,
        })
    };
    Ok(BindingReport {
        z1,
        z2,
        n,
        tolerance: opts.energy_tolerance,
        shifted: convention(true)?,
        unshifted: convention(false)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitedAtomPoint {
    pub r: f64,
    pub electronic: f64,
    /// `electronic - united_energy`.
    pub slack: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitedAtomReport {
    pub z1: f64,
    pub z2: f64,
    pub n: f64,
    pub united_energy: f64,
    pub united_converged: bool,
    pub united_basis_size: usize,
    pub points: Vec<UnitedAtomPoint>,
    /// Points with slack below `-1e-6`.
    pub violations: usize,
    /// Whether the slack increases along the sampled separations.
    pub monotone: bool,
}

/// Single-centre basis containing the even-tempered sets for `Z1 + Z2`,
/// `Z1` and `Z2`, without repeated exponents.
pub fn united_atom_basis(z1: f64, z2: f64, n_basis: usize) -> Result<BasisSet> {
    let mut exps: Vec<f64> = Vec::new();
    for z in [z1 + z2, z1, z2] {
        exps.extend(build_even_tempered_basis(z, n_basis, [0.0; 3])?.exponents());
    }
    exps.sort_by(f64::total_cmp);
    exps.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * b.abs());
    Ok(BasisSet::new(
        exps.into_iter().map(|a| Primitive::new([0.0; 3], a)).collect::<Result<_>>()?,
    ))
}

/// Electronic energy at each separation against the united atom `Z1 + Z2`.
pub fn united_atom_check(z1: f64, z2: f64, n: f64, r_list: &[f64], opts: &ExperimentOptions) -> Result<UnitedAtomReport> {
    if r_list.is_empty() {
        return Err(invalid("separation list is empty"));
    }
    let shift = opts.solve.shift_included;
    let basis = united_atom_basis(z1, z2, opts.n_basis)?;
    let united_basis_size = basis.len();
    let united = minimize_system(&MullerSystem::new(basis, NuclearFrame::atom(z1 + z2, [0.0; 3])?)?, n, &opts.solve)?;
    let united_energy = united.objective(shift);
    let points = r_list
        .iter()
        .map(|&r| {
            let (_, res) = solve_cold(z1, z2, n, r, opts)?;
            let electronic = res.objective(shift);
            Ok(UnitedAtomPoint {
                r,
                electronic,
                slack: electronic - united_energy,
                converged: res.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = points.iter().filter(|p| p.slack < -1e-6).count();
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.r.total_cmp(&b.r));
    let monotone = sorted.windows(2).all(|w| w[1].slack >= w[0].slack);
    Ok(UnitedAtomReport {
        z1,
        z2,
        n,
        united_energy,
        united_converged: united.converged,
        united_basis_size,
        points,
        violations,
        monotone,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationRow {
    pub n: f64,
    pub trace: f64,
    pub shifted: f64,
    pub electronic: f64,
    pub converged: bool,
}

/// Relaxed, shifted atomic solves for each requested electron number.
pub fn saturation_scan(z: f64, n_list: &[f64], opts: &ExperimentOptions) -> Result<Vec<SaturationRow>> {
    let solve = SolveOptions {
        mode: TraceMode::TraceLe,
        shift_included: true,
        ..opts.solve.clone()
    };
    let system = atom_system(z, opts.n_basis)?;
    n_list
        .iter()
        .map(|&n| {
            let res = minimize_system(&system, n, &solve)?;
            Ok(SaturationRow {
                n,
                trace: res.trace_at_solution,
                shifted: res.breakdown.shifted,
                electronic: res.breakdown.total_electronic,
                converged: res.converged,
            })
        })
        .collect()
}

/// `D[f] = ½ ∫ Q(r)²/r² dr` for a spherical density `f` sampled on a
/// logarithmic grid, where `Q` is the charge of `f` inside `r`. The charge
/// left at the last node contributes its exterior point-charge energy.
pub fn radial_coulomb_energy(grid: &LogGrid, f: &[f64]) -> Result<f64> {
    if f.len() != grid.r.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.r.len(),
            found: f.len(),
        });
    }
    let mut q = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    q.push(0.0);
    for i in 1..f.len() {
        let (a, b) = (grid.r[i - 1], grid.r[i]);
        acc += 0.5 * grid.step * (4.0 * PI * (a.powi(3) * f[i - 1] + b.powi(3) * f[i]));
        q.push(acc);
    }
    let mut d = 0.0;
    for i in 1..q.len() {
        d += 0.5 * grid.step * (q[i - 1] * q[i - 1] / grid.r[i - 1] + q[i] * q[i] / grid.r[i]);
    }
    let last = grid.r.len() - 1;
    Ok(0.5 * d + 0.5 * q[last] * q[last] / grid.r[last])
}

fn interpolate_log(r: &[f64], v: &[f64], x: f64) -> f64 {
    if x <= r[0] {
        return v[0];
    }
    if x >= r[r.len() - 1] {
        return 0.0;
    }
    let k = r.partition_point(|&t| t <= x) - 1;
    let w = (x.ln() - r[k].ln()) / (r[k + 1].ln() - r[k].ln());
    v[k] * (1.0 - w) + v[k + 1] * w
}

/// `D[ρ_γ - ρ_TF]` for an atomic solution on a single-centre basis.
pub fn tf_density_distance(result: &SolveResult, system: &MullerSystem, tf: &TfAtomSolution) -> Result<f64> {
    let center = system.basis().single_center().ok_or_else(|| {
        Error::UnsupportedGeometry("density distance needs a single-centre basis".into())
    })?;
    let p = system.orthonormalizer().to_primitive(result.dm.gamma());
    let alpha_min = system.basis().exponents().into_iter().fold(f64::INFINITY, f64::min);
    let r_max = tf.radial.r[tf.radial.r.len() - 1].max(12.0 / alpha_min.sqrt());
    let grid = LogGrid::new(tf.radial.r[0], r_max, 8001);
    let f: Vec<f64> = grid
        .r
        .iter()
        .map(|&r| {
            let x = [center[0], center[1], center[2] + r];
            system.basis().density_at(&p, &x) - interpolate_log(&tf.radial.r, &tf.radial.rho, r)
        })
        .collect();
    radial_coulomb_energy(&grid, &f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast() -> ExperimentOptions {
        ExperimentOptions {
            n_basis: 4,
            solve: SolveOptions {
                starts: 1,
                ..SolveOptions::relaxed(true)
            },
            ..Default::default()
        }
    }

    #[test]
    fn golden_section_recovers_parabola_vertex() {
        let f = |r: f64| 0.3 * (r - 1.437).powi(2) - 1.2;
        let samples: Vec<(f64, f64)> = (0..8).map(|i| 0.5 + 0.4 * i as f64).map(|r| (r, f(r))).collect();
        let m = born_oppenheimer_min(&samples, |r| Ok(f(r)), 1e-4).unwrap();
        assert!((m.r_star - 1.437).abs() < 1e-3);
        assert!(!m.dissociative && !m.at_boundary);
    }

    #[test]
    fn decreasing_curve_is_dissociative() {
        let samples: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, 1.0 / i as f64)).collect();
        let m = born_oppenheimer_min(&samples, |_| unreachable!(), 1e-3).unwrap();
        assert!(m.dissociative);
        assert_eq!(m.r_star, 5.0);
        assert!(born_oppenheimer_min(&samples[..2], |_| Ok(0.0), 1e-3).is_err());
    }

    #[test]
    fn verdicts() {
        assert_eq!(Verdict::classify(-1e-3, 1e-6), Verdict::Binds);
        assert_eq!(Verdict::classify(-5e-6, 1e-6), Verdict::Inconclusive);
        assert_eq!(Verdict::classify(1e-3, 1e-6), Verdict::Exceeds);
    }

    #[test]
    fn empty_atom_and_invalid_split() {
        let o = fast();
        assert_eq!(atom_energy(1.0, 0.0, &o).unwrap().energy, 0.0);
        assert!(dissociation_scan(1.0, 1.0, 2.0, (2.0, 1.0), &[1.0], &o).is_err());
        assert!(dissociation_scan(1.0, 1.0, 2.0, (1.0, 1.0), &[2.0, 1.0], &o).is_err());
    }

    #[test]
    fn united_basis_deduplicates() {
        // The Z = 2 and Z = 1 sets share their most diffuse exponent.
        let b = united_atom_basis(1.0, 1.0, 4).unwrap();
        assert_eq!(b.len(), 7);
    }

    #[test]
    fn radial_energy_of_zero_and_shell() {
        let grid = LogGrid::new(1e-6, 50.0, 4001);
        assert_eq!(radial_coulomb_energy(&grid, &vec![0.0; 4001]).unwrap(), 0.0);
        // Unit Gaussian charge with exponent 1: D = 1/√(2π).
        let f: Vec<f64> = grid.r.iter().map(|r| (-r * r).exp() / PI.powf(1.5)).collect();
        let d = radial_coulomb_energy(&grid, &f).unwrap();
        assert!((d - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-6, "{d}");
    }

    #[test]
    fn saturation_traces() {
        let rows = saturation_scan(1.0, &[0.5, 1.0, 3.0], &fast()).unwrap();
        assert!((rows[0].trace - 0.5).abs() < 1e-6);
        assert!(rows[2].trace < 3.0);
        assert!(rows.windows(2).all(|w| w[1].trace >= w[0].trace - 1e-9));
    }
}
