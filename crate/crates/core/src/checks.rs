//! Randomised audits of the inequalities the energy must satisfy: the free
//! lower bound, the exchange bound, rank-one and fractional exchange versus
//! direct, the analytic gradient, the occupation projection and the
//! Lieb-Thirring inequality on computed minimisers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{build_even_tempered_basis, NuclearFrame};
use crate::density::{project_capped_simplex, random_density_matrix, DensityMatrix};
use crate::energy::{exchange_bound_slack, lieb_thirring_slack, MullerSystem};
use crate::error::Result;
use crate::experiments::atom_system;
use crate::solver::{fd_gradient_audit, minimize_system, SolveOptions};

pub const EXCHANGE_EPSILONS: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occupations {
    /// Independent uniform draws in `[0, 1]`.
    Feasible,
    /// One occupation equal to 1, the rest 0.
    RankOne,
    /// Independent uniform draws in `(0, 1)`, none at the ends.
    StrictlyFractional,
    /// Strictly fractional with total at most 1.
    FractionalUnitTrace,
}

pub struct RandomInstance {
    pub z: f64,
    pub n_basis: usize,
    pub system: MullerSystem,
    pub dm: DensityMatrix,
}

/// Random atom (`Z ∈ [0.5, 4]`, `1..=max_basis` primitives) with a random
/// density matrix of the requested occupation kind.
pub fn random_instance(seed: u64, max_basis: usize, kind: Occupations) -> Result<RandomInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = rng.random_range(0.5..4.0);
    let lo = if kind == Occupations::Feasible || kind == Occupations::RankOne { 1 } else { 2 };
    let n_basis = rng.random_range(lo..=max_basis.max(lo));
    let system = atom_system(z, n_basis)?;
    let m = system.dim();
    let occ: Vec<f64> = match kind {
        Occupations::Feasible => (0..m).map(|_| rng.random_range(0.0..=1.0)).collect(),
        Occupations::RankOne => {
            let k = rng.random_range(0..m);
            (0..m).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
        }
        Occupations::StrictlyFractional => (0..m).map(|_| rng.random_range(0.01..0.99)).collect(),
        Occupations::FractionalUnitTrace => {
            let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..0.99)).collect();
            let budget = rng.random_range(0.1..1.0);
            let total: f64 = raw.iter().sum();
            raw.iter().map(|v| v / total * budget).collect()
        }
    };
    let dm = random_density_matrix(occ, &mut rng)?;
    Ok(RandomInstance { z, n_basis, system, dm })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSample {
    pub seed: u64,
    pub z: f64,
    pub n_basis: usize,
    pub trace: f64,
    /// `E_∞(γ) + tr γ/8`, where `E_∞` drops the nuclear attraction.
    pub free_slack: f64,
    /// `(ε, slack)` for each of [`EXCHANGE_EPSILONS`].
    pub exchange_slacks: Vec<(f64, f64)>,
}

pub fn free_and_exchange_bounds(trials: usize, seed: u64) -> Result<Vec<BoundSample>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.wrapping_add(k);
            let inst = random_instance(s, 8, Occupations::Feasible)?;
            let b = inst.system.breakdown(&inst.dm)?;
            let free = b.kinetic + b.direct - b.exchange;
            let exchange_slacks = EXCHANGE_EPSILONS
                .iter()
                .map(|&e| exchange_bound_slack(&b, e).map(|v| (e, v)))
                .collect::<Result<_>>()?;
            Ok(BoundSample {
                seed: s,
                z: inst.z,
                n_basis: inst.n_basis,
                trace: b.trace,
                free_slack: free + b.trace / 8.0,
                exchange_slacks,
            })
        })
        .collect()
}

/// `|X - D| / max(1, D)` for random rank-one projectors.
pub fn rank_one_errors(trials: usize, seed: u64) -> Result<Vec<f64>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let inst = random_instance(seed.wrapping_add(k), 8, Occupations::RankOne)?;
            let b = inst.system.breakdown(&inst.dm)?;
            Ok((b.exchange - b.direct).abs() / b.direct.max(1.0))
        })
        .collect()
}

/// `X - D` for random strictly fractional matrices.
pub fn fractional_slacks(trials: usize, seed: u64, kind: Occupations) -> Result<Vec<f64>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let inst = random_instance(seed.wrapping_add(k), 8, kind)?;
            let b = inst.system.breakdown(&inst.dm)?;
            Ok(b.exchange - b.direct)
        })
        .collect()
}

/// Finite-difference gradient audits on random atoms and diatomics with at
/// most `max_basis` primitives.
pub fn gradient_audits(trials: usize, seed: u64, max_basis: usize) -> Result<Vec<f64>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.wrapping_add(k);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let z1 = rng.random_range(0.5..3.0);
            if k % 2 == 0 || max_basis < 2 {
                let n = rng.random_range(1..=max_basis);
                let basis = build_even_tempered_basis(z1, n, [0.0; 3])?;
                fd_gradient_audit(&basis, &NuclearFrame::atom(z1, [0.0; 3])?, s)
            } else {
                let z2 = rng.random_range(0.5..3.0);
                let r = rng.random_range(0.8..4.0);
                let n = rng.random_range(1..=max_basis / 2);
                let frame = NuclearFrame::diatomic(z1, z2, r)?;
                let p = frame.positions();
                let basis = build_even_tempered_basis(z1, n, p[0])?.union(&build_even_tempered_basis(z2, n, p[1])?);
                fd_gradient_audit(&basis, &frame, s)
            }
        })
        .collect()
}

/// Nearest point of `{0 ≤ λ ≤ cap, Σλ = total}` by enumerating which
/// coordinates sit at 0, at `cap` or strictly between.
pub fn brute_force_capped_simplex(x: &[f64], total: f64, cap: f64) -> Option<Vec<f64>> {
    let m = x.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(m as u32) {
        let mut c = code;
        let state: Vec<usize> = (0..m)
            .map(|_| {
                let s = c % 3;
                c /= 3;
                s
            })
            .collect();
        let upper = state.iter().filter(|&&s| s == 1).count() as f64;
        let free: Vec<usize> = (0..m).filter(|&i| state[i] == 2).collect();
        let mut lam = vec![0.0; m];
        for i in 0..m {
            if state[i] == 1 {
                lam[i] = cap;
            }
        }
        if free.is_empty() {
            if (upper * cap - total).abs() > 1e-12 {
                continue;
            }
        } else {
            let tau = (free.iter().map(|&i| x[i]).sum::<f64>() + upper * cap - total) / free.len() as f64;
            for &i in &free {
                lam[i] = x[i] - tau;
            }
            if free.iter().any(|&i| lam[i] < -1e-12 || lam[i] > cap + 1e-12) {
                continue;
            }
        }
        let dist: f64 = x.iter().zip(&lam).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, lam));
        }
    }
    best.map(|(_, l)| l)
}

/// Max-norm distance between the projection and the brute-force oracle on
/// random instances with at most four coordinates.
pub fn projection_oracle_errors(trials: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let m = rng.random_range(1..=4usize);
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..2.0)).collect();
            let total = rng.random_range(0.0..m as f64);
            let fast = project_capped_simplex(&x, total, 1.0)?.point;
            let slow = brute_force_capped_simplex(&x, total, 1.0).expect("feasible set is nonempty");
            Ok(fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiebThirringRecord {
    pub z: f64,
    pub n: f64,
    pub energy: f64,
    pub converged: bool,
    pub slack: f64,
}

/// Lieb-Thirring slack `T - L ∫ρ^{5/3}` at atomic minimisers.
pub fn lieb_thirring_minimizers(cases: &[(f64, f64)], n_basis: usize, l: f64, opts: &SolveOptions) -> Result<Vec<LiebThirringRecord>> {
    cases
        .iter()
        .map(|&(z, n)| {
            let system = atom_system(z, n_basis)?;
            let res = minimize_system(&system, n, opts)?;
            Ok(LiebThirringRecord {
                z,
                n,
                energy: res.breakdown.total_electronic,
                converged: res.converged,
                slack: lieb_thirring_slack(&res.dm, &system, l)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub trials: usize,
    pub seed: u64,
    pub free_bound_min_slack: f64,
    pub exchange_bound_min_slack: f64,
    pub rank_one_max_error: f64,
    pub fractional_min_slack: f64,
    pub fractional_unit_trace_min_slack: f64,
    pub gradient_max_error: f64,
    pub projection_max_error: f64,
    pub lieb_thirring_constant: f64,
    pub lieb_thirring: Vec<LiebThirringRecord>,
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Runs every audit with `trials` random instances each (gradient audits use
/// `trials / 25`, at least one).
pub fn inequality_report(trials: usize, seed: u64, lt_constant: f64) -> Result<InequalityReport> {
    let bounds = free_and_exchange_bounds(trials, seed)?;
    let free: Vec<f64> = bounds.iter().map(|b| b.free_slack).collect();
    let exch: Vec<f64> = bounds.iter().flat_map(|b| b.exchange_slacks.iter().map(|e| e.1)).collect();
    let lt_cases = [(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (2.0, 1.0), (1.0, 0.5)];
    Ok(InequalityReport {
        trials,
        seed,
        free_bound_min_slack: min(&free),
        exchange_bound_min_slack: min(&exch),
        rank_one_max_error: max(&rank_one_errors(trials, seed)?),
        fractional_min_slack: min(&fractional_slacks(trials, seed, Occupations::StrictlyFractional)?),
        fractional_unit_trace_min_slack: min(&fractional_slacks(trials, seed, Occupations::FractionalUnitTrace)?),
        gradient_max_error: max(&gradient_audits((trials / 25).max(1), seed, 6)?),
        projection_max_error: max(&projection_oracle_errors(trials, seed)?),
        lieb_thirring_constant: lt_constant,
        lieb_thirring: lieb_thirring_minimizers(&lt_cases, 8, lt_constant, &SolveOptions::default())?,
    })
}
