//! Projected-gradient minimisation of the Müller energy in `g = γ^{1/2}`.
//!
//! The feasible set for `g` is `{g = gᵀ ⪰ 0, g² ≤ cap, tr g² = N}` (or
//! `tr g² ≤ N`). Its Euclidean projection acts on the spectrum only: with
//! `y = U diag(σ) Uᵀ` the nearest feasible point is `U diag(s) Uᵀ` where
//! `s_i = clip(c σ_i, 0, √cap)` and the scale `c > 0` is the multiplier of the
//! sphere constraint, chosen so that `Σ s_i² = N`. In the relaxed mode the
//! sphere is replaced by the ball and `c = 1` unless the ball is active.
//!
//! Steps use a Barzilai-Borwein length with monotone backtracking, so the
//! accepted energies never increase.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, NuclearFrame};
use crate::density::{
    random_density_matrix, sorted_eigh, spectral_apply, symmetrize, DensityMatrix,
};
use crate::energy::{EnergyBreakdown, MullerSystem};
use crate::error::{invalid, Result};

/// Step used in the projected-gradient stationarity measure.
pub const STATIONARITY_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    /// `tr γ = N`.
    TraceEq,
    /// `tr γ ≤ N`.
    TraceLe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the projected-gradient norm.
    pub gradient_tolerance: f64,
    pub initial_step: f64,
    /// Step shrink factor in `(0, 1)` used when backtracking.
    pub backtracking: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub mode: TraceMode,
    /// Minimise `E + tr γ/8` instead of `E`.
    pub shift_included: bool,
    pub seed: u64,
    /// Number of cold starts; the best converged one is returned.
    pub starts: usize,
    pub initial_noise: f64,
    pub occupation_cap: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 20_000,
            gradient_tolerance: 1e-7,
            initial_step: 0.05,
            backtracking: 0.5,
            armijo: 1e-4,
            mode: TraceMode::TraceEq,
            shift_included: false,
            seed: 0,
            starts: 3,
            initial_noise: 1e-3,
            occupation_cap: 1.0,
        }
    }
}

impl SolveOptions {
    pub fn relaxed(shift_included: bool) -> Self {
        SolveOptions {
            mode: TraceMode::TraceLe,
            shift_included,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0 && self.initial_step > 0.0 && self.armijo > 0.0) {
            return Err(invalid("tolerance, step and sufficient-decrease constant must be positive"));
        }
        if !(self.backtracking > 0.0 && self.backtracking < 1.0) {
            return Err(invalid(format!("backtracking factor {} not in (0, 1)", self.backtracking)));
        }
        if self.starts == 0 || self.max_iterations == 0 {
            return Err(invalid("need at least one start and one iteration"));
        }
        if !(self.occupation_cap > 0.0) {
            return Err(invalid("occupation cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub dm: DensityMatrix,
    pub breakdown: EnergyBreakdown,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub trace_at_solution: f64,
    /// Seed of the start that produced this result.
    pub seed: u64,
    /// Accepted objective values, one per iteration (not serialised).
    #[serde(skip)]
    pub history: Vec<f64>,
}

impl SolveResult {
    pub fn objective(&self, shift_included: bool) -> f64 {
        self.breakdown.objective(shift_included)
    }
}

/// Sizes `s_i = clip(c σ_i, 0, √cap)` with `Σ s_i² = total`, or `None` when
/// too few `σ_i` are positive to carry `total`.
fn scaled_clip(sigma: &[f64], total: f64, cap: f64) -> Option<Vec<f64>> {
    let root_cap = cap.sqrt();
    let mut order: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > 0.0).collect();
    if (order.len() as f64) * cap < total * (1.0 - 1e-12) {
        return None;
    }
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let mut rest: f64 = order.iter().map(|&i| sigma[i] * sigma[i]).sum();
    let mut scale = root_cap / sigma[order[0]];
    for (k, &i) in order.iter().enumerate() {
        let remaining = total - k as f64 * cap;
        if remaining <= 0.0 {
            break;
        }
        let c = (remaining / rest).sqrt();
        if c * sigma[i] <= root_cap {
            scale = c;
            break;
        }
        rest -= sigma[i] * sigma[i];
        scale = root_cap / sigma[i];
    }
    Some(sigma.iter().map(|&v| (scale * v).clamp(0.0, root_cap)).collect())
}

/// On the sphere `Σ s² = total` the distance to `σ` is affine in `-⟨s, σ⟩`.
/// With too few positive `σ_i`, the maximiser of `⟨s, σ⟩` fills the largest
/// `σ_i` to the cap in order and puts the remainder on the next one.
fn greedy_fill(sigma: &[f64], total: f64, cap: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let mut sizes = vec![0.0; sigma.len()];
    let mut remaining = total;
    for i in order {
        let take = remaining.min(cap);
        sizes[i] = take.sqrt();
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    sizes
}

/// Nearest feasible `g` to a symmetric `y`, with the spectrum it produced.
pub fn project_sqrt(y: &DMatrix<f64>, total: f64, mode: TraceMode, cap: f64) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (sigma, u) = sorted_eigh(&symmetrize(y));
    // One Newton-Schulz step tightens the orthogonality of the eigenvectors,
    // which bounds how far the rebuilt `g` strays from the feasible set.
    let m = u.ncols();
    let u = &u * (DMatrix::identity(m, m) * 3.0 - u.transpose() * &u) * 0.5;
    let root_cap = cap.sqrt();
    let clipped: Vec<f64> = sigma.iter().map(|&v| v.clamp(0.0, root_cap)).collect();
    let sizes = if mode == TraceMode::TraceLe && clipped.iter().map(|s| s * s).sum::<f64>() <= total {
        clipped
    } else {
        let total = total.min(cap * sigma.len() as f64);
        match scaled_clip(&sigma, total, cap) {
            Some(s) => s,
            None => greedy_fill(&sigma, total, cap),
        }
    };
    let g = spectral_apply(&sizes, &u, |s| s);
    Ok((g, sizes, u))
}

struct Objective<'a> {
    system: &'a MullerSystem,
    shift: bool,
}

impl Objective<'_> {
    fn value(&self, g: &DMatrix<f64>) -> Result<(EnergyBreakdown, f64)> {
        let b = self.system.breakdown_from_sqrt(g)?;
        Ok((b, b.objective(self.shift)))
    }
}

/// `min_t ‖g - Π(g - t∇)‖/t` over `t = STATIONARITY_STEP` and the same step
/// divided by `‖∇‖`. The second keeps the measure local when a large gradient
/// would carry the probe across the nonconvex feasible set of `g`.
fn stationarity(g: &DMatrix<f64>, grad: &DMatrix<f64>, n: f64, opts: &SolveOptions) -> Result<f64> {
    let mut best = f64::INFINITY;
    for t in [STATIONARITY_STEP, STATIONARITY_STEP / grad.norm().max(1.0)] {
        let (p, _, _) = project_sqrt(&(g - grad * t), n, opts.mode, opts.occupation_cap)?;
        best = best.min((g - p).norm() / t);
    }
    Ok(best)
}

/// Steps shorter than this are judged by the constraint-corrected change.
const MERIT_STEP: f64 = 1e-8;

/// Energy change of a step. For very short steps the first-order effect of
/// the active constraints (trace, occupations at the cap or at zero) is
/// subtracted with multipliers estimated in the eigenbasis of `g`. These terms
/// vanish for exactly feasible points; in floating point they remove the
/// energy noise caused by rounding of the rebuilt iterate, which otherwise
/// swamps the decrease near stationarity.
fn merit_change(
    system: &MullerSystem,
    g: &DMatrix<f64>,
    grad: &DMatrix<f64>,
    d: &DMatrix<f64>,
    n: f64,
    opts: &SolveOptions,
) -> Result<f64> {
    let change = system.objective_change(g, d, opts.shift_included)?;
    if d.norm() > MERIT_STEP {
        return Ok(change);
    }
    let (sizes, v) = sorted_eigh(g);
    let gv = v.transpose() * grad * &v;
    let dv = v.transpose() * d * &v;
    let root_cap = opts.occupation_cap.sqrt();
    let capped = |s: f64| s >= root_cap * (1.0 - 1e-12);
    let empty = |s: f64| s <= 1e-300;
    let trace: f64 = sizes.iter().map(|s| s * s).sum();
    let delta_trace = 2.0 * g.dot(d) + d.norm_squared();
    let trace_active = opts.mode == TraceMode::TraceEq || (trace - n).abs() <= 1e-12 * n;
    let mu = if trace_active {
        let (mut num, mut den) = (0.0, 0.0);
        for (j, &s) in sizes.iter().enumerate() {
            if !capped(s) && !empty(s) {
                num += s * gv[(j, j)];
                den += s * s;
            }
        }
        if den > 0.0 { num / (2.0 * den) } else { 0.0 }
    } else {
        0.0
    };
    // Multipliers of the capped and the empty block are matrices; their
    // off-diagonal entries matter when several eigenvalues sit at the cap.
    let mut merit = change - mu * delta_trace;
    let block = |s: f64| if capped(s) { 1 } else if empty(s) { 2 } else { 0 };
    for (j, &sj) in sizes.iter().enumerate() {
        for (k, &sk) in sizes.iter().enumerate() {
            if block(sj) != 0 && block(sj) == block(sk) {
                let normal = if j == k { 2.0 * mu * sj } else { 0.0 };
                merit -= (gv[(j, k)] - normal) * dv[(j, k)];
            }
        }
    }
    Ok(merit)
}

fn initial_guess(system: &MullerSystem, n: f64, opts: &SolveOptions, seed: u64) -> Result<DMatrix<f64>> {
    let m = system.dim();
    let (_, vectors) = sorted_eigh(system.core_hamiltonian());
    let k = (n.ceil() as usize).clamp(1, m);
    let occ = (n / k as f64).min(opts.occupation_cap);
    let sizes: Vec<f64> = (0..m).map(|i| if i < k { occ.sqrt() } else { 0.0 }).collect();
    let mut g = spectral_apply(&sizes, &vectors, |s| s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0) * opts.initial_noise);
    g += symmetrize(&noise);
    Ok(g)
}

fn check_target(system: &MullerSystem, n: f64, opts: &SolveOptions) -> Result<()> {
    opts.validate()?;
    if !(n > 0.0 && n.is_finite()) {
        return Err(invalid(format!("electron number must be positive, got {n}")));
    }
    let capacity = system.dim() as f64 * opts.occupation_cap;
    if opts.mode == TraceMode::TraceEq && n > capacity * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "N = {n} exceeds the basis capacity {capacity} after pruning"
        )));
    }
    Ok(())
}

/// One projected-gradient run from `start` (projected first).
fn descend(system: &MullerSystem, n: f64, opts: &SolveOptions, start: &DMatrix<f64>, seed: u64) -> Result<SolveResult> {
    let obj = Objective {
        system,
        shift: opts.shift_included,
    };
    let (mut g, _, _) = project_sqrt(start, n, opts.mode, opts.occupation_cap)?;
    let mut e = obj.value(&g)?.1;
    let mut grad = system.gradient(&g, opts.shift_included)?;
    let mut history = vec![e];
    let mut step = opts.initial_step;
    let mut pg = stationarity(&g, &grad, n, opts)?;
    let mut iterations = 0;
    let mut converged = pg <= opts.gradient_tolerance;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let mut t = step;
        let mut accepted = None;
        // Merit of re-projecting `g` itself, computed on the first short step
        // and subtracted so that all short trials are judged from `Π(g)`.
        let mut repair: Option<(f64, DMatrix<f64>)> = None;
        for _ in 0..60 {
            let (trial, _, _) = project_sqrt(&(&g - &grad * t), n, opts.mode, opts.occupation_cap)?;
            let d = &trial - &g;
            let mut change = merit_change(system, &g, &grad, &d, n, opts)?;
            let mut moved = d.norm_squared();
            if d.norm() <= MERIT_STEP {
                if repair.is_none() {
                    let (g0, _, _) = project_sqrt(&g, n, opts.mode, opts.occupation_cap)?;
                    let d0 = &g0 - &g;
                    repair = Some((merit_change(system, &g, &grad, &d0, n, opts)?, g0));
                }
                let (m0, g0) = repair.as_ref().expect("set above");
                change -= m0;
                moved = (&trial - g0).norm_squared();
            }
            if change <= -opts.armijo / t * moved {
                accepted = Some((trial, change, d));
                break;
            }
            t *= opts.backtracking;
        }
        let Some((trial, change, d)) = accepted else {
            log::debug!("line search stalled after {iterations} iterations (projected gradient {pg:e})");
            break;
        };
        let new_grad = system.gradient(&trial, opts.shift_included)?;
        let y = &new_grad - &grad;
        let sy: f64 = d.dot(&y);
        step = if sy > 0.0 {
            (d.norm_squared() / sy).clamp(1e-4, 1e2)
        } else {
            (t * 2.0).min(1e2)
        };
        g = trial;
        grad = new_grad;
        e += change;
        history.push(e);
        pg = stationarity(&g, &grad, n, opts)?;
        converged = pg <= opts.gradient_tolerance;
    }

    let dm = DensityMatrix::from_sqrt(&g, opts.occupation_cap)?;
    let mut history = history;
    history.shrink_to_fit();
    Ok(SolveResult {
        trace_at_solution: dm.trace(),
        breakdown: system.breakdown(&dm)?,
        dm,
        iterations,
        gradient_norm: pg,
        converged,
        seed,
        history,
    })
}

/// Deterministic best-of: converged results first, then lowest objective,
/// then lowest start index.
fn select_best(results: Vec<SolveResult>, shift: bool) -> SolveResult {
    results
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            b.converged
                .cmp(&a.converged)
                .then(a.objective(shift).total_cmp(&b.objective(shift)))
                .then(ia.cmp(ib))
        })
        .map(|(_, r)| r)
        .expect("at least one start")
}

/// Minimise over a prepared system with `opts.starts` cold starts.
pub fn minimize_system(system: &MullerSystem, n: f64, opts: &SolveOptions) -> Result<SolveResult> {
    check_target(system, n, opts)?;
    let results: Vec<Result<SolveResult>> = (0..opts.starts as u64)
        .into_par_iter()
        .map(|k| {
            let seed = opts.seed.wrapping_add(k);
            let start = initial_guess(system, n, opts, seed)?;
            descend(system, n, opts, &start, seed)
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(select_best(results, opts.shift_included))
}

/// Single run from a given orthonormal-basis `g`.
pub fn minimize_from(system: &MullerSystem, n: f64, opts: &SolveOptions, start: &DMatrix<f64>) -> Result<SolveResult> {
    check_target(system, n, opts)?;
    if start.nrows() != system.dim() || start.ncols() != system.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: system.dim(),
            found: start.nrows(),
        });
    }
    descend(system, n, opts, start, opts.seed)
}

pub fn minimize_muller(basis: &BasisSet, frame: &NuclearFrame, n: f64, opts: &SolveOptions) -> Result<SolveResult> {
    let system = MullerSystem::new(basis.clone(), frame.clone())?;
    minimize_system(&system, n, opts)
}

/// Carry a solution's `g` to another system by projecting its primitive-basis
/// kernel onto the new span.
pub fn transfer_sqrt(from: &MullerSystem, result: &SolveResult, to: &MullerSystem) -> DMatrix<f64> {
    let kernel = from.orthonormalizer().to_primitive(result.dm.sqrt());
    let s = &to.matrices().s;
    symmetrize(&to.orthonormalizer().project_kernel(s, &kernel))
}

/// Max over symmetric coordinate directions `e_ij + e_ji` of
/// `|analytic - central difference| / max(|central difference|, 1)` with step `1e-5`.
pub fn fd_gradient_error_at(system: &MullerSystem, g: &DMatrix<f64>, shift: bool) -> Result<f64> {
    let grad = system.gradient(g, shift)?;
    let m = system.dim();
    let h = 1e-5;
    let energy = |x: &DMatrix<f64>| system.breakdown_from_sqrt(x).map(|b| b.objective(shift));
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..=i {
            let mut d = DMatrix::zeros(m, m);
            d[(i, j)] = 1.0;
            d[(j, i)] = 1.0;
            let fd = (energy(&(g + &d * h))? - energy(&(g - &d * h))?) / (2.0 * h);
            let an = grad.dot(&d);
            worst = worst.max((an - fd).abs() / fd.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// Finite-difference audit of the analytic gradient at a random interior
/// point (occupations in `(0.05, 0.95)`, random orbitals).
pub fn fd_gradient_audit(basis: &BasisSet, frame: &NuclearFrame, seed: u64) -> Result<f64> {
    let system = MullerSystem::new(basis.clone(), frame.clone())?;
    if system.dim() > 8 {
        return Err(invalid(format!("gradient audit limited to rank ≤ 8, got {}", system.dim())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let occ = (0..system.dim()).map(|_| rng.random_range(0.05..0.95)).collect();
    let dm = random_density_matrix(occ, &mut rng)?;
    fd_gradient_error_at(&system, dm.sqrt(), false)
}
