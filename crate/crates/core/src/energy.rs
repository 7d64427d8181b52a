//! Müller energy, its gradient in `g = γ^{1/2}` and the checkable inequalities.
//!
//! All contractions are done in the primitive basis: with `P = X γ Xᵀ` and
//! `G = X g Xᵀ`,
//!
//! ```text
//! kinetic  = tr(P T)            external = -tr(P V)
//! direct   = ½ Σ P_pq (pq|rs) P_rs
//! exchange = ½ Σ G_pr (pq|rs) G_qs
//! ```
//!
//! which is the orthonormal-basis expression `½ Σ g_ij g_kl (ik|jl)` for the
//! exchange term. Sums run in a fixed sequential order, so results are
//! identical from run to run.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{eri_tensor, one_electron_matrices, BasisSet, EriTensor, NuclearFrame, OneElectronMatrices};
use crate::density::{
    lowdin_orthonormalizer, sqrt_divided_difference, DensityMatrix, Orthonormalizer, LINEAR_DEPENDENCE_THRESHOLD,
};
use crate::error::{invalid, Error, Result};
use crate::quadrature::LogGrid;

/// Radial nodes of the coarse grid used for `∫ρ^{5/3}`; the check grid doubles it.
pub const LT_RADIAL_POINTS: usize = 200;

/// Default Lieb-Thirring constant `L` in `tr(-½Δγ) ≥ (3/10) L ∫ρ^{5/3}` for
/// `0 ≤ γ ≤ 1` on scalar `L²(ℝ³)`: the semiclassical value `(6π²)^{2/3}`
/// reduced by the factor `1.456^{-2/3}` of the best proven bound on the
/// Lieb-Thirring constant `L_{1,3}` (Frank, Hundertmark, Jex, Nam).
pub fn default_lieb_thirring_constant() -> f64 {
    (6.0 * PI * PI).powf(2.0 / 3.0) / 1.456_f64.powf(2.0 / 3.0)
}

/// Energy components in hartree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub external: f64,
    pub direct: f64,
    pub exchange: f64,
    pub nuclear_repulsion: f64,
    pub total_electronic: f64,
    pub total: f64,
    /// `total_electronic + trace/8`.
    pub shifted: f64,
    pub trace: f64,
}

impl EnergyBreakdown {
    fn assemble(kinetic: f64, external: f64, direct: f64, exchange: f64, nuclear_repulsion: f64, trace: f64) -> Self {
        let total_electronic = kinetic + external + direct - exchange;
        EnergyBreakdown {
            kinetic,
            external,
            direct,
            exchange,
            nuclear_repulsion,
            total_electronic,
            total: total_electronic + nuclear_repulsion,
            shifted: total_electronic + trace / 8.0,
            trace,
        }
    }

    /// The objective minimised by the solver.
    pub fn objective(&self, shift_included: bool) -> f64 {
        if shift_included {
            self.shifted
        } else {
            self.total_electronic
        }
    }
}

/// `J(P)_pq = Σ_rs (pq|rs) P_rs` over a dense row-major ERI array.
fn coulomb_contract(eri: &[f64], p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let n2 = n * n;
    let flat: Vec<f64> = (0..n2).map(|k| p[(k / n, k % n)]).collect();
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..=a {
            let row = &eri[(a * n + b) * n2..(a * n + b + 1) * n2];
            let v: f64 = row.iter().zip(&flat).map(|(x, y)| x * y).sum();
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    j
}

/// `K(G)_pr = Σ_qs (pq|rs) G_qs`, symmetrised.
fn exchange_contract(eri: &[f64], g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let mut k = DMatrix::zeros(n, n);
    for p in 0..n {
        for r in 0..n {
            let mut acc = 0.0;
            for q in 0..n {
                let base = ((p * n + q) * n + r) * n;
                for s in 0..n {
                    acc += eri[base + s] * g[(q, s)];
                }
            }
            k[(p, r)] = acc;
        }
    }
    (&k + k.transpose()) * 0.5
}

fn frobenius_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn check_symmetric(g: &DMatrix<f64>) -> Result<()> {
    if g.nrows() != g.ncols() {
        return Err(Error::DimensionMismatch {
            expected: g.nrows(),
            found: g.ncols(),
        });
    }
    let asym = (g - g.transpose()).abs().max();
    if asym > 1e-10 * g.abs().max().max(1.0) {
        return Err(invalid(format!("g is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(())
}

/// A basis, a nuclear frame and everything precomputed from them.
#[derive(Debug, Clone)]
pub struct MullerSystem {
    basis: BasisSet,
    frame: NuclearFrame,
    mats: OneElectronMatrices,
    eri: EriTensor,
    eri_dense: Vec<f64>,
    ortho: Orthonormalizer,
    core: DMatrix<f64>,
}

impl MullerSystem {
    pub fn new(basis: BasisSet, frame: NuclearFrame) -> Result<Self> {
        Self::with_threshold(basis, frame, LINEAR_DEPENDENCE_THRESHOLD)
    }

    pub fn with_threshold(basis: BasisSet, frame: NuclearFrame, threshold: f64) -> Result<Self> {
        if basis.is_empty() {
            return Err(invalid("basis is empty"));
        }
        let mats = one_electron_matrices(&basis, &frame);
        let eri = eri_tensor(&basis);
        let ortho = lowdin_orthonormalizer(&mats.s, threshold)?;
        let core = ortho.to_orthonormal(&mats.core_hamiltonian());
        Ok(MullerSystem {
            eri_dense: eri.dense(),
            basis,
            frame,
            mats,
            eri,
            ortho,
            core,
        })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn frame(&self) -> &NuclearFrame {
        &self.frame
    }

    pub fn matrices(&self) -> &OneElectronMatrices {
        &self.mats
    }

    pub fn eri(&self) -> &EriTensor {
        &self.eri
    }

    pub fn orthonormalizer(&self) -> &Orthonormalizer {
        &self.ortho
    }

    /// Dimension `m` of the orthonormal basis.
    pub fn dim(&self) -> usize {
        self.ortho.dim()
    }

    /// One-body operator `T - V` in the orthonormal basis.
    pub fn core_hamiltonian(&self) -> &DMatrix<f64> {
        &self.core
    }

    /// Coulomb operator `Xᵀ J(XγXᵀ) X` of an orthonormal-basis `γ`.
    pub fn coulomb(&self, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        let p = self.ortho.to_primitive(gamma);
        self.ortho.to_orthonormal(&coulomb_contract(&self.eri_dense, &p))
    }

    /// Exchange operator `Xᵀ K(XgXᵀ) X`, the gradient of `X(g)`.
    pub fn exchange_operator(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let gp = self.ortho.to_primitive(g);
        self.ortho.to_orthonormal(&exchange_contract(&self.eri_dense, &gp))
    }

    fn check_dim(&self, m: &DMatrix<f64>) -> Result<()> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.nrows(),
            });
        }
        Ok(())
    }

    fn parts(&self, gamma: &DMatrix<f64>, g: &DMatrix<f64>, trace: f64) -> EnergyBreakdown {
        let p = self.ortho.to_primitive(gamma);
        let gp = self.ortho.to_primitive(g);
        let kinetic = frobenius_dot(&p, &self.mats.t);
        let external = -frobenius_dot(&p, &self.mats.v);
        let direct = 0.5 * frobenius_dot(&p, &coulomb_contract(&self.eri_dense, &p));
        let exchange = 0.5 * frobenius_dot(&gp, &exchange_contract(&self.eri_dense, &gp));
        EnergyBreakdown::assemble(kinetic, external, direct, exchange, self.frame.repulsion(), trace)
    }

    pub fn breakdown(&self, dm: &DensityMatrix) -> Result<EnergyBreakdown> {
        self.check_dim(dm.gamma())?;
        Ok(self.parts(dm.gamma(), dm.sqrt(), dm.trace()))
    }

    /// Energy at `γ = g²` for a symmetric `g`, with `trace = tr(g²)`.
    pub fn breakdown_from_sqrt(&self, g: &DMatrix<f64>) -> Result<EnergyBreakdown> {
        self.check_dim(g)?;
        check_symmetric(g)?;
        let gamma = g * g;
        Ok(self.parts(&gamma, g, gamma.trace()))
    }

    /// `E(g + d) - E(g)` for symmetric `g`, `d`, assembled from the increment
    /// `Δγ = g d + d g + d²` so that rounding scales with `d` rather than `E`.
    pub fn objective_change(&self, g: &DMatrix<f64>, d: &DMatrix<f64>, shift_included: bool) -> Result<f64> {
        self.check_dim(g)?;
        self.check_dim(d)?;
        let gd = g * d;
        let dgamma = &gd + gd.transpose() + d * d;
        let p = self.ortho.to_primitive(&(g * g));
        let dp = self.ortho.to_primitive(&dgamma);
        let gp = self.ortho.to_primitive(g);
        let ddp = self.ortho.to_primitive(d);
        let one = frobenius_dot(&dp, &self.mats.t) - frobenius_dot(&dp, &self.mats.v);
        let jd = coulomb_contract(&self.eri_dense, &dp);
        let direct = frobenius_dot(&p, &jd) + 0.5 * frobenius_dot(&dp, &jd);
        let kd = exchange_contract(&self.eri_dense, &ddp);
        let exchange = frobenius_dot(&gp, &kd) + 0.5 * frobenius_dot(&ddp, &kd);
        let shift = if shift_included { dgamma.trace() / 8.0 } else { 0.0 };
        Ok(one + direct - exchange + shift)
    }

    /// `∂E/∂g` for `E(g) = tr(h g²) + D[ρ_{g²}] - X(g)` (plus `tr(g²)/8` if
    /// `shift_included`): `F g + g F - K(g)` with `F = h + J(g²)`.
    pub fn gradient(&self, g: &DMatrix<f64>, shift_included: bool) -> Result<DMatrix<f64>> {
        self.check_dim(g)?;
        check_symmetric(g)?;
        let gamma = g * g;
        let f = &self.core + self.coulomb(&gamma);
        let fg = &f * g;
        let mut grad = &fg + fg.transpose() - self.exchange_operator(g);
        if shift_included {
            grad += g * 0.25;
        }
        Ok((&grad + grad.transpose()) * 0.5)
    }

    /// `∂X/∂γ` at an interior `γ` by the Daleckii-Krein formula
    /// `C [(Cᵀ K C) ∘ Δ] Cᵀ`, `Δ_ij` the divided difference of `√·`.
    pub fn exchange_gamma_derivative(&self, dm: &DensityMatrix) -> Result<DMatrix<f64>> {
        self.check_dim(dm.gamma())?;
        let c = dm.orbitals();
        let lam = dm.occupations();
        let k = c.transpose() * self.exchange_operator(dm.sqrt()) * c;
        let m = lam.len();
        let inner = DMatrix::from_fn(m, m, |i, j| k[(i, j)] * sqrt_divided_difference(lam[i], lam[j]));
        Ok(c * inner * c.transpose())
    }

    /// Kinetic energy and `∫ρ^{5/3}` (Richardson-extrapolated) for a
    /// single-centre basis.
    pub fn lieb_thirring_terms(&self, dm: &DensityMatrix) -> Result<LiebThirringTerms> {
        self.check_dim(dm.gamma())?;
        let center = self
            .basis
            .single_center()
            .ok_or_else(|| Error::UnsupportedGeometry("Lieb-Thirring check needs a single-centre basis".into()))?;
        let p = self.ortho.to_primitive(dm.gamma());
        let kinetic = frobenius_dot(&p, &self.mats.t);
        let exps = self.basis.exponents();
        let a_max = exps.iter().copied().fold(0.0, f64::max);
        let a_min = exps.iter().copied().fold(f64::INFINITY, f64::min);
        let (r_min, r_max) = (1e-4 / a_max.sqrt(), 10.0 / a_min.sqrt());
        let rho53 = |r: f64| {
            let x = [center[0], center[1], center[2] + r];
            self.basis.density_at(&p, &x).max(0.0).powf(5.0 / 3.0)
        };
        let coarse = LogGrid::new(r_min, r_max, LT_RADIAL_POINTS).integrate_spherical(rho53);
        let fine = LogGrid::new(r_min, r_max, 2 * LT_RADIAL_POINTS - 1).integrate_spherical(rho53);
        Ok(LiebThirringTerms {
            kinetic,
            rho53_coarse: coarse,
            rho53_fine: fine,
            rho53: fine + (fine - coarse) / 15.0,
        })
    }
}

/// Terms of the Lieb-Thirring inequality for one density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiebThirringTerms {
    pub kinetic: f64,
    pub rho53_coarse: f64,
    pub rho53_fine: f64,
    pub rho53: f64,
}

impl LiebThirringTerms {
    pub fn slack(&self, l: f64) -> f64 {
        self.kinetic - 0.3 * l * self.rho53
    }
}

/// Energy breakdown from raw integral objects.
pub fn energy_breakdown(
    dm: &DensityMatrix,
    mats: &OneElectronMatrices,
    eri: &EriTensor,
    frame: &NuclearFrame,
    x: &Orthonormalizer,
) -> Result<EnergyBreakdown> {
    if dm.dim() != x.dim() || mats.s.nrows() != x.primitive_dim() || eri.dim() != x.primitive_dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: dm.dim(),
        });
    }
    let dense = eri.dense();
    let p = x.to_primitive(dm.gamma());
    let gp = x.to_primitive(dm.sqrt());
    let kinetic = frobenius_dot(&p, &mats.t);
    let external = -frobenius_dot(&p, &mats.v);
    let direct = 0.5 * frobenius_dot(&p, &coulomb_contract(&dense, &p));
    let exchange = 0.5 * frobenius_dot(&gp, &exchange_contract(&dense, &gp));
    Ok(EnergyBreakdown::assemble(
        kinetic,
        external,
        direct,
        exchange,
        frame.repulsion(),
        dm.trace(),
    ))
}

/// Gradient `∂E/∂g` (unshifted) from raw integral objects.
pub fn energy_gradient_g(
    g: &DMatrix<f64>,
    mats: &OneElectronMatrices,
    eri: &EriTensor,
    x: &Orthonormalizer,
) -> Result<DMatrix<f64>> {
    check_symmetric(g)?;
    if g.nrows() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: g.nrows(),
        });
    }
    let dense = eri.dense();
    let gp = x.to_primitive(g);
    let p = &gp * &mats.s * &gp;
    let f = x.to_orthonormal(&(mats.core_hamiltonian() + coulomb_contract(&dense, &p)));
    let k = x.to_orthonormal(&exchange_contract(&dense, &gp));
    let fg = &f * g;
    let grad = &fg + fg.transpose() - k;
    Ok((&grad + grad.transpose()) * 0.5)
}

/// `(ε/4) tr(-Δγ) + tr γ/(4ε) - X(γ^{1/2})`, using `tr(-Δγ) = 2·kinetic`.
pub fn exchange_bound_slack(b: &EnergyBreakdown, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("ε must be positive, got {eps}")));
    }
    Ok(eps / 4.0 * 2.0 * b.kinetic + b.trace / (4.0 * eps) - b.exchange)
}

/// `tr(-½Δγ) - (3/10) L ∫ρ^{5/3}` for a single-centre basis.
pub fn lieb_thirring_slack(dm: &DensityMatrix, system: &MullerSystem, l: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(invalid(format!("Lieb-Thirring constant must be positive, got {l}")));
    }
    Ok(system.lieb_thirring_terms(dm)?.slack(l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_even_tempered_basis;
    use crate::density::{dm_from_spectral, random_density_matrix};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diatomic_system(n: usize, r: f64) -> MullerSystem {
        let a = build_even_tempered_basis(1.0, n, [0.0, 0.0, -r / 2.0]).unwrap();
        let b = build_even_tempered_basis(1.0, n, [0.0, 0.0, r / 2.0]).unwrap();
        MullerSystem::new(a.union(&b), NuclearFrame::diatomic(1.0, 1.0, r).unwrap()).unwrap()
    }

    fn atom_system(z: f64, n: usize) -> MullerSystem {
        let basis = build_even_tempered_basis(z, n, [0.0; 3]).unwrap();
        MullerSystem::new(basis, NuclearFrame::atom(z, [0.0; 3]).unwrap()).unwrap()
    }

    fn rank_one(m: usize, k: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let mut occ = vec![0.0; m];
        occ[k] = 1.0;
        random_density_matrix(occ, rng).unwrap()
    }

    #[test]
    fn single_gaussian_hydrogen() {
        let alpha = 8.0 / (9.0 * PI);
        let basis = BasisSet::new(vec![crate::basis::Primitive::new([0.0; 3], alpha).unwrap()]);
        let sys = MullerSystem::new(basis, NuclearFrame::atom(1.0, [0.0; 3]).unwrap()).unwrap();
        let dm = dm_from_spectral(vec![1.0], DMatrix::identity(1, 1)).unwrap();
        let b = sys.breakdown(&dm).unwrap();
        assert!((b.total_electronic + 4.0 / (3.0 * PI)).abs() < 1e-12);
        assert!((b.exchange - b.direct).abs() < 1e-14);
        assert_eq!(b.shifted - b.total_electronic, b.trace / 8.0);
    }

    #[test]
    fn rank_one_exchange_equals_direct() {
        let sys = diatomic_system(4, 1.4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 0..sys.dim() {
            let b = sys.breakdown(&rank_one(sys.dim(), k, &mut rng)).unwrap();
            assert!((b.exchange - b.direct).abs() <= 1e-10 * b.direct.max(1.0));
            assert!(b.kinetic > 0.0 && b.direct > 0.0);
        }
    }

    #[test]
    fn free_functions_agree_with_system() {
        let sys = diatomic_system(3, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let occ: Vec<f64> = (0..sys.dim()).map(|_| rng.random::<f64>()).collect();
        let dm = random_density_matrix(occ, &mut rng).unwrap();
        let a = sys.breakdown(&dm).unwrap();
        let b = energy_breakdown(&dm, sys.matrices(), sys.eri(), sys.frame(), sys.orthonormalizer()).unwrap();
        assert!((a.total - b.total).abs() < 1e-12);
        let ga = sys.gradient(dm.sqrt(), false).unwrap();
        let gb = energy_gradient_g(dm.sqrt(), sys.matrices(), sys.eri(), sys.orthonormalizer()).unwrap();
        assert!((ga - gb).abs().max() < 1e-10);
        let c = sys.breakdown_from_sqrt(dm.sqrt()).unwrap();
        assert!((a.total - c.total).abs() < 1e-10);
    }

    /// Max over symmetric coordinate directions of
    /// `|analytic - central difference| / max(|central difference|, 1)`.
    fn fd_error(sys: &MullerSystem, g: &DMatrix<f64>, shift: bool) -> f64 {
        let grad = sys.gradient(g, shift).unwrap();
        let e = |m: &DMatrix<f64>| sys.breakdown_from_sqrt(m).unwrap().objective(shift);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..=i {
                let mut d = DMatrix::zeros(g.nrows(), g.ncols());
                d[(i, j)] = 1.0;
                d[(j, i)] = 1.0;
                let fd = (e(&(g + &d * h)) - e(&(g - &d * h))) / (2.0 * h);
                let an = frobenius_dot(&grad, &d);
                worst = worst.max((an - fd).abs() / fd.abs().max(1.0));
            }
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (sys, shift) in [(diatomic_system(3, 1.4), false), (atom_system(2.0, 5), true)] {
            let occ: Vec<f64> = (0..sys.dim()).map(|_| rng.random_range(0.05..0.95)).collect();
            let dm = random_density_matrix(occ, &mut rng).unwrap();
            assert!(fd_error(&sys, dm.sqrt(), shift) < 1e-6);
        }
    }

    #[test]
    fn objective_change_matches_difference() {
        let sys = diatomic_system(3, 1.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let occ = (0..sys.dim()).map(|_| rng.random_range(0.0..1.0)).collect();
        let dm = random_density_matrix(occ, &mut rng).unwrap();
        let g = dm.sqrt().clone();
        let m = sys.dim();
        let d = DMatrix::from_fn(m, m, |_, _| rng.random_range(-0.1..0.1));
        let d = &d + d.transpose();
        for shift in [false, true] {
            let e0 = sys.breakdown_from_sqrt(&g).unwrap().objective(shift);
            let e1 = sys.breakdown_from_sqrt(&(&g + &d)).unwrap().objective(shift);
            let delta = sys.objective_change(&g, &d, shift).unwrap();
            assert!((delta - (e1 - e0)).abs() < 1e-12, "{delta} vs {}", e1 - e0);
        }
    }

    #[test]
    fn gradient_at_zero_vanishes() {
        let sys = atom_system(1.0, 4);
        let g = sys.gradient(&DMatrix::zeros(4, 4), false).unwrap();
        assert_eq!(g.abs().max(), 0.0);
        let bad = DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64);
        assert!(sys.gradient(&bad, false).is_err());
    }

    #[test]
    fn rank_one_directional_derivative() {
        let sys = diatomic_system(3, 1.4);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let dm = rank_one(sys.dim(), 0, &mut rng);
        let grad = sys.gradient(dm.sqrt(), false).unwrap();
        let c = dm.orbitals().column(0).into_owned();
        let h_cc = (c.transpose() * sys.core_hamiltonian() * &c)[(0, 0)];
        let j_cc = (c.transpose() * sys.coulomb(dm.gamma()) * &c)[(0, 0)];
        let directional = frobenius_dot(&grad, dm.sqrt());
        assert!((directional - (2.0 * h_cc + j_cc)).abs() < 1e-10);
    }

    #[test]
    fn exchange_gamma_derivative_matches_finite_differences() {
        let sys = atom_system(1.0, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dm = random_density_matrix(vec![0.2, 0.4, 0.6, 0.8], &mut rng).unwrap();
        let grad = sys.exchange_gamma_derivative(&dm).unwrap();
        let dir = DMatrix::from_fn(4, 4, |i, j| ((i + 2 * j) % 3) as f64 - 1.0);
        let dir = (&dir + dir.transpose()) * 0.5;
        let h = 1e-6;
        let x_at = |t: f64| {
            let gamma = dm.gamma() + &dir * t;
            let g = crate::density::matrix_sqrt_psd(&gamma).unwrap();
            sys.breakdown_from_sqrt(&g).unwrap().exchange
        };
        let fd = (x_at(h) - x_at(-h)) / (2.0 * h);
        assert!((fd - frobenius_dot(&grad, &dir)).abs() < 1e-7);
    }

    #[test]
    fn fractional_dominance_can_fail_above_unit_trace() {
        // γ = λ P for a rank-2 projector P: X scales as λ, D as λ²; once the
        // direct term of P exceeds its exchange, λ just below 1 breaks X ≥ D.
        let sys = atom_system(1.0, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut occ = vec![0.0; sys.dim()];
        occ[0] = 1.0;
        occ[1] = 1.0;
        let full = random_density_matrix(occ, &mut rng).unwrap();
        let b = sys.breakdown(&full).unwrap();
        assert!(b.direct > b.exchange);
        let lam = 0.5 * (1.0 + b.exchange / b.direct);
        let scaled = dm_from_spectral(
            full.occupations().iter().map(|o| o * lam).collect(),
            full.orbitals().clone(),
        )
        .unwrap();
        let s = sys.breakdown(&scaled).unwrap();
        assert!(s.exchange < s.direct);
    }

    #[test]
    fn exchange_bound_cases() {
        let sys = atom_system(1.0, 6);
        let zero = sys.breakdown(&DensityMatrix::zero(sys.dim())).unwrap();
        assert_eq!(exchange_bound_slack(&zero, 1.0).unwrap(), 0.0);
        assert!(exchange_bound_slack(&zero, 0.0).is_err());

        // Lowest core-Hamiltonian orbital as a hydrogen-like trial state.
        let (_, vecs) = crate::density::sorted_eigh(sys.core_hamiltonian());
        let mut occ = vec![0.0; sys.dim()];
        occ[0] = 1.0;
        let dm = dm_from_spectral(occ, vecs).unwrap();
        let b = sys.breakdown(&dm).unwrap();
        let eps_star = (b.trace / (2.0 * b.kinetic)).sqrt();
        let best = exchange_bound_slack(&b, eps_star).unwrap();
        assert!(best > 0.0);
        for f in [0.5, 0.9, 1.1, 2.0] {
            assert!(exchange_bound_slack(&b, eps_star * f).unwrap() > best);
        }
    }

    #[test]
    fn lieb_thirring_basics() {
        let sys = atom_system(1.0, 6);
        let l = default_lieb_thirring_constant();
        assert!((l - 11.83).abs() < 0.01);
        assert_eq!(lieb_thirring_slack(&DensityMatrix::zero(sys.dim()), &sys, l).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let occ: Vec<f64> = (0..sys.dim()).map(|_| rng.random::<f64>()).collect();
        let dm = random_density_matrix(occ, &mut rng).unwrap();
        let base = sys.lieb_thirring_terms(&dm).unwrap();
        assert!((base.rho53_fine - base.rho53_coarse).abs() < 1e-6 * base.rho53);

        // Dilating every exponent by s² dilates γ; both terms scale as s².
        for s in [0.5, 2.0] {
            let basis = sys.basis().scaled_exponents(s * s).unwrap();
            let scaled = MullerSystem::new(basis, sys.frame().clone()).unwrap();
            let t = scaled.lieb_thirring_terms(&dm).unwrap();
            assert!((t.kinetic / base.kinetic - s * s).abs() < 1e-9);
            assert!((t.slack(l) / base.slack(l) - s * s).abs() < 1e-6);
        }

        let dia = diatomic_system(2, 1.4);
        assert!(matches!(
            lieb_thirring_slack(&DensityMatrix::zero(dia.dim()), &dia, l),
            Err(Error::UnsupportedGeometry(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn free_energy_bounded_below(seed in 0u64..100_000, n in 1usize..=8, z in 0.5f64..3.0) {
            let basis = build_even_tempered_basis(z, n, [0.0; 3]).unwrap();
            let sys = MullerSystem::new(basis, NuclearFrame::free()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let occ: Vec<f64> = (0..sys.dim()).map(|_| rng.random::<f64>()).collect();
            let b = sys.breakdown(&random_density_matrix(occ, &mut rng).unwrap()).unwrap();
            prop_assert!(b.shifted >= -1e-9);
            for eps in [0.1, 1.0, 10.0] {
                prop_assert!(exchange_bound_slack(&b, eps).unwrap() >= -1e-9);
            }
        }

        #[test]
        fn fractional_exchange_dominates_direct_at_unit_trace(seed in 0u64..100_000, n in 2usize..=6) {
            let sys = atom_system(1.0, n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..sys.dim()).map(|_| rng.random_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let budget = rng.random_range(0.1..1.0);
            let occ = raw.iter().map(|v| v / total * budget).collect();
            let b = sys.breakdown(&random_density_matrix(occ, &mut rng).unwrap()).unwrap();
            prop_assert!(b.exchange >= b.direct - 1e-10);
        }
    }
}
