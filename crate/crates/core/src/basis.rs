//! Nuclear frames, s-type Gaussian bases and their integrals.
//!
//! Every primitive is a normalised spherical Gaussian
//! `N exp(-α |r - A|²)` with `N = (2α/π)^{3/4}`, so all integrals have closed
//! forms that only need the zeroth Boys function.
//!
//! Sign convention: [`OneElectronMatrices::v`] stores the *magnitude* of the
//! nuclear attraction, `V_pq = <p| Σ_i Z_i/|r - R_i| |q>`, which is positive
//! definite. The external energy is `-tr(P V)`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Point3 = [f64; 3];

/// Smallest diffuse exponent of the even-tempered rule (bohr⁻²).
pub const EVEN_TEMPERED_DIFFUSE: f64 = 0.02;
/// The tightest exponent of the even-tempered rule is this factor times Z².
pub const EVEN_TEMPERED_CORE_FACTOR: f64 = 50.0;

/// Boys function switch point between the convergent series and the
/// asymptotic expansion. At `t = 30` the neglected `e^{-t}` terms are below 1e-14.
pub const BOYS_SWITCH: f64 = 30.0;

pub(crate) fn dist2(a: &Point3, b: &Point3) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Fixed nuclei: charges `Z_i > 0` at positions `R_i` (bohr).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuclearFrame {
    charges: Vec<f64>,
    positions: Vec<Point3>,
}

impl NuclearFrame {
    pub fn new(charges: Vec<f64>, positions: Vec<Point3>) -> Result<Self> {
        if charges.len() != positions.len() {
            return Err(invalid(format!(
                "{} charges but {} positions",
                charges.len(),
                positions.len()
            )));
        }
        if let Some(z) = charges.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(invalid(format!("nuclear charge must be positive, got {z}")));
        }
        for (i, a) in positions.iter().enumerate() {
            if a.iter().any(|c| !c.is_finite()) {
                return Err(invalid("nuclear position must be finite"));
            }
            for b in &positions[..i] {
                if dist2(a, b) == 0.0 {
                    return Err(invalid("nuclear positions must be pairwise distinct"));
                }
            }
        }
        Ok(Self { charges, positions })
    }

    /// No nuclei at all; the external potential vanishes.
    pub fn free() -> Self {
        Self {
            charges: Vec::new(),
            positions: Vec::new(),
        }
    }

    pub fn atom(z: f64, position: Point3) -> Result<Self> {
        Self::new(vec![z], vec![position])
    }

    /// Two nuclei on the z axis at `∓R/2`, so that swapping the charges is a
    /// reflection through the bond midplane.
    pub fn diatomic(z1: f64, z2: f64, separation: f64) -> Result<Self> {
        if !(separation > 0.0 && separation.is_finite()) {
            return Err(invalid(format!("separation must be positive, got {separation}")));
        }
        Self::new(
            vec![z1, z2],
            vec![[0.0, 0.0, -0.5 * separation], [0.0, 0.0, 0.5 * separation]],
        )
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn total_charge(&self) -> f64 {
        self.charges.iter().sum()
    }

    /// Nuclear-nuclear repulsion `Σ_{i<j} Z_i Z_j / |R_i - R_j|`.
    pub fn repulsion(&self) -> f64 {
        let mut u = 0.0;
        for i in 0..self.len() {
            for j in 0..i {
                u += self.charges[i] * self.charges[j]
                    / dist2(&self.positions[i], &self.positions[j]).sqrt();
            }
        }
        u
    }

    /// `V(x) = Σ_i Z_i / |x - R_i|`.
    pub fn potential(&self, x: &Point3) -> f64 {
        self.charges
            .iter()
            .zip(&self.positions)
            .map(|(z, r)| z / dist2(x, r).sqrt())
            .sum()
    }
}

/// A normalised s-type Gaussian primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub center: Point3,
    pub exponent: f64,
    pub norm: f64,
}

impl Primitive {
    pub fn new(center: Point3, exponent: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(invalid(format!("exponent must be positive and finite, got {exponent}")));
        }
        Ok(Self {
            center,
            exponent,
            norm: (2.0 * exponent / PI).powf(0.75),
        })
    }

    pub fn value(&self, x: &Point3) -> f64 {
        self.norm * (-self.exponent * dist2(x, &self.center)).exp()
    }

    /// Electrostatic potential of the unit charge distribution `|χ|²` at
    /// distance `r` from its centre: `erf(√(2α) r) / r`.
    pub fn self_potential(&self, r: f64) -> f64 {
        let p = 2.0 * self.exponent;
        if r == 0.0 {
            return 2.0 * (p / PI).sqrt();
        }
        // (π/p)^{3/2} N² (2π/p) F0(p r²) with N² (π/p)^{3/2} = 1
        2.0 * PI / p * (p / PI).powf(1.5) * boys_f0_unchecked(p * r * r)
    }
}

/// An ordered list of normalised s primitives.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    primitives: Vec<Primitive>,
}

#[derive(Serialize, Deserialize)]
struct PrimitiveRecord {
    center: Point3,
    exponent: f64,
    norm: f64,
}

impl BasisSet {
    pub fn new(primitives: Vec<Primitive>) -> Self {
        Self { primitives }
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn exponents(&self) -> Vec<f64> {
        self.primitives.iter().map(|p| p.exponent).collect()
    }

    /// Concatenation, keeping the order `self` then `other`.
    pub fn union(&self, other: &BasisSet) -> BasisSet {
        let mut primitives = self.primitives.clone();
        primitives.extend_from_slice(&other.primitives);
        BasisSet { primitives }
    }

    /// The same exponents moved rigidly to `center`.
    pub fn recentered(&self, center: Point3) -> BasisSet {
        BasisSet {
            primitives: self
                .primitives
                .iter()
                .map(|p| Primitive { center, ..*p })
                .collect(),
        }
    }

    /// Every exponent multiplied by `factor` (a dilation by `√factor` about each centre).
    pub fn scaled_exponents(&self, factor: f64) -> Result<BasisSet> {
        let primitives = self
            .primitives
            .iter()
            .map(|p| Primitive::new(p.center, p.exponent * factor))
            .collect::<Result<_>>()?;
        Ok(BasisSet { primitives })
    }

    /// The common centre if every primitive sits on the same point.
    pub fn single_center(&self) -> Option<Point3> {
        let first = self.primitives.first()?.center;
        self.primitives
            .iter()
            .all(|p| dist2(&p.center, &first) < 1e-24)
            .then_some(first)
    }

    pub fn values_at(&self, x: &Point3) -> Vec<f64> {
        self.primitives.iter().map(|p| p.value(x)).collect()
    }

    /// `ρ(x) = Σ_pq P_pq χ_p(x) χ_q(x)` for an AO-basis density matrix `P`.
    pub fn density_at(&self, p: &DMatrix<f64>, x: &Point3) -> f64 {
        let chi = self.values_at(x);
        let n = chi.len();
        let mut rho = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += p[(i, j)] * chi[j];
            }
            rho += chi[i] * row;
        }
        rho
    }

    /// One JSON object per line with fields `center` (bohr), `exponent`
    /// (bohr⁻²) and `norm`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for p in &self.primitives {
            let rec = PrimitiveRecord {
                center: p.center,
                exponent: p.exponent,
                norm: p.norm,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut primitives = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PrimitiveRecord = serde_json::from_str(&line)?;
            let p = Primitive::new(rec.center, rec.exponent)?;
            if (p.norm - rec.norm).abs() > 1e-12 * p.norm {
                return Err(invalid(format!(
                    "normalisation {} does not match exponent {}",
                    rec.norm, rec.exponent
                )));
            }
            primitives.push(p);
        }
        Ok(Self { primitives })
    }
}

/// Even-tempered s basis for nuclear charge `z`: `α_k = a b^k`.
///
/// For `n ≥ 2` the exponents run geometrically from
/// [`EVEN_TEMPERED_DIFFUSE`] to [`EVEN_TEMPERED_CORE_FACTOR`]`·Z²`. A single
/// primitive uses the variationally optimal hydrogenic exponent `8Z²/(9π)`.
pub fn build_even_tempered_basis(z: f64, n: usize, center: Point3) -> Result<BasisSet> {
    if !(z.is_finite() && z > 0.0) {
        return Err(invalid(format!("Z must be positive, got {z}")));
    }
    if n == 0 {
        return Err(invalid("basis size must be at least 1"));
    }
    if n == 1 {
        let alpha = 8.0 * z * z / (9.0 * PI);
        return Ok(BasisSet::new(vec![Primitive::new(center, alpha)?]));
    }
    let a = EVEN_TEMPERED_DIFFUSE;
    let top = EVEN_TEMPERED_CORE_FACTOR * z * z;
    let b = (top / a).powf(1.0 / (n - 1) as f64);
    let primitives = (0..n)
        .map(|k| Primitive::new(center, a * b.powi(k as i32)))
        .collect::<Result<_>>()?;
    Ok(BasisSet::new(primitives))
}

/// `F₀(t) = ∫₀¹ exp(-t u²) du`.
pub fn boys_f0(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid(format!("Boys function argument must be nonnegative, got {t}")));
    }
    Ok(boys_f0_unchecked(t))
}

pub(crate) fn boys_f0_unchecked(t: f64) -> f64 {
    if t < BOYS_SWITCH {
        // F0(t) = e^{-t} Σ_k (2t)^k / (2k+1)!!, all terms positive.
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= 2.0 * t / (2.0 * k + 1.0);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        (-t).exp() * sum
    } else {
        // ½√(π/t) - e^{-t}/(2t) (1 - 1/(2t) + 3/(2t)² - ...)
        let x = 1.0 / (2.0 * t);
        let tail = 1.0 - x + 3.0 * x * x - 15.0 * x.powi(3) + 105.0 * x.powi(4);
        0.5 * (PI / t).sqrt() - (-t).exp() * x * tail
    }
}

/// Overlap, kinetic and nuclear-attraction matrices over a basis.
#[derive(Debug, Clone)]
pub struct OneElectronMatrices {
    pub s: DMatrix<f64>,
    pub t: DMatrix<f64>,
    /// Attraction magnitude `<p|V_R|q>`, positive definite.
    pub v: DMatrix<f64>,
}

impl OneElectronMatrices {
    /// The one-body operator `T - V` (kinetic plus attraction, with its sign).
    pub fn core_hamiltonian(&self) -> DMatrix<f64> {
        &self.t - &self.v
    }
}

pub fn one_electron_matrices(basis: &BasisSet, frame: &NuclearFrame) -> OneElectronMatrices {
    let n = basis.len();
    let prims = basis.primitives();
    let mut s = DMatrix::zeros(n, n);
    let mut t = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (a, b) = (&prims[i], &prims[j]);
            let p = a.exponent + b.exponent;
            let mu = a.exponent * b.exponent / p;
            let r2 = dist2(&a.center, &b.center);
            let k = a.norm * b.norm * (-mu * r2).exp();
            let sij = if i == j { 1.0 } else { k * (PI / p).powf(1.5) };
            let tij = mu * (3.0 - 2.0 * mu * r2) * sij;
            let pc = gaussian_product_center(a, b);
            let mut vij = 0.0;
            for (z, c) in frame.charges().iter().zip(frame.positions()) {
                vij += z * boys_f0_unchecked(p * dist2(&pc, c));
            }
            vij *= k * 2.0 * PI / p;
            s[(i, j)] = sij;
            s[(j, i)] = sij;
            t[(i, j)] = tij;
            t[(j, i)] = tij;
            v[(i, j)] = vij;
            v[(j, i)] = vij;
        }
    }
    OneElectronMatrices { s, t, v }
}

fn gaussian_product_center(a: &Primitive, b: &Primitive) -> Point3 {
    let p = a.exponent + b.exponent;
    let mut c = [0.0; 3];
    for (k, ck) in c.iter_mut().enumerate() {
        *ck = (a.exponent * a.center[k] + b.exponent * b.center[k]) / p;
    }
    c
}

#[inline]
fn pair_index(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

/// Two-electron integrals `(pq|rs)` in chemists' notation, stored once per
/// 8-fold symmetry class.
#[derive(Debug, Clone)]
pub struct EriTensor {
    n: usize,
    values: Vec<f64>,
}

impl EriTensor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn unique_len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.values[pair_index(pair_index(p, q), pair_index(r, s))]
    }

    /// Full `n⁴` array, row-major in `(p, q, r, s)`.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        out[((p * n + q) * n + r) * n + s] = self.get(p, q, r, s);
                    }
                }
            }
        }
        out
    }
}

struct PairData {
    exponent: f64,
    center: Point3,
    prefactor: f64,
}

pub fn eri_tensor(basis: &BasisSet) -> EriTensor {
    let n = basis.len();
    let prims = basis.primitives();
    let mut pairs = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            let (a, b) = (&prims[i], &prims[j]);
            let p = a.exponent + b.exponent;
            let mu = a.exponent * b.exponent / p;
            pairs.push(PairData {
                exponent: p,
                center: gaussian_product_center(a, b),
                prefactor: a.norm * b.norm * (-mu * dist2(&a.center, &b.center)).exp(),
            });
        }
    }
    let npair = pairs.len();
    let c = 2.0 * PI.powf(2.5);
    // Each row `ij` holds the entries `(ij|kl)` for `kl ≤ ij`, so the
    // concatenation is exactly the packed layout used by `get`.
    let rows: Vec<Vec<f64>> = (0..npair)
        .into_par_iter()
        .map(|ij| {
            let a = &pairs[ij];
            (0..=ij)
                .map(|kl| {
                    let b = &pairs[kl];
                    let (p, q) = (a.exponent, b.exponent);
                    let rho = p * q / (p + q);
                    c / (p * q * (p + q).sqrt())
                        * a.prefactor
                        * b.prefactor
                        * boys_f0_unchecked(rho * dist2(&a.center, &b.center))
                })
                .collect()
        })
        .collect();
    EriTensor {
        n,
        values: rows.concat(),
    }
}
