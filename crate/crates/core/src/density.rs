//! One-body density matrices in an orthonormalised basis.
//!
//! A density matrix is held in spectral form `γ = C diag(λ) Cᵀ` with its
//! square root `g = C diag(√λ) Cᵀ` cached alongside. Occupations live in
//! `[0, cap]` with `cap = 1` for the spinless operator the functional is
//! defined on; the cap is a parameter only so other conventions can be tried.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Overlap eigenvalues below this are treated as linear dependencies.
pub const LINEAR_DEPENDENCE_THRESHOLD: f64 = 1e-10;
/// Occupations within this band outside `[0, cap]` are clipped silently.
pub const OCCUPATION_CLIP_BAND: f64 = 1e-10;
/// Eigenvalues below `-NOT_PSD_TOLERANCE` make a matrix "not PSD".
pub const NOT_PSD_TOLERANCE: f64 = 1e-6;

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sorted_eigh(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `U diag(f(λ)) Uᵀ`.
pub(crate) fn spectral_apply(values: &[f64], vectors: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let d = DVector::from_iterator(values.len(), values.iter().map(|&v| f(v)));
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, j| vectors[(i, j)] * d[j]);
    scaled * vectors.transpose()
}

/// Transform `X` with `Xᵀ S X = I` from the primitive basis to an
/// orthonormal one of dimension `m ≤ n`.
#[derive(Debug, Clone)]
pub struct Orthonormalizer {
    x: DMatrix<f64>,
    threshold: f64,
    overlap_eigenvalues: Vec<f64>,
}

impl Orthonormalizer {
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Number of primitive functions `n`.
    pub fn primitive_dim(&self) -> usize {
        self.x.nrows()
    }

    /// Number of orthonormal functions `m` kept.
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn dropped(&self) -> usize {
        self.primitive_dim() - self.dim()
    }

    /// Overlap eigenvalues, ascending.
    pub fn overlap_eigenvalues(&self) -> &[f64] {
        &self.overlap_eigenvalues
    }

    pub fn condition_number(&self) -> f64 {
        let kept: Vec<f64> = self
            .overlap_eigenvalues
            .iter()
            .copied()
            .filter(|&e| e >= self.threshold)
            .collect();
        kept.last().unwrap() / kept[0]
    }

    /// `Xᵀ A X`: a primitive-basis operator in the orthonormal basis.
    pub fn to_orthonormal(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        self.x.transpose() * a * &self.x
    }

    /// `X M Xᵀ`: an orthonormal-basis kernel expanded in primitives.
    pub fn to_primitive(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.x * m * self.x.transpose()
    }

    /// Orthogonal projection of a primitive-basis kernel `K` onto the span:
    /// `Xᵀ S K S X`. Used to carry a density between neighbouring geometries.
    pub fn project_kernel(&self, s: &DMatrix<f64>, k: &DMatrix<f64>) -> DMatrix<f64> {
        let sx = s * &self.x;
        sx.transpose() * k * sx
    }
}

/// Orthonormaliser for overlap `S`: symmetric (Löwdin) `S^{-1/2}` when no
/// eigenvalue falls below `threshold`, canonical `U_kept s^{-1/2}` otherwise.
pub fn lowdin_orthonormalizer(s: &DMatrix<f64>, threshold: f64) -> Result<Orthonormalizer> {
    let n = s.nrows();
    if n == 0 || s.ncols() != n {
        return Err(invalid("overlap must be a nonempty square matrix"));
    }
    let (values, vectors) = sorted_eigh(&symmetrize(s));
    let kept: Vec<usize> = (0..n).filter(|&i| values[i] >= threshold).collect();
    if kept.is_empty() {
        return Err(Error::DegenerateBasis { n, threshold });
    }
    let x = if kept.len() == n {
        spectral_apply(&values, &vectors, |v| 1.0 / v.sqrt())
    } else {
        log::warn!(
            "dropping {} of {} basis directions with overlap eigenvalue below {threshold:e}",
            n - kept.len(),
            n
        );
        DMatrix::from_fn(n, kept.len(), |i, k| vectors[(i, kept[k])] / values[kept[k]].sqrt())
    };
    let out = Orthonormalizer {
        x,
        threshold,
        overlap_eigenvalues: values,
    };
    log::debug!(
        "overlap: smallest eigenvalue {:e}, condition number {:e}",
        out.overlap_eigenvalues[0],
        out.condition_number()
    );
    Ok(out)
}

/// Result of a capped-simplex projection.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexProjection {
    pub point: Vec<f64>,
    /// The water level `μ` with `point_i = clip(x_i - μ, 0, cap)`.
    pub shift: f64,
}

fn clipped_sum(x: &[f64], mu: f64, cap: f64) -> f64 {
    x.iter().map(|&v| (v - mu).clamp(0.0, cap)).sum()
}

/// Euclidean projection of `x` onto `{0 ≤ λ_i ≤ cap, Σ λ_i = total}` by water filling.
pub fn project_capped_simplex(x: &[f64], total: f64, cap: f64) -> Result<SimplexProjection> {
    let m = x.len() as f64;
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(invalid(format!("cap must be positive, got {cap}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("projection input must be finite"));
    }
    if !(total > 0.0 && total <= m * cap * (1.0 + 1e-12)) {
        return Err(invalid(format!(
            "infeasible total {total} for {} entries capped at {cap}",
            x.len()
        )));
    }
    let total = total.min(m * cap);

    // The clipped sum is piecewise linear and nonincreasing in μ with kinks
    // at x_i and x_i - cap; locate the segment containing `total`.
    let mut knots: Vec<f64> = x.iter().flat_map(|&v| [v, v - cap]).collect();
    knots.sort_by(f64::total_cmp);
    let (mut lo, mut hi) = (0, knots.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if clipped_sum(x, knots[mid], cap) >= total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (knots[lo], knots[hi]);
    let (fa, fb) = (clipped_sum(x, a, cap), clipped_sum(x, b, cap));
    let shift = if fa - fb > 0.0 {
        a + (fa - total) / (fa - fb) * (b - a)
    } else {
        a
    };
    let point = x.iter().map(|&v| (v - shift).clamp(0.0, cap)).collect();
    Ok(SimplexProjection { point, shift })
}

/// Euclidean projection onto `{0 ≤ λ_i ≤ cap, Σ λ_i ≤ total}`: clip, and
/// water-fill only when the clipped sum exceeds `total`.
pub fn project_capped_subsimplex(x: &[f64], total: f64, cap: f64) -> Result<SimplexProjection> {
    if !(total > 0.0) {
        return Err(invalid(format!("total must be positive, got {total}")));
    }
    let clipped: Vec<f64> = x.iter().map(|&v| v.clamp(0.0, cap)).collect();
    if clipped.iter().sum::<f64>() <= total {
        return Ok(SimplexProjection {
            point: clipped,
            shift: 0.0,
        });
    }
    project_capped_simplex(x, total, cap)
}

/// Symmetric PSD square root by spectral decomposition.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let (values, vectors) = sorted_eigh(&symmetrize(m));
    if let Some(&min) = values.first() {
        if min < -NOT_PSD_TOLERANCE {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    Ok(spectral_apply(&values, &vectors, |v| v.max(0.0).sqrt()))
}

/// `(√a - √b)/(a - b)`, replaced by `1/(2√a)` for nearly equal arguments.
pub fn sqrt_divided_difference(a: f64, b: f64) -> f64 {
    let scale = a.max(b).max(1.0);
    if (a - b).abs() < 1e-12 * scale {
        let mid = 0.5 * (a + b);
        if mid <= 0.0 {
            return f64::INFINITY;
        }
        return 0.5 / mid.sqrt();
    }
    (a.max(0.0).sqrt() - b.max(0.0).sqrt()) / (a - b)
}

/// `γ` in spectral form over an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityMatrixRecord", into = "DensityMatrixRecord")]
pub struct DensityMatrix {
    occupations: Vec<f64>,
    orbitals: DMatrix<f64>,
    cap: f64,
    gamma: DMatrix<f64>,
    sqrt: DMatrix<f64>,
}

/// Restart-file layout: explicit dimensions, row-major orbital matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityMatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub cap: f64,
    pub occupations: Vec<f64>,
    pub orbitals: Vec<Vec<f64>>,
}

impl From<DensityMatrix> for DensityMatrixRecord {
    fn from(dm: DensityMatrix) -> Self {
        let (rows, cols) = dm.orbitals.shape();
        DensityMatrixRecord {
            rows,
            cols,
            cap: dm.cap,
            orbitals: (0..rows)
                .map(|i| dm.orbitals.row(i).iter().copied().collect())
                .collect(),
            occupations: dm.occupations,
        }
    }
}

impl TryFrom<DensityMatrixRecord> for DensityMatrix {
    type Error = Error;

    fn try_from(rec: DensityMatrixRecord) -> Result<Self> {
        if rec.orbitals.len() != rec.rows || rec.orbitals.iter().any(|r| r.len() != rec.cols) {
            return Err(Error::Validation(format!(
                "orbital matrix does not have the declared shape {}x{}",
                rec.rows, rec.cols
            )));
        }
        let c = DMatrix::from_fn(rec.rows, rec.cols, |i, j| rec.orbitals[i][j]);
        dm_from_spectral_with_cap(rec.occupations, c, rec.cap)
    }
}

/// Validated density matrix with `cap = 1`.
pub fn dm_from_spectral(occupations: Vec<f64>, orbitals: DMatrix<f64>) -> Result<DensityMatrix> {
    dm_from_spectral_with_cap(occupations, orbitals, 1.0)
}

pub fn dm_from_spectral_with_cap(
    mut occupations: Vec<f64>,
    orbitals: DMatrix<f64>,
    cap: f64,
) -> Result<DensityMatrix> {
    let m = occupations.len();
    if orbitals.nrows() != m || orbitals.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: orbitals.ncols(),
        });
    }
    if !(cap > 0.0) {
        return Err(invalid(format!("occupation cap must be positive, got {cap}")));
    }
    for (i, l) in occupations.iter_mut().enumerate() {
        if !l.is_finite() || *l < -OCCUPATION_CLIP_BAND {
            return Err(Error::Validation(format!("occupation {i} = {l} violates λ ≥ 0")));
        }
        if *l > cap + OCCUPATION_CLIP_BAND {
            return Err(Error::Validation(format!("occupation {i} = {l} violates λ ≤ {cap}")));
        }
        *l = l.clamp(0.0, cap);
    }
    let ctc = orbitals.transpose() * &orbitals;
    let dev = (ctc - DMatrix::identity(m, m)).abs().max();
    if dev > 1e-10 {
        return Err(Error::Validation(format!(
            "orbitals are not orthonormal (max |CᵀC - I| = {dev:e})"
        )));
    }
    let gamma = spectral_apply(&occupations, &orbitals, |l| l);
    let sqrt = spectral_apply(&occupations, &orbitals, f64::sqrt);
    Ok(DensityMatrix {
        occupations,
        orbitals,
        cap,
        gamma,
        sqrt,
    })
}

impl DensityMatrix {
    /// The density matrix whose square root is the symmetric PSD matrix `g`.
    pub fn from_sqrt(g: &DMatrix<f64>, cap: f64) -> Result<Self> {
        let (values, vectors) = sorted_eigh(&symmetrize(g));
        if let Some(&min) = values.first() {
            if min < -NOT_PSD_TOLERANCE {
                return Err(Error::NotPsd { min_eigenvalue: min });
            }
        }
        let occ = values.iter().map(|s| s.max(0.0).powi(2)).collect();
        dm_from_spectral_with_cap(occ, vectors, cap)
    }

    /// Zero density matrix on `m` orbitals.
    pub fn zero(m: usize) -> Self {
        dm_from_spectral(vec![0.0; m], DMatrix::identity(m, m)).expect("identity is orthonormal")
    }

    pub fn dim(&self) -> usize {
        self.occupations.len()
    }

    pub fn occupations(&self) -> &[f64] {
        &self.occupations
    }

    pub fn orbitals(&self) -> &DMatrix<f64> {
        &self.orbitals
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// `g = γ^{1/2}`.
    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    pub fn trace(&self) -> f64 {
        self.occupations.iter().sum()
    }
}

/// Random orthogonal matrix (Q factor of a uniform random matrix).
pub fn random_orthogonal(m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

/// Random density matrix with the given occupations and random orbitals.
pub fn random_density_matrix(occupations: Vec<f64>, rng: &mut impl Rng) -> Result<DensityMatrix> {
    let m = occupations.len();
    dm_from_spectral(occupations, random_orthogonal(m, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive active-set oracle: every assignment of each coordinate to
    /// {lower, upper, free} is tried and the feasible KKT point kept.
    fn brute_force_projection(x: &[f64], total: f64) -> Vec<f64> {
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
            let fixed: f64 = state.iter().filter(|&&s| s == 1).count() as f64;
            let free: Vec<usize> = (0..m).filter(|&i| state[i] == 2).collect();
            let mut y = vec![0.0; m];
            for i in 0..m {
                if state[i] == 1 {
                    y[i] = 1.0;
                }
            }
            if free.is_empty() {
                if (fixed - total).abs() > 1e-12 {
                    continue;
                }
            } else {
                let mu = (free.iter().map(|&i| x[i]).sum::<f64>() - (total - fixed)) / free.len() as f64;
                for &i in &free {
                    y[i] = x[i] - mu;
                }
            }
            if y.iter().any(|&v| v < -1e-12 || v > 1.0 + 1e-12) {
                continue;
            }
            let d: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, y));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn orthonormalizer_identity_and_pruning() {
        let id = DMatrix::<f64>::identity(4, 4);
        let o = lowdin_orthonormalizer(&id, 1e-10).unwrap();
        assert_eq!(o.dim(), 4);
        assert!((o.x() - &id).abs().max() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_orthogonal(5, &mut rng);
        let s = spectral_apply(&[1e-14, 0.2, 0.5, 1.0, 2.0], &q, |v| v);
        let o = lowdin_orthonormalizer(&s, 1e-10).unwrap();
        assert_eq!(o.dim(), 4);
        assert_eq!(o.dropped(), 1);
        let xsx = o.to_orthonormal(&s);
        assert!((xsx - DMatrix::identity(4, 4)).abs().max() < 1e-10);

        let tiny = DMatrix::<f64>::identity(2, 2) * 1e-14;
        assert!(matches!(
            lowdin_orthonormalizer(&tiny, 1e-10),
            Err(Error::DegenerateBasis { .. })
        ));
    }

    #[test]
    fn orthonormalizer_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 1..8 {
            let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
            let s = &a * a.transpose() + DMatrix::identity(m, m) * 0.1;
            let o = lowdin_orthonormalizer(&s, 1e-10).unwrap();
            let dev = (o.to_orthonormal(&s) - DMatrix::identity(m, m)).abs().max();
            assert!(dev < 1e-10);
        }
    }

    #[test]
    fn water_filling_examples() {
        let p = project_capped_simplex(&[1.2, -0.1, 0.4], 1.5, 1.0).unwrap();
        for (a, b) in p.point.iter().zip([1.0, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p.shift + 0.1).abs() < 1e-12);

        let x = [0.3, 0.9, 0.0, 0.6];
        let p = project_capped_simplex(&x, 1.8, 1.0).unwrap();
        for (a, b) in p.point.iter().zip(x) {
            assert!((a - b).abs() < 1e-15);
        }

        let p = project_capped_simplex(&[0.5, 0.5], 2.0, 1.0).unwrap();
        assert_eq!(p.point, vec![1.0, 1.0]);

        assert!(project_capped_simplex(&[0.5, 0.5], 2.5, 1.0).is_err());
        assert!(project_capped_simplex(&[0.5, 0.5], 0.0, 1.0).is_err());
    }

    #[test]
    fn subsimplex_only_fills_when_needed() {
        let p = project_capped_subsimplex(&[0.2, -0.3, 1.4], 2.0, 1.0).unwrap();
        assert_eq!(p.point, vec![0.2, 0.0, 1.0]);
        let p = project_capped_subsimplex(&[0.9, 0.9, 0.9], 2.0, 1.0).unwrap();
        assert!((p.point.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn projection_matches_active_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let m = rng.random_range(1..=4);
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.5..2.0)).collect();
            let total = rng.random_range(0.05..=m as f64);
            let p = project_capped_simplex(&x, total, 1.0).unwrap();
            let q = brute_force_projection(&x, total);
            let d: f64 = p.point.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(d < 1e-8, "x = {x:?}, N = {total}");
            assert!((p.point.iter().sum::<f64>() - total).abs() < 1e-12);
        }
    }

    #[test]
    fn sqrt_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((matrix_sqrt_psd(&id).unwrap() - &id).abs().max() < 1e-15);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0]));
        let r = matrix_sqrt_psd(&d).unwrap();
        assert!((r - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]))).abs().max() < 1e-15);
        let neg = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-3]));
        assert!(matches!(matrix_sqrt_psd(&neg), Err(Error::NotPsd { .. })));
        let small = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-11]));
        assert!(matrix_sqrt_psd(&small).is_ok());
    }

    #[test]
    fn divided_difference_limits() {
        assert_relative_eq!(sqrt_divided_difference(4.0, 1.0), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(sqrt_divided_difference(0.25, 0.25), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            sqrt_divided_difference(0.25, 0.25 * (1.0 + 1e-14)),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn spectral_constructor_examples() {
        let dm = dm_from_spectral(vec![1.0], DMatrix::identity(1, 1)).unwrap();
        assert_eq!(dm.trace(), 1.0);
        assert_eq!(dm.gamma()[(0, 0)], 1.0);

        let err = dm_from_spectral(vec![1.0 + 1e-3, 0.0], DMatrix::identity(2, 2)).unwrap_err();
        assert!(err.to_string().contains("λ ≤"));
        let err = dm_from_spectral(vec![-1e-3, 0.0], DMatrix::identity(2, 2)).unwrap_err();
        assert!(err.to_string().contains("λ ≥ 0"));
        assert!(dm_from_spectral(vec![0.5, 0.5], DMatrix::from_element(2, 2, 1.0)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lam: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let dm = dm_from_spectral(lam.clone(), random_orthogonal(5, &mut rng)).unwrap();
        assert_eq!(dm.trace().to_bits(), lam.iter().sum::<f64>().to_bits());
        let gg = dm.sqrt() * dm.sqrt();
        assert!((gg - dm.gamma()).abs().max() < 1e-9);
    }

    #[test]
    fn restart_record_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dm = dm_from_spectral(vec![0.2, 0.7, 1.0], random_orthogonal(3, &mut rng)).unwrap();
        let json = serde_json::to_string(&dm).unwrap();
        assert!(json.contains("\"rows\":3"));
        let back: DensityMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back.occupations(), dm.occupations());
        assert!((back.gamma() - dm.gamma()).abs().max() < 1e-15);
        let bad = json.replace("\"rows\":3", "\"rows\":2");
        assert!(serde_json::from_str::<DensityMatrix>(&bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sqrt_squares_back(seed in 0u64..10_000, m in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
            let psd = &a * a.transpose();
            let r = matrix_sqrt_psd(&psd).unwrap();
            let err = (&r * &r - &psd).norm();
            prop_assert!(err < 1e-9 * psd.norm().max(1e-300));
        }

        #[test]
        fn cached_sqrt_matches_spectral_sqrt(seed in 0u64..10_000, m in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut lam: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            lam.sort_by(f64::total_cmp);
            prop_assume!(lam.windows(2).all(|w| w[1] - w[0] > 1e-6));
            let dm = dm_from_spectral(lam, random_orthogonal(m, &mut rng)).unwrap();
            let r = matrix_sqrt_psd(dm.gamma()).unwrap();
            prop_assert!((r - dm.sqrt()).abs().max() < 1e-8);
        }
    }
}
