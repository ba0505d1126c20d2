//! Dense complex Hermitian linear algebra.
//!
//! Eigendecompositions come from `nalgebra`; everything else (square roots,
//! distances, partial traces, exponentials) is built on top of them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tolerances::{Caps, Tolerances};

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending. Column `k` of
/// `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    /// `V f(Λ) V†`.
    pub fn map(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (k, &v) in self.values.iter().enumerate() {
            let s = f(v);
            for x in scaled.column_mut(k).iter_mut() {
                *x *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn check_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    Ok(())
}

pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs_entry(&(m - m.adjoint()))
}

pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

/// Eigendecomposition of `(m + m†)/2`, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> Result<Eigen> {
    check_square(m)?;
    let sym = symmetrize(m);
    if sym.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("non-finite matrix entry".into()));
    }
    let n = sym.nrows();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    // The solver underflows on matrices with tiny entries, so work on the
    // matrix scaled to unit largest entry.
    let scale = max_abs_entry(&sym);
    if scale == 0.0 {
        return Ok(Eigen {
            values: vec![0.0; n],
            vectors: CMatrix::identity(n, n),
        });
    }
    // Entries below eps² of the largest move eigenvalues by far less than
    // rounding, but strongly graded matrices send the solver into
    // subnormals and NaN; flush them.
    let flush = f64::EPSILON * f64::EPSILON;
    let scaled = sym.unscale(scale).map(|z| if z.norm() < flush { ZERO } else { z });
    let eig = scaled.symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) || eig.eigenvectors.iter().any(|z| !z.is_finite()) {
        return Err(Error::Eigen("eigensolver returned non-finite values".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k] * scale).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Eigen { values, vectors })
}

/// Sum of singular values.
pub fn nuclear_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().sum()
}

/// Hermitian operator, stored symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, Tolerances::DEFAULT.herm)
    }

    pub fn with_tolerance(m: CMatrix, herm_tol: f64) -> Result<Self> {
        check_square(&m)?;
        let dev = hermiticity_defect(&m);
        if dev.is_nan() || dev > herm_tol {
            return Err(Error::NotHermitian { max_dev: dev });
        }
        Ok(Self { m: symmetrize(&m) })
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let v: Vec<Complex64> = d.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self {
            m: CMatrix::from_diagonal(&nalgebra::DVector::from_vec(v)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn eig(&self) -> Result<Eigen> {
        eigh(&self.m)
    }

    /// `tr[A ρ]`, real part.
    pub fn expectation(&self, rho: &CMatrix) -> Result<f64> {
        check_same_dim(&self.m, rho)?;
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += (self.m[(i, j)] * rho[(j, i)]).re;
            }
        }
        Ok(acc)
    }
}

/// Eigendecomposition of a Hermitian operator.
pub fn eig_hermitian(a: &HermitianOperator) -> Result<Eigen> {
    a.eig()
}

/// Unit-trace positive semidefinite operator.
///
/// A factor `A` with `ρ = A A†` is kept when the state was assembled from
/// vectors; fidelities use it directly instead of a spectral square root.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    m: CMatrix,
    factor: Option<CMatrix>,
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::DEFAULT)
    }

    pub fn with_tolerances(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        let h = HermitianOperator::with_tolerance(m, tol.herm)?;
        let tr = trace(h.matrix()).re;
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::NotTraceOne { trace: tr });
        }
        let eig = h.eig()?;
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min < tol.psd_floor {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Self {
            m: h.into_matrix(),
            factor: None,
        })
    }

    /// `ρ = A A†`. The trace is checked; positivity holds by construction.
    pub fn from_factor(a: CMatrix) -> Result<Self> {
        Self::from_factor_with_tolerances(a, &Tolerances::DEFAULT)
    }

    pub fn from_factor_with_tolerances(a: CMatrix, tol: &Tolerances) -> Result<Self> {
        let tr: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::NotTraceOne { trace: tr });
        }
        let m = symmetrize(&(&a * a.adjoint()));
        Ok(Self {
            m,
            factor: Some(compress_factor(a)),
        })
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let a = CMatrix::from_column_slice(psi.len(), 1, psi);
        Self::from_factor(a)
    }

    /// `I/d` restricted to the listed basis indices of a `dim`-dimensional space.
    pub fn uniform_on(dim: usize, support: &[usize]) -> Result<Self> {
        let w = 1.0 / (support.len() as f64).sqrt();
        let mut a = CMatrix::zeros(dim, support.len());
        for (k, &i) in support.iter().enumerate() {
            if i >= dim {
                return Err(Error::DimensionMismatch { left: dim, right: i + 1 });
            }
            a[(i, k)] = Complex64::new(w, 0.0);
        }
        Self::from_factor(a)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn as_hermitian(&self) -> HermitianOperator {
        HermitianOperator { m: self.m.clone() }
    }

    pub fn purity(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum()
    }

    /// A factor `A` with `ρ = A A†`, built from the spectrum if none was
    /// supplied. Eigenvalues below the spectral noise floor are dropped.
    pub fn factor(&self) -> Result<CMatrix> {
        if let Some(a) = &self.factor {
            return Ok(a.clone());
        }
        spectral_factor(&self.m, &Tolerances::DEFAULT)
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &UnitaryOperator) -> Result<DensityMatrix> {
        check_same_dim(&self.m, u.matrix())?;
        let m = symmetrize(&(u.matrix() * &self.m * u.matrix().adjoint()));
        let factor = self.factor.as_ref().map(|a| u.matrix() * a);
        Ok(DensityMatrix { m, factor })
    }

    pub(crate) fn from_parts_unchecked(m: CMatrix, factor: Option<CMatrix>) -> Self {
        Self { m, factor }
    }
}

/// Replaces a wide factor by an equivalent square one (`A = L Q`).
fn compress_factor(a: CMatrix) -> CMatrix {
    if a.ncols() <= a.nrows() {
        return a;
    }
    // A† = Q R  =>  A = R† Q†, and A A† = R† R.
    let r = a.adjoint().qr().r();
    // Householder QR can emit NaN on exactly rank-deficient input.
    if r.iter().all(|z| z.is_finite()) {
        r.adjoint()
    } else {
        a
    }
}

fn spectral_factor(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    let eig = eigh(m)?;
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < tol.psd_floor {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let floor = tol.spectral_floor(m.nrows(), eig.max_abs());
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > floor).collect();
    let mut a = CMatrix::zeros(m.nrows(), keep.len());
    for (c, &k) in keep.iter().enumerate() {
        let s = eig.values[k].sqrt();
        a.set_column(c, &(eig.vectors.column(k) * Complex64::new(s, 0.0)));
    }
    Ok(a)
}

/// `(1/2) Σ |eig(ρ − σ)|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.matrix(), sigma.matrix())?;
    trace_norm_half(&(rho.matrix() - sigma.matrix()))
}

/// Half the trace norm of a Hermitian matrix.
pub fn trace_norm_half(diff: &CMatrix) -> Result<f64> {
    let eig = eigh(diff)?;
    let d = 0.5 * eig.values.iter().map(|v| v.abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}

/// Trace distance between `A A†` and `B B†` from their factors.
///
/// The difference is compressed onto the column span of `[A B]` before the
/// eigensolve, so the cost scales with the factor ranks.
pub fn factor_trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    let cols = a.ncols() + b.ncols();
    if cols >= a.nrows() {
        return trace_norm_half(&(a * a.adjoint() - b * b.adjoint()));
    }
    let mut x = CMatrix::zeros(a.nrows(), cols);
    x.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    x.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    let r = x.qr().r();
    if !r.iter().all(|z| z.is_finite()) {
        return trace_norm_half(&(a * a.adjoint() - b * b.adjoint()));
    }
    let mut s = r.clone();
    for k in a.ncols()..cols {
        for z in s.column_mut(k).iter_mut() {
            *z = -*z;
        }
    }
    trace_norm_half(&(s * r.adjoint()))
}

/// `tr √(√ρ σ √ρ)`, evaluated as the nuclear norm of `A† B` for factors
/// `ρ = A A†`, `σ = B B†`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.matrix(), sigma.matrix())?;
    let a = rho.factor()?;
    let b = sigma.factor()?;
    Ok(factor_fidelity(&a, &b))
}

/// Fidelity between `A A†` and `B B†`.
pub fn factor_fidelity(a: &CMatrix, b: &CMatrix) -> f64 {
    nuclear_norm(&(a.adjoint() * b)).clamp(0.0, 1.0)
}

/// Positive square root; eigenvalues in `[psd_floor, floor]` are treated as zero.
pub fn psd_sqrt(a: &DensityMatrix) -> Result<HermitianOperator> {
    psd_sqrt_matrix(a.matrix(), &Tolerances::DEFAULT)
}

pub fn psd_sqrt_matrix(m: &CMatrix, tol: &Tolerances) -> Result<HermitianOperator> {
    let eig = eigh(m)?;
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < tol.psd_floor {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let floor = tol.spectral_floor(m.nrows(), eig.max_abs());
    let root = eig.map(|v| Complex64::new(if v > floor { v.sqrt() } else { 0.0 }, 0.0));
    Ok(HermitianOperator { m: symmetrize(&root) })
}

/// Which factor of a bipartite space survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// Partial trace over `C^{dA} ⊗ C^{dB}` (index `a * dB + b`).
pub fn partial_trace_matrix(m: &CMatrix, d_a: usize, d_b: usize, keep: Keep) -> Result<CMatrix> {
    let dim = check_square(m)?;
    if d_a * d_b != dim {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: d_a * d_b,
        });
    }
    Ok(match keep {
        Keep::A => CMatrix::from_fn(d_a, d_a, |i, j| (0..d_b).map(|b| m[(i * d_b + b, j * d_b + b)]).sum()),
        Keep::B => CMatrix::from_fn(d_b, d_b, |i, j| (0..d_a).map(|a| m[(a * d_b + i, a * d_b + j)]).sum()),
    })
}

pub fn partial_trace(rho: &DensityMatrix, dims: (usize, usize), keep: Keep) -> Result<DensityMatrix> {
    let m = partial_trace_matrix(rho.matrix(), dims.0, dims.1, keep)?;
    DensityMatrix::new(m)
}

/// Unitary operator, checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    m: CMatrix,
}

impl UnitaryOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, Tolerances::DEFAULT.unitary)
    }

    pub fn with_tolerance(m: CMatrix, tol: f64) -> Result<Self> {
        let dim = check_square(&m)?;
        let dev = max_abs_entry(&(m.adjoint() * &m - CMatrix::identity(dim, dim)));
        if dev.is_nan() || dev > tol {
            return Err(Error::NotUnitary { max_dev: dev });
        }
        Ok(Self { m })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> UnitaryOperator {
        UnitaryOperator { m: self.m.adjoint() }
    }

    pub fn mul(&self, other: &UnitaryOperator) -> Result<UnitaryOperator> {
        check_same_dim(&self.m, &other.m)?;
        Ok(UnitaryOperator { m: &self.m * &other.m })
    }
}

/// `exp(−i H t)` by spectral decomposition.
pub fn evolve_hermitian(h: &HermitianOperator, t: f64) -> Result<UnitaryOperator> {
    Propagator::new(h)?.at(t)
}

/// Cached eigendecomposition of a Hamiltonian for repeated exponentials.
#[derive(Debug, Clone)]
pub struct Propagator {
    eig: Eigen,
}

impl Propagator {
    pub fn new(h: &HermitianOperator) -> Result<Self> {
        Ok(Self { eig: h.eig()? })
    }

    pub fn eigen(&self) -> &Eigen {
        &self.eig
    }

    pub fn at(&self, t: f64) -> Result<UnitaryOperator> {
        let u = self.eig.map(|w| Complex64::from_polar(1.0, -w * t));
        UnitaryOperator::with_tolerance(u, 1e-9)
    }
}

/// Kronecker product `A ⊗ B`.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `u^{⊗N}` with slot 1 as the most significant factor.
pub fn tensor_power(u: &UnitaryOperator, n: usize) -> Result<UnitaryOperator> {
    tensor_power_with_caps(u, n, &Caps::DEFAULT)
}

pub fn tensor_power_with_caps(u: &UnitaryOperator, n: usize, caps: &Caps) -> Result<UnitaryOperator> {
    let dim = checked_pow(u.dim(), n).unwrap_or(usize::MAX);
    if dim > caps.dim {
        return Err(Error::CapExceeded {
            what: "dimension",
            value: dim,
            cap: caps.dim,
        });
    }
    let mut acc = CMatrix::identity(1, 1);
    for _ in 0..n {
        acc = acc.kronecker(u.matrix());
    }
    Ok(UnitaryOperator { m: acc })
}

pub fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryOperator {
    let g = ginibre(dim, dim, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut m = q;
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for x in m.column_mut(k).iter_mut() {
            *x *= phase;
        }
    }
    UnitaryOperator { m }
}

/// Random density matrix `G G† / tr(G G†)` for a `dim × rank` Ginibre `G`.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, rank.max(1), rng);
    let norm = g.norm();
    let a = g.unscale(norm);
    let m = symmetrize(&(&a * a.adjoint()));
    DensityMatrix::from_parts_unchecked(m, Some(compress_factor(a)))
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(d: &[f64]) -> CMatrix {
        HermitianOperator::from_real_diagonal(d).into_matrix()
    }

    #[test]
    fn eigh_of_tiny_matrix() {
        let m = CMatrix::from_fn(6, 6, |i, j| Complex64::new(1e-17 * ((i * j) % 3) as f64, 0.0));
        let e = eigh(&m).unwrap();
        assert!(e.values.iter().all(|v| v.is_finite()));
        let back = e.map(|v| Complex64::new(v, 0.0));
        assert!(max_abs_entry(&(back - symmetrize(&m))) < 1e-30);
        assert_eq!(eigh(&CMatrix::zeros(3, 3)).unwrap().values, vec![0.0; 3]);
    }

    #[test]
    fn rank_deficient_factors_stay_finite() {
        // Ten identical columns: the QR of [A A] is exactly rank one.
        let v: Vec<Complex64> = (0..8).map(|k| Complex64::new(1.0, k as f64 * 0.1)).collect();
        let norm = (10.0 * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        let a = CMatrix::from_fn(8, 10, |i, _| v[i] / norm);
        let d = factor_trace_distance(&a, &a).unwrap();
        assert!(d.is_finite() && d.abs() < 1e-12);
        let wide = CMatrix::from_fn(4, 10, |i, _| v[i] / norm);
        assert!(compress_factor(wide).iter().all(|z| z.is_finite()));
    }

    #[test]
    fn eigenvalues_of_simple_matrices() {
        let e = eigh(&CMatrix::identity(4, 4)).unwrap();
        assert_eq!(e.values.len(), 4);
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-14));

        let e = eigh(&diag(&[0.75, 0.25])).unwrap();
        assert!((e.values[0] - 0.25).abs() < 1e-14 && (e.values[1] - 0.75).abs() < 1e-14);

        let x = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let e = eigh(&x).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_residual_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = ginibre(7, 7, &mut rng);
        let h = symmetrize(&g);
        let e = eigh(&h).unwrap();
        let lam = diag(&e.values);
        let res = max_abs_entry(&(&h * &e.vectors - &e.vectors * lam));
        assert!(res <= 1e-9 * max_abs_entry(&h));
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_bad_operators() {
        let m = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian { .. })));
        assert!(matches!(
            DensityMatrix::new(diag(&[1.5, -0.5])),
            Err(Error::NotPsd { .. })
        ));
        assert!(matches!(DensityMatrix::new(diag(&[0.5, 0.4])), Err(Error::NotTraceOne { .. })));
        assert!(matches!(
            HermitianOperator::new(CMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        assert!(UnitaryOperator::new(diag(&[1.0, 0.5])).is_err());
    }

    #[test]
    fn trace_distance_examples() {
        let a = DensityMatrix::pure(&[ONE, ZERO]).unwrap();
        let b = DensityMatrix::pure(&[ZERO, ONE]).unwrap();
        assert!(trace_distance(&a, &a).unwrap().abs() < 1e-14);
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-14);
        let s = 0.5f64.sqrt();
        let plus = DensityMatrix::pure(&[c(s), c(s)]).unwrap();
        let mixed = DensityMatrix::new(diag(&[0.5, 0.5])).unwrap();
        assert!((trace_distance(&plus, &mixed).unwrap() - 0.5).abs() < 1e-14);
        let three = DensityMatrix::new(diag(&[1.0, 0.0, 0.0])).unwrap();
        assert!(trace_distance(&a, &three).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let a = DensityMatrix::pure(&[ONE, ZERO]).unwrap();
        let b = DensityMatrix::pure(&[ZERO, ONE]).unwrap();
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-14);
        assert!(fidelity(&a, &b).unwrap().abs() < 1e-14);
        let s = 0.5f64.sqrt();
        let plus = DensityMatrix::pure(&[c(s), c(s)]).unwrap();
        let mixed = DensityMatrix::new(diag(&[0.5, 0.5])).unwrap();
        assert!((fidelity(&plus, &mixed).unwrap() - s).abs() < 1e-14);
        // Spectral path (no stored factor) agrees with the factor path.
        let plus_dense = DensityMatrix::new(plus.matrix().clone()).unwrap();
        assert!((fidelity(&plus_dense, &mixed).unwrap() - s).abs() < 1e-12);
    }

    #[test]
    fn sqrt_examples() {
        let r = psd_sqrt(&DensityMatrix::new(diag(&[0.25, 0.75])).unwrap()).unwrap();
        assert!((r.matrix()[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((r.matrix()[(1, 1)].re - 0.75f64.sqrt()).abs() < 1e-14);
        let p = DensityMatrix::new(diag(&[1.0, 0.0])).unwrap();
        let r = psd_sqrt(&p).unwrap();
        assert!(frobenius_distance(r.matrix(), p.matrix()) < 1e-14);
        let bad = psd_sqrt_matrix(&diag(&[1.0, -1e-3]), &Tolerances::DEFAULT);
        assert!(matches!(bad, Err(Error::NotPsd { .. })));
    }

    #[test]
    fn partial_trace_examples() {
        let a = diag(&[0.25, 0.75]);
        let b = diag(&[0.5, 0.3, 0.2]);
        let ab = tensor(&a, &b);
        assert!(frobenius_distance(&partial_trace_matrix(&ab, 2, 3, Keep::A).unwrap(), &a) < 1e-15);
        assert!(frobenius_distance(&partial_trace_matrix(&ab, 2, 3, Keep::B).unwrap(), &b) < 1e-15);
        let s = 0.5f64.sqrt();
        let bell = DensityMatrix::pure(&[c(s), ZERO, ZERO, c(s)]).unwrap();
        let red = partial_trace(&bell, (2, 2), Keep::A).unwrap();
        assert!(frobenius_distance(red.matrix(), &diag(&[0.5, 0.5])) < 1e-15);
        assert!(partial_trace_matrix(&ab, 2, 2, Keep::A).is_err());
    }

    #[test]
    fn exponential_examples() {
        let h = HermitianOperator::from_real_diagonal(&[0.3, -1.2]);
        let u = evolve_hermitian(&h, 0.0).unwrap();
        assert!(max_abs_entry(&(u.matrix() - CMatrix::identity(2, 2))) < 1e-14);
        let u = evolve_hermitian(&h, 2.0).unwrap();
        assert!((u.matrix()[(0, 0)] - Complex64::from_polar(1.0, -0.6)).norm() < 1e-14);
        assert!((u.matrix()[(1, 1)] - Complex64::from_polar(1.0, 2.4)).norm() < 1e-14);

        let hop = HermitianOperator::new(CMatrix::from_row_slice(2, 2, &[ZERO, c(-1.0), c(-1.0), ZERO])).unwrap();
        let u = evolve_hermitian(&hop, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((u.matrix()[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_power_examples() {
        let id = UnitaryOperator::identity(2);
        let p = tensor_power(&id, 3).unwrap();
        assert_eq!(p.dim(), 8);
        assert!(max_abs_entry(&(p.matrix() - CMatrix::identity(8, 8))) < 1e-15);
        assert_eq!(tensor(&CMatrix::identity(4, 4), &CMatrix::identity(4, 4)).nrows(), 16);
        let caps = Caps { dim: 16, ..Caps::DEFAULT };
        assert!(tensor_power_with_caps(&id, 5, &caps).is_err());
    }

    #[test]
    fn factor_compression_preserves_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = ginibre(3, 9, &mut rng);
        let a = g.unscale(g.norm());
        let rho = DensityMatrix::from_factor(a.clone()).unwrap();
        let f = rho.factor().unwrap();
        assert_eq!(f.ncols(), 3);
        assert!(frobenius_distance(&(&f * f.adjoint()), &(&a * a.adjoint())) < 1e-14);
    }

    fn random_pair(seed: u64, dim: usize) -> (DensityMatrix, DensityMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = rng.random_range(1..=dim);
        let r2 = rng.random_range(1..=dim);
        (
            random_density_matrix(dim, r1, &mut rng),
            random_density_matrix(dim, r2, &mut rng),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn fuchs_van_de_graaf(seed in any::<u64>(), dim in 2usize..=8) {
            let (rho, sigma) = random_pair(seed, dim);
            let d = trace_distance(&rho, &sigma).unwrap();
            let f = fidelity(&rho, &sigma).unwrap();
            prop_assert!(1.0 - f <= d + 1e-9);
            prop_assert!(d <= (1.0 - f * f).max(0.0).sqrt() + 1e-9);
            let f_rev = fidelity(&sigma, &rho).unwrap();
            prop_assert!((f - f_rev).abs() <= 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn trace_distance_unitary_invariance(seed in any::<u64>(), dim in 2usize..=6) {
            let (rho, sigma) = random_pair(seed, dim);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let u = haar_unitary(dim, &mut rng);
            let d0 = trace_distance(&rho, &sigma).unwrap();
            let d1 = trace_distance(&rho.conjugate_by(&u).unwrap(), &sigma.conjugate_by(&u).unwrap()).unwrap();
            prop_assert!((d0 - d1).abs() <= 1e-9);
        }

        #[test]
        fn fidelity_tensor_multiplicativity(seed in any::<u64>(), dim in 2usize..=4) {
            let (rho, sigma) = random_pair(seed, dim);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            let alpha = random_density_matrix(3, 2, &mut rng);
            let left = DensityMatrix::new(tensor(alpha.matrix(), rho.matrix())).unwrap();
            let right = DensityMatrix::new(tensor(alpha.matrix(), sigma.matrix())).unwrap();
            let f0 = fidelity(&rho, &sigma).unwrap();
            let f1 = fidelity(&left, &right).unwrap();
            prop_assert!((f0 - f1).abs() <= 1e-9);
        }

        #[test]
        fn partial_trace_contracts(seed in any::<u64>()) {
            let (rho, sigma) = random_pair(seed, 12);
            let d_full = trace_distance(&rho, &sigma).unwrap();
            let f_full = fidelity(&rho, &sigma).unwrap();
            for (dims, keep) in [((2, 6), Keep::A), ((6, 2), Keep::B), ((3, 4), Keep::A)] {
                let a = partial_trace(&rho, dims, keep).unwrap();
                let b = partial_trace(&sigma, dims, keep).unwrap();
                prop_assert!(trace_distance(&a, &b).unwrap() <= d_full + 1e-9);
                prop_assert!(fidelity(&a, &b).unwrap() >= f_full - 1e-9);
                prop_assert!((trace(a.matrix()).re - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn evolution_is_a_group(seed in any::<u64>(), t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = HermitianOperator::new(symmetrize(&ginibre(5, 5, &mut rng))).unwrap();
            let p = Propagator::new(&h).unwrap();
            let lhs = p.at(t1).unwrap().mul(&p.at(t2).unwrap()).unwrap();
            let rhs = p.at(t1 + t2).unwrap();
            prop_assert!(max_abs_entry(&(lhs.matrix() - rhs.matrix())) <= 1e-8);
        }

        #[test]
        fn factor_trace_distance_matches_dense(seed in any::<u64>(), dim in 2usize..=9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density_matrix(dim, 1 + dim / 3, &mut rng);
            let sigma = random_density_matrix(dim, 1, &mut rng);
            let d0 = trace_distance(&rho, &sigma).unwrap();
            let d1 = factor_trace_distance(&rho.factor().unwrap(), &sigma.factor().unwrap()).unwrap();
            prop_assert!((d0 - d1).abs() <= 1e-12);
        }

        #[test]
        fn sqrt_squares_back(seed in any::<u64>(), dim in 1usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density_matrix(dim, dim, &mut rng);
            let r = psd_sqrt(&rho).unwrap();
            prop_assert!(max_abs_entry(&(r.matrix() * r.matrix() - rho.matrix())) <= 1e-9);
        }
    }
}
