//! Dense complex linear algebra helpers shared by all modules.
//!
//! Matrices are nalgebra `DMatrix<Complex64>`; the cubic-cost kernels
//! (products, Hermitean eigensolver, singular values) go through faer on
//! zero-copy views of the same column-major storage.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[inline]
pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().copied().sum()
}

/// `tr(a·b)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn view(m: &CMatrix) -> MatRef<'_, C64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn product<L, R>(rows: usize, cols: usize, lhs: MatRef<'_, L>, rhs: MatRef<'_, R>) -> CMatrix
where
    L: faer::traits::Conjugate<Canonical = C64>,
    R: faer::traits::Conjugate<Canonical = C64>,
{
    let mut out = CMatrix::zeros(rows, cols);
    let dst = MatMut::from_column_major_slice_mut(out.as_mut_slice(), rows, cols);
    matmul(dst, Accum::Replace, lhs, rhs, ONE, Par::Seq);
    out
}

/// `a·b`.
pub fn mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "dimension mismatch in product");
    product(a.nrows(), b.ncols(), view(a), view(b))
}

/// `a†·b`.
pub fn mul_ad(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), b.nrows(), "dimension mismatch in product");
    product(a.ncols(), b.ncols(), view(a).adjoint(), view(b))
}

/// `a·b†`.
pub fn mul_da(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.ncols(), "dimension mismatch in product");
    product(a.nrows(), b.nrows(), view(a), view(b).adjoint())
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    frobenius(&(m - m.adjoint()))
}

/// Frobenius norm of `m†m − 1`.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.ncols();
    frobenius(&(mul_ad(m, m) - identity(n)))
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    match view(m).singular_values() {
        Ok(s) => s,
        // fall back to nalgebra if faer's iteration fails to converge
        Err(_) => m.clone().svd(false, false).singular_values.iter().copied().collect(),
    }
}

pub fn min_singular_value(m: &CMatrix) -> f64 {
    singular_values(m).into_iter().fold(f64::INFINITY, f64::min)
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    singular_values(m).into_iter().sum()
}

/// Determinant carried as `exp(log_abs + i·arg)`.
///
/// `arg` is the plain sum of the pivot arguments; it is not reduced modulo 2π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub log_abs: f64,
    pub arg: f64,
    pub singular: bool,
}

impl LogDet {
    pub fn value(&self) -> C64 {
        if self.singular {
            return ZERO;
        }
        C64::from_polar(self.log_abs.exp(), self.arg)
    }

    pub fn log(&self) -> C64 {
        C64::new(self.log_abs, self.arg)
    }
}

/// LU with partial pivoting; log-magnitudes and arguments are accumulated
/// separately so large dimensions cannot overflow.
pub fn log_det(m: &CMatrix) -> LogDet {
    assert_eq!(m.nrows(), m.ncols(), "determinant of a non-square matrix");
    let n = m.nrows();
    let mut a = m.clone();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE) * n.max(1) as f64;
    let mut log_abs = 0.0;
    let mut arg = 0.0;
    for k in 0..n {
        let mut piv = k;
        let mut best = a[(k, k)].norm();
        for r in (k + 1)..n {
            let v = a[(r, k)].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= tiny {
            return LogDet { log_abs: f64::NEG_INFINITY, arg: 0.0, singular: true };
        }
        if piv != k {
            a.swap_rows(piv, k);
            arg += std::f64::consts::PI;
        }
        let p = a[(k, k)];
        log_abs += p.norm().ln();
        arg += p.arg();
        for r in (k + 1)..n {
            let f = a[(r, k)] / p;
            if f == ZERO {
                continue;
            }
            for c in (k + 1)..n {
                let u = a[(k, c)];
                a[(r, c)] -= f * u;
            }
        }
    }
    LogDet { log_abs, arg, singular: false }
}

pub fn det(m: &CMatrix) -> C64 {
    log_det(m).value()
}

/// Inverse by LU; `None` when the matrix is numerically singular.
pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().lu().try_inverse()
}

/// Eigendecomposition `h = Q·diag(λ)·Q†` of a Hermitean matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Eigenvalues ascending.
    pub fn new(h: &CMatrix) -> Self {
        // the solver reads one triangle only; symmetrize first
        let sym = (h + h.adjoint()) * real(0.5);
        let n = sym.nrows();
        match view(&sym).self_adjoint_eigen(faer::Side::Lower) {
            Ok(eig) => {
                let values = eig.S().column_vector().iter().map(|z| z.re).collect();
                let u = eig.U();
                let vectors = CMatrix::from_fn(n, n, |i, j| u[(i, j)]);
                Self { values, vectors }
            }
            Err(_) => {
                let eig = sym.symmetric_eigen();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
                Self {
                    values: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
                    vectors: CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]),
                }
            }
        }
    }

    /// `Q·diag(f(λ))·Q†`.
    pub fn apply_fn<F: Fn(f64) -> C64>(&self, f: F) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fj = f(l);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= fj);
        }
        mul_da(&scaled, &self.vectors)
    }

    /// `exp(−iθh)`.
    pub fn unitary(&self, theta: f64) -> CMatrix {
        self.apply_fn(|l| C64::from_polar(1.0, -theta * l))
    }
}

/// `exp(−iθh)` for Hermitean `h`, exact to rounding.
pub fn unitary_exp(h: &CMatrix, theta: f64) -> CMatrix {
    HermitianEigen::new(h).unitary(theta)
}

/// `exp(x)` for anti-Hermitean `x`.
pub fn exp_antihermitian(x: &CMatrix) -> CMatrix {
    // x = −i·h with h = i·x Hermitean
    unitary_exp(&(x * I), 1.0)
}

/// `e^{itE} m e^{−itE}` for diagonal `E`.
pub fn conjugate_by_phases(m: &CMatrix, energies: &[f64], t: f64) -> CMatrix {
    let phases: Vec<C64> = energies.iter().map(|&e| C64::from_polar(1.0, t * e)).collect();
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| phases[i] * m[(i, j)] * phases[j].conj())
}

/// `diag(e^{itE}) · m`.
pub fn left_phases(m: &CMatrix, energies: &[f64], t: f64) -> CMatrix {
    let mut out = m.clone();
    for (i, &e) in energies.iter().enumerate() {
        let ph = C64::from_polar(1.0, t * e);
        out.row_mut(i).iter_mut().for_each(|z| *z *= ph);
    }
    out
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
}

/// Random anti-Hermitean matrix with Frobenius norm `scale`.
pub fn random_antihermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> CMatrix {
    let m = random_complex_matrix(rng, n, n);
    let x = (&m - m.adjoint()) * real(0.5);
    let norm = frobenius(&x);
    if norm == 0.0 {
        x
    } else {
        x * real(scale / norm)
    }
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> CMatrix {
    random_antihermitian(rng, n, scale) * I
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    exp_antihermitian(&random_antihermitian(rng, n, 3.0 * (n as f64).sqrt()))
}
