//! Blocks relative to the energy polarization and the central-extension
//! pairs `(g, q)`.

use crate::error::{LabError, Result};
use crate::linalg::{frobenius, log_det, mul, singular_values, trace_norm, CMatrix, LogDet, C64, ZERO};
use crate::model::Grading;

/// Below this smallest singular value of `a` the local section is undefined.
pub const SECTION_THRESHOLD: f64 = 1e-8;

/// `g = [[a, b], [c, d]]` with `a: H₊→H₊`, `b: H₋→H₊`, `c: H₊→H₋`, `d: H₋→H₋`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedOperator {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    pub d: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDiagnostics {
    pub b_hs: f64,
    pub c_hs: f64,
    pub b_trace_norm: f64,
    pub c_trace_norm: f64,
    pub a_min_singular: f64,
    /// Number of singular values of `a` below the section threshold; nonzero
    /// means `ind a = 0` cannot be certified numerically.
    pub a_rank_deficiency: usize,
}

impl BlockDiagnostics {
    pub fn near_singular(&self) -> bool {
        self.a_rank_deficiency > 0
    }
}

impl BlockedOperator {
    /// Slices a matrix already expressed in the ε eigenbasis.
    pub fn from_frame(g: &CMatrix, n_plus: usize) -> Self {
        let n = g.nrows();
        assert_eq!(n, g.ncols(), "blocked operator must be square");
        assert!(n_plus <= n);
        let m = n - n_plus;
        Self {
            a: g.view((0, 0), (n_plus, n_plus)).into_owned(),
            b: g.view((0, n_plus), (n_plus, m)).into_owned(),
            c: g.view((n_plus, 0), (m, n_plus)).into_owned(),
            d: g.view((n_plus, n_plus), (m, m)).into_owned(),
        }
    }

    pub fn identity(n_plus: usize, n_minus: usize) -> Self {
        Self::from_frame(&CMatrix::identity(n_plus + n_minus, n_plus + n_minus), n_plus)
    }

    pub fn n_plus(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_minus(&self) -> usize {
        self.d.nrows()
    }

    pub fn dim(&self) -> usize {
        self.n_plus() + self.n_minus()
    }

    pub fn reassemble(&self) -> CMatrix {
        let (p, n) = (self.n_plus(), self.dim());
        let mut g = CMatrix::zeros(n, n);
        g.view_mut((0, 0), (p, p)).copy_from(&self.a);
        g.view_mut((0, p), (p, n - p)).copy_from(&self.b);
        g.view_mut((p, 0), (n - p, p)).copy_from(&self.c);
        g.view_mut((p, p), (n - p, n - p)).copy_from(&self.d);
        g
    }

    /// Blocks of `g·h`.
    pub fn compose(&self, h: &BlockedOperator) -> BlockedOperator {
        assert_eq!(self.n_plus(), h.n_plus(), "incompatible gradings");
        assert_eq!(self.n_minus(), h.n_minus(), "incompatible gradings");
        BlockedOperator {
            a: mul(&self.a, &h.a) + mul(&self.b, &h.c),
            b: mul(&self.a, &h.b) + mul(&self.b, &h.d),
            c: mul(&self.c, &h.a) + mul(&self.d, &h.c),
            d: mul(&self.c, &h.b) + mul(&self.d, &h.d),
        }
    }

    /// Blocks `(α, β, γ, δ)` of `g⁻¹ = g†`, valid for unitary `g`.
    pub fn unitary_inverse(&self) -> BlockedOperator {
        BlockedOperator { a: self.a.adjoint(), b: self.c.adjoint(), c: self.b.adjoint(), d: self.d.adjoint() }
    }

    pub fn diagnostics(&self) -> BlockDiagnostics {
        let sv = singular_values(&self.a);
        let a_min_singular = sv.iter().copied().fold(f64::INFINITY, f64::min);
        BlockDiagnostics {
            b_hs: frobenius(&self.b),
            c_hs: frobenius(&self.c),
            b_trace_norm: trace_norm(&self.b),
            c_trace_norm: trace_norm(&self.c),
            a_min_singular: if sv.is_empty() { 0.0 } else { a_min_singular },
            a_rank_deficiency: sv.iter().filter(|&&s| s <= SECTION_THRESHOLD).count(),
        }
    }

    /// Largest Frobenius residual of the block relations of `g†g = 1`:
    /// `a†a + c†c = 1`, `b†b + d†d = 1`, `a†b + c†d = 0`.
    pub fn unitarity_residuals(&self) -> [f64; 3] {
        use crate::linalg::mul_ad;
        let ip = CMatrix::identity(self.n_plus(), self.n_plus());
        let im = CMatrix::identity(self.n_minus(), self.n_minus());
        [
            frobenius(&(mul_ad(&self.a, &self.a) + mul_ad(&self.c, &self.c) - ip)),
            frobenius(&(mul_ad(&self.b, &self.b) + mul_ad(&self.d, &self.d) - im)),
            frobenius(&(mul_ad(&self.a, &self.b) + mul_ad(&self.c, &self.d))),
        ]
    }
}

/// Blocks of `g` (given in the original basis) in the grading's eigenbasis.
pub fn block_decompose(g: &CMatrix, grading: &Grading) -> BlockedOperator {
    BlockedOperator::from_frame(&grading.to_frame(g), grading.n_plus())
}

/// A representative `(g, q)` of a point of the central extension.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedOperator {
    pub g: BlockedOperator,
    pub q: CMatrix,
}

impl ExtendedOperator {
    pub fn new(g: BlockedOperator, q: CMatrix) -> Result<Self> {
        if q.nrows() != g.n_plus() || q.ncols() != g.n_plus() {
            return Err(LabError::DimensionMismatch { expected: g.n_plus(), found: q.nrows() });
        }
        if log_det(&q).singular {
            return Err(LabError::InvalidParameter("q must be invertible".into()));
        }
        Ok(Self { g, q })
    }

    pub fn unit(n_plus: usize, n_minus: usize) -> Self {
        Self { g: BlockedOperator::identity(n_plus, n_minus), q: CMatrix::identity(n_plus, n_plus) }
    }

    /// Trace norm of `a − q`; finite automatically at finite dimension.
    pub fn defect_trace_norm(&self) -> f64 {
        trace_norm(&(&self.g.a - &self.q))
    }

    /// Same class test: `g = g'` and `det(q'q⁻¹) = 1`, both to `tol`.
    pub fn equivalent(&self, other: &ExtendedOperator, tol: f64) -> bool {
        if frobenius(&(self.g.reassemble() - other.g.reassemble())) > tol {
            return false;
        }
        let ratio = (log_det(&other.q).log() - log_det(&self.q).log()).exp();
        (ratio - C64::new(1.0, 0.0)).norm() <= tol
    }

    /// Multiplies `q` by a scalar phase-and-scale factor.
    pub fn scale_q(&self, factor: C64) -> Self {
        Self { g: self.g.clone(), q: &self.q * factor }
    }
}

/// `(g, q)·(g', q') = (gg', qq')`.
pub fn ext_multiply(x: &ExtendedOperator, y: &ExtendedOperator) -> ExtendedOperator {
    ExtendedOperator { g: x.g.compose(&y.g), q: mul(&x.q, &y.q) }
}

/// `g ↦ (g, a)`, defined where `a` is invertible.
pub fn local_section(g: &BlockedOperator) -> Result<ExtendedOperator> {
    let sigma_min = g.diagnostics().a_min_singular;
    if !(sigma_min > SECTION_THRESHOLD) {
        return Err(LabError::OutsideSection { sigma_min });
    }
    Ok(ExtendedOperator { g: g.clone(), q: g.a.clone() })
}

/// `log det(a q⁻¹)`; `None` when `a` is singular.
pub fn log_vacuum_expectation(x: &ExtendedOperator) -> Option<C64> {
    let la: LogDet = log_det(&x.g.a);
    if la.singular {
        return None;
    }
    Some(la.log() - log_det(&x.q).log())
}

/// `⟨0|(g, q)|0⟩ = det(a q⁻¹)`.
pub fn vacuum_expectation(x: &ExtendedOperator) -> C64 {
    log_vacuum_expectation(x).map(|l| l.exp()).unwrap_or(ZERO)
}

/// `det(a_g a_h a_{gh}⁻¹)`: the comparison of `s(g)s(h)` with `s(gh)` for the
/// local section `s`.
pub fn section_cocycle(g: &BlockedOperator, h: &BlockedOperator) -> Result<C64> {
    let gh = g.compose(h);
    let x = ext_multiply(&local_section(g)?, &local_section(h)?);
    let y = local_section(&gh)?;
    Ok((log_det(&x.q).log() - log_det(&y.q).log()).exp())
}
