//! One-dimensional polyhomogeneous symbols on a momentum lattice: the
//! zeta-regularized trace, the residue, symbol composition and the trace
//! anomaly of a commutator.
//!
//! A classical symbol of order `m` is `Σ_j c_j^± |p|^{m−j}` (the sign picks the
//! branch `p > 0` or `p < 0`) plus a remainder decaying faster than the last
//! stored power. Homogeneous components are summed over the infinite lattice
//! in closed form; the remainder is summed over the momenta of the grid.
//! Homogeneous components are taken to vanish at `p = 0`.
//!
//! The weight is `Q = (p² + μ²)^{1/2}`, of order `q = 1`.

pub mod special;

use std::fmt;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::linalg::{real, CMatrix, C64, ZERO};
use crate::model::{Boundary, DiracModel, MomentumGrid, SPINOR_DIM};
use crate::par;
use crate::quadrature::richardson;
use special::{binomial, digamma, hurwitz_zeta};

/// Largest number of stored homogeneous components.
pub const MAX_COMPONENTS: usize = 9;

type RemainderFn = dyn Fn(f64) -> C64 + Send + Sync;

/// Non-homogeneous tail of a symbol.
#[derive(Clone)]
pub enum Remainder {
    Zero,
    /// `amp·exp(−p²/width²)`.
    Gaussian {
        amp: C64,
        width: f64,
    },
    /// `amp·(p² + scale²)^{−power/2}`.
    Rational {
        amp: C64,
        scale: f64,
        power: f64,
    },
    Custom(Arc<RemainderFn>),
}

impl fmt::Debug for Remainder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Remainder::Zero => f.write_str("Zero"),
            Remainder::Gaussian { amp, width } => write!(f, "Gaussian({amp}, {width})"),
            Remainder::Rational { amp, scale, power } => write!(f, "Rational({amp}, {scale}, {power})"),
            Remainder::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Remainder {
    pub fn custom<F: Fn(f64) -> C64 + Send + Sync + 'static>(f: F) -> Self {
        Remainder::Custom(Arc::new(f))
    }

    pub fn eval(&self, p: f64) -> C64 {
        match self {
            Remainder::Zero => ZERO,
            Remainder::Gaussian { amp, width } => amp * (-(p / width).powi(2)).exp(),
            Remainder::Rational { amp, scale, power } => amp * (p * p + scale * scale).powf(-0.5 * power),
            Remainder::Custom(f) => f(p),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Remainder::Zero)
    }

    fn combine(&self, alpha: C64, other: &Remainder, beta: C64) -> Remainder {
        match (self, other) {
            (Remainder::Zero, Remainder::Zero) => Remainder::Zero,
            _ => {
                let (a, b) = (self.clone(), other.clone());
                Remainder::custom(move |p| alpha * a.eval(p) + beta * b.eval(p))
            }
        }
    }
}

/// Classical symbol `Σ_{j≤J} c_j^± |p|^{m−j} + r(p)` on a grid.
#[derive(Debug, Clone)]
pub struct ClassicalSymbol {
    order: i32,
    components: Vec<(C64, C64)>,
    remainder: Remainder,
    grid: MomentumGrid,
}

impl ClassicalSymbol {
    /// Validates the component count and the remainder decay
    /// `|r(p)|·|p|^{J+1−m}` over the outer half of the grid.
    pub fn new(order: i32, components: Vec<(C64, C64)>, remainder: Remainder, grid: MomentumGrid) -> Result<Self> {
        if components.len() > MAX_COMPONENTS {
            return Err(LabError::InvalidParameter(format!(
                "at most {MAX_COMPONENTS} homogeneous components, got {}",
                components.len()
            )));
        }
        let sym = Self { order, components, remainder, grid };
        if !sym.remainder.is_zero() {
            let (inner, outer) = sym.tail_profile();
            if outer > 2.0 * inner + 1e-12 {
                return Err(LabError::InvalidParameter(format!(
                    "remainder does not decay faster than |p|^{}: weighted tail grows from {inner:.3e} to {outer:.3e}",
                    sym.order - sym.components.len() as i32
                )));
            }
        }
        Ok(sym)
    }

    pub fn pure(order: i32, components: Vec<(C64, C64)>, grid: MomentumGrid) -> Result<Self> {
        Self::new(order, components, Remainder::Zero, grid)
    }

    /// `|p|^order` on both branches.
    pub fn power(order: i32, grid: MomentumGrid) -> Self {
        Self { order, components: vec![(real(1.0), real(1.0))], remainder: Remainder::Zero, grid }
    }

    pub fn zero(grid: MomentumGrid) -> Self {
        Self { order: 0, components: Vec::new(), remainder: Remainder::Zero, grid }
    }

    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn components(&self) -> &[(C64, C64)] {
        &self.components
    }

    pub fn remainder(&self) -> &Remainder {
        &self.remainder
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    /// Sup of `|r(p)|·|p|^{J+1−m}` over the third and the fourth quarter of
    /// the positive and negative momenta.
    fn tail_profile(&self) -> (f64, f64) {
        let weight = (self.components.len() as i32 - self.order) as f64;
        let pmax = self.grid.momenta().iter().fold(0.0f64, |a, p| a.max(p.abs()));
        let mut inner = 0.0f64;
        let mut outer = 0.0f64;
        for p in self.grid.momenta() {
            let x = p.abs();
            if x < 0.5 * pmax {
                continue;
            }
            let w = self.remainder.eval(p).norm() * x.powf(weight);
            if x < 0.75 * pmax {
                inner = inner.max(w);
            } else {
                outer = outer.max(w);
            }
        }
        (inner, outer)
    }

    /// Bound on `|r(p)|·|p|^{J+1−m}` over the outer half of the grid.
    pub fn remainder_tail_bound(&self) -> f64 {
        let (a, b) = self.tail_profile();
        a.max(b)
    }

    /// Homogeneous part at `p ≠ 0`; zero at `p = 0`.
    pub fn homogeneous(&self, p: f64) -> C64 {
        if p == 0.0 {
            return ZERO;
        }
        let x = p.abs();
        self.components
            .iter()
            .enumerate()
            .map(|(j, &(cp, cm))| (if p > 0.0 { cp } else { cm }) * x.powi(self.order - j as i32))
            .sum()
    }

    pub fn value(&self, p: f64) -> C64 {
        self.homogeneous(p) + self.remainder.eval(p)
    }

    /// Symbol values on the grid momenta.
    pub fn lattice_values(&self) -> Vec<C64> {
        self.grid.momenta().into_iter().map(|p| self.value(p)).collect()
    }

    /// Momentum-diagonal matrix of the symbol on the grid.
    pub fn lattice_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.lattice_values()))
    }

    /// Plain sum of the lattice values.
    pub fn plain_sum(&self) -> C64 {
        self.lattice_values().into_iter().sum()
    }

    pub fn scale(&self, alpha: C64) -> Self {
        let components = self.components.iter().map(|&(a, b)| (a * alpha, b * alpha)).collect();
        let remainder = self.remainder.combine(alpha, &Remainder::Zero, ZERO);
        Self { components, remainder, ..self.clone() }
    }

    /// `α·self + β·other`, components aligned by homogeneity degree.
    pub fn linear_combination(&self, alpha: C64, other: &ClassicalSymbol, beta: C64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(LabError::InvalidParameter("symbols live on different grids".into()));
        }
        let order = self.order.max(other.order);
        let shift_a = (order - self.order) as usize;
        let shift_b = (order - other.order) as usize;
        let len = (self.components.len() + shift_a).max(other.components.len() + shift_b);
        let mut components = vec![(ZERO, ZERO); len];
        for (j, &(p, m)) in self.components.iter().enumerate() {
            components[j + shift_a].0 += alpha * p;
            components[j + shift_a].1 += alpha * m;
        }
        for (j, &(p, m)) in other.components.iter().enumerate() {
            components[j + shift_b].0 += beta * p;
            components[j + shift_b].1 += beta * m;
        }
        components.truncate(MAX_COMPONENTS);
        let remainder = self.remainder.combine(alpha, &other.remainder, beta);
        Ok(Self { order, components, remainder, grid: self.grid.clone() })
    }

    fn expansion(&self) -> Expansion {
        Expansion { order: self.order, components: self.components.clone() }
    }
}

/// Homogeneous expansion without remainder, used by the composition rule.
#[derive(Debug, Clone, PartialEq)]
struct Expansion {
    order: i32,
    components: Vec<(C64, C64)>,
}

impl Expansion {
    fn zero(order: i32, len: usize) -> Self {
        Self { order, components: vec![(ZERO, ZERO); len] }
    }

    /// `∂_p^α`: `|p|^r ↦ r(r−1)…(r−α+1)|p|^{r−α}`, with an extra `(−1)^α` on
    /// the negative branch.
    fn derivative(&self, alpha: usize) -> Self {
        let sign = if alpha % 2 == 0 { 1.0 } else { -1.0 };
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(j, &(cp, cm))| {
                let r = (self.order - j as i32) as f64;
                let falling = (0..alpha).fold(1.0, |acc, i| acc * (r - i as f64));
                (cp * falling, cm * falling * sign)
            })
            .collect();
        Self { order: self.order - alpha as i32, components }
    }

    fn times(&self, other: &Expansion, len: usize) -> Self {
        let mut out = Self::zero(self.order + other.order, len);
        for (i, &(ap, am)) in self.components.iter().enumerate() {
            for (l, &(bp, bm)) in other.components.iter().enumerate() {
                if i + l < len {
                    out.components[i + l].0 += ap * bp;
                    out.components[i + l].1 += am * bm;
                }
            }
        }
        out
    }

    /// Adds `factor·other`, where `other` has order `self.order − shift`.
    fn accumulate(&mut self, other: &Expansion, factor: C64) {
        let shift = (self.order - other.order) as usize;
        for (j, &(p, m)) in other.components.iter().enumerate() {
            if j + shift < self.components.len() {
                self.components[j + shift].0 += factor * p;
                self.components[j + shift].1 += factor * m;
            }
        }
    }

    fn into_symbol(self, grid: MomentumGrid) -> ClassicalSymbol {
        ClassicalSymbol { order: self.order, components: self.components, remainder: Remainder::Zero, grid }
    }
}

/// Single Fourier mode `e^{ikx}·s(p)`; acts as `|p⟩ ↦ s(p)|p + ρk⟩`.
#[derive(Debug, Clone)]
pub struct ModeSymbol {
    pub k: i64,
    pub symbol: ClassicalSymbol,
}

impl ModeSymbol {
    pub fn new(k: i64, symbol: ClassicalSymbol) -> Self {
        Self { k, symbol }
    }

    pub fn diagonal(symbol: ClassicalSymbol) -> Self {
        Self { k: 0, symbol }
    }

    pub fn order(&self) -> i32 {
        self.symbol.order
    }

    /// Matrix on the grid; transitions leaving the grid are dropped.
    pub fn lattice_matrix(&self) -> CMatrix {
        self.matrix_on(&self.symbol.grid)
    }

    fn matrix_on(&self, grid: &MomentumGrid) -> CMatrix {
        let n = grid.len();
        let mut m = CMatrix::zeros(n, n);
        for j in 0..n {
            if let Some(i) = grid.index_of(grid.label(j) + self.k) {
                m[(i, j)] = self.symbol.value(grid.momentum(j));
            }
        }
        m
    }
}

fn check_depth(s: &ClassicalSymbol, depth: usize, what: &str) -> Result<()> {
    if depth > 6 {
        return Err(LabError::InsufficientDepth(format!("composition depth {depth} exceeds 6")));
    }
    if s.components.len() <= depth && !s.remainder.is_zero() {
        return Err(LabError::InsufficientDepth(format!(
            "{what} stores {} homogeneous components but depth {depth} needs {}",
            s.components.len(),
            depth + 1
        )));
    }
    Ok(())
}

/// Symbol of `T·S` for two single-mode symbols:
/// `e^{i(k_T+k_S)x} Σ_{α≤depth} (ρk_S)^α/α! ∂_p^α t · s`, truncated below
/// degree `order(T) + order(S) − depth`.
pub fn compose_modes(t: &ModeSymbol, s: &ModeSymbol, depth: usize) -> Result<ModeSymbol> {
    check_depth(&t.symbol, depth, "left factor")?;
    check_depth(&s.symbol, depth, "right factor")?;
    if t.symbol.grid != s.symbol.grid {
        return Err(LabError::InvalidParameter("symbols live on different grids".into()));
    }
    let len = depth + 1;
    let shift = t.symbol.grid.spacing() * s.k as f64;
    let te = t.symbol.expansion();
    let se = s.symbol.expansion();
    let mut out = Expansion::zero(t.order() + s.order(), len);
    let mut coeff = 1.0;
    for alpha in 0..=depth {
        if alpha > 0 {
            coeff *= shift / alpha as f64;
        }
        if coeff == 0.0 {
            break;
        }
        out.accumulate(&te.derivative(alpha).times(&se, len), real(coeff));
    }
    Ok(ModeSymbol { k: t.k + s.k, symbol: out.into_symbol(t.symbol.grid.clone()) })
}

/// Composition of a momentum-diagonal symbol with a single mode.
pub fn symbol_compose(t: &ClassicalSymbol, s: &ModeSymbol, depth: usize) -> Result<ModeSymbol> {
    compose_modes(&ModeSymbol::diagonal(t.clone()), s, depth)
}

/// `∂_p log Q = p/(p² + μ²) = sign(p) Σ_i (−μ²)^i |p|^{−1−2i}`.
pub fn log_weight_derivative(grid: &MomentumGrid, mu: f64, len: usize) -> ClassicalSymbol {
    let components = (0..len)
        .map(|j| {
            if j % 2 == 0 {
                let c = (-mu * mu).powi(j as i32 / 2);
                (real(c), real(-c))
            } else {
                (ZERO, ZERO)
            }
        })
        .collect();
    ClassicalSymbol { order: -1, components, remainder: Remainder::Zero, grid: grid.clone() }
}

/// Symbol of `[log Q, S] = Σ_{α≥1} (ρk)^α/α! ∂_p^α log Q · s`.
pub fn log_weight_commutator(s: &ModeSymbol, mu: f64, depth: usize) -> Result<ModeSymbol> {
    check_depth(&s.symbol, depth, "mode symbol")?;
    let grid = &s.symbol.grid;
    let len = depth + 1;
    let shift = grid.spacing() * s.k as f64;
    let dl = log_weight_derivative(grid, mu, len).expansion();
    let mut log_part = Expansion::zero(-1, len);
    let mut coeff = 1.0;
    for beta in 0..=depth {
        // (ρk)^{β+1}/(β+1)!
        coeff *= shift / (beta + 1) as f64;
        if coeff == 0.0 {
            break;
        }
        log_part.accumulate(&dl.derivative(beta), real(coeff));
    }
    let out = log_part.times(&s.symbol.expansion(), len);
    Ok(ModeSymbol { k: s.k, symbol: out.into_symbol(grid.clone()) })
}

/// Hurwitz offsets of the positive and negative branches: `p = ±ρ(n + a)`,
/// `n ≥ 0`.
fn branch_offset(grid: &MomentumGrid) -> f64 {
    match grid.boundary() {
        Boundary::Periodic => 1.0,
        Boundary::Antiperiodic => 0.5,
    }
}

/// Number of lattice points per branch summed directly before the binomial
/// expansion of `(p² + μ²)^{−z/2}` takes over.
fn inner_count(rho: f64, a: f64, mu: f64) -> usize {
    if mu == 0.0 {
        return 0;
    }
    let mut n = 0;
    while rho * (n as f64 + a) <= 2.0 * mu {
        n += 1;
    }
    n
}

const BINOMIAL_TERMS: usize = 48;

/// `Res T = (L/2π)(c⁺ + c⁻)` of the `|p|^{−1}` component.
pub fn wodzicki_residue(t: &ClassicalSymbol) -> C64 {
    let j = t.order + 1;
    if j < 0 || j as usize >= t.components.len() {
        return ZERO;
    }
    let (cp, cm) = t.components[j as usize];
    (cp + cm) / t.grid.spacing()
}

fn check_summable(t: &ClassicalSymbol) -> Result<()> {
    if !t.remainder.is_zero() && t.components.len() as i32 <= t.order + 1 {
        return Err(LabError::InsufficientDepth(format!(
            "order {} symbol with {} stored components leaves a non-summable remainder",
            t.order,
            t.components.len()
        )));
    }
    Ok(())
}

fn check_weight(mu: f64) -> Result<()> {
    if !(mu >= 0.0) {
        return Err(LabError::InvalidParameter(format!("weight mass must be ≥ 0, got {mu}")));
    }
    Ok(())
}

/// Whether `p` enters the sums: the zero mode is dropped when `μ = 0`.
fn counted(p: f64, mu: f64) -> bool {
    !(p == 0.0 && mu == 0.0)
}

/// `f(z) = Σ_p σ(p)(p² + μ²)^{−z/2}` at real `z ≠ 0`, continued analytically
/// for the homogeneous components.
pub fn zeta_function(t: &ClassicalSymbol, mu: f64, z: f64) -> Result<C64> {
    check_weight(mu)?;
    check_summable(t)?;
    let rho = t.grid.spacing();
    let a = branch_offset(&t.grid);
    let n0 = inner_count(rho, a, mu);
    let weight = |p: f64| (p * p + mu * mu).powf(-0.5 * z);
    let mut total = ZERO;
    for (j, &(cp, cm)) in t.components.iter().enumerate() {
        let s = (j as i32 - t.order) as f64;
        let c = cp + cm;
        for n in 0..n0 {
            let x = rho * (n as f64 + a);
            total += c * x.powf(-s) * weight(x);
        }
        let mut tail = 0.0;
        for k in 0..BINOMIAL_TERMS {
            let b = binomial(-0.5 * z, k);
            if b == 0.0 {
                break;
            }
            tail += b
                * mu.powi(2 * k as i32)
                * rho.powf(-s - z - 2.0 * k as f64)
                * hurwitz_zeta(s + z + 2.0 * k as f64, a + n0 as f64);
            if mu == 0.0 {
                break;
            }
        }
        total += c * tail;
    }
    for p in t.grid.momenta() {
        if counted(p, mu) {
            total += t.remainder.eval(p) * weight(p);
        }
    }
    Ok(total)
}

/// `tr_Q T = lim_{z→0} (f(z) − Res T/z)` with `Q = (p² + μ²)^{1/2}`.
pub fn zeta_trace(t: &ClassicalSymbol, mu: f64) -> Result<C64> {
    check_weight(mu)?;
    check_summable(t)?;
    let rho = t.grid.spacing();
    let a = branch_offset(&t.grid);
    let n0 = inner_count(rho, a, mu);
    let start = a + n0 as f64;
    let mut total = ZERO;
    for (j, &(cp, cm)) in t.components.iter().enumerate() {
        let s = j as i32 - t.order;
        let c = cp + cm;
        if c == ZERO {
            continue;
        }
        for n in 0..n0 {
            total += c * (rho * (n as f64 + a)).powi(-s);
        }
        if s == 1 {
            total += c / rho * (-rho.ln() - digamma(start));
        } else {
            total += c * rho.powi(-s) * hurwitz_zeta(s as f64, start);
        }
        // binom(−z/2, k)·ζ(1 + z + …) leaves a finite part when s + 2k = 1
        if mu > 0.0 && s < 1 && (1 - s) % 2 == 0 {
            let k = ((1 - s) / 2) as usize;
            let d = -0.5 * if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            total += c * mu.powi(2 * k as i32) / rho * d;
        }
    }
    for p in t.grid.momenta() {
        if counted(p, mu) {
            total += t.remainder.eval(p);
        }
    }
    Ok(total)
}

/// `2(L/2π)(γ + ln(L/2π))`: the regularized trace of `|p|^{−1}` on a
/// periodic lattice without the zero mode.
pub fn inverse_momentum_trace(circumference: f64) -> f64 {
    let r = circumference / (2.0 * std::f64::consts::PI);
    2.0 * r * (special::EULER_GAMMA + r.ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyOptions {
    pub cutoffs: [usize; 4],
    /// Accepted Richardson error estimate of the left side.
    pub tol: f64,
    pub depth: usize,
}

impl Default for AnomalyOptions {
    fn default() -> Self {
        Self { cutoffs: [64, 128, 256, 512], tol: 1e-6, depth: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyCheck {
    /// Regularized trace of `[T, S]`, extrapolated in the cutoff.
    pub lhs: C64,
    /// `(1/q)·Res(T[log Q, S])`.
    pub rhs: C64,
    pub defect: f64,
    /// Richardson error estimate of `lhs`.
    pub lhs_error: f64,
    /// Partial traces at each cutoff.
    pub ladder: Vec<(usize, C64)>,
}

/// Trace of the momentum-diagonal part of `[T, S]` over `|n| ≤ cutoff`, with
/// both operators realized as dense matrices on a grid wide enough that no
/// intermediate momentum is cut.
pub fn commutator_trace(t: &ModeSymbol, s: &ModeSymbol, cutoff: usize) -> Result<C64> {
    let grid = &t.symbol.grid;
    if t.k + s.k != 0 {
        return Ok(ZERO);
    }
    let pad = t.k.unsigned_abs() as usize + s.k.unsigned_abs() as usize;
    let wide = grid.with_cutoff(cutoff + pad)?;
    let inner = grid.with_cutoff(cutoff)?;
    let tm = t.matrix_on(&wide);
    let sm = s.matrix_on(&wide);
    let mut total = ZERO;
    for n in 0..inner.len() {
        let i = wide.index_of(inner.label(n)).expect("inner grid inside wide grid");
        let ts: C64 = (0..wide.len()).map(|m| tm[(i, m)] * sm[(m, i)]).sum();
        let st: C64 = (0..wide.len()).map(|m| sm[(i, m)] * tm[(m, i)]).sum();
        total += ts - st;
    }
    Ok(total)
}

/// Checks `tr_Q[T, S] = (1/q)·Res(T[log Q, S])`.
pub fn trace_anomaly_check(t: &ModeSymbol, s: &ModeSymbol, mu: f64, opts: &AnomalyOptions) -> Result<AnomalyCheck> {
    if t.symbol.grid != s.symbol.grid {
        return Err(LabError::InvalidParameter("symbols live on different grids".into()));
    }
    check_weight(mu)?;
    if t.order() + s.order() > 0 {
        return Err(LabError::InvalidParameter(format!(
            "[T, S] has order {} ≥ 0; its regularized trace needs order ≤ −1",
            t.order() + s.order() - 1
        )));
    }
    let ladder: Vec<(usize, C64)> =
        par::map(&opts.cutoffs, |&n| commutator_trace(t, s, n).map(|v| (n, v))).into_iter().collect::<Result<_>>()?;
    let values: Vec<C64> = ladder.iter().map(|v| v.1).collect();
    let (lhs, lhs_error) = richardson(&values, 2.0, &[1.0, 2.0, 3.0]);
    if !(lhs_error <= opts.tol * lhs.norm().max(1.0)) {
        return Err(LabError::ExtrapolationNotConverged { change: lhs_error });
    }
    let comm = log_weight_commutator(s, mu, opts.depth)?;
    let product = compose_modes(t, &comm, opts.depth)?;
    let rhs = if product.k == 0 { wodzicki_residue(&product.symbol) } else { ZERO };
    Ok(AnomalyCheck { lhs, rhs, defect: (lhs - rhs).norm(), lhs_error, ladder })
}

/// `tr Y + tr_Q X` for an operator split as `e^{itD₀}Xe^{−itD₀} + Y`. The
/// conjugation drops out because `Q = |D₀|` commutes with `e^{itD₀}`. `X`
/// acts as `X ⊗ 1` on the spinor index; `Y` is a full matrix on the model
/// space.
pub fn weighted_trace_split(x: &ClassicalSymbol, y: &CMatrix, model: &DiracModel) -> Result<C64> {
    if x.grid != *model.grid() {
        return Err(LabError::InvalidParameter("symbol grid differs from the model grid".into()));
    }
    if y.nrows() != model.dim() || y.ncols() != model.dim() {
        return Err(LabError::DimensionMismatch { expected: model.dim(), found: y.nrows() });
    }
    if x.order > -1 && !x.components.is_empty() {
        return Err(LabError::InvalidParameter(format!("split symbol must have order ≤ −1, got {}", x.order)));
    }
    Ok(y.trace() + zeta_trace(x, model.mass())? * SPINOR_DIM as f64)
}

/// Lattice realization `X ⊗ 1` of a momentum-diagonal symbol on the model
/// space.
pub fn spinor_lattice_matrix(x: &ClassicalSymbol) -> CMatrix {
    let vals = x.lattice_values();
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len() * SPINOR_DIM,
        vals.iter().flat_map(|&v| std::iter::repeat_n(v, SPINOR_DIM)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use std::f64::consts::PI;

    fn periodic(n: usize) -> MomentumGrid {
        MomentumGrid::new(2.0 * PI, n, Boundary::Periodic).unwrap()
    }

    fn c(re: f64) -> C64 {
        real(re)
    }

    #[test]
    fn inverse_momentum_oracle() {
        for l in [2.0 * PI, 5.0, 13.0] {
            let grid = MomentumGrid::new(l, 16, Boundary::Periodic).unwrap();
            let t = ClassicalSymbol::power(-1, grid);
            let v = zeta_trace(&t, 0.0).unwrap();
            assert!((v.re - inverse_momentum_trace(l)).abs() < 1e-12, "L = {l}");
            assert!((wodzicki_residue(&t).re - 2.0 * l / (2.0 * PI)).abs() < 1e-12);
        }
        // harmonic numbers: Σ_{n≤M} 1/n − ln M → γ
        let m = 1_000_000usize;
        let h: f64 = (1..=m).map(|n| 1.0 / n as f64).sum();
        let gamma = h - (m as f64).ln() - 0.5 / m as f64 + 1.0 / (12.0 * (m as f64).powi(2));
        assert!((gamma - special::EULER_GAMMA).abs() < 1e-12);
    }

    #[test]
    fn order_minus_two_matches_closed_form_sum() {
        // Σ_n 1/(n² + 1) = π coth π, as |p|^{−2} − |p|^{−4} + |p|^{−6} + r
        let grid = periodic(24);
        let r = Remainder::custom(|p: f64| {
            let full = C64::new(1.0 / (p * p + 1.0), 0.0);
            if p == 0.0 {
                full
            } else {
                full - real(p.powi(-2) - p.powi(-4) + p.powi(-6))
            }
        });
        let comps = vec![(c(1.0), c(1.0)), (c(0.0), c(0.0)), (c(-1.0), c(-1.0)), (c(0.0), c(0.0)), (c(1.0), c(1.0))];
        let t = ClassicalSymbol::new(-2, comps, r, grid).unwrap();
        let v = zeta_trace(&t, 1.0).unwrap();
        let exact = PI / PI.tanh();
        assert!((v.re - exact).abs() < 1e-9, "{} vs {exact}", v.re);
        assert_eq!(wodzicki_residue(&t), ZERO);
        // pure remainder: plain grid sum
        let g =
            ClassicalSymbol::new(-3, vec![], Remainder::Rational { amp: c(1.0), scale: 1.0, power: 3.0 }, periodic(8))
                .unwrap();
        assert!((zeta_trace(&g, 1.0).unwrap() - g.plain_sum()).norm() < 1e-14);
    }

    #[test]
    fn finite_part_matches_numerical_limit() {
        let grid = MomentumGrid::new(3.0, 10, Boundary::Antiperiodic).unwrap();
        let comps = vec![(c(0.7), c(0.2)), (C64::new(0.1, 0.3), c(-0.4)), (c(0.5), c(0.5))];
        let t = ClassicalSymbol::new(-1, comps, Remainder::Gaussian { amp: c(0.3), width: 2.0 }, grid).unwrap();
        for mu in [0.0, 0.8, 2.5] {
            let res = wodzicki_residue(&t);
            let z = 1e-4;
            let fp = zeta_function(&t, mu, z).unwrap() - res / z;
            let fm = zeta_function(&t, mu, -z).unwrap() + res / z;
            let limit = (fp + fm) * 0.5;
            let v = zeta_trace(&t, mu).unwrap();
            assert!((limit - v).norm() < 1e-7, "μ = {mu}: {limit} vs {v}");
        }
        // a positive-order component feeds a μ-dependent finite part
        let t = ClassicalSymbol::pure(
            1,
            vec![(c(1.0), c(1.0))],
            MomentumGrid::new(2.0 * PI, 4, Boundary::Antiperiodic).unwrap(),
        )
        .unwrap();
        let z = 1e-4;
        let limit = (zeta_function(&t, 1.5, z).unwrap() + zeta_function(&t, 1.5, -z).unwrap()) * 0.5;
        assert!((limit - zeta_trace(&t, 1.5).unwrap()).norm() < 1e-7);
    }

    #[test]
    fn residue_free_symbols_are_regular_at_zero() {
        let grid = periodic(12);
        let t = ClassicalSymbol::pure(-1, vec![(c(1.0), c(-1.0)), (c(0.3), c(0.3))], grid).unwrap();
        assert_eq!(wodzicki_residue(&t), ZERO);
        let f0 = zeta_trace(&t, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for z in [1e-2, 1e-3, 1e-4] {
            let d = (zeta_function(&t, 1.0, z).unwrap() - f0).norm();
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn pure_powers_are_cutoff_independent() {
        let t8 = ClassicalSymbol::pure(-1, vec![(c(1.0), c(0.5)), (c(0.2), c(0.1))], periodic(8)).unwrap();
        let t64 = ClassicalSymbol::pure(-1, vec![(c(1.0), c(0.5)), (c(0.2), c(0.1))], periodic(64)).unwrap();
        assert_eq!(zeta_trace(&t8, 0.7).unwrap(), zeta_trace(&t64, 0.7).unwrap());
    }

    #[test]
    fn residue_and_trace_are_linear() {
        let grid = periodic(10);
        let t = ClassicalSymbol::pure(-1, vec![(c(1.0), c(2.0)), (c(0.5), c(0.0))], grid.clone()).unwrap();
        let s = ClassicalSymbol::new(-2, vec![(c(0.3), c(0.1))], Remainder::Gaussian { amp: c(1.0), width: 1.0 }, grid)
            .unwrap();
        let (a, b) = (C64::new(0.3, -1.0), c(2.0));
        let comb = t.linear_combination(a, &s, b).unwrap();
        let lhs = wodzicki_residue(&comb);
        assert!((lhs - (wodzicki_residue(&t) * a + wodzicki_residue(&s) * b)).norm() < 1e-15);
        let z = zeta_trace(&comb, 1.0).unwrap();
        let expect = zeta_trace(&t, 1.0).unwrap() * a + zeta_trace(&s, 1.0).unwrap() * b;
        assert!((z - expect).norm() < 1e-12);
        assert_eq!(zeta_trace(&ClassicalSymbol::zero(periodic(4)), 0.3).unwrap(), ZERO);
    }

    #[test]
    fn insufficient_depth_is_rejected() {
        let t = ClassicalSymbol::new(
            0,
            vec![(c(1.0), c(1.0))],
            Remainder::Gaussian { amp: c(1.0), width: 1.0 },
            periodic(8),
        )
        .unwrap();
        assert!(matches!(zeta_trace(&t, 1.0), Err(LabError::InsufficientDepth(_))));
        let bad = ClassicalSymbol::new(-1, vec![(c(1.0), c(1.0))], Remainder::custom(|p| real(p.abs())), periodic(16));
        assert!(bad.is_err());
    }

    #[test]
    fn composition_trivial_cases() {
        let grid = periodic(8);
        let t = ClassicalSymbol::pure(-1, vec![(c(1.0), c(2.0)), (c(0.3), c(0.4))], grid.clone()).unwrap();
        let one = ModeSymbol::diagonal(ClassicalSymbol::power(0, grid.clone()));
        let id = symbol_compose(&t, &one, 1).unwrap();
        assert_eq!(id.symbol.components(), t.components());
        let s0 = ModeSymbol::diagonal(ClassicalSymbol::pure(0, vec![(c(0.5), c(1.5))], grid).unwrap());
        let prod = symbol_compose(&t, &s0, 2).unwrap();
        for p in [1.0, -3.0, 5.0] {
            assert!((prod.symbol.value(p) - t.value(p) * s0.symbol.value(p)).norm() < 1e-15);
        }
    }

    #[test]
    fn composition_matches_matrix_product() {
        let mut errs = vec![];
        for n in [64, 128, 256] {
            let grid = periodic(n);
            let t =
                ClassicalSymbol::pure(-1, vec![(c(1.0), c(0.5)), (c(0.2), c(-0.3)), (c(0.1), c(0.1))], grid.clone())
                    .unwrap();
            let s = ModeSymbol::new(
                1,
                ClassicalSymbol::pure(0, vec![(c(1.0), c(2.0)), (c(0.4), c(0.0))], grid.clone()).unwrap(),
            );
            let prod = symbol_compose(&t, &s, 2).unwrap();
            let exact = ModeSymbol::diagonal(t.clone()).lattice_matrix() * s.lattice_matrix();
            let approx = prod.lattice_matrix();
            // top momentum quartile, away from the truncation edge
            let mut worst: f64 = 0.0;
            for j in 0..grid.len() {
                let p = grid.momentum(j);
                if p.abs() >= 0.75 * n as f64 && p.abs() < n as f64 - 1.0 {
                    if let Some(i) = grid.index_of(grid.label(j) + 1) {
                        worst = worst.max((exact[(i, j)] - approx[(i, j)]).norm());
                    }
                }
            }
            errs.push((n as f64, worst));
        }
        let (slope, _) = crate::quadrature::log_log_fit(&errs);
        assert!(slope <= -1.0 - 2.0 - 0.5, "errors {errs:?} slope {slope}");
    }

    #[test]
    fn anomaly_of_diagonal_family_is_zero_on_both_sides() {
        let grid = periodic(8);
        let t = ModeSymbol::diagonal(
            ClassicalSymbol::pure(-1, vec![(c(1.0), c(0.5)), (c(0.2), c(0.0))], grid.clone()).unwrap(),
        );
        let s = ModeSymbol::new(
            1,
            ClassicalSymbol::pure(0, vec![(c(1.0), c(-1.0)), (c(0.3), c(0.3))], grid.clone()).unwrap(),
        );
        let chk = trace_anomaly_check(&t, &s, 1.0, &AnomalyOptions::default()).unwrap();
        assert_eq!(chk.lhs, ZERO);
        assert_eq!(chk.rhs, ZERO);
        let s0 = ModeSymbol::diagonal(s.symbol.clone());
        let chk0 = trace_anomaly_check(&t, &s0, 1.0, &AnomalyOptions::default()).unwrap();
        assert!(chk0.lhs.norm() < 1e-14 && chk0.rhs == ZERO);
    }

    #[test]
    fn anomaly_of_mode_pair_matches_residue() {
        let grid = periodic(8);
        let t = ModeSymbol::new(
            -1,
            ClassicalSymbol::pure(0, vec![(c(1.0), c(0.4)), (c(0.3), c(-0.2)), (c(0.1), c(0.1))], grid.clone())
                .unwrap(),
        );
        let s = ModeSymbol::new(1, ClassicalSymbol::pure(0, vec![(c(0.7), c(1.3)), (c(-0.2), c(0.5))], grid).unwrap());
        let chk = trace_anomaly_check(&t, &s, 1.0, &AnomalyOptions::default()).unwrap();
        // telescoped boundary terms: k(t₀⁺s₀⁺ − t₀⁻s₀⁻)
        let expect = 1.0 * 0.7 - 0.4 * 1.3;
        assert!((chk.rhs.re - expect).abs() < 1e-14, "{:?}", chk.rhs);
        assert!(chk.defect < 1e-3, "{chk:?}");
        // swapping the factors flips the commutator
        let a = commutator_trace(&t, &s, 64).unwrap();
        let b = commutator_trace(&s, &t, 64).unwrap();
        assert!((a + b).norm() < 1e-10);
    }

    #[test]
    fn split_moves_trace_class_parts() {
        let grid = MomentumGrid::new(2.0 * PI, 6, Boundary::Periodic).unwrap();
        let model = DiracModel::new(grid.clone(), 1.0).unwrap();
        let x = ClassicalSymbol::pure(-1, vec![(c(1.0), c(0.5)), (c(0.2), c(0.1))], grid.clone()).unwrap();
        let y = CMatrix::from_fn(model.dim(), model.dim(), |i, j| C64::new((i * j) as f64 * 0.01, i as f64 * 0.02));
        let total = weighted_trace_split(&x, &y, &model).unwrap();
        assert!(
            (weighted_trace_split(&ClassicalSymbol::zero(grid.clone()), &y, &model).unwrap() - y.trace()).norm()
                < 1e-15
        );
        let delta =
            ClassicalSymbol::new(-2, vec![], Remainder::Gaussian { amp: c(0.4), width: 3.0 }, grid.clone()).unwrap();
        let x2 = x.linear_combination(c(1.0), &delta, c(-1.0)).unwrap();
        let y2 = &y + spinor_lattice_matrix(&delta);
        let total2 = weighted_trace_split(&x2, &y2, &model).unwrap();
        assert!((total - total2).norm() < 1e-12);
        let only = weighted_trace_split(&delta, &CMatrix::zeros(model.dim(), model.dim()), &model).unwrap();
        assert!((only - spinor_lattice_matrix(&delta).trace()).norm() < 1e-14);
        assert!(frobenius(&spinor_lattice_matrix(&delta)) > 0.0);
    }
}
