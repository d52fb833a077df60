//! Dyson series of the interaction-picture evolution and the second-order
//! coefficient of `log Z`.
//!
//! Time-ordered integrals over the simplex `t > s₁ > … > sₙ` are evaluated by
//! repeated indefinite integration on composite Gauss–Legendre panels: with
//! `F₀ = 1` and `F_k(t) = −i∫ V(s) F_{k−1}(s) ds`, the term of order `n` is
//! `F_n(t)`. The spectral integration matrix of each panel gives `F_k` at the
//! nodes to the full order of the rule, so no ordering mask is needed.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::evolve::FrameHamiltonian;
use crate::linalg::{frobenius, mul, real, trace_of_product, CMatrix, C64, I, ZERO};
use crate::model::{DiracModel, GaugePotential};
use crate::par;
use crate::quadrature::{gauss_legendre, integration_matrix, log_log_fit};

/// Matrix-valued function of time vanishing outside [`support`](Self::support).
pub trait TimeDependentOperator: Sync {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> CMatrix;
    fn support(&self) -> (f64, f64);
}

/// `V_I(t)` of a model and potential, in the grading frame.
#[derive(Debug, Clone)]
pub struct InteractionPotential {
    ham: Arc<FrameHamiltonian>,
    n_plus: usize,
}

impl InteractionPotential {
    pub fn new(model: &DiracModel, pot: &GaugePotential) -> Result<Self> {
        Ok(Self { ham: Arc::new(FrameHamiltonian::new(model, pot)?), n_plus: model.grading().n_plus() })
    }

    pub fn n_plus(&self) -> usize {
        self.n_plus
    }
}

impl TimeDependentOperator for InteractionPotential {
    fn dim(&self) -> usize {
        self.ham.dim()
    }

    fn at(&self, t: f64) -> CMatrix {
        self.ham.interaction_potential(t)
    }

    fn support(&self) -> (f64, f64) {
        (self.ham.envelope.onset, self.ham.envelope.end())
    }
}

/// A fixed matrix switched on over `[t0, t1]`.
#[derive(Debug, Clone)]
pub struct ConstantOperator {
    pub matrix: CMatrix,
    pub t0: f64,
    pub t1: f64,
}

impl TimeDependentOperator for ConstantOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn at(&self, t: f64) -> CMatrix {
        if t < self.t0 || t > self.t1 {
            CMatrix::zeros(self.dim(), self.dim())
        } else {
            self.matrix.clone()
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DysonOptions {
    /// Gauss–Legendre nodes per panel.
    pub nodes: usize,
    pub panels: usize,
    pub rel_tol: f64,
    pub max_doublings: usize,
}

impl Default for DysonOptions {
    fn default() -> Self {
        Self { nodes: 10, panels: 4, rel_tol: 1e-7, max_doublings: 6 }
    }
}

/// Composite Gauss–Legendre layout on `[a, b]`.
struct Panels {
    starts: Vec<f64>,
    half_width: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spectral: Vec<Vec<f64>>,
}

impl Panels {
    fn new(a: f64, b: f64, panels: usize, nodes: usize) -> Self {
        let (x, w) = gauss_legendre(nodes);
        let spectral = integration_matrix(&x, &w);
        let width = (b - a) / panels as f64;
        Self {
            starts: (0..panels).map(|j| a + j as f64 * width).collect(),
            half_width: 0.5 * width,
            nodes: x,
            weights: w,
            spectral,
        }
    }

    fn times(&self) -> Vec<f64> {
        self.starts.iter().flat_map(|&a| self.nodes.iter().map(move |&x| a + self.half_width * (1.0 + x))).collect()
    }

    /// Running integral of `f` sampled at the nodes: values at every node and
    /// the total.
    fn cumulative(&self, f: &[CMatrix]) -> (Vec<CMatrix>, CMatrix) {
        let q = self.nodes.len();
        let (r, c) = f[0].shape();
        let mut acc = CMatrix::zeros(r, c);
        let mut out = Vec::with_capacity(f.len());
        for p in 0..self.starts.len() {
            let block = &f[p * q..(p + 1) * q];
            for i in 0..q {
                let mut v = acc.clone();
                for (j, fj) in block.iter().enumerate() {
                    v += fj * real(self.half_width * self.spectral[i][j]);
                }
                out.push(v);
            }
            for (j, fj) in block.iter().enumerate() {
                acc += fj * real(self.half_width * self.weights[j]);
            }
        }
        (out, acc)
    }
}

/// Terms `0..=order` of the Dyson series at a fixed time.
#[derive(Debug, Clone)]
pub struct DysonSeries {
    pub t: f64,
    pub terms: Vec<CMatrix>,
    pub panels: usize,
    /// Largest relative change of any term at the last doubling.
    pub change: f64,
}

impl DysonSeries {
    pub fn partial_sum(&self, order: usize) -> CMatrix {
        self.terms[..=order].iter().fold(CMatrix::zeros(self.terms[0].nrows(), self.terms[0].ncols()), |a, t| a + t)
    }
}

fn terms_on(v: &dyn TimeDependentOperator, order: usize, a: f64, b: f64, panels: usize, nodes: usize) -> Vec<CMatrix> {
    let dim = v.dim();
    let layout = Panels::new(a, b, panels, nodes);
    let times = layout.times();
    let potentials = par::map(&times, |&t| v.at(t));
    let mut terms = vec![CMatrix::identity(dim, dim)];
    let mut at_nodes: Vec<CMatrix> = vec![CMatrix::identity(dim, dim); times.len()];
    for _ in 0..order {
        let integrand = par::map_range(times.len(), |i| mul(&potentials[i], &at_nodes[i]) * (-I));
        let (next, total) = layout.cumulative(&integrand);
        at_nodes = next;
        terms.push(total);
    }
    terms
}

fn relative_change(new: &CMatrix, old: &CMatrix) -> f64 {
    let scale = frobenius(new);
    let diff = frobenius(&(new - old));
    if scale == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / scale
    }
}

/// All terms up to `order` of `T exp(−i∫V)` evaluated at `t`.
pub fn dyson_series(v: &dyn TimeDependentOperator, order: usize, t: f64, opts: &DysonOptions) -> Result<DysonSeries> {
    if order == 0 || order > 3 {
        return Err(LabError::InvalidParameter(format!("Dyson order must be 1, 2 or 3, got {order}")));
    }
    let dim = v.dim();
    let (s0, s1) = v.support();
    let b = t.min(s1);
    if b <= s0 {
        let mut terms = vec![CMatrix::identity(dim, dim)];
        terms.extend((0..order).map(|_| CMatrix::zeros(dim, dim)));
        return Ok(DysonSeries { t, terms, panels: 0, change: 0.0 });
    }
    let mut panels = opts.panels;
    let mut old = terms_on(v, order, s0, b, panels, opts.nodes);
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_doublings {
        panels *= 2;
        let new = terms_on(v, order, s0, b, panels, opts.nodes);
        change = new.iter().zip(&old).skip(1).map(|(n, o)| relative_change(n, o)).fold(0.0, f64::max);
        if change < opts.rel_tol {
            return Ok(DysonSeries { t, terms: new, panels, change });
        }
        old = new;
    }
    Err(LabError::QuadratureNotConverged { doublings: opts.max_doublings, change })
}

/// `(−i)ⁿ ∫_{t>s₁>…>sₙ} V(s₁)…V(sₙ)`.
pub fn dyson_term(v: &dyn TimeDependentOperator, n: usize, t: f64) -> Result<CMatrix> {
    Ok(dyson_series(v, n, t, &DysonOptions::default())?.terms.swap_remove(n))
}

fn second_order_on(v: &dyn TimeDependentOperator, n_plus: usize, a: f64, b: f64, panels: usize, nodes: usize) -> C64 {
    let dim = v.dim();
    let n_minus = dim - n_plus;
    let layout = Panels::new(a, b, panels, nodes);
    let times = layout.times();
    let blocks = par::map(&times, |&t| {
        let m = v.at(t);
        (m.view((0, n_plus), (n_plus, n_minus)).into_owned(), m.view((n_plus, 0), (n_minus, n_plus)).into_owned())
    });
    let lower: Vec<CMatrix> = blocks.iter().map(|b| b.1.clone()).collect();
    let (running, _) = layout.cumulative(&lower);
    let q = layout.nodes.len();
    let mut total = ZERO;
    for (i, (upper, _)) in blocks.iter().enumerate() {
        total += trace_of_product(upper, &running[i]) * layout.half_width * layout.weights[i % q];
    }
    total
}

/// `D₂ = ∫∫_{s>t} tr[P₊V(s)P₋V(t)P₊] dt ds`.
pub fn second_order_log_z(v: &dyn TimeDependentOperator, n_plus: usize, opts: &DysonOptions) -> Result<C64> {
    let (a, b) = v.support();
    if b <= a {
        return Ok(ZERO);
    }
    let mut panels = opts.panels;
    let mut old = second_order_on(v, n_plus, a, b, panels, opts.nodes);
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_doublings {
        panels *= 2;
        let new = second_order_on(v, n_plus, a, b, panels, opts.nodes);
        let scale = new.norm();
        change = if scale == 0.0 { (new - old).norm() } else { (new - old).norm() / scale };
        if change < opts.rel_tol {
            return Ok(new);
        }
        old = new;
    }
    Err(LabError::QuadratureNotConverged { doublings: opts.max_doublings, change })
}

/// Coefficient of `λ¹` in `log Z`: `tr(P₊D₁P₊) + i∫tr P₊VP₊`. The two pieces
/// come from different quadratures.
pub fn first_order_log_z(v: &dyn TimeDependentOperator, n_plus: usize, opts: &DysonOptions) -> Result<C64> {
    let (a, b) = v.support();
    let d1 = dyson_series(v, 1, b, opts)?.terms.swap_remove(1);
    let block_trace = d1.view((0, 0), (n_plus, n_plus)).trace();
    let layout = Panels::new(a, b, 2 * opts.panels, opts.nodes + 2);
    let direct: C64 = layout
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let w = layout.half_width * layout.weights[i % layout.nodes.len()];
            v.at(t).view((0, 0), (n_plus, n_plus)).trace() * w
        })
        .sum();
    Ok(block_trace + I * direct)
}

/// Result of a log–log least-squares fit `|value| ≈ coefficient·λ^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub exponent: f64,
    pub coefficient: f64,
}

/// Fits `log|value|` against `log λ`. Values below `1e−14` carry no scaling
/// information; when all of them are that small the exponent is `+∞`.
pub fn scaling_fit(samples: &[(f64, f64)]) -> Result<ScalingFit> {
    if samples.len() < 4 {
        return Err(LabError::InvalidParameter(format!("scaling fit needs ≥ 4 samples, got {}", samples.len())));
    }
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    if xs.iter().any(|&x| !(x > 0.0)) {
        return Err(LabError::InvalidParameter("scaling fit needs λ > 0".into()));
    }
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(LabError::InvalidParameter("scaling fit needs distinct λ".into()));
    }
    let usable: Vec<(f64, f64)> = samples.iter().map(|&(x, y)| (x, y.abs())).filter(|p| p.1 >= 1e-14).collect();
    if usable.is_empty() {
        return Ok(ScalingFit { exponent: f64::INFINITY, coefficient: 0.0 });
    }
    if usable.len() < 2 {
        return Err(LabError::InvalidParameter("scaling fit: fewer than two values above 1e−14".into()));
    }
    let (slope, intercept) = log_log_fit(&usable);
    Ok(ScalingFit { exponent: slope, coefficient: intercept.exp() })
}
