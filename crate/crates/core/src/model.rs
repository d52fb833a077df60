//! Truncated 1+1 dimensional Dirac model in a momentum (Fourier) basis.
//!
//! Basis index `2·j + s` labels momentum `p_j` and spinor component `s`.
//! Gamma matrices are fixed to `γ⁰ = σ₃`, `γ¹ = iσ₂`, so `α¹ = γ⁰γ¹ = σ₁` and
//! the free Hamiltonian block at momentum `p` is `σ₁·p − σ₃·m`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{hermiticity_residual, real, CMatrix, C64, ONE, ZERO};

pub const SPINOR_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Antiperiodic,
}

impl Boundary {
    /// Offset θ in `p_n = 2π(n + θ)/L`.
    pub fn offset(self) -> f64 {
        match self {
            Boundary::Periodic => 0.0,
            Boundary::Antiperiodic => 0.5,
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "periodic" => Ok(Boundary::Periodic),
            "antiperiodic" => Ok(Boundary::Antiperiodic),
            other => Err(LabError::InvalidParameter(format!("unknown boundary '{other}'"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Antiperiodic => "antiperiodic",
        })
    }
}

/// Momenta `2π(n + θ)/L` for `n` in a symmetric window around zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    circumference: f64,
    cutoff: usize,
    boundary: Boundary,
}

impl MomentumGrid {
    pub fn new(circumference: f64, cutoff: usize, boundary: Boundary) -> Result<Self> {
        if !(circumference > 0.0 && circumference.is_finite()) {
            return Err(LabError::InvalidParameter(format!("circumference must be positive, got {circumference}")));
        }
        if cutoff < 1 {
            return Err(LabError::InvalidParameter("cutoff N_max must be at least 1".into()));
        }
        Ok(Self { circumference, cutoff, boundary })
    }

    pub fn circumference(&self) -> f64 {
        self.circumference
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// `2π/L`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.circumference
    }

    /// Inclusive range of the integer labels `n`.
    pub fn mode_range(&self) -> (i64, i64) {
        let n = self.cutoff as i64;
        match self.boundary {
            Boundary::Periodic => (-n, n),
            Boundary::Antiperiodic => (-n - 1, n),
        }
    }

    pub fn len(&self) -> usize {
        let (lo, hi) = self.mode_range();
        (hi - lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Hilbert space dimension including the spinor index.
    pub fn dim(&self) -> usize {
        SPINOR_DIM * self.len()
    }

    pub fn label(&self, index: usize) -> i64 {
        self.mode_range().0 + index as i64
    }

    pub fn index_of(&self, label: i64) -> Option<usize> {
        let (lo, hi) = self.mode_range();
        (lo..=hi).contains(&label).then(|| (label - lo) as usize)
    }

    pub fn momentum_of_label(&self, label: i64) -> f64 {
        self.spacing() * (label as f64 + self.boundary.offset())
    }

    pub fn momentum(&self, index: usize) -> f64 {
        self.momentum_of_label(self.label(index))
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.momentum(i)).collect()
    }

    pub fn has_zero_momentum(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        Self::new(self.circumference, cutoff, self.boundary)
    }
}

/// Smooth switch-on/off profile `f(t)` with support `[onset, onset + duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub onset: f64,
    pub duration: f64,
}

impl Envelope {
    pub fn new(duration: f64) -> Self {
        Self { onset: 0.0, duration }
    }

    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }

    /// `exp(1 − T²/(4 s (T − s)))` with `s = t − onset`; maximum 1 at the midpoint.
    pub fn value(&self, t: f64) -> f64 {
        let s = t - self.onset;
        let big_t = self.duration;
        if s <= 0.0 || s >= big_t {
            return 0.0;
        }
        let x = 4.0 * s * (big_t - s) / (big_t * big_t);
        (1.0 - 1.0 / x).exp()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let s = t - self.onset;
        let big_t = self.duration;
        if s <= 0.0 || s >= big_t {
            return 0.0;
        }
        let q = s * (big_t - s);
        self.value(t) * big_t * big_t * (big_t - 2.0 * s) / (4.0 * q * q)
    }
}

/// Which Lorentz component a Fourier coefficient belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    A0,
    A1,
}

/// External U(1) potential `A_μ(t,x) = λ·f(t)·Σ_k a_{μ,k} e^{2πikx/L}`.
///
/// Coefficients are stored for every mode including negative ones; reality
/// of the field requires `a_{−k} = conj(a_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugePotential {
    pub coupling: f64,
    pub a0: BTreeMap<i64, C64>,
    pub a1: BTreeMap<i64, C64>,
    pub envelope: Envelope,
}

impl GaugePotential {
    pub fn zero(duration: f64) -> Self {
        Self { coupling: 0.0, a0: BTreeMap::new(), a1: BTreeMap::new(), envelope: Envelope::new(duration) }
    }

    pub fn new(coupling: f64, duration: f64) -> Self {
        Self { coupling, ..Self::zero(duration) }
    }

    /// Default field: `A₀ = 0.6 cos x + 0.25 cos 3x` (even), `A₁ = 0.4 sin 2x` (odd),
    /// in units where `x` runs over `[0, L)` with `L = 2π`.
    pub fn default_field(coupling: f64, duration: f64) -> Self {
        Self::new(coupling, duration)
            .with_mode(Component::A0, 1, C64::new(0.3, 0.0))
            .with_mode(Component::A0, 3, C64::new(0.125, 0.0))
            .with_mode(Component::A1, 2, C64::new(0.0, -0.2))
    }

    /// Sets `a_k` and its conjugate partner `a_{−k}`.
    pub fn with_mode(mut self, component: Component, k: i64, value: C64) -> Self {
        self.set_mode(component, k, value);
        self
    }

    pub fn set_mode(&mut self, component: Component, k: i64, value: C64) {
        let map = match component {
            Component::A0 => &mut self.a0,
            Component::A1 => &mut self.a1,
        };
        if k == 0 {
            map.insert(0, C64::new(value.re, 0.0));
        } else {
            map.insert(k, value);
            map.insert(-k, value.conj());
        }
    }

    pub fn with_coupling(&self, coupling: f64) -> Self {
        Self { coupling, ..self.clone() }
    }

    pub fn duration(&self) -> f64 {
        self.envelope.duration
    }

    pub fn max_mode(&self) -> i64 {
        self.a0.keys().chain(self.a1.keys()).map(|k| k.abs()).max().unwrap_or(0)
    }

    /// Largest violation of `a_{−k} = conj(a_k)`.
    pub fn reality_defect(&self) -> f64 {
        let check = |m: &BTreeMap<i64, C64>| {
            m.iter()
                .map(|(&k, &v)| {
                    let partner = m.get(&-k).copied().unwrap_or(ZERO);
                    (v - partner.conj()).norm()
                })
                .fold(0.0, f64::max)
        };
        check(&self.a0).max(check(&self.a1))
    }

    pub fn is_zero(&self) -> bool {
        self.coupling == 0.0 || self.a0.values().chain(self.a1.values()).all(|v| *v == ZERO)
    }

    /// Field value `(A₀, A₁)` at `(t, x)`.
    pub fn field_at(&self, t: f64, x: f64, circumference: f64) -> (f64, f64) {
        let f = self.coupling * self.envelope.value(t);
        let eval = |m: &BTreeMap<i64, C64>| -> C64 {
            m.iter().map(|(&k, &c)| c * C64::from_polar(1.0, 2.0 * PI * k as f64 * x / circumference)).sum()
        };
        (f * eval(&self.a0).re, f * eval(&self.a1).re)
    }

    /// True when `A₀` is even and `A₁` odd under `x → −x`.
    pub fn is_parity_even(&self) -> bool {
        let tol = 1e-14;
        let even = self.a0.iter().all(|(&k, &v)| (v - self.a0.get(&-k).copied().unwrap_or(ZERO)).norm() <= tol);
        let odd = self.a1.iter().all(|(&k, &v)| (v + self.a1.get(&-k).copied().unwrap_or(ZERO)).norm() <= tol);
        even && odd
    }
}

/// Dense Hermitean operator on the truncated Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        let residual = hermiticity_residual(&m);
        if residual > 1e-12 * m.nrows().max(1) as f64 {
            return Err(LabError::NotHermitian { residual });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

fn check_mass(grid: &MomentumGrid, mass: f64) -> Result<()> {
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(LabError::InvalidParameter(format!("mass must be ≥ 0, got {mass}")));
    }
    if mass == 0.0 && grid.has_zero_momentum() {
        return Err(LabError::ZeroMode);
    }
    Ok(())
}

/// `D₀`: block diagonal in momentum with blocks `σ₁·p − σ₃·m`.
pub fn build_free_hamiltonian(grid: &MomentumGrid, mass: f64) -> Result<HermitianOperator> {
    check_mass(grid, mass)?;
    let dim = grid.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for j in 0..grid.len() {
        let p = grid.momentum(j);
        let b = SPINOR_DIM * j;
        h[(b, b)] = real(-mass);
        h[(b + 1, b + 1)] = real(mass);
        h[(b, b + 1)] = real(p);
        h[(b + 1, b)] = real(p);
    }
    HermitianOperator::new(h)
}

fn check_modes(grid: &MomentumGrid, pot: &GaugePotential) -> Result<()> {
    let limit = 2 * grid.cutoff() as i64;
    let k = pot.max_mode();
    if k > limit {
        return Err(LabError::Aliasing { k, limit });
    }
    Ok(())
}

/// Spatial profile `V₀` with `V(t) = f(t)·V₀` and `V = α¹A₁ − A₀`.
pub fn potential_profile(grid: &MomentumGrid, pot: &GaugePotential) -> Result<HermitianOperator> {
    check_modes(grid, pot)?;
    let dim = grid.dim();
    let mut v = CMatrix::zeros(dim, dim);
    let lambda = pot.coupling;
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let k = grid.label(i) - grid.label(j);
            let a0 = pot.a0.get(&k).copied().unwrap_or(ZERO);
            let a1 = pot.a1.get(&k).copied().unwrap_or(ZERO);
            if a0 == ZERO && a1 == ZERO {
                continue;
            }
            let (bi, bj) = (SPINOR_DIM * i, SPINOR_DIM * j);
            v[(bi, bj)] = -a0 * lambda;
            v[(bi + 1, bj + 1)] = -a0 * lambda;
            v[(bi, bj + 1)] = a1 * lambda;
            v[(bi + 1, bj)] = a1 * lambda;
        }
    }
    HermitianOperator::new(v)
}

/// `V(t)`; identically zero outside the envelope support.
pub fn build_potential(grid: &MomentumGrid, pot: &GaugePotential, t: f64) -> Result<HermitianOperator> {
    let profile = potential_profile(grid, pot)?;
    let f = pot.envelope.value(t);
    HermitianOperator::new(profile.into_inner() * real(f))
}

/// Energy polarization: `ε = sign(D₀)` with the convention `sign(0) = +1`.
///
/// `basis` holds orthonormal eigenvectors of `D₀` as columns, the `n_plus`
/// positive-energy vectors first. Every blocked quantity in this crate is
/// expressed in that ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct Grading {
    basis: CMatrix,
    energies: Vec<f64>,
    n_plus: usize,
}

impl Grading {
    fn from_parts(basis: CMatrix, energies: Vec<f64>) -> Self {
        let n_plus = energies.iter().filter(|&&e| e >= 0.0).count();
        debug_assert!(energies[..n_plus].iter().all(|&e| e >= 0.0));
        Self { basis, energies, n_plus }
    }

    /// Grading of an operator that is already diagonal with the given
    /// energies (positive ones first); the basis is the identity.
    pub fn energy_frame(energies: Vec<f64>) -> Self {
        let n = energies.len();
        Self::from_parts(CMatrix::identity(n, n), energies)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn n_plus(&self) -> usize {
        self.n_plus
    }

    pub fn n_minus(&self) -> usize {
        self.dim() - self.n_plus
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn signs(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| if i < self.n_plus { 1.0 } else { -1.0 }).collect()
    }

    pub fn min_abs_energy(&self) -> f64 {
        self.energies.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min)
    }

    fn lift(&self, diag: &[f64]) -> CMatrix {
        let mut scaled = self.basis.clone();
        for (j, &d) in diag.iter().enumerate() {
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= d);
        }
        scaled * self.basis.adjoint()
    }

    /// `ε` in the original basis.
    pub fn epsilon(&self) -> CMatrix {
        self.lift(&self.signs())
    }

    pub fn projector_plus(&self) -> CMatrix {
        let d: Vec<f64> = (0..self.dim()).map(|i| if i < self.n_plus { 1.0 } else { 0.0 }).collect();
        self.lift(&d)
    }

    pub fn projector_minus(&self) -> CMatrix {
        let d: Vec<f64> = (0..self.dim()).map(|i| if i < self.n_plus { 0.0 } else { 1.0 }).collect();
        self.lift(&d)
    }

    /// `W† m W`: from the original basis to the ε eigenbasis.
    pub fn to_frame(&self, m: &CMatrix) -> CMatrix {
        self.basis.adjoint() * m * &self.basis
    }

    /// `W m W†`.
    pub fn from_frame(&self, m: &CMatrix) -> CMatrix {
        &self.basis * m * self.basis.adjoint()
    }
}

const GRADING_WARN: f64 = 1e-10;

/// Grading by Hermitean eigendecomposition of an arbitrary `D₀`.
pub fn epsilon_grading(d0: &HermitianOperator) -> Grading {
    let eig = crate::linalg::HermitianEigen::new(d0.matrix());
    let n = eig.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // positives first, each group ascending in |E|; stable for determinism
    order.sort_by(|&i, &j| {
        let (ei, ej) = (eig.values[i], eig.values[j]);
        (ei < 0.0).cmp(&(ej < 0.0)).then(ei.abs().total_cmp(&ej.abs())).then(i.cmp(&j))
    });
    let basis = CMatrix::from_fn(n, n, |r, c| eig.vectors[(r, order[c])]);
    let energies: Vec<f64> = order.iter().map(|&i| eig.values[i]).collect();
    let g = Grading::from_parts(basis, energies);
    if g.min_abs_energy() < GRADING_WARN {
        warn!("grading numerically unstable: smallest |eigenvalue| of D0 is {:.3e}", g.min_abs_energy());
    }
    g
}

/// Grid, mass, `D₀` and its grading built from the exact 2×2 block
/// eigenvectors (real, ordered by momentum inside each sign sector).
#[derive(Debug, Clone)]
pub struct DiracModel {
    grid: MomentumGrid,
    mass: f64,
    d0: HermitianOperator,
    grading: Grading,
}

impl DiracModel {
    pub fn new(grid: MomentumGrid, mass: f64) -> Result<Self> {
        let d0 = build_free_hamiltonian(&grid, mass)?;
        let dim = grid.dim();
        let n = grid.len();
        let mut basis = CMatrix::zeros(dim, dim);
        let mut energies = vec![0.0; dim];
        for j in 0..n {
            let p = grid.momentum(j);
            let e = (p * p + mass * mass).sqrt();
            let (x, y) = (p, mass + e);
            let norm = (x * x + y * y).sqrt();
            let b = SPINOR_DIM * j;
            // +E: (p, m+E)/‖·‖; −E: (−(m+E), p)/‖·‖
            basis[(b, j)] = real(x / norm);
            basis[(b + 1, j)] = real(y / norm);
            basis[(b, n + j)] = real(-y / norm);
            basis[(b + 1, n + j)] = real(x / norm);
            energies[j] = e;
            energies[n + j] = -e;
        }
        let grading = Grading::from_parts(basis, energies);
        if grading.min_abs_energy() < GRADING_WARN {
            warn!("grading numerically unstable: smallest |eigenvalue| of D0 is {:.3e}", grading.min_abs_energy());
        }
        Ok(Self { grid, mass, d0, grading })
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn free_hamiltonian(&self) -> &HermitianOperator {
        &self.d0
    }

    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    pub fn energies(&self) -> &[f64] {
        self.grading.energies()
    }

    /// `V₀` in the ε eigenbasis.
    pub fn potential_in_frame(&self, pot: &GaugePotential) -> Result<CMatrix> {
        let v = potential_profile(&self.grid, pot)?;
        Ok(self.grading.to_frame(v.matrix()))
    }

    /// Parity `ψ(x) → γ⁰ψ(−x)`, i.e. `|p, s⟩ → (σ₃)_{ss}|−p, s⟩`.
    pub fn parity_operator(&self) -> CMatrix {
        let dim = self.dim();
        let mut p = CMatrix::zeros(dim, dim);
        let (lo, hi) = self.grid.mode_range();
        for j in 0..self.grid.len() {
            let mirror = match self.grid.boundary() {
                Boundary::Periodic => -self.grid.label(j),
                Boundary::Antiperiodic => -self.grid.label(j) - 1,
            };
            debug_assert!((lo..=hi).contains(&mirror));
            let jm = self.grid.index_of(mirror).expect("grid symmetric under p → −p");
            p[(SPINOR_DIM * jm, SPINOR_DIM * j)] = ONE;
            p[(SPINOR_DIM * jm + 1, SPINOR_DIM * j + 1)] = -ONE;
        }
        p
    }
}
