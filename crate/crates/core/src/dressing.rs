//! Dressing operators `T = exp(iK)` with `K` of order −1, the factorization
//! `g = g₁·g₂` of an interaction-picture path and the phase change between
//! two dressings.
//!
//! The dressing is switched with the envelope, `T(t) = exp(i f(t) K)`, so it
//! is the identity before and after the interaction and every dressed path
//! runs from `1` to the scattering operator.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::evolve::UnitaryPath;
use crate::linalg::{
    frobenius, mul, real, singular_values, trace_norm, unitarity_defect, CMatrix, HermitianEigen, C64, I, ONE, ZERO,
};
use crate::model::{DiracModel, Envelope, GaugePotential, MomentumGrid, SPINOR_DIM};
use crate::par;
use crate::polarized::BlockedOperator;
use crate::symbolic::{ClassicalSymbol, ModeSymbol, Remainder};
use crate::transport::{transport, Transport, TransportOptions};

/// Agreement required between the phase ratio and the loop phase.
pub const LOOP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Recipe {
    Zero,
    DiagonalDecay,
    ModeMixed,
}

impl Recipe {
    pub const ALL: [Recipe; 3] = [Recipe::Zero, Recipe::DiagonalDecay, Recipe::ModeMixed];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Zero => "zero",
            Recipe::DiagonalDecay => "diagonal_decay",
            Recipe::ModeMixed => "mode_mixed",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s.trim())
            .ok_or_else(|| LabError::InvalidParameter(format!("unknown dressing recipe '{s}'")))
    }
}

/// `T = exp(iK)` on the model space, kept in the ε eigenbasis.
#[derive(Debug, Clone)]
pub struct DressingOperator {
    label: String,
    /// `K` in the momentum ⊗ spinor basis.
    k: CMatrix,
    eig: HermitianEigen,
    t_frame: CMatrix,
    identity: bool,
    energies: Vec<f64>,
    n_plus: usize,
    envelope: Envelope,
    /// Momentum of each momentum ⊗ spinor basis vector.
    momenta: Vec<f64>,
}

/// `(p² + m²)^{−1/2}`, zero at `p = 0` when `m = 0`.
pub fn inverse_energy_symbol(grid: &MomentumGrid, mass: f64) -> ClassicalSymbol {
    let r = Remainder::custom(move |p: f64| {
        let e2 = p * p + mass * mass;
        if e2 == 0.0 {
            ZERO
        } else {
            real(e2.powf(-0.5))
        }
    });
    ClassicalSymbol::new(-1, Vec::new(), r, grid.clone()).expect("(p² + m²)^{-1/2} decays like |p|^{-1}")
}

/// `m ⊗ s` for a 2×2 spinor matrix `s`.
fn spinor_kron(m: &CMatrix, s: [[C64; 2]; 2]) -> CMatrix {
    let n = m.nrows();
    CMatrix::from_fn(SPINOR_DIM * n, SPINOR_DIM * n, |i, j| {
        m[(i / SPINOR_DIM, j / SPINOR_DIM)] * s[i % SPINOR_DIM][j % SPINOR_DIM]
    })
}

const SPIN_ONE: [[C64; 2]; 2] = [[ONE, ZERO], [ZERO, ONE]];
const SPIN_X: [[C64; 2]; 2] = [[ZERO, ONE], [ONE, ZERO]];

/// Builds `K` for a recipe: `diagonal_decay` is `λ(p² + m²)^{−1/2} ⊗ 1`,
/// `mode_mixed` adds `λ a_k e^{ikx}(p² + m²)^{−1/2}` for every mode of the
/// potential (`⊗ 1` for `A₀`, `⊗ σ₁` for `A₁`), Hermitized.
pub fn build_dressing(pot: &GaugePotential, model: &DiracModel, recipe: Recipe) -> Result<DressingOperator> {
    let grid = model.grid();
    let dim = model.dim();
    let lambda = real(pot.coupling);
    let s = inverse_energy_symbol(grid, model.mass());
    let k = match recipe {
        Recipe::Zero => CMatrix::zeros(dim, dim),
        Recipe::DiagonalDecay => spinor_kron(&s.lattice_matrix(), SPIN_ONE) * lambda,
        Recipe::ModeMixed => {
            let mut k = spinor_kron(&s.lattice_matrix(), SPIN_ONE);
            for (coeffs, spin) in [(&pot.a0, SPIN_ONE), (&pot.a1, SPIN_X)] {
                for (&mode, &c) in coeffs {
                    if c == ZERO {
                        continue;
                    }
                    let m = ModeSymbol::new(mode, s.scale(c)).lattice_matrix();
                    k += spinor_kron(&m, spin);
                }
            }
            (&k + k.adjoint()) * (lambda * 0.5)
        }
    };
    DressingOperator::from_hermitian(recipe.name(), k, model, pot.envelope)
}

impl DressingOperator {
    /// Dressing with a given Hermitean `K` in the momentum ⊗ spinor basis.
    pub fn from_hermitian(label: &str, k: CMatrix, model: &DiracModel, envelope: Envelope) -> Result<Self> {
        let dim = model.dim();
        if k.nrows() != dim || k.ncols() != dim {
            return Err(LabError::DimensionMismatch { expected: dim, found: k.nrows() });
        }
        let defect = crate::linalg::hermiticity_residual(&k);
        if defect > 1e-12 * frobenius(&k).max(1.0) {
            return Err(LabError::NotHermitian { residual: defect });
        }
        let identity = k.iter().all(|z| *z == ZERO);
        let grading = model.grading();
        let k_frame = grading.to_frame(&k);
        let eig = HermitianEigen::new(&k_frame);
        let t_frame = if identity { CMatrix::identity(dim, dim) } else { eig.unitary(-1.0) };
        let grid = model.grid();
        let momenta = (0..dim).map(|i| grid.momentum(i / SPINOR_DIM)).collect();
        Ok(Self {
            label: label.to_string(),
            k,
            eig,
            t_frame,
            identity,
            energies: model.energies().to_vec(),
            n_plus: grading.n_plus(),
            envelope,
            momenta,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn generator(&self) -> &CMatrix {
        &self.k
    }

    /// `T` in the ε eigenbasis.
    pub fn t(&self) -> &CMatrix {
        &self.t_frame
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `exp(i s K)` in the ε eigenbasis.
    pub fn partial(&self, s: f64) -> CMatrix {
        if self.identity {
            CMatrix::identity(self.dim(), self.dim())
        } else {
            self.eig.unitary(-s)
        }
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.t_frame)
    }

    /// `‖[ε, T]‖_HS`.
    pub fn epsilon_commutator_hs(&self) -> f64 {
        let blocks = BlockedOperator::from_frame(&self.t_frame, self.n_plus);
        2.0 * (frobenius(&blocks.b).powi(2) + frobenius(&blocks.c).powi(2)).sqrt()
    }

    /// Largest singular value of `T − 1` on the top momentum quartile, with
    /// the largest momentum of the grid.
    pub fn tail_deviation(&self) -> TailDeviation {
        let dim = self.dim();
        let t = self.original_t() - CMatrix::identity(dim, dim);
        let p_max = self.momenta.iter().fold(0.0f64, |a, p| a.max(p.abs()));
        let idx: Vec<usize> = (0..dim).filter(|&i| self.momenta[i].abs() >= 0.75 * p_max).collect();
        let sub = CMatrix::from_fn(idx.len(), idx.len(), |i, j| t[(idx[i], idx[j])]);
        let sigma = singular_values(&sub).into_iter().fold(0.0, f64::max);
        TailDeviation { sigma, p_max }
    }

    fn original_t(&self) -> CMatrix {
        if self.identity {
            return CMatrix::identity(self.dim(), self.dim());
        }
        HermitianEigen::new(&self.k).unitary(-1.0)
    }

    /// `R(t) = e^{itD₀}T(t)e^{−itD₀}` and `Ṙ(t)` in the ε eigenbasis, with
    /// `T(t) = exp(i f(t) K)`.
    pub fn rotation(&self, t: f64) -> (CMatrix, CMatrix) {
        self.rotation_with(t, true)
    }

    fn rotation_with(&self, t: f64, with_derivative: bool) -> (CMatrix, CMatrix) {
        let dim = self.dim();
        let f = self.envelope.value(t);
        let fdot = self.envelope.derivative(t);
        if self.identity || (f == 0.0 && fdot == 0.0) {
            return (CMatrix::identity(dim, dim), CMatrix::zeros(dim, dim));
        }
        let tt = self.partial(f);
        if !with_derivative {
            return (crate::linalg::conjugate_by_phases(&tt, &self.energies, t), CMatrix::zeros(0, 0));
        }
        let kt = self.eig.apply_fn(|l| C64::from_polar(l, f * l));
        let e = &self.energies;
        // d/dt of e^{itE}Te^{−itE} = e^{itE}(i[E, T] + Ṫ)e^{−itE}
        let inner = CMatrix::from_fn(dim, dim, |i, j| I * (e[i] - e[j]) * tt[(i, j)] + I * fdot * kt[(i, j)]);
        (crate::linalg::conjugate_by_phases(&tt, e, t), crate::linalg::conjugate_by_phases(&inner, e, t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailDeviation {
    pub sigma: f64,
    pub p_max: f64,
}

impl TailDeviation {
    /// `σ·|p_max|`, bounded in the cutoff for an order −1 dressing.
    pub fn scaled(&self) -> f64 {
        self.sigma * self.p_max
    }
}

/// Dressed path `g₂(t) = R(t)·g(t)`.
pub fn dress_path(path: &UnitaryPath, dressing: &DressingOperator) -> Result<UnitaryPath> {
    if path.segments().len() != 1 {
        return Err(LabError::InvalidPath("dressing expects a single-segment interaction path".into()));
    }
    if path.dim() != dressing.dim() {
        return Err(LabError::DimensionMismatch { expected: dressing.dim(), found: path.dim() });
    }
    if dressing.is_identity() {
        return Ok(path.clone());
    }
    let d = Arc::new(dressing.clone());
    let inner = path.segments()[0].generator.clone();
    let dg = d.clone();
    let generator = inner.gauge(move |t| dg.rotation(t));
    Ok(path.map_samples(generator, |t, g| mul(&d.rotation_with(t, false).0, g)))
}

/// One sample of the factorization diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationSample {
    pub t: f64,
    /// `‖g₁g₂ − g‖_F`.
    pub reassembly: f64,
    /// Trace norms of `P₊g₂P₋` and `P₋g₂P₊`.
    pub dressed_offdiag: (f64, f64),
    /// Trace norms of `P₊gP₋` and `P₋gP₊`.
    pub bare_offdiag: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct Factorization {
    /// `g₁(t) = e^{itD₀}T(t)⁻¹e^{−itD₀}` at the path samples.
    pub g1: Vec<CMatrix>,
    pub g2: UnitaryPath,
    pub samples: Vec<FactorizationSample>,
}

impl Factorization {
    pub fn max_reassembly(&self) -> f64 {
        self.samples.iter().map(|s| s.reassembly).fold(0.0, f64::max)
    }

    /// Largest dressed over largest bare off-diagonal trace norm.
    pub fn offdiag_ratio(&self) -> f64 {
        let top = |f: fn(&FactorizationSample) -> (f64, f64)| {
            self.samples.iter().map(|s| f(s).0.max(f(s).1)).fold(0.0, f64::max)
        };
        let bare = top(|s| s.bare_offdiag);
        if bare == 0.0 {
            return 0.0;
        }
        top(|s| s.dressed_offdiag) / bare
    }
}

fn offdiag_trace_norms(g: &CMatrix, n_plus: usize) -> (f64, f64) {
    let b = BlockedOperator::from_frame(g, n_plus);
    (trace_norm(&b.b), trace_norm(&b.c))
}

/// `g = g₁·g₂` at every sample of an interaction-picture path.
pub fn factorize_interaction(path: &UnitaryPath, dressing: &DressingOperator) -> Result<Factorization> {
    let g2 = dress_path(path, dressing)?;
    let n_plus = path.n_plus();
    let bare: Vec<(f64, &CMatrix)> = path.samples().collect();
    let dressed: Vec<&CMatrix> = g2.samples().map(|s| s.1).collect();
    let parts = par::map_range(bare.len(), |i| {
        let (t, g) = bare[i];
        let g1 = dressing.rotation_with(t, false).0.adjoint();
        let reassembly = frobenius(&(mul(&g1, dressed[i]) - g));
        let sample = FactorizationSample {
            t,
            reassembly,
            dressed_offdiag: offdiag_trace_norms(dressed[i], n_plus),
            bare_offdiag: offdiag_trace_norms(g, n_plus),
        };
        (g1, sample)
    });
    let (g1, samples) = parts.into_iter().unzip();
    Ok(Factorization { g1, g2, samples })
}

/// Transport along a dressed path.
#[derive(Debug, Clone)]
pub struct DressedTransport {
    pub label: String,
    pub path: UnitaryPath,
    pub transport: Transport,
}

impl DressedTransport {
    pub fn parallel_phase(&self) -> C64 {
        self.transport.parallel_phase()
    }
}

pub fn dressed_transport(
    path: &UnitaryPath,
    dressing: &DressingOperator,
    opts: &TransportOptions,
) -> Result<DressedTransport> {
    let dressed = dress_path(path, dressing)?;
    let transport = transport(&dressed, opts)?;
    Ok(DressedTransport { label: dressing.label().to_string(), path: dressed, transport })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRatio {
    /// `Φ(T)/Φ(T′)`.
    pub ratio: C64,
    /// Parallel phase of the loop: forward with `T`, back with `T′`.
    pub loop_phase: C64,
}

impl PhaseRatio {
    pub fn gap(&self) -> f64 {
        (self.ratio - self.loop_phase).norm()
    }

    pub fn is_consistent(&self) -> bool {
        self.gap() <= LOOP_TOL
    }

    pub fn arg(&self) -> f64 {
        self.ratio.arg()
    }

    pub fn modulus(&self) -> f64 {
        self.ratio.norm()
    }
}

/// Ratio of two dressed phases together with the phase of the closed loop
/// they form.
pub fn phase_ratio_from(a: &DressedTransport, b: &DressedTransport, opts: &TransportOptions) -> Result<PhaseRatio> {
    let ratio = a.parallel_phase() / b.parallel_phase();
    let closed = a.path.concat(&b.path.reversed());
    let loop_phase = transport(&closed, opts)?.parallel_phase();
    Ok(PhaseRatio { ratio, loop_phase })
}

pub fn dressing_phase_ratio(
    path: &UnitaryPath,
    t: &DressingOperator,
    t_prime: &DressingOperator,
) -> Result<PhaseRatio> {
    let opts = TransportOptions::default();
    let pair = [t, t_prime];
    let dressed = par::map(&pair, |d| dressed_transport(path, d, &opts));
    let [a, b]: [Result<DressedTransport>; 2] = dressed.try_into().expect("two dressings");
    phase_ratio_from(&a?, &b?, &opts)
}

/// One row of the cutoff sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub nmax: usize,
    pub first: Recipe,
    pub second: Recipe,
    pub ratio: PhaseRatio,
}

/// Phase ratios of every recipe pair at each cutoff.
pub fn cutoff_sweep(
    base: &DiracModel,
    pot: &GaugePotential,
    nmaxes: &[usize],
    evolve: &crate::evolve::EvolveOptions,
) -> Result<Vec<SweepRow>> {
    let rows = par::map(nmaxes, |&n| -> Result<Vec<SweepRow>> {
        let model = DiracModel::new(base.grid().with_cutoff(n)?, base.mass())?;
        let path = crate::evolve::scattering_path(&model, pot, evolve)?;
        recipe_pairs(&model, pot, &path, n)
    });
    Ok(rows.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

/// Phase ratios of the unordered recipe pairs on one path.
pub fn recipe_pairs(
    model: &DiracModel,
    pot: &GaugePotential,
    path: &UnitaryPath,
    nmax: usize,
) -> Result<Vec<SweepRow>> {
    let opts = TransportOptions::default();
    let dressed =
        par::map(&Recipe::ALL, |&r| build_dressing(pot, model, r).and_then(|d| dressed_transport(path, &d, &opts)))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for i in 0..Recipe::ALL.len() {
        for j in i + 1..Recipe::ALL.len() {
            pairs.push((i, j));
        }
    }
    par::map(&pairs, |&(i, j)| {
        phase_ratio_from(&dressed[i], &dressed[j], &opts).map(|ratio| SweepRow {
            nmax,
            first: Recipe::ALL[i],
            second: Recipe::ALL[j],
            ratio,
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{scattering_path, EvolveOptions};
    use crate::linalg::random_hermitian;
    use crate::model::{Boundary, MomentumGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn model(n: usize) -> DiracModel {
        DiracModel::new(MomentumGrid::new(2.0 * PI, n, Boundary::Periodic).unwrap(), 1.0).unwrap()
    }

    fn field(coupling: f64) -> GaugePotential {
        GaugePotential::default_field(coupling, 1.0)
    }

    #[test]
    fn recipes_are_unitary_and_shaped() {
        let m = model(6);
        let pot = field(0.5);
        let zero = build_dressing(&pot, &m, Recipe::Zero).unwrap();
        assert_eq!(zero.t(), &CMatrix::identity(m.dim(), m.dim()));
        let diag = build_dressing(&pot, &m, Recipe::DiagonalDecay).unwrap();
        assert!(diag.unitarity_defect() < 1e-12 * m.dim() as f64);
        assert!(diag.epsilon_commutator_hs() < 1e-13);
        let mixed = build_dressing(&pot, &m, Recipe::ModeMixed).unwrap();
        assert!(mixed.unitarity_defect() < 1e-12 * m.dim() as f64);
        assert!(mixed.epsilon_commutator_hs() > 1e-3);
        assert!("mode_mixed".parse::<Recipe>().unwrap() == Recipe::ModeMixed);
        assert!("other".parse::<Recipe>().is_err());
    }

    #[test]
    fn dressing_deviation_decays_like_inverse_momentum() {
        let pot = field(0.5);
        let scaled: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| build_dressing(&pot, &model(n), Recipe::ModeMixed).unwrap().tail_deviation().scaled())
            .collect();
        for s in &scaled {
            assert!(s.is_finite() && *s < 2.0 * scaled[0], "{scaled:?}");
        }
    }

    #[test]
    fn rotation_derivative_matches_finite_difference() {
        let m = model(3);
        let d = build_dressing(&field(0.8), &m, Recipe::ModeMixed).unwrap();
        let t = 0.37;
        let h = 1e-5;
        let fd = (d.rotation(t + h).0 - d.rotation(t - h).0) / real(2.0 * h);
        assert!(frobenius(&(fd - d.rotation(t).1)) < 1e-7);
        assert_eq!(d.rotation(0.0).0, CMatrix::identity(m.dim(), m.dim()));
        assert_eq!(d.rotation(1.0).0, CMatrix::identity(m.dim(), m.dim()));
    }

    #[test]
    fn factorization_reassembles() {
        let m = model(4);
        let pot = field(0.3);
        let path = scattering_path(&m, &pot, &EvolveOptions::for_potential(&pot)).unwrap();
        let zero = factorize_interaction(&path, &build_dressing(&pot, &m, Recipe::Zero).unwrap()).unwrap();
        for (g1, (_, g)) in zero.g1.iter().zip(path.samples()) {
            assert_eq!(g1, &CMatrix::identity(m.dim(), m.dim()));
            assert!(frobenius(&(g1 * g - g)) == 0.0);
        }
        let mixed = factorize_interaction(&path, &build_dressing(&pot, &m, Recipe::ModeMixed).unwrap()).unwrap();
        assert!(mixed.max_reassembly() < 1e-12 * m.dim() as f64);
        assert!(mixed.offdiag_ratio().is_finite());
        assert!(mixed.g2.max_unitarity_defect() < 1e-9 * m.dim() as f64);
    }

    #[test]
    fn phase_ratio_equals_loop_phase() {
        let m = model(4);
        let pot = field(0.3);
        let path = scattering_path(&m, &pot, &EvolveOptions::for_potential(&pot)).unwrap();
        let diag = build_dressing(&pot, &m, Recipe::DiagonalDecay).unwrap();
        let same = dressing_phase_ratio(&path, &diag, &diag).unwrap();
        assert!((same.ratio - ONE).norm() < 1e-10);
        for row in recipe_pairs(&m, &pot, &path, 4).unwrap() {
            assert!(row.ratio.is_consistent(), "{row:?}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2 {
            let k1 =
                DressingOperator::from_hermitian("r1", random_hermitian(&mut rng, m.dim(), 0.05), &m, pot.envelope)
                    .unwrap();
            let k2 =
                DressingOperator::from_hermitian("r2", random_hermitian(&mut rng, m.dim(), 0.05), &m, pot.envelope)
                    .unwrap();
            let r = dressing_phase_ratio(&path, &k1, &k2).unwrap();
            assert!(r.is_consistent(), "{r:?}");
        }
    }
}
