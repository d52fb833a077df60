//! Time evolution: Schrödinger propagator, interaction picture and generic
//! unitary paths `ġ = G(t)·g`.
//!
//! All matrices here live in the grading frame of the model (the `D₀`
//! eigenbasis, positive energies first), where `D₀ = diag(E)`.
//!
//! A path is a list of segments. Every segment is a run of panels, and every
//! panel carries five samples at the Gauss–Lobatto nodes, so the sample
//! layout of a segment with `n` panels is `4n + 1` times with shared panel
//! endpoints. The transport quadrature reads exactly those samples.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::linalg::{conjugate_by_phases, frobenius, mul, mul_ad, mul_da, real, CMatrix, HermitianEigen, C64, I};
use crate::model::{DiracModel, Envelope, GaugePotential};
use crate::quadrature::LOBATTO5_NODES;

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Gauss nodes on `[0, 1]`.
const C1: f64 = 0.5 - SQRT3 / 6.0;
const C2: f64 = 0.5 + SQRT3 / 6.0;
/// Commutator-free weights.
const A1: f64 = (3.0 - 2.0 * SQRT3) / 12.0;
const A2: f64 = (3.0 + 2.0 * SQRT3) / 12.0;

/// `H(t) = diag(E) + f(t)·V₀` in the grading frame.
#[derive(Debug, Clone)]
pub struct FrameHamiltonian {
    pub energies: Vec<f64>,
    pub profile: CMatrix,
    pub envelope: Envelope,
}

impl FrameHamiltonian {
    pub fn new(model: &DiracModel, pot: &GaugePotential) -> Result<Self> {
        Ok(Self {
            energies: model.energies().to_vec(),
            profile: model.potential_in_frame(pot)?,
            envelope: pot.envelope,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn hamiltonian(&self, t: f64) -> CMatrix {
        let mut h = &self.profile * real(self.envelope.value(t));
        for (i, &e) in self.energies.iter().enumerate() {
            h[(i, i)] += e;
        }
        h
    }

    /// `V(t)` in the frame.
    pub fn potential(&self, t: f64) -> CMatrix {
        &self.profile * real(self.envelope.value(t))
    }

    /// `V_I(t) = e^{itD₀} V(t) e^{−itD₀}`.
    pub fn interaction_potential(&self, t: f64) -> CMatrix {
        conjugate_by_phases(&self.profile, &self.energies, t) * real(self.envelope.value(t))
    }

    /// One commutator-free step `[t, t+h]` of `i∂U = H U`.
    fn cf4(&self, t: f64, h: f64) -> Vec<Factor> {
        let f1 = self.envelope.value(t + C1 * h);
        let f2 = self.envelope.value(t + C2 * h);
        let first = h * (A2 * f1 + A1 * f2);
        let second = h * (A1 * f1 + A2 * f2);
        [first, second].iter().map(|&c| self.half_step(h, c)).collect()
    }

    /// `exp(−i(h/2·diag E + c·V₀))`.
    fn half_step(&self, h: f64, c: f64) -> Factor {
        if c == 0.0 {
            return Factor::Diag(self.energies.iter().map(|&e| C64::from_polar(1.0, -0.5 * h * e)).collect());
        }
        let mut m = &self.profile * real(c);
        for (i, &e) in self.energies.iter().enumerate() {
            m[(i, i)] += 0.5 * h * e;
        }
        Factor::exp_hermitian(&m)
    }

    fn phases(&self, t: f64) -> Vec<C64> {
        self.energies.iter().map(|&e| C64::from_polar(1.0, t * e)).collect()
    }
}

/// Exponential factor of a one-step propagator.
#[derive(Debug, Clone)]
enum Factor {
    Diag(Vec<C64>),
    /// `Q·diag(phases)·Q†`.
    Spectral {
        vectors: CMatrix,
        phases: Vec<C64>,
    },
    /// `exp(−i·sign·m)` by a truncated Taylor series applied to the operand.
    Taylor {
        m: CMatrix,
        sign: f64,
        degree: usize,
    },
    Dense(CMatrix),
}

/// Above this 1-norm the eigendecomposition is cheaper than the series.
const TAYLOR_MAX_NORM: f64 = 0.3;

/// Smallest degree with `θ^{K+1}/(K+1)! < 1e−18`.
fn taylor_degree(theta: f64) -> usize {
    let mut term = 1.0;
    for k in 1..40 {
        term *= theta / k as f64;
        if term < 1e-18 {
            return k - 1;
        }
    }
    40
}

impl Factor {
    /// `exp(−i·m)` for Hermitean `m`.
    fn exp_hermitian(m: &CMatrix) -> Self {
        let theta = (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
        if theta <= TAYLOR_MAX_NORM {
            return Factor::Taylor { m: m.clone(), sign: 1.0, degree: taylor_degree(theta).max(1) };
        }
        let eig = HermitianEigen::new(m);
        let phases = eig.values.iter().map(|&l| C64::from_polar(1.0, -l)).collect();
        Factor::Spectral { vectors: eig.vectors, phases }
    }

    fn apply(&self, m: &CMatrix) -> CMatrix {
        match self {
            Factor::Diag(d) => {
                let mut out = m.clone();
                for (i, &z) in d.iter().enumerate() {
                    out.row_mut(i).iter_mut().for_each(|x| *x *= z);
                }
                out
            }
            Factor::Spectral { vectors, phases } => {
                let mut inner = mul_ad(vectors, m);
                for (i, &z) in phases.iter().enumerate() {
                    inner.row_mut(i).iter_mut().for_each(|x| *x *= z);
                }
                mul(vectors, &inner)
            }
            Factor::Taylor { m: h, sign, degree } => {
                let mut out = m.clone();
                let mut term = m.clone();
                for k in 1..=*degree {
                    term = mul(h, &term) * C64::new(0.0, -sign / k as f64);
                    out += &term;
                }
                out
            }
            Factor::Dense(u) => mul(u, m),
        }
    }

    fn inverse(&self) -> Self {
        match self {
            Factor::Diag(d) => Factor::Diag(d.iter().map(|z| z.conj()).collect()),
            Factor::Spectral { vectors, phases } => {
                Factor::Spectral { vectors: vectors.clone(), phases: phases.iter().map(|z| z.conj()).collect() }
            }
            Factor::Taylor { m, sign, degree } => Factor::Taylor { m: m.clone(), sign: -sign, degree: *degree },
            Factor::Dense(u) => Factor::Dense(u.adjoint()),
        }
    }
}

/// Unitary map `g(t) ↦ g(t+h)`, a product of factors applied in order.
#[derive(Debug, Clone)]
pub struct Propagator(Vec<Factor>);

impl Propagator {
    pub fn apply(&self, m: &CMatrix) -> CMatrix {
        self.0.iter().fold(m.clone(), |acc, f| f.apply(&acc))
    }

    pub fn inverse(&self) -> Self {
        Propagator(self.0.iter().rev().map(Factor::inverse).collect())
    }

    pub fn matrix(&self, dim: usize) -> CMatrix {
        self.apply(&CMatrix::identity(dim, dim))
    }
}

/// Precomputed constant generator `G = −i·H`.
#[derive(Debug, Clone)]
pub struct ConstantGenerator {
    matrix: CMatrix,
    eig: HermitianEigen,
}

type Transform = dyn Fn(f64) -> (CMatrix, CMatrix) + Send + Sync;
type GeneratorFn = dyn Fn(f64) -> CMatrix + Send + Sync;

/// Right-hand side of `ġ = G(t)·g` together with an exact-as-possible step.
#[derive(Clone)]
pub enum Generator {
    /// `G = −i(diag E + f(t)V₀)`.
    Schrodinger(Arc<FrameHamiltonian>),
    /// `G = −i·V_I(t)`.
    Interaction(Arc<FrameHamiltonian>),
    /// Time-independent `G`; steps are exact exponentials.
    Constant(Arc<ConstantGenerator>),
    /// Arbitrary anti-Hermitean `G(t)`, stepped with the commutator-free scheme.
    Custom(Arc<GeneratorFn>),
    /// `G(t) = inner(t − by)`.
    Shifted { inner: Box<Generator>, by: f64 },
    /// Path run backwards from `end`: `G(s) = −inner(end − s)`.
    Reversed { inner: Box<Generator>, end: f64 },
    /// Gauge-transformed path `R(t)·g(t)` with `transform(t) = (R, Ṙ)`, `R` unitary.
    Gauge { inner: Box<Generator>, transform: Arc<Transform> },
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Schrodinger(_) => f.write_str("Schrodinger"),
            Generator::Interaction(_) => f.write_str("Interaction"),
            Generator::Constant(c) => write!(f, "Constant(dim={})", c.matrix.nrows()),
            Generator::Custom(_) => f.write_str("Custom"),
            Generator::Shifted { inner, by } => write!(f, "Shifted({inner:?}, {by})"),
            Generator::Reversed { inner, end } => write!(f, "Reversed({inner:?}, {end})"),
            Generator::Gauge { inner, .. } => write!(f, "Gauge({inner:?})"),
        }
    }
}

impl Generator {
    pub fn constant(g: CMatrix) -> Self {
        let eig = HermitianEigen::new(&(&g * I));
        Generator::Constant(Arc::new(ConstantGenerator { matrix: g, eig }))
    }

    pub fn custom<F: Fn(f64) -> CMatrix + Send + Sync + 'static>(f: F) -> Self {
        Generator::Custom(Arc::new(f))
    }

    pub fn shifted(self, by: f64) -> Self {
        if by == 0.0 {
            return self;
        }
        match self {
            Generator::Shifted { inner, by: b } => inner.shifted(b + by),
            other => Generator::Shifted { inner: Box::new(other), by },
        }
    }

    pub fn reversed(self, end: f64) -> Self {
        match self {
            Generator::Reversed { inner, end: e } if e == end => *inner,
            other => Generator::Reversed { inner: Box::new(other), end },
        }
    }

    pub fn gauge<F>(self, transform: F) -> Self
    where
        F: Fn(f64) -> (CMatrix, CMatrix) + Send + Sync + 'static,
    {
        Generator::Gauge { inner: Box::new(self), transform: Arc::new(transform) }
    }

    /// `G(t)`.
    pub fn matrix(&self, t: f64) -> CMatrix {
        match self {
            Generator::Schrodinger(h) => h.hamiltonian(t) * (-I),
            Generator::Interaction(h) => h.interaction_potential(t) * (-I),
            Generator::Constant(c) => c.matrix.clone(),
            Generator::Custom(f) => f(t),
            Generator::Shifted { inner, by } => inner.matrix(t - by),
            Generator::Reversed { inner, end } => -inner.matrix(end - t),
            Generator::Gauge { inner, transform } => {
                let (r, rdot) = transform(t);
                mul_da(&(rdot + mul(&r, &inner.matrix(t))), &r)
            }
        }
    }

    /// `ġ = G(t)·g` at a sample.
    pub fn velocity(&self, t: f64, g: &CMatrix) -> CMatrix {
        match self {
            _ => mul(&self.matrix(t), g),
        }
    }

    /// Propagator over `[t, t+h]`.
    pub fn step(&self, t: f64, h: f64) -> Propagator {
        match self {
            Generator::Schrodinger(ham) => Propagator(ham.cf4(t, h)),
            Generator::Interaction(ham) => {
                // g = e^{itE}U: undo the free phase, take a Schrödinger step, redo it
                let mut factors = vec![Factor::Diag(ham.phases(-t))];
                factors.extend(ham.cf4(t, h));
                factors.push(Factor::Diag(ham.phases(t + h)));
                Propagator(factors)
            }
            Generator::Constant(c) => {
                let phases = c.eig.values.iter().map(|&l| C64::from_polar(1.0, -h * l)).collect();
                Propagator(vec![Factor::Spectral { vectors: c.eig.vectors.clone(), phases }])
            }
            Generator::Custom(f) => {
                let g1 = f(t + C1 * h);
                let g2 = f(t + C2 * h);
                // exp(h(αG₁ + βG₂)) = exp(−i·(i h(αG₁ + βG₂)))
                let first = (&g1 * real(A2) + &g2 * real(A1)) * (I * h);
                let second = (&g1 * real(A1) + &g2 * real(A2)) * (I * h);
                Propagator(vec![Factor::exp_hermitian(&first), Factor::exp_hermitian(&second)])
            }
            Generator::Shifted { inner, by } => inner.step(t - by, h),
            Generator::Reversed { inner, end } => inner.step(end - t - h, h).inverse(),
            Generator::Gauge { inner, transform } => {
                let (r0, _) = transform(t);
                let (r1, _) = transform(t + h);
                let mut factors = vec![Factor::Dense(r0.adjoint())];
                factors.extend(inner.step(t, h).0);
                factors.push(Factor::Dense(r1));
                Propagator(factors)
            }
        }
    }
}

/// One stretch of a path driven by a single generator.
#[derive(Debug, Clone)]
pub struct Segment {
    pub times: Vec<f64>,
    pub unitaries: Vec<CMatrix>,
    pub generator: Generator,
}

impl Segment {
    pub fn panels(&self) -> usize {
        (self.times.len() - 1) / 4
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn velocity(&self, i: usize) -> CMatrix {
        self.generator.velocity(self.times[i], &self.unitaries[i])
    }

    fn reversed(&self) -> Segment {
        let (a, b) = (self.start(), self.end());
        let end = a + b;
        Segment {
            times: self.times.iter().rev().map(|&t| end - t).collect(),
            unitaries: self.unitaries.iter().rev().cloned().collect(),
            generator: self.generator.clone().reversed(end),
        }
    }

    fn shifted(&self, by: f64) -> Segment {
        Segment {
            times: self.times.iter().map(|&t| t + by).collect(),
            unitaries: self.unitaries.clone(),
            generator: self.generator.clone().shifted(by),
        }
    }
}

/// Panel-structured sample times on `[t0, t1]`.
pub fn lobatto_times(t0: f64, t1: f64, panels: usize) -> Vec<f64> {
    let width = (t1 - t0) / panels as f64;
    let mut times = Vec::with_capacity(4 * panels + 1);
    for j in 0..panels {
        let a = t0 + j as f64 * width;
        for &x in &LOBATTO5_NODES[..4] {
            times.push(a + 0.5 * width * (1.0 + x));
        }
    }
    times.push(t1);
    times
}

/// Integrates `ġ = G g` from `start` over `[t0, t1]` with `panels` Lobatto panels.
pub fn integrate(generator: &Generator, start: CMatrix, t0: f64, t1: f64, panels: usize) -> Segment {
    assert!(panels >= 1);
    let times = lobatto_times(t0, t1, panels);
    let mut unitaries = Vec::with_capacity(times.len());
    unitaries.push(start);
    for w in times.windows(2) {
        let next = generator.step(w[0], w[1] - w[0]).apply(unitaries.last().unwrap());
        unitaries.push(next);
    }
    Segment { times, unitaries, generator: generator.clone() }
}

/// Time-sampled unitaries with their generator.
#[derive(Debug, Clone)]
pub struct UnitaryPath {
    segments: Vec<Segment>,
    /// Number of positive-energy states; the blocks of every sample are
    /// taken with this split.
    n_plus: usize,
    /// Frobenius change of the endpoint at the last refinement, if any.
    pub refinement_change: Option<f64>,
    /// The same path at half the panels, kept by the adaptive integrator so
    /// that transport can check convergence without integrating again.
    coarser: Option<Arc<UnitaryPath>>,
}

impl UnitaryPath {
    pub fn from_segment(segment: Segment, n_plus: usize) -> Self {
        assert!(n_plus <= segment.unitaries[0].nrows());
        Self { segments: vec![segment], n_plus, refinement_change: None, coarser: None }
    }

    /// Geodesic `t ↦ e^{tX}·start` over `[0, 1]`.
    pub fn geodesic(x: &CMatrix, start: CMatrix, panels: usize, n_plus: usize) -> Self {
        Self::from_segment(integrate(&Generator::constant(x.clone()), start, 0.0, 1.0, panels), n_plus)
    }

    /// Samples `g(t)` of a known closed-form path with the given generator.
    pub fn from_fn<F: Fn(f64) -> CMatrix>(
        generator: Generator,
        t0: f64,
        t1: f64,
        panels: usize,
        n_plus: usize,
        g: F,
    ) -> Self {
        let times = lobatto_times(t0, t1, panels);
        let unitaries = times.iter().map(|&t| g(t)).collect();
        Self::from_segment(Segment { times, unitaries, generator }, n_plus)
    }

    /// Replaces the samples of every segment by `f(t, g(t))` under a new
    /// generator; used for gauge transforms with a known closed form. The
    /// coarser level, if kept, is mapped too.
    pub fn map_samples<F>(&self, generator: Generator, f: F) -> Self
    where
        F: Fn(f64, &CMatrix) -> CMatrix,
    {
        self.map_samples_ref(&generator, &f)
    }

    fn map_samples_ref<F>(&self, generator: &Generator, f: &F) -> Self
    where
        F: Fn(f64, &CMatrix) -> CMatrix,
    {
        assert_eq!(self.segments.len(), 1, "map_samples expects a single segment");
        let s = &self.segments[0];
        let unitaries = s.times.iter().zip(&s.unitaries).map(|(&t, u)| f(t, u)).collect();
        Self {
            segments: vec![Segment { times: s.times.clone(), unitaries, generator: generator.clone() }],
            n_plus: self.n_plus,
            refinement_change: self.refinement_change,
            coarser: self.coarser.as_deref().map(|c| Arc::new(c.map_samples_ref(generator, f))),
        }
    }

    pub fn n_plus(&self) -> usize {
        self.n_plus
    }

    /// Previous level of the adaptive integration, when available.
    pub fn coarser(&self) -> Option<&UnitaryPath> {
        self.coarser.as_deref()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.segments[0].unitaries[0].nrows()
    }

    pub fn start(&self) -> f64 {
        self.segments[0].start()
    }

    pub fn end(&self) -> f64 {
        self.segments.last().unwrap().end()
    }

    pub fn initial(&self) -> &CMatrix {
        &self.segments[0].unitaries[0]
    }

    pub fn last(&self) -> &CMatrix {
        self.segments.last().unwrap().unitaries.last().unwrap()
    }

    pub fn panels(&self) -> usize {
        self.segments.iter().map(Segment::panels).sum()
    }

    /// All `(t, g(t))` samples; shared segment junctions appear twice.
    pub fn samples(&self) -> impl Iterator<Item = (f64, &CMatrix)> {
        self.segments.iter().flat_map(|s| s.times.iter().copied().zip(s.unitaries.iter()))
    }

    /// `g(t)` by a single step from the nearest earlier sample.
    pub fn at(&self, t: f64) -> CMatrix {
        let seg = self.segments.iter().find(|s| t <= s.end()).unwrap_or_else(|| self.segments.last().unwrap());
        let i = match seg.times.iter().rposition(|&s| s <= t) {
            Some(i) => i,
            None => return seg.unitaries[0].clone(),
        };
        let dt = t - seg.times[i];
        if dt == 0.0 {
            return seg.unitaries[i].clone();
        }
        seg.generator.step(seg.times[i], dt).apply(&seg.unitaries[i])
    }

    /// Same path integrated with twice as many panels per segment, each
    /// segment restarted from its stored initial value.
    pub fn refined(&self) -> Self {
        let segments: Vec<Segment> = self
            .segments
            .iter()
            .map(|s| integrate(&s.generator, s.unitaries[0].clone(), s.start(), s.end(), 2 * s.panels()))
            .collect();
        let change = frobenius(&(segments.last().unwrap().unitaries.last().unwrap() - self.last()));
        Self { segments, n_plus: self.n_plus, refinement_change: Some(change), coarser: None }
    }

    /// Path traversed backwards over the same time interval.
    pub fn reversed(&self) -> Self {
        let (a, b) = (self.start(), self.end());
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| {
                // map s ↦ a + b − s over the whole path
                let r = s.reversed();
                let offset = (a + b) - (s.start() + s.end());
                r.shifted(offset)
            })
            .collect();
        let coarser = self.coarser.as_deref().map(|c| Arc::new(c.reversed()));
        Self { segments, n_plus: self.n_plus, refinement_change: None, coarser }
    }

    /// `self` followed by `other`, shifted in time to start at `self.end()`.
    pub fn concat(&self, other: &UnitaryPath) -> Self {
        assert_eq!(self.n_plus, other.n_plus, "concatenated paths must share a grading");
        let by = self.end() - other.start();
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().map(|s| s.shifted(by)));
        let coarser = match (self.coarser(), other.coarser()) {
            (Some(a), Some(b)) => Some(Arc::new(a.concat(b))),
            _ => None,
        };
        Self { segments, n_plus: self.n_plus, refinement_change: None, coarser }
    }

    /// Largest `‖g†g − 1‖_F` over all samples.
    pub fn max_unitarity_defect(&self) -> f64 {
        self.samples().map(|(_, u)| crate::linalg::unitarity_defect(u)).fold(0.0, f64::max)
    }

    /// `‖P₊ g P₋‖_HS` per sample.
    pub fn offdiagonal_hs(&self) -> Vec<(f64, f64)> {
        let (dim, n_plus) = (self.dim(), self.n_plus);
        self.samples().map(|(t, u)| (t, u.view((0, n_plus), (n_plus, dim - n_plus)).norm())).collect()
    }

    /// Flattened matrices as CSV rows `t,i,j,re,im` for debugging.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,i,j,re,im")?;
        for (t, u) in self.samples() {
            for i in 0..u.nrows() {
                for j in 0..u.ncols() {
                    let z = u[(i, j)];
                    writeln!(out, "{t:?},{i},{j},{:?},{:?}", z.re, z.im)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub t_end: f64,
    /// Initial number of panels.
    pub steps: usize,
    pub tol: f64,
    pub max_halvings: usize,
}

impl EvolveOptions {
    pub fn for_potential(pot: &GaugePotential) -> Self {
        Self { t_end: pot.envelope.end(), steps: 8, tol: 1e-10, max_halvings: 20 }
    }
}

/// Adaptive integration from the identity at `t = 0`: panels double until
/// the endpoint changes by less than `tol` in Frobenius norm.
pub fn evolve_adaptive(
    generator: &Generator,
    dim: usize,
    n_plus: usize,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<UnitaryPath> {
    if opts.steps < 2 {
        return Err(LabError::InvalidParameter(format!("steps must be ≥ 2, got {}", opts.steps)));
    }
    if !(opts.tol > 0.0) {
        return Err(LabError::InvalidParameter(format!("tol must be positive, got {}", opts.tol)));
    }
    let id = CMatrix::identity(dim, dim);
    let mut panels = opts.steps;
    let mut coarse = integrate(generator, id.clone(), 0.0, t_end, panels);
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_halvings {
        panels *= 2;
        let fine = integrate(generator, id.clone(), 0.0, t_end, panels);
        change = frobenius(&(fine.unitaries.last().unwrap() - coarse.unitaries.last().unwrap()));
        log::debug!("evolve: {panels} panels, endpoint change {change:.3e}");
        if change < opts.tol {
            let coarser = UnitaryPath::from_segment(coarse, n_plus);
            return Ok(UnitaryPath {
                segments: vec![fine],
                n_plus,
                refinement_change: Some(change),
                coarser: Some(Arc::new(coarser)),
            });
        }
        coarse = fine;
    }
    Err(LabError::EvolutionNotConverged { halvings: opts.max_halvings, change })
}

/// `U(t)` solving `i∂U = (D₀ + V(t))U`, `U(0) = 1`, in the grading frame.
pub fn evolve_schrodinger(model: &DiracModel, pot: &GaugePotential, opts: &EvolveOptions) -> Result<UnitaryPath> {
    if opts.t_end < pot.envelope.end() {
        return Err(LabError::InvalidParameter(format!(
            "t_end = {} ends before the interaction switches off at {}",
            opts.t_end,
            pot.envelope.end()
        )));
    }
    let ham = Arc::new(FrameHamiltonian::new(model, pot)?);
    evolve_adaptive(&Generator::Schrodinger(ham), model.dim(), model.grading().n_plus(), opts.t_end, opts)
}

/// `g(t) = e^{itD₀}U(t)` with generator `−i·V_I(t)`.
pub fn interaction_picture(path: &UnitaryPath) -> Result<UnitaryPath> {
    let segments = path
        .segments
        .iter()
        .map(|s| match &s.generator {
            Generator::Schrodinger(ham) => Ok(Segment {
                times: s.times.clone(),
                unitaries: s
                    .times
                    .iter()
                    .zip(&s.unitaries)
                    .map(|(&t, u)| crate::linalg::left_phases(u, &ham.energies, t))
                    .collect(),
                generator: Generator::Interaction(ham.clone()),
            }),
            other => Err(LabError::InvalidPath(format!("expected a Schrödinger path, found {other:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let coarser = path.coarser.as_deref().map(interaction_picture).transpose()?.map(Arc::new);
    Ok(UnitaryPath { segments, n_plus: path.n_plus, refinement_change: path.refinement_change, coarser })
}

/// Evolves and moves to the interaction picture in one go.
pub fn scattering_path(model: &DiracModel, pot: &GaugePotential, opts: &EvolveOptions) -> Result<UnitaryPath> {
    interaction_picture(&evolve_schrodinger(model, pot, opts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_antihermitian, unitarity_defect};
    use crate::model::{Boundary, Component, MomentumGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_model(nmax: usize) -> DiracModel {
        DiracModel::new(MomentumGrid::new(2.0 * std::f64::consts::PI, nmax, Boundary::Periodic).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn free_evolution_is_exact() {
        let model = small_model(4);
        let pot = GaugePotential::default_field(0.0, 1.0);
        let opts = EvolveOptions { t_end: 1.7, ..EvolveOptions::for_potential(&pot) };
        let path = evolve_schrodinger(&model, &pot, &opts).unwrap();
        assert_eq!(path.initial(), &CMatrix::identity(model.dim(), model.dim()));
        for (t, u) in path.samples() {
            let exact = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                model.dim(),
                model.energies().iter().map(|&e| C64::from_polar(1.0, -t * e)),
            ));
            assert!(frobenius(&(u - exact)) < 1e-10);
        }
        let g = interaction_picture(&path).unwrap();
        for (_, u) in g.samples() {
            assert!(frobenius(&(u - CMatrix::identity(model.dim(), model.dim()))) < 1e-10);
        }
    }

    #[test]
    fn unitarity_and_constancy_after_switch_off() {
        let model = small_model(4);
        let pot = GaugePotential::default_field(0.3, 1.0);
        let tol = 1e-10;
        let opts = EvolveOptions { t_end: 1.5, tol, ..EvolveOptions::for_potential(&pot) };
        let g = scattering_path(&model, &pot, &opts).unwrap();
        assert!(g.max_unitarity_defect() < 1e-9 * model.dim() as f64);
        let at_t = g.at(1.0);
        assert!(frobenius(&(at_t - g.last())) < 2.0 * tol);
        let opts2 = EvolveOptions { t_end: 1.0, ..opts };
        let g2 = scattering_path(&model, &pot, &opts2).unwrap();
        assert!(frobenius(&(g2.last() - g.last())) < 2.0 * tol);
    }

    #[test]
    fn fourth_order_self_convergence() {
        let model = small_model(3);
        let pot = GaugePotential::default_field(2.0, 1.0);
        let ham = Arc::new(FrameHamiltonian::new(&model, &pot).unwrap());
        let gen = Generator::Schrodinger(ham);
        let id = CMatrix::identity(model.dim(), model.dim());
        let ends: Vec<CMatrix> =
            [8, 16, 32].iter().map(|&n| integrate(&gen, id.clone(), 0.0, 1.0, n).unitaries.pop().unwrap()).collect();
        let d1 = frobenius(&(&ends[1] - &ends[0]));
        let d2 = frobenius(&(&ends[2] - &ends[1]));
        assert!(d1 / d2 > 12.0, "ratio {}", d1 / d2);
    }

    #[test]
    fn composition_over_half_intervals() {
        let model = small_model(3);
        let pot = GaugePotential::default_field(0.5, 1.0);
        let ham = Arc::new(FrameHamiltonian::new(&model, &pot).unwrap());
        let gen = Generator::Schrodinger(ham);
        let id = CMatrix::identity(model.dim(), model.dim());
        let whole = integrate(&gen, id.clone(), 0.0, 1.0, 64);
        let first = integrate(&gen, id, 0.0, 0.5, 32);
        let second = integrate(&gen, first.unitaries.last().unwrap().clone(), 0.5, 1.0, 32);
        assert!(frobenius(&(whole.unitaries.last().unwrap() - second.unitaries.last().unwrap())) < 1e-12);
    }

    #[test]
    fn interaction_step_matches_schrodinger_frame() {
        let model = small_model(3);
        let pot = GaugePotential::new(0.4, 1.0).with_mode(Component::A1, 1, C64::new(0.0, 0.3));
        let ham = Arc::new(FrameHamiltonian::new(&model, &pot).unwrap());
        let id = CMatrix::identity(model.dim(), model.dim());
        let gi = integrate(&Generator::Interaction(ham.clone()), id.clone(), 0.0, 1.0, 16);
        let us = integrate(&Generator::Schrodinger(ham.clone()), id.clone(), 0.0, 1.0, 16);
        let direct = crate::linalg::left_phases(us.unitaries.last().unwrap(), &ham.energies, 1.0);
        assert!(frobenius(&(direct - gi.unitaries.last().unwrap())) < 1e-12);
        // V_I Hermitean
        let vi = ham.interaction_potential(0.37);
        assert!(crate::linalg::hermiticity_residual(&vi) < 1e-12 * model.dim() as f64);
    }

    #[test]
    fn constant_generator_is_exact_and_reversible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_antihermitian(&mut rng, 6, 1.0);
        let path = UnitaryPath::geodesic(&x, CMatrix::identity(6, 6), 2, 3);
        let exact = crate::linalg::exp_antihermitian(&x);
        assert!(frobenius(&(path.last() - &exact)) < 1e-13);
        let back = path.reversed();
        assert_eq!(back.initial(), path.last());
        assert!(frobenius(&(back.last() - CMatrix::identity(6, 6))) < 1e-13);
        assert!((back.end() - 1.0).abs() < 1e-15);
        // stepping the reversed generator retraces the samples
        let redo = integrate(&back.segments()[0].generator, path.last().clone(), 0.0, 1.0, 2);
        assert!(frobenius(&(redo.unitaries.last().unwrap() - CMatrix::identity(6, 6))) < 1e-13);
        // velocity of the reversed path is −X·g
        let v = back.segments()[0].velocity(3);
        let g = &back.segments()[0].unitaries[3];
        assert!(frobenius(&(v + &x * g)) < 1e-13);
    }

    #[test]
    fn custom_generator_converges_to_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_antihermitian(&mut rng, 5, 1.0);
        let xc = x.clone();
        let gen = Generator::custom(move |_| xc.clone());
        let seg = integrate(&gen, CMatrix::identity(5, 5), 0.0, 1.0, 1);
        assert!(frobenius(&(seg.unitaries.last().unwrap() - crate::linalg::exp_antihermitian(&x))) < 1e-12);
    }

    #[test]
    fn gauge_generator_tracks_transformed_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_antihermitian(&mut rng, 4, 1.0);
        let k = random_antihermitian(&mut rng, 4, 0.5);
        let kc = k.clone();
        let transform = move |t: f64| {
            let r = crate::linalg::exp_antihermitian(&(&kc * real(t)));
            let rdot = &kc * &r;
            (r, rdot)
        };
        let base = UnitaryPath::geodesic(&x, CMatrix::identity(4, 4), 4, 2);
        let gen = base.segments()[0].generator.clone().gauge(transform.clone());
        let start = transform(0.0).0;
        let seg = integrate(&gen, start, 0.0, 1.0, 4);
        let expect = transform(1.0).0 * base.last();
        assert!(frobenius(&(seg.unitaries.last().unwrap() - expect)) < 1e-12);
        assert!(unitarity_defect(seg.unitaries.last().unwrap()) < 1e-13);
        // matrix form of the gauge generator: G₂ = ṘR† + R G R†
        let t = 0.3;
        let (r, _) = transform(t);
        let h = 1e-5;
        let g2 = |s: f64| transform(s).0 * crate::linalg::exp_antihermitian(&(&x * real(s)));
        let fd = (g2(t + h) - g2(t - h)) * real(0.5 / h);
        let v = gen.matrix(t) * &r * crate::linalg::exp_antihermitian(&(&x * real(t)));
        assert!(frobenius(&(fd - v)) < 1e-8);
    }

    #[test]
    fn concat_and_refine() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_antihermitian(&mut rng, 4, 1.0);
        let y = random_antihermitian(&mut rng, 4, 1.0);
        let p1 = UnitaryPath::geodesic(&x, CMatrix::identity(4, 4), 2, 2);
        let p2 = UnitaryPath::geodesic(&y, p1.last().clone(), 3, 2);
        let both = p1.concat(&p2);
        assert_eq!(both.panels(), 5);
        assert!((both.end() - 2.0).abs() < 1e-15);
        let r = both.refined();
        assert_eq!(r.panels(), 10);
        assert!(r.refinement_change.unwrap() < 1e-12);
        let mid = both.at(1.5);
        let expect = crate::linalg::exp_antihermitian(&(&y * real(0.5))) * crate::linalg::exp_antihermitian(&x);
        assert!(frobenius(&(mid - expect)) < 1e-12);
    }

    #[test]
    fn rejects_bad_options() {
        let model = small_model(2);
        let pot = GaugePotential::default_field(0.1, 1.0);
        let opts = EvolveOptions { t_end: 0.5, ..EvolveOptions::for_potential(&pot) };
        assert!(evolve_schrodinger(&model, &pot, &opts).is_err());
        let opts = EvolveOptions { steps: 1, ..EvolveOptions::for_potential(&pot) };
        assert!(evolve_schrodinger(&model, &pot, &opts).is_err());
        let opts = EvolveOptions { steps: 2, max_halvings: 1, tol: 1e-300, ..EvolveOptions::for_potential(&pot) };
        assert!(matches!(evolve_schrodinger(&model, &pot, &opts), Err(LabError::EvolutionNotConverged { .. })));
    }
}
