//! Connection, parallel transport along unitary paths, curvature and the
//! effective action.
//!
//! Along a path `g(t)` with blocks `a, b, c, d` and `g⁻¹ = g†` (blocks
//! `α = a†`, `γ = b†`) the horizontal lift `(g(t), q(t))` starting on the
//! local section satisfies `d/dt log det q = tr[a′α + b′γ]`, and the fibre
//! factor relative to the section is
//!
//! ```text
//! Φ = exp(−∫ tr[a′(α − a⁻¹) + b′γ] dt) = det(a(T) q(T)⁻¹).
//! ```

use nalgebra::DMatrix;

use crate::error::{LabError, Result};
use crate::evolve::{Generator, Segment, UnitaryPath};
use crate::linalg::{log_det, mul, trace, trace_of_product, CMatrix, LogDet, C64, ZERO};
use crate::model::Grading;
use crate::par;
use crate::polarized::{BlockedOperator, SECTION_THRESHOLD};
use crate::quadrature::{richardson, LOBATTO5_WEIGHTS};

/// Connection data at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionSample {
    pub t: f64,
    /// `tr[a′(α − a⁻¹) + b′γ]`.
    pub integrand: C64,
    /// `tr[a′α + b′γ]`.
    pub lift_rate: C64,
    /// `tr[a′a⁻¹]`.
    pub jacobi_rate: C64,
    /// Smallest singular value of `a`.
    pub condition: f64,
}

/// `tr(da·α) + tr(db·γ) − tr(dq·q⁻¹)` at the point `(g, q)` for the tangent
/// `(dg, dq)`; `g` and `dg` in the ε eigenbasis.
pub fn connection_form(g: &CMatrix, q: &CMatrix, dg: &CMatrix, dq: &CMatrix, n_plus: usize) -> Result<C64> {
    let ginv = crate::linalg::inverse(g).ok_or_else(|| LabError::InvalidParameter("g must be invertible".into()))?;
    let qinv = crate::linalg::inverse(q).ok_or_else(|| LabError::InvalidParameter("q must be invertible".into()))?;
    let inv = BlockedOperator::from_frame(&ginv, n_plus);
    let tangent = BlockedOperator::from_frame(dg, n_plus);
    Ok(trace_of_product(&tangent.a, &inv.a) + trace_of_product(&tangent.b, &inv.c) - trace_of_product(dq, &qinv))
}

fn sample(generator: &Generator, t: f64, g: &CMatrix, n_plus: usize) -> ConnectionSample {
    let n = g.nrows();
    let m = n - n_plus;
    let gen = generator.matrix(t);
    // only the H₊ rows of ġ = G·g are needed
    let top = mul(&gen.rows(0, n_plus).into_owned(), g);
    let a_dot = top.view((0, 0), (n_plus, n_plus)).into_owned();
    let b_dot = top.view((0, n_plus), (n_plus, m)).into_owned();
    let a = g.view((0, 0), (n_plus, n_plus)).into_owned();
    let b = g.view((0, n_plus), (n_plus, m)).into_owned();
    // α = a†, γ = b† for unitary g
    let lift_rate = trace_of_product(&a_dot, &a.adjoint()) + trace_of_product(&b_dot, &b.adjoint());
    let condition = crate::linalg::min_singular_value(&a);
    let jacobi_rate = if condition > 0.0 {
        match a.clone().lu().solve(&a_dot) {
            Some(x) => trace(&x),
            None => C64::new(f64::NAN, f64::NAN),
        }
    } else {
        C64::new(f64::NAN, f64::NAN)
    };
    ConnectionSample { t, integrand: lift_rate - jacobi_rate, lift_rate, jacobi_rate, condition }
}

fn segment_samples(seg: &Segment, n_plus: usize) -> Vec<ConnectionSample> {
    par::map_range(seg.times.len(), |i| sample(&seg.generator, seg.times[i], &seg.unitaries[i], n_plus))
}

/// Quadrature sums `(∫integrand, ∫lift_rate, ∫jacobi_rate)` over one segment.
fn integrate_segment(seg: &Segment, samples: &[ConnectionSample]) -> [C64; 3] {
    let mut acc = [ZERO; 3];
    for j in 0..seg.panels() {
        let width = seg.times[4 * j + 4] - seg.times[4 * j];
        for (k, w) in LOBATTO5_WEIGHTS.iter().enumerate() {
            let s = &samples[4 * j + k];
            let w = 0.5 * width * w;
            acc[0] += s.integrand * w;
            acc[1] += s.lift_rate * w;
            acc[2] += s.jacobi_rate * w;
        }
    }
    acc
}

/// One pass of the composite Lobatto rule over the path samples.
#[derive(Debug, Clone)]
pub struct TransportPass {
    pub exponent: C64,
    pub lift_exponent: C64,
    pub jacobi_exponent: C64,
    pub samples: Vec<ConnectionSample>,
    pub panels: usize,
}

impl TransportPass {
    pub fn min_condition(&self) -> f64 {
        self.samples.iter().map(|s| s.condition).fold(f64::INFINITY, f64::min)
    }
}

/// Connection integrals on the samples as they are, without refinement.
pub fn transport_pass(path: &UnitaryPath) -> Result<TransportPass> {
    let n_plus = path.n_plus();
    let mut all = Vec::new();
    let mut totals = [ZERO; 3];
    for seg in path.segments() {
        let samples = segment_samples(seg, n_plus);
        if let Some(bad) = samples.iter().find(|s| !(s.condition >= SECTION_THRESHOLD)) {
            return Err(LabError::LeftSectionDomain { t: bad.t, sigma_min: bad.condition });
        }
        let part = integrate_segment(seg, &samples);
        for (t, p) in totals.iter_mut().zip(part) {
            *t += p;
        }
        all.extend(samples);
    }
    Ok(TransportPass {
        exponent: totals[0],
        lift_exponent: totals[1],
        jacobi_exponent: totals[2],
        samples: all,
        panels: path.panels(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    /// Stop when the exponent changes by less than `rel_tol·|exponent| + abs_tol`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_doublings: usize,
    /// Convergence order of the sampled path used in the Richardson step.
    pub order: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-14, max_doublings: 6, order: 4.0 }
    }
}

/// Parallel transport along a path, refined until the exponent settles.
#[derive(Debug, Clone)]
pub struct Transport {
    /// `∫ tr[a′(α − a⁻¹) + b′γ] dt`, Richardson-corrected.
    pub exponent: C64,
    /// `∫ tr[a′α + b′γ] dt = log det q(T) − log det q(0)`.
    pub lift_exponent: C64,
    /// `∫ tr[a′a⁻¹] dt`.
    pub jacobi_exponent: C64,
    pub det_a_start: LogDet,
    pub det_a_end: LogDet,
    /// Change of the exponent at the last doubling.
    pub change: f64,
    pub panels: usize,
    pub min_condition: f64,
    /// Connection samples of the finest pass.
    pub samples: Vec<ConnectionSample>,
}

impl Transport {
    /// `exp(−∫ tr[a′(α − a⁻¹) + b′γ])`.
    pub fn parallel_phase(&self) -> C64 {
        (-self.exponent).exp()
    }

    /// `det(a(T)·q(T)⁻¹)` with `q(0) = a(0)`, `det a` by LU at both ends and
    /// `log det q` from the lift equation.
    pub fn transported_det(&self) -> C64 {
        (self.det_a_end.log() - self.det_a_start.log() - self.lift_exponent).exp()
    }

    /// `det a(T) / det a(0)` by LU.
    pub fn det_a_ratio(&self) -> C64 {
        (self.det_a_end.log() - self.det_a_start.log()).exp()
    }

    /// `exp ∫ tr[a′a⁻¹]`.
    pub fn det_a_accumulated(&self) -> C64 {
        self.jacobi_exponent.exp()
    }

    /// `|exp(−∫tr[a′α+b′γ])|`, the inverse modulus of `det q(T)`.
    pub fn lift_modulus(&self) -> f64 {
        (-self.lift_exponent.re).exp()
    }
}

/// Refines `path` by doubling its panels until the exponent converges.
pub fn transport(path: &UnitaryPath, opts: &TransportOptions) -> Result<Transport> {
    let det_a_start = log_det(&path.initial().view((0, 0), (path.n_plus(), path.n_plus())).into_owned());
    let mut current = path.clone();
    let mut passes = Vec::new();
    if let Some(c) = path.coarser() {
        passes.push(transport_pass(c)?);
    }
    passes.push(transport_pass(&current)?);
    let converged = |passes: &[TransportPass]| -> (bool, f64) {
        match passes {
            [.., prev, last] => {
                let change = (last.exponent - prev.exponent).norm();
                (change <= opts.rel_tol * last.exponent.norm() + opts.abs_tol, change)
            }
            _ => (false, f64::INFINITY),
        }
    };
    let (mut done, mut change) = converged(&passes);
    let mut doublings = 0;
    while !done && doublings < opts.max_doublings {
        current = current.refined();
        doublings += 1;
        passes.push(transport_pass(&current)?);
        (done, change) = converged(&passes);
        log::debug!("transport: {} panels, exponent change {change:.3e}", current.panels());
    }
    if !done {
        return Err(LabError::QuadratureNotConverged { doublings: opts.max_doublings, change });
    }
    let k = passes.len();
    let extrapolate = |f: fn(&TransportPass) -> C64| {
        let vals = [f(&passes[k - 2]), f(&passes[k - 1])];
        richardson(&vals, 2.0, &[opts.order]).0
    };
    let last = passes.last().unwrap();
    let det_a_end = log_det(&current.last().view((0, 0), (path.n_plus(), path.n_plus())).into_owned());
    Ok(Transport {
        exponent: extrapolate(|p| p.exponent),
        lift_exponent: extrapolate(|p| p.lift_exponent),
        jacobi_exponent: extrapolate(|p| p.jacobi_exponent),
        det_a_start,
        det_a_end,
        change,
        panels: last.panels,
        min_condition: passes.iter().map(TransportPass::min_condition).fold(f64::INFINITY, f64::min),
        samples: last.samples.clone(),
    })
}

pub fn parallel_phase(path: &UnitaryPath) -> Result<C64> {
    Ok(transport(path, &TransportOptions::default())?.parallel_phase())
}

pub fn transported_det(path: &UnitaryPath) -> Result<C64> {
    Ok(transport(path, &TransportOptions::default())?.transported_det())
}

/// `Z(A) = ⟨0|(g(T), q(T))|0⟩` of the parallel-transported endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveAction {
    pub z: C64,
    /// Continuously accumulated `log Z` (no branch cut).
    pub log_z: C64,
    pub modulus: f64,
    pub arg: f64,
}

pub fn effective_action_from(t: &Transport) -> EffectiveAction {
    let log_z = t.det_a_end.log() - t.det_a_start.log() - t.lift_exponent;
    let z = log_z.exp();
    // arg from the continuous exponent rather than the LU pivot sum
    let cont = -t.exponent;
    EffectiveAction { z, log_z: cont, modulus: z.norm(), arg: cont.im }
}

pub fn effective_action(path: &UnitaryPath) -> Result<EffectiveAction> {
    Ok(effective_action_from(&transport(path, &TransportOptions::default())?))
}

/// Both curvature evaluations at the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    /// `−tr(b_X c_Y − b_Y c_X)`.
    pub from_blocks: C64,
    /// `¼ tr(ε[ε,X][ε,Y])`.
    pub from_grading: C64,
}

impl Curvature {
    pub fn value(&self) -> C64 {
        self.from_grading
    }

    pub fn gap(&self) -> f64 {
        (self.from_blocks - self.from_grading).norm()
    }
}

/// Curvature of the connection at `g = 1` for anti-Hermitean `X, Y` given in
/// the original basis.
pub fn curvature_at_identity(x: &CMatrix, y: &CMatrix, grading: &Grading) -> Curvature {
    let n_plus = grading.n_plus();
    let bx = BlockedOperator::from_frame(&grading.to_frame(x), n_plus);
    let by = BlockedOperator::from_frame(&grading.to_frame(y), n_plus);
    let from_blocks = -(trace_of_product(&bx.b, &by.c) - trace_of_product(&by.b, &bx.c));
    let eps = grading.epsilon();
    let ex = &eps * x - x * &eps;
    let ey = &eps * y - y * &eps;
    let from_grading = trace(&(&eps * ex * ey)) * 0.25;
    let c = Curvature { from_blocks, from_grading };
    if c.gap() > 1e-12 * x.nrows() as f64 {
        log::warn!("curvature formulas disagree by {:.3e}", c.gap());
    }
    c
}

/// The square loop `1 → e^{hX} → e^{hX}e^{hY} → e^{hY} → 1` with geodesic
/// edges, `X, Y` in the ε eigenbasis.
pub fn square_loop(x: &CMatrix, y: &CMatrix, h: f64, n_plus: usize, panels: usize) -> UnitaryPath {
    let n = x.nrows();
    let hx = x * C64::new(h, 0.0);
    let hy = y * C64::new(h, 0.0);
    let ex = crate::linalg::exp_antihermitian(&hx);
    let ad = mul(&mul(&ex, &hy), &ex.adjoint());
    let e1 = UnitaryPath::geodesic(&hx, DMatrix::identity(n, n), panels, n_plus);
    let e2 = UnitaryPath::geodesic(&ad, e1.last().clone(), panels, n_plus);
    let e3 = UnitaryPath::geodesic(&(-&hx), e2.last().clone(), panels, n_plus);
    let e4 = UnitaryPath::geodesic(&(-&hy), e3.last().clone(), panels, n_plus);
    e1.concat(&e2).concat(&e3).concat(&e4)
}

/// Parallel phase `Φ(h)` around [`square_loop`]; `log Φ(h) = ω(X,Y)h² + O(h³)`.
/// The fibre element reached by the horizontal lift is `det q = Φ⁻¹`.
pub fn loop_holonomy(x: &CMatrix, y: &CMatrix, h: f64, grading: &Grading) -> Result<C64> {
    let path = square_loop(&grading.to_frame(x), &grading.to_frame(y), h, grading.n_plus(), 2);
    let opts = TransportOptions { order: 8.0, ..TransportOptions::default() };
    Ok(transport(&path, &opts)?.parallel_phase())
}

/// `log Φ(h)` without exponentiating.
pub fn loop_holonomy_log(x: &CMatrix, y: &CMatrix, h: f64, grading: &Grading) -> Result<C64> {
    let path = square_loop(&grading.to_frame(x), &grading.to_frame(y), h, grading.n_plus(), 2);
    let opts = TransportOptions { order: 8.0, ..TransportOptions::default() };
    Ok(-transport(&path, &opts)?.exponent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{scattering_path, EvolveOptions};
    use crate::linalg::{random_antihermitian, random_complex_matrix, real};
    use crate::model::{Boundary, DiracModel, GaugePotential, MomentumGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame_grading(p: usize, m: usize) -> Grading {
        let mut e = vec![1.0; p];
        e.extend(std::iter::repeat(-1.0).take(m));
        Grading::energy_frame(e)
    }

    fn zero_offdiag(x: &mut CMatrix, p: usize) {
        let n = x.nrows();
        for i in 0..p {
            for j in p..n {
                x[(i, j)] = ZERO;
                x[(j, i)] = ZERO;
            }
        }
    }

    #[test]
    fn connection_form_examples() {
        let n = 6;
        let p = 3;
        let g = CMatrix::identity(n, n);
        let q = CMatrix::identity(p, p);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dg = random_complex_matrix(&mut rng, n, n);
        let da = dg.view((0, 0), (p, p)).into_owned();
        assert!(connection_form(&g, &q, &dg, &da, p).unwrap().norm() < 1e-14);
        let dq = CMatrix::identity(p, p) * C64::new(0.0, 1.0);
        let v = connection_form(&g, &q, &CMatrix::zeros(n, n), &dq, p).unwrap();
        assert!((v - C64::new(0.0, -(p as f64))).norm() < 1e-14);
    }

    #[test]
    fn connection_form_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, p) = (6, 2);
        let g = crate::linalg::random_unitary(&mut rng, n);
        let q = CMatrix::identity(p, p) + random_complex_matrix(&mut rng, p, p) * real(0.1);
        let (dg1, dg2) = (random_complex_matrix(&mut rng, n, n), random_complex_matrix(&mut rng, n, n));
        let (dq1, dq2) = (random_complex_matrix(&mut rng, p, p), random_complex_matrix(&mut rng, p, p));
        let s = C64::new(0.3, -1.2);
        let lhs = connection_form(&g, &q, &(&dg1 + &dg2 * s), &(&dq1 + &dq2 * s), p).unwrap();
        let rhs = connection_form(&g, &q, &dg1, &dq1, p).unwrap() + connection_form(&g, &q, &dg2, &dq2, p).unwrap() * s;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn constant_and_free_paths_have_unit_phase() {
        let path = UnitaryPath::geodesic(&CMatrix::zeros(4, 4), CMatrix::identity(4, 4), 2, 2);
        let t = transport(&path, &TransportOptions::default()).unwrap();
        assert_eq!(t.parallel_phase(), C64::new(1.0, 0.0));
        assert_eq!(t.transported_det(), C64::new(1.0, 0.0));

        let model = DiracModel::new(MomentumGrid::new(2.0 * std::f64::consts::PI, 3, Boundary::Periodic).unwrap(), 1.0)
            .unwrap();
        let pot = GaugePotential::default_field(0.0, 1.0);
        let g = scattering_path(&model, &pot, &EvolveOptions::for_potential(&pot)).unwrap();
        let z = effective_action(&g).unwrap();
        assert!((z.z - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn both_routes_agree_on_small_model() {
        let model = DiracModel::new(MomentumGrid::new(2.0 * std::f64::consts::PI, 4, Boundary::Periodic).unwrap(), 1.0)
            .unwrap();
        let pot = GaugePotential::default_field(0.3, 1.0);
        let g = scattering_path(&model, &pot, &EvolveOptions::for_potential(&pot)).unwrap();
        let t = transport(&g, &TransportOptions::default()).unwrap();
        let (phase, det) = (t.parallel_phase(), t.transported_det());
        assert!((phase - det).norm() <= 1e-6 * det.norm(), "{phase} vs {det}");
        assert!((t.det_a_ratio() - t.det_a_accumulated()).norm() <= 1e-6 * t.det_a_ratio().norm());
        assert!(t.det_a_ratio().norm() <= 1.0 + 1e-12);
        assert!(det.norm() <= 1.0 + 1e-8);
        // reversal gives the reciprocal phase
        let back = transport(&g.reversed(), &TransportOptions::default()).unwrap();
        assert!((back.parallel_phase() * phase - C64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn curvature_formulas_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grading = frame_grading(4, 4);
        for _ in 0..20 {
            let x = random_antihermitian(&mut rng, 8, 1.0);
            let y = random_antihermitian(&mut rng, 8, 1.0);
            let c = curvature_at_identity(&x, &y, &grading);
            assert!(c.gap() < 1e-13, "{c:?}");
            assert!(curvature_at_identity(&x, &x, &grading).value().norm() < 1e-14);
        }
        let mut x = random_antihermitian(&mut rng, 8, 1.0);
        let mut y = random_antihermitian(&mut rng, 8, 1.0);
        zero_offdiag(&mut x, 4);
        zero_offdiag(&mut y, 4);
        assert!(curvature_at_identity(&x, &y, &grading).value().norm() < 1e-14);
    }

    #[test]
    fn holonomy_degenerate_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let grading = frame_grading(3, 3);
        let x = random_antihermitian(&mut rng, 6, 1.0);
        assert!((loop_holonomy(&x, &x, 0.05, &grading).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-10);
        let mut x = random_antihermitian(&mut rng, 6, 1.0);
        let mut y = random_antihermitian(&mut rng, 6, 1.0);
        zero_offdiag(&mut x, 3);
        zero_offdiag(&mut y, 3);
        assert!((loop_holonomy(&x, &y, 0.05, &grading).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn holonomy_is_plus_curvature_times_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grading = frame_grading(4, 4);
        let x = random_antihermitian(&mut rng, 8, 0.5);
        let y = random_antihermitian(&mut rng, 8, 0.5);
        let w = curvature_at_identity(&x, &y, &grading).value();
        let hs = [0.04, 0.02, 0.01];
        let res: Vec<f64> =
            hs.iter().map(|&h| (loop_holonomy_log(&x, &y, h, &grading).unwrap() - w * h * h).norm()).collect();
        let slope = (res[0] / res[2]).ln() / (hs[0] / hs[2]).ln();
        assert!(slope >= 2.9, "residuals {res:?} slope {slope}");
        // the opposite sign leaves a 2ωh² remainder
        let h = 0.01;
        let wrong = (loop_holonomy_log(&x, &y, h, &grading).unwrap() + w * h * h) / (h * h);
        assert!((wrong - w * 2.0).norm() < 0.05 * w.norm());
    }

    #[test]
    fn leaving_the_section_is_an_error() {
        // rotate H₊ fully into H₋: a(t) = cos(t)·1 hits zero at t = π/2
        let n = 2;
        let mut x = CMatrix::zeros(n, n);
        x[(0, 1)] = real(-std::f64::consts::PI / 2.0);
        x[(1, 0)] = real(std::f64::consts::PI / 2.0);
        let path = UnitaryPath::geodesic(&x, CMatrix::identity(n, n), 2, 1);
        assert!(matches!(transport(&path, &TransportOptions::default()), Err(LabError::LeftSectionDomain { .. })));
    }
}
