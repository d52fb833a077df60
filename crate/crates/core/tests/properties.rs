use phaselab::evolve::UnitaryPath;
use phaselab::lab::{Config, Format, ReportBundle, Table, Verdict};
use phaselab::linalg::{
    frobenius, mul, random_antihermitian, random_complex_matrix, random_unitary, real, CMatrix, C64,
};
use phaselab::model::{build_potential, Boundary, Component, DiracModel, GaugePotential, Grading, MomentumGrid};
use phaselab::polarized::block_decompose;
use phaselab::symbolic::{spinor_lattice_matrix, weighted_trace_split, zeta_trace, ClassicalSymbol, Remainder};
use phaselab::transport::{curvature_at_identity, transport, TransportOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Periodic), Just(Boundary::Antiperiodic)]
}

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn frame_grading(dim: usize) -> Grading {
    Grading::energy_frame((0..dim).map(|i| if i < dim / 2 { 1.0 } else { -1.0 }).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn free_hamiltonian_is_hermitian_with_paired_spectrum(
        nmax in 1usize..7, mass in 0.0..3.0f64, b in boundary(), length in 1.0..10.0f64,
    ) {
        prop_assume!(!(mass == 0.0 && b == Boundary::Periodic));
        let model = DiracModel::new(MomentumGrid::new(length, nmax, b).unwrap(), mass).unwrap();
        let d0 = model.free_hamiltonian().matrix();
        prop_assert!(frobenius(&(d0 - d0.adjoint())) == 0.0);
        let mut e = model.energies().to_vec();
        e.sort_by(f64::total_cmp);
        for (a, z) in e.iter().zip(e.iter().rev()) {
            prop_assert!((a + z).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        let eps = model.grading().epsilon();
        let comm = mul(&eps, d0) - mul(d0, &eps);
        prop_assert!(frobenius(&comm) <= 1e-12 * model.dim() as f64);
    }

    #[test]
    fn potential_is_linear_in_modes_and_coupling(
        a in complex(), b in complex(), c in complex(), lambda in 0.01..2.0f64, t in 0.05..0.95f64,
    ) {
        let grid = MomentumGrid::new(2.0 * std::f64::consts::PI, 5, Boundary::Periodic).unwrap();
        let p = GaugePotential::new(1.0, 1.0).with_mode(Component::A0, 1, a).with_mode(Component::A1, 2, b);
        let q = GaugePotential::new(1.0, 1.0).with_mode(Component::A0, 1, c);
        let sum = GaugePotential::new(1.0, 1.0).with_mode(Component::A0, 1, a + c).with_mode(Component::A1, 2, b);
        let vp = build_potential(&grid, &p, t).unwrap().into_inner();
        let vq = build_potential(&grid, &q, t).unwrap().into_inner();
        let vs = build_potential(&grid, &sum, t).unwrap().into_inner();
        let scale = 1.0 + frobenius(&vs);
        prop_assert!(frobenius(&(&vp + &vq - &vs)) <= 1e-12 * scale);
        let vl = build_potential(&grid, &p.with_coupling(lambda), t).unwrap().into_inner();
        prop_assert!(frobenius(&(vl - vp * real(lambda))) <= 1e-12 * scale * lambda.max(1.0));
    }

    #[test]
    fn unitary_blocks_satisfy_relations(seed in any::<u64>(), n_plus in 1usize..6, n_minus in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = n_plus + n_minus;
        let g = random_unitary(&mut rng, dim);
        let grading = Grading::energy_frame((0..dim).map(|i| if i < n_plus { 1.0 } else { -1.0 }).collect());
        let blocks = block_decompose(&g, &grading);
        for r in blocks.unitarity_residuals() {
            prop_assert!(r <= 1e-10 * dim as f64);
        }
        prop_assert_eq!(blocks.reassemble(), g);
    }

    #[test]
    fn curvature_formulas_agree(seed in any::<u64>(), half in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 2 * half;
        let x = random_antihermitian(&mut rng, dim, 1.0);
        let y = random_antihermitian(&mut rng, dim, 1.0);
        let g = frame_grading(dim);
        let c = curvature_at_identity(&x, &y, &g);
        prop_assert!(c.gap() <= 1e-12 * dim as f64);
        let swapped = curvature_at_identity(&y, &x, &g).value();
        prop_assert!((c.value() + swapped).norm() <= 1e-12 * dim as f64);
    }

    #[test]
    fn zeta_trace_is_linear(
        a in complex(), b in complex(), c0 in complex(), c1 in complex(), amp in complex(), width in 0.5..4.0f64,
    ) {
        let grid = MomentumGrid::new(2.0 * std::f64::consts::PI, 6, Boundary::Periodic).unwrap();
        let s = ClassicalSymbol::pure(-1, vec![(c0, c1), (c1, c0)], grid.clone()).unwrap();
        let t = ClassicalSymbol::new(-2, vec![(c1, c0)], Remainder::Gaussian { amp, width }, grid).unwrap();
        let combined = s.linear_combination(a, &t, b).unwrap();
        let lhs = zeta_trace(&combined, 0.0).unwrap();
        let rhs = a * zeta_trace(&s, 0.0).unwrap() + b * zeta_trace(&t, 0.0).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn trace_class_symbols_match_plain_sums(amp in complex(), scale in 0.5..1.0f64, b in boundary(), nmax in 4usize..12) {
        let grid = MomentumGrid::new(2.0 * std::f64::consts::PI, nmax, b).unwrap();
        let s = ClassicalSymbol::new(-2, Vec::new(), Remainder::Rational { amp, scale, power: 4.0 }, grid).unwrap();
        let z = zeta_trace(&s, 1.0).unwrap();
        let plain = s.plain_sum();
        prop_assert!((z - plain).norm() <= 1e-8 * (1.0 + plain.norm()));
    }

    #[test]
    fn resplitting_keeps_the_total(seed in any::<u64>(), amp in complex(), width in 0.3..1.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = DiracModel::new(MomentumGrid::new(2.0 * std::f64::consts::PI, 4, Boundary::Periodic).unwrap(), 1.0).unwrap();
        let grid = model.grid().clone();
        let x = ClassicalSymbol::pure(-1, vec![(real(1.0), real(0.5))], grid.clone()).unwrap();
        let y: CMatrix = random_complex_matrix(&mut rng, model.dim(), model.dim());
        let delta = ClassicalSymbol::new(-2, Vec::new(), Remainder::Gaussian { amp, width }, grid).unwrap();
        let before = weighted_trace_split(&x, &y, &model).unwrap();
        let x2 = x.linear_combination(real(1.0), &delta, real(-1.0)).unwrap();
        let y2 = &y + spinor_lattice_matrix(&delta);
        let after = weighted_trace_split(&x2, &y2, &model).unwrap();
        prop_assert!((before - after).norm() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn reversed_paths_give_reciprocal_phase(seed in any::<u64>(), scale in 0.05..0.4f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 6;
        let x = random_antihermitian(&mut rng, dim, scale);
        let path = UnitaryPath::geodesic(&x, phaselab::linalg::identity(dim), 8, dim / 2);
        let opts = TransportOptions::default();
        let fwd = transport(&path, &opts).unwrap().parallel_phase();
        let back = transport(&path.reversed(), &opts).unwrap().parallel_phase();
        prop_assert!((fwd * back - real(1.0)).norm() <= 1e-8);
    }

    #[test]
    fn config_echo_round_trips(nmax in 1usize..64, mass in 0.1..5.0f64, seed in any::<u64>(), tol in 1e-12..1e-6f64) {
        let mut cfg = Config::default();
        cfg.nmax = nmax;
        cfg.mass = mass;
        cfg.seed = seed;
        cfg.tol = tol;
        let back = Config::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back.echo(), cfg.echo());
    }

    #[test]
    fn json_reports_round_trip(values in prop::collection::vec(any::<f64>(), 0..6), z in complex(), pass in any::<bool>()) {
        let mut b = ReportBundle::new("unitarity", Config::default().echo());
        let mut t = Table::new("samples", &["x", "z"]);
        for v in &values {
            t.push(vec![(*v).into(), z.into()]);
        }
        b.tables.push(t);
        b.verdicts.push(Verdict::at_most("v", values.first().copied().unwrap_or(0.0), if pass { f64::INFINITY } else { -1.0 }));
        let back = ReportBundle::from_json(&b.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), b.to_json());
        prop_assert_eq!(back.csv_documents(), b.csv_documents());
        prop_assert!("json".parse::<Format>().is_ok());
    }
}
