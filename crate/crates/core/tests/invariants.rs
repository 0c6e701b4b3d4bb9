use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use somor::aaa::{aaa_fit, case_c_expansion};
use somor::balance::{first_order_realize, gramian_factors, sobt, sobt_bases, SobtVariant};
use somor::interp::{hz_to_shift, presample, soar_basis, BasisSide, Strategy};
use somor::linalg::{c, lyapunov_dense, max_abs, max_abs_imag, qr_pivoted, solve_linear, RMat, RANK_TOL};
use somor::metrics::{linf_rel_error, morscore, sweep, ErrorCurve, FrequencyGrid};
use somor::reduce::{project, ProjectionPair, ProjectionVariant};
use somor::select::{avg_compress, equi_frequencies_total, greedy_linf, minrel_compress, realify, GreedyOptions};
use somor::synthetic::{generate_synthetic, SyntheticKind, SyntheticModelSpec};
use somor::{CMat, Execution, Operator, StructuredSystem, C64};

fn chain(n: usize, seed: u64) -> StructuredSystem {
    let spec = SyntheticModelSpec::new(SyntheticKind::ChainARayleigh { alpha: 0.5, beta: 1e-5 }, n, seed);
    generate_synthetic(&spec).unwrap()
}

fn random_complex(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CMat {
    CMat::from_fn(n, m, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Least-squares residual of expressing `v` in the span of `a`.
fn span_residual(a: &CMat, v: &CMat) -> f64 {
    let q = qr_pivoted(a, RANK_TOL).range_basis();
    (v - &q * (q.adjoint() * v)).norm() / v.norm()
}

fn grid_error(sys: &StructuredSystem, rom: &somor::reduce::ReducedModel, grid: &FrequencyGrid) -> f64 {
    linf_rel_error(&sweep(sys, grid), &sweep(rom, grid)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transfer_solves_assembled_operator(seed in 0u64..1000, f in 1.0f64..100.0) {
        let sys = chain(12, seed);
        let s = hz_to_shift(f);
        let k = sys.assemble_operator(s).unwrap();
        let b = sys.assemble_input(s).unwrap();
        let x = solve_linear(&k, &b).unwrap();
        prop_assert!((&k * &x - &b).norm() <= 1e-10 * b.norm());
        let h = sys.eval_transfer(s).unwrap();
        prop_assert!((h - &sys.output * x).norm() <= 1e-12 * (&sys.output * solve_linear(&k, &b).unwrap()).norm());
    }

    #[test]
    fn assembly_is_linear_in_each_term(seed in 0u64..1000, f in 1.0f64..100.0) {
        let sys = chain(8, seed);
        let s = hz_to_shift(f);
        let base = sys.assemble_operator(s).unwrap();
        let mut doubled = sys.clone();
        let term = doubled.terms_mut(Operator::Stiffness)[0].clone();
        doubled.terms_mut(Operator::Stiffness)[0].matrix = &term.matrix * c(2.0, 0.0);
        let twice = doubled.assemble_operator(s).unwrap();
        prop_assert!((twice - base - &term.matrix).norm() <= 1e-13 * term.matrix.norm());
    }

    #[test]
    fn solve_linear_residual(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..12);
        let a = random_complex(&mut rng, n, n) + CMat::identity(n, n) * c(n as f64, 0.0);
        let b = random_complex(&mut rng, n, 2);
        let x = solve_linear(&a, &b).unwrap();
        prop_assert!((&a * x - &b).norm() <= 1e-12 * (a.norm() * b.norm()).max(1.0));
    }

    #[test]
    fn pivoted_qr_is_orthonormal_and_ordered(seed in 0u64..10_000, n in 2usize..12, q in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_complex(&mut rng, n, q);
        let f = qr_pivoted(&a, RANK_TOL);
        let k = f.q.ncols();
        prop_assert!((f.q.adjoint() * &f.q - CMat::identity(k, k)).camax() < 1e-12);
        for i in 1..k {
            prop_assert!(f.r[(i, i)].norm() <= f.r[(i - 1, i - 1)].norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lyapunov_solution_is_psd(seed in 0u64..1000) {
        let sys = chain(6, seed);
        let fo = first_order_realize(&sys).unwrap();
        let p = lyapunov_dense(&fo.a, &fo.e, &fo.b).unwrap();
        let eig = p.clone().symmetric_eigen().eigenvalues;
        let top = eig.iter().fold(0.0f64, |m, &x| m.max(x));
        prop_assert!(eig.iter().all(|&x| x >= -1e-10 * top));
    }

    #[test]
    fn soar_is_orthonormal_and_contains_first_direction(seed in 0u64..1000, f in 5.0f64..90.0, r in 1usize..8) {
        let sys = chain(20, seed);
        let s0 = hz_to_shift(f);
        let v = soar_basis(&sys, s0, r).unwrap().basis;
        let k = v.ncols();
        prop_assert!((v.adjoint() * &v - CMat::identity(k, k)).camax() < 1e-12);
        let x = solve_linear(&sys.assemble_operator(s0).unwrap(), &sys.assemble_input(s0).unwrap()).unwrap();
        prop_assert!((&x - &v * (v.adjoint() * &x)).norm() <= 1e-10 * x.norm());
    }

    #[test]
    fn aaa_interpolates_support_points(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rng.gen_range(50.0..500.0);
        let samples: Vec<(C64, C64)> = (0..80)
            .map(|i| {
                let s = c(0.0, 10.0 + 10.0 * i as f64);
                (s, c(1.0, 0.0) / (s + c(a, 0.0)) + (c(1.0, 0.0) + s / 300.0).sqrt())
            })
            .collect();
        let apx = aaa_fit(&samples, 1e-12, 40).unwrap();
        for (z, f) in apx.support.iter().zip(&apx.values) {
            prop_assert_eq!(apx.eval(*z), *f);
        }
        let s0 = c(0.0, 455.0);
        let real = apx.to_matrix_realization(s0).unwrap();
        for k in 0..40 {
            let s = c(0.0, 12.5 + 20.0 * k as f64);
            let b = apx.eval(s);
            prop_assert!((real.eval(s).unwrap() - b).norm() <= 1e-12 * b.norm());
        }
    }

    #[test]
    fn compressions_stay_in_presample_span(seed in 0u64..1000, r in 1usize..8) {
        let sys = chain(20, seed);
        let shifts: Vec<C64> = [5.0, 20.0, 35.0, 50.0, 65.0, 80.0].iter().map(|&f| hz_to_shift(f)).collect();
        let pre = presample(&sys, Strategy::Sp { order: 1 }, &shifts, BasisSide::Right, Execution::Sequential).unwrap();
        for v in [avg_compress(&pre, r).unwrap().v, minrel_compress(&pre, r).unwrap().v] {
            prop_assert_eq!(v.ncols(), r);
            prop_assert!(span_residual(&pre.columns, &v) < 1e-12);
        }
    }

    #[test]
    fn realify_is_real_and_orthonormal(seed in 0u64..10_000, n in 4usize..15, r in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_complex(&mut rng, n, r);
        let q = realify(&v);
        let k = q.ncols();
        prop_assert!(k <= 2 * r);
        prop_assert_eq!(max_abs_imag(&q), 0.0);
        prop_assert!((q.adjoint() * &q - CMat::identity(k, k)).camax() < 1e-12);
        prop_assert!(span_residual(&q, &v) < 1e-12);
    }

    #[test]
    fn equi_takes_leading_extras(extra in prop::collection::vec(1.0f64..100.0, 1..8), total in 1usize..12) {
        let got = equi_frequencies_total(1.0, 100.0, total, &extra).unwrap();
        prop_assert_eq!(got.len(), total);
        let k = total.min(extra.len());
        prop_assert_eq!(&got[..k], &extra[..k]);
    }

    #[test]
    fn projection_formula_and_real_reduction(seed in 0u64..1000, f in 2.0f64..90.0) {
        let sys = chain(15, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_complex(&mut rng, 15, 4);
        let pair = ProjectionPair::from_variant(ProjectionVariant::Tsreal, Some(&v), Some(&random_complex(&mut rng, 15, 4))).unwrap();
        let rom = project(&sys, &pair).unwrap();
        prop_assert!(rom.imaginary_ratio() <= 1e-13);
        let s = hz_to_shift(f);
        let kr = pair.w.adjoint() * sys.assemble_operator(s).unwrap() * &pair.v;
        let fr = pair.w.adjoint() * sys.assemble_input(s).unwrap();
        let direct = &sys.output * &pair.v * solve_linear(&kr, &fr).unwrap();
        let h = rom.eval(s).unwrap();
        prop_assert!((h - &direct).norm() <= 1e-10 * direct.norm());
    }

    #[test]
    fn enlarging_within_span_keeps_rom(seed in 0u64..1000) {
        let sys = chain(15, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_complex(&mut rng, 15, 4);
        let mut wide = CMat::zeros(15, 6);
        wide.columns_mut(0, 4).copy_from(&v);
        wide.set_column(4, &(v.column(0) + v.column(2) * c(0.5, -1.0)));
        wide.set_column(5, &(v.column(1) * c(2.0, 0.0)));
        let grid = FrequencyGrid::linspace_hz(1.0, 100.0, 25).unwrap();
        let a = project(&sys, &ProjectionPair::galerkin(&v)).unwrap();
        let b = project(&sys, &ProjectionPair::galerkin(&wide)).unwrap();
        prop_assert_eq!(a.order(), b.order());
        prop_assert!(linf_rel_error(&sweep(&a, &grid), &sweep(&b, &grid)).unwrap() < 1e-10);
    }

    #[test]
    fn morscore_range_and_identity(errs in prop::collection::vec(0.0f64..10.0, 1..30)) {
        let pairs: Vec<(usize, f64)> = errs.iter().enumerate().map(|(i, &e)| (i + 1, e)).collect();
        let s = morscore(&ErrorCurve::from_pairs(&pairs).unwrap(), 1e-8, 30).unwrap().score;
        prop_assert!((0.0..=1.0).contains(&s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn balanced_truncation_algebra(seed in 0u64..1000, r in 2usize..8) {
        let sys = chain(12, seed);
        let fo = first_order_realize(&sys).unwrap();
        let g = gramian_factors(&fo, Execution::Sequential).unwrap();
        for v in [SobtVariant::V, SobtVariant::Vpm, SobtVariant::Pm, SobtVariant::Pv] {
            let (w, vv, k) = sobt_bases(&fo, &g, v, r).unwrap();
            prop_assert!((w.transpose() * &fo.mass * vv - RMat::identity(k, k)).amax() < 1e-10);
        }
        let (w, v, _) = sobt_bases(&fo, &g, SobtVariant::Fv, r).unwrap();
        prop_assert_eq!(w, v);
        for v in SobtVariant::ALL {
            let rom = sobt(&sys, &fo, &g, v, r).unwrap();
            prop_assert_eq!(rom.imaginary_ratio(), 0.0);
        }
    }

    #[test]
    fn greedy_error_never_increases(seed in 0u64..1000) {
        let spec = SyntheticModelSpec::new(SyntheticKind::ChainARayleigh { alpha: 0.5, beta: 1e-5 }, 24, seed).with_tva(1, 48.0);
        let sys = generate_synthetic(&spec).unwrap();
        let grid = FrequencyGrid::linspace_hz(1.0, 100.0, 60).unwrap();
        let fom = sweep(&sys, &grid);
        let shifts: Vec<C64> = grid.points().into_iter().step_by(3).collect();
        let right = presample(&sys, Strategy::Standard, &shifts, BasisSide::Right, Execution::Sequential).unwrap();
        let left = presample(&sys, Strategy::Standard, &shifts, BasisSide::Left, Execution::Sequential).unwrap();
        let opts = GreedyOptions { variant: ProjectionVariant::Tsimag, r_target: 10, tol: 0.0, exec: Execution::Sequential };
        let (sel, rom) = greedy_linf(&sys, &grid, &fom, &right, Some(&left), opts).unwrap();
        for w in sel.history.windows(2) {
            prop_assert!(w[1].error <= w[0].error + 1e-12);
        }
        let last = sel.history.last().unwrap().error;
        prop_assert!((grid_error(&sys, &rom, &grid) - last).abs() <= 1e-14);
    }
}

#[test]
fn rom_equal_to_fom_has_zero_error() {
    let sys = chain(10, 1);
    let grid = FrequencyGrid::linspace_hz(1.0, 100.0, 30).unwrap();
    assert_eq!(linf_rel_error(&sweep(&sys, &grid), &sweep(&sys, &grid)).unwrap(), 0.0);
}

#[test]
fn undamped_chain_has_zero_damping() {
    let spec = SyntheticModelSpec::new(SyntheticKind::ChainARayleigh { alpha: 0.0, beta: 0.0 }, 10, 3);
    let sys = generate_synthetic(&spec).unwrap();
    for term in sys.terms(Operator::Damping) {
        assert_eq!(max_abs(&term.matrix), 0.0);
    }
}

#[test]
fn zero_functions_reduce_case_c_to_second_order_series() {
    let spec = SyntheticModelSpec::new(SyntheticKind::ChainC { k: 2, alpha: 0.5, beta: 1e-5 }, 10, 4);
    let mut sys = generate_synthetic(&spec).unwrap();
    let zero = aaa_fit(&[(c(0.0, 1.0), c(0.0, 0.0)), (c(0.0, 2.0), c(0.0, 0.0))], 1e-12, 4).unwrap();
    let realizations: BTreeMap<_, _> = sys
        .functions
        .keys()
        .map(|id| (id.clone(), zero.to_matrix_realization(c(0.0, 300.0)).unwrap()))
        .collect();
    let s0 = c(0.0, 300.0);
    let exp = case_c_expansion(&sys, &realizations, s0, 4).unwrap();
    sys.nonlinear.clear();
    sys.functions.clear();
    let m = sys.constant_operator(Operator::Mass).unwrap();
    let cc = sys.constant_operator(Operator::Damping).unwrap();
    let k = sys.constant_operator(Operator::Stiffness).unwrap();
    let expect = [
        &m * (s0 * s0) + &cc * s0 + &k,
        &m * (s0 * 2.0) + &cc,
        m.clone(),
        CMat::zeros(10, 10),
        CMat::zeros(10, 10),
    ];
    for (got, want) in exp.k.iter().zip(&expect) {
        assert_eq!(got, want);
    }
}

#[test]
fn sequential_and_parallel_execution_agree() {
    let sys = chain(40, 2);
    let grid = FrequencyGrid::linspace_hz(1.0, 100.0, 50).unwrap();
    let a = somor::metrics::sweep_with(&sys, &grid, Execution::Sequential);
    let b = somor::metrics::sweep_with(&sys, &grid, Execution::Parallel);
    assert_eq!(a.norms(), b.norms());
    let shifts: Vec<C64> = [10.0, 40.0, 70.0].iter().map(|&f| hz_to_shift(f)).collect();
    let p = presample(&sys, Strategy::Soa { k: 4 }, &shifts, BasisSide::Right, Execution::Sequential).unwrap();
    let q = presample(&sys, Strategy::Soa { k: 4 }, &shifts, BasisSide::Right, Execution::Parallel).unwrap();
    assert_eq!(p.columns, q.columns);
}
