use proptest::prelude::*;

use werner_core::analysis::{chsh_value, concurrence, fidelity, fit_werner, linear_entropy, ChshAngles};
use werner_core::decoherence::{dephase_single, gamma, gamma_abs, BirefringentElement, DephasingBasis, Spectrum};
use werner_core::optimize::NelderMeadOptions;
use werner_core::polarimetry::{
    born_probability, correlation_e, simulate_counts, tomographic_settings, AnalyzerSetting, Measurements, PolSpec,
};
use werner_core::qlinalg::{herm_eig, kron, psd_sqrt, CMatrix};
use werner_core::states::{
    local_unitary, mix, sigma_x, werner_phi_minus, werner_singlet, BellKind, DensityMatrix, QubitState, SourceConfig,
};
use werner_core::tomography::{linear_reconstruct, mle_reconstruct, MleOptions};
use werner_core::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn complex_matrix(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(-1.0..1.0f64, 2 * n * n)
        .prop_map(move |v| CMatrix::from_fn(n, n, |i, j| c(v[2 * (i * n + j)], v[2 * (i * n + j) + 1])))
}

fn hermitian4() -> impl Strategy<Value = CMatrix> {
    complex_matrix(4).prop_map(|g| g.hermitian_part())
}

/// ρ = G G† / Tr, full rank almost surely.
fn state() -> impl Strategy<Value = DensityMatrix> {
    complex_matrix(4).prop_map(|g| {
        let m = &g * &g.adjoint();
        let tr = m.trace().re;
        DensityMatrix::new(m.scale_real(1.0 / tr)).unwrap()
    })
}

fn qubit_state() -> impl Strategy<Value = QubitState> {
    complex_matrix(2).prop_map(|g| {
        let m = &g * &g.adjoint();
        let tr = m.trace().re;
        QubitState::new(m.scale_real(1.0 / tr)).unwrap()
    })
}

/// e^{iδ} Rz(a) Ry(b) Rz(c).
fn unitary2() -> impl Strategy<Value = CMatrix> {
    (-3.2..3.2f64, -3.2..3.2f64, -3.2..3.2f64, -3.2..3.2f64).prop_map(|(a, b, cc, d)| {
        let rz = |t: f64| {
            CMatrix::from_rows(&[[c(0.0, -t / 2.0).exp(), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, t / 2.0).exp()]]).unwrap()
        };
        let (s, co) = (b / 2.0).sin_cos();
        let ry = CMatrix::from_real(2, 2, &[co, -s, s, co]).unwrap();
        (&(&rz(a) * &ry) * &rz(cc)).scale(c(0.0, d).exp())
    })
}

fn frob(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).frobenius_norm()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #[test]
    fn eigendecomposition_reconstructs(h in hermitian4()) {
        let e = herm_eig(&h).unwrap();
        prop_assert!(frob(&e.reconstruct(), &h) < 1e-10);
        let v = &e.eigenvectors;
        prop_assert!(frob(&(&v.adjoint() * v), &CMatrix::identity(4)) < 1e-10);
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn psd_sqrt_squares_back(g in complex_matrix(4)) {
        let h = &g.adjoint() * &g;
        let r = psd_sqrt(&h, 1e-9).unwrap();
        prop_assert!(frob(&(&r * &r), &h) < 1e-8);
    }

    #[test]
    fn kron_is_associative(a in complex_matrix(2), b in complex_matrix(2), d in complex_matrix(2)) {
        prop_assert!(frob(&kron(&kron(&a, &b), &d), &kron(&a, &kron(&b, &d))) < 1e-12);
    }

    #[test]
    fn werner_constructors_are_states(x in -1.0 / 3.0..=1.0f64, f in 0.0..=1.0f64) {
        for rho in [werner_phi_minus(x).unwrap(), werner_singlet(f).unwrap()] {
            let m = rho.matrix();
            prop_assert!(m.hermiticity_error() < 1e-12);
            prop_assert!((m.trace().re - 1.0).abs() < 1e-12);
            prop_assert!(rho.eigen().min_eigenvalue() > -1e-12);
        }
    }

    #[test]
    fn werner_phi_minus_spectrum(x in -1.0 / 3.0..=1.0f64) {
        let got = sorted(werner_phi_minus(x).unwrap().eigenvalues());
        let q = (1.0 - x) / 4.0;
        let want = sorted(vec![(1.0 + 3.0 * x) / 4.0, q, q, q]);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn local_unitary_preserves_invariants(rho in state(), ua in unitary2(), ub in unitary2()) {
        let out = local_unitary(&rho, &ua, &ub).unwrap();
        prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-8);
        let (a, b) = (sorted(rho.eigenvalues()), sorted(out.eigenvalues()));
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-8));
        prop_assert!((concurrence(&rho).unwrap() - concurrence(&out).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn mix_is_affine(a in state(), b in state(), p in 0.0..=1.0f64) {
        let lhs = mix(&a, &b, p).unwrap().matrix() + mix(&a, &b, 1.0 - p).unwrap().matrix();
        prop_assert!((&lhs - &(a.matrix() + b.matrix())).max_abs() < 1e-12);
    }

    #[test]
    fn born_probabilities_of_orthogonal_quadruple_sum_to_one(rho in state(), t1 in -180.0..180.0f64, t2 in -180.0..180.0f64, circ in any::<bool>()) {
        let a1 = if circ { PolSpec::R } else { PolSpec::Angle(t1) };
        let a2 = PolSpec::Angle(t2);
        let total: f64 = [(a1, a2), (a1.orthogonal(), a2), (a1, a2.orthogonal()), (a1.orthogonal(), a2.orthogonal())]
            .iter()
            .map(|&(x, y)| born_probability(&rho, &AnalyzerSetting::new(x, y)))
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn correlation_is_bounded(n in prop::array::uniform4(0.0..1e6f64)) {
        prop_assume!(n.iter().sum::<f64>() > 0.0);
        let e = correlation_e(n).unwrap();
        prop_assert!((-1.0..=1.0).contains(&e));
    }

    #[test]
    fn simulation_is_seed_deterministic(rho in state(), seed in any::<u64>()) {
        let cfg = SourceConfig { seed, ..Default::default() };
        let a = simulate_counts(&rho, &tomographic_settings(), &cfg).unwrap();
        let b = simulate_counts(&rho, &tomographic_settings(), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fidelity_is_symmetric(a in state(), b in state()) {
        let (fab, fba) = (fidelity(&a, &b).unwrap(), fidelity(&b, &a).unwrap());
        prop_assert!((fab - fba).abs() < 1e-8);
        prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn linear_entropy_falls_as_state_is_unmixed(rho in state()) {
        let white = DensityMatrix::maximally_mixed();
        let values: Vec<f64> = (0..=20).map(|i| linear_entropy(&mix(&rho, &white, i as f64 / 20.0).unwrap())).collect();
        prop_assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn gamma_magnitude_bounded(lambda0 in 300.0..1600.0f64, rel_width in 1e-4..0.5f64, waves in 0.0..2000.0f64) {
        let s = Spectrum::rectangular(lambda0, rel_width * lambda0).unwrap();
        let g = gamma_abs(&s, &BirefringentElement::in_waves(waves, &s).unwrap()).unwrap();
        prop_assert!(g <= 1.0 + 1e-15);
        if waves > 1e-6 {
            prop_assert!(g < 1.0);
        }
    }

    #[test]
    fn dephasing_preserves_state(rho in qubit_state(), mag in 0.0..=1.0f64, phase in -3.2..3.2f64, diag in any::<bool>()) {
        let basis = if diag { DephasingBasis::Diagonal } else { DephasingBasis::Rectilinear };
        let out = dephase_single(&rho, Complex64::from_polar(mag, phase), basis).unwrap();
        let m = out.matrix();
        prop_assert!(m.hermiticity_error() < 1e-15);
        prop_assert!((m.trace().re - 1.0).abs() < 1e-15);
        for l in herm_eig(m).unwrap().eigenvalues {
            prop_assert!((-1e-10..=1.0 + 1e-10).contains(&l));
        }
    }

    #[test]
    fn dephasing_composes(rho in qubit_state(), g1 in (0.0..=1.0f64, -3.2..3.2f64), g2 in (0.0..=1.0f64, -3.2..3.2f64), diag in any::<bool>()) {
        let basis = if diag { DephasingBasis::Diagonal } else { DephasingBasis::Rectilinear };
        let (a, b) = (Complex64::from_polar(g1.0, g1.1), Complex64::from_polar(g2.0, g2.1));
        let two = dephase_single(&dephase_single(&rho, a, basis).unwrap(), b, basis).unwrap();
        let one = dephase_single(&rho, a * b, basis).unwrap();
        prop_assert!((two.matrix() - one.matrix()).max_abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mle_output_is_always_a_state(counts in prop::collection::vec(0u32..3000, 16)) {
        let mut counts: Vec<f64> = counts.into_iter().map(f64::from).collect();
        counts[0] += 1.0;
        let data = Measurements::new(tomographic_settings(), counts).unwrap();
        let rho = mle_reconstruct(&data, None, &MleOptions::default()).unwrap().rho;
        let m = rho.matrix();
        prop_assert!(m.hermiticity_error() < 1e-12);
        prop_assert!((m.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(rho.eigen().min_eigenvalue() >= -1e-12);
    }

    #[test]
    fn linear_and_mle_agree_on_exact_data(rho in state()) {
        let data = Measurements::expected(&rho, &tomographic_settings(), &SourceConfig { accidental_rate: 0.0, ..Default::default() }).unwrap();
        let lin = linear_reconstruct(&data).unwrap();
        let mle = mle_reconstruct(&data, None, &MleOptions::default()).unwrap();
        prop_assert!(frob(&lin.matrix, rho.matrix()) < 1e-9);
        prop_assert!(frob(&lin.matrix, mle.rho.matrix()) < 1e-6, "{}", frob(&lin.matrix, mle.rho.matrix()));
    }

    #[test]
    fn mle_objective_never_increases(rho in state(), seed in 0u64..1000) {
        let cfg = SourceConfig { seed, ..Default::default() };
        let data = Measurements::from_records(&simulate_counts(&rho, &tomographic_settings(), &cfg).unwrap()).unwrap();
        let opts = MleOptions { optimizer: NelderMeadOptions { record_trace: true, ..Default::default() }, ..Default::default() };
        let r = mle_reconstruct(&data, None, &opts).unwrap();
        prop_assert!(!r.cost_trace.is_empty());
        prop_assert!(r.cost_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn reconstruction_is_scale_invariant(rho in state(), seed in 0u64..1000, k in 2u32..6) {
        let cfg = SourceConfig { seed, ..Default::default() };
        let data = Measurements::from_records(&simulate_counts(&rho, &tomographic_settings(), &cfg).unwrap()).unwrap();
        let scaled = data.scaled(f64::from(k));
        let opts = MleOptions::default();
        let a = mle_reconstruct(&data, None, &opts).unwrap().rho;
        let b = mle_reconstruct(&scaled, None, &opts).unwrap().rho;
        prop_assert!(frob(a.matrix(), b.matrix()) < 1e-9);
        let (la, lb) = (linear_reconstruct(&data).unwrap(), linear_reconstruct(&scaled).unwrap());
        prop_assert!(frob(&la.matrix, &lb.matrix) < 1e-9);
    }

    #[test]
    fn werner_fit_is_invariant_under_bit_flip(x in 0.0..=1.0f64) {
        let flipped = local_unitary(&werner_phi_minus(x).unwrap(), &sigma_x(), &CMatrix::identity(2)).unwrap();
        let fit = fit_werner(&flipped, BellKind::PsiMinus).unwrap();
        let direct = fit_werner(&werner_phi_minus(x).unwrap(), BellKind::PhiMinus).unwrap();
        prop_assert!((fit.x - direct.x).abs() < 1e-6, "{} vs {}", fit.x, direct.x);
    }
}

#[test]
fn constructors_pass_invariants_on_1000_draws() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let x = rng.random_range(-1.0 / 3.0..=1.0);
        let f = rng.random_range(0.0..=1.0);
        let p = rng.random_range(0.0..=1.0);
        let a = werner_phi_minus(x).unwrap();
        let b = werner_singlet(f).unwrap();
        let m = mix(&a, &b, p).unwrap();
        for rho in [a, b, m] {
            assert!(DensityMatrix::new(rho.matrix().clone()).is_ok());
        }
    }
}

#[test]
fn chsh_is_linear_in_werner_parameter() {
    for i in 0..=20 {
        let x = i as f64 * 0.05;
        let s = chsh_value(&werner_phi_minus(x).unwrap(), &ChshAngles::default());
        assert!((s - 2.0 * 2f64.sqrt() * x).abs() < 1e-9, "x={x}: {s}");
    }
}

#[test]
fn werner_fit_recovers_parameter_on_grid() {
    for i in 0..=20 {
        let x = i as f64 * 0.05;
        let fit = fit_werner(&werner_phi_minus(x).unwrap(), BellKind::PhiMinus).unwrap();
        assert!((fit.x - x).abs() < 1e-4, "x={x}: {fit:?}");
        assert!((fit.fidelity - 1.0).abs() < 1e-8, "x={x}: {fit:?}");
    }
}

#[test]
fn singlet_werner_is_separable_up_to_one_half() {
    for i in 0..=50 {
        let f = i as f64 * 0.01;
        assert!(concurrence(&werner_singlet(f).unwrap()).unwrap() < 1e-9, "F={f}");
    }
}

#[test]
fn dark_setting_with_no_background_counts_nothing() {
    let cfg = SourceConfig { accidental_rate: 0.0, ..Default::default() };
    let rho = werner_phi_minus(1.0).unwrap();
    let dd = [AnalyzerSetting::new(PolSpec::D, PolSpec::D)];
    for seed in 0..50 {
        let r = simulate_counts(&rho, &dd, &SourceConfig { seed, ..cfg }).unwrap();
        assert_eq!(r[0].count, 0);
    }
}

#[test]
fn sample_mean_matches_expected_count() {
    // pair term 300·100·p plus accidental term 1·100, for p = 1/2 and p = 0.
    let rho = werner_phi_minus(1.0).unwrap();
    let settings = [AnalyzerSetting::new(PolSpec::H, PolSpec::H), AnalyzerSetting::new(PolSpec::D, PolSpec::D)];
    for (k, mean) in [15_100.0f64, 100.0].into_iter().enumerate() {
        let n = 200.0;
        let sum: f64 = (0..200u64)
            .map(|seed| {
                simulate_counts(&rho, &settings, &SourceConfig { seed, ..Default::default() }).unwrap()[k].count as f64
            })
            .sum();
        let sigma_of_mean = (mean / n).sqrt();
        assert!((sum / n - mean).abs() < 3.0 * sigma_of_mean, "setting {k}: {} vs {mean}", sum / n);
    }
}

#[test]
fn gamma_is_one_only_at_zero_opd() {
    let s = Spectrum::rectangular(702.2, 4.62).unwrap();
    assert_eq!(gamma(&s, &BirefringentElement::new(0.0).unwrap()).unwrap(), c(1.0, 0.0));
}
