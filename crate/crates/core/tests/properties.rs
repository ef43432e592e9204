use kerr_core::circuit::{self, CircuitParams};
use kerr_core::fit::fit_exponential;
use kerr_core::hilbert::{
    annihilation, creation, kerr_hamiltonian, number, two_mode_hamiltonian, FockDim, ModeParams, TwoModeParams, ZERO,
};
use kerr_core::liouville::{evolve_with, kerr_liouvillian, steady_state, time_grid, DensityMatrix, EvolveOptions};
use kerr_core::metapotential::{amplitude_rhs, classical_fixed_points, crossover_parameter, metapotential_profile};
use kerr_core::stochastic::{simulate_trajectory, SdeOptions};
use kerr_core::C64;
use ndarray::Array2;
use proptest::prelude::*;

fn random_density(d: usize, seed: &[f64]) -> DensityMatrix {
    let mut m = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            let k = (i * d + j) % seed.len();
            m[[i, j]] = C64::new(seed[k] + 0.1 * i as f64, seed[(k + 1) % seed.len()] - 0.05 * j as f64);
        }
    }
    let rho = m.dot(&m.t().mapv(|z| z.conj()));
    DensityMatrix::from_unnormalized(&rho)
}

fn mode() -> impl Strategy<Value = ModeParams> {
    (-5.0..15.0f64, 0.0..3.0f64, 0.2..3.0f64, 0.0..6.0f64).prop_map(|(d, k, g, e)| ModeParams::new(d, k, g, e).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hamiltonians_are_hermitian(m in mode(), m2 in mode(), k01 in 0.0..2.0f64, d in 2usize..16) {
        let h = kerr_hamiltonian(&m, FockDim::new(d).unwrap()).unwrap();
        prop_assert!(h.hermiticity_defect() <= 1e-12);
        let tp = TwoModeParams { mode0: m, mode1: m2, cross_kerr: k01 };
        let dims = (FockDim::new(3).unwrap(), FockDim::new(d).unwrap());
        prop_assert!(two_mode_hamiltonian(&tp, dims).unwrap().hermiticity_defect() <= 1e-12);
    }

    #[test]
    fn number_squared_identity(d in 2usize..40) {
        let dim = FockDim::new(d).unwrap();
        let (a, ad, n) = (annihilation(dim), creation(dim), number(dim));
        let lhs = n.dot(&n);
        let rhs = ad.dot(&ad).dot(&a).dot(&a).add(&n);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10);
        prop_assert!(ad.dot(&a).max_abs_diff(&n) <= 1e-12);
    }

    #[test]
    fn liouvillian_preserves_trace_and_hermiticity(
        m in mode(),
        d in 2usize..12,
        seed in prop::collection::vec(-1.0..1.0f64, 7),
    ) {
        let l = kerr_liouvillian(&m, FockDim::new(d).unwrap()).unwrap();
        let rho = random_density(d, &seed);
        let out = l.apply(rho.entries());
        let tr: C64 = (0..d).map(|i| out[[i, i]]).sum();
        let scale = out.iter().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!(tr.norm() <= 1e-12 * scale);
        let herm = (&out - &out.t().mapv(|z| z.conj())).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(herm <= 1e-12 * scale);
    }

    #[test]
    fn fixed_points_are_stationary(m in mode()) {
        let fp = classical_fixed_points(&m).unwrap();
        prop_assert!(fp.roots.len() == 1 || fp.roots.len() == 3);
        for r in &fp.roots {
            let scale = m.kappa * r.alpha.norm() + m.drive.norm() + m.kerr * r.alpha.norm().powi(3) + 1.0;
            prop_assert!(amplitude_rhs(r.alpha, &m).norm() <= 1e-9 * scale);
            prop_assert!((r.alpha.norm_sqr() - r.photon_number).abs() <= 1e-9 * (1.0 + r.photon_number));
        }
    }

    #[test]
    fn barrier_profile_is_consistent(delta in 4.0..14.0f64, kerr in 0.1..2.5f64, eps in 1.0..8.0f64) {
        let m = ModeParams::new(delta, kerr, 1.0, eps).unwrap();
        if let Ok(prof) = metapotential_profile(&m) {
            prop_assert!(prof.u(0.0).abs() <= 1e-14);
            prop_assert!(prof.du(0.0).abs() <= 1e-8 * (1.0 + prof.quartic_coeffs[1].abs()));
            prop_assert!(prof.du(prof.x0).abs() <= 1e-7 * (1.0 + prof.d2u(0.0).abs() * prof.x0.abs()));
            prop_assert!(prof.delta_u > 0.0);
            prop_assert!(prof.gamma0 > 0.0);
        }
    }

    #[test]
    fn crossover_depends_only_on_ratio(g in 0.01..50.0f64, k in 0.01..10.0f64, s in 0.01..100.0f64) {
        let a = crossover_parameter(g, k).unwrap().t_gamma_over_t_kappa;
        let b = crossover_parameter(g * s, k * s).unwrap().t_gamma_over_t_kappa;
        prop_assert!((a - b).abs() <= 1e-12 * a);
        let r = k / (2.0 * g);
        let naive = g / (2.0 * std::f64::consts::PI * k) * ((r * r + 1.0).sqrt() - r);
        prop_assert!((a - naive).abs() <= 1e-8 * a);
    }

    #[test]
    fn trajectories_are_seed_deterministic(seed in any::<u64>(), index in 0u64..1000) {
        let m = ModeParams::new(5.4, 0.2, 1.0, 6.0).unwrap();
        let opts = SdeOptions::default();
        let a = simulate_trajectory(&m, ZERO, 1.0, &opts, seed, index).unwrap();
        let b = simulate_trajectory(&m, ZERO, 1.0, &opts, seed, index).unwrap();
        let c = simulate_trajectory(&m, ZERO, 1.0, &opts, seed, index + 1).unwrap();
        prop_assert_eq!(&a.alphas, &b.alphas);
        prop_assert_ne!(&a.alphas, &c.alphas);
    }

    #[test]
    fn exponential_fit_recovers_parameters(tau in 0.5..20.0f64, n_ss in 0.0..30.0f64, amp in -20.0..20.0f64) {
        prop_assume!(amp.abs() > 0.5);
        let times = time_grid(10.0 * tau + 5.0, tau / 50.0);
        let values: Vec<f64> = times.iter().map(|t| n_ss + amp * (-t / tau).exp()).collect();
        let f = fit_exponential(&times, &values, 0.0).unwrap();
        prop_assert!((f.tau - tau).abs() <= 1e-6 * tau);
        prop_assert!((f.n_ss - n_ss).abs() <= 1e-6 * (1.0 + n_ss));
    }

    #[test]
    fn cross_kerr_obeys_cauchy_schwarz(
        n in 4usize..40,
        lj in 0.5e-9..5e-9f64,
        cj in 5e-15..60e-15f64,
        c0 in 0.01e-15..1e-15f64,
        cg in 1e-15..20e-15f64,
    ) {
        let p = CircuitParams { n_junctions: n, l_j: lj, c_j: cj, c_0: c0, c_g: cg, ..CircuitParams::reference_device() };
        let (_, kerr) = circuit::quantize(&p).unwrap();
        let k = &kerr.k_matrix;
        let m = k.nrows();
        for a in 0..m {
            for b in 0..m {
                prop_assert!(k[[a, b]] >= 0.0);
                prop_assert!((k[[a, b]] - k[[b, a]]).abs() <= 1e-12 * k[[a, b]].abs());
                if a != b {
                    prop_assert!(k[[a, b]] <= 2.0 * (k[[a, a]] * k[[b, b]]).sqrt() * (1.0 + 1e-12));
                }
            }
        }
    }
}

#[test]
fn evolution_is_trace_preserving_and_positive() {
    for (delta, kerr, eps) in [(2.0, 1.0, 1.5), (5.4, 0.2, 6.0), (13.0, 2.0, 6.0), (-3.0, 0.5, 2.0)] {
        let m = ModeParams::new(delta, kerr, 1.0, eps).unwrap();
        let d = 30;
        let l = kerr_liouvillian(&m, FockDim::new(d).unwrap()).unwrap();
        let opts = EvolveOptions { renormalize: false, rtol: 1e-10, atol: 1e-12, ..Default::default() };
        let r = evolve_with(&DensityMatrix::vacuum(d).unwrap(), &l, &time_grid(10.0, 0.5), opts).unwrap();
        for s in &r.states {
            assert!((s.trace() - 1.0).norm() <= 1e-8, "trace drift {:e} at Δ={delta}", (s.trace() - 1.0).norm());
            assert!(s.min_eigenvalue().unwrap() >= -1e-8);
        }
        let ss = steady_state(&l).unwrap();
        assert!(ss.check_physical(1e-10, 1e-10, 1e-8).is_ok());
    }
}
