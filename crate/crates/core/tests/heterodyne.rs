use kerr_core::hilbert::FockDim;
use kerr_core::liouville::{evolve_with, two_mode_liouvillian, DensityMatrix, EvolveOptions};
use kerr_core::stochastic::{
    heterodyne_sme_run_with, lineshape_scan_with, mode0_number_weights, mode1_number_weights, readout_device,
    HeterodyneNormalization, LineshapeOptions, SmeOptions,
};

fn dims(d0: usize, d1: usize) -> (FockDim, FockDim) {
    (FockDim::new(d0).unwrap(), FockDim::new(d1).unwrap())
}

#[test]
fn vacuum_noise_floor_matches_normalization() {
    let p = readout_device(0.0, 0.0, 0.0, 0.0).unwrap();
    let (dt, window) = (5e-3, 100);
    for (norm, floor) in [
        (HeterodyneNormalization::Standard, 1.0 / (2.0 * window as f64 * dt)),
        (HeterodyneNormalization::Literal, 1.0 / (window as f64 * dt)),
    ] {
        let opts = SmeOptions { window, normalization: norm, keep_record: false, ..Default::default() };
        let r = heterodyne_sme_run_with(&p, dims(3, 3), dt, 1000.0, 17, 0, &opts).unwrap();
        assert_eq!(r.power_signal.len(), 2000);
        let rel = (r.mean_power() - floor).abs() / floor;
        assert!(rel < 0.08, "{norm:?}: mean {} vs floor {floor}", r.mean_power());
    }
}

#[test]
fn seed_average_reproduces_master_equation() {
    let p = readout_device(1.0, 1.0, 0.0, 1.0).unwrap();
    let (d0, d1) = (4, 8);
    let (dt, window, t_total, n_records) = (5e-3, 20, 10.0, 200);
    let wdt = window as f64 * dt;
    let l = two_mode_liouvillian(&p, dims(d0, d1)).unwrap();
    let n_windows = (t_total / wdt).round() as usize;
    let times: Vec<f64> = (0..n_windows).map(|w| (w as f64 + 0.5) * wdt).collect();

    for weights in [mode0_number_weights(d0, d1), mode1_number_weights(d0, d1)] {
        let me_opts = EvolveOptions { keep_states: false, observable: Some(weights.clone()), ..Default::default() };
        let mut grid = vec![0.0];
        grid.extend(&times);
        let me = evolve_with(&DensityMatrix::vacuum(d0 * d1).unwrap(), &l, &grid, me_opts).unwrap();

        let opts = SmeOptions { window, keep_record: false, observable: Some(weights), ..Default::default() };
        let mut mean = vec![0.0; n_windows];
        for i in 0..n_records {
            let r = heterodyne_sme_run_with(&p, dims(d0, d1), dt, t_total, 5, i, &opts).unwrap();
            for (m, o) in mean.iter_mut().zip(&r.observable) {
                *m += o / n_records as f64;
            }
        }
        let scale = me.photon_numbers.iter().copied().fold(0.0, f64::max);
        for (k, m) in mean.iter().enumerate().skip(n_windows / 10) {
            let exact = me.photon_numbers[k + 1];
            assert!((m - exact).abs() <= 0.05 * scale, "t={}: SME {m} vs ME {exact}", times[k]);
        }
    }
}

#[test]
fn no_cross_kerr_means_no_shift() {
    let mut p = readout_device(0.0, 2.0, 0.0, 0.2).unwrap();
    p.cross_kerr = 0.0;
    let probes = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let opts = LineshapeOptions::new(4, 8).unwrap();
    let t_m = 20.0 / p.mode0.kappa;
    let pts = lineshape_scan_with(&p, &[0.0, 2.0], &probes, t_m, 20, 3, &opts).unwrap();
    for pt in pts {
        assert_eq!(pt.frequency_shift, 0.0, "pump {}: scan {:?}", pt.pump_detuning, pt.probe_scan);
    }
}
