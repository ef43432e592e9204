//! Per-point evaluation of every experiment.

use kerr_core::circuit::{self, CircuitParams};
use kerr_core::fit::fit_relaxation;
use kerr_core::hilbert::{FockDim, ModeParams, ZERO};
use kerr_core::liouville::{
    evolve_with, kerr_liouvillian, mandel_q, photon_number, steady_state, time_grid, DensityMatrix, EvolveOptions,
};
use kerr_core::metapotential::{
    attempt_frequency, classical_fixed_points, crossover_parameter, metapotential_profile, semiclassical_escape_rate,
};
use kerr_core::spectral::{quantum_escape_rate, steady_overlap};
use kerr_core::stochastic::{
    ensemble_relaxation_with, lineshape_scan_with, readout_device, simulate_trajectory, LineshapeOptions, SdeOptions,
    DEFAULT_LINESHAPE_DT,
};
use kerr_core::{KerrError, Result};
use serde_json::Value;

use crate::config::{Experiment, Parameters};

const MODE_COLUMNS: [&str; 4] = ["delta", "kerr", "kappa", "drive"];

pub fn columns(e: Experiment) -> Vec<&'static str> {
    let extra: &[&str] = match e {
        Experiment::Steadystate => &["n_ss", "mandel_q", "tail_population"],
        Experiment::Relax => &["tau", "n_ss_fit", "amplitude", "residual"],
        Experiment::Trajectories => &["time", "re_alpha", "im_alpha"],
        Experiment::LiouvillianRate => &["inv_lambda_e", "beta0", "n_ss"],
        Experiment::EscapeRate => &["bistable", "delta_u", "gamma0", "kramers_time"],
        Experiment::Crossover => &["gamma0", "xi", "extrapolated"],
        Experiment::ClassicalCompare => &["tau_me", "tau_sc", "tau_kramers", "inv_lambda_e"],
        Experiment::Lineshape => {
            return vec![
                "pump_detuning",
                "frequency_shift",
                "averaged_power",
                "n_avg",
                "t_m",
                "drive_ratio",
                "mean_pump_photons",
            ]
        }
        Experiment::Circuit => return vec!["mode_k", "mode_l", "kerr_MHz"],
    };
    MODE_COLUMNS.iter().chain(extra).copied().collect()
}

/// CSV rows of one sweep point, plus an optional JSON document written next
/// to the CSV.
pub struct PointOutput {
    pub rows: Vec<Vec<f64>>,
    pub sidecar: Option<Value>,
}

impl PointOutput {
    fn rows(rows: Vec<Vec<f64>>) -> Self {
        Self { rows, sidecar: None }
    }
}

fn mode(p: &Parameters) -> Result<ModeParams> {
    ModeParams::new(p.delta.unwrap_or(0.0), p.kerr.unwrap_or(0.0), p.kappa.unwrap_or(1.0), p.drive.unwrap_or(1.0))
}

fn prefix(m: &ModeParams) -> Vec<f64> {
    vec![m.delta, m.kerr, m.kappa, m.drive.re]
}

fn with(mut head: Vec<f64>, tail: &[f64]) -> Vec<f64> {
    head.extend_from_slice(tail);
    head
}

fn dim(p: &Parameters) -> Result<FockDim> {
    FockDim::new(p.dim.unwrap_or(30))
}

fn t_max(p: &Parameters) -> f64 {
    p.t_max.unwrap_or(100.0)
}

fn transient_cut(p: &Parameters) -> f64 {
    p.transient_cut.unwrap_or(kerr_core::fit::DEFAULT_TRANSIENT_CUT)
}

fn sde(p: &Parameters) -> SdeOptions {
    SdeOptions {
        dt: p.sde_dt.unwrap_or(kerr_core::stochastic::DEFAULT_SDE_DT),
        sample_dt: p.sample_dt.unwrap_or(0.1),
        ..Default::default()
    }
}

fn relax_fit(m: &ModeParams, p: &Parameters) -> Result<kerr_core::RelaxationFit> {
    let d = dim(p)?;
    let l = kerr_liouvillian(m, d)?;
    let opts = EvolveOptions { keep_states: false, rtol: 1e-6, atol: 1e-8, ..Default::default() };
    let r = evolve_with(&DensityMatrix::vacuum(d.get())?, &l, &time_grid(t_max(p), p.sample_dt.unwrap_or(0.1)), opts)?;
    fit_relaxation(&r, transient_cut(p))
}

fn inverse_quantum_rate(m: &ModeParams, p: &Parameters) -> Result<(f64, f64, f64)> {
    let d = dim(p)?;
    let l = kerr_liouvillian(m, d)?;
    let rho_s = steady_state(&l)?;
    let vac = DensityMatrix::vacuum(d.get())?;
    let lam = quantum_escape_rate(&l, &rho_s, &vac)?;
    Ok((1.0 / lam, steady_overlap(&rho_s, &vac), photon_number(&rho_s)))
}

fn kramers_time(m: &ModeParams) -> Result<f64> {
    Ok(1.0 / semiclassical_escape_rate(&metapotential_profile(m)?, m.kappa))
}

fn or_nan(r: Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

pub fn evaluate(e: Experiment, p: &Parameters, seed: u64) -> Result<PointOutput> {
    match e {
        Experiment::Steadystate => {
            let m = mode(p)?;
            let rho = steady_state(&kerr_liouvillian(&m, dim(p)?)?)?;
            let q = match mandel_q(&rho) {
                Ok(q) => q,
                Err(KerrError::UndefinedMandelQ) => f64::NAN,
                Err(e) => return Err(e),
            };
            Ok(PointOutput::rows(vec![with(prefix(&m), &[photon_number(&rho), q, rho.tail_population()])]))
        }
        Experiment::Relax => {
            let m = mode(p)?;
            let f = relax_fit(&m, p)?;
            Ok(PointOutput::rows(vec![with(prefix(&m), &[f.tau, f.n_ss, f.amplitude, f.residual])]))
        }
        Experiment::Trajectories => {
            let m = mode(p)?;
            let tr = simulate_trajectory(&m, ZERO, t_max(p), &sde(p), seed, 0)?;
            let rows = tr.times.iter().zip(&tr.alphas).map(|(t, a)| with(prefix(&m), &[*t, a.re, a.im])).collect();
            Ok(PointOutput::rows(rows))
        }
        Experiment::LiouvillianRate => {
            let m = mode(p)?;
            let (inv, beta0, n) = inverse_quantum_rate(&m, p)?;
            Ok(PointOutput::rows(vec![with(prefix(&m), &[inv, beta0, n])]))
        }
        Experiment::EscapeRate => {
            let m = mode(p)?;
            let row = match metapotential_profile(&m) {
                Ok(prof) => [1.0, prof.delta_u, prof.gamma0, 1.0 / semiclassical_escape_rate(&prof, m.kappa)],
                Err(KerrError::NoBarrier) => [0.0, f64::NAN, f64::NAN, f64::NAN],
                Err(e) => return Err(e),
            };
            Ok(PointOutput::rows(vec![with(prefix(&m), &row)]))
        }
        Experiment::Crossover => {
            let m = mode(p)?;
            let a = attempt_frequency(&m)?;
            let xi = crossover_parameter(a.gamma0, m.kappa)?;
            let flag = if a.extrapolated { 1.0 } else { 0.0 };
            Ok(PointOutput::rows(vec![with(prefix(&m), &[a.gamma0, xi.t_gamma_over_t_kappa, flag])]))
        }
        Experiment::ClassicalCompare => {
            let m = mode(p)?;
            let tau_me = or_nan(relax_fit(&m, p).map(|f| f.tau));
            let n_traj = p.n_traj.unwrap_or(200);
            let tau_sc = or_nan(
                ensemble_relaxation_with(&m, n_traj, t_max(p), seed, &sde(p), transient_cut(p))
                    .and_then(|r| r.fit)
                    .map(|f| f.tau),
            );
            let tau_k = if classical_fixed_points(&m)?.is_bistable() { or_nan(kramers_time(&m)) } else { f64::NAN };
            let inv = or_nan(inverse_quantum_rate(&m, p).map(|r| r.0));
            Ok(PointOutput::rows(vec![with(prefix(&m), &[tau_me, tau_sc, tau_k, inv])]))
        }
        Experiment::Lineshape => lineshape(p, seed),
        Experiment::Circuit => circuit_point(p),
    }
}

fn lineshape(p: &Parameters, seed: u64) -> Result<PointOutput> {
    let pump = p.pump_detuning.unwrap_or(5.0);
    let ratio = p.drive_ratio.unwrap_or(2.0);
    let base = readout_device(pump, ratio, 0.0, p.probe_drive.unwrap_or(0.1))?;
    let (a, b, h) = (p.probe_start.unwrap_or(-0.5), p.probe_stop.unwrap_or(5.5), p.probe_step.unwrap_or(0.5));
    let n = ((b - a) / h).round() as usize;
    let probes: Vec<f64> = (0..=n).map(|i| a + h * i as f64).collect();
    let n_avg = p.n_avg.unwrap_or(100);
    let t_m = p.t_m.unwrap_or(20.0 / base.mode0.kappa);
    let mut opts = LineshapeOptions::new(p.d0.unwrap_or(6), p.d1.unwrap_or(30))?;
    opts.dt = p.sme_dt.unwrap_or(DEFAULT_LINESHAPE_DT);
    let pt = lineshape_scan_with(&base, &[pump], &probes, t_m, n_avg, seed, &opts)?.remove(0);
    Ok(PointOutput::rows(vec![vec![
        pt.pump_detuning,
        pt.frequency_shift,
        pt.averaged_power,
        n_avg as f64,
        t_m,
        ratio,
        pt.mean_pump_photons,
    ]]))
}

fn circuit_point(p: &Parameters) -> Result<PointOutput> {
    let r = CircuitParams::reference_device();
    let c = CircuitParams {
        n_junctions: p.n_junctions.unwrap_or(r.n_junctions),
        l_j: p.l_j.unwrap_or(r.l_j),
        c_j: p.c_j.unwrap_or(r.c_j),
        c_0: p.c_0.unwrap_or(r.c_0),
        c_s: p.c_s.unwrap_or(r.c_s),
        c_g: p.c_g.unwrap_or(r.c_g),
        c_e: p.c_e.unwrap_or(r.c_e),
    };
    let spec = circuit::normal_modes(&circuit::build_matrices(&c)?)?;
    let n = p.kerr_modes.unwrap_or(circuit::DEFAULT_KERR_MODES).min(spec.modes.len());
    let kerr = circuit::kerr_matrix(&spec, n)?;
    let mut rows = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            rows.push(vec![k as f64, l as f64, circuit::to_mhz(kerr.k_matrix[[k, l]])]);
        }
    }
    let table = circuit::mode_table(&spec, &kerr);
    let sidecar = serde_json::json!({
        "circuit": c,
        "modes": table,
        "all_mode_frequencies_GHz": spec.modes.iter().map(|m| circuit::to_ghz(m.omega)).collect::<Vec<_>>(),
    });
    Ok(PointOutput { rows, sidecar: Some(sidecar) })
}
