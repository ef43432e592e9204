//! Stochastic simulators: semiclassical Langevin trajectories, the two-mode
//! heterodyne stochastic master equation, and probe lineshape scans.
//!
//! Every random stream is a ChaCha8 generator keyed by `(seed, index)`, so a
//! trajectory depends only on its own index and never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, KerrError, Result};
use crate::fit::{fit_exponential, RelaxationFit, DEFAULT_TRANSIENT_CUT};
use crate::hilbert::{check_product_dim, FockDim, ModeParams, TwoModeParams, C64, DEFAULT_PRODUCT_CAP, ZERO};
use crate::liouville::DensityMatrix;
use crate::metapotential::DIVERGENCE_GUARD;

/// Default Euler–Maruyama step for the amplitude equation.
pub const DEFAULT_SDE_DT: f64 = 1e-3;
/// Default step for the stochastic master equation.
pub const DEFAULT_SME_DT: f64 = 5e-4;
/// SME step used by lineshape scans.
pub const DEFAULT_LINESHAPE_DT: f64 = 5e-3;
/// Number of SME steps per J_T bin.
pub const DEFAULT_JT_WINDOW: usize = 100;
pub const DEFAULT_EDGE_TOLERANCE: f64 = 1e-14;

/// Source of complex increments `dW_a + i dW_b` with `Var(dW_i) = dt`.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    sd: f64,
}

impl NoiseStream {
    pub fn new(seed: u64, index: u64, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { rng, sd: dt.sqrt() }
    }

    #[inline]
    pub fn next_increment(&mut self) -> C64 {
        let a: f64 = self.rng.sample(StandardNormal);
        let b: f64 = self.rng.sample(StandardNormal);
        C64::new(a * self.sd, b * self.sd)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    pub seed: u64,
    pub dt: f64,
    pub increments: Vec<C64>,
}

impl NoisePath {
    pub fn generate(seed: u64, dt: f64, len: usize) -> Self {
        let mut s = NoiseStream::new(seed, 0, dt);
        Self { seed, dt, increments: (0..len).map(|_| s.next_increment()).collect() }
    }
}

/// One Euler–Maruyama step of
/// `dα = (−iΔα + 2iK|α|²α + c − κα/2) dt + √κ (dW_a + i dW_b)/√2`.
pub fn semiclassical_step(alpha: C64, p: &ModeParams, dw: C64, dt: f64) -> Result<C64> {
    if !(dt > 0.0 && dt <= 1e-2 / p.kappa) {
        return Err(invalid("dt", "step must satisfy 0 < dt ≤ 0.01/κ"));
    }
    let next = em_step(alpha, p.delta, p.kerr, p.kappa, p.eom_drive(), dw * (p.kappa * 0.5).sqrt(), dt);
    if !(next.norm_sqr() <= DIVERGENCE_GUARD) {
        return Err(KerrError::Divergence { time: f64::NAN, norm_sqr: next.norm_sqr() });
    }
    Ok(next)
}

#[inline(always)]
fn em_step(alpha: C64, delta: f64, kerr: f64, kappa: f64, c: C64, noise: C64, dt: f64) -> C64 {
    let n = alpha.norm_sqr();
    // (−iΔ + 2iK n − κ/2) α + c
    let rot = C64::new(-0.5 * kappa, 2.0 * kerr * n - delta);
    alpha + (rot * alpha + c) * dt + noise
}

#[derive(Clone, Copy, Debug)]
pub struct SdeOptions {
    pub dt: f64,
    /// Spacing of recorded samples.
    pub sample_dt: f64,
    /// Multiplies the noise term; 0 gives the deterministic flow.
    pub noise_scale: f64,
}

impl Default for SdeOptions {
    fn default() -> Self {
        Self { dt: DEFAULT_SDE_DT, sample_dt: 0.05, noise_scale: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct SemiclassicalTrajectory {
    pub times: Vec<f64>,
    pub alphas: Vec<C64>,
    pub seed: u64,
    pub index: u64,
}

fn sample_stride(opts: &SdeOptions) -> Result<usize> {
    if !(opts.dt > 0.0) || !(opts.sample_dt >= opts.dt) {
        return Err(invalid("sample_dt", "need 0 < dt ≤ sample_dt"));
    }
    Ok((opts.sample_dt / opts.dt).round().max(1.0) as usize)
}

/// Runs one trajectory, calling `record(k, α)` at every sample `k`.
fn run_trajectory(
    p: &ModeParams,
    alpha0: C64,
    t_max: f64,
    opts: &SdeOptions,
    seed: u64,
    index: u64,
    mut record: impl FnMut(usize, C64),
) -> Result<()> {
    p.validate()?;
    if !(opts.dt <= 1e-2 / p.kappa) {
        return Err(invalid("dt", "step must satisfy dt ≤ 0.01/κ"));
    }
    let stride = sample_stride(opts)?;
    let n_samples = (t_max / (opts.dt * stride as f64)).round() as usize;
    let mut noise = NoiseStream::new(seed, index, opts.dt);
    let amp = (0.5 * p.kappa).sqrt() * opts.noise_scale;
    let c = p.eom_drive();
    let mut alpha = alpha0;
    record(0, alpha);
    for k in 1..=n_samples {
        for _ in 0..stride {
            let dw = noise.next_increment();
            alpha = em_step(alpha, p.delta, p.kerr, p.kappa, c, dw * amp, opts.dt);
        }
        let n = alpha.norm_sqr();
        if !(n <= DIVERGENCE_GUARD) {
            return Err(KerrError::Divergence { time: k as f64 * stride as f64 * opts.dt, norm_sqr: n });
        }
        record(k, alpha);
    }
    Ok(())
}

pub fn simulate_trajectory(
    p: &ModeParams,
    alpha0: C64,
    t_max: f64,
    opts: &SdeOptions,
    seed: u64,
    index: u64,
) -> Result<SemiclassicalTrajectory> {
    let stride = sample_stride(opts)?;
    let h = opts.dt * stride as f64;
    let mut times = Vec::new();
    let mut alphas = Vec::new();
    run_trajectory(p, alpha0, t_max, opts, seed, index, |k, a| {
        times.push(k as f64 * h);
        alphas.push(a);
    })?;
    Ok(SemiclassicalTrajectory { times, alphas, seed, index })
}

/// Ensemble of trajectories started from vacuum and its relaxation fit.
#[derive(Clone, Debug)]
pub struct EnsembleRelaxation {
    pub times: Vec<f64>,
    pub mean_photon_number: Vec<f64>,
    /// `|α|²` samples per trajectory, in seed order.
    pub curves: Vec<Vec<f64>>,
    pub fit: std::result::Result<RelaxationFit, KerrError>,
}

/// `|α(t)|²` for trajectories `index = 0..n_traj` of stream `seed0`.
pub fn ensemble_photon_curves(
    p: &ModeParams,
    n_traj: usize,
    t_max: f64,
    seed0: u64,
    opts: &SdeOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let stride = sample_stride(opts)?;
    let h = opts.dt * stride as f64;
    let n_samples = (t_max / h).round() as usize + 1;
    let curves: Vec<Vec<f64>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let mut c = vec![0.0; n_samples];
            run_trajectory(p, ZERO, t_max, opts, seed0, i, |k, a| c[k] = a.norm_sqr())?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let times = (0..n_samples).map(|k| k as f64 * h).collect();
    Ok((times, curves))
}

fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let n = curves.len() as f64;
    let len = curves.first().map_or(0, Vec::len);
    let mut m = vec![0.0; len];
    for c in curves {
        for (mi, ci) in m.iter_mut().zip(c) {
            *mi += ci;
        }
    }
    m.iter_mut().for_each(|x| *x /= n);
    m
}

/// Averages `|α|²` over `n_traj ≥ 50` vacuum-started trajectories and fits
/// an exponential relaxation.
pub fn ensemble_relaxation(p: &ModeParams, n_traj: usize, t_max: f64, seed0: u64) -> Result<RelaxationFit> {
    let r = ensemble_relaxation_with(p, n_traj, t_max, seed0, &SdeOptions::default(), DEFAULT_TRANSIENT_CUT)?;
    r.fit
}

pub fn ensemble_relaxation_with(
    p: &ModeParams,
    n_traj: usize,
    t_max: f64,
    seed0: u64,
    opts: &SdeOptions,
    transient_cut: f64,
) -> Result<EnsembleRelaxation> {
    if n_traj < 50 {
        return Err(invalid("n_traj", "at least 50 trajectories are required"));
    }
    let (times, curves) = ensemble_photon_curves(p, n_traj, t_max, seed0, opts)?;
    let mean = mean_curve(&curves);
    let fit = fit_exponential(&times, &mean, transient_cut);
    Ok(EnsembleRelaxation { times, mean_photon_number: mean, curves, fit })
}

/// Percentile bootstrap interval for τ over resampled trajectory sets.
pub fn bootstrap_tau(
    times: &[f64],
    curves: &[Vec<f64>],
    transient_cut: f64,
    n_boot: usize,
    seed: u64,
    level: f64,
) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = curves.len();
    let mut taus = Vec::with_capacity(n_boot);
    for _ in 0..n_boot {
        let pick: Vec<Vec<f64>> = (0..n).map(|_| curves[rng.random_range(0..n)].clone()).collect();
        if let Ok(f) = fit_exponential(times, &mean_curve(&pick), transient_cut) {
            taus.push(f.tau);
        }
    }
    if taus.len() < n_boot / 2 {
        return Err(KerrError::Fit {
            reason: "most bootstrap resamples failed to fit".into(),
            tau_estimate: f64::NAN,
            residual: f64::NAN,
            span: times.last().copied().unwrap_or(0.0),
        });
    }
    taus.sort_by(f64::total_cmp);
    let q = |f: f64| taus[((taus.len() - 1) as f64 * f).round() as usize];
    Ok((q(0.5 * (1.0 - level)), q(0.5 * (1.0 + level))))
}

/// Residence times between committed switches of `|α|²`.
///
/// A switch is registered once the trajectory has crossed the unstable
/// photon number `n_u` and gone on to reach the other well's commit level,
/// which suppresses re-crossings caused by noise near the threshold.
#[derive(Clone, Debug, Default)]
pub struct SwitchingTimes {
    pub low_residence: Vec<f64>,
    pub high_residence: Vec<f64>,
}

pub fn switching_times(times: &[f64], photon_numbers: &[f64], n_u: f64, low_commit: f64, high_commit: f64) -> SwitchingTimes {
    #[derive(PartialEq)]
    enum Well {
        Low,
        High,
    }
    let mut out = SwitchingTimes::default();
    let Some(&n0) = photon_numbers.first() else { return out };
    let mut well = if n0 < n_u { Well::Low } else { Well::High };
    let mut entered: Option<f64> = None;
    let mut crossing = times[0];
    let mut armed = false;
    for (&t, &n) in times.iter().zip(photon_numbers) {
        match well {
            Well::Low => {
                if n < n_u {
                    armed = true;
                } else if armed {
                    crossing = t;
                    armed = false;
                }
                if n >= high_commit {
                    if let Some(t0) = entered {
                        out.low_residence.push(crossing - t0);
                    }
                    entered = Some(crossing);
                    well = Well::High;
                    armed = false;
                }
            }
            Well::High => {
                if n > n_u {
                    armed = true;
                } else if armed {
                    crossing = t;
                    armed = false;
                }
                if n <= low_commit {
                    if let Some(t0) = entered {
                        out.high_residence.push(crossing - t0);
                    }
                    entered = Some(crossing);
                    well = Well::Low;
                    armed = false;
                }
            }
        }
    }
    out
}

/// Time of the last upward crossing of `n_u` before the photon number first
/// reaches `commit`; `None` if it never does.
pub fn first_passage_time(times: &[f64], photon_numbers: &[f64], n_u: f64, commit: f64) -> Option<f64> {
    let mut crossing = times.first().copied()?;
    let mut below = photon_numbers.first().is_some_and(|&n| n < n_u);
    for (&t, &n) in times.iter().zip(photon_numbers) {
        if n < n_u {
            below = true;
        } else if below {
            crossing = t;
            below = false;
        }
        if n >= commit {
            return Some(crossing);
        }
    }
    None
}

/// One-sample Kolmogorov–Smirnov test against an exponential law whose mean
/// is estimated from the data. Returns `(D, p-value)`.
pub fn ks_exponential(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let mut d = 0.0f64;
    for (i, x) in s.iter().enumerate() {
        let f = 1.0 - (-x / mean).exp();
        d = d.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    let sn = (n as f64).sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * lam * lam).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

/// Normalisation of the heterodyne increment `dZ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeterodyneNormalization {
    /// `dZ = dW_a + i dW_b`; acts as a measurement efficiency of two and
    /// does not keep conditional states positive.
    Literal,
    /// `dZ = (dW_a + i dW_b)/√2`, the unit-efficiency heterodyne convention.
    #[default]
    Standard,
}

#[derive(Clone, Debug)]
pub struct SmeOptions {
    pub window: usize,
    pub normalization: HeterodyneNormalization,
    /// Store the conditional state every this many steps.
    pub keep_states_every: Option<usize>,
    pub keep_record: bool,
    /// Initial state; vacuum when absent.
    pub rho0: Option<DensityMatrix>,
    /// Diagonal observable on the product space recorded once per window.
    pub observable: Option<Vec<f64>>,
    pub product_cap: usize,
    /// Edge-level population above which the active Fock window is widened;
    /// `None` always integrates the full truncation.
    pub edge_tolerance: Option<f64>,
}

impl Default for SmeOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_JT_WINDOW,
            normalization: HeterodyneNormalization::Standard,
            keep_states_every: None,
            keep_record: true,
            rho0: None,
            observable: None,
            product_cap: DEFAULT_PRODUCT_CAP,
            edge_tolerance: Some(DEFAULT_EDGE_TOLERANCE),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HeterodyneRun {
    /// Bin centres of the J_T windows.
    pub times: Vec<f64>,
    pub power_signal: Vec<f64>,
    pub conditional_states: Option<Vec<(f64, DensityMatrix)>>,
    pub record: Option<Vec<C64>>,
    /// Window-averaged diagonal observable (mode-1 photon number by default).
    pub observable: Vec<f64>,
    pub seed: u64,
    pub index: u64,
}

impl HeterodyneRun {
    pub fn mean_power(&self) -> f64 {
        self.power_signal.iter().sum::<f64>() / self.power_signal.len() as f64
    }
}

/// Two-mode conditional master-equation integrator with mode ordering
/// `mode0 ⊗ mode1` (index `n₀·d₁ + n₁`).
///
/// Each step applies the Kraus-form update
/// `ρ' ∝ P[MρM† + dt κ₁ a₁ρa₁† + (1 − s) dt κ₀ a₀ρa₀†]P†` with
/// `M = 1 − iH_off dt + √κ₀ dY a₀`, `dY = dZ + s√κ₀⟨a₀†⟩dt` and
/// `s = E|dZ|²/dt`, where `P` propagates the diagonal of `H_eff` exactly.
/// To first order this is the nonlinear heterodyne equation driven by `dZ`;
/// for `s = 1` every step is completely positive.
struct SmeKernel {
    d1: usize,
    n: usize,
    dt: f64,
    sqrt_k0: f64,
    /// `E|dZ|²/dt`
    s: f64,
    k0: f64,
    k1: f64,
    f0: C64,
    f1: C64,
    /// `√(n₀+1)` and `√(n₁+1)` indexed by product index, zero at the top level.
    s0: Vec<f64>,
    s1: Vec<f64>,
    e: Split,
    rho: Split,
    w: Split,
    wt: Split,
    q: Split,
    avx2: bool,
}

/// Row-major complex matrix with separate real and imaginary planes.
#[derive(Clone)]
struct Split {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Split {
    fn zeros(len: usize) -> Self {
        Self { re: vec![0.0; len], im: vec![0.0; len] }
    }

    #[inline(always)]
    fn get(&self, k: usize) -> C64 {
        C64::new(self.re[k], self.im[k])
    }
}

/// Coefficients of `A = Σ c_op·op` over `a₀, a₀†, a₁, a₁†`.
#[derive(Clone, Copy)]
struct Ladder {
    a0: C64,
    a0d: C64,
    a1: C64,
    a1d: C64,
}

const BLOCK: usize = 16;

fn detect_avx2() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// `(xr, xi) += c·(yr, yi)`
#[inline(always)]
fn axpy(c: C64, yr: &[f64], yi: &[f64], xr: &mut [f64], xi: &mut [f64]) {
    let (cr, ci) = (c.re, c.im);
    for (((xr, xi), yr), yi) in xr.iter_mut().zip(xi.iter_mut()).zip(yr).zip(yi) {
        *xr += cr * yr - ci * yi;
        *xi += cr * yi + ci * yr;
    }
}

/// `(xr, xi) += f·w ⊙ (yr, yi)` with real `f` and weights `w`.
#[inline(always)]
fn weighted_axpy(f: f64, w: &[f64], yr: &[f64], yi: &[f64], xr: &mut [f64], xi: &mut [f64]) {
    for ((((xr, xi), yr), yi), w) in xr.iter_mut().zip(xi.iter_mut()).zip(yr).zip(yi).zip(w) {
        let g = f * w;
        *xr += g * yr;
        *xi += g * yi;
    }
}

impl SmeKernel {
    fn new(p: &TwoModeParams, d0: usize, d1: usize, dt: f64, s: f64, rho: Split) -> Self {
        let n = d0 * d1;
        let mut hd = vec![ZERO; n];
        let mut s0 = vec![0.0; n];
        let mut s1 = vec![0.0; n];
        for a in 0..d0 {
            for b in 0..d1 {
                let i = a * d1 + b;
                let (na, nb) = (a as f64, b as f64);
                let e = p.mode0.delta * na - p.mode0.kerr * na * na + p.mode1.delta * nb - p.mode1.kerr * nb * nb
                    - p.cross_kerr * na * nb;
                hd[i] = C64::new(e, -0.5 * (p.mode0.kappa * na + p.mode1.kappa * nb));
                s0[i] = if a + 1 < d0 { (na + 1.0).sqrt() } else { 0.0 };
                s1[i] = if b + 1 < d1 { (nb + 1.0).sqrt() } else { 0.0 };
            }
        }
        let ph: Vec<C64> = hd.iter().map(|h| (C64::new(0.0, -1.0) * h * dt).exp()).collect();
        let mut e = Split::zeros(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = ph[i] * ph[j].conj();
                e.re[i * n + j] = v.re;
                e.im[i * n + j] = v.im;
            }
        }
        Self {
            d1,
            n,
            dt,
            sqrt_k0: p.mode0.kappa.sqrt(),
            s,
            k0: p.mode0.kappa,
            k1: p.mode1.kappa,
            f0: p.mode0.hamiltonian_drive(),
            f1: p.mode1.hamiltonian_drive(),
            s0,
            s1,
            e,
            rho,
            w: Split::zeros(n * n),
            wt: Split::zeros(n * n),
            q: Split::zeros(n * n),
            avx2: detect_avx2(),
        }
    }

    /// `Tr(ρ a₀)`
    fn mean_a0(&self) -> C64 {
        let (n, d1) = (self.n, self.d1);
        (0..n - d1).map(|i| self.rho.get((i + d1) * n + i) * self.s0[i]).sum()
    }

    fn diag_expectation(&self, w: &[f64]) -> f64 {
        (0..self.n).map(|i| self.rho.re[i * self.n + i] * w[i]).sum()
    }

    /// `dst = (1 + A)·src` using the ladder structure of each operator; with
    /// `upper`, row `i` is only filled from column `i` onwards.
    #[inline(always)]
    fn left_apply(n: usize, d1: usize, s0: &[f64], s1: &[f64], c: Ladder, src: &Split, dst: &mut Split, upper: bool) {
        for i in 0..n {
            let c0 = if upper { i } else { 0 };
            let (xr, xi) = (&mut dst.re[i * n + c0..(i + 1) * n], &mut dst.im[i * n + c0..(i + 1) * n]);
            xr.copy_from_slice(&src.re[i * n + c0..(i + 1) * n]);
            xi.copy_from_slice(&src.im[i * n + c0..(i + 1) * n]);
            let row = |k: usize| (&src.re[k * n + c0..(k + 1) * n], &src.im[k * n + c0..(k + 1) * n]);
            if s0[i] != 0.0 {
                let (yr, yi) = row(i + d1);
                axpy(c.a0 * s0[i], yr, yi, xr, xi);
            }
            if i >= d1 {
                let (yr, yi) = row(i - d1);
                axpy(c.a0d * s0[i - d1], yr, yi, xr, xi);
            }
            if s1[i] != 0.0 {
                let (yr, yi) = row(i + 1);
                axpy(c.a1 * s1[i], yr, yi, xr, xi);
            }
            if i % d1 != 0 {
                let (yr, yi) = row(i - 1);
                axpy(c.a1d * s1[i - 1], yr, yi, xr, xi);
            }
        }
    }

    fn step(&mut self, dz: C64) {
        #[cfg(target_arch = "x86_64")]
        if self.avx2 {
            // SAFETY: the CPU supports AVX2 and FMA, checked when the kernel was built.
            unsafe { self.step_avx2(dz) };
            return;
        }
        self.step_impl(dz);
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn step_avx2(&mut self, dz: C64) {
        self.step_impl(dz);
    }

    /// Advances by one step with measurement increment `dz`.
    #[inline(always)]
    fn step_impl(&mut self, dz: C64) {
        let (n, d1, dt) = (self.n, self.d1, self.dt);
        let mi = C64::new(0.0, -dt);
        let dy = dz + self.mean_a0().conj() * (self.s * self.sqrt_k0 * dt);
        let c = Ladder {
            a0: mi * self.f0.conj() + dy * self.sqrt_k0,
            a0d: mi * self.f0,
            a1: mi * self.f1.conj(),
            a1d: mi * self.f1,
        };
        // W = Mρ, Q = M W† = MρM†
        Self::left_apply(n, d1, &self.s0, &self.s1, c, &self.rho, &mut self.w, false);
        for ib in (0..n).step_by(BLOCK) {
            for jb in (0..n).step_by(BLOCK) {
                for i in ib..(ib + BLOCK).min(n) {
                    for j in jb..(jb + BLOCK).min(n) {
                        self.wt.re[j * n + i] = self.w.re[i * n + j];
                        self.wt.im[j * n + i] = -self.w.im[i * n + j];
                    }
                }
            }
        }
        Self::left_apply(n, d1, &self.s0, &self.s1, c, &self.wt, &mut self.q, true);
        let j1 = dt * self.k1;
        let j0 = dt * self.k0 * (1.0 - self.s);
        for i in 0..n {
            let (xr, xi) = (&mut self.q.re[i * n..(i + 1) * n], &mut self.q.im[i * n..(i + 1) * n]);
            if self.s1[i] != 0.0 {
                let k = (i + 1) * n;
                weighted_axpy(
                    j1 * self.s1[i],
                    &self.s1[i..n - 1],
                    &self.rho.re[k + i + 1..k + n],
                    &self.rho.im[k + i + 1..k + n],
                    &mut xr[i..n - 1],
                    &mut xi[i..n - 1],
                );
            }
            if j0 != 0.0 && self.s0[i] != 0.0 {
                let k = (i + d1) * n;
                weighted_axpy(
                    j0 * self.s0[i],
                    &self.s0[i..n - d1],
                    &self.rho.re[k + i + d1..k + n],
                    &self.rho.im[k + i + d1..k + n],
                    &mut xr[i..n - d1],
                    &mut xi[i..n - d1],
                );
            }
        }
        let tr: f64 = (0..n).map(|i| self.q.re[i * n + i] * self.e.re[i * n + i]).sum();
        let inv = 1.0 / tr;
        for i in 0..n {
            for j in i..n {
                let u = i * n + j;
                let (hr, hi) = (self.q.re[u] * inv, self.q.im[u] * inv);
                let (er, ei) = (self.e.re[u], self.e.im[u]);
                self.rho.re[u] = hr * er - hi * ei;
                self.rho.im[u] = hr * ei + hi * er;
            }
            self.rho.im[i * n + i] = 0.0;
        }
        for ib in (0..n).step_by(BLOCK) {
            for jb in (ib..n).step_by(BLOCK) {
                for i in ib..(ib + BLOCK).min(n) {
                    let j0 = if ib == jb { i + 1 } else { jb };
                    for j in j0..(jb + BLOCK).min(n) {
                        self.rho.re[j * n + i] = self.rho.re[i * n + j];
                        self.rho.im[j * n + i] = -self.rho.im[i * n + j];
                    }
                }
            }
        }
    }

    fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.rho.re[i * self.n + i]).sum()
    }

    fn min_diag(&self) -> f64 {
        (0..self.n).map(|i| self.rho.re[i * self.n + i]).fold(f64::INFINITY, f64::min)
    }
}

/// Kernel restricted to the lowest `e₀ × e₁` levels, widened whenever the
/// population on an edge level exceeds `tol`. With `tol = None` the full
/// truncation is used from the start.
struct AdaptiveSme {
    p: TwoModeParams,
    full: (usize, usize),
    dims: (usize, usize),
    dt: f64,
    s: f64,
    tol: Option<f64>,
    weights_full: Vec<f64>,
    weights: Vec<f64>,
    k: SmeKernel,
}

const GROWTH: usize = 2;

impl AdaptiveSme {
    fn new(p: &TwoModeParams, full: (usize, usize), dt: f64, s: f64, rho0: &DensityMatrix, tol: Option<f64>, weights_full: Vec<f64>) -> Self {
        let (d0, d1) = full;
        let dims = match tol {
            None => full,
            Some(t) => {
                let r = rho0.entries();
                let (mut m0, mut m1) = (0, 0);
                for a in 0..d0 {
                    for b in 0..d1 {
                        if r[[a * d1 + b, a * d1 + b]].re.abs() > t {
                            m0 = m0.max(a);
                            m1 = m1.max(b);
                        }
                    }
                }
                ((m0 + 1 + GROWTH).min(d0), (m1 + 1 + GROWTH).min(d1))
            }
        };
        let rho = Self::embed(dims, |i, j| {
            let (a, b, c, d) = (i / dims.1, i % dims.1, j / dims.1, j % dims.1);
            rho0.entries()[[a * d1 + b, c * d1 + d]]
        });
        let weights = Self::restrict(&weights_full, full.1, dims);
        let k = SmeKernel::new(p, dims.0, dims.1, dt, s, rho);
        Self { p: *p, full, dims, dt, s, tol, weights_full, weights, k }
    }

    fn embed(dims: (usize, usize), f: impl Fn(usize, usize) -> C64) -> Split {
        let n = dims.0 * dims.1;
        let mut out = Split::zeros(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = f(i, j);
                out.re[i * n + j] = v.re;
                out.im[i * n + j] = v.im;
            }
        }
        out
    }

    fn restrict(w: &[f64], d1: usize, dims: (usize, usize)) -> Vec<f64> {
        (0..dims.0 * dims.1).map(|i| w[(i / dims.1) * d1 + i % dims.1]).collect()
    }

    fn edge_populations(&self) -> (f64, f64) {
        let (e0, e1) = self.dims;
        let n = e0 * e1;
        let pop = |i: usize| self.k.rho.re[i * n + i];
        let top0 = (0..e1).map(|b| pop((e0 - 1) * e1 + b)).sum();
        let top1 = (0..e0).map(|a| pop(a * e1 + e1 - 1)).sum();
        (top0, top1)
    }

    fn maybe_grow(&mut self) {
        let Some(tol) = self.tol else { return };
        let (d0, d1) = self.full;
        let (e0, e1) = self.dims;
        let (p0, p1) = self.edge_populations();
        let n0 = if p0 > tol { (e0 + GROWTH).min(d0) } else { e0 };
        let n1 = if p1 > tol { (e1 + GROWTH).min(d1) } else { e1 };
        if (n0, n1) == (e0, e1) {
            return;
        }
        let old = &self.k.rho;
        let on = e0 * e1;
        let rho = Self::embed((n0, n1), |i, j| {
            let (a, b, c, d) = (i / n1, i % n1, j / n1, j % n1);
            if a < e0 && b < e1 && c < e0 && d < e1 {
                old.get((a * e1 + b) * on + c * e1 + d)
            } else {
                ZERO
            }
        });
        self.dims = (n0, n1);
        self.weights = Self::restrict(&self.weights_full, d1, self.dims);
        self.k = SmeKernel::new(&self.p, n0, n1, self.dt, self.s, rho);
    }

    fn step(&mut self, dz: C64) {
        self.k.step(dz);
        self.maybe_grow();
    }

    fn observable(&self) -> f64 {
        self.k.diag_expectation(&self.weights)
    }

    fn state(&self) -> DensityMatrix {
        let (d1, (e0, e1)) = (self.full.1, self.dims);
        let n = self.full.0 * d1;
        let en = e0 * e1;
        let mut m = ndarray::Array2::zeros((n, n));
        for i in 0..en {
            for j in 0..en {
                m[[(i / e1) * d1 + i % e1, (j / e1) * d1 + j % e1]] = self.k.rho.get(i * en + j);
            }
        }
        DensityMatrix::from_raw(m)
    }
}

/// Mode-1 photon number as a diagonal observable on the product space.
pub fn mode1_number_weights(d0: usize, d1: usize) -> Vec<f64> {
    (0..d0 * d1).map(|i| (i % d1) as f64).collect()
}

pub fn mode0_number_weights(d0: usize, d1: usize) -> Vec<f64> {
    (0..d0 * d1).map(|i| (i / d1) as f64).collect()
}

/// Heterodyne stochastic master equation for `mode0 ⊗ mode1` with mode 0
/// monitored; `J_T` is binned over windows of `opts.window` steps.
pub fn heterodyne_sme_run(
    p: &TwoModeParams,
    dims: (FockDim, FockDim),
    dt: f64,
    t_total: f64,
    seed: u64,
) -> Result<HeterodyneRun> {
    heterodyne_sme_run_with(p, dims, dt, t_total, seed, 0, &SmeOptions::default())
}

pub fn heterodyne_sme_run_with(
    p: &TwoModeParams,
    dims: (FockDim, FockDim),
    dt: f64,
    t_total: f64,
    seed: u64,
    index: u64,
    opts: &SmeOptions,
) -> Result<HeterodyneRun> {
    p.validate()?;
    check_product_dim(dims, opts.product_cap)?;
    let (d0, d1) = (dims.0.get(), dims.1.get());
    let n = d0 * d1;
    if !(dt > 0.0) || !(t_total > 10.0 * dt) {
        return Err(invalid("t_total", "need dt > 0 and t_total > 10 dt"));
    }
    if opts.window == 0 {
        return Err(invalid("window", "window must be positive"));
    }
    let rho0 = match &opts.rho0 {
        Some(r) if r.dim() == n => r.clone(),
        Some(r) => return Err(KerrError::DimensionMismatch { expected: n, found: r.dim() }),
        None => DensityMatrix::vacuum(n)?,
    };
    let weights = match &opts.observable {
        Some(w) if w.len() == n => w.clone(),
        Some(w) => return Err(KerrError::DimensionMismatch { expected: n, found: w.len() }),
        None => mode1_number_weights(d0, d1),
    };
    let zscale = match opts.normalization {
        HeterodyneNormalization::Literal => 1.0,
        HeterodyneNormalization::Standard => std::f64::consts::FRAC_1_SQRT_2,
    };
    let mut k = AdaptiveSme::new(p, (d0, d1), dt, 2.0 * zscale * zscale, &rho0, opts.edge_tolerance, weights);
    let mut noise = NoiseStream::new(seed, index, dt);
    let n_windows = ((t_total / dt).round() as usize) / opts.window;
    let wdt = opts.window as f64 * dt;
    let mut times = Vec::with_capacity(n_windows);
    let mut power = Vec::with_capacity(n_windows);
    let mut obs = Vec::with_capacity(n_windows);
    let mut record = opts.keep_record.then(|| Vec::with_capacity(n_windows * opts.window));
    let mut states = opts.keep_states_every.map(|_| Vec::new());
    let sk = p.mode0.kappa.sqrt();
    let mut step = 0usize;
    for w in 0..n_windows {
        let (mut sa, mut sb) = (0.0, 0.0);
        let (mut xa, mut xb) = (0.0, 0.0);
        let mut ob = 0.0;
        for _ in 0..opts.window {
            if let (Some(every), Some(st)) = (opts.keep_states_every, states.as_mut()) {
                if step.is_multiple_of(every) {
                    st.push((step as f64 * dt, k.state()));
                }
            }
            let dw = noise.next_increment();
            let dz = dw * zscale;
            let a = k.k.mean_a0();
            // √κ₀ Tr[ρ(a + a†)] and i√κ₀ Tr[ρ(a − a†)]
            xa += 2.0 * sk * a.re;
            xb += -2.0 * sk * a.im;
            sa += dz.re;
            sb += dz.im;
            ob += k.observable();
            if let Some(r) = record.as_mut() {
                r.push(dz);
            }
            k.step(dz);
            step += 1;
        }
        let (tr, low) = (k.k.trace(), k.k.min_diag());
        if !tr.is_finite() || low < -1e-2 {
            return Err(KerrError::Integration {
                time: step as f64 * dt,
                reason: format!("conditional state collapsed (trace {tr:e}, min population {low:e})"),
            });
        }
        let m = opts.window as f64;
        let qa = xa / m + sa / wdt;
        let qb = xb / m + sb / wdt;
        times.push((w as f64 + 0.5) * wdt);
        power.push(0.5 * qa * qa + 0.5 * qb * qb);
        obs.push(ob / m);
    }
    Ok(HeterodyneRun {
        times,
        power_signal: power,
        conditional_states: states,
        record,
        observable: obs,
        seed,
        index,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LineshapePoint {
    pub pump_detuning: f64,
    pub probe_detuning_at_max: f64,
    pub frequency_shift: f64,
    pub averaged_power: f64,
    /// Seed-averaged, time-averaged J_T at every probe detuning.
    pub probe_scan: Vec<(f64, f64)>,
    /// Time- and seed-averaged mode-1 photon number at the maximising probe.
    pub mean_pump_photons: f64,
}

#[derive(Clone, Debug)]
pub struct LineshapeOptions {
    pub dims: (FockDim, FockDim),
    pub dt: f64,
    pub sme: SmeOptions,
}

impl LineshapeOptions {
    pub fn new(d0: usize, d1: usize) -> Result<Self> {
        Ok(Self {
            dims: (FockDim::new(d0)?, FockDim::new(d1)?),
            dt: DEFAULT_LINESHAPE_DT,
            sme: SmeOptions { keep_record: false, ..SmeOptions::default() },
        })
    }
}

/// Pump linewidth `κ₁/2π` of the readout device in MHz; rates below are in units of `κ₁`.
pub const READOUT_KAPPA1_MHZ: f64 = 2.9;
pub const READOUT_KAPPA0_MHZ: f64 = 1.0;
pub const READOUT_K0_MHZ: f64 = 0.5;
pub const READOUT_K1_MHZ: f64 = 5.7;
/// Pump amplitude at 0 dB, `ε_0dB/2π`, in MHz.
pub const READOUT_EPS_0DB_MHZ: f64 = 1.83;

/// Probe (mode 0) and pump (mode 1) of the readout device with
/// `K₀₁ = 4√(K₀K₁)`, pump amplitude `ε_r·ε_0dB` and probe amplitude
/// `probe_drive·κ₀`.
pub fn readout_device(pump_detuning: f64, drive_ratio: f64, probe_detuning: f64, probe_drive: f64) -> Result<TwoModeParams> {
    let s = 1.0 / READOUT_KAPPA1_MHZ;
    let kappa0 = READOUT_KAPPA0_MHZ * s;
    let (k0, k1) = (READOUT_K0_MHZ * s, READOUT_K1_MHZ * s);
    let p = TwoModeParams {
        mode0: ModeParams::new(probe_detuning, k0, kappa0, probe_drive * kappa0)?,
        mode1: ModeParams::new(pump_detuning, k1, 1.0, drive_ratio * READOUT_EPS_0DB_MHZ * s)?,
        cross_kerr: crate::hilbert::cross_kerr_estimate(k0, k1),
    };
    p.validate()?;
    Ok(p)
}

/// Seed-averaged, time-averaged `J_T` and mode-1 photon number at one
/// `(pump, probe)` point; seeds `0..n_avg` of stream `seed` are shared by
/// every point so probe scans use common random numbers.
pub fn averaged_power(
    p_base: &TwoModeParams,
    pump: f64,
    probe: f64,
    t_m: f64,
    n_avg: usize,
    seed: u64,
    opts: &LineshapeOptions,
) -> Result<(f64, f64)> {
    let mut p = *p_base;
    p.mode1.delta = pump;
    p.mode0.delta = probe;
    let runs: Vec<(f64, f64)> = (0..n_avg as u64)
        .into_par_iter()
        .map(|i| {
            let r = heterodyne_sme_run_with(&p, opts.dims, opts.dt, t_m, seed, i, &opts.sme)?;
            let n1 = r.observable.iter().sum::<f64>() / r.observable.len() as f64;
            Ok((r.mean_power(), n1))
        })
        .collect::<Result<_>>()?;
    let m = n_avg as f64;
    Ok((runs.iter().map(|r| r.0).sum::<f64>() / m, runs.iter().map(|r| r.1).sum::<f64>() / m))
}

/// Probe-detuning scan at each pump detuning; reports the maximising probe
/// detuning and the corresponding shift `−Δ₀*`.
pub fn lineshape_scan(
    p_base: &TwoModeParams,
    pump_grid: &[f64],
    probe_grid: &[f64],
    t_m: f64,
    n_avg: usize,
    seed: u64,
) -> Result<Vec<LineshapePoint>> {
    let opts = LineshapeOptions::new(6, 30)?;
    lineshape_scan_with(p_base, pump_grid, probe_grid, t_m, n_avg, seed, &opts)
}

pub fn lineshape_scan_with(
    p_base: &TwoModeParams,
    pump_grid: &[f64],
    probe_grid: &[f64],
    t_m: f64,
    n_avg: usize,
    seed: u64,
    opts: &LineshapeOptions,
) -> Result<Vec<LineshapePoint>> {
    if pump_grid.is_empty() || probe_grid.is_empty() || n_avg == 0 {
        return Err(invalid("grid", "pump grid, probe grid and n_avg must be non-empty"));
    }
    if !(t_m > 10.0 * opts.dt) {
        return Err(invalid("t_m", "measurement time must exceed 10 dt"));
    }
    pump_grid
        .iter()
        .map(|&pump| {
            let scan: Vec<(f64, f64, f64)> = probe_grid
                .iter()
                .map(|&probe| averaged_power(p_base, pump, probe, t_m, n_avg, seed, opts).map(|(j, n1)| (probe, j, n1)))
                .collect::<Result<_>>()?;
            Ok(summarize_scan(pump, &scan))
        })
        .collect()
}

/// Picks the probe detuning with the largest averaged signal.
pub fn summarize_scan(pump: f64, scan: &[(f64, f64, f64)]) -> LineshapePoint {
    let best = scan.iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty scan");
    LineshapePoint {
        pump_detuning: pump,
        probe_detuning_at_max: best.0,
        frequency_shift: -best.0,
        averaged_power: best.1,
        probe_scan: scan.iter().map(|s| (s.0, s.1)).collect(),
        mean_pump_photons: best.2,
    }
}

/// Single-mode estimate of the probe shift, `−K₀₁⟨a₁†a₁⟩_s`.
pub fn steady_state_shift(mode1: &ModeParams, cross_kerr: f64, d1: FockDim) -> Result<f64> {
    let l = crate::liouville::kerr_liouvillian(mode1, d1)?;
    let rho = crate::liouville::steady_state(&l)?;
    Ok(-cross_kerr * crate::liouville::photon_number(&rho))
}
