//! Lindblad master equation: superoperators, steady states and time evolution.
//!
//! Density matrices are vectorised by column stacking, so element `(m, n)`
//! sits at index `m + d·n` and
//!
//! ```text
//! ℒ = −i(I⊗H − Hᵀ⊗I) + Σⱼ κⱼ (c̄ⱼ⊗cⱼ − ½ I⊗cⱼ†cⱼ − ½ (cⱼ†cⱼ)ᵀ⊗I).
//! ```

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, Factorize, ReciprocalConditionNum, Solve, SVD, UPLO};

use crate::error::{invalid, KerrError, Result};
use crate::hilbert::{Ket, OperatorMatrix, C64, I, ONE, TRUNCATION_TAIL_TOL, ZERO};

/// Largest `d²` for which a dense superoperator matrix is materialised.
pub const DENSE_CAP: usize = 6400;

/// Row-compressed operator used for matrix-free products.
#[derive(Clone, Debug)]
pub(crate) struct SparseOp {
    d: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseOp {
    pub(crate) fn from_dense(a: &Array2<C64>) -> Self {
        let d = a.nrows();
        let rows = (0..d)
            .map(|i| (0..d).filter(|&k| a[[i, k]] != ZERO).map(|k| (k, a[[i, k]])).collect())
            .collect();
        Self { d, rows }
    }

    /// `out += s·A·x`
    pub(crate) fn left_acc(&self, s: C64, x: &[C64], out: &mut [C64]) {
        let d = self.d;
        for (i, row) in self.rows.iter().enumerate() {
            let o = &mut out[i * d..(i + 1) * d];
            for &(k, v) in row {
                let sv = s * v;
                let xr = &x[k * d..(k + 1) * d];
                for (oj, xj) in o.iter_mut().zip(xr) {
                    *oj += sv * xj;
                }
            }
        }
    }

    /// `out += s·x·A†`
    pub(crate) fn right_adj_acc(&self, s: C64, x: &[C64], out: &mut [C64]) {
        let d = self.d;
        for i in 0..d {
            let xr = &x[i * d..(i + 1) * d];
            let o = &mut out[i * d..(i + 1) * d];
            for (j, row) in self.rows.iter().enumerate() {
                let mut acc = ZERO;
                for &(k, v) in row {
                    acc += xr[k] * v.conj();
                }
                o[j] += s * acc;
            }
        }
    }
}

/// Lindblad generator stored in factored form; the dense `d²×d²` matrix is
/// assembled on first request.
#[derive(Debug)]
pub struct Superoperator {
    d: usize,
    hamiltonian: OperatorMatrix,
    collapse: Vec<(OperatorMatrix, f64)>,
    /// `H − (i/2) Σ κ c†c`
    h_eff: Array2<C64>,
    h_eff_diag: Array1<C64>,
    h_eff_offdiag: SparseOp,
    h_eff_sparse: SparseOp,
    /// `√κ c` for each channel
    jumps: Vec<SparseOp>,
    dense: OnceLock<Array2<C64>>,
}

impl Clone for Superoperator {
    fn clone(&self) -> Self {
        Self {
            d: self.d,
            hamiltonian: self.hamiltonian.clone(),
            collapse: self.collapse.clone(),
            h_eff: self.h_eff.clone(),
            h_eff_diag: self.h_eff_diag.clone(),
            h_eff_offdiag: self.h_eff_offdiag.clone(),
            h_eff_sparse: self.h_eff_sparse.clone(),
            jumps: self.jumps.clone(),
            dense: OnceLock::new(),
        }
    }
}

pub fn build_liouvillian(h: &OperatorMatrix, collapse: &[(OperatorMatrix, f64)]) -> Result<Superoperator> {
    let d = h.dim();
    if !h.is_hermitian(1e-10) {
        return Err(invalid("H", "Hamiltonian must be Hermitian"));
    }
    let mut h_eff = h.entries().clone();
    let mut jumps = Vec::with_capacity(collapse.len());
    for (c, rate) in collapse {
        if c.dim() != d {
            return Err(KerrError::DimensionMismatch { expected: d, found: c.dim() });
        }
        if !(*rate >= 0.0) || !rate.is_finite() {
            return Err(invalid("rate", "collapse rates must be finite and non-negative"));
        }
        let cdc = c.adjoint().dot(c);
        h_eff.scaled_add(C64::new(0.0, -0.5 * rate), cdc.entries());
        jumps.push(SparseOp::from_dense(&c.entries().mapv(|z| z * rate.sqrt())));
    }
    let h_eff_diag = h_eff.diag().to_owned();
    let mut off = h_eff.clone();
    off.diag_mut().fill(ZERO);
    Ok(Superoperator {
        d,
        hamiltonian: h.clone(),
        collapse: collapse.to_vec(),
        h_eff_offdiag: SparseOp::from_dense(&off),
        h_eff_sparse: SparseOp::from_dense(&h_eff),
        h_eff_diag,
        h_eff,
        jumps,
        dense: OnceLock::new(),
    })
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.hamiltonian
    }

    pub fn collapse(&self) -> &[(OperatorMatrix, f64)] {
        &self.collapse
    }

    /// `ℒ[ρ]` evaluated matrix-free.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let d = self.d;
        let x = rho.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut out = Array2::zeros((d, d));
        let o = out.as_slice_mut().expect("fresh array");
        self.h_eff_sparse.left_acc(-I, xs, o);
        self.h_eff_sparse.right_adj_acc(I, xs, o);
        self.add_jumps(xs, o);
        out
    }

    /// Off-diagonal remainder `B = ℒ − D` where `D` is diagonal in the Fock basis.
    pub(crate) fn apply_offdiag(&self, x: &[C64], out: &mut [C64]) {
        out.fill(ZERO);
        self.h_eff_offdiag.left_acc(-I, x, out);
        self.h_eff_offdiag.right_adj_acc(I, x, out);
        self.add_jumps(x, out);
    }

    fn add_jumps(&self, x: &[C64], out: &mut [C64]) {
        let d = self.d;
        let mut tmp = vec![ZERO; d * d];
        for c in &self.jumps {
            tmp.fill(ZERO);
            c.left_acc(ONE, x, &mut tmp);
            c.right_adj_acc(ONE, &tmp, out);
        }
    }

    /// Diagonal of `H_eff`; `D[ρ]ₘₙ = (−i hₘ + i h̄ₙ) ρₘₙ`.
    pub(crate) fn diag_h_eff(&self) -> &Array1<C64> {
        &self.h_eff_diag
    }

    pub fn matrix(&self) -> Result<&Array2<C64>> {
        let n = self.d * self.d;
        if n > DENSE_CAP {
            return Err(KerrError::ResourceLimit { what: "superoperator dimension", value: n, cap: DENSE_CAP });
        }
        Ok(self.dense.get_or_init(|| self.assemble()))
    }

    fn assemble(&self) -> Array2<C64> {
        let d = self.d;
        let mut l = Array2::<C64>::zeros((d * d, d * d));
        for ((i, k), &v) in self.h_eff.indexed_iter() {
            if v == ZERO {
                continue;
            }
            for j in 0..d {
                l[[i + d * j, k + d * j]] += -I * v;
                // i conj(H_eff) ⊗ I
                l[[j + d * i, j + d * k]] += I * v.conj();
            }
        }
        for c in &self.jumps {
            for (j, row_j) in c.rows.iter().enumerate() {
                for &(lc, cjl) in row_j {
                    for (i, row_i) in c.rows.iter().enumerate() {
                        for &(k, cik) in row_i {
                            l[[i + d * j, k + d * lc]] += cjl.conj() * cik;
                        }
                    }
                }
            }
        }
        l
    }
}

/// Column-stacked vectorisation.
pub fn vectorize(rho: &Array2<C64>) -> Array1<C64> {
    rho.t().iter().copied().collect()
}

pub fn unvectorize(x: &Array1<C64>, d: usize) -> Array2<C64> {
    Array2::from_shape_vec((d, d).f(), x.to_vec()).expect("length d²").as_standard_layout().to_owned()
}

/// Hermitian, unit-trace density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: Array2<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity and unit trace to 1e−10.
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(KerrError::DimensionMismatch { expected: r, found: c });
        }
        let rho = Self { entries };
        if rho.hermiticity_defect() > 1e-10 {
            return Err(invalid("rho", "density matrix is not Hermitian"));
        }
        if (rho.trace() - ONE).norm() > 1e-10 {
            return Err(invalid("rho", format!("trace {} differs from 1", rho.trace())));
        }
        Ok(rho)
    }

    /// Hermitises and normalises the trace.
    pub fn from_unnormalized(entries: &Array2<C64>) -> Self {
        let mut h = (entries + &entries.t().mapv(|z| z.conj())) * C64::new(0.5, 0.0);
        let tr = h.diag().sum().re;
        h.mapv_inplace(|z| z / tr);
        Self { entries: h }
    }

    pub(crate) fn from_raw(entries: Array2<C64>) -> Self {
        Self { entries }
    }

    pub fn from_ket(ket: &Ket) -> Self {
        Self::from_unnormalized(&ket.projector())
    }

    pub fn fock(n: usize, d: usize) -> Result<Self> {
        let dim = crate::hilbert::FockDim::new(d)?;
        Ok(Self::from_ket(&Ket::fock(n, dim)?))
    }

    pub fn vacuum(d: usize) -> Result<Self> {
        Self::fock(0, d)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { entries: Array2::eye(d).mapv(|z: C64| z / d as f64) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        OperatorMatrix::from_raw(self.entries.clone()).hermiticity_defect()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let h = (&self.entries + &self.entries.t().mapv(|z| z.conj())) * C64::new(0.5, 0.0);
        let (w, _) = h.eigh(UPLO::Lower)?;
        Ok(w.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Checks all physical-state invariants.
    pub fn check_physical(&self, herm_tol: f64, trace_tol: f64, psd_tol: f64) -> Result<()> {
        if self.hermiticity_defect() > herm_tol {
            return Err(invalid("rho", "not Hermitian"));
        }
        if (self.trace() - ONE).norm() > trace_tol {
            return Err(invalid("rho", "trace differs from 1"));
        }
        let m = self.min_eigenvalue()?;
        if m < -psd_tol {
            return Err(invalid("rho", format!("negative eigenvalue {m:e}")));
        }
        Ok(())
    }

    pub fn expectation(&self, op: &OperatorMatrix) -> C64 {
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            for k in 0..d {
                acc += self.entries[[i, k]] * op.entries()[[k, i]];
            }
        }
        acc
    }

    /// `Σₙ wₙ ρₙₙ` for an operator diagonal in the Fock basis.
    pub fn diagonal_expectation(&self, weights: &[f64]) -> f64 {
        self.entries.diag().iter().zip(weights).map(|(z, w)| z.re * w).sum()
    }

    /// Population of the last 10% of Fock levels.
    pub fn tail_population(&self) -> f64 {
        let d = self.dim();
        let start = d - crate::hilbert::tail_levels(d);
        (start..d).map(|n| self.entries[[n, n]].re).sum()
    }

    pub fn truncation_adequate(&self) -> bool {
        self.tail_population() < TRUNCATION_TAIL_TOL
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries.iter().zip(other.entries.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Reduced state of one factor of a `d0 ⊗ d1` product state.
    pub fn partial_trace(&self, dims: (usize, usize), keep: usize) -> Self {
        let (d0, d1) = dims;
        let e = &self.entries;
        let out = if keep == 0 {
            Array2::from_shape_fn((d0, d0), |(a, b)| (0..d1).map(|j| e[[a * d1 + j, b * d1 + j]]).sum())
        } else {
            Array2::from_shape_fn((d1, d1), |(a, b)| (0..d0).map(|i| e[[i * d1 + a, i * d1 + b]]).sum())
        };
        Self { entries: out }
    }
}

pub fn photon_number(rho: &DensityMatrix) -> f64 {
    let w: Vec<f64> = (0..rho.dim()).map(|n| n as f64).collect();
    rho.diagonal_expectation(&w)
}

pub fn mandel_q(rho: &DensityMatrix) -> Result<f64> {
    let (mut m1, mut m2) = (0.0, 0.0);
    for n in 0..rho.dim() {
        let p = rho.entries()[[n, n]].re;
        m1 += n as f64 * p;
        m2 += (n * n) as f64 * p;
    }
    if m1.abs() < 1e-300 {
        return Err(KerrError::UndefinedMandelQ);
    }
    Ok((m2 - m1 * m1 - m1) / m1)
}

/// Unique unit-trace null vector of `ℒ`.
///
/// The first row of `ℒ` is replaced by the trace functional and the augmented
/// system is solved by LU with two rounds of iterative refinement.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    let d = l.dim();
    let lm = l.matrix()?;
    let mut m = lm.clone();
    m.row_mut(0).fill(ZERO);
    for k in 0..d {
        m[[0, k + d * k]] = ONE;
    }
    let mut b = Array1::<C64>::zeros(d * d);
    b[0] = ONE;
    let factored = m.factorize();
    let well_posed = match &factored {
        Ok(lu) => lu.rcond()? >= 1e-14,
        Err(_) => false,
    };
    if !well_posed {
        let nullity = null_space_dim(lm)?;
        if nullity > 1 {
            return Err(KerrError::Degenerate { nullity });
        }
    }
    let lu = factored?;
    let mut x = lu.solve(&b)?;
    for _ in 0..2 {
        let r = &b - &m.dot(&x);
        let dx = lu.solve(&r)?;
        x += &dx;
    }
    let rho = DensityMatrix::from_unnormalized(&unvectorize(&x, d));
    let resid = l.apply(rho.entries()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = lm.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if !(resid < 1e-9 * scale) {
        return Err(KerrError::Linalg(format!("steady-state residual {resid:e} too large")));
    }
    Ok(rho)
}

fn null_space_dim(m: &Array2<C64>) -> Result<usize> {
    let (_, s, _) = m.svd(false, false)?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    Ok(s.iter().filter(|&&x| x <= 1e-10 * smax).count())
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
    pub keep_states: bool,
    /// Renormalise trace and Hermitise after every accepted step.
    pub renormalize: bool,
    /// Diagonal weights of the recorded observable; defaults to `n`.
    pub observable: Option<Vec<f64>>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h_init: 1e-3,
            h_max: 0.5,
            max_steps: 50_000_000,
            keep_states: true,
            renormalize: true,
            observable: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub photon_numbers: Vec<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive integrator for `dρ/dt = ℒ[ρ]`.
///
/// Uses a Lawson (integrating-factor) Dormand–Prince 5(4) scheme: the part of
/// `ℒ` diagonal in the Fock basis is propagated exactly, which removes the
/// `K n²` phase stiffness, and the remainder is integrated explicitly.
pub struct Propagator<'a> {
    l: &'a Superoperator,
    d: usize,
    rho: Vec<C64>,
    k_first: Vec<C64>,
    t: f64,
    h: f64,
    opts: EvolveOptions,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    hd: Array1<C64>,
}

impl<'a> Propagator<'a> {
    pub fn new(l: &'a Superoperator, rho0: &DensityMatrix, t0: f64, opts: EvolveOptions) -> Result<Self> {
        let d = l.dim();
        if rho0.dim() != d {
            return Err(KerrError::DimensionMismatch { expected: d, found: rho0.dim() });
        }
        let rho: Vec<C64> = rho0.entries().as_standard_layout().iter().copied().collect();
        let mut k_first = vec![ZERO; d * d];
        l.apply_offdiag(&rho, &mut k_first);
        Ok(Self {
            l,
            d,
            rho,
            k_first,
            t: t0,
            h: opts.h_init,
            opts,
            steps_accepted: 0,
            steps_rejected: 0,
            hd: l.diag_h_eff().clone(),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> DensityMatrix {
        DensityMatrix::from_raw(Array2::from_shape_vec((self.d, self.d), self.rho.clone()).expect("d×d"))
    }

    pub fn diagonal_expectation(&self, w: &[f64]) -> f64 {
        (0..self.d).map(|n| self.rho[n * self.d + n].re * w[n]).sum()
    }

    /// `p(s)ₘ = exp(−i hₘ s)`; the propagator is `E(s)ₘₙ = pₘ p̄ₙ`.
    fn phases(&self, s: f64) -> Vec<C64> {
        self.hd.iter().map(|h| (-I * h * s).exp()).collect()
    }

    fn apply_e(&self, p: &[C64], x: &mut [C64]) {
        let d = self.d;
        for m in 0..d {
            let pm = p[m];
            for n in 0..d {
                x[m * d + n] *= pm * p[n].conj();
            }
        }
    }

    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        let n = self.d * self.d;
        let mut k: Vec<Vec<C64>> = vec![vec![ZERO; n]; 7];
        let mut y = vec![ZERO; n];
        let mut stage = vec![ZERO; n];
        while self.t < t_end {
            if self.steps_accepted + self.steps_rejected >= self.opts.max_steps {
                return Err(KerrError::Integration { time: self.t, reason: "step budget exhausted".into() });
            }
            let remaining = t_end - self.t;
            let mut h = self.h.min(self.opts.h_max);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h < 1e-14 * self.t.abs().max(1.0) {
                return Err(KerrError::Integration { time: self.t, reason: format!("step size underflow ({h:e})") });
            }
            // interaction-picture slopes: K_j = E(−c_j h) B[E(c_j h) V_j]
            let p_minus: Vec<Vec<C64>> = C.iter().map(|c| self.phases(-c * h)).collect();
            let p_plus: Vec<Vec<C64>> = C.iter().map(|c| self.phases(c * h)).collect();
            k[0].copy_from_slice(&self.k_first);
            for s in 1..7 {
                stage.copy_from_slice(&self.rho);
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j] * h;
                    if a != 0.0 {
                        for (x, kv) in stage.iter_mut().zip(kj) {
                            *x += kv * a;
                        }
                    }
                }
                self.apply_e(&p_plus[s], &mut stage);
                if s == 6 {
                    y.copy_from_slice(&stage);
                }
                self.l.apply_offdiag(&stage, &mut k[s]);
                if s < 6 {
                    self.apply_e(&p_minus[s], &mut k[s]);
                }
            }
            // y = E(h)(v + h Σ b_j K_j); stage 7 slope is stored un-transformed
            let mut k7_int = k[6].clone();
            self.apply_e(&p_minus[6], &mut k7_int);
            let mut err = vec![ZERO; n];
            for j in 0..7 {
                let w = (B5[j] - B4[j]) * h;
                if w == 0.0 {
                    continue;
                }
                let kj = if j == 6 { &k7_int } else { &k[j] };
                for (e, kv) in err.iter_mut().zip(kj) {
                    *e += kv * w;
                }
            }
            self.apply_e(&p_plus[6], &mut err);
            let mut err_norm = 0.0f64;
            for i in 0..n {
                let sc = self.opts.atol + self.opts.rtol * self.rho[i].norm().max(y[i].norm());
                err_norm = err_norm.max(err[i].norm() / sc);
            }
            if !err_norm.is_finite() {
                return Err(KerrError::Integration { time: self.t, reason: "non-finite state".into() });
            }
            if err_norm <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.rho.copy_from_slice(&y);
                self.k_first.copy_from_slice(&k[6]);
                if self.opts.renormalize {
                    self.renormalize();
                }
                self.steps_accepted += 1;
                let fac = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    self.h = h * fac;
                } else {
                    self.h = self.h.max(h * fac.min(1.0));
                }
            } else {
                self.steps_rejected += 1;
                self.h = h * (0.9 * err_norm.powf(-0.25)).clamp(0.1, 0.9);
            }
        }
        Ok(())
    }

    fn renormalize(&mut self) {
        let d = self.d;
        let tr: f64 = (0..d).map(|m| self.rho[m * d + m].re).sum();
        if tr.abs() < 1e-300 {
            return;
        }
        let s = 1.0 / tr;
        for m in 0..d {
            for n in m..d {
                let a = (self.rho[m * d + n] + self.rho[n * d + m].conj()) * 0.5 * s;
                self.rho[m * d + n] = a;
                self.rho[n * d + m] = a.conj();
                let b = (self.k_first[m * d + n] + self.k_first[n * d + m].conj()) * 0.5 * s;
                self.k_first[m * d + n] = b;
                self.k_first[n * d + m] = b.conj();
            }
        }
    }
}

pub fn evolve(rho0: &DensityMatrix, l: &Superoperator, times: &[f64]) -> Result<EvolutionResult> {
    evolve_with(rho0, l, times, EvolveOptions::default())
}

pub fn evolve_with(
    rho0: &DensityMatrix,
    l: &Superoperator,
    times: &[f64],
    opts: EvolveOptions,
) -> Result<EvolutionResult> {
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("times", "times must be non-empty, start at t ≥ 0 and increase strictly"));
    }
    let d = l.dim();
    let weights = match &opts.observable {
        Some(w) if w.len() == d => w.clone(),
        Some(w) => return Err(KerrError::DimensionMismatch { expected: d, found: w.len() }),
        None => (0..d).map(|n| n as f64).collect(),
    };
    let keep = opts.keep_states;
    let mut prop = Propagator::new(l, rho0, times[0], opts)?;
    let mut out = EvolutionResult {
        times: Vec::with_capacity(times.len()),
        states: Vec::new(),
        photon_numbers: Vec::with_capacity(times.len()),
        steps_accepted: 0,
        steps_rejected: 0,
    };
    for &t in times {
        prop.advance_to(t)?;
        out.times.push(t);
        out.photon_numbers.push(prop.diagonal_expectation(&weights));
        if keep {
            out.states.push(prop.state());
        }
    }
    out.steps_accepted = prop.steps_accepted;
    out.steps_rejected = prop.steps_rejected;
    Ok(out)
}

/// Single-mode Kerr Liouvillian with photon loss at rate κ.
pub fn kerr_liouvillian(p: &crate::hilbert::ModeParams, dim: crate::hilbert::FockDim) -> Result<Superoperator> {
    let h = crate::hilbert::kerr_hamiltonian(p, dim)?;
    let a = crate::hilbert::annihilation(dim);
    build_liouvillian(&h, &[(a, p.kappa)])
}

/// Two-mode Liouvillian with independent loss on each mode.
pub fn two_mode_liouvillian(
    p: &crate::hilbert::TwoModeParams,
    dims: (crate::hilbert::FockDim, crate::hilbert::FockDim),
) -> Result<Superoperator> {
    let h = crate::hilbert::two_mode_hamiltonian(p, dims)?;
    let a0 = crate::hilbert::embed_mode0(&crate::hilbert::annihilation(dims.0), dims.1.get());
    let a1 = crate::hilbert::embed_mode1(&crate::hilbert::annihilation(dims.1), dims.0.get());
    build_liouvillian(&h, &[(a0, p.mode0.kappa), (a1, p.mode1.kappa)])
}

/// Uniform output grid `0, dt, …, t_max`.
pub fn time_grid(t_max: f64, dt: f64) -> Vec<f64> {
    let n = (t_max / dt).round() as usize;
    (0..=n).map(|i| i as f64 * dt).collect()
}
