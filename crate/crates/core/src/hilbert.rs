//! Truncated Fock-space operator algebra.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, KerrError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default cap on the dimension of a two-mode product space.
pub const DEFAULT_PRODUCT_CAP: usize = 400;

/// Tail population (last 10% of levels) above which a truncation is flagged.
pub const TRUNCATION_TAIL_TOL: f64 = 1e-6;

/// Number of retained Fock levels `0..d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FockDim(usize);

impl FockDim {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(KerrError::InvalidDimension(d));
        }
        Ok(Self(d))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for FockDim {
    type Error = KerrError;
    fn try_from(d: usize) -> Result<Self> {
        Self::new(d)
    }
}

impl From<FockDim> for usize {
    fn from(d: FockDim) -> usize {
        d.0
    }
}

/// Dense square complex matrix acting on a (possibly product) Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    entries: Array2<C64>,
}

impl OperatorMatrix {
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(KerrError::DimensionMismatch { expected: r, found: c });
        }
        if r == 0 {
            return Err(KerrError::InvalidDimension(0));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("entries", "non-finite matrix element"));
        }
        Ok(Self { entries })
    }

    pub(crate) fn from_raw(entries: Array2<C64>) -> Self {
        Self { entries }
    }

    pub fn zeros(d: usize) -> Self {
        Self { entries: Array2::zeros((d, d)) }
    }

    pub fn identity(d: usize) -> Self {
        Self { entries: Array2::eye(d) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.t().mapv(|z| z.conj()) }
    }

    pub fn dot(&self, other: &Self) -> Self {
        Self { entries: self.entries.dot(&other.entries) }
    }

    pub fn apply(&self, ket: &Ket) -> Ket {
        Ket { amplitudes: self.entries.dot(&ket.amplitudes) }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { entries: self.entries.mapv(|z| z * s) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { entries: &self.entries + &other.entries }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { entries: &self.entries - &other.entries }
    }

    /// Kronecker product `self ⊗ other`; index of `|i⟩⊗|j⟩` is `i·d_other + j`.
    pub fn kron(&self, other: &Self) -> Self {
        let (da, db) = (self.dim(), other.dim());
        let mut out = Array2::zeros((da * db, da * db));
        for ((i, k), &a) in self.entries.indexed_iter() {
            if a == ZERO {
                continue;
            }
            for ((j, l), &b) in other.entries.indexed_iter() {
                out[[i * db + j, k * db + l]] = a * b;
            }
        }
        Self { entries: out }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.dot(other).sub(&other.dot(self))
    }

    /// Largest entry of `|H − H†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let diff = (self.entries[[i, j]] - self.entries[[j, i]].conj()).norm();
                worst = worst.max(diff);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Pure state as a column of Fock amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    pub amplitudes: Array1<C64>,
}

impl Ket {
    pub fn new(amplitudes: Array1<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn fock(n: usize, dim: FockDim) -> Result<Self> {
        if n >= dim.get() {
            return Err(invalid("n", format!("level {n} outside truncation {}", dim.get())));
        }
        let mut amplitudes = Array1::zeros(dim.get());
        amplitudes[n] = ONE;
        Ok(Self { amplitudes })
    }

    pub fn vacuum(dim: FockDim) -> Self {
        Self::fock(0, dim).expect("vacuum always fits")
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self { amplitudes: self.amplitudes.mapv(|z| z / n) }
    }

    pub fn projector(&self) -> Array2<C64> {
        let d = self.dim();
        Array2::from_shape_fn((d, d), |(i, j)| self.amplitudes[i] * self.amplitudes[j].conj())
    }

    pub fn expectation(&self, op: &OperatorMatrix) -> C64 {
        let v = op.entries().dot(&self.amplitudes);
        self.amplitudes.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Coherent state together with its truncation diagnostics.
#[derive(Clone, Debug)]
pub struct CoherentState {
    pub ket: Ket,
    /// Untruncated Poisson weight beyond the last retained level.
    pub tail_weight: f64,
    pub truncation_warning: bool,
}

/// Sign convention for the coherent drive term.
///
/// The variants are named after the constant that appears in the amplitude
/// equation `dα/dt = … + c`:
///
/// - `EpsilonADagger`: `H ⊃ ε a† + ε* a`, so `c = −iε`.
/// - `MinusIEpsilon`: `c = −iε`; the same Hamiltonian as `EpsilonADagger`.
/// - `PlusEpsilon`: `c = +ε`, i.e. `H ⊃ iε a† − iε* a`.
///
/// All three describe the same physics up to a global phase of the drive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DrivePhase {
    MinusIEpsilon,
    PlusEpsilon,
    #[default]
    EpsilonADagger,
}

/// Parameters of one driven, damped Kerr mode in the drive frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub delta: f64,
    pub kerr: f64,
    pub kappa: f64,
    pub drive: C64,
    #[serde(default)]
    pub drive_phase_convention: DrivePhase,
}

impl ModeParams {
    pub fn new(delta: f64, kerr: f64, kappa: f64, drive: f64) -> Result<Self> {
        let p = Self {
            delta,
            kerr,
            kappa,
            drive: C64::new(drive, 0.0),
            drive_phase_convention: DrivePhase::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_convention(mut self, c: DrivePhase) -> Self {
        self.drive_phase_convention = c;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_drive(mut self, drive: C64) -> Self {
        self.drive = drive;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.delta, self.kerr, self.kappa, self.drive.re, self.drive.im];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(invalid("mode", "non-finite parameter"));
        }
        if !(self.kappa > 0.0) {
            return Err(invalid("kappa", "kappa must be positive"));
        }
        if self.kerr < 0.0 {
            return Err(invalid("kerr", "kerr must be non-negative"));
        }
        Ok(())
    }

    /// Coefficient `f` of `a†` in the Hamiltonian (`H ⊃ f a† + f* a`).
    pub fn hamiltonian_drive(&self) -> C64 {
        match self.drive_phase_convention {
            DrivePhase::EpsilonADagger | DrivePhase::MinusIEpsilon => self.drive,
            DrivePhase::PlusEpsilon => I * self.drive,
        }
    }

    /// Constant term of the amplitude equation, `−i f`.
    pub fn eom_drive(&self) -> C64 {
        -I * self.hamiltonian_drive()
    }
}

/// Two Kerr modes coupled by a cross-Kerr term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoModeParams {
    pub mode0: ModeParams,
    pub mode1: ModeParams,
    pub cross_kerr: f64,
}

impl TwoModeParams {
    pub fn validate(&self) -> Result<()> {
        self.mode0.validate()?;
        self.mode1.validate()?;
        if !(self.cross_kerr >= 0.0) {
            return Err(invalid("cross_kerr", "cross_kerr must be non-negative"));
        }
        Ok(())
    }
}

/// Cross-Kerr estimate `4√(K₀K₁)`.
pub fn cross_kerr_estimate(k0: f64, k1: f64) -> f64 {
    4.0 * (k0 * k1).sqrt()
}

pub fn annihilation(dim: FockDim) -> OperatorMatrix {
    let d = dim.get();
    let mut a = Array2::zeros((d, d));
    for n in 0..d - 1 {
        a[[n, n + 1]] = C64::new(((n + 1) as f64).sqrt(), 0.0);
    }
    OperatorMatrix::from_raw(a)
}

pub fn creation(dim: FockDim) -> OperatorMatrix {
    annihilation(dim).adjoint()
}

pub fn number(dim: FockDim) -> OperatorMatrix {
    let d = dim.get();
    OperatorMatrix::from_raw(Array2::from_diag(&Array1::from_shape_fn(d, |n| {
        C64::new(n as f64, 0.0)
    })))
}

/// `Δ n − K n² + f a† + f* a` in the drive frame.
pub fn kerr_hamiltonian(p: &ModeParams, dim: FockDim) -> Result<OperatorMatrix> {
    p.validate()?;
    let d = dim.get();
    let f = p.hamiltonian_drive();
    let mut h = Array2::zeros((d, d));
    for n in 0..d {
        let nf = n as f64;
        h[[n, n]] = C64::new(p.delta * nf - p.kerr * nf * nf, 0.0);
        if n + 1 < d {
            let s = ((n + 1) as f64).sqrt();
            h[[n + 1, n]] = f * s;
            h[[n, n + 1]] = f.conj() * s;
        }
    }
    Ok(OperatorMatrix::from_raw(h))
}

/// Hamiltonian on `mode0 ⊗ mode1` with index `n₀·d₁ + n₁`.
pub fn two_mode_hamiltonian(p: &TwoModeParams, dims: (FockDim, FockDim)) -> Result<OperatorMatrix> {
    two_mode_hamiltonian_with_cap(p, dims, DEFAULT_PRODUCT_CAP)
}

pub fn two_mode_hamiltonian_with_cap(
    p: &TwoModeParams,
    dims: (FockDim, FockDim),
    cap: usize,
) -> Result<OperatorMatrix> {
    p.validate()?;
    check_product_dim(dims, cap)?;
    let (d0, d1) = (dims.0.get(), dims.1.get());
    let h0 = kerr_hamiltonian(&p.mode0, dims.0)?;
    let h1 = kerr_hamiltonian(&p.mode1, dims.1)?;
    let mut h = h0
        .kron(&OperatorMatrix::identity(d1))
        .add(&OperatorMatrix::identity(d0).kron(&h1))
        .into_entries();
    for n0 in 0..d0 {
        for n1 in 0..d1 {
            let k = n0 * d1 + n1;
            h[[k, k]] -= C64::new(p.cross_kerr * (n0 * n1) as f64, 0.0);
        }
    }
    Ok(OperatorMatrix::from_raw(h))
}

pub fn check_product_dim(dims: (FockDim, FockDim), cap: usize) -> Result<usize> {
    let n = dims.0.get() * dims.1.get();
    if n > cap {
        return Err(KerrError::ResourceLimit { what: "product dimension", value: n, cap });
    }
    Ok(n)
}

/// Embeds single-mode operators into the product space.
pub fn embed_mode0(op: &OperatorMatrix, d1: usize) -> OperatorMatrix {
    op.kron(&OperatorMatrix::identity(d1))
}

pub fn embed_mode1(op: &OperatorMatrix, d0: usize) -> OperatorMatrix {
    OperatorMatrix::identity(d0).kron(op)
}

pub fn coherent_state(alpha: C64, dim: FockDim) -> CoherentState {
    let d = dim.get();
    let mut amp = Array1::zeros(d);
    // log-space recursion avoids overflow of αⁿ/√n! for large n
    let n_mean = alpha.norm_sqr();
    let mut c = C64::new((-0.5 * n_mean).exp(), 0.0);
    let mut captured = 0.0;
    for n in 0..d {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        amp[n] = c;
        captured += c.norm_sqr();
    }
    let tail_weight = (1.0 - captured).max(0.0);
    let ket = Ket::new(amp).normalized();
    let tail = tail_population_ket(&ket);
    CoherentState {
        ket,
        tail_weight,
        truncation_warning: tail_weight > TRUNCATION_TAIL_TOL || tail > TRUNCATION_TAIL_TOL,
    }
}

fn tail_population_ket(ket: &Ket) -> f64 {
    let d = ket.dim();
    let start = d - tail_levels(d);
    ket.amplitudes.iter().skip(start).map(|z| z.norm_sqr()).sum()
}

/// Number of levels forming the "last 10%" used for truncation checks.
pub fn tail_levels(d: usize) -> usize {
    d.div_ceil(10).max(1)
}
