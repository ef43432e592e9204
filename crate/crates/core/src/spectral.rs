//! Liouvillian eigenanalysis and the quantum switching rate λₑ.

use ndarray::{Array1, Array2};
use ndarray_linalg::Eig;

use crate::error::{KerrError, Result};
use crate::hilbert::{C64, ZERO};
use crate::liouville::{unvectorize, DensityMatrix, Superoperator};

/// Largest superoperator dimension `d²` handed to the dense eigensolver.
pub const EIGEN_CAP: usize = 4096;

const ZERO_EIGENVALUE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct LiouvillianSpectrum {
    pub eigenvalues: Vec<C64>,
    pub right_modes: Vec<Array2<C64>>,
    pub steady_index: usize,
}

#[derive(Clone, Debug)]
pub struct SlowMode {
    pub chi: C64,
    pub rho_chi: Array2<C64>,
    pub rho_tilde: Array2<C64>,
}

/// Hilbert–Schmidt inner product `⟨A, B⟩ = Tr(A†B)`.
pub fn inner(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn trace(a: &Array2<C64>) -> C64 {
    a.diag().sum()
}

pub fn full_spectrum(l: &Superoperator) -> Result<LiouvillianSpectrum> {
    full_spectrum_with_cap(l, EIGEN_CAP)
}

pub fn full_spectrum_with_cap(l: &Superoperator, cap: usize) -> Result<LiouvillianSpectrum> {
    let d = l.dim();
    if d * d > cap {
        return Err(KerrError::ResourceLimit { what: "superoperator dimension", value: d * d, cap });
    }
    let (vals, vecs) = l.matrix()?.eig()?;
    let zeros: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].norm() < ZERO_EIGENVALUE_TOL).collect();
    let steady_index = match zeros.as_slice() {
        [i] => *i,
        [] => {
            return Err(KerrError::Linalg("no eigenvalue within tolerance of zero".into()));
        }
        many => return Err(KerrError::Degenerate { nullity: many.len() }),
    };
    let mut right_modes: Vec<Array2<C64>> = (0..vals.len())
        .map(|i| unvectorize(&vecs.column(i).to_owned(), d))
        .collect();
    let tr = trace(&right_modes[steady_index]);
    right_modes[steady_index].mapv_inplace(|z| z / tr);
    Ok(LiouvillianSpectrum { eigenvalues: vals.to_vec(), right_modes, steady_index })
}

impl LiouvillianSpectrum {
    pub fn steady_state(&self) -> DensityMatrix {
        DensityMatrix::from_unnormalized(&self.right_modes[self.steady_index])
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Slowest decaying nonzero mode with its Gram–Schmidt companion ρ̃.
///
/// "Slowest" means the largest real part among nonzero eigenvalues; ties are
/// broken by larger `|Im|`, then by positive imaginary part.
pub fn slow_mode(spec: &LiouvillianSpectrum) -> Result<SlowMode> {
    let tie = 1e-9;
    let mut best: Option<usize> = None;
    for (i, z) in spec.eigenvalues.iter().enumerate() {
        if i == spec.steady_index {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let w = spec.eigenvalues[b];
                let better = if (z.re - w.re).abs() > tie {
                    z.re > w.re
                } else if (z.im.abs() - w.im.abs()).abs() > tie {
                    z.im.abs() > w.im.abs()
                } else {
                    z.im > w.im
                };
                Some(if better { i } else { b })
            }
        };
    }
    let i = best.ok_or_else(|| KerrError::Linalg("spectrum has no nonzero eigenvalue".into()))?;
    let rho_s = &spec.right_modes[spec.steady_index];
    let rho_chi = spec.right_modes[i].clone();
    let proj = inner(rho_s, &rho_chi) / inner(rho_s, rho_s);
    let tilde_chi = &rho_chi - &rho_s.mapv(|z| z * proj);
    let tr = trace(&tilde_chi);
    let scale = tilde_chi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if tr.norm() <= 1e-12 * scale.max(1e-300) {
        return Err(KerrError::TracelessMode);
    }
    let rho_tilde = tilde_chi.mapv(|z| z / tr);
    Ok(SlowMode { chi: spec.eigenvalues[i], rho_chi, rho_tilde })
}

/// `β₀ = ⟨ρ_s, ρ₀⟩ / ⟨ρ_s, ρ_s⟩`, the steady-state weight of the initial state.
pub fn steady_overlap(rho_s: &DensityMatrix, rho0: &DensityMatrix) -> f64 {
    (inner(rho_s.entries(), rho0.entries()) / inner(rho_s.entries(), rho_s.entries())).re
}

/// `λₑ = ⟨ρ_s, ℒ[ρ₀]⟩ / (1 − ⟨ρ_s, ρ₀⟩/⟨ρ_s, ρ_s⟩)`.
pub fn quantum_escape_rate(l: &Superoperator, rho_s: &DensityMatrix, rho0: &DensityMatrix) -> Result<f64> {
    let d = l.dim();
    if rho_s.dim() != d || rho0.dim() != d {
        return Err(KerrError::DimensionMismatch { expected: d, found: rho0.dim().min(rho_s.dim()) });
    }
    let ss = inner(rho_s.entries(), rho_s.entries());
    let den = C64::new(1.0, 0.0) - inner(rho_s.entries(), rho0.entries()) / ss;
    if den.norm() < 1e-10 {
        return Err(KerrError::SingularRate { denominator: den.norm() });
    }
    let num = inner(rho_s.entries(), &l.apply(rho0.entries()));
    let lam = num / den;
    if lam.im.abs() > 1e-8 * lam.norm() {
        return Err(KerrError::ImaginaryResidue { real: lam.re, imag: lam.im });
    }
    Ok(lam.re)
}

/// Eigenvalues sorted by descending real part.
pub fn sorted_eigenvalues(spec: &LiouvillianSpectrum) -> Array1<C64> {
    let mut v = spec.eigenvalues.clone();
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Array1::from(v)
}

/// Whether a right mode is Hermitian or has a conjugate partner in the spectrum.
pub fn has_hermitian_partner(spec: &LiouvillianSpectrum, i: usize, tol: f64) -> bool {
    let m = &spec.right_modes[i];
    let norm = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let adj = m.t().mapv(|z| z.conj());
    // proportionality to its own adjoint
    let c = inner(m, &adj) / (norm * norm);
    if (c.norm() - 1.0).abs() < tol {
        return true;
    }
    let lam = spec.eigenvalues[i].conj();
    spec.eigenvalues.iter().enumerate().any(|(j, z)| {
        j != i && (z - lam).norm() < 1e-6 * lam.norm().max(1.0) && {
            let other = &spec.right_modes[j];
            let on = other.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            (inner(other, &adj).norm() / (on * norm) - 1.0).abs() < tol
        }
    }) || m.iter().all(|z| *z == ZERO)
}
