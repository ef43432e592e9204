//! Normal modes and Kerr couplings of a Josephson-junction array.
//!
//! SI units throughout (farad, henry, rad/s). Node `0` is the driven end,
//! node `N` the far end; junction `n` connects nodes `n` and `n + 1`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, KerrError, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced flux quantum `ħ/2e`.
pub const PHI0_REDUCED: f64 = HBAR / (2.0 * ELECTRON_CHARGE);
pub const DEFAULT_KERR_MODES: usize = 8;
const ZERO_MODE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub n_junctions: usize,
    pub l_j: f64,
    pub c_j: f64,
    pub c_0: f64,
    pub c_s: f64,
    pub c_g: f64,
    pub c_e: f64,
}

impl CircuitParams {
    /// The 80-junction array with `L_J = 1.9 nH`, `C_J = 26.54 fF`,
    /// `C_0 = 0.066 fF`, `C_g = 10.4 fF`, `C_s = 3 fF`, `C_e = 10.84 fF`.
    pub fn reference_device() -> Self {
        Self {
            n_junctions: 80,
            l_j: 1.9e-9,
            c_j: 26.54e-15,
            c_0: 0.066e-15,
            c_s: 3e-15,
            c_g: 10.4e-15,
            c_e: 10.84e-15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_junctions < 1 {
            return Err(invalid("n_junctions", "need at least one junction"));
        }
        let fields = [
            ("l_j", self.l_j),
            ("c_j", self.c_j),
            ("c_0", self.c_0),
            ("c_s", self.c_s),
            ("c_g", self.c_g),
            ("c_e", self.c_e),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitMatrices {
    /// Capacitance matrix ℂ.
    pub cap: Array2<f64>,
    /// Inverse-inductance matrix 𝕃.
    pub ind_inv: Array2<f64>,
    pub l_j: f64,
}

pub fn build_matrices(p: &CircuitParams) -> Result<CircuitMatrices> {
    p.validate()?;
    let n = p.n_junctions;
    let mut cap = Array2::zeros((n + 1, n + 1));
    let mut ind = Array2::zeros((n + 1, n + 1));
    let g = 1.0 / p.l_j;
    for j in 0..n {
        for (a, b, s) in [(j, j, 1.0), (j + 1, j + 1, 1.0), (j, j + 1, -1.0), (j + 1, j, -1.0)] {
            cap[[a, b]] += s * p.c_j;
            ind[[a, b]] += s * g;
        }
    }
    for i in 0..=n {
        cap[[i, i]] += p.c_0;
    }
    cap[[0, 0]] += p.c_s + p.c_g;
    cap[[n, n]] += p.c_e;
    Ok(CircuitMatrices { cap, ind_inv: ind, l_j: p.l_j })
}

#[derive(Clone, Debug)]
pub struct NormalMode {
    pub omega: f64,
    /// Node amplitudes, scaled to unit maximum modulus.
    pub eigvec: Array1<f64>,
    pub c_eff: f64,
    pub l_eff: f64,
    /// Phase drop across each junction, `v[n] − v[n+1]`.
    pub dphi: Array1<f64>,
}

#[derive(Clone, Debug)]
pub struct ModeSpectrum {
    pub modes: Vec<NormalMode>,
    pub l_j: f64,
}

/// Solves `𝕃 v = ω² ℂ v` and discards the zero mode.
pub fn normal_modes(m: &CircuitMatrices) -> Result<ModeSpectrum> {
    let (vals, (vecs, _)) = (m.ind_inv.clone(), m.cap.clone())
        .eigh(UPLO::Lower)
        .map_err(|e| KerrError::Linalg(format!("generalized eigenproblem failed (capacitance matrix not positive definite?): {e}")))?;
    let wmax = vals.iter().copied().fold(0.0, f64::max);
    let mut modes = Vec::new();
    for (k, &w2) in vals.iter().enumerate() {
        if w2 < ZERO_MODE_TOL * wmax {
            continue;
        }
        let v = vecs.column(k);
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let sign = if v.iter().find(|x| x.abs() > 1e-9 * scale).copied().unwrap_or(1.0) < 0.0 { -1.0 } else { 1.0 };
        let v = v.mapv(|x| sign * x / scale);
        let c_eff = v.dot(&m.cap.dot(&v));
        let l_eff = 1.0 / v.dot(&m.ind_inv.dot(&v));
        let dphi = Array1::from_iter((0..v.len() - 1).map(|n| v[n] - v[n + 1]));
        modes.push(NormalMode { omega: w2.sqrt(), eigvec: v, c_eff, l_eff, dphi });
    }
    modes.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    Ok(ModeSpectrum { modes, l_j: m.l_j })
}

#[derive(Clone, Debug)]
pub struct KerrMatrix {
    /// `K_kl` in rad/s.
    pub k_matrix: Array2<f64>,
    /// `ω′_k = ω_k − Σ_l K_kl` in rad/s.
    pub dressed: Array1<f64>,
}

/// Zero-point flux variance `ħω_k L_k / 2`.
fn zpf_sq(m: &NormalMode) -> f64 {
    0.5 * HBAR * m.omega * m.l_eff
}

/// `K_kl = (2 − δ_kl)/(4 L_J φ₀²) · (ħω_k L_k/2)(ħω_l L_l/2) Σ_n Δφ_k(n)² Δφ_l(n)²`,
/// returned as an angular frequency.
pub fn kerr_matrix(spec: &ModeSpectrum, n_modes: usize) -> Result<KerrMatrix> {
    if n_modes == 0 || n_modes > spec.modes.len() {
        return Err(invalid("n_modes", format!("must be in 1..={}", spec.modes.len())));
    }
    let modes = &spec.modes[..n_modes];
    let pref = 1.0 / (4.0 * spec.l_j * PHI0_REDUCED * PHI0_REDUCED * HBAR);
    let mut k = Array2::zeros((n_modes, n_modes));
    for a in 0..n_modes {
        for b in a..n_modes {
            let overlap: f64 = modes[a].dphi.iter().zip(&modes[b].dphi).map(|(x, y)| x * x * y * y).sum();
            let factor = if a == b { 1.0 } else { 2.0 };
            let v = factor * pref * zpf_sq(&modes[a]) * zpf_sq(&modes[b]) * overlap;
            k[[a, b]] = v;
            k[[b, a]] = v;
        }
    }
    let dressed = Array1::from_iter((0..n_modes).map(|a| modes[a].omega - k.row(a).sum()));
    Ok(KerrMatrix { k_matrix: k, dressed })
}

/// One row of the reported mode table, in GHz, fF and nH.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub index: usize,
    #[serde(rename = "freq_GHz")]
    pub freq_ghz: f64,
    #[serde(rename = "dressed_freq_GHz")]
    pub dressed_freq_ghz: f64,
    #[serde(rename = "C_eff_fF")]
    pub c_eff_ff: f64,
    #[serde(rename = "L_eff_nH")]
    pub l_eff_nh: f64,
}

pub fn to_ghz(omega: f64) -> f64 {
    omega / (2.0 * std::f64::consts::PI) / 1e9
}

pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * std::f64::consts::PI) / 1e6
}

pub fn mode_table(spec: &ModeSpectrum, kerr: &KerrMatrix) -> Vec<ModeRow> {
    kerr.dressed
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let m = &spec.modes[i];
            ModeRow {
                index: i,
                freq_ghz: to_ghz(m.omega),
                dressed_freq_ghz: to_ghz(w),
                c_eff_ff: m.c_eff * 1e15,
                l_eff_nh: m.l_eff * 1e9,
            }
        })
        .collect()
}

/// Full pipeline for a netlist with the default eight retained modes.
pub fn quantize(p: &CircuitParams) -> Result<(ModeSpectrum, KerrMatrix)> {
    let spec = normal_modes(&build_matrices(p)?)?;
    let m = DEFAULT_KERR_MODES.min(spec.modes.len());
    let kerr = kerr_matrix(&spec, m)?;
    Ok((spec, kerr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> CircuitParams {
        CircuitParams { n_junctions: 1, l_j: 2e-9, c_j: 30e-15, c_0: 1e-26, c_s: 1e-26, c_g: 1e-26, c_e: 1e-26 }
    }

    #[test]
    fn single_junction_plasma_frequency() {
        let p = single();
        let s = normal_modes(&build_matrices(&p).unwrap()).unwrap();
        assert_eq!(s.modes.len(), 1);
        let w = 1.0 / (p.l_j * p.c_j).sqrt();
        assert!((s.modes[0].omega / w - 1.0).abs() < 1e-9);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let m = build_matrices(&CircuitParams::reference_device()).unwrap();
        for r in m.ind_inv.rows() {
            assert_eq!(r.sum(), 0.0);
        }
        assert_eq!(m.cap, m.cap.t());
    }

    #[test]
    fn mode_identities() {
        let m = build_matrices(&CircuitParams::reference_device()).unwrap();
        let s = normal_modes(&m).unwrap();
        assert_eq!(s.modes.len(), 80);
        let lnorm = m.ind_inv.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for md in &s.modes {
            let res = m.ind_inv.dot(&md.eigvec) - m.cap.dot(&md.eigvec) * md.omega.powi(2);
            assert!(res.iter().fold(0.0f64, |a, x| a.max(x.abs())) < 1e-9 * lnorm);
            assert!((1.0 / (md.l_eff * md.c_eff).sqrt() / md.omega - 1.0).abs() < 1e-9);
        }
        for w in s.modes.windows(2) {
            assert!(w[0].omega <= w[1].omega);
        }
        let (a, b) = (&s.modes[0], &s.modes[1]);
        let cross = a.eigvec.dot(&m.cap.dot(&b.eigvec));
        assert!(cross.abs() < 1e-10 * (a.c_eff * b.c_eff).sqrt());
    }

    #[test]
    fn kerr_matrix_is_symmetric_and_nonnegative() {
        let (_, k) = quantize(&CircuitParams::reference_device()).unwrap();
        let km = &k.k_matrix;
        assert_eq!(km, &km.t());
        assert!(km.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let mut p = CircuitParams::reference_device();
        p.c_0 = 0.0;
        assert!(build_matrices(&p).is_err());
        p = CircuitParams::reference_device();
        p.n_junctions = 0;
        assert!(build_matrices(&p).is_err());
    }
}
