//! Exponential relaxation fits `n(t) = n_ss + A·exp(−(t − t_c)/τ)`.
//!
//! The model is linear in `(n_ss, A)`, so those are eliminated by least
//! squares and only `log τ` is searched (variable projection): a coarse scan
//! over the admissible range followed by golden-section refinement.

use serde::{Deserialize, Serialize};

use crate::error::{KerrError, Result};
use crate::liouville::EvolutionResult;

/// Default transient discarded before fitting, in units of `1/κ`.
pub const DEFAULT_TRANSIENT_CUT: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationFit {
    pub tau: f64,
    pub n_ss: f64,
    pub amplitude: f64,
    pub transient_cut: f64,
    /// RMS deviation of the data from the fitted curve.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Required ratio between the fitted window and τ.
    pub min_spans: f64,
    pub grid_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { min_spans: 5.0, grid_points: 240 }
    }
}

pub fn fit_relaxation(result: &EvolutionResult, transient_cut: f64) -> Result<RelaxationFit> {
    fit_exponential(&result.times, &result.photon_numbers, transient_cut)
}

pub fn fit_exponential(times: &[f64], values: &[f64], transient_cut: f64) -> Result<RelaxationFit> {
    fit_exponential_with(times, values, transient_cut, FitOptions::default())
}

struct Window<'a> {
    t: Vec<f64>,
    y: &'a [f64],
}

impl Window<'_> {
    /// Least-squares `(n_ss, A, SSR)` for a fixed τ.
    fn project(&self, tau: f64) -> (f64, f64, f64) {
        let n = self.t.len() as f64;
        let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
        for (t, y) in self.t.iter().zip(self.y) {
            let e = (-t / tau).exp();
            se += e;
            see += e * e;
            sy += y;
            sey += e * y;
        }
        let det = n * see - se * se;
        let (c, a) = if det.abs() <= 1e-14 * n * see.max(1e-300) {
            (sy / n, 0.0)
        } else {
            ((see * sy - se * sey) / det, (n * sey - se * sy) / det)
        };
        let ssr = self.t.iter().zip(self.y).map(|(t, y)| (y - c - a * (-t / tau).exp()).powi(2)).sum();
        (c, a, ssr)
    }
}

pub fn fit_exponential_with(
    times: &[f64],
    values: &[f64],
    transient_cut: f64,
    opts: FitOptions,
) -> Result<RelaxationFit> {
    let fail = |reason: &str, tau: f64, residual: f64, span: f64| KerrError::Fit {
        reason: reason.into(),
        tau_estimate: tau,
        residual,
        span,
    };
    if times.len() != values.len() {
        return Err(KerrError::DimensionMismatch { expected: times.len(), found: values.len() });
    }
    let start = times.iter().position(|&t| t >= transient_cut).unwrap_or(times.len());
    let t0 = times.get(start).copied().unwrap_or(transient_cut);
    let t: Vec<f64> = times[start..].iter().map(|t| t - t0).collect();
    let y = &values[start..];
    if t.len() < 4 {
        return Err(fail("fewer than four samples after the transient cut", f64::NAN, f64::NAN, 0.0));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite samples", f64::NAN, f64::NAN, 0.0));
    }
    let span = *t.last().unwrap();
    let dt_min = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let w = Window { t, y };

    let lo = (0.25 * dt_min).ln();
    let hi = (20.0 * span).ln();
    let m = opts.grid_points.max(16);
    let grid: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let lt = lo + (hi - lo) * i as f64 / (m - 1) as f64;
            (lt, w.project(lt.exp()).2)
        })
        .collect();
    let (ibest, &(_, sbest)) = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty grid");
    let rms = |ssr: f64| (ssr / w.t.len() as f64).sqrt();
    if ibest == 0 || ibest == m - 1 {
        let tau = grid[ibest].0.exp();
        return Err(fail("optimum on the boundary of the admissible range", tau, rms(sbest), span));
    }
    // a second well-separated basin of comparable depth makes τ ambiguous
    let scale = grid.iter().map(|g| g.1).fold(0.0, f64::max);
    for i in 1..m - 1 {
        let s = grid[i].1;
        let is_min = s <= grid[i - 1].1 && s <= grid[i + 1].1;
        let separated = (grid[i].0 - grid[ibest].0).abs() > 2f64.ln();
        if is_min && separated && i != ibest && s - sbest <= 1e-3 * (scale - sbest) {
            return Err(fail("multiple comparable minima in the residual landscape", grid[ibest].0.exp(), rms(sbest), span));
        }
    }

    let (mut a, mut b) = (grid[ibest - 1].0, grid[ibest + 1].0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = w.project(x1.exp()).2;
    let mut f2 = w.project(x2.exp()).2;
    while b - a > 1e-13 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = w.project(x1.exp()).2;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = w.project(x2.exp()).2;
        }
    }
    let tau = (0.5 * (a + b)).exp();
    let (n_ss, amp, ssr) = w.project(tau);
    let residual = rms(ssr);
    if !(tau > 0.0) || !tau.is_finite() || !n_ss.is_finite() {
        return Err(fail("fit diverged", tau, residual, span));
    }
    if span < opts.min_spans * tau {
        return Err(fail("window shorter than the required number of time constants", tau, residual, span));
    }
    Ok(RelaxationFit { tau, n_ss, amplitude: amp, transient_cut, residual })
}
