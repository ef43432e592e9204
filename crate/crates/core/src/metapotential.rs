//! Semiclassical analytics of the driven Kerr oscillator.
//!
//! The noiseless amplitude equation is
//!
//! ```text
//! dα/dt = −iΔα + 2iK|α|²α + c − (κ/2)α,
//! ```
//!
//! with `c` the drive constant fixed by [`ModeParams::eom_drive`]. Its fixed
//! points obey the cubic `4K²n³ − 4ΔKn² + (Δ² + κ²/4)n − |c|² = 0` in
//! `n = |α|²`.

use serde::{Deserialize, Serialize};

use crate::error::{KerrError, Result};
use crate::hilbert::{ModeParams, C64, I};

/// `|α|²` beyond which a trajectory is considered divergent.
pub const DIVERGENCE_GUARD: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    /// Only fixed point of a monostable oscillator.
    Stable,
    StableLow,
    StableHigh,
    Unstable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub alpha: C64,
    pub photon_number: f64,
    pub stability: Stability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalFixedPoints {
    /// Sorted by photon number.
    pub roots: Vec<FixedPoint>,
}

impl ClassicalFixedPoints {
    pub fn is_bistable(&self) -> bool {
        self.roots.len() == 3
    }

    pub fn photon_numbers(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.photon_number).collect()
    }

    fn find(&self, s: Stability) -> Option<&FixedPoint> {
        self.roots.iter().find(|r| r.stability == s)
    }

    pub fn low(&self) -> Option<&FixedPoint> {
        self.find(Stability::StableLow).or_else(|| self.find(Stability::Stable))
    }

    pub fn high(&self) -> Option<&FixedPoint> {
        self.find(Stability::StableHigh)
    }

    pub fn unstable(&self) -> Option<&FixedPoint> {
        self.find(Stability::Unstable)
    }
}

/// Right-hand side of the noiseless amplitude equation.
pub fn amplitude_rhs(alpha: C64, p: &ModeParams) -> C64 {
    -I * p.delta * alpha + 2.0 * I * p.kerr * alpha.norm_sqr() * alpha + p.eom_drive() - 0.5 * p.kappa * alpha
}

fn cubic(p: &ModeParams, n: f64) -> f64 {
    let (d, k, kap) = (p.delta, p.kerr, p.kappa);
    ((4.0 * k * k * n - 4.0 * d * k) * n + d * d + 0.25 * kap * kap) * n - p.eom_drive().norm_sqr()
}

fn bisect_root(p: &ModeParams, mut a: f64, mut b: f64) -> f64 {
    let mut fa = cubic(p, a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = cubic(p, m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Jacobian of the `(α, ᾱ)` flow has trace `−κ`; a root is stable iff
/// `|A|² − |B|² > 0` with `A = −iΔ − κ/2 + 4iK|α|²` and `B = 2iKα²`.
fn jacobian_det(alpha: C64, p: &ModeParams) -> f64 {
    let a = C64::new(-0.5 * p.kappa, -p.delta + 4.0 * p.kerr * alpha.norm_sqr());
    let b = 2.0 * I * p.kerr * alpha * alpha;
    a.norm_sqr() - b.norm_sqr()
}

/// Newton polish of a root of the complex amplitude equation.
fn polish(mut alpha: C64, p: &ModeParams) -> C64 {
    for _ in 0..3 {
        let f = amplitude_rhs(alpha, p);
        if f.norm() < 1e-15 {
            break;
        }
        // F(α) = A α + 2iK α² ᾱ + c; dF = (A + 4iK|α|²) δ + 2iKα² δ̄
        let a = C64::new(-0.5 * p.kappa, -p.delta + 4.0 * p.kerr * alpha.norm_sqr());
        let b = 2.0 * I * p.kerr * alpha * alpha;
        // solve a δ + b δ̄ = −f
        let det = a.norm_sqr() - b.norm_sqr();
        if det.abs() < 1e-300 {
            break;
        }
        let delta = (-f * a.conj() + b * f.conj()) / det;
        alpha += delta;
    }
    alpha
}

pub fn classical_fixed_points(p: &ModeParams) -> Result<ClassicalFixedPoints> {
    p.validate()?;
    let c = p.eom_drive();
    let (d, k) = (p.delta, p.kerr);
    let mut ns = Vec::with_capacity(3);
    if c.norm_sqr() == 0.0 {
        ns.push(0.0);
    } else if k == 0.0 {
        ns.push(c.norm_sqr() / (d * d + 0.25 * p.kappa * p.kappa));
    } else {
        // stationary points of the cubic bound the monotone pieces
        let qa = 12.0 * k * k;
        let qb = -8.0 * d * k;
        let qc = d * d + 0.25 * p.kappa * p.kappa;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc <= 0.0 {
            let mut hi = 1.0;
            while cubic(p, hi) <= 0.0 {
                hi *= 2.0;
            }
            ns.push(bisect_root(p, 0.0, hi));
        } else {
            let s = disc.sqrt();
            let q = -0.5 * (qb - s);
            let (r1, r2) = {
                let x1 = q / qa;
                let x2 = qc / q;
                (x1.min(x2), x1.max(x2))
            };
            // beyond r2 the cubic increases monotonically
            let mut top = r2.max(1.0);
            while cubic(p, top) <= 0.0 {
                top *= 2.0;
            }
            let pts = [0.0, r1.max(0.0), r2.max(0.0), top];
            for w in pts.windows(2) {
                let (a, b) = (w[0], w[1]);
                if b <= a {
                    continue;
                }
                let (fa, fb) = (cubic(p, a), cubic(p, b));
                if fa == 0.0 && a > 0.0 {
                    ns.push(a);
                } else if (fa < 0.0) != (fb < 0.0) {
                    ns.push(bisect_root(p, a, b));
                }
            }
            ns.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * y.abs().max(1.0));
        }
    }
    let mut roots: Vec<FixedPoint> = ns
        .into_iter()
        .map(|n| {
            let alpha = polish(c / C64::new(0.5 * p.kappa, d - 2.0 * k * n), p);
            FixedPoint { alpha, photon_number: alpha.norm_sqr(), stability: Stability::Stable }
        })
        .collect();
    roots.sort_by(|a, b| a.photon_number.total_cmp(&b.photon_number));
    if roots.len() == 3 {
        for (r, s) in roots.iter_mut().zip([Stability::StableLow, Stability::Unstable, Stability::StableHigh]) {
            r.stability = s;
        }
        debug_assert!(jacobian_det(roots[1].alpha, p) <= 0.0);
    } else {
        for r in roots.iter_mut() {
            r.stability = if jacobian_det(r.alpha, p) > 0.0 { Stability::Stable } else { Stability::Unstable };
        }
    }
    Ok(ClassicalFixedPoints { roots })
}

/// Stability of an arbitrary amplitude via the Jacobian determinant.
pub fn is_stable(alpha: C64, p: &ModeParams) -> bool {
    jacobian_det(alpha, p) > 0.0
}

/// Photon numbers bounding the bistable window, from `dε²/dn = 0`:
/// `n± = (Δ/3K)[1 ± √(1 − (3/4)(1 + κ²/4Δ²))]`.
///
/// Returns `None` when no bistable window exists (`Δ < √3κ/2`, or `Δ ≤ 0`
/// under this sign convention).
pub fn critical_photon_numbers(delta: f64, kerr: f64, kappa: f64) -> Option<(f64, f64)> {
    if !(kerr > 0.0) || !(delta > 0.0) {
        return None;
    }
    let mut rad = 1.0 - 0.75 * (1.0 + kappa * kappa / (4.0 * delta * delta));
    if rad.abs() < 4.0 * f64::EPSILON {
        rad = 0.0;
    }
    if rad < 0.0 {
        return None;
    }
    let pre = delta / (3.0 * kerr);
    Some((pre * (1.0 - rad.sqrt()), pre * (1.0 + rad.sqrt())))
}

/// Detuning above which a bistable window exists, `√3κ/2`.
pub fn bistability_threshold(kappa: f64) -> f64 {
    0.75f64.sqrt() * kappa
}

/// `φ` with `e^{iφ}(α_u − α₀)` real and positive.
pub fn rotation_angle(alpha0: C64, alpha_u: C64) -> Result<f64> {
    let d = alpha_u - alpha0;
    if d.norm() <= 1e-14 * alpha0.norm().max(alpha_u.norm()).max(1.0) {
        return Err(KerrError::DegenerateGeometry);
    }
    Ok((-d.im).atan2(d.re))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetapotentialProfile {
    /// `U(x) = Σ qₖ xᵏ` for `k = 1..4`.
    pub quartic_coeffs: [f64; 4],
    pub x0: f64,
    pub delta_u: f64,
    pub gamma0: f64,
    pub phi: f64,
    pub alpha0: C64,
    pub alpha_u: C64,
}

impl MetapotentialProfile {
    pub fn u(&self, x: f64) -> f64 {
        let q = &self.quartic_coeffs;
        x * (q[0] + x * (q[1] + x * (q[2] + x * q[3])))
    }

    pub fn du(&self, x: f64) -> f64 {
        let q = &self.quartic_coeffs;
        q[0] + x * (2.0 * q[1] + x * (3.0 * q[2] + x * 4.0 * q[3]))
    }

    pub fn d2u(&self, x: f64) -> f64 {
        let q = &self.quartic_coeffs;
        2.0 * q[1] + x * (6.0 * q[2] + x * 12.0 * q[3])
    }
}

/// Force along the escape line, `F(x) = e^{iφ}·(dα/dt)` at `α = α₀ + e^{−iφ}x`.
pub fn force(p: &ModeParams, alpha0: C64, phi: f64, x: f64) -> C64 {
    let rot = C64::from_polar(1.0, phi);
    rot * amplitude_rhs(alpha0 + x / rot, p)
}

/// Coefficients `(c₀, c₁, c₂, c₃)` of `Im F(x)` as a cubic in `x`.
fn im_force_coeffs(p: &ModeParams, alpha0: C64, phi: f64) -> [f64; 4] {
    let rot = C64::from_polar(1.0, phi);
    let w = rot * alpha0;
    let u = rot * p.eom_drive();
    let k = p.kerr;
    let lin = C64::new(-0.5 * p.kappa, -p.delta);
    let c0 = (lin * w + u + 2.0 * I * k * w.norm_sqr() * w).im;
    let c1 = 2.0 * k * ((w * w).re + 2.0 * w.norm_sqr()) - p.delta;
    let c2 = 6.0 * k * w.re;
    let c3 = 2.0 * k;
    [c0, c1, c2, c3]
}

fn quartic_from(c: [f64; 4]) -> [f64; 4] {
    [-c[0], -c[1] / 2.0, -c[2] / 3.0, -c[3] / 4.0]
}

/// Quartic metapotential `U(x) = −∫₀ˣ Im F` along the line from the low
/// stable root to the unstable root.
pub fn metapotential_profile(p: &ModeParams) -> Result<MetapotentialProfile> {
    let fp = classical_fixed_points(p)?;
    if !fp.is_bistable() {
        return Err(KerrError::NoBarrier);
    }
    let alpha0 = fp.low().expect("bistable").alpha;
    let alpha_u = fp.unstable().expect("bistable").alpha;
    let phi = rotation_angle(alpha0, alpha_u)?;
    let x0 = (C64::from_polar(1.0, phi) * (alpha_u - alpha0)).re;
    let q = quartic_from(im_force_coeffs(p, alpha0, phi));
    let mut prof = MetapotentialProfile { quartic_coeffs: q, x0, delta_u: 0.0, gamma0: 0.0, phi, alpha0, alpha_u };
    let curv = prof.d2u(0.0);
    if !(curv > 0.0) {
        return Err(KerrError::UnstableMinimum { curvature: curv });
    }
    prof.delta_u = prof.u(x0);
    prof.gamma0 = (p.kappa * curv).sqrt();
    Ok(prof)
}

/// Attempt frequency with a flag marking the single-well extrapolation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptFrequency {
    pub gamma0: f64,
    pub extrapolated: bool,
}

/// `γ₀` from the barrier profile when bistable; otherwise from the curvature
/// of the single well along the real axis (`φ = 0`), flagged as extrapolated.
pub fn attempt_frequency(p: &ModeParams) -> Result<AttemptFrequency> {
    match metapotential_profile(p) {
        Ok(prof) => Ok(AttemptFrequency { gamma0: prof.gamma0, extrapolated: false }),
        Err(KerrError::NoBarrier) => {
            let fp = classical_fixed_points(p)?;
            let alpha = fp.low().or(fp.roots.first()).expect("at least one root").alpha;
            let curv = -im_force_coeffs(p, alpha, 0.0)[1];
            if !(curv > 0.0) {
                return Err(KerrError::UnstableMinimum { curvature: curv });
            }
            Ok(AttemptFrequency { gamma0: (p.kappa * curv).sqrt(), extrapolated: true })
        }
        Err(e) => Err(e),
    }
}

/// Kramers rate `γ₀·exp(−ΔU/κ)`.
pub fn semiclassical_escape_rate(profile: &MetapotentialProfile, kappa: f64) -> f64 {
    profile.gamma0 * (-profile.delta_u / kappa).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Semiclassical,
    Quantum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverResult {
    pub t_gamma_over_t_kappa: f64,
    pub gamma0: f64,
    pub regime: Regime,
}

/// `ξ = (γ₀/2πκ)(√(κ²/4γ₀² + 1) − κ/2γ₀)`.
pub fn crossover_parameter(gamma0: f64, kappa: f64) -> Result<CrossoverResult> {
    if !(gamma0 > 0.0) || !(kappa > 0.0) {
        return Err(crate::error::invalid("gamma0", "gamma0 and kappa must be positive"));
    }
    let r = kappa / (2.0 * gamma0);
    // √(r²+1) − r written without cancellation
    let bracket = 1.0 / ((r * r + 1.0).sqrt() + r);
    let xi = gamma0 / (2.0 * std::f64::consts::PI * kappa) * bracket;
    let regime = if xi > 1.0 { Regime::Quantum } else { Regime::Semiclassical };
    Ok(CrossoverResult { t_gamma_over_t_kappa: xi, gamma0, regime })
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_init: 1e-3, max_steps: 10_000_000 }
    }
}

/// Noiseless amplitude trajectory sampled at `times` (adaptive Dormand–Prince).
pub fn classical_evolution(alpha0: C64, p: &ModeParams, times: &[f64]) -> Result<Vec<C64>> {
    classical_evolution_with(alpha0, p, times, OdeOptions::default())
}

pub fn classical_evolution_with(alpha0: C64, p: &ModeParams, times: &[f64], opts: OdeOptions) -> Result<Vec<C64>> {
    p.validate()?;
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(crate::error::invalid("times", "times must be non-empty and strictly increasing"));
    }
    const A: [[f64; 6]; 6] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const E: [f64; 7] = [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ];
    let f = |a: C64| amplitude_rhs(a, p);
    let mut out = Vec::with_capacity(times.len());
    let mut t = times[0];
    let mut y = alpha0;
    let mut h = opts.h_init;
    let mut steps = 0usize;
    let mut k = [C64::new(0.0, 0.0); 7];
    k[0] = f(y);
    for &target in times {
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(KerrError::Integration { time: t, reason: "step budget exhausted".into() });
            }
            let last = h >= target - t;
            let hs = if last { target - t } else { h };
            for s in 1..6 {
                let mut ys = y;
                for j in 0..s {
                    ys += k[j] * (A[s][j] * hs);
                }
                k[s] = f(ys);
            }
            let mut y5 = y;
            for j in 0..6 {
                y5 += k[j] * (B5[j] * hs);
            }
            k[6] = f(y5);
            let mut err = C64::new(0.0, 0.0);
            for j in 0..7 {
                err += k[j] * (E[j] * hs);
            }
            let sc = opts.atol + opts.rtol * y.norm().max(y5.norm());
            let en = err.norm() / sc;
            if en <= 1.0 {
                t = if last { target } else { t + hs };
                y = y5;
                k[0] = k[6];
                if y.norm_sqr() > DIVERGENCE_GUARD {
                    return Err(KerrError::Divergence { time: t, norm_sqr: y.norm_sqr() });
                }
                let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = hs * fac;
                }
            } else {
                h = hs * (0.9 * en.powf(-0.25)).clamp(0.1, 0.9);
            }
        }
        out.push(y);
    }
    Ok(out)
}
