//! Run configuration and its validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Steadystate,
    Relax,
    Trajectories,
    LiouvillianRate,
    EscapeRate,
    Crossover,
    Lineshape,
    Circuit,
    ClassicalCompare,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Steadystate,
        Experiment::Relax,
        Experiment::Trajectories,
        Experiment::LiouvillianRate,
        Experiment::EscapeRate,
        Experiment::Crossover,
        Experiment::Lineshape,
        Experiment::Circuit,
        Experiment::ClassicalCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Steadystate => "steadystate",
            Experiment::Relax => "relax",
            Experiment::Trajectories => "trajectories",
            Experiment::LiouvillianRate => "liouvillian_rate",
            Experiment::EscapeRate => "escape_rate",
            Experiment::Crossover => "crossover",
            Experiment::Lineshape => "lineshape",
            Experiment::Circuit => "circuit",
            Experiment::ClassicalCompare => "classical_compare",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Steadystate => "master-equation steady state: photon number, Mandel Q, tail population",
            Experiment::Relax => "master-equation relaxation from vacuum with an exponential fit",
            Experiment::Trajectories => "one semiclassical Langevin trajectory per sweep point",
            Experiment::LiouvillianRate => "quantum switching rate from the Liouvillian and the vacuum overlap",
            Experiment::EscapeRate => "metapotential barrier, attempt frequency and Kramers time",
            Experiment::Crossover => "crossover parameter between activation and tunnelling",
            Experiment::Lineshape => "heterodyne stochastic master equation probe scan versus pump detuning",
            Experiment::Circuit => "normal modes and Kerr matrix of a Josephson-junction array",
            Experiment::ClassicalCompare => "relaxation times from master equation, trajectories, Kramers and Liouvillian",
        }
    }

    pub fn sweep_axes(self) -> &'static [&'static str] {
        match self {
            Experiment::Lineshape => &["pump_detuning", "drive_ratio"],
            Experiment::Circuit => &[],
            _ => &["delta", "kerr", "kappa", "drive"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every tunable input; each experiment reads the subset it needs and falls
/// back to the defaults below.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub delta: Option<f64>,
    pub kerr: Option<f64>,
    pub kappa: Option<f64>,
    pub drive: Option<f64>,
    pub dim: Option<usize>,
    pub t_max: Option<f64>,
    pub sample_dt: Option<f64>,
    pub transient_cut: Option<f64>,
    pub n_traj: Option<usize>,
    pub sde_dt: Option<f64>,
    pub pump_detuning: Option<f64>,
    pub drive_ratio: Option<f64>,
    pub probe_drive: Option<f64>,
    pub probe_start: Option<f64>,
    pub probe_stop: Option<f64>,
    pub probe_step: Option<f64>,
    pub n_avg: Option<usize>,
    pub t_m: Option<f64>,
    pub sme_dt: Option<f64>,
    pub d0: Option<usize>,
    pub d1: Option<usize>,
    pub n_junctions: Option<usize>,
    pub l_j: Option<f64>,
    pub c_j: Option<f64>,
    pub c_0: Option<f64>,
    pub c_s: Option<f64>,
    pub c_g: Option<f64>,
    pub c_e: Option<f64>,
    pub kerr_modes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: String,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

impl Sweep {
    pub fn grid(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        match (self.start, self.stop, self.points) {
            (Some(a), Some(_), Some(1)) => vec![a],
            (Some(a), Some(b), Some(n)) => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub parameters: Parameters,
    pub sweep: Option<Sweep>,
}

fn default_workers() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text)
    }

    /// Sweep values, or a single point at the configured base parameters.
    pub fn points(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.grid().into_iter().map(Some).collect(),
            None => vec![None],
        }
    }

    /// Parameters with the sweep axis set to `value`.
    pub fn at(&self, value: Option<f64>) -> Parameters {
        let mut p = self.parameters.clone();
        if let (Some(v), Some(s)) = (value, &self.sweep) {
            let slot = match s.axis.as_str() {
                "delta" => &mut p.delta,
                "kerr" => &mut p.kerr,
                "kappa" => &mut p.kappa,
                "drive" => &mut p.drive,
                "pump_detuning" => &mut p.pump_detuning,
                "drive_ratio" => &mut p.drive_ratio,
                _ => return p,
            };
            *slot = Some(v);
        }
        p
    }
}

/// A field-level complaint about a configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

const SINGLE_MODE_DIM_CAP: usize = 100;

pub fn validate(c: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: &str| {
        out.push(Diagnostic { field: field.into(), message: message.into() });
    };
    let p = &c.parameters;
    if c.workers == 0 {
        push("workers", "workers must be at least 1");
    }
    let positive = [
        ("kappa", p.kappa),
        ("t_max", p.t_max),
        ("sample_dt", p.sample_dt),
        ("sde_dt", p.sde_dt),
        ("probe_step", p.probe_step),
        ("t_m", p.t_m),
        ("sme_dt", p.sme_dt),
        ("l_j", p.l_j),
        ("c_j", p.c_j),
        ("c_0", p.c_0),
        ("c_s", p.c_s),
        ("c_g", p.c_g),
        ("c_e", p.c_e),
    ];
    for (name, v) in positive {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                push(name, &format!("{name} must be positive"));
            }
        }
    }
    let finite = [("delta", p.delta), ("drive", p.drive), ("pump_detuning", p.pump_detuning), ("drive_ratio", p.drive_ratio)];
    for (name, v) in finite {
        if v.is_some_and(|v| !v.is_finite()) {
            push(name, &format!("{name} must be finite"));
        }
    }
    if p.kerr.is_some_and(|k| !(k >= 0.0 && k.is_finite())) {
        push("kerr", "kerr must be non-negative");
    }
    if let Some(d) = p.dim {
        if d < 2 {
            push("dim", "dim must be at least 2");
        } else if d > SINGLE_MODE_DIM_CAP {
            push("dim", &format!("dim exceeds the truncation cap {SINGLE_MODE_DIM_CAP}"));
        }
    }
    let (d0, d1) = (p.d0.unwrap_or(6), p.d1.unwrap_or(30));
    if d0 < 2 || d1 < 2 {
        push("d0/d1", "Fock dimensions must be at least 2");
    } else if d0 * d1 > kerr_core::hilbert::DEFAULT_PRODUCT_CAP {
        push("d0/d1", &format!("product dimension exceeds the cap {}", kerr_core::hilbert::DEFAULT_PRODUCT_CAP));
    }
    if p.n_traj.is_some_and(|n| n < 50) {
        push("n_traj", "n_traj must be at least 50");
    }
    if p.n_avg == Some(0) {
        push("n_avg", "n_avg must be at least 1");
    }
    if p.n_junctions == Some(0) {
        push("n_junctions", "n_junctions must be at least 1");
    }
    if let (Some(a), Some(b)) = (p.probe_start, p.probe_stop) {
        if b < a {
            push("probe_stop", "probe grid must be increasing");
        }
    }
    if let Some(s) = &c.sweep {
        if !c.experiment.sweep_axes().contains(&s.axis.as_str()) {
            push("sweep.axis", &format!("axis not applicable: `{}` is not a parameter of {}", s.axis, c.experiment));
        }
        if s.values.is_some() && (s.start.is_some() || s.stop.is_some() || s.points.is_some()) {
            push("sweep", "give either values or start/stop/points, not both");
        }
        let g = s.grid();
        if g.is_empty() {
            push("sweep", "sweep grid is empty");
        } else if g.iter().any(|x| !x.is_finite()) {
            push("sweep", "sweep grid contains non-finite values");
        } else if g.windows(2).any(|w| w[1] <= w[0]) {
            push("sweep", "sweep grid must be strictly increasing");
        }
        if s.axis == "kappa" && g.iter().any(|&x| x <= 0.0) {
            push("sweep", "kappa must be positive");
        }
        if s.axis == "kerr" && g.iter().any(|&x| x < 0.0) {
            push("sweep", "kerr must be non-negative");
        }
    }
    out
}
