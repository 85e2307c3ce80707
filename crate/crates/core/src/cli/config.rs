//! Run configuration documents.
//!
//! A document is TOML with dotted keys (`cavity.kappa = 1e7` or a `[cavity]`
//! table). Every key is optional; missing physical keys come from the named
//! preset (`preset = "ca40"` by default) and missing run options from fixed
//! defaults. Unknown keys are rejected.
//!
//! | key | meaning | unit |
//! |-----|---------|------|
//! | `cavity.kappa` | field decay rate | rad/s |
//! | `cavity.g` | atom–field coupling | rad/s |
//! | `cavity.mode_volume`, `cavity.mode_frequency` | optional, derive `g` via `cavity.dipole_moment` | m³, rad/s |
//! | `cavity.dipole_moment` | transition dipole; with the two keys above replaces `g` | C·m |
//! | `atom.gamma_a`, `atom.gamma_a_prime`, `atom.gamma_b`, `atom.gamma_ab` | atomic decay rates | rad/s |
//! | `geometry.tau`, `geometry.t_drift` | zone and drift times | s |
//! | `geometry.omega_r`, `geometry.delta2` | Rabi frequency, drift detuning | rad/s |
//! | `geometry.theta`, `geometry.phi` | alternative to the two keys above | rad |
//! | `pump.rate`, `pump.p` | injection rate, statistics (0 Poisson, 1 regular) | atoms/s, – |
//! | `sim.*` | simulation options, see [`SimOptions`] | |
//! | `analysis.*` | estimator options, see [`AnalysisOptions`] | |
//! | `sweep.*` | parameter sweep, see [`SweepSpec`] | |

use std::fmt::Write as _;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{self, LaserConfig, DEFAULT_MIN_SEPARATION};
use crate::sim::{CavityTuning, InjectionMode, SimConfig};

/// Recorded span used when `sim.duration` is absent, in transit times.
const DEFAULT_RECORDED_TRANSITS: f64 = 150.0;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    preset: Option<String>,
    cavity: Option<CavityDoc>,
    atom: Option<AtomDoc>,
    geometry: Option<GeometryDoc>,
    pump: Option<PumpDoc>,
    sim: Option<SimDoc>,
    analysis: Option<AnalysisDoc>,
    sweep: Option<SweepDoc>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CavityDoc {
    kappa: Option<f64>,
    g: Option<f64>,
    mode_volume: Option<f64>,
    mode_frequency: Option<f64>,
    dipole_moment: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomDoc {
    gamma_a: Option<f64>,
    gamma_a_prime: Option<f64>,
    gamma_b: Option<f64>,
    gamma_ab: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryDoc {
    tau: Option<f64>,
    t_drift: Option<f64>,
    omega_r: Option<f64>,
    delta2: Option<f64>,
    theta: Option<f64>,
    phi: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PumpDoc {
    rate: Option<f64>,
    p: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimDoc {
    duration: Option<f64>,
    dt: Option<f64>,
    output_stride: Option<usize>,
    compensate_cavity: Option<bool>,
    cavity_detuning: Option<f64>,
    start_at_operating_point: Option<bool>,
    seed: Option<u64>,
    trajectories: Option<usize>,
    write_trajectories: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisDoc {
    lag_min: Option<f64>,
    lag_max: Option<f64>,
    psd_segments: Option<usize>,
    min_separation: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepDoc {
    parameter: String,
    start: f64,
    stop: f64,
    count: usize,
    spacing: Option<String>,
    seed_policy: Option<String>,
    simulate_indices: Option<Vec<usize>>,
    trajectories_per_point: Option<usize>,
}

/// Simulation options (`sim.*`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Total simulated time per trajectory including warm-up, s. Default:
    /// warm-up plus 150 transit times.
    pub duration: f64,
    /// Integration step, s. Default: `min(τ, 2/κ)/20`.
    pub dt: f64,
    /// Steps per recorded sample. Default: about 40 samples per zone time.
    pub output_stride: usize,
    /// Detune the cavity to cancel frequency pulling (default `true`).
    pub compensate_cavity: bool,
    /// Cavity detuning used when compensation is off, rad/s (default 0).
    pub cavity_detuning: f64,
    /// Start at the self-consistent operating point (default `true`).
    pub start_at_operating_point: bool,
    /// Base seed; trajectory `i` uses `seed + i` (default 1).
    pub seed: u64,
    /// Ensemble size (default 32).
    pub trajectories: usize,
    /// Write one record file per trajectory (default `true`).
    pub write_trajectories: bool,
}

/// Estimator options (`analysis.*`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    /// Lag window of the phase-diffusion fit, s. Unset bounds follow
    /// `[10/κ, min(span/10, 0.1/D_expected)]`.
    pub lag_min: Option<f64>,
    pub lag_max: Option<f64>,
    /// Segments of the field periodogram (default 16).
    pub psd_segments: usize,
    /// Required separation of the regime chain (default 5).
    pub min_separation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPolicy {
    /// Point `k` uses seeds `seed + k·n + i`.
    Distinct,
    /// Every point uses seeds `seed + i` (paired comparison).
    Shared,
}

impl SeedPolicy {
    pub fn name(self) -> &'static str {
        match self {
            SeedPolicy::Distinct => "distinct",
            SeedPolicy::Shared => "shared",
        }
    }
}

/// Parameter sweep (`sweep.*`).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Swept key, one of [`SWEEPABLE`].
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    /// Number of grid points, at least 2; spacing is linear.
    pub count: usize,
    pub seed_policy: SeedPolicy,
    /// Grid indices that are also simulated.
    pub simulate_indices: Vec<usize>,
    pub trajectories_per_point: usize,
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.count - 1;
        (0..self.count)
            .map(|k| {
                if k == n {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * k as f64 / n as f64
                }
            })
            .collect()
    }

    pub fn seed_for(&self, base: u64, point: usize, trajectory: usize) -> u64 {
        match self.seed_policy {
            SeedPolicy::Distinct => {
                base + (point * self.trajectories_per_point + trajectory) as u64
            }
            SeedPolicy::Shared => base + trajectory as u64,
        }
    }
}

/// Keys accepted as sweep parameters.
pub const SWEEPABLE: &[&str] = &[
    "cavity.kappa",
    "cavity.g",
    "atom.gamma_a",
    "atom.gamma_a_prime",
    "atom.gamma_b",
    "atom.gamma_ab",
    "geometry.tau",
    "geometry.t_drift",
    "geometry.omega_r",
    "geometry.delta2",
    "geometry.theta",
    "geometry.phi",
    "pump.rate",
    "pump.p",
];

/// Sets one physical parameter by key. Pulse area and drift phase are
/// written through the Rabi frequency and drift detuning.
pub fn set_parameter(config: &mut LaserConfig, path: &str, value: f64) -> Result<()> {
    match path {
        "cavity.kappa" => config.cavity.kappa = value,
        "cavity.g" => config.cavity.g = value,
        "atom.gamma_a" => config.atom.gamma_a = value,
        "atom.gamma_a_prime" => config.atom.gamma_a_prime = value,
        "atom.gamma_b" => config.atom.gamma_b = value,
        "atom.gamma_ab" => config.atom.gamma_ab = value,
        "geometry.tau" => config.geometry.tau = value,
        "geometry.t_drift" => config.geometry.t_drift = value,
        "geometry.omega_r" => config.geometry.omega_r = value,
        "geometry.delta2" => config.geometry.delta2 = value,
        "geometry.theta" => config.geometry = config.geometry.with_theta(value),
        "geometry.phi" => config.geometry = config.geometry.with_phi(value)?,
        "pump.rate" => config.pump.rate = value,
        "pump.p" => config.pump.p = value,
        _ => {
            return Err(Error::Config(format!(
                "unknown sweep parameter `{path}`; expected one of {}",
                SWEEPABLE.join(", ")
            )))
        }
    }
    Ok(())
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub laser: LaserConfig,
    pub sim: SimOptions,
    pub analysis: AnalysisOptions,
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    /// Defaults of the named preset.
    pub fn from_preset(name: &str) -> Result<Self> {
        parse_config(&format!("preset = {name:?}\n"))
    }

    /// Simulation settings for one trajectory of `laser`.
    pub fn sim_config(&self, laser: LaserConfig, seed: u64) -> Result<SimConfig> {
        let sim = SimConfig {
            laser,
            dt: self.sim.dt,
            duration: self.sim.duration,
            seed,
            output_stride: self.sim.output_stride,
            injection: InjectionMode::from_p(laser.pump.p)?,
            tuning: if self.sim.compensate_cavity {
                CavityTuning::Compensated
            } else {
                CavityTuning::Fixed(self.sim.cavity_detuning)
            },
            start_at_operating_point: self.sim.start_at_operating_point,
        };
        sim.validate()?;
        Ok(sim)
    }

    /// Flattened `key = value` lines (TOML) of every resolved setting. Floats
    /// are written in shortest round-trip form, so re-parsing the echo
    /// reproduces this configuration exactly.
    pub fn echo(&self) -> String {
        self.flat()
            .into_iter()
            .fold(String::new(), |mut out, (k, v)| {
                let _ = writeln!(out, "{k} = {v}");
                out
            })
    }

    /// Resolved settings as `(key, TOML value)` pairs in a fixed order.
    pub fn flat(&self) -> Vec<(String, String)> {
        let f = |x: f64| toml_float(x);
        let l = &self.laser;
        let mut out: Vec<(String, String)> = vec![("preset".into(), format!("{:?}", self.preset))];
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        push("cavity.kappa", f(l.cavity.kappa));
        push("cavity.g", f(l.cavity.g));
        if let Some(v) = l.cavity.mode_volume {
            push("cavity.mode_volume", f(v));
        }
        if let Some(w) = l.cavity.mode_frequency {
            push("cavity.mode_frequency", f(w));
        }
        push("atom.gamma_a", f(l.atom.gamma_a));
        push("atom.gamma_a_prime", f(l.atom.gamma_a_prime));
        push("atom.gamma_b", f(l.atom.gamma_b));
        push("atom.gamma_ab", f(l.atom.gamma_ab));
        push("geometry.tau", f(l.geometry.tau));
        push("geometry.t_drift", f(l.geometry.t_drift));
        push("geometry.omega_r", f(l.geometry.omega_r));
        push("geometry.delta2", f(l.geometry.delta2));
        push("pump.rate", f(l.pump.rate));
        push("pump.p", f(l.pump.p));
        let s = &self.sim;
        push("sim.duration", f(s.duration));
        push("sim.dt", f(s.dt));
        push("sim.output_stride", s.output_stride.to_string());
        push("sim.compensate_cavity", s.compensate_cavity.to_string());
        push("sim.cavity_detuning", f(s.cavity_detuning));
        push("sim.start_at_operating_point", s.start_at_operating_point.to_string());
        push("sim.seed", s.seed.to_string());
        push("sim.trajectories", s.trajectories.to_string());
        push("sim.write_trajectories", s.write_trajectories.to_string());
        let a = &self.analysis;
        if let Some(v) = a.lag_min {
            push("analysis.lag_min", f(v));
        }
        if let Some(v) = a.lag_max {
            push("analysis.lag_max", f(v));
        }
        push("analysis.psd_segments", a.psd_segments.to_string());
        push("analysis.min_separation", f(a.min_separation));
        if let Some(sw) = &self.sweep {
            push("sweep.parameter", format!("{:?}", sw.parameter));
            push("sweep.start", f(sw.start));
            push("sweep.stop", f(sw.stop));
            push("sweep.count", sw.count.to_string());
            push("sweep.spacing", "\"linear\"".into());
            push("sweep.seed_policy", format!("{:?}", sw.seed_policy.name()));
            let idx: Vec<String> = sw.simulate_indices.iter().map(|i| i.to_string()).collect();
            push("sweep.simulate_indices", format!("[{}]", idx.join(", ")));
            push("sweep.trajectories_per_point", sw.trajectories_per_point.to_string());
        }
        out
    }
}

/// Float in a TOML-compatible shortest round-trip representation.
fn toml_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:?}")
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn config_error(path: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{path}`: {reason}"))
}

/// Parses a configuration document and resolves it against its preset.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        Error::Config(match line {
            Some(l) => format!("line {l}: {}", e.message()),
            None => e.message().to_string(),
        })
    })?;
    let doc: Document = serde_path_to_error::deserialize(de).map_err(|e| {
        let line = e.inner().span().map(|s| line_of(text, s.start));
        let at = line.map(|l| format!(" (line {l})")).unwrap_or_default();
        Error::Config(format!("`{}`{at}: {}", e.path(), e.inner().message()))
    })?;
    resolve(doc)
}

fn resolve(doc: Document) -> Result<RunConfig> {
    let preset = doc.preset.unwrap_or_else(|| "ca40".into());
    let mut laser = model::preset(&preset).ok_or_else(|| {
        config_error(
            "preset",
            format!("unknown preset {preset:?}; expected one of {}", model::PRESET_NAMES.join(", ")),
        )
    })?;

    let cav = doc.cavity.unwrap_or_default();
    if let Some(v) = cav.kappa {
        laser.cavity.kappa = v;
    }
    laser.cavity.mode_volume = cav.mode_volume.or(laser.cavity.mode_volume);
    laser.cavity.mode_frequency = cav.mode_frequency.or(laser.cavity.mode_frequency);
    match (cav.g, cav.dipole_moment) {
        (Some(_), Some(_)) => {
            return Err(config_error("cavity.dipole_moment", "give either cavity.g or cavity.dipole_moment"))
        }
        (Some(g), None) => laser.cavity.g = g,
        (None, Some(mu)) => {
            let (Some(w), Some(v)) = (laser.cavity.mode_frequency, laser.cavity.mode_volume) else {
                return Err(config_error(
                    "cavity.dipole_moment",
                    "needs cavity.mode_frequency and cavity.mode_volume",
                ));
            };
            laser.cavity.g = model::coupling_from_dipole(mu, w, v)?;
        }
        (None, None) => {}
    }

    let atom = doc.atom.unwrap_or_default();
    let a = &mut laser.atom;
    a.gamma_a = atom.gamma_a.unwrap_or(a.gamma_a);
    a.gamma_a_prime = atom.gamma_a_prime.unwrap_or(a.gamma_a_prime);
    a.gamma_b = atom.gamma_b.unwrap_or(a.gamma_b);
    a.gamma_ab = atom.gamma_ab.unwrap_or(a.gamma_ab);

    // Changing a transit time keeps the preset's pulse area and drift phase
    // unless the corresponding frequency is given too.
    let geo = doc.geometry.unwrap_or_default();
    let (theta0, phi0) = (laser.geometry.theta(), laser.geometry.phi());
    let g = &mut laser.geometry;
    g.tau = geo.tau.unwrap_or(g.tau);
    g.t_drift = geo.t_drift.unwrap_or(g.t_drift);
    match (geo.omega_r, geo.theta) {
        (Some(_), Some(_)) => return Err(config_error("geometry.theta", "give either geometry.omega_r or geometry.theta")),
        (Some(w), None) => g.omega_r = w,
        (None, Some(t)) => *g = g.with_theta(t),
        (None, None) => *g = g.with_theta(theta0),
    }
    match (geo.delta2, geo.phi) {
        (Some(_), Some(_)) => return Err(config_error("geometry.phi", "give either geometry.delta2 or geometry.phi")),
        (Some(d), None) => g.delta2 = d,
        (None, Some(p)) => *g = g.with_phi(p)?,
        (None, None) => {
            if g.t_drift > 0.0 {
                *g = g.with_phi(phi0)?;
            }
        }
    }

    let pump = doc.pump.unwrap_or_default();
    laser.pump.rate = pump.rate.unwrap_or(laser.pump.rate);
    laser.pump.p = pump.p.unwrap_or(laser.pump.p);
    laser.validate()?;

    let s = doc.sim.unwrap_or_default();
    let warmup = 5.0 / laser.cavity.kappa + 3.0 * laser.geometry.transit_time();
    let dt = s.dt.unwrap_or_else(|| SimConfig::max_dt(&laser));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(config_error("sim.dt", "must be finite and > 0"));
    }
    let sim = SimOptions {
        duration: s
            .duration
            .unwrap_or(warmup + DEFAULT_RECORDED_TRANSITS * laser.geometry.transit_time()),
        dt,
        output_stride: s
            .output_stride
            .unwrap_or_else(|| ((laser.geometry.tau / 40.0) / dt).round().max(1.0) as usize),
        compensate_cavity: s.compensate_cavity.unwrap_or(true),
        cavity_detuning: s.cavity_detuning.unwrap_or(0.0),
        start_at_operating_point: s.start_at_operating_point.unwrap_or(true),
        seed: s.seed.unwrap_or(1),
        trajectories: s.trajectories.unwrap_or(32),
        write_trajectories: s.write_trajectories.unwrap_or(true),
    };
    if sim.output_stride == 0 {
        return Err(config_error("sim.output_stride", "must be >= 1"));
    }
    if sim.trajectories == 0 {
        return Err(config_error("sim.trajectories", "must be >= 1"));
    }

    let an = doc.analysis.unwrap_or_default();
    let analysis = AnalysisOptions {
        lag_min: an.lag_min,
        lag_max: an.lag_max,
        psd_segments: an.psd_segments.unwrap_or(16),
        min_separation: an.min_separation.unwrap_or(DEFAULT_MIN_SEPARATION),
    };
    if analysis.psd_segments < 8 {
        return Err(config_error("analysis.psd_segments", "must be >= 8"));
    }

    let sweep = doc.sweep.map(|sw| resolve_sweep(sw, &laser)).transpose()?;
    Ok(RunConfig {
        preset,
        laser,
        sim,
        analysis,
        sweep,
    })
}

fn resolve_sweep(sw: SweepDoc, laser: &LaserConfig) -> Result<SweepSpec> {
    if !SWEEPABLE.contains(&sw.parameter.as_str()) {
        return Err(config_error(
            "sweep.parameter",
            format!("`{}` does not name a parameter; expected one of {}", sw.parameter, SWEEPABLE.join(", ")),
        ));
    }
    if sw.count < 2 {
        return Err(config_error("sweep.count", "must be >= 2"));
    }
    if !(sw.start.is_finite() && sw.stop.is_finite()) {
        return Err(config_error("sweep.start", "grid bounds must be finite"));
    }
    if let Some(sp) = &sw.spacing {
        if sp != "linear" {
            return Err(config_error("sweep.spacing", format!("unsupported spacing {sp:?}; only \"linear\"")));
        }
    }
    let seed_policy = match sw.seed_policy.as_deref() {
        None | Some("distinct") => SeedPolicy::Distinct,
        Some("shared") => SeedPolicy::Shared,
        Some(other) => {
            return Err(config_error(
                "sweep.seed_policy",
                format!("unknown policy {other:?}; expected \"distinct\" or \"shared\""),
            ))
        }
    };
    let simulate_indices = sw.simulate_indices.unwrap_or_default();
    if let Some(bad) = simulate_indices.iter().find(|&&i| i >= sw.count) {
        return Err(config_error("sweep.simulate_indices", format!("index {bad} outside a grid of {}", sw.count)));
    }
    // Every grid point must map onto a valid configuration.
    let spec = SweepSpec {
        parameter: sw.parameter,
        start: sw.start,
        stop: sw.stop,
        count: sw.count,
        seed_policy,
        simulate_indices,
        trajectories_per_point: sw.trajectories_per_point.unwrap_or(16),
    };
    if spec.trajectories_per_point == 0 {
        return Err(config_error("sweep.trajectories_per_point", "must be >= 1"));
    }
    for v in [spec.start, spec.stop] {
        let mut c = *laser;
        set_parameter(&mut c, &spec.parameter, v)?;
        c.validate()?;
    }
    Ok(spec)
}
