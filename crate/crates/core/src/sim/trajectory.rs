use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::atoms::{macroscopic_observables, AtomRecord, Spin};
use super::schedule::{schedule_with, InjectionMode};
use super::stepper::{FieldState, Stepper};
use crate::analytic::{self, Outcome};
use crate::error::{Error, Result};
use crate::model::LaserConfig;

/// Runaway threshold relative to the analytic photon number.
const RUNAWAY_FACTOR: f64 = 1e6;

/// How the cavity resonance is placed relative to the atomic reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CavityTuning {
    /// Detune the cavity so that the mean quadrature dipole of the
    /// second-zone atoms does not pull the laser frequency (see
    /// [`OperatingPoint`]).
    Compensated,
    /// Fixed cavity detuning Δ_c in rad/s (0 = resonant).
    Fixed(f64),
}

/// Self-consistent lasing state of the microscopic model.
///
/// The pulse area follows from the field the atoms sustain,
/// [`analytic::self_consistent_pulse_area`]. Away from the fringe peak the
/// atoms leaving the drift region carry a mean dipole component in quadrature
/// with the field, `R τ sinθ sinφ / 2`; on a resonant cavity it pulls the
/// laser onto the fringe peak. A cavity detuning
/// `Δ_c = g R τ sinθ sinφ / (2 |α|)` cancels that pull and keeps the laser at
/// the configured drift phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub theta: f64,
    pub amplitude: f64,
    pub photon_number: f64,
    pub cavity_detuning: f64,
}

impl OperatingPoint {
    pub fn of(config: &LaserConfig) -> Option<Self> {
        let theta = analytic::self_consistent_pulse_area(config)?;
        let geo = &config.geometry;
        let amplitude = theta / (2.0 * config.cavity.g * geo.tau);
        let quadrature = 0.5 * config.pump.rate * geo.tau * theta.sin() * geo.phi().sin();
        Some(OperatingPoint {
            theta,
            amplitude,
            photon_number: amplitude * amplitude,
            cavity_detuning: config.cavity.g * quadrature / amplitude,
        })
    }

    /// The configuration with its Rabi frequency replaced by the
    /// self-consistent one, for like-for-like analytic comparisons.
    pub fn apply(&self, config: &LaserConfig) -> LaserConfig {
        let mut cfg = *config;
        cfg.geometry = cfg.geometry.with_theta(self.theta);
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub laser: LaserConfig,
    pub dt: f64,
    /// Total simulated time, warm-up included.
    pub duration: f64,
    pub seed: u64,
    pub output_stride: usize,
    pub injection: InjectionMode,
    pub tuning: CavityTuning,
    /// Start from the self-consistent operating point: field at its steady
    /// amplitude and the apparatus already filled with atoms on their ideal
    /// paths. Otherwise the apparatus starts empty with a zero field.
    pub start_at_operating_point: bool,
}

impl SimConfig {
    /// Largest step allowed for a configuration: `min(τ, 2/κ) / 20`.
    pub fn max_dt(laser: &LaserConfig) -> f64 {
        laser.geometry.tau.min(2.0 / laser.cavity.kappa) / 20.0
    }

    /// Default configuration: largest allowed step, about 40 recorded
    /// samples per zone time, compensated cavity, operating-point start.
    /// The injection statistics follow `laser.pump.p`, which must be 0 or 1.
    pub fn new(laser: LaserConfig, duration: f64, seed: u64) -> Result<Self> {
        let dt = Self::max_dt(&laser);
        let stride = ((laser.geometry.tau / 40.0) / dt).round().max(1.0) as usize;
        let cfg = SimConfig {
            laser,
            dt,
            duration,
            seed,
            output_stride: stride,
            injection: InjectionMode::from_p(laser.pump.p)?,
            tuning: CavityTuning::Compensated,
            start_at_operating_point: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Data discarded at the start: `5/κ + 3 (2τ + T)`.
    pub fn warmup(&self) -> f64 {
        5.0 / self.laser.cavity.kappa + 3.0 * self.laser.geometry.transit_time()
    }

    pub fn sample_interval(&self) -> f64 {
        self.dt * self.output_stride as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.laser.validate()?;
        let bound = Self::max_dt(&self.laser);
        if !(self.dt > 0.0 && self.dt <= bound * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter {
                name: "sim.dt",
                value: self.dt,
                reason: "step must satisfy 0 < dt <= min(tau, 2/kappa)/20",
            });
        }
        if self.output_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "sim.output_stride",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        if !(self.duration.is_finite() && self.duration > self.warmup() + 2.0 * self.sample_interval())
        {
            return Err(Error::InvalidParameter {
                name: "sim.duration",
                value: self.duration,
                reason: "must exceed the warm-up 5/kappa + 3(2 tau + T) by at least two samples",
            });
        }
        if self.injection.p() != self.laser.pump.p {
            return Err(Error::InvalidParameter {
                name: "pump.p",
                value: self.laser.pump.p,
                reason: "injection statistics disagree with the pumping parameter",
            });
        }
        Ok(())
    }

    /// Non-fatal problems with the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let recorded = self.duration - self.warmup();
        if let Ok(Outcome::Lasing(lw)) = analytic::linewidth_full(&self.laser) {
            if recorded * lw.d_full < 10.0 {
                out.push(format!(
                    "recorded span {:.3e} s is short against the expected diffusion time 1/D = {:.3e} s",
                    recorded,
                    1.0 / lw.d_full
                ));
            }
        }
        if OperatingPoint::of(&self.laser).is_none() {
            out.push("configuration is below the lasing threshold of the microscopic model".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    pub alphas: Vec<Complex64>,
    pub photon_numbers: Vec<f64>,
    pub macro_na: Vec<f64>,
    pub macro_nb: Vec<f64>,
    /// Macroscopic dipole `M = −i Σ s₋` over the two zones.
    pub macro_m: Vec<Complex64>,
    pub seed: u64,
    pub operating_point: Option<OperatingPoint>,
    pub cavity_detuning: f64,
}

impl TrajectoryResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mean_photon_number(&self) -> f64 {
        crate::sum::sum(&self.photon_numbers) / self.len() as f64
    }

    pub fn mean_na(&self) -> f64 {
        crate::sum::sum(&self.macro_na) / self.len() as f64
    }

    pub fn mean_nb(&self) -> f64 {
        crate::sum::sum(&self.macro_nb) / self.len() as f64
    }
}

fn seeded_spin(rng: &mut ChaCha8Rng) -> Spin {
    let psi = rng.random::<f64>() * 2.0 * PI;
    Spin {
        s_minus: Complex64::from_polar(0.5, psi),
        s_z: 1.0,
    }
}

/// Runs one trajectory. The output is a pure function of the configuration
/// (seed included).
pub fn run_trajectory(config: &SimConfig) -> Result<TrajectoryResult> {
    config.validate()?;
    let laser = &config.laser;
    let geo = laser.geometry;
    let op = OperatingPoint::of(laser);
    if config.start_at_operating_point && op.is_none() {
        return Err(Error::InvalidParameter {
            name: "pump.rate",
            value: laser.pump.rate,
            reason: "below the lasing threshold: no operating point to start from",
        });
    }
    let detuning = match config.tuning {
        CavityTuning::Compensated => op.map_or(0.0, |o| o.cavity_detuning),
        CavityTuning::Fixed(d) => d,
    };
    let stepper = Stepper::new(laser, detuning);
    let runaway = RUNAWAY_FACTOR
        * match analytic::steady_state(laser)? {
            Outcome::Lasing(ss) => ss.photon_number.max(1.0),
            Outcome::BelowThreshold { .. } => 1.0,
        };

    // Independent streams for injection times and dipole seeds, so that the
    // two pumping statistics can share seeds.
    let mut sched_rng = ChaCha8Rng::seed_from_u64(config.seed);
    sched_rng.set_stream(0);
    let mut spin_rng = ChaCha8Rng::seed_from_u64(config.seed);
    spin_rng.set_stream(1);

    let fill = if config.start_at_operating_point {
        geo.transit_time()
    } else {
        0.0
    };
    let entries: Vec<f64> = schedule_with(
        laser.pump.rate,
        config.injection,
        config.duration + fill,
        &mut sched_rng,
    )?
    .into_iter()
    .map(|t| t - fill)
    .collect();

    let dt = config.dt;
    let n_steps = (config.duration / dt).round() as usize;
    let warm_steps = (config.warmup() / dt).ceil() as usize;
    let n_records = (n_steps.saturating_sub(warm_steps)).div_ceil(config.output_stride);

    let mut atoms: VecDeque<AtomRecord> = VecDeque::new();
    let mut next = 0;
    let mut field = FieldState {
        alpha: Complex64::new(0.0, 0.0),
        time: 0.0,
    };
    if let (true, Some(op)) = (config.start_at_operating_point, op) {
        field.alpha = Complex64::new(op.amplitude, 0.0);
        let rate = op.theta / geo.tau;
        let unit = Complex64::new(1.0, 0.0);
        while next < entries.len() && entries[next] < 0.0 {
            let age = -entries[next];
            let mut spin = seeded_spin(&mut spin_rng);
            let in1 = age.min(geo.tau);
            let (s, c) = (rate * in1).sin_cos();
            spin.rotate(unit, c, s);
            let drift = (age - geo.tau).clamp(0.0, geo.t_drift);
            spin.s_minus *= Complex64::from_polar(1.0, geo.delta2 * drift);
            let in2 = (age - geo.tau - geo.t_drift).clamp(0.0, geo.tau);
            let (s, c) = (rate * in2).sin_cos();
            spin.rotate(unit, c, s);
            atoms.push_back(AtomRecord {
                entry_time: entries[next],
                spin,
            });
            next += 1;
        }
    }

    let mut out = TrajectoryResult {
        times: Vec::with_capacity(n_records),
        alphas: Vec::with_capacity(n_records),
        photon_numbers: Vec::with_capacity(n_records),
        macro_na: Vec::with_capacity(n_records),
        macro_nb: Vec::with_capacity(n_records),
        macro_m: Vec::with_capacity(n_records),
        seed: config.seed,
        operating_point: op,
        cavity_detuning: detuning,
    };

    for k in 0..n_steps {
        let t = k as f64 * dt;
        field.time = t;
        while next < entries.len() && entries[next] < t + dt {
            atoms.push_back(AtomRecord {
                entry_time: entries[next],
                spin: seeded_spin(&mut spin_rng),
            });
            next += 1;
        }
        if k >= warm_steps && (k - warm_steps).is_multiple_of(config.output_stride) {
            let (na, nb, m) = macroscopic_observables(atoms.iter(), t, &geo);
            out.times.push(t);
            out.alphas.push(field.alpha);
            out.photon_numbers.push(field.alpha.norm_sqr());
            out.macro_na.push(na);
            out.macro_nb.push(nb);
            out.macro_m.push(m);
        }
        stepper.step(&mut field, &mut atoms, dt)?;
        let photons = field.alpha.norm_sqr();
        if photons > runaway {
            return Err(Error::NumericalAbort {
                time: field.time,
                reason: "runaway field".into(),
                photon_number: photons,
                atoms: atoms.len(),
            });
        }
    }
    Ok(out)
}
