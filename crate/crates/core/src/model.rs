//! Physical parameters, derived quantities and the bad-cavity regime check.
//!
//! Every rate and frequency is stored in angular units (rad/s); times are in
//! seconds. The pulse area and drift phase are never stored: they are always
//! recomputed from the Rabi frequency, detuning and the two transit times.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Default ratio required for every "much less than" link of the regime chain.
pub const DEFAULT_MIN_SEPARATION: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    /// Cavity field decay rate (the field amplitude decays at `kappa / 2`).
    pub kappa: f64,
    /// Atom–field coupling constant.
    pub g: f64,
    /// Mode volume in m³, only used to derive `g` from a dipole moment.
    pub mode_volume: Option<f64>,
    /// Mode angular frequency, only used to derive `g` from a dipole moment.
    pub mode_frequency: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomParams {
    /// Upper-level decay to levels outside the lasing pair.
    pub gamma_a: f64,
    /// Upper → lower spontaneous decay.
    pub gamma_a_prime: f64,
    /// Lower-level decay.
    pub gamma_b: f64,
    /// Decay of the lasing dipole.
    pub gamma_ab: f64,
}

impl AtomParams {
    /// Largest atomic rate, dipole decay included.
    pub fn gamma_max(&self) -> f64 {
        self.gamma_a
            .max(self.gamma_a_prime)
            .max(self.gamma_b)
            .max(self.gamma_ab)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseyGeometry {
    /// Time spent inside one interaction zone.
    pub tau: f64,
    /// Free-flight time between the two zones.
    pub t_drift: f64,
    /// Resonant Rabi frequency inside the zones.
    pub omega_r: f64,
    /// Atom–field detuning in the drift region.
    pub delta2: f64,
}

impl RamseyGeometry {
    /// Pulse area of one zone, `omega_r * tau`.
    pub fn theta(&self) -> f64 {
        self.omega_r * self.tau
    }

    /// Phase accumulated during the drift, `delta2 * t_drift`.
    pub fn phi(&self) -> f64 {
        self.delta2 * self.t_drift
    }

    /// Full transit time through zone 1, drift and zone 2.
    pub fn transit_time(&self) -> f64 {
        2.0 * self.tau + self.t_drift
    }

    /// Returns a copy whose Rabi frequency produces pulse area `theta`.
    pub fn with_theta(mut self, theta: f64) -> Self {
        self.omega_r = theta / self.tau;
        self
    }

    /// Returns a copy whose drift detuning produces drift phase `phi`.
    ///
    /// Fails for a zero drift time, where only `phi = 0` is reachable.
    pub fn with_phi(mut self, phi: f64) -> Result<Self> {
        if self.t_drift > 0.0 {
            self.delta2 = phi / self.t_drift;
            Ok(self)
        } else if phi == 0.0 {
            Ok(self)
        } else {
            Err(Error::InvalidParameter {
                name: "geometry.t_drift",
                value: self.t_drift,
                reason: "a nonzero drift phase needs a positive drift time",
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpParams {
    /// Mean injection rate, atoms/s.
    pub rate: f64,
    /// Pumping statistics: 0 is Poissonian, 1 is perfectly regular.
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserConfig {
    pub cavity: CavityParams,
    pub atom: AtomParams,
    pub geometry: RamseyGeometry,
    pub pump: PumpParams,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and >= 0",
        })
    }
}

impl LaserConfig {
    /// Checks every field-level constraint.
    pub fn validate(&self) -> Result<()> {
        positive("cavity.kappa", self.cavity.kappa)?;
        positive("cavity.g", self.cavity.g)?;
        if let Some(v) = self.cavity.mode_volume {
            positive("cavity.mode_volume", v)?;
        }
        if let Some(w) = self.cavity.mode_frequency {
            positive("cavity.mode_frequency", w)?;
        }
        non_negative("atom.gamma_a", self.atom.gamma_a)?;
        non_negative("atom.gamma_a_prime", self.atom.gamma_a_prime)?;
        non_negative("atom.gamma_b", self.atom.gamma_b)?;
        // Zero dipole decay is the idealized limit handled by the cancelled
        // linewidth formula.
        non_negative("atom.gamma_ab", self.atom.gamma_ab)?;
        positive("geometry.tau", self.geometry.tau)?;
        non_negative("geometry.t_drift", self.geometry.t_drift)?;
        if !self.geometry.omega_r.is_finite() {
            return Err(Error::InvalidParameter {
                name: "geometry.omega_r",
                value: self.geometry.omega_r,
                reason: "must be finite",
            });
        }
        if !self.geometry.delta2.is_finite() {
            return Err(Error::InvalidParameter {
                name: "geometry.delta2",
                value: self.geometry.delta2,
                reason: "must be finite",
            });
        }
        positive("pump.rate", self.pump.rate)?;
        if !(0.0..=1.0).contains(&self.pump.p) {
            return Err(Error::InvalidParameter {
                name: "pump.p",
                value: self.pump.p,
                reason: "must lie in [0, 1]",
            });
        }
        Ok(())
    }
}

/// One "left ≪ right" link of the regime chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeLink {
    pub name: &'static str,
    pub left: f64,
    pub right: f64,
    /// `right / left`; infinite when `left` is zero.
    pub ratio: f64,
    pub pass: bool,
    /// Set when the link could not be evaluated (zero drift time).
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub min_separation: f64,
    pub links: Vec<RegimeLink>,
    /// True when every evaluated link passes.
    pub pass: bool,
}

/// Evaluates `gamma_max ≪ 1/T ≪ 1/tau ≪ kappa/2`.
///
/// A zero drift time makes the two links involving `1/T` meaningless; they
/// are listed as degenerate and excluded from the overall flag.
pub fn validate_regime(config: &LaserConfig, min_separation: f64) -> Result<RegimeReport> {
    positive("geometry.tau", config.geometry.tau)?;
    positive("cavity.kappa", config.cavity.kappa)?;
    positive("min_separation", min_separation)?;

    let gamma_max = config.atom.gamma_max();
    let inv_t = 1.0 / config.geometry.t_drift;
    let inv_tau = 1.0 / config.geometry.tau;
    let half_kappa = config.cavity.kappa / 2.0;
    let t_zero = config.geometry.t_drift == 0.0;

    let link = |name, left: f64, right: f64, degenerate: bool| {
        let ratio = if degenerate {
            f64::NAN
        } else if left == 0.0 {
            f64::INFINITY
        } else {
            right / left
        };
        RegimeLink {
            name,
            left,
            right,
            ratio,
            pass: !degenerate && ratio >= min_separation * (1.0 - 1e-12),
            degenerate,
        }
    };
    let links = vec![
        link("gamma_max << 1/T", gamma_max, inv_t, t_zero),
        link("1/T << 1/tau", inv_t, inv_tau, t_zero),
        link("1/tau << kappa/2", inv_tau, half_kappa, false),
    ];
    let pass = links.iter().all(|l| l.degenerate || l.pass);
    Ok(RegimeReport {
        min_separation,
        links,
        pass,
    })
}

/// Coupling constant `mu * sqrt(omega / (2 hbar eps0 V))` in rad/s.
pub fn coupling_from_dipole(mu: f64, omega: f64, volume: f64) -> Result<f64> {
    positive("dipole_moment", mu)?;
    positive("mode_frequency", omega)?;
    positive("mode_volume", volume)?;
    Ok(mu * (omega / (2.0 * HBAR * EPSILON_0 * volume)).sqrt())
}

/// Calcium-40 intercombination line in a thermal beam.
///
/// 1 mm zones crossed at 500 m/s give a 2 µs transit; the drift time of
/// 20 µs corresponds to 10 mm of free flight. Pulse area and drift phase
/// both default to π/2.
pub fn ca40_preset() -> LaserConfig {
    let tau = 1e-3 / 500.0;
    let t_drift = 20e-6;
    let gamma_a_prime = 2.0 * PI * 320.0;
    LaserConfig {
        cavity: CavityParams {
            kappa: 1e7,
            g: 1e3,
            mode_volume: None,
            mode_frequency: None,
        },
        atom: AtomParams {
            gamma_a: 0.0,
            gamma_a_prime,
            gamma_b: 0.0,
            gamma_ab: gamma_a_prime / 2.0,
        },
        geometry: RamseyGeometry {
            tau,
            t_drift,
            omega_r: (PI / 2.0) / tau,
            delta2: (PI / 2.0) / t_drift,
        },
        pump: PumpParams { rate: 1e6, p: 1.0 },
    }
}

/// Scaled configuration used for simulation at desk scale.
///
/// Same atom and cavity damping as [`ca40_preset`], with the drift shortened
/// to five zone times and the coupling and flux raised so that the mean
/// photon number is 5 at pulse area π/2 and drift phase π/3. The coupling
/// is chosen so the pulse area is self-consistent with the steady field.
pub fn desk_preset() -> LaserConfig {
    let mut cfg = ca40_preset();
    let tau = cfg.geometry.tau;
    let t_drift = 5.0 * tau;
    let theta = PI / 2.0;
    let phi = PI / 3.0;
    let photons: f64 = 5.0;
    let flux = theta.sin().powi(2) * (phi / 2.0).cos().powi(2);
    cfg.geometry = RamseyGeometry {
        tau,
        t_drift,
        omega_r: theta / tau,
        delta2: phi / t_drift,
    };
    cfg.cavity.g = theta / (2.0 * tau * photons.sqrt());
    cfg.pump.rate = cfg.cavity.kappa * photons / flux;
    cfg.pump.p = 1.0;
    cfg
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Option<LaserConfig> {
    match name {
        "ca40" => Some(ca40_preset()),
        "desk" => Some(desk_preset()),
        _ => None,
    }
}

pub const PRESET_NAMES: &[&str] = &["ca40", "desk"];
