use std::collections::VecDeque;

use num_complex::Complex64;

use super::atoms::AtomRecord;
use crate::error::{Error, Result};
use crate::model::LaserConfig;
use crate::sum::ComplexSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldState {
    pub alpha: Complex64,
    pub time: f64,
}

/// One integration step of the coupled field and atoms.
///
/// Inside a step the field is frozen while the atoms evolve exactly: zone
/// atoms rotate about the field axis by `2 g |α| × (time spent in the zone
/// during the step)`, drifting atoms pick up the detuning phase. Entry and
/// exit instants falling inside a step are honoured by splitting the step at
/// the boundary. The field is then advanced with the exact solution of
/// `dα/dt = −(κ/2 + iΔ_c) α + g M̄`, where `M̄` is the step average of the
/// zone dipoles.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    pub g: f64,
    pub kappa: f64,
    /// Cavity detuning Δ_c, rad/s (zero for a resonant cavity).
    pub cavity_detuning: f64,
    pub tau: f64,
    pub t_drift: f64,
    pub delta2: f64,
}

#[inline]
fn overlap(a0: f64, a1: f64, lo: f64, hi: f64) -> f64 {
    (a1.min(hi) - a0.max(lo)).max(0.0)
}

impl Stepper {
    pub fn new(config: &LaserConfig, cavity_detuning: f64) -> Self {
        Stepper {
            g: config.cavity.g,
            kappa: config.cavity.kappa,
            cavity_detuning,
            tau: config.geometry.tau,
            t_drift: config.geometry.t_drift,
            delta2: config.geometry.delta2,
        }
    }

    /// Evolves the atoms over `[t, t + h]` in the frozen field `alpha` and
    /// returns the step-averaged macroscopic dipole `M̄ = −i Σ s₋`.
    pub fn advance_atoms<'a>(
        &self,
        alpha: Complex64,
        atoms: impl IntoIterator<Item = &'a mut AtomRecord>,
        t: f64,
        h: f64,
    ) -> Complex64 {
        let amp = alpha.norm();
        let unit = if amp > 0.0 {
            alpha / amp
        } else {
            Complex64::new(1.0, 0.0)
        };
        let rate = 2.0 * self.g * amp;
        let (s_full, c_full) = (rate * h).sin_cos();
        let drift_full = Complex64::from_polar(1.0, self.delta2 * h);
        let z1_end = self.tau;
        let d_end = self.tau + self.t_drift;
        let z2_end = 2.0 * self.tau + self.t_drift;

        let mut m = ComplexSum::default();
        for atom in atoms {
            let a0 = t - atom.entry_time;
            let a1 = a0 + h;
            if a1 <= 0.0 || a0 >= z2_end {
                continue;
            }
            let spin = &mut atom.spin;
            if (a0 >= 0.0 && a1 <= z1_end) || (a0 >= d_end && a1 <= z2_end) {
                let pre = spin.dipole();
                spin.rotate(unit, c_full, s_full);
                m.add(0.5 * (pre + spin.dipole()));
            } else if a0 >= z1_end && a1 <= d_end {
                spin.s_minus *= drift_full;
            } else {
                let o1 = overlap(a0, a1, 0.0, z1_end);
                let od = overlap(a0, a1, z1_end, d_end);
                let o2 = overlap(a0, a1, d_end, z2_end);
                let pre = spin.dipole();
                if o1 > 0.0 {
                    let (s, c) = (rate * o1).sin_cos();
                    spin.rotate(unit, c, s);
                }
                if od > 0.0 {
                    spin.s_minus *= Complex64::from_polar(1.0, self.delta2 * od);
                }
                if o2 > 0.0 {
                    let (s, c) = (rate * o2).sin_cos();
                    spin.rotate(unit, c, s);
                }
                let w = (o1 + o2) / h;
                if w > 0.0 {
                    m.add(0.5 * w * (pre + spin.dipole()));
                }
            }
        }
        m.value()
    }

    /// Exact field update over `h` for a constant drive `m_avg`.
    pub fn advance_field(&self, alpha: Complex64, m_avg: Complex64, h: f64) -> Complex64 {
        let lambda = Complex64::new(0.5 * self.kappa, self.cavity_detuning);
        let decay = (-lambda * h).exp();
        alpha * decay + self.g * m_avg * (1.0 - decay) / lambda
    }

    /// Advances field and atoms by `h` and drops atoms that have left the
    /// second zone.
    pub fn step(
        &self,
        field: &mut FieldState,
        atoms: &mut VecDeque<AtomRecord>,
        h: f64,
    ) -> Result<()> {
        let t = field.time;
        let m_avg = self.advance_atoms(field.alpha, atoms.iter_mut(), t, h);
        field.alpha = self.advance_field(field.alpha, m_avg, h);
        field.time = t + h;
        let exit_age = 2.0 * self.tau + self.t_drift;
        while atoms
            .front()
            .is_some_and(|a| field.time - a.entry_time >= exit_age)
        {
            atoms.pop_front();
        }
        if !(field.alpha.re.is_finite() && field.alpha.im.is_finite()) {
            return Err(Error::NumericalAbort {
                time: field.time,
                reason: "non-finite field amplitude".into(),
                photon_number: field.alpha.norm_sqr(),
                atoms: atoms.len(),
            });
        }
        Ok(())
    }
}
