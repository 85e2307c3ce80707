use num_complex::Complex64;

use crate::model::RamseyGeometry;
use crate::sum::{CompensatedSum, ComplexSum};

/// c-number Bloch vector: lowering coherence and inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spin {
    pub s_minus: Complex64,
    pub s_z: f64,
}

impl Spin {
    pub fn excited() -> Self {
        Spin {
            s_minus: Complex64::new(0.0, 0.0),
            s_z: 1.0,
        }
    }

    /// Dipole `−i s₋` as seen by the cavity field.
    #[inline]
    pub fn dipole(&self) -> Complex64 {
        Complex64::new(self.s_minus.im, -self.s_minus.re)
    }

    /// Resonant rotation by `angle` about the axis set by the field phase
    /// `unit = α/|α|`. The dipole component in phase with the field is
    /// exchanged with the inversion; the quadrature component is untouched.
    #[inline]
    pub fn rotate(&mut self, unit: Complex64, cos_a: f64, sin_a: f64) {
        let local = self.s_minus * unit.conj();
        let v = 2.0 * local.im;
        let v_new = v * cos_a + self.s_z * sin_a;
        self.s_z = self.s_z * cos_a - v * sin_a;
        self.s_minus = Complex64::new(local.re, 0.5 * v_new) * unit;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Not yet entered.
    Waiting,
    Pulse1,
    Drift,
    Pulse2,
    Exited,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomRecord {
    pub entry_time: f64,
    pub spin: Spin,
}

impl AtomRecord {
    /// Stage at time `t`; boundaries belong to the later stage.
    pub fn stage(&self, t: f64, geo: &RamseyGeometry) -> Stage {
        let age = t - self.entry_time;
        if age < 0.0 {
            Stage::Waiting
        } else if age < geo.tau {
            Stage::Pulse1
        } else if age < geo.tau + geo.t_drift {
            Stage::Drift
        } else if age < 2.0 * geo.tau + geo.t_drift {
            Stage::Pulse2
        } else {
            Stage::Exited
        }
    }
}

/// `(N_a, N_b, M)` summed over atoms inside either interaction zone at `t`.
pub fn macroscopic_observables<'a>(
    atoms: impl IntoIterator<Item = &'a AtomRecord>,
    t: f64,
    geo: &RamseyGeometry,
) -> (f64, f64, Complex64) {
    let mut n_a = CompensatedSum::default();
    let mut n_b = CompensatedSum::default();
    let mut m = ComplexSum::default();
    for atom in atoms {
        if matches!(atom.stage(t, geo), Stage::Pulse1 | Stage::Pulse2) {
            n_a.add(0.5 * (1.0 + atom.spin.s_z));
            n_b.add(0.5 * (1.0 - atom.spin.s_z));
            m.add(atom.spin.dipole());
        }
    }
    (n_a.value(), n_b.value(), m.value())
}
