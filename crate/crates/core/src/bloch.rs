//! Exact propagation of one two-level atom through pulse → drift → pulse.
//!
//! Conventions: `c_a` is the upper-state amplitude, `c_b` the lower one. A
//! resonant pulse of area θ acts as
//! `c_a → cos(θ/2) c_a − i sin(θ/2) c_b`, `c_b → −i sin(θ/2) c_a + cos(θ/2) c_b`;
//! a drift of phase φ multiplies `c_a` by `e^{iφ/2}` and `c_b` by `e^{−iφ/2}`,
//! so the lowering coherence `σ₋ = c_b* c_a` advances by `e^{iφ}`. The
//! coherence reported everywhere is `⟨−iσ₋⟩ = −i c_b* c_a`.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelState {
    pub c_a: Complex64,
    pub c_b: Complex64,
}

impl TwoLevelState {
    pub fn excited() -> Self {
        Self {
            c_a: Complex64::new(1.0, 0.0),
            c_b: Complex64::new(0.0, 0.0),
        }
    }

    pub fn ground() -> Self {
        Self {
            c_a: Complex64::new(0.0, 0.0),
            c_b: Complex64::new(1.0, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_a.norm_sqr() + self.c_b.norm_sqr()
    }

    /// Upper-state population.
    pub fn sigma_a(&self) -> f64 {
        self.c_a.norm_sqr()
    }

    /// Lower-state population.
    pub fn sigma_b(&self) -> f64 {
        self.c_b.norm_sqr()
    }

    /// Lowering coherence `c_b* c_a`.
    pub fn sigma_minus(&self) -> Complex64 {
        self.c_b.conj() * self.c_a
    }

    /// `⟨−iσ₋⟩`.
    pub fn coherence(&self) -> Complex64 {
        -Complex64::i() * self.sigma_minus()
    }
}

/// Resonant rotation of area `theta`.
pub fn rabi_pulse(state: TwoLevelState, theta: f64) -> TwoLevelState {
    let (s, c) = (theta / 2.0).sin_cos();
    let mis = Complex64::new(0.0, -s);
    TwoLevelState {
        c_a: c * state.c_a + mis * state.c_b,
        c_b: mis * state.c_a + c * state.c_b,
    }
}

/// Free evolution accumulating relative phase `phi`.
pub fn free_drift(state: TwoLevelState, phi: f64) -> TwoLevelState {
    let half = Complex64::from_polar(1.0, phi / 2.0);
    TwoLevelState {
        c_a: state.c_a * half,
        c_b: state.c_b * half.conj(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Epoch {
    AfterPulse1,
    AfterDrift,
    AfterPulse2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitExpectations {
    pub sigma_a: f64,
    pub sigma_b: f64,
    /// `⟨−iσ₋⟩`.
    pub coherence: Complex64,
    pub epoch: Epoch,
}

impl ExitExpectations {
    fn record(state: &TwoLevelState, epoch: Epoch) -> Self {
        Self {
            sigma_a: state.sigma_a(),
            sigma_b: state.sigma_b(),
            coherence: state.coherence(),
            epoch,
        }
    }
}

/// Expectations of an initially excited atom at the exits of zone 1, the
/// drift region and zone 2.
pub fn ramsey_expectations(theta: f64, phi: f64) -> [ExitExpectations; 3] {
    let s1 = rabi_pulse(TwoLevelState::excited(), theta);
    let s2 = free_drift(s1, phi);
    let s3 = rabi_pulse(s2, theta);
    [
        ExitExpectations::record(&s1, Epoch::AfterPulse1),
        ExitExpectations::record(&s2, Epoch::AfterDrift),
        ExitExpectations::record(&s3, Epoch::AfterPulse2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn pi_pulse_swaps_populations() {
        let s = rabi_pulse(TwoLevelState::excited(), PI);
        assert!(close(s.sigma_a(), 0.0) && close(s.sigma_b(), 1.0));
    }

    #[test]
    fn zero_pulse_is_identity() {
        let s0 = TwoLevelState {
            c_a: Complex64::new(0.6, 0.0),
            c_b: Complex64::new(0.0, 0.8),
        };
        assert_eq!(rabi_pulse(s0, 0.0), s0);
    }

    #[test]
    fn half_pulse_gives_equal_superposition() {
        let s = rabi_pulse(TwoLevelState::excited(), PI / 2.0);
        assert!(close(s.sigma_a(), 0.5) && close(s.sigma_b(), 0.5));
        assert!(close(s.coherence().norm(), 0.5));
    }

    #[test]
    fn drift_by_pi_flips_coherence() {
        let s = rabi_pulse(TwoLevelState::excited(), PI / 2.0);
        let d = free_drift(s, PI);
        assert!((d.coherence() + s.coherence()).norm() < 1e-12);
        assert!(close(d.sigma_a(), s.sigma_a()));
        assert_eq!(free_drift(s, 0.0), s);
    }

    #[test]
    fn ramsey_bright_and_dark_fringes() {
        let bright = ramsey_expectations(PI / 2.0, 0.0);
        assert!(close(bright[2].sigma_a, 0.0));
        let dark = ramsey_expectations(PI / 2.0, PI);
        assert!(close(dark[2].sigma_a, 1.0));
        assert_eq!(dark[0].epoch, Epoch::AfterPulse1);
        assert_eq!(dark[2].epoch, Epoch::AfterPulse2);
    }

    proptest! {
        #[test]
        fn unitarity(ops in proptest::collection::vec((any::<bool>(), -10.0f64..10.0), 1..20)) {
            let mut s = TwoLevelState::excited();
            for (pulse, x) in ops {
                s = if pulse { rabi_pulse(s, x) } else { free_drift(s, x) };
            }
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn pulse_composition(t1 in -7.0f64..7.0, t2 in -7.0f64..7.0, re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let n = (1.0 + re * re + im * im).sqrt();
            let s0 = TwoLevelState { c_a: Complex64::new(1.0 / n, 0.0), c_b: Complex64::new(re / n, im / n) };
            let a = rabi_pulse(rabi_pulse(s0, t1), t2);
            let b = rabi_pulse(s0, t1 + t2);
            prop_assert!((a.c_a - b.c_a).norm() < 1e-12 && (a.c_b - b.c_b).norm() < 1e-12);
        }

        #[test]
        fn drift_periodic_up_to_global_phase(phi in -10.0f64..10.0, theta in 0.0f64..3.2) {
            let s = rabi_pulse(TwoLevelState::excited(), theta);
            let a = free_drift(s, phi);
            let b = free_drift(s, phi + 2.0 * PI);
            prop_assert!((a.coherence() - b.coherence()).norm() < 1e-12);
            prop_assert!((a.sigma_a() - b.sigma_a()).abs() < 1e-12);
        }

        #[test]
        fn imaginary_part_identities(theta in -7.0f64..7.0, phi in -7.0f64..7.0) {
            let e = ramsey_expectations(theta, phi);
            let target = -(theta.sin() * phi.sin()).powi(2);
            // (C − C*)² = (2i Im C)² = −4 (Im C)²
            let sq = |c: Complex64| -4.0 * c.im * c.im;
            prop_assert!(sq(e[0].coherence).abs() < 1e-12);
            prop_assert!((sq(e[1].coherence) - target).abs() < 1e-12);
            prop_assert!((sq(e[2].coherence) - target).abs() < 1e-12);
            for x in e {
                prop_assert!((x.sigma_a + x.sigma_b - 1.0).abs() < 1e-12);
                prop_assert!(x.coherence.norm() <= 0.5 + 1e-12);
            }
        }
    }
}
