use num_complex::Complex64;

use super::trajectory::TrajectoryResult;
use crate::error::{Error, Result};
use crate::model::RamseyGeometry;

/// Minimum ensemble size for a lag-structure estimate.
pub const MIN_TRAJECTORIES: usize = 32;
/// Nearest and farthest sample offsets of the local baseline.
const BASELINE_NEAR: usize = 4;
const BASELINE_FAR: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct LagPeak {
    pub label: String,
    /// Requested lag, s.
    pub lag: f64,
    /// Lag actually used (nearest multiple of the sample interval), s.
    pub sampled_lag: f64,
    /// Ensemble-mean correlation amplitude.
    pub amplitude: f64,
    /// Standard error of the ensemble mean.
    pub stderr: f64,
    /// `amplitude / stderr`.
    pub z: f64,
    /// Control lag (no correlation expected).
    pub control: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagStructure {
    pub peaks: Vec<LagPeak>,
    pub n_trajectories: usize,
}

impl LagStructure {
    pub fn predicted(&self) -> impl Iterator<Item = &LagPeak> {
        self.peaks.iter().filter(|p| !p.control)
    }

    pub fn controls(&self) -> impl Iterator<Item = &LagPeak> {
        self.peaks.iter().filter(|p| p.control)
    }
}

/// Lags at which atom entry and exit events of the same atom correlate:
/// `0, τ, T, τ+T, 2τ+T`, and two control lags with no such pairing,
/// `1.37 τ` (between the zone time and the drift time when `T > 1.37 τ`)
/// and `1.5 (2τ+T)` (beyond a full transit).
pub fn lag_set(geo: &RamseyGeometry) -> Vec<(String, f64, bool)> {
    let (tau, t) = (geo.tau, geo.t_drift);
    vec![
        ("0".into(), 0.0, false),
        ("tau".into(), tau, false),
        ("T".into(), t, false),
        ("tau+T".into(), tau + t, false),
        ("2tau+T".into(), 2.0 * tau + t, false),
        ("control 1.37tau".into(), 1.37 * tau, true),
        ("control 1.5(2tau+T)".into(), 1.5 * (2.0 * tau + t), true),
    ]
}

/// Correlation structure of the fluctuations of the macroscopic dipole.
///
/// Every atom changes `M` abruptly when it enters or leaves a zone, so the
/// noise driving the field is carried by the increments of `M`. For each
/// trajectory the increments over one sample interval are centred and their
/// autocorrelation `Re⟨δΔM*(t) δΔM(t+ℓ)⟩` is summed over the three sample
/// lags nearest to ℓ (an event splits across neighbouring samples). The
/// ensemble mean and its standard error are reported per lag.
///
/// The field responds smoothly to every event, which adds a slowly varying
/// background to the correlation. Each amplitude is therefore measured
/// against a local baseline: the mean correlation at sample offsets
/// `BASELINE_NEAR..=BASELINE_FAR` on both sides of the lag, scaled to the
/// three-sample window.
pub fn noise_lag_structure(
    ensemble: &[TrajectoryResult],
    geo: &RamseyGeometry,
) -> Result<LagStructure> {
    if ensemble.len() < MIN_TRAJECTORIES {
        return Err(Error::Insufficient(format!(
            "lag structure needs at least {MIN_TRAJECTORIES} trajectories, got {}",
            ensemble.len()
        )));
    }
    let h = sample_interval(&ensemble[0])?;
    let lags = lag_set(geo);
    let max_l = lags
        .iter()
        .map(|(_, l, _)| (l / h).round() as usize + BASELINE_FAR)
        .max()
        .unwrap_or(1);

    let mut per_traj: Vec<Vec<f64>> = vec![Vec::with_capacity(ensemble.len()); lags.len()];
    for traj in ensemble {
        if (sample_interval(traj)? - h).abs() > 1e-9 * h {
            return Err(Error::Insufficient("trajectories use different sample intervals".into()));
        }
        let inc: Vec<Complex64> = traj.macro_m.windows(2).map(|w| w[1] - w[0]).collect();
        if inc.len() < 10 * (max_l + 1) {
            return Err(Error::Insufficient(format!(
                "trajectory with seed {} is too short for lag {} samples",
                traj.seed, max_l
            )));
        }
        let mean = inc.iter().sum::<Complex64>() / inc.len() as f64;
        let d: Vec<Complex64> = inc.iter().map(|x| x - mean).collect();
        let corr = |l: usize| -> f64 {
            let n = d.len() - l;
            d[..n]
                .iter()
                .zip(&d[l..])
                .map(|(a, b)| (a.conj() * b).re)
                .sum::<f64>()
                / n as f64
        };
        for (slot, (_, lag, _)) in per_traj.iter_mut().zip(&lags) {
            let l0 = (lag / h).round() as usize;
            // Correlation is even in the lag, so negative offsets fold back.
            let at = |k: isize| corr((l0 as isize + k).unsigned_abs());
            let window: f64 = (-1..=1).map(at).sum();
            let near = BASELINE_NEAR as isize;
            let far = BASELINE_FAR as isize;
            let baseline: f64 =
                (near..=far).map(|k| at(k) + at(-k)).sum::<f64>() / (2 * (far - near + 1)) as f64;
            slot.push(window - 3.0 * baseline);
        }
    }

    let n = ensemble.len() as f64;
    let peaks = lags
        .into_iter()
        .zip(per_traj)
        .map(|((label, lag, control), vals)| {
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let stderr = (var / n).sqrt();
            LagPeak {
                label,
                lag,
                sampled_lag: (lag / h).round() * h,
                amplitude: mean,
                stderr,
                z: if stderr > 0.0 { mean / stderr } else { 0.0 },
                control,
            }
        })
        .collect();
    Ok(LagStructure {
        peaks,
        n_trajectories: ensemble.len(),
    })
}

fn sample_interval(traj: &TrajectoryResult) -> Result<f64> {
    if traj.times.len() < 2 {
        return Err(Error::Insufficient("trajectory has fewer than two samples".into()));
    }
    Ok(traj.times[1] - traj.times[0])
}
