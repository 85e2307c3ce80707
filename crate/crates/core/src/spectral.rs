//! Linewidth estimation from a sampled complex field.
//!
//! Two independent routes: the growth rate of the phase-increment variance,
//! `Var[φ(t+ℓ) − φ(t)] = D ℓ`, and the full width at half maximum of a
//! Lorentzian fitted to the field power spectrum. For a field whose phase
//! performs free diffusion both give the same `D` in rad/s.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

pub use crate::analytic::SpectrumCurve;
use crate::error::{Error, Result};

/// Coefficient of determination below which a fit is flagged unreliable.
pub const MIN_R_SQUARED: f64 = 0.9;
/// Number of contiguous blocks used by the block bootstrap.
pub const BOOTSTRAP_BLOCKS: usize = 20;
const BOOTSTRAP_REPLICATES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x5eed_b007;
/// Largest number of lags evaluated inside a lag window.
const MAX_LAGS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    pub times: Vec<f64>,
    /// Continuous phase, rad.
    pub phases: Vec<f64>,
}

impl PhaseSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PhaseDiffusionFit,
    LorentzianFit,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::PhaseDiffusionFit => "phase_diffusion_fit",
            Method::LorentzianFit => "lorentzian_fit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinewidthEstimate {
    /// Estimated diffusion constant (= Lorentzian FWHM), rad/s.
    pub d_hat: f64,
    pub stderr: f64,
    pub method: Method,
    pub r_squared: f64,
    /// Lag window (s) or frequency window (rad/s) used by the fit.
    pub window: (f64, f64),
    /// Fit quality below [`MIN_R_SQUARED`] or slope clipped at zero.
    pub unreliable: bool,
    /// Lorentzian narrower than ten frequency bins.
    pub resolution_limited: bool,
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Insufficient("fewer than two samples".into()));
    }
    let h = times[1] - times[0];
    if !(h > 0.0) {
        return Err(Error::Insufficient("sample times must increase".into()));
    }
    let span = times[times.len() - 1] - times[0];
    let expected = h * (times.len() - 1) as f64;
    if (span - expected).abs() > 1e-6 * expected {
        return Err(Error::Insufficient("sample times are not uniform".into()));
    }
    Ok(h)
}

/// Continuous phase of a complex series.
///
/// Each increment is `arg(α_{i+1} α_i*)`, the branch nearest to zero, so the
/// result does not depend on how the raw phases are wrapped.
pub fn unwrap_phase(times: &[f64], alphas: &[Complex64]) -> Result<PhaseSeries> {
    if times.len() != alphas.len() {
        return Err(Error::Insufficient("times and amplitudes differ in length".into()));
    }
    if alphas.is_empty() {
        return Err(Error::Insufficient("empty series".into()));
    }
    let mut amps: Vec<f64> = alphas.iter().map(|a| a.norm()).collect();
    let floor = {
        let mid = amps.len() / 2;
        let (_, median, _) = amps.select_nth_unstable_by(mid, f64::total_cmp);
        1e-6 * *median
    };
    for (index, a) in alphas.iter().enumerate() {
        let amplitude = a.norm();
        if !(amplitude >= floor) || amplitude == 0.0 {
            return Err(Error::AmplitudeCollapse { index, amplitude });
        }
    }
    amps.clear();
    let mut phases = Vec::with_capacity(alphas.len());
    let mut phi = alphas[0].arg();
    phases.push(phi);
    for w in alphas.windows(2) {
        phi += (w[1] * w[0].conj()).arg();
        phases.push(phi);
    }
    Ok(PhaseSeries {
        times: times.to_vec(),
        phases,
    })
}

/// Removes the mean carrier frequency: returns `α_k e^{−i ω̄ t_k}` and `ω̄`,
/// with `ω̄` the argument of the mean one-sample phasor increment.
pub fn remove_carrier(times: &[f64], alphas: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let h = check_uniform(times)?;
    let acc: Complex64 = alphas.windows(2).map(|w| w[1] * w[0].conj()).sum();
    let omega = acc.arg() / h;
    let t0 = times[0];
    let out = alphas
        .iter()
        .zip(times)
        .map(|(a, t)| a * Complex64::from_polar(1.0, -omega * (t - t0)))
        .collect();
    Ok((out, omega))
}

/// `[10/κ, min(duration/10, 0.1/D_expected)]`.
pub fn default_lag_window(kappa: f64, duration: f64, d_expected: f64) -> (f64, f64) {
    (10.0 / kappa, (duration / 10.0).min(0.1 / d_expected))
}

fn lags_in_window(h: f64, window: (f64, f64)) -> Vec<usize> {
    let lo = ((window.0 / h) * (1.0 - 1e-9)).ceil().max(1.0) as usize;
    let hi = ((window.1 / h) * (1.0 + 1e-9)).floor() as usize;
    if hi < lo {
        return Vec::new();
    }
    let count = hi - lo + 1;
    if count <= MAX_LAGS {
        return (lo..=hi).collect();
    }
    let mut lags: Vec<usize> = (0..MAX_LAGS)
        .map(|i| lo + ((i as f64) * (count - 1) as f64 / (MAX_LAGS - 1) as f64).round() as usize)
        .collect();
    lags.dedup();
    lags
}

/// Least-squares slope through the origin and the coefficient of
/// determination of that fit.
fn origin_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let slope = sxy / sxx;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    (slope, r2)
}

/// Slope of the phase-increment variance against lag.
///
/// Increments are assigned to [`BOOTSTRAP_BLOCKS`] contiguous blocks by
/// their start time; the standard error comes from resampling whole blocks.
pub fn phase_diffusion_fit(series: &PhaseSeries, lag_window: (f64, f64)) -> Result<LinewidthEstimate> {
    let h = check_uniform(&series.times)?;
    let duration = series.duration();
    let (lo, hi) = lag_window;
    if !(lo > 0.0 && hi >= lo && hi <= duration / 10.0 * (1.0 + 1e-9)) {
        return Err(Error::Insufficient(format!(
            "lag window [{lo:.3e}, {hi:.3e}] s must lie within (0, duration/10 = {:.3e}]",
            duration / 10.0
        )));
    }
    let lags = lags_in_window(h, lag_window);
    if lags.is_empty() {
        return Err(Error::Insufficient("no sample lag inside the lag window".into()));
    }
    let n = series.phases.len();
    let max_lag = *lags.last().expect("nonempty");
    if n - max_lag < 100 {
        return Err(Error::Insufficient(format!(
            "only {} increments at the largest lag (need 100)",
            n - max_lag
        )));
    }

    let b = BOOTSTRAP_BLOCKS;
    // Per block and lag: count, sum and sum of squares of centred increments.
    let mut stats = vec![[0.0f64; 3]; b * lags.len()];
    let p = &series.phases;
    for (li, &l) in lags.iter().enumerate() {
        let m = n - l;
        let shift = (p[n - 1] - p[0]) * l as f64 / (n - 1) as f64;
        for k in 0..m {
            let x = p[k + l] - p[k] - shift;
            let s = &mut stats[(k * b / m) * lags.len() + li];
            s[0] += 1.0;
            s[1] += x;
            s[2] += x * x;
        }
    }
    let lag_times: Vec<f64> = lags.iter().map(|&l| l as f64 * h).collect();
    let variances = |weights: &[f64]| -> Vec<f64> {
        (0..lags.len())
            .map(|li| {
                let (mut c, mut s1, mut s2) = (0.0, 0.0, 0.0);
                for (bi, w) in weights.iter().enumerate() {
                    let s = &stats[bi * lags.len() + li];
                    c += w * s[0];
                    s1 += w * s[1];
                    s2 += w * s[2];
                }
                s2 / c - (s1 / c).powi(2)
            })
            .collect()
    };
    let v = variances(&vec![1.0; b]);
    let (slope, r2) = origin_fit(&lag_times, &v);

    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut weights = vec![0.0; b];
    let reps: Vec<f64> = (0..BOOTSTRAP_REPLICATES)
        .map(|_| {
            weights.iter_mut().for_each(|w| *w = 0.0);
            for _ in 0..b {
                weights[rng.random_range(0..b)] += 1.0;
            }
            origin_fit(&lag_times, &variances(&weights)).0
        })
        .collect();
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let stderr =
        (reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();

    Ok(LinewidthEstimate {
        d_hat: slope.max(0.0),
        stderr,
        method: Method::PhaseDiffusionFit,
        r_squared: r2,
        window: (lag_times[0], *lag_times.last().expect("nonempty")),
        unreliable: r2 < MIN_R_SQUARED || slope < 0.0,
        resolution_limited: false,
    })
}

/// Segment-averaged periodogram of a complex series.
///
/// The record is cut into `segments` equal non-overlapping pieces; each is
/// Fourier transformed without tapering. The density is normalised so that
/// `Σ S(ω) Δω / 2π` equals the mean of `|α|²`, and the frequency axis (rad/s)
/// runs from the negative to the positive Nyquist limit, so a field whose
/// phase diffuses with constant `D` has `S(ω) ≈ P D / (ω² + D²/4)`.
pub fn field_psd(times: &[f64], alphas: &[Complex64], segments: usize) -> Result<SpectrumCurve> {
    if times.len() != alphas.len() {
        return Err(Error::Insufficient("times and amplitudes differ in length".into()));
    }
    if segments < 8 {
        return Err(Error::Insufficient(format!("need at least 8 segments, got {segments}")));
    }
    let seg_len = alphas.len() / segments;
    if seg_len < 1024 {
        return Err(Error::Insufficient(format!(
            "segments of {seg_len} samples are shorter than 1024"
        )));
    }
    let h = check_uniform(times)?;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(seg_len);
    let mut acc = vec![0.0f64; seg_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg_len];
    for s in 0..segments {
        buf.copy_from_slice(&alphas[s * seg_len..(s + 1) * seg_len]);
        fft.process(&mut buf);
        for (a, x) in acc.iter_mut().zip(&buf) {
            *a += x.norm_sqr();
        }
    }
    let scale = h / (seg_len as f64 * segments as f64);
    let d_omega = 2.0 * PI / (seg_len as f64 * h);
    let half = seg_len.div_ceil(2);
    let mut omega = Vec::with_capacity(seg_len);
    let mut value = Vec::with_capacity(seg_len);
    // Negative frequencies first: bins half..seg_len, then 0..half.
    for k in (half..seg_len).chain(0..half) {
        let signed = if k >= half {
            k as f64 - seg_len as f64
        } else {
            k as f64
        };
        omega.push(signed * d_omega);
        value.push(acc[k] * scale);
    }
    Ok(SpectrumCurve { omega, value })
}

/// Two-sided spectral density of the phase, `S_φ(ω)` at positive `ω`, built
/// from the periodogram of the phase increments divided by the difference
/// filter `4 sin²(ωh/2)`. Free diffusion gives `S_φ = D/ω²`.
pub fn phase_psd(series: &PhaseSeries, segments: usize) -> Result<SpectrumCurve> {
    let h = check_uniform(&series.times)?;
    let inc: Vec<Complex64> = series
        .phases
        .windows(2)
        .map(|w| Complex64::new(w[1] - w[0], 0.0))
        .collect();
    let mean = inc.iter().map(|c| c.re).sum::<f64>() / inc.len() as f64;
    let centred: Vec<Complex64> = inc.iter().map(|c| Complex64::new(c.re - mean, 0.0)).collect();
    let times: Vec<f64> = series.times[..centred.len()].to_vec();
    let s = field_psd(&times, &centred, segments)?;
    let (omega, value) = s
        .omega
        .iter()
        .zip(&s.value)
        .filter(|(w, _)| **w > 0.0)
        .map(|(&w, &v)| (w, v / (4.0 * (w * h / 2.0).sin().powi(2))))
        .unzip();
    Ok(SpectrumCurve { omega, value })
}

/// Solves a 3×3 linear system by Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn invert3(a: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut inv = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        let col = solve3(a, e)?;
        for i in 0..3 {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

/// Lorentzian `H / (1 + ((ω − ω0)/w)²)`; returns value and gradient with
/// respect to `(H, ω0, w)`.
fn lorentz(p: &[f64; 3], omega: f64) -> (f64, [f64; 3]) {
    let (hgt, w0, w) = (p[0], p[1], p[2]);
    let u = (omega - w0) / w;
    let den = 1.0 + u * u;
    let val = hgt / den;
    let d = 2.0 * hgt * u / (w * den * den);
    (val, [1.0 / den, d, d * u])
}

/// Least-squares Lorentzian fit (Levenberg–Marquardt) around the spectral
/// peak; `D_hat` is the fitted full width at half maximum.
///
/// The fit uses the points within `window` (rad/s) when given, otherwise
/// within five initial half-power widths (at least ten bins) of the peak.
pub fn lorentzian_fit(spectrum: &SpectrumCurve, window: Option<(f64, f64)>) -> Result<LinewidthEstimate> {
    let n = spectrum.len();
    if n < 5 {
        return Err(Error::Insufficient("spectrum has fewer than five points".into()));
    }
    let d_omega = (spectrum.omega[n - 1] - spectrum.omega[0]) / (n - 1) as f64;
    let (peak, &peak_val) = spectrum
        .value
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    if !(peak_val > 0.0) {
        return Err(Error::Insufficient("spectrum has no positive peak".into()));
    }
    // Initial half width from the contiguous half-power region.
    let mut left = peak;
    while left > 0 && spectrum.value[left - 1] >= peak_val / 2.0 {
        left -= 1;
    }
    let mut right = peak;
    while right + 1 < n && spectrum.value[right + 1] >= peak_val / 2.0 {
        right += 1;
    }
    let points_above_half = right - left + 1;
    let w_init = (0.5 * (spectrum.omega[right] - spectrum.omega[left]) + 0.5 * d_omega).max(0.25 * d_omega);
    let center = spectrum.omega[peak];
    let window = window.unwrap_or_else(|| {
        let half = (5.0 * 2.0 * w_init).max(10.0 * d_omega);
        (center - half, center + half)
    });
    if !(window.0 <= center && center <= window.1) {
        return Err(Error::Insufficient("spectral peak lies outside the fit window".into()));
    }
    let pts: Vec<(f64, f64)> = spectrum
        .omega
        .iter()
        .zip(&spectrum.value)
        .filter(|(w, _)| (window.0..=window.1).contains(*w))
        .map(|(&w, &v)| (w, v))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Insufficient("fewer than four points in the fit window".into()));
    }

    let ssr = |p: &[f64; 3]| -> f64 { pts.iter().map(|&(w, v)| (v - lorentz(p, w).0).powi(2)).sum() };
    let normal = |p: &[f64; 3]| {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for &(w, v) in &pts {
            let (f, g) = lorentz(p, w);
            let r = v - f;
            for i in 0..3 {
                jtr[i] += g[i] * r;
                for j in 0..3 {
                    jtj[i][j] += g[i] * g[j];
                }
            }
        }
        (jtj, jtr)
    };

    let mut p = [peak_val, center, w_init];
    let mut cost = ssr(&p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let (jtj, jtr) = normal(&p);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for i in 0..3 {
                a[i][i] *= 1.0 + lambda;
            }
            let Some(step) = solve3(a, jtr) else { break };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let c = ssr(&trial);
            if trial[2] != 0.0 && c.is_finite() && c < cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = c;
                lambda = (lambda / 3.0).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    p[2] = p[2].abs();

    let (jtj, _) = normal(&p);
    let dof = (pts.len() as f64 - 3.0).max(1.0);
    let sigma2 = cost / dof;
    let var_w = invert3(jtj).map_or(f64::INFINITY, |inv| sigma2 * inv[2][2]);
    let mean = pts.iter().map(|q| q.1).sum::<f64>() / pts.len() as f64;
    let ss_tot: f64 = pts.iter().map(|q| (q.1 - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - cost / ss_tot } else { 1.0 };
    let fwhm = 2.0 * p[2];
    let resolution_limited = fwhm < 10.0 * d_omega || points_above_half < 10;
    Ok(LinewidthEstimate {
        d_hat: fwhm,
        stderr: 2.0 * var_w.max(0.0).sqrt(),
        method: Method::LorentzianFit,
        r_squared: r2,
        window,
        unreliable: r2 < MIN_R_SQUARED,
        resolution_limited,
    })
}
