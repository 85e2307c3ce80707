//! Command runners behind the `analytic`, `validate`, `simulate`, `sweep`
//! and `replay` subcommands.
//!
//! Output schemas (all CSV with a header row, numbers with 9 significant
//! digits):
//!
//! * `analytic.csv` — `theta,phi,p,status,I0,N_a_ss,N_b_ss,D_ST,D_Ram,D_full_radps,D_full_hz,D_approx_radps,D_approx_hz`
//! * `regime.csv` — `link,left,right,ratio,pass,degenerate`
//! * `estimates.csv` — one row per trajectory, see [`ESTIMATE_COLUMNS`]
//! * `summary.csv` — `quantity,simulated,stderr,analytic,ratio`
//! * `trajectories/traj_NNNN.csv` — `time,re_alpha,im_alpha,photon_number,n_a,n_b`
//! * `fringe.csv` — one row per sweep point, see [`FRINGE_COLUMNS`]
//! * `config.toml` — echo of the resolved configuration
//! * `manifest.toml` — run record with output digests

use std::path::Path;

use rayon::prelude::*;

use super::config::{parse_config, RunConfig};
use super::output::{num, opt_num, unix_timestamp, OutputDir, RunManifest, Table, MANIFEST_FILE};
use crate::analytic;
use crate::error::{Error, Result};
use crate::model::{validate_regime, LaserConfig, RegimeReport};
use crate::sim::{run_trajectory, OperatingPoint, SimConfig, TrajectoryResult};
use crate::spectral::{
    default_lag_window, field_psd, lorentzian_fit, phase_diffusion_fit, remove_carrier, unwrap_phase,
    LinewidthEstimate,
};

/// Fraction of trajectories that must succeed for an ensemble result.
pub const MIN_SUCCESS_FRACTION: f64 = 0.8;

pub const ANALYTIC_COLUMNS: &[&str] = &[
    "theta",
    "phi",
    "p",
    "status",
    "I0",
    "N_a_ss",
    "N_b_ss",
    "D_ST",
    "D_Ram",
    "D_full_radps",
    "D_full_hz",
    "D_approx_radps",
    "D_approx_hz",
];

pub const REGIME_COLUMNS: &[&str] = &["link", "left", "right", "ratio", "pass", "degenerate"];

pub const ESTIMATE_COLUMNS: &[&str] = &[
    "index",
    "seed",
    "status",
    "mean_photon_number",
    "mean_n_a",
    "mean_n_b",
    "d_phase_radps",
    "d_phase_stderr",
    "d_phase_r_squared",
    "d_phase_unreliable",
    "d_lorentz_radps",
    "d_lorentz_stderr",
    "d_lorentz_resolution_limited",
    "d_analytic_radps",
    "ratio",
];

pub const SUMMARY_COLUMNS: &[&str] = &["quantity", "simulated", "stderr", "analytic", "ratio"];

pub const TRAJECTORY_COLUMNS: &[&str] = &["time", "re_alpha", "im_alpha", "photon_number", "n_a", "n_b"];

pub const FRINGE_COLUMNS: &[&str] = &[
    "index",
    "value",
    "theta",
    "phi",
    "p",
    "status",
    "d_full_radps",
    "d_full_hz",
    "d_approx_radps",
    "d_approx_hz",
    "d_full_operating_point_radps",
    "sim_n",
    "sim_d_radps",
    "sim_d_stderr",
    "sim_d_hz",
];

/// Maps an error onto the process exit code: 2 configuration, 3 numerical
/// abort, 4 statistical insufficiency.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter { .. } | Error::Config(_) | Error::Io { .. } => 2,
        Error::NumericalAbort { .. } | Error::AmplitudeCollapse { .. } => 3,
        Error::Insufficient(_) => 4,
    }
}

fn bool_str(b: bool) -> String {
    b.to_string()
}

fn finish(mut out: OutputDir, run: &RunConfig, command: &str, seeds: Vec<u64>) -> Result<RunManifest> {
    out.write("config.toml", &run.echo())?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        timestamp: unix_timestamp(),
        seeds,
        config: run.flat(),
        outputs: out.digests().to_vec(),
    };
    let path = out.path().join(MANIFEST_FILE);
    std::fs::write(&path, manifest.render()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn regime_table(report: &RegimeReport) -> Table {
    let mut t = Table::new(REGIME_COLUMNS);
    for l in &report.links {
        t.push(vec![
            l.name.to_string(),
            num(l.left),
            num(l.right),
            num(l.ratio),
            bool_str(l.pass),
            bool_str(l.degenerate),
        ]);
    }
    t
}

/// One row of `analytic.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticRow {
    pub theta: f64,
    pub phi: f64,
    pub p: f64,
    pub steady: Option<analytic::SteadyState>,
    pub linewidth: Option<analytic::LinewidthResult>,
    /// Approximate linewidth; defined on dark fringes too.
    pub d_approx: f64,
}

impl AnalyticRow {
    pub fn of(laser: &LaserConfig) -> Result<Self> {
        let steady = analytic::steady_state(laser)?.lasing();
        let linewidth = analytic::linewidth_full(laser)?.lasing();
        Ok(Self {
            theta: laser.geometry.theta(),
            phi: laser.geometry.phi(),
            p: laser.pump.p,
            steady,
            linewidth,
            d_approx: analytic::linewidth_approx(laser),
        })
    }

    pub fn is_dark(&self) -> bool {
        self.steady.is_none()
    }

    fn cells(&self) -> Vec<String> {
        let s = self.steady.as_ref();
        let l = self.linewidth.as_ref();
        vec![
            num(self.theta),
            num(self.phi),
            num(self.p),
            if self.is_dark() { "dark" } else { "lasing" }.into(),
            opt_num(s.map(|s| s.photon_number)),
            opt_num(s.map(|s| s.n_a)),
            opt_num(s.map(|s| s.n_b)),
            opt_num(l.map(|l| l.d_st)),
            opt_num(l.map(|l| l.d_ram)),
            opt_num(l.map(|l| l.d_full)),
            opt_num(l.map(|l| l.hz_full)),
            num(self.d_approx),
            num(crate::radps_to_hz(self.d_approx)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticReport {
    pub row: AnalyticRow,
    pub regime: RegimeReport,
    pub table: Table,
    pub manifest: RunManifest,
}

/// Closed-form steady state and linewidths of the configured laser.
pub fn cmd_analytic(run: &RunConfig, out_dir: &Path) -> Result<AnalyticReport> {
    let row = AnalyticRow::of(&run.laser)?;
    let regime = validate_regime(&run.laser, run.analysis.min_separation)?;
    let mut table = Table::new(ANALYTIC_COLUMNS);
    table.push(row.cells());
    let mut out = OutputDir::create(out_dir)?;
    out.write_table("analytic.csv", &table)?;
    out.write_table("regime.csv", &regime_table(&regime))?;
    let manifest = finish(out, run, "analytic", Vec::new())?;
    Ok(AnalyticReport {
        row,
        regime,
        table,
        manifest,
    })
}

/// Regime chain of the configured laser.
pub fn cmd_validate(run: &RunConfig) -> Result<RegimeReport> {
    run.laser.validate()?;
    validate_regime(&run.laser, run.analysis.min_separation)
}

/// Analytic reference for a simulation: the configuration evaluated at the
/// pulse area the simulated field settles to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationReference {
    pub operating_point: OperatingPoint,
    pub steady: analytic::SteadyState,
    pub d_full: f64,
}

impl SimulationReference {
    pub fn of(laser: &LaserConfig) -> Result<Self> {
        let op = OperatingPoint::of(laser).ok_or_else(|| {
            Error::Config("configuration is below the lasing threshold of the microscopic model".into())
        })?;
        let cfg = op.apply(laser);
        let below = || Error::Config("operating point is on a dark fringe".into());
        let steady = analytic::steady_state(&cfg)?.lasing().ok_or_else(below)?;
        let d_full = analytic::linewidth_full(&cfg)?.lasing().ok_or_else(below)?.d_full;
        Ok(Self {
            operating_point: op,
            steady,
            d_full,
        })
    }
}

/// Linewidth and population estimates of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEstimate {
    pub seed: u64,
    pub mean_photon_number: f64,
    pub mean_na: f64,
    pub mean_nb: f64,
    pub phase: LinewidthEstimate,
    /// Lorentzian fit, `None` if the spectrum could not be fitted.
    pub lorentz: Option<LinewidthEstimate>,
}

/// Lag window of the phase-diffusion fit for a recorded span.
pub fn lag_window(run: &RunConfig, span: f64, d_expected: f64) -> (f64, f64) {
    let (lo, hi) = default_lag_window(run.laser.cavity.kappa, span, d_expected);
    (run.analysis.lag_min.unwrap_or(lo), run.analysis.lag_max.unwrap_or(hi))
}

/// Both linewidth estimates of one trajectory.
pub fn estimate_trajectory(run: &RunConfig, traj: &TrajectoryResult, d_expected: f64) -> Result<TrajectoryEstimate> {
    let series = unwrap_phase(&traj.times, &traj.alphas)?;
    let phase = phase_diffusion_fit(&series, lag_window(run, series.duration(), d_expected))?;
    let lorentz = remove_carrier(&traj.times, &traj.alphas)
        .and_then(|(centred, _)| field_psd(&traj.times, &centred, run.analysis.psd_segments))
        .and_then(|spec| lorentzian_fit(&spec, None))
        .ok();
    Ok(TrajectoryEstimate {
        seed: traj.seed,
        mean_photon_number: traj.mean_photon_number(),
        mean_na: traj.mean_na(),
        mean_nb: traj.mean_nb(),
        phase,
        lorentz,
    })
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = crate::sum::sum(values) / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    (mean, (crate::sum::sum(&dev) / (n - 1.0) / n).sqrt())
}

/// Ensemble of simulated trajectories for one configuration.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub reference: SimulationReference,
    /// Per trajectory, in seed order: the estimate or the failure.
    pub estimates: Vec<std::result::Result<TrajectoryEstimate, String>>,
    /// Kept trajectories (only when requested).
    pub trajectories: Vec<Option<TrajectoryResult>>,
}

impl Ensemble {
    pub fn ok(&self) -> impl Iterator<Item = &TrajectoryEstimate> {
        self.estimates.iter().filter_map(|e| e.as_ref().ok())
    }

    pub fn n_ok(&self) -> usize {
        self.ok().count()
    }

    fn collect(&self, f: impl Fn(&TrajectoryEstimate) -> f64) -> Vec<f64> {
        self.ok().map(f).collect()
    }

    pub fn photon_number(&self) -> (f64, f64) {
        mean_stderr(&self.collect(|e| e.mean_photon_number))
    }

    pub fn n_a(&self) -> (f64, f64) {
        mean_stderr(&self.collect(|e| e.mean_na))
    }

    pub fn n_b(&self) -> (f64, f64) {
        mean_stderr(&self.collect(|e| e.mean_nb))
    }

    /// Ensemble phase-diffusion estimate.
    pub fn d_phase(&self) -> (f64, f64) {
        mean_stderr(&self.collect(|e| e.phase.d_hat))
    }

    /// Ensemble Lorentzian estimate over the trajectories that could be fitted.
    pub fn d_lorentz(&self) -> (f64, f64) {
        let v: Vec<f64> = self.ok().filter_map(|e| e.lorentz.map(|l| l.d_hat)).collect();
        mean_stderr(&v)
    }
}

/// Simulates `seeds.len()` trajectories of `laser` and estimates each.
///
/// Fails when fewer than [`MIN_SUCCESS_FRACTION`] of them succeed; the error
/// is then that of the first failure.
pub fn simulate_ensemble(run: &RunConfig, laser: &LaserConfig, seeds: &[u64], keep: bool) -> Result<Ensemble> {
    let reference = SimulationReference::of(laser)?;
    let base = run.sim_config(*laser, seeds.first().copied().unwrap_or(0))?;
    let outcomes = run_indexed(&base, seeds, |traj| {
        let est = estimate_trajectory(run, &traj, reference.d_full)?;
        Ok((est, keep.then_some(traj)))
    });
    let mut estimates = Vec::with_capacity(seeds.len());
    let mut trajectories = Vec::with_capacity(seeds.len());
    let mut first_error = None;
    for r in outcomes {
        match r {
            Ok((est, traj)) => {
                estimates.push(Ok(est));
                trajectories.push(traj);
            }
            Err(e) => {
                estimates.push(Err(e.to_string()));
                trajectories.push(None);
                first_error.get_or_insert(e);
            }
        }
    }
    let ensemble = Ensemble {
        reference,
        estimates,
        trajectories,
    };
    if (ensemble.n_ok() as f64) < MIN_SUCCESS_FRACTION * seeds.len() as f64 {
        return Err(first_error.unwrap_or_else(|| Error::Insufficient("no trajectories".into())));
    }
    Ok(ensemble)
}

/// Runs one trajectory per seed (seeds need not be contiguous); results are
/// in seed-list order whatever the completion order.
fn run_indexed<T, F>(base: &SimConfig, seeds: &[u64], f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(TrajectoryResult) -> Result<T> + Sync,
{
    seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = *base;
            cfg.seed = seed;
            run_trajectory(&cfg).and_then(&f)
        })
        .collect()
}

fn trajectory_table(traj: &TrajectoryResult) -> Table {
    let mut t = Table::new(TRAJECTORY_COLUMNS);
    for i in 0..traj.len() {
        t.push(vec![
            num(traj.times[i]),
            num(traj.alphas[i].re),
            num(traj.alphas[i].im),
            num(traj.photon_numbers[i]),
            num(traj.macro_na[i]),
            num(traj.macro_nb[i]),
        ]);
    }
    t
}

fn estimate_table(ens: &Ensemble, seeds: &[u64]) -> Table {
    let d = ens.reference.d_full;
    let mut t = Table::new(ESTIMATE_COLUMNS);
    for (i, (e, seed)) in ens.estimates.iter().zip(seeds).enumerate() {
        let row = match e {
            Ok(e) => {
                let l = e.lorentz.as_ref();
                vec![
                    i.to_string(),
                    seed.to_string(),
                    "ok".into(),
                    num(e.mean_photon_number),
                    num(e.mean_na),
                    num(e.mean_nb),
                    num(e.phase.d_hat),
                    num(e.phase.stderr),
                    num(e.phase.r_squared),
                    bool_str(e.phase.unreliable),
                    opt_num(l.map(|l| l.d_hat)),
                    opt_num(l.map(|l| l.stderr)),
                    l.map(|l| bool_str(l.resolution_limited)).unwrap_or_default(),
                    num(d),
                    num(e.phase.d_hat / d),
                ]
            }
            Err(msg) => {
                let mut row = vec![i.to_string(), seed.to_string(), format!("\"failed: {}\"", msg.replace('"', "'"))];
                row.extend(std::iter::repeat_n(String::new(), ESTIMATE_COLUMNS.len() - 4));
                row.push(num(d));
                row
            }
        };
        t.push(row);
    }
    t
}

fn summary_table(ens: &Ensemble) -> Table {
    let r = &ens.reference;
    let mut t = Table::new(SUMMARY_COLUMNS);
    let mut push = |name: &str, (m, se): (f64, f64), an: f64| {
        t.push(vec![name.into(), num(m), num(se), num(an), num(m / an)]);
    };
    push("photon_number", ens.photon_number(), r.steady.photon_number);
    push("n_a", ens.n_a(), r.steady.n_a);
    push("n_b", ens.n_b(), r.steady.n_b);
    push("d_phase_radps", ens.d_phase(), r.d_full);
    push("d_lorentz_radps", ens.d_lorentz(), r.d_full);
    t.push(vec![
        "trajectories_ok".into(),
        ens.n_ok().to_string(),
        String::new(),
        ens.estimates.len().to_string(),
        String::new(),
    ]);
    t
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub ensemble: Ensemble,
    pub seeds: Vec<u64>,
    pub manifest: RunManifest,
}

/// Ensemble simulation with per-trajectory records, estimates and summary.
pub fn cmd_simulate(run: &RunConfig, out_dir: &Path) -> Result<SimulateReport> {
    let seeds: Vec<u64> = (0..run.sim.trajectories as u64).map(|i| run.sim.seed + i).collect();
    let ensemble = simulate_ensemble(run, &run.laser, &seeds, run.sim.write_trajectories)?;
    let mut out = OutputDir::create(out_dir)?;
    if run.sim.write_trajectories {
        for (i, traj) in ensemble.trajectories.iter().enumerate() {
            if let Some(traj) = traj {
                out.write_table(&format!("trajectories/traj_{i:04}.csv"), &trajectory_table(traj))?;
            }
        }
    }
    out.write_table("estimates.csv", &estimate_table(&ensemble, &seeds))?;
    out.write_table("summary.csv", &summary_table(&ensemble))?;
    let manifest = finish(out, run, "simulate", seeds.clone())?;
    Ok(SimulateReport {
        ensemble,
        seeds,
        manifest,
    })
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub analytic: AnalyticRow,
    /// Full linewidth at the self-consistent operating point of the
    /// microscopic model, if it lases there.
    pub d_operating_point: Option<f64>,
    /// `(successful trajectories, mean D, stderr)` for simulated points.
    pub simulated: Option<(usize, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub table: Table,
    pub manifest: RunManifest,
}

/// `(max − min)/(max + min)` of simulated linewidths with its standard error.
pub fn fringe_visibility(rows: &[SweepRow]) -> Option<(f64, f64)> {
    let sims: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.simulated.map(|(_, m, se)| (m, se)))
        .filter(|(m, _)| m.is_finite())
        .collect();
    if sims.len() < 2 {
        return None;
    }
    let hi = sims.iter().copied().max_by(|a, b| a.0.total_cmp(&b.0))?;
    let lo = sims.iter().copied().min_by(|a, b| a.0.total_cmp(&b.0))?;
    let s = hi.0 + lo.0;
    let v = (hi.0 - lo.0) / s;
    let se = ((2.0 * lo.0 * hi.1).powi(2) + (2.0 * hi.0 * lo.1).powi(2)).sqrt() / (s * s);
    Some((v, se))
}

/// Linewidth along a one-parameter grid, analytic everywhere and simulated at
/// the requested indices.
pub fn cmd_sweep(run: &RunConfig, out_dir: &Path) -> Result<SweepReport> {
    let spec = run
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("`sweep` section missing: set sweep.parameter, start, stop, count".into()))?;
    let mut rows = Vec::with_capacity(spec.count);
    let mut seeds_used = Vec::new();
    for (k, value) in spec.grid().into_iter().enumerate() {
        let mut laser = run.laser;
        super::config::set_parameter(&mut laser, &spec.parameter, value)?;
        laser.validate()?;
        let analytic = AnalyticRow::of(&laser)?;
        let d_operating_point = SimulationReference::of(&laser).ok().map(|r| r.d_full);
        let simulated = if spec.simulate_indices.contains(&k) {
            let seeds: Vec<u64> = (0..spec.trajectories_per_point)
                .map(|i| spec.seed_for(run.sim.seed, k, i))
                .collect();
            seeds_used.extend(&seeds);
            // A point that cannot be simulated (below threshold, too many
            // aborted trajectories) is reported with no successful runs.
            match simulate_ensemble(run, &laser, &seeds, false) {
                Ok(ens) => {
                    let (m, se) = ens.d_phase();
                    Some((ens.n_ok(), m, se))
                }
                Err(e @ (Error::Io { .. } | Error::InvalidParameter { .. })) => return Err(e),
                Err(_) => Some((0, f64::NAN, f64::NAN)),
            }
        } else {
            None
        };
        rows.push(SweepRow {
            value,
            analytic,
            d_operating_point,
            simulated,
        });
    }
    let mut table = Table::new(FRINGE_COLUMNS);
    for (k, r) in rows.iter().enumerate() {
        let mut cells = vec![k.to_string(), num(r.value)];
        let a = r.analytic.cells();
        // theta, phi, p, status
        cells.extend_from_slice(&a[0..4]);
        cells.push(a[9].clone());
        cells.push(a[10].clone());
        cells.push(a[11].clone());
        cells.push(a[12].clone());
        cells.push(opt_num(r.d_operating_point));
        match r.simulated {
            Some((n, m, se)) => {
                cells.extend([n.to_string(), num(m), num(se), num(crate::radps_to_hz(m))]);
            }
            None => cells.extend(std::iter::repeat_n(String::new(), 4)),
        }
        table.push(cells);
    }
    let mut out = OutputDir::create(out_dir)?;
    out.write_table("fringe.csv", &table)?;
    let manifest = finish(out, run, "sweep", seeds_used)?;
    Ok(SweepReport { rows, table, manifest })
}

/// Outcome of repeating a recorded run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    /// `(file, recorded digest, new digest)`.
    pub files: Vec<(String, String, Option<String>)>,
}

impl ReplayReport {
    pub fn all_match(&self) -> bool {
        self.files.iter().all(|(_, a, b)| b.as_deref() == Some(a.as_str()))
    }
}

/// Re-runs the command recorded in a manifest into `out_dir` and compares
/// output digests.
pub fn cmd_replay(manifest_text: &str, out_dir: &Path) -> Result<ReplayReport> {
    let recorded = RunManifest::parse(manifest_text)?;
    let run = parse_config(&recorded.config_document())?;
    let fresh = match recorded.command.as_str() {
        "analytic" => cmd_analytic(&run, out_dir)?.manifest,
        "simulate" => cmd_simulate(&run, out_dir)?.manifest,
        "sweep" => cmd_sweep(&run, out_dir)?.manifest,
        other => return Err(Error::Config(format!("manifest: unknown command {other:?}"))),
    };
    let files = recorded
        .outputs
        .iter()
        .map(|(name, digest)| {
            let new = fresh.outputs.iter().find(|(n, _)| n == name).map(|(_, d)| d.clone());
            (name.clone(), digest.clone(), new)
        })
        .collect();
    Ok(ReplayReport { files })
}

/// Human-readable regime report.
pub fn render_regime(report: &RegimeReport) -> String {
    let mut s = String::new();
    for l in &report.links {
        let verdict = if l.degenerate {
            "skipped (degenerate)"
        } else if l.pass {
            "pass"
        } else {
            "FAIL"
        };
        s.push_str(&format!(
            "{:<20} {:>14} vs {:>14}  ratio {:>12}  {verdict}\n",
            l.name,
            num(l.left),
            num(l.right),
            num(l.ratio)
        ));
    }
    s.push_str(&format!(
        "regime chain (min separation {}): {}\n",
        report.min_separation,
        if report.pass { "satisfied" } else { "violated" }
    ));
    s
}
