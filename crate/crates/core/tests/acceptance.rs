//! Acceptance checks. Every test prints one `criterion N: PASS|FAIL` line
//! (written past the test harness capture) and then asserts it.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use ramsey_laser::analytic::{
    linewidth_full, phase_noise_spectrum, phase_noise_spectrum_from_coefficients, ramsey_coefficients,
    steady_state, Outcome,
};
use ramsey_laser::bloch::ramsey_expectations;
use ramsey_laser::cli::{
    cmd_analytic, cmd_replay, cmd_simulate, cmd_sweep, fringe_visibility, parse_config, simulate_ensemble,
    Ensemble, RunConfig,
};
use ramsey_laser::model::{ca40_preset, validate_regime, LaserConfig};
use ramsey_laser::sim::{noise_lag_structure, run_trajectory, SimConfig, TrajectoryResult};

fn verdict(n: u32, pass: bool, detail: &str) {
    let line = format!(
        "criterion {n}: {} — {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {n}: {detail}");
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("acceptance-{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

// Scaled desk configuration shared by criteria 5, 6 and 8: 32 paired seeds
// per injection statistics, 2 ms recorded per trajectory.
const DESK_TRAJECTORIES: u64 = 32;
const DESK_RECORDED: f64 = 2e-3;

struct DeskRuns {
    run: RunConfig,
    regular: Ensemble,
    poisson: Ensemble,
    seconds: f64,
}

fn desk_run(recorded: f64) -> RunConfig {
    let mut run = RunConfig::from_preset("desk").unwrap();
    let laser = run.laser;
    run.sim.duration = SimConfig::new(laser, 1.0, 0).unwrap().warmup() + recorded;
    run.sim.write_trajectories = false;
    run
}

fn with_p(laser: &LaserConfig, p: f64) -> LaserConfig {
    let mut l = *laser;
    l.pump.p = p;
    l
}

fn desk_runs() -> &'static DeskRuns {
    static RUNS: OnceLock<DeskRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let t = Instant::now();
        let run = desk_run(DESK_RECORDED);
        let seeds: Vec<u64> = (1..=DESK_TRAJECTORIES).collect();
        let regular = simulate_ensemble(&run, &with_p(&run.laser, 1.0), &seeds, false).unwrap();
        let poisson = simulate_ensemble(&run, &with_p(&run.laser, 0.0), &seeds, true).unwrap();
        DeskRuns {
            run,
            regular,
            poisson,
            seconds: t.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn criterion_1_subnatural_headline() {
    let t = Instant::now();
    let run = parse_config("preset = \"ca40\"\n").unwrap();
    let rep = cmd_analytic(&run, &scratch("c1")).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let d = rep.row.d_approx;
    let hz = d / (2.0 * PI);
    let natural_hz = 320.0;
    let exact = (d - 0.2).abs() <= 1e-9 * 0.2;
    // The CSV carries the same value.
    let csv_ok = rep.table.rows()[0][11] == "2.00000000e-1";
    let pass = exact && csv_ok && hz < 1.0 && natural_hz / hz > 100.0 && secs < 1.0;
    verdict(
        1,
        pass,
        &format!(
            "D_approx = {d:.12} rad/s = {hz:.6} Hz (target 0.2 rad/s, rel. tol 1e-9); natural/D = {:.0}; {secs:.3} s",
            natural_hz / hz
        ),
    );
}

#[test]
fn criterion_2_closed_forms_match_propagator() {
    let t = Instant::now();
    let (nt, np) = (40, 25);
    let mut max_dev: f64 = 0.0;
    let mut max_flux: f64 = 0.0;
    for i in 0..nt {
        for j in 0..np {
            let theta = -2.0 * PI + 4.0 * PI * i as f64 / (nt - 1) as f64;
            let phi = -2.0 * PI + 4.0 * PI * j as f64 / (np - 1) as f64;
            let c = ramsey_coefficients(theta, phi);
            let o = ramsey_expectations(theta, phi);
            for k in 0..3 {
                max_dev = max_dev
                    .max((c.a[k] - o[k].sigma_a).abs())
                    .max((c.b[k] - o[k].sigma_b).abs())
                    .max((c.c[k] - o[k].coherence).norm());
            }
            let lhs = 1.0 - c.a[0] + c.a[1] - c.a[2];
            let rhs = c.b[0] - c.b[1] + c.b[2];
            max_flux = max_flux.max((lhs - rhs).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = max_dev < 1e-12 && max_flux < 1e-12 && secs < 5.0;
    verdict(
        2,
        pass,
        &format!(
            "{} grid points: max |closed form − propagator| = {max_dev:.2e}, flux identity residual = {max_flux:.2e} (tol 1e-12); {secs:.3} s",
            nt * np
        ),
    );
}

#[test]
fn criterion_3_full_linewidth_reduces_to_approximation() {
    let t = Instant::now();
    // Sweep at maximal photon number (θ = π/2, φ = 0, unit emission flux),
    // where the approximate form applies, over cavity, coupling, flux,
    // timing, dipole decay and pumping statistics. Each configuration obeys
    // κ/2 ≥ 100 γ_ab and D_ST/D_Ram ≤ 0.01.
    let mut worst: f64 = 0.0;
    let mut n = 0;
    let mut skipped = 0;
    for k in 0..100 {
        let u = |m: usize| ((k * m) % 97) as f64 / 96.0;
        let mut cfg = ca40_preset();
        cfg.cavity.kappa = 1e6 * 10f64.powf(2.0 * u(7));
        cfg.cavity.g = 1e2 * 10f64.powf(3.0 * u(11));
        cfg.pump.rate = 1e5 * 10f64.powf(3.0 * u(13));
        cfg.pump.p = u(17);
        cfg.geometry.tau = 1e-6 * 10f64.powf(u(19));
        cfg.geometry.t_drift = cfg.geometry.tau * (2.0 + 20.0 * u(23));
        cfg.geometry = cfg.geometry.with_theta(PI / 2.0).with_phi(0.0).unwrap();
        let gamma_max = (cfg.cavity.kappa / 200.0).min(0.01 / cfg.geometry.tau);
        cfg.atom.gamma_ab = gamma_max * (0.05 + 0.95 * u(29));
        let lw = match linewidth_full(&cfg).unwrap() {
            Outcome::Lasing(lw) => lw,
            Outcome::BelowThreshold { .. } => panic!("maximal photon number cannot be dark"),
        };
        if !(cfg.cavity.kappa / 2.0 >= 100.0 * cfg.atom.gamma_ab && lw.d_st / lw.d_ram <= 0.01) {
            skipped += 1;
            continue;
        }
        n += 1;
        worst = worst.max((lw.d_full - lw.d_approx).abs() / lw.d_approx);
    }
    // Away from maximal photon number the two forms separate; printed only.
    let mut off = ca40_preset();
    off.geometry = off.geometry.with_phi(PI / 2.0).unwrap();
    let lw = linewidth_full(&off).unwrap().lasing().unwrap();
    let flux = steady_state(&off).unwrap().lasing().unwrap().flux;
    let secs = t.elapsed().as_secs_f64();
    let pass = n >= 90 && worst < 0.02 && secs < 5.0;
    verdict(
        3,
        pass,
        &format!(
            "{n} configurations at maximal photon number ({skipped} outside the conditions): max |D_full − D_approx|/D_approx = {worst:.4} (tol 0.02); \
             for reference θ = φ = π/2 (emission flux {flux:.3}) gives D_full/D_approx = {:.3}; {secs:.3} s",
            lw.d_full / lw.d_approx
        ),
    );
}

#[test]
fn criterion_4_spectrum_low_frequency_limit_and_slope() {
    let t = Instant::now();
    let cfg = ca40_preset();
    let gamma = cfg.atom.gamma_ab;
    let d_full = linewidth_full(&cfg).unwrap().lasing().unwrap().d_full;
    let w0 = gamma / 100.0;
    let s0 = phase_noise_spectrum(&cfg, &[w0]).unwrap().lasing().unwrap().value[0];
    let gap = (w0 * w0 * s0 - d_full).abs() / d_full;
    let s0c = phase_noise_spectrum_from_coefficients(&cfg, &[w0]).unwrap().lasing().unwrap().value[0];
    let gap_c = (w0 * w0 * s0c - d_full).abs() / d_full;

    let (lo, hi) = (gamma, cfg.cavity.kappa / 20.0);
    let n = 200;
    let grid: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let spec = phase_noise_spectrum(&cfg, &grid).unwrap().lasing().unwrap();
    let x: Vec<f64> = grid.iter().map(|w| w.ln()).collect();
    let y: Vec<f64> = spec.value.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    let secs = t.elapsed().as_secs_f64();
    let pass = gap < 0.01 && gap_c < 0.01 && (slope + 2.0).abs() <= 0.02 && secs < 5.0;
    verdict(
        4,
        pass,
        &format!(
            "ω²S/D_full − 1 at γ_ab/100: {gap:.2e} (coefficient form {gap_c:.2e}, tol 1e-2); log-log slope on [γ_ab, κ/20] = {slope:.4} (target −2.00 ± 0.02); {secs:.3} s"
        ),
    );
}

fn within(sim: f64, an: f64, tol: f64) -> bool {
    (sim / an - 1.0).abs() <= tol
}

#[test]
fn criterion_5_simulated_steady_state() {
    let runs = desk_runs();
    let laser = runs.run.laser;
    let regime = validate_regime(&laser, 5.0).unwrap();
    let ss = steady_state(&laser).unwrap().lasing().unwrap();
    let ens = &runs.regular;
    let reference = ens.reference.steady;
    let (i, i_se) = ens.photon_number();
    let (na, _) = ens.n_a();
    let (nb, _) = ens.n_b();
    let preconditions = regime.pass && ss.photon_number >= 5.0 * (1.0 - 1e-12);
    let photons_ok = within(i, reference.photon_number, 0.15);
    let na_ok = within(na, reference.n_a, 0.15);
    let nb_ok = within(nb, reference.n_b, 0.15);
    let pass = preconditions && ens.n_ok() == 32 && photons_ok && na_ok && nb_ok && runs.seconds < 600.0;
    verdict(
        5,
        pass,
        &format!(
            "32 trajectories (p = 1): ⟨|α|²⟩ = {i:.3} ± {i_se:.3} vs {:.3} [{}]; N_a = {na:.1} vs {:.1} [{}]; N_b = {nb:.1} vs {:.1} [{}] (tol 15%); \
             simulated N_a + N_b = {:.1}, closed forms sum to Rτ = {:.1}; regime chain {}; ensembles {:.0} s",
            reference.photon_number,
            if photons_ok { "ok" } else { "off" },
            reference.n_a,
            if na_ok { "ok" } else { "off" },
            reference.n_b,
            if nb_ok { "ok" } else { "off" },
            na + nb,
            laser.pump.rate * laser.geometry.tau,
            if regime.pass { "satisfied" } else { "violated" },
            runs.seconds
        ),
    );
}

/// Phase-diffusion fit and Lorentzian fit on the same long trajectories.
struct MethodComparison {
    d_phase: (f64, f64),
    d_lorentz: (f64, f64),
    resolution_limited: usize,
    n: usize,
    seconds: f64,
}

fn method_comparison() -> &'static MethodComparison {
    static CMP: OnceLock<MethodComparison> = OnceLock::new();
    CMP.get_or_init(|| {
        let t = Instant::now();
        // Long enough that 8 periodogram segments resolve ~1e3 rad/s.
        let mut run = desk_run(40e-3);
        run.analysis.psd_segments = 8;
        let seeds: Vec<u64> = (101..105).collect();
        let ens = simulate_ensemble(&run, &run.laser, &seeds, false).unwrap();
        MethodComparison {
            d_phase: ens.d_phase(),
            d_lorentz: ens.d_lorentz(),
            resolution_limited: ens.ok().filter(|e| e.lorentz.is_none_or(|l| l.resolution_limited)).count(),
            n: ens.n_ok(),
            seconds: t.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn criterion_6_simulated_linewidth() {
    let runs = desk_runs();
    let (d1, se1) = runs.regular.d_phase();
    let (d0, se0) = runs.poisson.d_phase();
    let a1 = runs.regular.reference.d_full;
    let a0 = runs.poisson.reference.d_full;
    let r1 = d1 / a1;
    let r0 = d0 / a0;
    let factor_ok = (0.5..=2.0).contains(&r1) && (0.5..=2.0).contains(&r0);

    // Paired seeds: same spin seeds, different injection statistics.
    let diffs: Vec<f64> = runs
        .regular
        .estimates
        .iter()
        .zip(&runs.poisson.estimates)
        .filter_map(|(a, b)| Some(b.as_ref().ok()?.phase.d_hat - a.as_ref().ok()?.phase.d_hat))
        .collect();
    let (md, sd) = ramsey_laser::cli::commands::mean_stderr(&diffs);
    let z_order = md / sd;
    let order_ok = z_order >= 3.0;

    let cmp = method_comparison();
    let (dp, dps) = cmp.d_phase;
    let (dl, dls) = cmp.d_lorentz;
    let combined = (dps * dps + dls * dls).sqrt();
    let resolved = cmp.resolution_limited == 0;
    let methods_ok = resolved && (dp - dl).abs() <= 2.0 * combined;

    let secs = runs.seconds + cmp.seconds;
    let pass = factor_ok && order_ok && methods_ok && secs < 1800.0;
    verdict(
        6,
        pass,
        &format!(
            "phase-diffusion D̂/D_full: p=1 {d1:.0}±{se1:.0}/{a1:.0} = {r1:.3}, p=0 {d0:.0}±{se0:.0}/{a0:.0} = {r0:.3} (window [0.5, 2]: {}); \
             paired D̂(p=0) − D̂(p=1) = {md:.0} ± {sd:.0} (z = {z_order:.1}, need ≥ 3: {}); \
             methods on {} × 40 ms: phase fit {dp:.0} ± {dps:.0}, Lorentzian FWHM {dl:.0} ± {dls:.0}, {} of {} fits resolution-limited (agreement within 2σ of resolved fits: {}); {secs:.0} s",
            if factor_ok { "ok" } else { "off" },
            if order_ok { "ok" } else { "off" },
            cmp.n,
            cmp.resolution_limited,
            cmp.n,
            if methods_ok { "ok" } else { "off" },
        ),
    );
}

#[test]
fn criterion_7_fringe_sweep() {
    let t = Instant::now();
    let laser = desk_run(DESK_RECORDED).laser;
    let warmup = SimConfig::new(laser, 1.0, 0).unwrap().warmup();
    let doc = format!(
        "preset = \"desk\"\ngeometry.theta = {:?}\npump.p = 1.0\nsim.duration = {:?}\nsim.seed = 1000\n\
         sim.write_trajectories = false\nsweep.parameter = \"geometry.phi\"\nsweep.start = 0.0\n\
         sweep.stop = {:?}\nsweep.count = 41\nsweep.simulate_indices = [0, 3, 6, 34, 37, 40]\n\
         sweep.trajectories_per_point = 16\n",
        PI / 2.0,
        warmup + DESK_RECORDED,
        2.0 * PI
    );
    let run = parse_config(&doc).unwrap();
    let rep = cmd_sweep(&run, &scratch("c7")).unwrap();
    let approx: Vec<f64> = rep.rows.iter().map(|r| r.analytic.d_approx).collect();
    let min = approx.iter().copied().fold(f64::INFINITY, f64::min);
    let max = approx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let minima: Vec<f64> = rep
        .rows
        .iter()
        .filter(|r| (r.analytic.d_approx - min).abs() <= 1e-12 * min)
        .map(|r| r.value)
        .collect();
    let g = laser.cavity.g;
    let minima_ok = minima.len() == 2
        && (minima[0] - PI / 2.0).abs() < 1e-12
        && (minima[1] - 3.0 * PI / 2.0).abs() < 1e-12
        && (min - 2.0 * g * g / laser.cavity.kappa).abs() <= 1e-12 * min;
    let ratio = min / max;
    let ratio_ok = (ratio - 0.5).abs() <= 1e-12;
    let (v, se) = fringe_visibility(&rep.rows).unwrap();
    let sims: Vec<String> = rep
        .rows
        .iter()
        .filter_map(|r| r.simulated.map(|(n, m, s)| format!("φ={:.2}: {m:.0}±{s:.0} (n={n})", r.value)))
        .collect();
    let vis_ok = v / se >= 3.0;
    let secs = t.elapsed().as_secs_f64();
    let pass = minima_ok && ratio_ok && vis_ok && secs < 1800.0;
    verdict(
        7,
        pass,
        &format!(
            "analytic minima at φ = {minima:?} (expect π/2, 3π/2), min/max = {ratio:.12}; simulated [{}]; visibility {v:.3} ± {se:.3} (z = {:.1}, need ≥ 3); {secs:.0} s",
            sims.join(", "),
            v / se
        ),
    );
}

#[test]
fn criterion_8_noise_lag_structure() {
    let runs = desk_runs();
    let t = Instant::now();
    let trajs: Vec<TrajectoryResult> = runs
        .poisson
        .trajectories
        .iter()
        .map(|t| t.clone().expect("kept trajectory"))
        .collect();
    let ls = noise_lag_structure(&trajs, &runs.run.laser.geometry).unwrap();
    let zero = ls.peaks.iter().find(|p| p.lag == 0.0).unwrap();
    let largest = ls
        .peaks
        .iter()
        .filter(|p| p.lag != 0.0)
        .all(|p| p.amplitude.abs() < zero.amplitude.abs());
    let mut min_sep = f64::INFINITY;
    let mut parts = Vec::new();
    for p in ls.predicted() {
        let sep = ls
            .controls()
            .map(|c| (p.amplitude - c.amplitude).abs() / (p.stderr.powi(2) + c.stderr.powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        min_sep = min_sep.min(sep);
        parts.push(format!("{} {:+.3}±{:.3} ({sep:.0}σ)", p.label, p.amplitude, p.stderr));
    }
    let controls: Vec<String> = ls
        .controls()
        .map(|c| format!("{} {:+.4}±{:.4} (z {:.1})", c.label, c.amplitude, c.stderr, c.z))
        .collect();
    // Runtime: the shared 32-trajectory Poisson ensemble plus the analysis.
    let secs = runs.seconds / 2.0 + t.elapsed().as_secs_f64();
    let pass = ls.n_trajectories >= 32 && largest && min_sep >= 3.0 && secs < 900.0;
    verdict(
        8,
        pass,
        &format!(
            "{} Poisson trajectories: {}; controls {}; lag 0 largest: {largest}; weakest separation {min_sep:.1}σ (need ≥ 3); {secs:.0} s",
            ls.n_trajectories,
            parts.join(", "),
            controls.join(", ")
        ),
    );
}

#[test]
fn criterion_9_determinism_and_replay() {
    let t = Instant::now();
    let mut run = desk_run(0.3e-3);
    run.sim.trajectories = 2;
    run.sim.write_trajectories = true;

    let cfg = run.sim_config(run.laser, 7).unwrap();
    let a = run_trajectory(&cfg).unwrap();
    let b = run_trajectory(&cfg).unwrap();
    let bits = |r: &TrajectoryResult| -> Vec<u64> {
        r.alphas
            .iter()
            .flat_map(|c| [c.re.to_bits(), c.im.to_bits()])
            .chain(r.macro_na.iter().map(|x| x.to_bits()))
            .chain(r.macro_nb.iter().map(|x| x.to_bits()))
            .collect()
    };
    let traj_ok = bits(&a) == bits(&b) && !a.is_empty();

    let (d1, d2) = (scratch("c9-a"), scratch("c9-b"));
    let m1 = cmd_simulate(&run, &d1).unwrap().manifest;
    let m2 = cmd_simulate(&run, &d2).unwrap().manifest;
    let files_ok = m1.outputs.iter().all(|(name, _)| {
        std::fs::read(d1.join(name)).unwrap() == std::fs::read(d2.join(name)).unwrap()
    }) && m1.outputs == m2.outputs;

    let manifest_text = std::fs::read_to_string(d1.join("manifest.toml")).unwrap();
    let replay = cmd_replay(&manifest_text, &scratch("c9-replay")).unwrap();
    let replay_ok = replay.all_match() && replay.files.len() == m1.outputs.len();

    let analytic = parse_config("preset = \"ca40\"\n").unwrap();
    let ma = cmd_analytic(&analytic, &scratch("c9-an")).unwrap().manifest;
    let replay_an = cmd_replay(&ma.render(), &scratch("c9-an-replay")).unwrap();

    let secs = t.elapsed().as_secs_f64();
    let pass = traj_ok && files_ok && replay_ok && replay_an.all_match() && secs < 60.0;
    verdict(
        9,
        pass,
        &format!(
            "same seed bit-identical: {traj_ok}; {} output files byte-identical across runs: {files_ok}; \
             simulate manifest replay digests match: {replay_ok}; analytic manifest replay: {}; {secs:.1} s",
            m1.outputs.len(),
            replay_an.all_match()
        ),
    );
}
