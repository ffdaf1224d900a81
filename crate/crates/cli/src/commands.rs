use crate::checkpoint::{read_checkpoint, read_checkpoint_file, write_checkpoint};
use crate::config::{parse_config, prepare, Overrides, ParsedConfig};
use crate::error::CliError;
use crate::output::{config_hash, fmt17, write_table, RunManifest, TimeseriesWriter};
use crate::{Cli, Command};
use capeuler::exact::{annulus_integrate, AnnulusODEState, Profile};
use capeuler::geometry::geometry_tagged;
use capeuler::identities::{dn_square_identity, energy_identity, product_rule};
use capeuler::kinematics::{check_formula, default_test_functions, ellipse_shear_family, SpatialFn, FORMULAS};
use capeuler::wave::*;
use capeuler::SpectralDomain;
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Returns Ok(true) when every check passed.
pub fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    match &cli.command {
        Command::Geom => geom(cli),
        Command::OpsVerify { family } => ops_verify(cli, family),
        Command::Simulate { binary, resume } => simulate_cmd(cli, *binary, resume.as_deref()),
        Command::AnnulusOde { r1, r2, a1, t_end, swirl_amp, swirl_center, swirl_width, nodes } => {
            let profile = if *swirl_amp == 0.0 {
                Profile::Zero
            } else {
                Profile::Gaussian { center: *swirl_center, width: *swirl_width, amp: *swirl_amp }
            };
            annulus_ode(cli, *r1, *r2, *a1, *t_end, profile, *nodes)
        }
        Command::Dispersion { k, amp, periods } => dispersion(cli, k, *amp, *periods),
        Command::EpsSweep { eps_list } => sweep(cli, eps_list),
        Command::EnergyReport { checkpoint } => energy_report(cli, checkpoint.as_deref()),
        Command::CheckpointInfo { path } => checkpoint_info(path),
    }
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides { n_theta: cli.n_theta, n_r: cli.n_r, dt: cli.dt, eps: cli.eps }
}

fn out_dir(cli: &Cli) -> Result<PathBuf, CliError> {
    let d = cli.out.clone().unwrap_or_else(|| PathBuf::from("capeuler-out"));
    std::fs::create_dir_all(&d)?;
    Ok(d)
}

/// The configured run, or `default` when no --config is given.
fn load(cli: &Cli, default: Option<SimConfig>) -> Result<ParsedConfig, CliError> {
    match (&cli.config, default) {
        (Some(p), _) => parse_config(p, &overrides(cli)),
        (None, Some(d)) => prepare(d, "built-in scenario", &overrides(cli)),
        (None, None) => Err(CliError::Usage("this subcommand needs --config PATH".into())),
    }
}

fn say(cli: &Cli, line: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", line.as_ref());
    }
}

fn verdict(cli: &Cli, m: RunManifest, dir: &Path) -> Result<bool, CliError> {
    let (path, m) = m.finish(dir)?;
    for c in m.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: {}", c.name, c.detail);
    }
    let ok = m.all_pass();
    say(cli, format!("{} ({} checks) manifest {}", if ok { "PASS" } else { "FAIL" }, m.checks.len(), path.display()));
    if cli.quiet {
        println!("{}", if ok { "PASS" } else { "FAIL" });
    }
    Ok(ok)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_string_pretty(v)?)?;
    Ok(())
}

// ---- geom ------------------------------------------------------------------------------

#[derive(Serialize)]
struct BoundarySummary {
    tag: String,
    perimeter: f64,
    kappa_min: f64,
    kappa_max: f64,
    rho_min: f64,
    rho_max: f64,
    resolved: bool,
}

#[derive(Serialize)]
struct GeomSummary {
    n_theta: usize,
    area: f64,
    boundaries: Vec<BoundarySummary>,
}

fn geom(cli: &Cli) -> Result<bool, CliError> {
    let p = load(cli, Some(SimConfig::new(GeometrySpec::circle(1.0), 0.0)))?;
    let dir = out_dir(cli)?;
    let s = init_state(&p.config)?;
    let mut boundaries = Vec::new();
    for (tag, c) in s.shape.curves() {
        let g = geometry_tagged(c, tag)?;
        let (lo, hi) = g.kappa.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &k| (a.min(k), b.max(k)));
        boundaries.push(BoundarySummary {
            tag: format!("{tag:?}").to_lowercase(),
            perimeter: g.arclength,
            kappa_min: lo,
            kappa_max: hi,
            rho_min: c.min_rho(),
            rho_max: c.max_rho(),
            resolved: g.resolved,
        });
    }
    let summary = GeomSummary { n_theta: s.n_theta(), area: s.area(), boundaries };
    let mut m = RunManifest::start("geom", config_hash(&p.config));
    let path = dir.join("geom.json");
    write_json(&path, &summary)?;
    m.output(&path);
    say(cli, format!("area {}", fmt17(summary.area)));
    for b in &summary.boundaries {
        say(cli, format!("{:>6}: perimeter {:.12} kappa [{:.6}, {:.6}] resolved {}", b.tag, b.perimeter, b.kappa_min, b.kappa_max, b.resolved));
        m.check(&format!("resolved_{}", b.tag), b.resolved, format!("rho in [{}, {}]", b.rho_min, b.rho_max));
    }
    verdict(cli, m, &dir)
}

// ---- ops-verify ------------------------------------------------------------------------

fn random_cubic(rng: &mut rand_chacha::ChaCha8Rng) -> SpatialFn {
    let c: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Arc::new(move |x, y| {
        c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y + c[6] * x * x * x + c[7] * x * x * y
            + c[8] * x * y * y
            + c[9] * y * y * y
    })
}

fn ops_verify(cli: &Cli, family: &str) -> Result<bool, CliError> {
    if family != "ellipse-shear" {
        return Err(CliError::Usage(format!("unknown family `{family}` (available: ellipse-shear)")));
    }
    let dir = out_dir(cli)?;
    let dt = cli.dt.unwrap_or(1e-3);
    let (n_theta, n_r) = (cli.n_theta.unwrap_or(64), cli.n_r.unwrap_or(16));
    let (f, g) = match cli.seed {
        Some(s) => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s);
            (random_cubic(&mut rng), random_cubic(&mut rng))
        }
        None => default_test_functions(),
    };
    let fam = ellipse_shear_family(n_theta, n_r)?;
    let mut m = RunManifest::start("ops-verify", config_hash(&(family, dt, n_theta, n_r, cli.seed)));
    let mut rows = Vec::new();
    say(cli, format!("{:<28} {:>8} {:>12}", "check", "order", "rel. error"));
    for id in FORMULAS {
        let c = check_formula(&fam, id, dt, &f, &g)?;
        let pass = c.passes(1.9, 1e-5);
        let order = c.order.map_or("exact".to_string(), |p| format!("{p:.3}"));
        say(cli, format!("{id:<28} {order:>8} {:>12.3e}", c.terminal_relative));
        m.check(id, pass, format!("order {order}, relative error {:e}", c.terminal_relative));
        rows.push(vec![id.to_string(), order, fmt17(c.terminal_relative), pass.to_string()]);
    }
    let dom = SpectralDomain::disk(capeuler::StarCurve::ellipse(1.2, 1.0, n_theta)?, n_r.max(24))?;
    let fb = dom.sample_boundary(|x, y| f(x, y));
    let gb = dom.sample_boundary(|x, y| g(x, y));
    for (r, tol) in [(product_rule(&dom, &fb, &gb)?, 1e-6), (dn_square_identity(&dom, &fb)?, 1e-6), (energy_identity(&dom, &fb)?, 1e-8)] {
        let pass = r.relative < tol;
        say(cli, format!("{:<28} {:>8} {:>12.3e}", r.name, "-", r.relative));
        m.check(&r.name, pass, format!("relative residual {:e}", r.relative));
        rows.push(vec![r.name.clone(), String::new(), fmt17(r.relative), pass.to_string()]);
    }
    let path = dir.join("ops_verify.csv");
    write_table(&path, &["check", "order", "relative_error", "pass"], &rows)?;
    m.output(&path);
    verdict(cli, m, &dir)
}

// ---- simulate --------------------------------------------------------------------------

fn simulate_cmd(cli: &Cli, binary: bool, resume: Option<&Path>) -> Result<bool, CliError> {
    let p = load(cli, None)?;
    let dir = out_dir(cli)?;
    let mut cfg = p.config.clone();
    let init = match resume {
        Some(path) => {
            let s = read_checkpoint(path)?;
            if s.n_theta() != cfg.n_theta {
                return Err(CliError::Config(format!("checkpoint has n_theta {}, config {}", s.n_theta(), cfg.n_theta)));
            }
            cfg.t_end = (cfg.t_end - s.t).max(0.0);
            s
        }
        None => init_state(&cfg)?,
    };
    let mut m = RunManifest::start("simulate", config_hash(&cfg));
    let ts_path = dir.join("timeseries.csv");
    let mut ts = TimeseriesWriter::create(&ts_path)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let every = cfg.checkpoint_every;
    info!("simulate: dt {:e}, n_theta {}, n_r {}, t_end {}", p.dt, cfg.n_theta, cfg.n_r, cfg.t_end);
    let mut last_err: Option<CliError> = None;
    let result = simulate_with(&cfg, init, |i, s, row| {
        if let Some(r) = row {
            if let Err(e) = ts.row(r) {
                last_err = Some(e);
            }
        }
        if every > 0 && i > 0 && i % every == 0 {
            match write_checkpoint(&dir.join(format!("ckpt_{i:06}.json")), s, binary) {
                Ok(w) => written.extend(w),
                Err(e) => last_err = Some(e),
            }
        }
        Ok(())
    });
    if let Some(e) = last_err {
        return Err(e);
    }
    let (series, fin) = result?;
    ts.finish()?;
    m.output(&ts_path);
    written.extend(write_checkpoint(&dir.join("ckpt_final.json"), &fin, binary)?);
    for w in &written {
        m.output(w);
    }
    say(
        cli,
        format!(
            "{} steps, dt {:e}: E0 drift {:.3e}, area drift {:.3e}, min RT margin {:.3e}",
            series.steps, series.dt, series.e0_drift, series.area_drift, series.min_rt_margin
        ),
    );
    if series.min_rt_margin < 0.0 {
        warn!("RT margin became negative (min {:e}); E_RT may be negative", series.min_rt_margin);
    }
    m.check("e0_drift", !series.alarm, format!("relative drift {:e} (alarm at {:e})", series.e0_drift, cfg.e0_alarm));
    verdict(cli, m, &dir)
}

// ---- annulus-ode -----------------------------------------------------------------------

fn annulus_ode(cli: &Cli, r1: f64, r2: f64, a1: f64, t_end: f64, profile: Profile, nodes: usize) -> Result<bool, CliError> {
    let dir = out_dir(cli)?;
    let eps = cli.eps.unwrap_or(0.0);
    let dt = cli.dt.unwrap_or(1e-3);
    let s = AnnulusODEState::new(r1, r2, a1, &profile, eps, nodes).map_err(|e| CliError::Config(e.to_string()))?;
    let traj = annulus_integrate(&s, t_end, dt)?;
    let mut m = RunManifest::start("annulus-ode", config_hash(&(r1, r2, a1, t_end, &profile, eps, dt, nodes)));
    let rows: Vec<Vec<String>> = traj
        .samples
        .iter()
        .map(|x| {
            vec![
                fmt17(x.t),
                fmt17(x.r1),
                fmt17(x.r2),
                fmt17(x.a),
                fmt17(x.a1),
                fmt17(x.e0),
                fmt17(x.rt.pr_inner),
                fmt17(x.rt.pr_outer),
                x.rt.satisfied.to_string(),
            ]
        })
        .collect();
    let path = dir.join("annulus_ode.csv");
    write_table(&path, &["t", "r1", "r2", "A", "A_dot", "E0", "pr_inner", "pr_outer", "rt_satisfied"], &rows)?;
    m.output(&path);
    let e0 = traj.samples[0].e0;
    let drift = traj.samples.iter().map(|x| (x.e0 - e0).abs() / e0.abs().max(1e-300)).fold(0.0, f64::max);
    let v0 = r2 * r2 - r1 * r1;
    let vol = traj.samples.iter().map(|x| ((x.r2 * x.r2 - x.r1 * x.r1) - v0).abs() / v0).fold(0.0, f64::max);
    let fin = traj.samples.last().unwrap();
    say(cli, format!("t = {}: r1 = {:.12}, r2 = {:.12}, E0 drift {:.2e}, volume drift {:.2e}", fin.t, fin.r1, fin.r2, drift, vol));
    let rt_all = traj.samples.iter().all(|x| x.rt.satisfied);
    say(cli, format!("RT sign condition {}", if rt_all { "holds throughout" } else { "fails somewhere" }));
    m.check("energy_conserved", drift < 1e-8, format!("relative drift {drift:e}"));
    m.check("volume_conserved", vol < 1e-12, format!("relative drift {vol:e}"));
    verdict(cli, m, &dir)
}

// ---- dispersion ------------------------------------------------------------------------

fn dispersion(cli: &Cli, ks: &[usize], amp: f64, periods: f64) -> Result<bool, CliError> {
    let mut base = SimConfig::new(GeometrySpec::circle(1.0), 0.5);
    base.n_theta = 64;
    base.n_r = 16;
    let p = load(cli, Some(base))?;
    let dir = out_dir(cli)?;
    let cfg = p.config;
    let results: Vec<Result<DispersionResult, capeuler::Error>> =
        ks.par_iter().map(|&k| dispersion_probe(k, amp, cfg.eps, &cfg, periods)).collect();
    let results: Vec<DispersionResult> = results.into_iter().collect::<Result<_, _>>()?;
    let mut m = RunManifest::start("dispersion", config_hash(&(&cfg, ks, amp, periods)));
    let mut rows = Vec::new();
    say(cli, format!("{:>4} {:>14} {:>14} {:>10}", "k", "frequency", "predicted", "rel. err"));
    for r in &results {
        say(cli, format!("{:>4} {:>14.8} {:>14.8} {:>10.2e}", r.k, r.frequency, r.predicted, r.relative_error));
        m.check(&format!("frequency_k{}", r.k), r.relative_error < 1e-2 && !r.no_oscillation, format!("relative error {:e}", r.relative_error));
        if r.nonlinear_flag {
            warn!("k = {}: harmonic content {:.3} suggests nonlinear regime", r.k, r.harmonic_content);
        }
        rows.push(vec![r.k.to_string(), fmt17(r.frequency), fmt17(r.predicted), fmt17(r.relative_error), fmt17(r.harmonic_content)]);
    }
    if results.len() >= 2 {
        say(cli, format!("log-log slope {:.4}", loglog_slope(&results)));
    }
    let path = dir.join("dispersion.csv");
    write_table(&path, &["k", "frequency", "predicted", "relative_error", "harmonic_content"], &rows)?;
    m.output(&path);
    verdict(cli, m, &dir)
}

// ---- eps-sweep -------------------------------------------------------------------------

fn default_sweep_scenario() -> SimConfig {
    let mut c = SimConfig::new(GeometrySpec::annulus(1.0, 2.0, 0.5), 0.0);
    c.n_theta = 64;
    c.n_r = 16;
    c.t_end = 0.25;
    c.modes.push(ModeSpec { k: 3, amp: 1e-3, phi: 0.0, travelling: false, boundary: None });
    c
}

fn sweep(cli: &Cli, eps_list: &[f64]) -> Result<bool, CliError> {
    let p = load(cli, Some(default_sweep_scenario()))?;
    let dir = out_dir(cli)?;
    let mut m = RunManifest::start("eps-sweep", config_hash(&(&p.config, eps_list)));
    let report = match eps_sweep(&p.config, eps_list) {
        Ok(r) => r,
        Err(e @ capeuler::Error::RtViolation { .. }) => {
            eprintln!("sweep refused: {e}");
            m.check("rt_precondition", false, e.to_string());
            return verdict(cli, m, &dir);
        }
        Err(e) => return Err(e.into()),
    };
    say(cli, format!("{:>8} {:>14} {:>14}", "eps", "d(eps)", "min RT margin"));
    for r in &report.runs {
        say(cli, format!("{:>8} {:>14.6e} {:>14.6e}", r.eps, r.distance, r.min_rt_margin));
    }
    let path = dir.join("eps_sweep.json");
    write_json(&path, &report)?;
    m.output(&path);
    m.check("monotone", report.monotone, "d(eps) strictly decreasing along the list");
    m.check("rt_margin_positive", report.rt_ok, format!("reference min margin {:e}", report.reference_min_rt_margin));
    verdict(cli, m, &dir)
}

// ---- energy-report ---------------------------------------------------------------------

fn energy_report(cli: &Cli, ckpt: Option<&Path>) -> Result<bool, CliError> {
    let dir = out_dir(cli)?;
    let (state, n_r, hash) = match ckpt {
        Some(path) => {
            let s = read_checkpoint(path)?;
            let h = config_hash(&std::fs::read_to_string(path)?);
            (s, cli.n_r.unwrap_or(32), h)
        }
        None => {
            let p = load(cli, None)?;
            (init_state(&p.config)?, p.config.n_r, config_hash(&p.config))
        }
    };
    let row = diagnose(&state, n_r, false)?;
    let mut m = RunManifest::start("energy-report", hash);
    let path = dir.join("energy_report.json");
    write_json(&path, &row)?;
    m.output(&path);
    let e = &row.report;
    say(cli, format!("t {}: E0 {:.12e}, E {:.6e}, E_RT {:.6e}, rt_margin {:.6e}", row.t, e.e0, e.e_total, e.e_rt, e.rt_margin));
    say(cli, format!("monitors: curvature {:.4e}, velocity {:.4e}, rt {:?}", e.monitors.curvature, e.monitors.velocity, e.monitors.rt_curvature));
    if e.rt_warning {
        warn!("RT margin is negative; E_RT is reported but may be negative");
    }
    verdict(cli, m, &dir)
}

// ---- checkpoint-info -------------------------------------------------------------------

fn checkpoint_info(path: &Path) -> Result<bool, CliError> {
    let f = read_checkpoint_file(path)?;
    println!("format version {}", f.format_version);
    println!("t {}  eps {}  n_theta {}  flux {}", f.t, f.eps, f.n_theta, f.flux);
    for b in &f.boundaries {
        let (lo, hi) = b.rho.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), &x| (a.min(x), c.max(x)));
        println!("  {:>6}: rho in [{lo:.12}, {hi:.12}]", b.tag);
    }
    if let Some(p) = &f.payload {
        println!("binary payload {} ({} values)", p.file, p.count);
    }
    Ok(true)
}
