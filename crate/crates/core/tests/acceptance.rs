//! Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

use capeuler::energies::{higher_energy, rt_margin};
use capeuler::exact::{annulus_integrate, closed_form_theta, closed_form_theta1, AnnulusODEState, Profile, RotatingDiskSolution};
use capeuler::geometry::{geometry, BoundaryScalar, StarCurve};
use capeuler::identities::{dn_square_identity, dn_sqrt_gap, product_rule};
use capeuler::kinematics::{check_formula, default_test_functions, ellipse_shear_family, FORMULAS};
use capeuler::wave::*;
use capeuler::{Error, SpectralDomain, VectorField2};
use std::io::Write;
use std::sync::{Arc, OnceLock};

fn report(n: u32, pass: bool, detail: String) {
    // written straight to stderr so the line survives output capture
    let _ = writeln!(std::io::stderr(), "acceptance criterion {n:>2}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
}

#[test]
fn criterion_01_operator_spectra() {
    let n = 256;
    let d = SpectralDomain::disk(StarCurve::circle(1.0, n).unwrap(), 48).unwrap();
    let geo = geometry(&StarCurve::circle(1.0, n).unwrap()).unwrap();
    let th = d.theta().to_vec();
    let (mut worst_n, mut worst_l) = (0.0f64, 0.0f64);
    for k in 1..=64usize {
        let c: Vec<f64> = th.iter().map(|t| (k as f64 * t).cos()).collect();
        let nf = d.dirichlet_neumann(&[BoundaryScalar::single(c.clone())]).unwrap();
        let lap = geo.laplacian(&c);
        let kf = k as f64;
        let en = nf[0].values.iter().zip(&c).map(|(a, b)| (a - kf * b).abs()).fold(0.0, f64::max) / kf;
        let el = lap.iter().zip(&c).map(|(a, b)| (a + kf * kf * b).abs()).fold(0.0, f64::max) / (kf * kf);
        worst_n = worst_n.max(en);
        worst_l = worst_l.max(el);
    }
    let pass = worst_n < 1e-8 && worst_l < 1e-8;
    report(1, pass, format!("max rel error N {worst_n:.2e}, surface Laplacian {worst_l:.2e} (k <= 64, N_theta 256)"));
    assert!(pass);
}

#[test]
fn criterion_02_boundary_identities() {
    let d = SpectralDomain::disk(StarCurve::ellipse(1.2, 1.0, 128).unwrap(), 32).unwrap();
    let f = d.sample_boundary(|x, y| (2.0 * x).sin() * y + x * x * x);
    let g = d.sample_boundary(|x, y| (x * y).cos() + y);
    let pr = product_rule(&d, &f, &g).unwrap();
    let dc = dn_square_identity(&d, &f).unwrap();
    let big = SpectralDomain::disk(StarCurve::ellipse(1.2, 1.0, 256).unwrap(), 32).unwrap();
    let rows = dn_sqrt_gap(&big, &[1, 2, 4, 8, 16, 32, 64]).unwrap();
    let bounded = rows.iter().all(|r| r.difference <= rows[0].difference);
    let growing = rows.windows(2).all(|w| w[1].dn_norm > 1.8 * w[0].dn_norm && w[1].sqrt_norm > 1.8 * w[0].sqrt_norm);
    // once the difference reaches round-off the ratio can only stagnate
    let floor = 1e-10;
    let monotone = rows.windows(2).all(|w| w[1].ratio < w[0].ratio || w[1].ratio < floor);
    let pass = pr.relative < 1e-6 && dc.relative < 1e-6 && bounded && growing && monotone;
    let ratios: Vec<String> = rows.iter().map(|r| format!("{:.1e}", r.ratio)).collect();
    report(
        2,
        pass,
        format!("product rule {:.2e}, dn_square_identity {:.2e}, sqrt gap ratios [{}]", pr.relative, dc.relative, ratios.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_03_formula_suite() {
    let fam = ellipse_shear_family(64, 16).unwrap();
    let (f, g) = default_test_functions();
    let mut lines = Vec::new();
    let mut pass = true;
    for id in FORMULAS {
        let c = check_formula(&fam, id, 1e-3, &f, &g).unwrap();
        let ok = c.passes(2.0 - 0.1, 1e-5);
        pass &= ok;
        lines.push(format!("{id} order {} rel {:.1e}", c.order.map_or("exact".into(), |p| format!("{p:.2}")), c.terminal_relative));
    }
    report(3, pass, lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_04_rotating_disk() {
    let sol = RotatingDiskSolution::new(Profile::Bump { lo: 0.3, hi: 0.7, amp: 1.0 }).unwrap();
    let r = sol.verify(16, 256).unwrap();
    let stationary = r.divergence < 1e-8 && r.vorticity_time_derivative < 1e-8 && r.boundary_residual < 1e-12;
    let pass = r.euler_residual < 1e-6 && stationary;
    report(
        4,
        pass,
        format!(
            "Euler residual {:.2e}, div {:.1e}, D_t omega {:.1e}, boundary pressure spread {:.1e}",
            r.euler_residual, r.divergence, r.vorticity_time_derivative, r.boundary_residual
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_annulus_ode() {
    let th = Profile::Gaussian { center: 1.5, width: 0.15, amp: 0.05 };
    let s = AnnulusODEState::new(1.0, 2.0, 0.5, &th, 0.0, 48).unwrap();
    let traj = annulus_integrate(&s, 0.5, 1e-3).unwrap();
    let fin = &traj.final_state;
    let cf = closed_form_theta1(&traj, &th).unwrap();
    let e_theta1 = fin.theta1.iter().zip(&cf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let e_big = fin
        .r0
        .iter()
        .zip(&fin.omega1)
        .map(|(r0, w)| {
            // ω₁(r₀) is the angular velocity Θ at the current radius of that particle
            let r = (r0 * r0 + 2.0 * fin.a).sqrt();
            (closed_form_theta(&th, fin.a, r) - w).abs()
        })
        .fold(0.0, f64::max);
    let vol0 = s.r2().powi(2) - s.r1().powi(2);
    let vol_drift = traj.samples.iter().map(|x| ((x.r2 * x.r2 - x.r1 * x.r1) - vol0).abs() / vol0).fold(0.0, f64::max);
    let rt_ok = traj.samples.iter().all(|x| x.rt.satisfied);
    let plain = AnnulusODEState::new(1.0, 2.0, 0.5, &Profile::Zero, 0.0, 8).unwrap();
    let ptraj = annulus_integrate(&plain, 0.5, 1e-3).unwrap();
    let e_exact = std::f64::consts::PI * 0.25 * 2f64.ln();
    let e_drift = ptraj.samples.iter().map(|x| (x.e0 - e_exact).abs() / e_exact).fold(0.0, f64::max);
    let pass = e_theta1 < 1e-8 && e_big < 1e-8 && vol_drift < 1e-12 && e_drift < 1e-10 && rt_ok;
    report(
        5,
        pass,
        format!(
            "theta1 {e_theta1:.1e}, Theta {e_big:.1e}, volume drift {vol_drift:.1e}, E0 drift {e_drift:.1e}, RT signs {}",
            if rt_ok { "hold" } else { "violated" }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_wave_solver_matches_annulus_ode() {
    let (a1, eps, t_end) = (0.5, 0.3, 0.5);
    let mut c = SimConfig::new(GeometrySpec::annulus(1.0, 2.0, a1), eps);
    c.n_theta = 32;
    c.n_r = 24;
    c.dt = Some(0.005);
    c.t_end = t_end;
    c.light_diagnostics = true;
    let ode = annulus_integrate(&AnnulusODEState::new(1.0, 2.0, a1, &Profile::Zero, eps, 8).unwrap(), t_end, 1e-4).unwrap();
    let mut worst = 0.0f64;
    let init = init_state(&c).unwrap();
    simulate_with(&c, init, |_, s, _| {
        let (r1, r2) = ode.radii_at(s.t);
        let rho = s.rho();
        for (&x, &y) in rho[0].iter().zip(rho[1]) {
            worst = worst.max((x - r2).abs()).max((y - r1).abs());
        }
        Ok(())
    })
    .unwrap();
    let pass = worst < 1e-6;
    report(6, pass, format!("max |r_wave - r_ode| over t in [0, 0.5]: {worst:.2e}"));
    assert!(pass);
}

/// Travelling mode-3 drop, ε = 0.5, ten periods; shared by criteria 7 and 10.
fn drop_run() -> &'static (DiagnosticsSeries, f64) {
    static RUN: OnceLock<(DiagnosticsSeries, f64)> = OnceLock::new();
    RUN.get_or_init(|| {
        let eps = 0.5;
        let mut c = SimConfig::new(GeometrySpec::circle(1.0), eps);
        c.n_theta = 64;
        c.n_r = 16;
        c.modes.push(ModeSpec { k: 3, amp: 1e-2, phi: 0.0, travelling: true, boundary: None });
        let om = eps * 24f64.sqrt();
        c.t_end = 10.0 * 2.0 * std::f64::consts::PI / om;
        c.output_every = 20;
        let (series, _) = simulate(&c).unwrap();
        // one step from the equilibrium circle
        let mut e = SimConfig::new(GeometrySpec::circle(1.0), eps);
        e.n_theta = 64;
        e.n_r = 16;
        let s = init_state(&e).unwrap();
        let n = step(&s, series.dt, e.n_r, &e.filter).unwrap();
        let fixed = s.rho()[0].iter().zip(n.rho()[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        (series, fixed)
    })
}

#[test]
fn criterion_07_conservation() {
    let (series, fixed) = drop_run();
    let pass = series.e0_drift < 1e-6 && series.area_drift < 1e-8 && *fixed < 1e-12;
    report(
        7,
        pass,
        format!(
            "E0 drift {:.2e}, area drift {:.2e}, equilibrium step {:.1e} ({} steps)",
            series.e0_drift, series.area_drift, fixed, series.steps
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_dispersion() {
    let eps = 0.5;
    let mut c = SimConfig::new(GeometrySpec::circle(1.0), eps);
    c.n_theta = 64;
    c.n_r = 16;
    let low: Vec<DispersionResult> =
        (2..=6).map(|k| dispersion_probe(k, 1e-3, eps, &c, 3.0).unwrap()).collect();
    let worst = low.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    c.n_theta = 128;
    let high: Vec<DispersionResult> = [4usize, 8, 16].iter().map(|&k| dispersion_probe(k, 1e-3, eps, &c, 3.0).unwrap()).collect();
    let slope = loglog_slope(&high);
    let pass = worst < 1e-2 && (1.45..=1.55).contains(&slope);
    report(8, pass, format!("max frequency error k=2..6 {worst:.2e}, log-log slope over k=4,8,16 {slope:.4}"));
    assert!(pass);
}

#[test]
fn criterion_09_linearized_order_gap() {
    let mut c = SimConfig::new(GeometrySpec::circle(1.0), 0.5);
    c.n_theta = 128;
    c.n_r = 24;
    let ratios: Vec<f64> = [4usize, 8, 16].iter().map(|&k| linearized_probe(&c, k, 1e-5, 1e-3).unwrap().ratio).collect();
    let pass = ratios.windows(2).all(|w| w[1] < w[0]);
    report(9, pass, format!("residual ratios k=4,8,16: {:.3e}, {:.3e}, {:.3e}", ratios[0], ratios[1], ratios[2]));
    assert!(pass);
}

fn bounded(rows: &[DiagnosticsRow]) -> (bool, f64, f64) {
    let r0 = &rows[0].report;
    let mut e_ratio: f64 = 0.0;
    let mut m_ratio: f64 = 0.0;
    for r in rows {
        let rep = &r.report;
        e_ratio = e_ratio.max(rep.script_e / r0.script_e);
        let pairs = [
            (rep.monitors.curvature, r0.monitors.curvature),
            (rep.monitors.velocity, r0.monitors.velocity),
            (rep.monitors.rt_curvature.unwrap_or(0.0), r0.monitors.rt_curvature.unwrap_or(f64::INFINITY)),
        ];
        for (a, b) in pairs {
            if b > 0.0 && b.is_finite() {
                m_ratio = m_ratio.max(a / b);
            }
        }
    }
    (e_ratio <= 10.0 && m_ratio <= 3.0, e_ratio, m_ratio)
}

#[test]
fn criterion_10_energy_boundedness() {
    let (series, _) = drop_run();
    let (ok_drop, ed, md) = bounded(&series.rows);
    let mut c = SimConfig::new(GeometrySpec::annulus(1.0, 2.0, 0.5), 0.2);
    c.n_theta = 64;
    c.n_r = 16;
    c.t_end = 0.25;
    c.output_every = 5;
    c.modes.push(ModeSpec { k: 3, amp: 1e-3, phi: 0.0, travelling: false, boundary: None });
    let (ann, _) = simulate(&c).unwrap();
    let (ok_ann, ea, ma) = bounded(&ann.rows);
    let rt_ok = ann.min_rt_margin > 0.0;
    let pass = ok_drop && ok_ann && rt_ok;
    report(
        10,
        pass,
        format!(
            "drop: max E ratio {ed:.3}, monitor ratio {md:.3}; annulus: E ratio {ea:.3}, monitor ratio {ma:.3}, min RT margin {:.2e}",
            ann.min_rt_margin
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_vanishing_surface_tension() {
    let mut c = SimConfig::new(GeometrySpec::annulus(1.0, 2.0, 0.5), 0.0);
    c.n_theta = 64;
    c.n_r = 16;
    c.t_end = 0.25;
    c.modes.push(ModeSpec { k: 3, amp: 1e-3, phi: 0.0, travelling: false, boundary: None });
    let r = eps_sweep(&c, &[0.4, 0.2, 0.1, 0.05]).unwrap();
    let d: Vec<String> = r.runs.iter().map(|x| format!("{:.3e}", x.distance)).collect();
    let pass = r.monotone && r.rt_ok;
    report(11, pass, format!("d(eps) for eps = 0.4, 0.2, 0.1, 0.05: [{}], min RT margin {:.2e}", d.join(", "), r.reference_min_rt_margin));
    assert!(pass);
}

#[test]
fn criterion_12_rt_failure_detection() {
    let om = 0.8;
    let d = Arc::new(SpectralDomain::disk(StarCurve::circle(1.0, 64).unwrap(), 24).unwrap());
    let v = VectorField2::sample(&d, |x, y| [-om * y, om * x]);
    let m = rt_margin(&d, &v).unwrap();
    let report_margin = higher_energy(&d, &v, 0.5).unwrap();
    let refused_direct = matches!(rt_precondition(&d, &v), Err(Error::RtViolation { .. }));
    // the irrotational drop at rest has margin 0 and is refused by the sweep itself
    let mut c = SimConfig::new(GeometrySpec::circle(1.0), 0.0);
    c.n_theta = 32;
    c.n_r = 12;
    c.t_end = 0.1;
    let refused_sweep = matches!(eps_sweep(&c, &[0.2, 0.1]), Err(Error::RtViolation { .. }));
    let pass = (m + om * om).abs() < 1e-8 && report_margin.rt_warning && refused_direct && refused_sweep;
    report(
        12,
        pass,
        format!("rigid rotation margin {m:.12} (expected {:.12}), precondition refuses: {refused_direct}, sweep refuses: {refused_sweep}", -om * om),
    );
    assert!(pass);
}
