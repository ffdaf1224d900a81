use capeuler::spectral::fourier;
use capeuler::wave::*;
use capeuler::WaveState;

fn drop(n: usize, eps: f64, amp: f64) -> SimConfig {
    let mut c = SimConfig::new(GeometrySpec::circle(1.0), eps);
    c.n_theta = n;
    c.n_r = 12;
    c.modes.push(ModeSpec { k: 3, amp, phi: 0.5 * amp, travelling: false, boundary: None });
    c
}

fn run(c: &SimConfig, dt: f64, t_end: f64) -> WaveState {
    let mut s = init_state(c).unwrap();
    let steps = (t_end / dt).round() as usize;
    for _ in 0..steps {
        s = step(&s, dt, c.n_r, &c.filter).unwrap();
    }
    s
}

fn distance(a: &WaveState, b: &WaveState) -> f64 {
    let r = a.rho()[0].iter().zip(b.rho()[0]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let p = a.phi[0].values.iter().zip(&b.phi[0].values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    r.max(p)
}

#[test]
fn rk4_converges_at_fourth_order() {
    let c = drop(32, 0.5, 2e-2);
    let period = 2.0 * std::f64::consts::PI / (0.5 * 24f64.sqrt());
    let base = period / 32.0;
    let reference = run(&c, base / 16.0, period);
    let e1 = distance(&run(&c, base, period), &reference);
    let e2 = distance(&run(&c, base / 2.0, period), &reference);
    let ratio = e1 / e2;
    assert!((8.0..=32.0).contains(&ratio), "error ratio {ratio} ({e1:e}, {e2:e})");
}

/// Boundary velocity, curvature and potential of a state, interpolated at angle `th`.
struct Probe {
    vx: Vec<num_complex::Complex64>,
    vy: Vec<num_complex::Complex64>,
    kappa: Vec<num_complex::Complex64>,
    rho: Vec<num_complex::Complex64>,
    phi: Vec<num_complex::Complex64>,
}

fn probe(s: &WaveState, n_r: usize) -> Probe {
    let dom = s.domain(n_r).unwrap();
    let v = &s.boundary_velocity(&dom).unwrap()[0];
    let f = fourier(s.n_theta());
    let vx: Vec<f64> = v.iter().map(|p| p[0]).collect();
    let vy: Vec<f64> = v.iter().map(|p| p[1]).collect();
    Probe {
        vx: f.forward(&vx),
        vy: f.forward(&vy),
        kappa: f.forward(&dom.boundaries[0].geo.kappa),
        rho: f.forward(s.rho()[0]),
        phi: f.forward(&s.phi[0].values),
    }
}

#[test]
fn fixed_angle_evolution_matches_marker_advection() {
    let eps = 0.5;
    let c = drop(64, eps, 5e-2);
    let n = c.n_theta;
    let f = fourier(n);
    let h = 0.01;
    let steps = 20;
    let mut s = init_state(&c).unwrap();
    let p0 = probe(&s, c.n_r);
    // markers start on a few boundary points, each carrying its potential value
    let mut markers: Vec<([f64; 2], f64)> = (0..n)
        .step_by(5)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            let r = f.eval(&p0.rho, th);
            ([r * th.cos(), r * th.sin()], f.eval(&p0.phi, th))
        })
        .collect();
    let rate = |p: &Probe, x: [f64; 2]| -> [f64; 3] {
        let th = x[1].atan2(x[0]);
        let (vx, vy) = (f.eval(&p.vx, th), f.eval(&p.vy, th));
        [vx, vy, 0.5 * (vx * vx + vy * vy) - eps * eps * f.eval(&p.kappa, th)]
    };
    for _ in 0..steps {
        let mid = step(&s, 0.5 * h, c.n_r, &c.filter).unwrap();
        let end = step(&mid, 0.5 * h, c.n_r, &c.filter).unwrap();
        let (pa, pb, pc) = (probe(&s, c.n_r), probe(&mid, c.n_r), probe(&end, c.n_r));
        for (x, phi) in markers.iter_mut() {
            let k1 = rate(&pa, *x);
            let k2 = rate(&pb, [x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
            let k3 = rate(&pb, [x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
            let k4 = rate(&pc, [x[0] + h * k3[0], x[1] + h * k3[1]]);
            for i in 0..2 {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            *phi += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]);
        }
        s = end;
    }
    let p = probe(&s, c.n_r);
    for (x, phi) in &markers {
        let th = x[1].atan2(x[0]);
        assert!((x[0].hypot(x[1]) - f.eval(&p.rho, th)).abs() < 1e-7, "marker left the boundary");
        assert!((phi - f.eval(&p.phi, th)).abs() < 1e-7, "potential mismatch {} {}", phi, f.eval(&p.phi, th));
    }
}

#[test]
fn annulus_conserves_energy_and_area() {
    let mut c = SimConfig::new(GeometrySpec::annulus(1.0, 2.0, 0.3), 0.3);
    c.n_theta = 32;
    c.n_r = 16;
    c.t_end = 0.3;
    c.light_diagnostics = true;
    c.modes.push(ModeSpec { k: 2, amp: 1e-2, phi: 0.0, travelling: false, boundary: Some("inner".into()) });
    let (series, _) = simulate(&c).unwrap();
    assert!(series.e0_drift < 1e-6, "{}", series.e0_drift);
    assert!(series.area_drift < 1e-8, "{}", series.area_drift);
}

#[test]
fn rejects_travelling_annulus_modes() {
    let mut c = SimConfig::new(GeometrySpec::annulus(1.0, 2.0, 0.0), 0.3);
    c.modes.push(ModeSpec { k: 2, amp: 1e-2, phi: 0.0, travelling: true, boundary: None });
    assert!(init_state(&c).is_err());
}
