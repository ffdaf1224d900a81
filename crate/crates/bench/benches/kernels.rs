use capeuler::energies::higher_energy;
use capeuler::wave::{init_state, step, GeometrySpec, ModeSpec};
use capeuler::{Shape, SimConfig, SpectralDomain, StarCurve};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use std::sync::Arc;

fn ellipse_domain(n_theta: usize, n_r: usize) -> SpectralDomain {
    SpectralDomain::new(Shape::Disk(StarCurve::ellipse(1.2, 1.0, n_theta).unwrap()), n_r).unwrap()
}

fn domain_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("domain_build");
    g.sample_size(10);
    for n in [32usize, 64] {
        let curve = StarCurve::ellipse(1.2, 1.0, n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| SpectralDomain::new(Shape::Disk(curve.clone()), n / 4).unwrap())
        });
    }
    g.finish();
}

fn boundary_solves(c: &mut Criterion) {
    let dom = ellipse_domain(64, 16);
    let data = dom.sample_boundary(|x, y| x * x * y - 0.3 * y + (2.0 * x).sin());
    c.bench_function("harmonic_extension_64", |b| b.iter(|| dom.harmonic_extension(black_box(&data)).unwrap()));
    c.bench_function("dirichlet_neumann_64", |b| b.iter(|| dom.dirichlet_neumann(black_box(&data)).unwrap()));
    // mean-free data for the inverse
    let dn = dom.dirichlet_neumann(&data).unwrap();
    c.bench_function("dn_inverse_64", |b| b.iter(|| dom.dn_inverse(black_box(&dn)).unwrap()));
}

fn drop_config() -> SimConfig {
    let mut cfg = SimConfig::new(GeometrySpec::circle(1.0), 0.5);
    cfg.n_theta = 32;
    cfg.n_r = 10;
    cfg.modes.push(ModeSpec { k: 3, amp: 1e-2, phi: 0.0, travelling: true, boundary: None });
    cfg
}

fn wave_step(c: &mut Criterion) {
    let cfg = drop_config();
    let state = init_state(&cfg).unwrap();
    let dt = cfg.resolve_dt(&state).unwrap();
    c.bench_function("rk4_step_32", |b| b.iter(|| step(black_box(&state), dt, cfg.n_r, &cfg.filter).unwrap()));
}

fn energy_report(c: &mut Criterion) {
    let cfg = drop_config();
    let state = init_state(&cfg).unwrap();
    let dom = Arc::new(state.domain(cfg.n_r).unwrap());
    let v = state.velocity(&dom).unwrap();
    let mut g = c.benchmark_group("energy");
    g.sample_size(10);
    g.bench_function("higher_energy_32", |b| b.iter(|| higher_energy(&dom, black_box(&v), cfg.eps).unwrap()));
    g.finish();
}

criterion_group!(benches, domain_build, boundary_solves, wave_step, energy_report);
criterion_main!(benches);
