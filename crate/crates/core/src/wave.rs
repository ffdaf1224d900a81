//! Irrotational free-boundary Euler flow with surface tension in boundary-potential form:
//! each boundary carries ρ(θ) and the potential trace φ(θ), advanced at fixed θ by RK4.

use crate::energies::{higher_energy, EnergyReport};
use crate::error::{Error, Result};
use crate::exact::AnnulusODEState;
use crate::fields::VectorField2;
use crate::geometry::{AnnulusShape, BoundaryScalar, BoundaryTag, StarCurve};
use crate::laplace::{Shape, SpectralDomain};
use crate::spectral::{fourier, theta_grid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

// ---- configuration ----------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Circle,
    Ellipse,
    Annulus,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub radius: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub inner: Option<f64>,
    pub outer: Option<f64>,
    /// Annulus only: initial radial flux a₁, Φ = a₁ log r.
    pub flux: Option<f64>,
}

impl GeometrySpec {
    pub fn circle(radius: f64) -> Self {
        GeometrySpec { kind: GeometryKind::Circle, radius: Some(radius), a: None, b: None, inner: None, outer: None, flux: None }
    }

    pub fn annulus(inner: f64, outer: f64, flux: f64) -> Self {
        GeometrySpec {
            kind: GeometryKind::Annulus,
            radius: None,
            a: None,
            b: None,
            inner: Some(inner),
            outer: Some(outer),
            flux: Some(flux),
        }
    }

    fn need(&self, v: Option<f64>, name: &str) -> Result<f64> {
        v.ok_or_else(|| Error::Config(format!("{:?} geometry requires `{name}`", self.kind).to_lowercase()))
    }

    fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("geometry `{name}` must be positive, got {v}")))
            }
        };
        match self.kind {
            GeometryKind::Circle => pos(self.radius.unwrap_or(1.0), "radius")?,
            GeometryKind::Ellipse => {
                pos(self.need(self.a, "a")?, "a")?;
                pos(self.need(self.b, "b")?, "b")?;
            }
            GeometryKind::Annulus => {
                let i = self.need(self.inner, "inner")?;
                let o = self.need(self.outer, "outer")?;
                pos(i, "inner")?;
                if o <= i {
                    return Err(Error::Config(format!("annulus needs outer > inner, got {o} <= {i}")));
                }
            }
        }
        Ok(())
    }
}

/// Initial perturbation of one Fourier mode.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: usize,
    /// Shape amplitude on cos kθ.
    #[serde(default)]
    pub amp: f64,
    /// Potential amplitude on sin kθ.
    #[serde(default)]
    pub phi: f64,
    /// Choose `phi` so that the linear mode travels instead of standing (drops only).
    #[serde(default)]
    pub travelling: bool,
    /// Annulus boundary carrying the mode ("outer" by default).
    #[serde(default)]
    pub boundary: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "yes")]
    pub dealias: bool,
    /// Exponential filter exp(−strength (|k|/k_max)^order) applied after each step; 0 disables.
    #[serde(default)]
    pub strength: f64,
    #[serde(default = "default_order")]
    pub order: i32,
}

fn yes() -> bool {
    true
}
fn default_order() -> i32 {
    16
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { dealias: true, strength: 0.0, order: 16 }
    }
}

fn default_n_theta() -> usize {
    256
}
fn default_n_r() -> usize {
    64
}
fn default_t_end() -> f64 {
    1.0
}
fn default_every() -> usize {
    10
}
fn default_cfl() -> f64 {
    0.5
}
fn default_alarm() -> f64 {
    1e-4
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub modes: Vec<ModeSpec>,
    pub eps: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    #[serde(default = "default_n_r")]
    pub n_r: usize,
    /// Steps between diagnostics rows.
    #[serde(default = "default_every")]
    pub output_every: usize,
    /// Steps between checkpoints (0 = only the final state).
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Relative E₀ drift that raises the alarm.
    #[serde(default = "default_alarm")]
    pub e0_alarm: f64,
    /// Skip the full energy report (E₀, area and κ are still recorded).
    #[serde(default)]
    pub light_diagnostics: bool,
}

impl SimConfig {
    pub fn new(geometry: GeometrySpec, eps: f64) -> Self {
        SimConfig {
            geometry,
            modes: Vec::new(),
            eps,
            dt: None,
            t_end: default_t_end(),
            n_theta: default_n_theta(),
            n_r: default_n_r(),
            output_every: default_every(),
            checkpoint_every: 0,
            filter: FilterConfig::default(),
            cfl: default_cfl(),
            e0_alarm: default_alarm(),
            light_diagnostics: false,
        }
    }

    /// Structural checks that do not need the initial state.
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(Error::Config(format!("eps must lie in [0, 1], got {}", self.eps)));
        }
        if self.n_theta < 8 || !self.n_theta.is_power_of_two() {
            return Err(Error::Config(format!("n_theta must be a power of two ≥ 8, got {}", self.n_theta)));
        }
        if self.n_r < 4 {
            return Err(Error::Config(format!("n_r must be at least 4, got {}", self.n_r)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::Config("t_end must be non-negative".into()));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::Config("cfl must be positive".into()));
        }
        for m in &self.modes {
            if m.k == 0 || m.k >= self.n_theta / 3 {
                return Err(Error::Config(format!("mode k = {} outside 1..{}", m.k, self.n_theta / 3)));
            }
            if let Some(b) = &m.boundary {
                if b != "inner" && b != "outer" {
                    return Err(Error::Config(format!("mode boundary must be inner or outer, got {b}")));
                }
            }
        }
        Ok(())
    }

    /// Validated time step: the configured one, or the stability bound when absent.
    pub fn resolve_dt(&self, state: &WaveState) -> Result<f64> {
        let bound = stability_bound(state, self.n_r, self.cfl)?;
        match self.dt {
            Some(dt) if dt > bound => Err(Error::Config(format!(
                "dt = {dt:e} exceeds the stability bound {bound:e} (c = {})",
                self.cfl
            ))),
            Some(dt) if !(dt > 0.0) => Err(Error::Config("dt must be positive".into())),
            Some(dt) => Ok(dt),
            None => Ok(bound),
        }
    }
}

// ---- state ---------------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub shape: Shape,
    /// Potential traces in the order of `shape.curves()` (outer first).
    pub phi: Vec<BoundaryScalar>,
    /// Net flux ∮_outer ∂_NΦ dS (annulus); zero for drops.
    pub flux: f64,
    pub t: f64,
    pub eps: f64,
}

impl WaveState {
    pub fn domain(&self, n_r: usize) -> Result<SpectralDomain> {
        SpectralDomain::new(self.shape.clone(), n_r)
    }

    pub fn rho(&self) -> Vec<&[f64]> {
        self.shape.curves().into_iter().map(|(_, c)| c.rho()).collect()
    }

    pub fn n_theta(&self) -> usize {
        self.shape.n_theta()
    }

    /// Boundary velocity v = (𝒩φ) N + (∂_sφ) T on each boundary.
    pub fn boundary_velocity(&self, dom: &SpectralDomain) -> Result<Vec<Vec<[f64; 2]>>> {
        let dn = dom.dirichlet_neumann(&self.phi)?;
        Ok(dom
            .boundaries
            .iter()
            .enumerate()
            .map(|(b, info)| {
                let g = &info.geo;
                let ps = g.d_ds(&self.phi[b].values);
                (0..dom.n_theta)
                    .map(|j| {
                        [
                            dn[b].values[j] * g.normal[j][0] + ps[j] * g.tangent[j][0],
                            dn[b].values[j] * g.normal[j][1] + ps[j] * g.tangent[j][1],
                        ]
                    })
                    .collect()
            })
            .collect())
    }

    /// Interior velocity ∇ℋφ.
    pub fn velocity(&self, dom: &SpectralDomain) -> Result<VectorField2> {
        let h = dom.harmonic_extension(&self.phi)?;
        Ok(VectorField2::gradient(dom, &h))
    }

    /// E₀ = ½∮φ 𝒩φ dS + ε² length.
    pub fn energy(&self, dom: &SpectralDomain) -> Result<f64> {
        let dn = dom.dirichlet_neumann(&self.phi)?;
        let prod: Vec<BoundaryScalar> = self.phi.iter().zip(&dn).map(|(a, b)| a.zip(b, |x, y| x * y)).collect();
        Ok(0.5 * dom.boundary_integral(&prod) + self.eps * self.eps * dom.perimeter())
    }

    pub fn area(&self) -> f64 {
        self.shape.area()
    }

    /// cos kθ coefficient of ρ on boundary b.
    pub fn mode_amplitude(&self, b: usize, k: usize) -> f64 {
        let curves = self.shape.curves();
        2.0 * curves[b].1.rho_modes()[k].re
    }

    fn with_fields(&self, rho: &[Vec<f64>], phi: &[Vec<f64>], t: f64) -> Result<WaveState> {
        for (b, r) in rho.iter().enumerate() {
            if r.iter().any(|x| !x.is_finite()) || phi[b].iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { t });
            }
            if r.iter().any(|&x| x <= 0.0) {
                return Err(Error::StarShapeViolation { t });
            }
        }
        let center = self.shape.center();
        let shape = match &self.shape {
            Shape::Disk(_) => Shape::Disk(StarCurve::from_rho(center, rho[0].clone()).map_err(|_| Error::StarShapeViolation { t })?),
            Shape::Annulus(_) => {
                let outer = StarCurve::from_rho(center, rho[0].clone()).map_err(|_| Error::StarShapeViolation { t })?;
                let inner = StarCurve::from_rho(center, rho[1].clone()).map_err(|_| Error::StarShapeViolation { t })?;
                Shape::Annulus(AnnulusShape::new(inner, outer).map_err(|_| Error::StarShapeViolation { t })?)
            }
        };
        let phi = self.phi.iter().zip(phi).map(|(p, v)| BoundaryScalar::new(p.tag, v.clone())).collect();
        Ok(WaveState { shape, phi, flux: self.flux, t, eps: self.eps })
    }
}

/// Build the initial state of a configuration.
pub fn init_state(cfg: &SimConfig) -> Result<WaveState> {
    cfg.validate()?;
    let n = cfg.n_theta;
    let th = theta_grid(n);
    let g = &cfg.geometry;
    let annulus = g.kind == GeometryKind::Annulus;
    let mut rho: Vec<Vec<f64>> = match g.kind {
        GeometryKind::Circle => vec![vec![g.radius.unwrap_or(1.0); n]],
        GeometryKind::Ellipse => vec![StarCurve::ellipse(g.a.unwrap(), g.b.unwrap(), n)?.rho().to_vec()],
        GeometryKind::Annulus => vec![vec![g.outer.unwrap(); n], vec![g.inner.unwrap(); n]],
    };
    let mut phi: Vec<Vec<f64>> = vec![vec![0.0; n]; rho.len()];
    if annulus {
        let a1 = g.flux.unwrap_or(0.0);
        phi[0].iter_mut().for_each(|p| *p = a1 * g.outer.unwrap().ln());
        phi[1].iter_mut().for_each(|p| *p = a1 * g.inner.unwrap().ln());
    }
    for m in &cfg.modes {
        let b = if annulus && m.boundary.as_deref() == Some("inner") { 1 } else { 0 };
        let big_r = rho[b].iter().sum::<f64>() / n as f64;
        let mut pa = m.phi;
        if m.travelling {
            if annulus {
                return Err(Error::Config("travelling modes are defined for drops only".into()));
            }
            let k = m.k as f64;
            let om = cfg.eps * (k * (k * k - 1.0) / big_r.powi(3)).sqrt();
            pa = big_r * m.amp * om / k;
        }
        for j in 0..n {
            let kt = m.k as f64 * th[j];
            rho[b][j] += m.amp * kt.cos();
            phi[b][j] += pa * kt.sin();
        }
    }
    let center = [0.0, 0.0];
    let shape = if annulus {
        Shape::Annulus(AnnulusShape::new(StarCurve::from_rho(center, rho[1].clone())?, StarCurve::from_rho(center, rho[0].clone())?)?)
    } else {
        Shape::Disk(StarCurve::from_rho(center, rho[0].clone())?)
    };
    let tags: Vec<BoundaryTag> = shape.curves().iter().map(|(t, _)| *t).collect();
    let phi = phi.into_iter().zip(tags).map(|(v, t)| BoundaryScalar::new(t, v)).collect();
    let mut s = WaveState { shape, phi, flux: 0.0, t: 0.0, eps: cfg.eps };
    s.flux = outer_flux(&s, &s.domain(cfg.n_r)?)?;
    Ok(s)
}

fn outer_flux(s: &WaveState, dom: &SpectralDomain) -> Result<f64> {
    if dom.is_disk() {
        return Ok(0.0);
    }
    let dn = dom.dirichlet_neumann(&s.phi)?;
    Ok(dom.boundaries[0].geo.integrate(&dn[0].values))
}

/// Explicit-RK4 time step limit: c Δs^{3/2}/ε (capillary) and c Δs/‖v‖ (advective).
pub fn stability_bound(state: &WaveState, n_r: usize, c: f64) -> Result<f64> {
    let dom = state.domain(n_r)?;
    let mut ds_min = f64::INFINITY;
    for b in &dom.boundaries {
        let h = 2.0 * PI / dom.n_theta as f64;
        ds_min = ds_min.min(b.geo.ds_dtheta.iter().cloned().fold(f64::INFINITY, f64::min) * h);
    }
    let vmax = state
        .boundary_velocity(&dom)?
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v[0].hypot(v[1])));
    let mut bound = f64::INFINITY;
    if state.eps > 0.0 {
        bound = c * ds_min.powf(1.5) / state.eps;
    }
    if vmax > 0.0 {
        bound = bound.min(c * ds_min / vmax);
    }
    if !bound.is_finite() {
        // static and tension-free: nothing moves; any step is stable
        bound = c * ds_min;
    }
    Ok(bound)
}

/// Time derivatives (ρ_t, φ_t) at fixed θ for every boundary.
pub fn rates(state: &WaveState, n_r: usize, dealias: bool) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let dom = state.domain(n_r)?;
    let vel = state.boundary_velocity(&dom)?;
    let n = dom.n_theta;
    let fr = fourier(n);
    let th = theta_grid(n);
    let e2 = state.eps * state.eps;
    let mut drho = Vec::new();
    let mut dphi = Vec::new();
    for (b, (_, curve)) in state.shape.curves().into_iter().enumerate() {
        let rho = curve.rho();
        let rt = fr.diff(rho, 1);
        let kappa = &dom.boundaries[b].geo.kappa;
        let mut dr = vec![0.0; n];
        let mut dp = vec![0.0; n];
        for j in 0..n {
            let (c, s) = (th[j].cos(), th[j].sin());
            let v = vel[b][j];
            let vr = v[0] * c + v[1] * s;
            let vt = -v[0] * s + v[1] * c;
            dr[j] = vr - rt[j] / rho[j] * vt;
            dp[j] = -0.5 * (v[0] * v[0] + v[1] * v[1]) - e2 * kappa[j] + dr[j] * vr;
        }
        if dealias {
            dr = fr.dealias(&dr);
            dp = fr.dealias(&dp);
        }
        drho.push(dr);
        dphi.push(dp);
    }
    Ok((drho, dphi))
}

/// One RK4 step of size dt (negative dt integrates backwards).
pub fn step(state: &WaveState, dt: f64, n_r: usize, filter: &FilterConfig) -> Result<WaveState> {
    let rho0: Vec<Vec<f64>> = state.rho().iter().map(|r| r.to_vec()).collect();
    let phi0: Vec<Vec<f64>> = state.phi.iter().map(|p| p.values.clone()).collect();
    let combine = |k: &(Vec<Vec<f64>>, Vec<Vec<f64>>), h: f64| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let r = rho0.iter().zip(&k.0).map(|(a, d)| a.iter().zip(d).map(|(x, y)| x + h * y).collect()).collect();
        let p = phi0.iter().zip(&k.1).map(|(a, d)| a.iter().zip(d).map(|(x, y)| x + h * y).collect()).collect();
        (r, p)
    };
    let t = state.t;
    let k1 = rates(state, n_r, filter.dealias)?;
    let (r, p) = combine(&k1, 0.5 * dt);
    let k2 = rates(&state.with_fields(&r, &p, t + 0.5 * dt)?, n_r, filter.dealias)?;
    let (r, p) = combine(&k2, 0.5 * dt);
    let k3 = rates(&state.with_fields(&r, &p, t + 0.5 * dt)?, n_r, filter.dealias)?;
    let (r, p) = combine(&k3, dt);
    let k4 = rates(&state.with_fields(&r, &p, t + dt)?, n_r, filter.dealias)?;
    let c = dt / 6.0;
    let fr = fourier(state.n_theta());
    let mut rho = rho0.clone();
    let mut phi = phi0.clone();
    for b in 0..rho.len() {
        for j in 0..rho[b].len() {
            rho[b][j] += c * (k1.0[b][j] + 2.0 * k2.0[b][j] + 2.0 * k3.0[b][j] + k4.0[b][j]);
            phi[b][j] += c * (k1.1[b][j] + 2.0 * k2.1[b][j] + 2.0 * k3.1[b][j] + k4.1[b][j]);
        }
        if filter.strength > 0.0 {
            rho[b] = fr.filter(&rho[b], filter.strength, filter.order);
            phi[b] = fr.filter(&phi[b], filter.strength, filter.order);
        }
    }
    let mut next = state.with_fields(&rho, &phi, t + dt)?;
    next.flux = outer_flux(&next, &next.domain(n_r)?)?;
    Ok(next)
}

// ---- simulation driver ---------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub report: EnergyReport,
    pub max_kappa: f64,
    pub area: f64,
    /// |ρ̂_k| of the first boundary for k ≤ 16.
    pub spectrum: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct DiagnosticsSeries {
    pub rows: Vec<DiagnosticsRow>,
    pub dt: f64,
    pub steps: usize,
    pub e0_drift: f64,
    pub area_drift: f64,
    pub alarm: bool,
    pub min_rt_margin: f64,
}

/// Diagnostics of one state.
pub fn diagnose(state: &WaveState, n_r: usize, light: bool) -> Result<DiagnosticsRow> {
    let dom = Arc::new(state.domain(n_r)?);
    let e0 = state.energy(&dom)?;
    let report = if light {
        EnergyReport { e0, ..Default::default() }
    } else {
        let v = state.velocity(&dom)?;
        let mut r = higher_energy(&dom, &v, state.eps)?;
        r.e0 = e0;
        r
    };
    let max_kappa = dom.boundaries.iter().flat_map(|b| b.geo.kappa.iter()).fold(0.0f64, |m, k| m.max(k.abs()));
    let modes = state.shape.curves()[0].1.rho_modes();
    let spectrum = (0..=16.min(modes.len() / 2)).map(|k| modes[k].norm()).collect();
    Ok(DiagnosticsRow { t: state.t, report, max_kappa, area: state.area(), spectrum })
}

/// Run a configuration; `observer` sees every state (step index, state) and may write checkpoints.
pub fn simulate_with(
    cfg: &SimConfig,
    init: WaveState,
    mut observer: impl FnMut(usize, &WaveState, Option<&DiagnosticsRow>) -> Result<()>,
) -> Result<(DiagnosticsSeries, WaveState)> {
    let dt0 = cfg.resolve_dt(&init)?;
    let steps = if cfg.t_end == 0.0 { 0 } else { (cfg.t_end / dt0).ceil() as usize };
    let dt = if steps > 0 { cfg.t_end / steps as f64 } else { dt0 };
    let every = cfg.output_every.max(1);
    let mut series = DiagnosticsSeries { dt, steps, min_rt_margin: f64::INFINITY, ..Default::default() };
    let mut s = init;
    let first = diagnose(&s, cfg.n_r, cfg.light_diagnostics)?;
    let (e00, a00) = (first.report.e0, first.area);
    observer(0, &s, Some(&first))?;
    series.min_rt_margin = first.report.rt_margin;
    series.rows.push(first);
    for i in 1..=steps {
        s = step(&s, dt, cfg.n_r, &cfg.filter)?;
        if i % every == 0 || i == steps {
            let row = diagnose(&s, cfg.n_r, cfg.light_diagnostics)?;
            series.e0_drift = series.e0_drift.max((row.report.e0 - e00).abs() / e00.abs().max(1e-300));
            series.area_drift = series.area_drift.max((row.area - a00).abs() / a00);
            series.min_rt_margin = series.min_rt_margin.min(row.report.rt_margin);
            if series.e0_drift > cfg.e0_alarm {
                series.alarm = true;
            }
            observer(i, &s, Some(&row))?;
            series.rows.push(row);
        } else {
            observer(i, &s, None)?;
        }
    }
    Ok((series, s))
}

pub fn simulate(cfg: &SimConfig) -> Result<(DiagnosticsSeries, WaveState)> {
    let init = init_state(cfg)?;
    simulate_with(cfg, init, |_, _, _| Ok(()))
}

// ---- dispersion ----------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DispersionResult {
    pub k: usize,
    pub eps: f64,
    pub frequency: f64,
    /// ε √(k(k²−1)/R³)
    pub predicted: f64,
    pub relative_error: f64,
    /// |ρ̂_{2k}| / |ρ̂_k| maximum over the run.
    pub harmonic_content: f64,
    pub nonlinear_flag: bool,
    /// No sign change of the mode coefficient observed.
    pub no_oscillation: bool,
}

/// Zero crossings of a sampled signal by cubic interpolation on the bracketing four samples.
fn zero_crossings(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..y.len().saturating_sub(1) {
        if y[i] == 0.0 || y[i].signum() != y[i + 1].signum() {
            if y[i] == 0.0 {
                out.push(t[i]);
                continue;
            }
            let lo = i.saturating_sub(1).min(y.len().saturating_sub(4));
            let xs = &t[lo..lo + 4];
            let ys = &y[lo..lo + 4];
            let p = |x: f64| -> f64 {
                (0..4)
                    .map(|a| {
                        let mut l = ys[a];
                        for b in 0..4 {
                            if a != b {
                                l *= (x - xs[b]) / (xs[a] - xs[b]);
                            }
                        }
                        l
                    })
                    .sum()
            };
            let (mut a, mut b) = (t[i], t[i + 1]);
            let mut fa = p(a);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let fm = p(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
    }
    out
}

/// Measure the oscillation frequency of a mode-k drop of radius R (from `cfg.geometry`).
pub fn dispersion_probe(k: usize, amplitude: f64, eps: f64, cfg: &SimConfig, periods: f64) -> Result<DispersionResult> {
    if amplitude.abs() > 1e-2 {
        return Err(Error::Config(format!("dispersion amplitude {amplitude} above the linear regime (1e-2)")));
    }
    let big_r = cfg.geometry.radius.unwrap_or(1.0);
    let kf = k as f64;
    let predicted = eps * (kf * (kf * kf - 1.0) / big_r.powi(3)).sqrt();
    let mut c = cfg.clone();
    c.eps = eps;
    c.modes = vec![ModeSpec { k, amp: amplitude, phi: 0.0, travelling: false, boundary: None }];
    let s0 = init_state(&c)?;
    let dt = c.resolve_dt(&s0)?;
    // period from the measured time scale when there is no restoring force
    let horizon = if predicted > 0.0 { periods * 2.0 * PI / predicted } else { c.t_end };
    let steps = (horizon / dt).ceil() as usize;
    let dt = horizon / steps as f64;
    let mut s = s0;
    let mut ts = vec![0.0];
    let mut ys = vec![s.mode_amplitude(0, k)];
    let mut harm: f64 = 0.0;
    for _ in 0..steps {
        s = step(&s, dt, c.n_r, &c.filter)?;
        ts.push(s.t);
        let a = s.mode_amplitude(0, k);
        ys.push(a);
        if 2 * k < c.n_theta / 2 {
            harm = harm.max(s.mode_amplitude(0, 2 * k).abs() / amplitude.abs());
        }
    }
    let z = zero_crossings(&ts, &ys);
    let (frequency, no_osc) = if z.len() >= 2 {
        let half = (z[z.len() - 1] - z[0]) / (z.len() - 1) as f64;
        (PI / half, false)
    } else {
        (0.0, true)
    };
    let rel = if predicted > 0.0 { (frequency - predicted).abs() / predicted } else { frequency };
    Ok(DispersionResult {
        k,
        eps,
        frequency,
        predicted,
        relative_error: rel,
        harmonic_content: harm,
        nonlinear_flag: harm > 0.05,
        no_oscillation: no_osc,
    })
}

/// Least-squares slope of log(frequency) against log(k).
pub fn loglog_slope(results: &[DispersionResult]) -> f64 {
    let pts: Vec<(f64, f64)> = results.iter().map(|r| ((r.k as f64).ln(), r.frequency.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

// ---- vanishing surface tension -------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRun {
    pub eps: f64,
    /// ‖ρ_ε(T) − ρ₀(T)‖_{L²(∂Ω)}, summed over boundaries.
    pub distance: f64,
    pub min_rt_margin: f64,
    /// A-shift predicted by the annulus ODE with the surface-tension term (unperturbed annuli).
    pub ode_distance: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    /// ‖ρ_{ε_i} − ρ_{ε_{i+1}}‖ for consecutive entries.
    pub cauchy: Vec<f64>,
    pub monotone: bool,
    pub rt_ok: bool,
    pub reference_min_rt_margin: f64,
}

fn run_fixed(cfg: &SimConfig, eps: f64, dt: f64) -> Result<(WaveState, f64)> {
    let mut c = cfg.clone();
    c.eps = eps;
    let mut s = init_state(&c)?;
    let steps = (c.t_end / dt).round().max(1.0) as usize;
    let h = c.t_end / steps as f64;
    let mut margin = rt_margin_state(&s, c.n_r)?;
    for _ in 0..steps {
        s = step(&s, h, c.n_r, &c.filter)?;
        margin = margin.min(rt_margin_state(&s, c.n_r)?);
    }
    Ok((s, margin))
}

/// RT margin −∇_N p_{v,v} minimised over the boundary.
pub fn rt_margin_state(s: &WaveState, n_r: usize) -> Result<f64> {
    let dom = s.domain(n_r)?;
    let v = s.velocity(&dom)?;
    crate::energies::rt_margin(&dom, &v)
}

fn boundary_distance(a: &WaveState, b: &WaveState, n_r: usize) -> Result<f64> {
    let dom = b.domain(n_r)?;
    let mut total = 0.0;
    for (i, ((_, ca), (_, cb))) in a.shape.curves().into_iter().zip(b.shape.curves()).enumerate() {
        let d: Vec<f64> = ca.rho().iter().zip(cb.rho()).map(|(x, y)| (x - y).powi(2)).collect();
        total += dom.boundaries[i].geo.integrate(&d);
    }
    Ok(total.sqrt())
}

/// Sweep precondition: the RT margin of (dom, v) must be strictly positive. Returns the margin.
pub fn rt_precondition(dom: &SpectralDomain, v: &VectorField2) -> Result<f64> {
    let m = crate::energies::rt_margin(dom, v)?;
    if !(m > 0.0) {
        return Err(Error::RtViolation { margin: m, t: 0.0 });
    }
    Ok(m)
}

/// Runs identical initial data for every ε and for ε = 0; refuses scenarios violating RT.
pub fn eps_sweep(cfg: &SimConfig, eps_list: &[f64]) -> Result<SweepReport> {
    let mut c0 = cfg.clone();
    c0.eps = 0.0;
    let s0 = init_state(&c0)?;
    let dom0 = s0.domain(cfg.n_r)?;
    rt_precondition(&dom0, &s0.velocity(&dom0)?)?;
    // one common step, stable for the stiffest run
    let mut dt = f64::INFINITY;
    for &e in eps_list.iter().chain(std::iter::once(&0.0)) {
        let mut c = cfg.clone();
        c.eps = e;
        let s = init_state(&c)?;
        dt = dt.min(c.resolve_dt(&s)?);
    }
    let all: Vec<f64> = std::iter::once(0.0).chain(eps_list.iter().cloned()).collect();
    let results: Vec<Result<(WaveState, f64)>> = all.par_iter().map(|&e| run_fixed(cfg, e, dt)).collect();
    let mut results: Vec<(WaveState, f64)> = results.into_iter().collect::<Result<_>>()?;
    let (reference, ref_margin) = results.remove(0);
    if !(ref_margin > 0.0) {
        return Err(Error::RtViolation { margin: ref_margin, t: reference.t });
    }
    let unperturbed = cfg.geometry.kind == GeometryKind::Annulus && cfg.modes.iter().all(|m| m.amp == 0.0 && m.phi == 0.0);
    let mut runs = Vec::new();
    for ((s, margin), &e) in results.iter().zip(eps_list) {
        let ode_distance = if unperturbed { Some(annulus_ode_shift(cfg, e)?) } else { None };
        runs.push(SweepRun { eps: e, distance: boundary_distance(s, &reference, cfg.n_r)?, min_rt_margin: *margin, ode_distance });
    }
    let mut cauchy = Vec::new();
    for w in results.windows(2) {
        cauchy.push(boundary_distance(&w[0].0, &w[1].0, cfg.n_r)?);
    }
    let monotone = runs.windows(2).all(|w| w[1].distance < w[0].distance);
    let rt_ok = runs.iter().all(|r| r.min_rt_margin > 0.0) && ref_margin > 0.0;
    Ok(SweepReport { runs, cauchy, monotone, rt_ok, reference_min_rt_margin: ref_margin })
}

/// Boundary L² distance between the ε and ε = 0 annulus ODE solutions at T.
pub fn annulus_ode_shift(cfg: &SimConfig, eps: f64) -> Result<f64> {
    let g = &cfg.geometry;
    let (r1, r2, a1) = (g.inner.unwrap(), g.outer.unwrap(), g.flux.unwrap_or(0.0));
    let z = crate::exact::Profile::Zero;
    let e = crate::exact::annulus_integrate(&AnnulusODEState::new(r1, r2, a1, &z, eps, 8)?, cfg.t_end, 1e-4)?;
    let o = crate::exact::annulus_integrate(&AnnulusODEState::new(r1, r2, a1, &z, 0.0, 8)?, cfg.t_end, 1e-4)?;
    let (fe, fo) = (&e.final_state, &o.final_state);
    // circles: ∮|Δρ|² dS = 2πr (Δr)²
    Ok((2.0 * PI * fo.r2() * (fe.r2() - fo.r2()).powi(2) + 2.0 * PI * fo.r1() * (fe.r1() - fo.r1()).powi(2)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drop_cfg(n: usize, eps: f64) -> SimConfig {
        let mut c = SimConfig::new(GeometrySpec::circle(1.0), eps);
        c.n_theta = n;
        c.n_r = 12;
        c
    }

    #[test]
    fn equilibrium_circle_is_fixed() {
        let c = drop_cfg(32, 0.5);
        let s = init_state(&c).unwrap();
        let dt = c.resolve_dt(&s).unwrap();
        let n = step(&s, dt, c.n_r, &c.filter).unwrap();
        for (a, b) in s.rho()[0].iter().zip(n.rho()[0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let shift = n.phi[0].values[0] - s.phi[0].values[0];
        assert!((shift + 0.25 * dt).abs() < 1e-12);
        assert!(n.phi[0].values.iter().all(|p| (p - n.phi[0].values[0]).abs() < 1e-12));
    }

    #[test]
    fn time_reversal() {
        let mut c = drop_cfg(32, 0.5);
        c.modes.push(ModeSpec { k: 3, amp: 1e-2, phi: 5e-3, travelling: false, boundary: None });
        let s = init_state(&c).unwrap();
        let dt = 1e-3;
        let f = step(&s, dt, c.n_r, &c.filter).unwrap();
        let b = step(&f, -dt, c.n_r, &c.filter).unwrap();
        for (x, y) in s.rho()[0].iter().zip(b.rho()[0]) {
            assert!((x - y).abs() < 1e-10);
        }
        for (x, y) in s.phi[0].values.iter().zip(&b.phi[0].values) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn config_rejects_large_dt() {
        let mut c = drop_cfg(32, 0.5);
        c.dt = Some(1.0);
        let s = init_state(&c).unwrap();
        let e = c.resolve_dt(&s).unwrap_err().to_string();
        assert!(e.contains("stability bound"), "{e}");
    }
}

/// Linearized residual of J on a travelling mode-k drop, sampled at −h, 0, h.
pub fn linearized_probe(cfg: &SimConfig, k: usize, amplitude: f64, h: f64) -> Result<crate::energies::LinearizedResidual> {
    use crate::energies::{linearized_residual, TrajectorySample};
    let mut c = cfg.clone();
    c.modes = vec![ModeSpec { k, amp: amplitude, phi: 0.0, travelling: true, boundary: None }];
    let s0 = init_state(&c)?;
    let sm = step(&s0, -h, c.n_r, &c.filter)?;
    let sp = step(&s0, h, c.n_r, &c.filter)?;
    let sample = |s: &WaveState| -> Result<TrajectorySample> {
        let dom = Arc::new(s.domain(c.n_r)?);
        let v = s.velocity(&dom)?;
        Ok(TrajectorySample { t: s.t, domain: dom, v })
    };
    let (a, b, d) = (sample(&sm)?, sample(&s0)?, sample(&sp)?);
    linearized_residual([&a, &b, &d], c.eps)
}
