//! Conserved and higher-order energies, Rayleigh–Taylor margin, monitor ratios and the
//! linearized residual diagnostic.

use crate::error::{Error, Result};
use crate::fields::{
    curvature, curvature_force_j, l2_norm_sq, normal_trace, op_a_trace, op_r0_trace_with, pressure_bilinear, rt_weight,
    vorticity, VectorField2,
};
use crate::geometry::BoundaryScalar;
use crate::kinematics::FlowSnapshot;
use crate::laplace::{InteriorField, SpectralDomain};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Monitor ratios of the a priori energy bounds.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct MonitorRatios {
    /// ε²‖κ‖²_{H²(∂Ω)} / (3E + ε²)
    pub curvature: f64,
    /// ‖v‖²_{H³(Ω)} / (E + E₀ + 1)
    pub velocity: f64,
    /// ‖κ‖²_{H¹(∂Ω)} / (E_RT + 1), present only when the RT margin is positive.
    pub rt_curvature: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct EnergyReport {
    pub e0: f64,
    pub e_dtj: f64,
    pub e_eps: f64,
    pub e_vort: f64,
    pub e_total: f64,
    pub e_rt: f64,
    pub script_e: f64,
    pub rt_margin: f64,
    pub monitors: MonitorRatios,
    /// Set when the RT margin is negative (E_RT may then be negative).
    pub rt_warning: bool,
}

/// E₀ = ½∫|v|² dx + ε² · length(∂Ω).
pub fn conserved_energy(dom: &SpectralDomain, v: &VectorField2, eps: f64) -> f64 {
    0.5 * l2_norm_sq(dom, v) + eps * eps * dom.perimeter()
}

/// Σ_{l ≤ k} ∫ |D^l u|² dx with D^l the full tensor of l-th partial derivatives.
pub fn interior_sobolev_sq(dom: &SpectralDomain, u: &InteriorField, k: usize) -> f64 {
    let mut level = vec![u.clone()];
    let mut total = 0.0;
    for l in 0..=k {
        total += level.iter().map(|f| dom.inner_product(f, f)).sum::<f64>();
        if l < k {
            level = level.iter().flat_map(|f| dom.gradient(f)).collect();
        }
    }
    total
}

/// Σ over boundaries of the spectral H^r norm squared.
pub fn boundary_sobolev_sq(dom: &SpectralDomain, f: &[BoundaryScalar], r: f64) -> f64 {
    dom.surface_spectra().iter().zip(f).map(|(sp, b)| sp.norm_sq(&b.values, r)).sum()
}

/// min over ∂Ω of −∇_N p_{v,v}.
pub fn rt_margin(dom: &SpectralDomain, v: &VectorField2) -> Result<f64> {
    let w = rt_weight(dom, v)?;
    Ok(w.iter().flat_map(|b| b.values.iter().cloned()).fold(f64::INFINITY, f64::min))
}

/// ∮ Σ_b f_b g_b dS.
fn boundary_pairing(dom: &SpectralDomain, f: &[BoundaryScalar], g: &[BoundaryScalar]) -> f64 {
    let prod: Vec<BoundaryScalar> = f.iter().zip(g).map(|(a, b)| a.zip(b, |x, y| x * y)).collect();
    dom.boundary_integral(&prod)
}

/// J⊥ = 𝒩κ.
pub fn j_normal(dom: &SpectralDomain) -> Result<Vec<BoundaryScalar>> {
    dom.dirichlet_neumann(&curvature(dom))
}

/// E_RT evaluated through the quadratic form of ℛ₀: ½∫ ℛ₀(v)J · J dx = ½∮ (ℛ₀J)⊥ κ dS.
pub fn e_rt_via_r0(dom: &SpectralDomain, v: &VectorField2) -> Result<f64> {
    let jn = j_normal(dom)?;
    let w = rt_weight(dom, v)?;
    let r0 = op_r0_trace_with(dom, &w, &jn)?;
    // ∫ ∇ℋ(a J⊥)·∇κ_ℋ = ∮ (a J⊥) 𝒩κ dS; equivalently ∮ 𝒩(aJ⊥) κ dS
    Ok(0.5 * boundary_pairing(dom, &r0, &curvature(dom)))
}

pub fn higher_energy(dom: &Arc<SpectralDomain>, v: &VectorField2, eps: f64) -> Result<EnergyReport> {
    let d = &**dom;
    let e0 = conserved_energy(d, v, eps);
    let snap = FlowSnapshot::new(dom.clone(), v.clone()).with_eps(eps);
    let cdj = snap.covariant_dt_j()?;
    let e_dtj = 0.5 * l2_norm_sq(d, &cdj);
    let jn = j_normal(d)?;
    let ds: Vec<BoundaryScalar> = crate::fields::d_ds_all(d, &jn);
    let e_eps = 0.5 * eps * eps * boundary_pairing(d, &ds, &ds);
    let w = vorticity(d, v)?;
    let e_vort = interior_sobolev_sq(d, &w, 2);
    let a = rt_weight(d, v)?;
    let jn2: Vec<BoundaryScalar> = jn.iter().map(|b| b.map(|x| x * x)).collect();
    let e_rt = 0.5 * boundary_pairing(d, &a, &jn2);
    let margin = a.iter().flat_map(|b| b.values.iter().cloned()).fold(f64::INFINITY, f64::min);
    let e_total = e_dtj + e_eps + e_vort;
    let mut report = EnergyReport {
        e0,
        e_dtj,
        e_eps,
        e_vort,
        e_total,
        e_rt,
        script_e: e_total + e_rt,
        rt_margin: margin,
        monitors: MonitorRatios::default(),
        rt_warning: margin < 0.0,
    };
    report.monitors = energy_monitors(&report, d, v, eps);
    Ok(report)
}

pub fn energy_monitors(report: &EnergyReport, dom: &SpectralDomain, v: &VectorField2, eps: f64) -> MonitorRatios {
    let k = curvature(dom);
    let e2 = eps * eps;
    let curv = if e2 > 0.0 { e2 * boundary_sobolev_sq(dom, &k, 2.0) / (3.0 * report.e_total + e2) } else { 0.0 };
    let vel = (interior_sobolev_sq(dom, &v.x, 3) + interior_sobolev_sq(dom, &v.y, 3)) / (report.e_total + report.e0 + 1.0);
    let rt = if report.rt_margin > 0.0 { Some(boundary_sobolev_sq(dom, &k, 1.0) / (report.e_rt + 1.0)) } else { None };
    MonitorRatios { curvature: curv, velocity: vel, rt_curvature: rt }
}

/// One instant of an Euler trajectory.
#[derive(Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub domain: Arc<SpectralDomain>,
    pub v: VectorField2,
}

#[derive(Clone, Debug)]
pub struct LinearizedResidual {
    /// ‖(𝒟_t²J + ℛ₀(v)J + ε²𝒜J)⊥‖_{L²(∂Ω)}
    pub residual: f64,
    /// ‖(ε²𝒜J)⊥‖_{L²(∂Ω)}
    pub leading: f64,
    pub ratio: f64,
}

/// Euler acceleration D_t v = −∇p_{v,v} − ε²J.
pub fn euler_acceleration(dom: &SpectralDomain, v: &VectorField2, eps: f64) -> Result<VectorField2> {
    let p = pressure_bilinear(dom, v, v)?;
    let j = curvature_force_j(dom)?;
    Ok(VectorField2::gradient(dom, &p).add(&j.scale(eps * eps)).scale(-1.0))
}

/// Residual of the linearized equation for J along a trajectory, with 𝒟_t²J from a centered
/// difference of 𝒟_tJ along particle paths.
pub fn linearized_residual(samples: [&TrajectorySample; 3], eps: f64) -> Result<LinearizedResidual> {
    let [m, c, p] = samples;
    let dt = 0.5 * (p.t - m.t);
    if !(dt > 0.0) || ((c.t - m.t) - (p.t - c.t)).abs() > 1e-9 * dt.max(1e-300) {
        return Err(Error::Invalid("linearized_residual needs three equally spaced samples".into()));
    }
    let dom = &*c.domain;
    let cov = |s: &TrajectorySample| FlowSnapshot::new(s.domain.clone(), s.v.clone()).covariant_dt_j();
    let wm = cov(m)?;
    let wp = cov(p)?;
    let w0 = cov(c)?;
    // particle positions at t ± dt to third order: x ± dt v + dt²/2 D_t v
    let acc = euler_acceleration(dom, &c.v, eps)?;
    let pts = dom.points();
    let shifted = |sgn: f64| -> Vec<[f64; 2]> {
        pts.iter()
            .enumerate()
            .map(|(i, x)| {
                let (v, a) = (c.v.at(i), acc.at(i));
                [x[0] + sgn * dt * v[0] + 0.5 * dt * dt * a[0], x[1] + sgn * dt * v[1] + 0.5 * dt * dt * a[1]]
            })
            .collect()
    };
    let (xp, xm) = (shifted(1.0), shifted(-1.0));
    let interp = |s: &TrajectorySample, w: &VectorField2, x: &[[f64; 2]]| -> Result<[Vec<f64>; 2]> {
        Ok([s.domain.interpolate(&w.x, x)?, s.domain.interpolate(&w.y, x)?])
    };
    let ap = interp(p, &wp, &xp)?;
    let am = interp(m, &wm, &xm)?;
    let ddx: Vec<f64> = ap[0].iter().zip(&am[0]).map(|(a, b)| (a - b) / (2.0 * dt)).collect();
    let ddy: Vec<f64> = ap[1].iter().zip(&am[1]).map(|(a, b)| (a - b) / (2.0 * dt)).collect();
    let dtw = VectorField2::new(dom.field(ddx), dom.field(ddy));
    let corr = pressure_bilinear(dom, &c.v, &w0)?;
    let dd = dtw.add(&VectorField2::gradient(dom, &corr));
    let dd_perp = normal_trace(dom, &dd);
    let jn = j_normal(dom)?;
    let weight = rt_weight(dom, &c.v)?;
    let r0 = op_r0_trace_with(dom, &weight, &jn)?;
    let a = op_a_trace(dom, &jn)?;
    let e2 = eps * eps;
    let res: Vec<BoundaryScalar> = (0..dd_perp.len())
        .map(|b| {
            let vals = (0..dom.n_theta)
                .map(|j| dd_perp[b].values[j] + r0[b].values[j] + e2 * a[b].values[j])
                .collect();
            BoundaryScalar::new(dd_perp[b].tag, vals)
        })
        .collect();
    let lead: Vec<BoundaryScalar> = a.iter().map(|b| b.map(|x| e2 * x)).collect();
    let residual = boundary_pairing(dom, &res, &res).max(0.0).sqrt();
    let leading = boundary_pairing(dom, &lead, &lead).max(0.0).sqrt();
    Ok(LinearizedResidual { residual, leading, ratio: if leading > 0.0 { residual / leading } else { 0.0 } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StarCurve;
    use std::f64::consts::PI;

    #[test]
    fn closed_form_energies() {
        let d = Arc::new(SpectralDomain::disk(StarCurve::circle(1.0, 32).unwrap(), 12).unwrap());
        let z = VectorField2::zeros(&d);
        assert!((conserved_energy(&d, &z, 1.0) - 2.0 * PI).abs() < 1e-12);
        let om = 0.8;
        let v = VectorField2::sample(&d, |x, y| [-om * y, om * x]);
        assert!((conserved_energy(&d, &v, 0.0) - PI * om * om / 4.0).abs() < 1e-12);
        let r = higher_energy(&d, &v, 1.0).unwrap();
        assert!(r.e_dtj.abs() < 1e-16 && r.e_eps.abs() < 1e-16 && r.e_rt.abs() < 1e-16);
        assert!((r.e_vort - 4.0 * om * om * PI).abs() < 1e-10);
        assert!((r.rt_margin + om * om).abs() < 1e-10);
    }
}
