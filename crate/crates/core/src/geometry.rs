//! Spectral boundary curves and their intrinsic geometry.

use crate::error::{Error, Result};
use crate::spectral::{fourier, tail_fraction, theta_grid};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Which boundary of the fluid domain a trace lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Single,
    Inner,
    Outer,
}

impl BoundaryTag {
    /// Fluid lies inside the curve for `Single`/`Outer`, outside for `Inner`.
    pub fn orientation(self) -> f64 {
        match self {
            BoundaryTag::Inner => -1.0,
            _ => 1.0,
        }
    }
}

/// Closed curve r = ρ(θ) about `center`, sampled on a uniform θ grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StarCurve {
    pub center: [f64; 2],
    rho: Vec<f64>,
    modes: Vec<Complex64>,
}

impl StarCurve {
    pub fn from_rho(center: [f64; 2], rho: Vec<f64>) -> Result<Self> {
        let n = rho.len();
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Config(format!("n_theta must be a power of two, got {n}")));
        }
        let th = theta_grid(n);
        let (jmin, &min_rho) = rho
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        if !(min_rho > 0.0) {
            return Err(Error::NotStarShaped { min_rho, theta: th[jmin] });
        }
        let modes = fourier(n).forward(&rho);
        Ok(StarCurve { center, rho, modes })
    }

    /// Conjugate-symmetric spectrum; imaginary parts of the synthesis are discarded.
    pub fn from_modes(center: [f64; 2], modes: Vec<Complex64>) -> Result<Self> {
        let rho = fourier(modes.len()).inverse(&modes);
        Self::from_rho(center, rho)
    }

    pub fn circle(radius: f64, n: usize) -> Result<Self> {
        make_star_curve(&[], radius, n)
    }

    /// Ellipse with semi-axes `a` (x) and `b` (y) in polar form.
    pub fn ellipse(a: f64, b: f64, n: usize) -> Result<Self> {
        let rho = theta_grid(n)
            .iter()
            .map(|t| a * b / ((b * t.cos()).powi(2) + (a * t.sin()).powi(2)).sqrt())
            .collect();
        Self::from_rho([0.0, 0.0], rho)
    }

    pub fn n_theta(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn rho_modes(&self) -> &[Complex64] {
        &self.modes
    }

    pub fn theta(&self) -> Vec<f64> {
        theta_grid(self.n_theta())
    }

    pub fn rho_at(&self, theta: f64) -> f64 {
        fourier(self.n_theta()).eval(&self.modes, theta)
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.theta()
            .iter()
            .zip(&self.rho)
            .map(|(t, r)| [self.center[0] + r * t.cos(), self.center[1] + r * t.sin()])
            .collect()
    }

    pub fn is_resolved(&self) -> bool {
        tail_fraction(&self.rho) < 1e-10
    }

    pub fn max_rho(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::MIN, f64::max)
    }

    pub fn min_rho(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::MAX, f64::min)
    }

    /// Area enclosed by the curve, ½∮ρ² dθ.
    pub fn enclosed_area(&self) -> f64 {
        0.5 * self.rho.iter().map(|r| r * r).sum::<f64>() * 2.0 * PI / self.n_theta() as f64
    }
}

/// ρ(θ) = R + Σ amp·cos kθ.
pub fn make_star_curve(modes: &[(usize, f64)], base_radius: f64, n_theta: usize) -> Result<StarCurve> {
    if !(base_radius > 0.0) {
        return Err(Error::Config(format!("base radius must be positive, got {base_radius}")));
    }
    if n_theta < 4 || !n_theta.is_power_of_two() {
        return Err(Error::Config(format!("n_theta must be a power of two, got {n_theta}")));
    }
    let rho = theta_grid(n_theta)
        .iter()
        .map(|t| base_radius + modes.iter().map(|&(k, a)| a * (k as f64 * t).cos()).sum::<f64>())
        .collect();
    StarCurve::from_rho([0.0, 0.0], rho)
}

/// Two nested star curves sharing a center.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnulusShape {
    pub inner: StarCurve,
    pub outer: StarCurve,
}

impl AnnulusShape {
    pub fn new(inner: StarCurve, outer: StarCurve) -> Result<Self> {
        if inner.n_theta() != outer.n_theta() {
            return Err(Error::GridMismatch { expected: outer.n_theta(), got: inner.n_theta() });
        }
        if inner.center != outer.center {
            return Err(Error::Config("annulus curves must share a center".into()));
        }
        let gap = outer.min_rho() - inner.max_rho();
        if !(gap > 0.0) {
            return Err(Error::AnnulusOverlap { gap });
        }
        Ok(AnnulusShape { inner, outer })
    }

    pub fn circular(r1: f64, r2: f64, n: usize) -> Result<Self> {
        Self::new(StarCurve::circle(r1, n)?, StarCurve::circle(r2, n)?)
    }

    pub fn n_theta(&self) -> usize {
        self.outer.n_theta()
    }

    pub fn area(&self) -> f64 {
        self.outer.enclosed_area() - self.inner.enclosed_area()
    }
}

/// Scalar samples on one boundary curve.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryScalar {
    pub tag: BoundaryTag,
    pub values: Vec<f64>,
}

impl BoundaryScalar {
    pub fn new(tag: BoundaryTag, values: Vec<f64>) -> Self {
        BoundaryScalar { tag, values }
    }

    pub fn single(values: Vec<f64>) -> Self {
        Self::new(BoundaryTag::Single, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        fourier(self.len()).forward(&self.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.tag, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.len(), other.len());
        Self::new(self.tag, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Intrinsic geometry of one boundary curve as seen by the fluid.
#[derive(Clone, Debug)]
pub struct GeometryReport {
    pub tag: BoundaryTag,
    pub points: Vec<[f64; 2]>,
    pub normal: Vec<[f64; 2]>,
    pub tangent: Vec<[f64; 2]>,
    pub kappa: Vec<f64>,
    /// Second fundamental form; equal to κ for curves.
    pub pi: Vec<f64>,
    pub ds_dtheta: Vec<f64>,
    pub arclength: f64,
    pub resolved: bool,
}

impl GeometryReport {
    pub fn n(&self) -> usize {
        self.kappa.len()
    }

    /// Arclength derivative along the fluid tangent.
    pub fn d_ds(&self, f: &[f64]) -> Vec<f64> {
        let s = self.tag.orientation();
        fourier(self.n())
            .diff(f, 1)
            .iter()
            .zip(&self.ds_dtheta)
            .map(|(d, g)| s * d / g)
            .collect()
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let fr = fourier(self.n());
        let a: Vec<f64> = fr.diff(f, 1).iter().zip(&self.ds_dtheta).map(|(d, g)| d / g).collect();
        fr.diff(&a, 1).iter().zip(&self.ds_dtheta).map(|(d, g)| d / g).collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        let h = 2.0 * PI / self.n() as f64;
        f.iter().zip(&self.ds_dtheta).map(|(a, g)| a * g).sum::<f64>() * h
    }

    /// Symmetric eigen-decomposition of the weighted surface Laplacian.
    pub fn laplacian_eigen(&self) -> SurfaceSpectrum {
        let n = self.n();
        let fr = fourier(n);
        let mut dm = DMatrix::<f64>::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = fr.diff(&e, 1);
            for i in 0..n {
                dm[(i, j)] = col[i];
            }
        }
        let isq: Vec<f64> = self.ds_dtheta.iter().map(|g| 1.0 / g.sqrt()).collect();
        // C = W^{-1/2} D W^{-1/2}, S = -CᵀC
        let mut c = dm;
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] *= isq[i] * isq[j];
            }
        }
        let s = -(c.transpose() * &c);
        let s = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(s);
        SurfaceSpectrum {
            lambda: eig.eigenvalues.iter().cloned().collect(),
            vectors: eig.eigenvectors,
            sqrt_g: self.ds_dtheta.iter().map(|g| g.sqrt()).collect(),
        }
    }
}

/// Δ_∂Ω in its symmetric eigenbasis: Δ = W^{-1/2} Q Λ Qᵀ W^{1/2}.
pub struct SurfaceSpectrum {
    pub lambda: Vec<f64>,
    pub vectors: DMatrix<f64>,
    sqrt_g: Vec<f64>,
}

impl SurfaceSpectrum {
    /// Coefficients of f in the weighted orthonormal eigenbasis (up to the factor √Δθ).
    fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let y = nalgebra::DVector::from_iterator(f.len(), f.iter().zip(&self.sqrt_g).map(|(a, g)| a * g));
        (self.vectors.transpose() * y).iter().cloned().collect()
    }

    /// ∮ |(I − Δ)^{r/2} f|² dS.
    pub fn norm_sq(&self, f: &[f64], r: f64) -> f64 {
        let h = 2.0 * PI / f.len() as f64;
        self.coefficients(f)
            .iter()
            .zip(&self.lambda)
            .map(|(c, l)| (1.0 - l.min(0.0)).powf(r) * c * c)
            .sum::<f64>()
            * h
    }

    /// Apply φ(−Δ) for a spectral multiplier φ.
    pub fn apply(&self, f: &[f64], phi: impl Fn(f64) -> f64) -> Vec<f64> {
        let c: Vec<f64> = self
            .coefficients(f)
            .iter()
            .zip(&self.lambda)
            .map(|(c, l)| c * phi((-l).max(0.0)))
            .collect();
        let y = &self.vectors * nalgebra::DVector::from_vec(c);
        y.iter().zip(&self.sqrt_g).map(|(a, g)| a / g).collect()
    }
}

/// Geometry of the curve with the fluid on the side given by `tag`.
pub fn geometry_tagged(curve: &StarCurve, tag: BoundaryTag) -> Result<GeometryReport> {
    let n = curve.n_theta();
    let fr = fourier(n);
    let rho = curve.rho();
    let rp = fr.diff(rho, 1);
    let rpp = fr.diff(rho, 2);
    let th = curve.theta();
    let s = tag.orientation();
    let mut normal = Vec::with_capacity(n);
    let mut tangent = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for j in 0..n {
        let (r, r1, r2) = (rho[j], rp[j], rpp[j]);
        let g2 = r * r + r1 * r1;
        if g2 < 1e-12 {
            return Err(Error::DegenerateMetric(format!("rho^2 + rho'^2 = {g2:.3e} at node {j}")));
        }
        let gj = g2.sqrt();
        let (c, sn) = (th[j].cos(), th[j].sin());
        // X_θ = ρ' e_r + ρ e_φ
        let tx = (r1 * c - r * sn) / gj;
        let ty = (r1 * sn + r * c) / gj;
        tangent.push([s * tx, s * ty]);
        normal.push([s * ty, -s * tx]);
        kappa.push(s * (r * r + 2.0 * r1 * r1 - r * r2) / (gj * g2));
        g.push(gj);
    }
    let arclength = g.iter().sum::<f64>() * 2.0 * PI / n as f64;
    Ok(GeometryReport {
        tag,
        points: curve.points(),
        normal,
        tangent,
        pi: kappa.clone(),
        kappa,
        ds_dtheta: g,
        arclength,
        resolved: curve.is_resolved(),
    })
}

pub fn geometry(curve: &StarCurve) -> Result<GeometryReport> {
    geometry_tagged(curve, BoundaryTag::Single)
}

fn check_grid(curve: &StarCurve, f: &BoundaryScalar) -> Result<()> {
    if f.len() != curve.n_theta() {
        return Err(Error::GridMismatch { expected: curve.n_theta(), got: f.len() });
    }
    Ok(())
}

pub fn surface_laplacian(curve: &StarCurve, f: &BoundaryScalar) -> Result<BoundaryScalar> {
    check_grid(curve, f)?;
    let geo = geometry_tagged(curve, f.tag)?;
    Ok(BoundaryScalar::new(f.tag, geo.laplacian(&f.values)))
}

pub fn boundary_norm(curve: &StarCurve, f: &BoundaryScalar, r: f64) -> Result<f64> {
    check_grid(curve, f)?;
    if !(-4.0..=4.0).contains(&r) {
        return Err(Error::Invalid(format!("Sobolev order {r} outside [-4, 4]")));
    }
    let geo = geometry_tagged(curve, f.tag)?;
    Ok(geo.laplacian_eigen().norm_sq(&f.values, r).sqrt())
}

pub fn integrate_boundary(curve: &StarCurve, f: &BoundaryScalar) -> Result<f64> {
    check_grid(curve, f)?;
    let geo = geometry_tagged(curve, f.tag)?;
    Ok(geo.integrate(&f.values))
}

/// A closed curve sampled at arbitrary (not polar) labels, e.g. advected particles.
#[derive(Clone, Debug)]
pub struct ParamCurve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ParamCurve {
    pub fn from_points(p: &[[f64; 2]]) -> Self {
        ParamCurve { x: p.iter().map(|q| q[0]).collect(), y: p.iter().map(|q| q[1]).collect() }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Geometry with a counter-clockwise labelling; `tag` flips orientation as for star curves.
    pub fn geometry(&self, tag: BoundaryTag) -> GeometryReport {
        let n = self.n();
        let fr = fourier(n);
        let (x1, y1) = (fr.diff(&self.x, 1), fr.diff(&self.y, 1));
        let (x2, y2) = (fr.diff(&self.x, 2), fr.diff(&self.y, 2));
        let s = tag.orientation();
        let mut normal = Vec::with_capacity(n);
        let mut tangent = Vec::with_capacity(n);
        let mut kappa = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        for j in 0..n {
            let gj = (x1[j] * x1[j] + y1[j] * y1[j]).sqrt();
            let (tx, ty) = (x1[j] / gj, y1[j] / gj);
            tangent.push([s * tx, s * ty]);
            normal.push([s * ty, -s * tx]);
            kappa.push(s * (x1[j] * y2[j] - y1[j] * x2[j]) / gj.powi(3));
            g.push(gj);
        }
        let arclength = g.iter().sum::<f64>() * 2.0 * PI / n as f64;
        GeometryReport {
            tag,
            points: self.x.iter().zip(&self.y).map(|(a, b)| [*a, *b]).collect(),
            normal,
            tangent,
            pi: kappa.clone(),
            kappa,
            ds_dtheta: g,
            arclength,
            resolved: tail_fraction(&self.x) < 1e-10 && tail_fraction(&self.y) < 1e-10,
        }
    }

    /// Resample as a star curve about `center` by solving arg(X(α) − c) = θ_j.
    pub fn to_star(&self, center: [f64; 2]) -> Result<StarCurve> {
        let n = self.n();
        let fr = fourier(n);
        let cx = fr.forward(&self.x);
        let cy = fr.forward(&self.y);
        let th = theta_grid(n);
        let ang = |a: f64| -> (f64, f64, [f64; 2]) {
            let px = fr.eval_derivs(&cx, a);
            let py = fr.eval_derivs(&cy, a);
            let dx = px[0] - center[0];
            let dy = py[0] - center[1];
            let r2 = dx * dx + dy * dy;
            let phase = dy.atan2(dx);
            let dphase = (dx * py[1] - dy * px[1]) / r2;
            (phase, dphase, [dx, dy])
        };
        let mut rho = Vec::with_capacity(n);
        for &t in &th {
            let mut a = t;
            // labels start near the polar angle for gently deformed curves
            let mut ok = false;
            for _ in 0..60 {
                let (p, dp, _) = ang(a);
                let mut res = p - t;
                res = (res + PI).rem_euclid(2.0 * PI) - PI;
                if dp <= 0.0 {
                    return Err(Error::NotStarShaped { min_rho: 0.0, theta: t });
                }
                let step = res / dp;
                a -= step.clamp(-0.5, 0.5);
                if step.abs() < 1e-15 {
                    ok = true;
                    break;
                }
            }
            let (p, _, d) = ang(a);
            let res = ((p - t) + PI).rem_euclid(2.0 * PI) - PI;
            if !ok && res.abs() > 1e-12 {
                return Err(Error::NotStarShaped { min_rho: 0.0, theta: t });
            }
            rho.push((d[0] * d[0] + d[1] * d[1]).sqrt());
        }
        StarCurve::from_rho(center, rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_geometry() {
        let c = StarCurve::circle(2.0, 64).unwrap();
        let g = geometry(&c).unwrap();
        for j in 0..64 {
            assert!((g.kappa[j] - 0.5).abs() < 1e-13);
            assert!((g.ds_dtheta[j] - 2.0).abs() < 1e-13);
        }
        assert!((g.arclength - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn inner_orientation_flips_curvature() {
        let c = StarCurve::circle(1.0, 32).unwrap();
        let g = geometry_tagged(&c, BoundaryTag::Inner).unwrap();
        assert!((g.kappa[3] + 1.0).abs() < 1e-13);
        let p = g.points[3];
        let nrm = g.normal[3];
        assert!(p[0] * nrm[0] + p[1] * nrm[1] < 0.0);
    }

    #[test]
    fn rejects_non_star() {
        assert!(matches!(make_star_curve(&[(2, 1.5)], 1.0, 256), Err(Error::NotStarShaped { .. })));
        assert!(matches!(make_star_curve(&[], 1.0, 100), Err(Error::Config(_))));
    }

    #[test]
    fn param_resample_round_trip() {
        let c = StarCurve::ellipse(1.3, 0.9, 64).unwrap();
        // relabel with a non-polar parameter
        let th = theta_grid(64);
        let pts: Vec<[f64; 2]> = th
            .iter()
            .map(|&a| {
                let t = a + 0.1 * a.sin();
                let r = c.rho_at(t);
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let back = ParamCurve::from_points(&pts).to_star([0.0, 0.0]).unwrap();
        for j in 0..64 {
            assert!((back.rho()[j] - c.rho()[j]).abs() < 1e-10);
        }
    }
}
