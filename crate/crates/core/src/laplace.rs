//! Laplace and Poisson solvers on star-shaped disks and annuli.
//!
//! The disk uses the map r = s·F(s,θ) where F is the harmonic extension of ρ, sampled on a
//! doubled Chebyshev grid in s ∈ [−1, 1] with u(−s, θ) = u(s, θ + π). The annulus blends the
//! two boundary profiles linearly in σ ∈ [−1, 1]. Systems are solved by GMRES, right
//! preconditioned with per-mode dense solves of the angle-averaged operator.

use crate::error::{Error, Result};
use crate::geometry::{geometry_tagged, AnnulusShape, BoundaryScalar, BoundaryTag, GeometryReport, StarCurve, SurfaceSpectrum};
use crate::gmres::{gmres, GmresOptions};
use crate::spectral::{chebyshev, clenshaw_curtis, fourier, theta_grid, Mat};
use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use once_cell::sync::OnceCell;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Disk(StarCurve),
    Annulus(AnnulusShape),
}

impl Shape {
    pub fn n_theta(&self) -> usize {
        match self {
            Shape::Disk(c) => c.n_theta(),
            Shape::Annulus(a) => a.n_theta(),
        }
    }

    pub fn center(&self) -> [f64; 2] {
        match self {
            Shape::Disk(c) => c.center,
            Shape::Annulus(a) => a.outer.center,
        }
    }

    /// Curves with their fluid-side tags, outer first.
    pub fn curves(&self) -> Vec<(BoundaryTag, &StarCurve)> {
        match self {
            Shape::Disk(c) => vec![(BoundaryTag::Single, c)],
            Shape::Annulus(a) => vec![(BoundaryTag::Outer, &a.outer), (BoundaryTag::Inner, &a.inner)],
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Disk(c) => c.enclosed_area(),
            Shape::Annulus(a) => a.area(),
        }
    }
}

/// One boundary of the domain: its curve, fluid-side geometry and radial row.
#[derive(Clone, Debug)]
pub struct BoundaryInfo {
    pub tag: BoundaryTag,
    pub row: usize,
    pub curve: StarCurve,
    pub geo: GeometryReport,
}

/// Scalar field on the collocation grid, index `j * n_r + i` (angle j, radius i).
#[derive(Clone, Debug)]
pub struct InteriorField {
    pub domain_id: u64,
    pub values: Vec<f64>,
}

impl InteriorField {
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        InteriorField { domain_id: self.domain_id, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, o: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.domain_id, o.domain_id);
        InteriorField {
            domain_id: self.domain_id,
            values: self.values.iter().zip(&o.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub struct SpectralDomain {
    id: u64,
    pub shape: Shape,
    pub n_theta: usize,
    pub n_r: usize,
    disk: bool,
    /// Radial nodes owned by the grid (positive half for the disk).
    pub s: Vec<f64>,
    /// Full Chebyshev points and matrices (length 2·n_r for the disk).
    s_full: Vec<f64>,
    d1: Mat,
    d2: Mat,
    theta: Vec<f64>,
    cos_t: Vec<f64>,
    sin_t: Vec<f64>,
    pub r_map: Vec<f64>,
    r_s: Vec<f64>,
    r_t: Vec<f64>,
    c_ss: Vec<f64>,
    c_st: Vec<f64>,
    c_tt: Vec<f64>,
    c_s: Vec<f64>,
    quad: Vec<f64>,
    pub boundaries: Vec<BoundaryInfo>,
    interior_rows: Vec<usize>,
    blocks: Vec<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    cond_estimate: f64,
    surface: OnceCell<Vec<SurfaceSpectrum>>,
    pub solver: GmresOptions,
}

impl std::fmt::Debug for SpectralDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralDomain")
            .field("id", &self.id)
            .field("n_theta", &self.n_theta)
            .field("n_r", &self.n_r)
            .field("disk", &self.disk)
            .finish()
    }
}

fn polar_spectrum_at(modes: &[Complex64], s: f64, power: impl Fn(usize, i64) -> f64) -> Vec<Complex64> {
    let n = modes.len();
    let fr = fourier(n);
    modes
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let k = fr.wavenumber(j);
            let m = k.unsigned_abs() as usize;
            let _ = s;
            c * power(m, k)
        })
        .collect()
}

impl SpectralDomain {
    pub fn new(shape: Shape, n_r: usize) -> Result<Self> {
        let n_theta = shape.n_theta();
        if n_theta < 8 || !n_theta.is_power_of_two() {
            return Err(Error::Config(format!("n_theta must be a power of two >= 8, got {n_theta}")));
        }
        if n_r < 4 {
            return Err(Error::Config(format!("n_r must be at least 4, got {n_r}")));
        }
        let disk = matches!(shape, Shape::Disk(_));
        let m = if disk { 2 * n_r - 1 } else { n_r - 1 };
        let (s_full, d1) = chebyshev(m);
        let d2 = d1.mul(&d1);
        let s: Vec<f64> = s_full[..n_r].to_vec();
        let theta = theta_grid(n_theta);
        let cos_t: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let sin_t: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let fr = fourier(n_theta);
        let npts = n_theta * n_r;
        let mut r = vec![0.0; npts];
        let mut r_s = vec![0.0; npts];
        let mut r_ss = vec![0.0; npts];
        let mut r_t = vec![0.0; npts];
        let mut r_st = vec![0.0; npts];
        let mut r_tt = vec![0.0; npts];
        let put = |dst: &mut Vec<f64>, i: usize, col: &[f64]| {
            for j in 0..n_theta {
                dst[j * n_r + i] = col[j];
            }
        };
        match &shape {
            Shape::Disk(c) => {
                let modes = c.rho_modes();
                for (i, &si) in s.iter().enumerate() {
                    let f0 = polar_spectrum_at(modes, si, |m, _| si.powi(m as i32));
                    let f1 = polar_spectrum_at(modes, si, |m, _| if m == 0 { 0.0 } else { m as f64 * si.powi(m as i32 - 1) });
                    let f2 = polar_spectrum_at(modes, si, |m, _| {
                        if m < 2 {
                            0.0
                        } else {
                            (m * (m - 1)) as f64 * si.powi(m as i32 - 2)
                        }
                    });
                    let (mut f0t, mut f0tt, mut f1t) = (f0.clone(), f0.clone(), f1.clone());
                    fr.diff_spectrum(&mut f0t, 1);
                    fr.diff_spectrum(&mut f0tt, 2);
                    fr.diff_spectrum(&mut f1t, 1);
                    let ff = fr.inverse(&f0);
                    let fs = fr.inverse(&f1);
                    let fss = fr.inverse(&f2);
                    let ft = fr.inverse(&f0t);
                    let ftt = fr.inverse(&f0tt);
                    let fst = fr.inverse(&f1t);
                    let col = |a: &dyn Fn(usize) -> f64| (0..n_theta).map(a).collect::<Vec<f64>>();
                    put(&mut r, i, &col(&|j| si * ff[j]));
                    put(&mut r_s, i, &col(&|j| ff[j] + si * fs[j]));
                    put(&mut r_ss, i, &col(&|j| 2.0 * fs[j] + si * fss[j]));
                    put(&mut r_t, i, &col(&|j| si * ft[j]));
                    put(&mut r_st, i, &col(&|j| ft[j] + si * fst[j]));
                    put(&mut r_tt, i, &col(&|j| si * ftt[j]));
                }
            }
            Shape::Annulus(a) => {
                let (pi, po) = (a.inner.rho(), a.outer.rho());
                let (pit, pot) = (fr.diff(pi, 1), fr.diff(po, 1));
                let (pitt, pott) = (fr.diff(pi, 2), fr.diff(po, 2));
                for (i, &si) in s.iter().enumerate() {
                    let (wi, wo) = ((1.0 - si) / 2.0, (1.0 + si) / 2.0);
                    let col = |f: &dyn Fn(usize) -> f64| (0..n_theta).map(f).collect::<Vec<f64>>();
                    put(&mut r, i, &col(&|j| wi * pi[j] + wo * po[j]));
                    put(&mut r_s, i, &col(&|j| (po[j] - pi[j]) / 2.0));
                    put(&mut r_t, i, &col(&|j| wi * pit[j] + wo * pot[j]));
                    put(&mut r_st, i, &col(&|j| (pot[j] - pit[j]) / 2.0));
                    put(&mut r_tt, i, &col(&|j| wi * pitt[j] + wo * pott[j]));
                }
            }
        }
        let mut c_ss = vec![0.0; npts];
        let mut c_st = vec![0.0; npts];
        let mut c_tt = vec![0.0; npts];
        let mut c_s = vec![0.0; npts];
        for p in 0..npts {
            let (rr, rs, rt) = (r[p], r_s[p], r_t[p]);
            if !(rr > 0.0 && rs > 0.0) || !rr.is_finite() || !rs.is_finite() {
                return Err(Error::DegenerateMetric(format!(
                    "map Jacobian not positive at node {p}: R = {rr:.3e}, R_s = {rs:.3e}"
                )));
            }
            c_ss[p] = (rt * rt + rr * rr) / (rs * rs * rr * rr);
            c_st[p] = -2.0 * rt / (rs * rr * rr);
            c_tt[p] = 1.0 / (rr * rr);
            c_s[p] = (1.0 + 2.0 * rt * r_st[p] / (rs * rr) - (rt * rt + rr * rr) * r_ss[p] / (rs * rs * rr) - r_tt[p] / rr)
                / (rr * rs);
        }
        // quadrature
        let mut quad = vec![0.0; npts];
        if disk {
            let w = disk_radial_weights(n_r);
            for j in 0..n_theta {
                for i in 0..n_r {
                    let p = j * n_r + i;
                    quad[p] = 0.5 * PI * w[i] * (r[p] / s[i]) * r_s[p] / n_theta as f64;
                }
            }
        } else {
            let w = clenshaw_curtis(m);
            for j in 0..n_theta {
                for i in 0..n_r {
                    let p = j * n_r + i;
                    quad[p] = w[i] * r[p] * r_s[p] * 2.0 * PI / n_theta as f64;
                }
            }
        }
        let mut boundaries = Vec::new();
        match &shape {
            Shape::Disk(c) => boundaries.push(BoundaryInfo {
                tag: BoundaryTag::Single,
                row: 0,
                curve: c.clone(),
                geo: geometry_tagged(c, BoundaryTag::Single)?,
            }),
            Shape::Annulus(a) => {
                boundaries.push(BoundaryInfo {
                    tag: BoundaryTag::Outer,
                    row: 0,
                    curve: a.outer.clone(),
                    geo: geometry_tagged(&a.outer, BoundaryTag::Outer)?,
                });
                boundaries.push(BoundaryInfo {
                    tag: BoundaryTag::Inner,
                    row: n_r - 1,
                    curve: a.inner.clone(),
                    geo: geometry_tagged(&a.inner, BoundaryTag::Inner)?,
                });
            }
        }
        let interior_rows: Vec<usize> = if disk { (1..n_r).collect() } else { (1..n_r - 1).collect() };
        let mut dom = SpectralDomain {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            n_theta,
            n_r,
            disk,
            s,
            s_full,
            d1,
            d2,
            theta,
            cos_t,
            sin_t,
            r_map: r,
            r_s,
            r_t,
            c_ss,
            c_st,
            c_tt,
            c_s,
            quad,
            boundaries,
            interior_rows,
            blocks: Vec::new(),
            cond_estimate: 1.0,
            surface: OnceCell::new(),
            solver: GmresOptions::default(),
        };
        dom.build_blocks()?;
        Ok(dom)
    }

    pub fn disk(curve: StarCurve, n_r: usize) -> Result<Self> {
        Self::new(Shape::Disk(curve), n_r)
    }

    pub fn annulus(shape: AnnulusShape, n_r: usize) -> Result<Self> {
        Self::new(Shape::Annulus(shape), n_r)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn is_disk(&self) -> bool {
        self.disk
    }

    pub fn npts(&self) -> usize {
        self.n_theta * self.n_r
    }

    pub fn condition_estimate(&self) -> f64 {
        self.cond_estimate
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn field(&self, values: Vec<f64>) -> InteriorField {
        assert_eq!(values.len(), self.npts());
        InteriorField { domain_id: self.id, values }
    }

    pub fn zeros(&self) -> InteriorField {
        self.field(vec![0.0; self.npts()])
    }

    pub fn check(&self, f: &InteriorField) -> Result<()> {
        if f.domain_id != self.id {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    /// Physical coordinates of every grid node.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let c = self.shape.center();
        let mut out = Vec::with_capacity(self.npts());
        for j in 0..self.n_theta {
            for i in 0..self.n_r {
                let r = self.r_map[j * self.n_r + i];
                out.push([c[0] + r * self.cos_t[j], c[1] + r * self.sin_t[j]]);
            }
        }
        out
    }

    /// Sample a function of position on the grid.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> InteriorField {
        self.field(self.points().iter().map(|p| f(p[0], p[1])).collect())
    }

    /// Boundary points of boundary `b`.
    pub fn boundary_points(&self, b: usize) -> &[[f64; 2]] {
        &self.boundaries[b].geo.points
    }

    /// Sample a function of position on every boundary.
    pub fn sample_boundary(&self, f: impl Fn(f64, f64) -> f64) -> Vec<BoundaryScalar> {
        self.boundaries
            .iter()
            .map(|b| BoundaryScalar::new(b.tag, b.geo.points.iter().map(|p| f(p[0], p[1])).collect()))
            .collect()
    }

    /// Restriction of an interior field to every boundary.
    pub fn trace(&self, u: &InteriorField) -> Vec<BoundaryScalar> {
        self.boundaries
            .iter()
            .map(|b| BoundaryScalar::new(b.tag, (0..self.n_theta).map(|j| u.values[j * self.n_r + b.row]).collect()))
            .collect()
    }

    pub fn surface_spectra(&self) -> &[SurfaceSpectrum] {
        self.surface.get_or_init(|| self.boundaries.iter().map(|b| b.geo.laplacian_eigen()).collect())
    }

    pub fn boundary_integral(&self, f: &[BoundaryScalar]) -> f64 {
        self.boundaries.iter().zip(f).map(|(b, v)| b.geo.integrate(&v.values)).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.boundaries.iter().map(|b| b.geo.arclength).sum()
    }

    /// ∫_Ω f dx.
    pub fn integrate(&self, f: &InteriorField) -> f64 {
        self.quad.iter().zip(&f.values).map(|(w, v)| w * v).sum()
    }

    pub fn inner_product(&self, a: &InteriorField, b: &InteriorField) -> f64 {
        self.quad.iter().zip(a.values.iter().zip(&b.values)).map(|(w, (x, y))| w * x * y).sum()
    }

    pub fn area(&self) -> f64 {
        self.quad.iter().sum()
    }

    // ---- differentiation -------------------------------------------------------------

    /// (u_s, u_ss) on the owned grid.
    fn radial(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nt, nr) = (self.n_theta, self.n_r);
        let mut us = vec![0.0; u.len()];
        let mut uss = vec![0.0; u.len()];
        if self.disk {
            let m = 2 * nr - 1;
            let mut w = vec![0.0; 2 * nr];
            let mut a = vec![0.0; 2 * nr];
            let mut b = vec![0.0; 2 * nr];
            for j in 0..nt / 2 {
                let jo = j + nt / 2;
                for k in 0..nr {
                    w[k] = u[j * nr + k];
                    w[m - k] = u[jo * nr + k];
                }
                self.d1.apply(&w, &mut a);
                self.d2.apply(&w, &mut b);
                for i in 0..nr {
                    us[j * nr + i] = a[i];
                    uss[j * nr + i] = b[i];
                    us[jo * nr + i] = -a[m - i];
                    uss[jo * nr + i] = b[m - i];
                }
            }
        } else {
            let mut a = vec![0.0; nr];
            let mut b = vec![0.0; nr];
            for j in 0..nt {
                let col = &u[j * nr..(j + 1) * nr];
                self.d1.apply(col, &mut a);
                self.d2.apply(col, &mut b);
                us[j * nr..(j + 1) * nr].copy_from_slice(&a);
                uss[j * nr..(j + 1) * nr].copy_from_slice(&b);
            }
        }
        (us, uss)
    }

    /// θ-derivatives of the given orders at fixed s.
    fn angular(&self, u: &[f64], orders: &[u32]) -> Vec<Vec<f64>> {
        let (nt, nr) = (self.n_theta, self.n_r);
        let fr = fourier(nt);
        let mut out = vec![vec![0.0; u.len()]; orders.len()];
        let mut col = vec![0.0; nt];
        for i in 0..nr {
            for j in 0..nt {
                col[j] = u[j * nr + i];
            }
            let c = fr.forward(&col);
            for (o, &ord) in orders.iter().enumerate() {
                let mut d = c.clone();
                fr.diff_spectrum(&mut d, ord);
                let v = fr.inverse(&d);
                for j in 0..nt {
                    out[o][j * nr + i] = v[j];
                }
            }
        }
        out
    }

    fn apply_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let (us, uss) = self.radial(u);
        let ang = self.angular(u, &[2]);
        let ust = self.angular(&us, &[1]);
        (0..u.len())
            .map(|p| self.c_ss[p] * uss[p] + self.c_st[p] * ust[0][p] + self.c_tt[p] * ang[0][p] + self.c_s[p] * us[p])
            .collect()
    }

    /// Discrete Laplacian of a field.
    pub fn laplacian(&self, u: &InteriorField) -> InteriorField {
        self.field(self.apply_laplacian(&u.values))
    }

    /// Cartesian gradient through the chain rule of the radial map.
    pub fn gradient(&self, u: &InteriorField) -> [InteriorField; 2] {
        let (us, _) = self.radial(&u.values);
        let ut = self.angular(&u.values, &[1]).pop().expect("one order");
        let nr = self.n_r;
        let mut gx = vec![0.0; u.values.len()];
        let mut gy = vec![0.0; u.values.len()];
        for j in 0..self.n_theta {
            let (c, s) = (self.cos_t[j], self.sin_t[j]);
            for i in 0..nr {
                let p = j * nr + i;
                let ur = us[p] / self.r_s[p];
                let uphi = (ut[p] - self.r_t[p] / self.r_s[p] * us[p]) / self.r_map[p];
                gx[p] = ur * c - uphi * s;
                gy[p] = ur * s + uphi * c;
            }
        }
        [self.field(gx), self.field(gy)]
    }

    pub fn divergence(&self, ux: &InteriorField, uy: &InteriorField) -> InteriorField {
        let gx = self.gradient(ux);
        let gy = self.gradient(uy);
        gx[0].zip(&gy[1], |a, b| a + b)
    }

    /// Normal derivative ∇u·N on every boundary (fluid-outward normal).
    pub fn normal_derivative(&self, u: &InteriorField) -> Vec<BoundaryScalar> {
        let g = self.gradient(u);
        self.boundaries
            .iter()
            .map(|b| {
                let vals = (0..self.n_theta)
                    .map(|j| {
                        let p = j * self.n_r + b.row;
                        g[0].values[p] * b.geo.normal[j][0] + g[1].values[p] * b.geo.normal[j][1]
                    })
                    .collect();
                BoundaryScalar::new(b.tag, vals)
            })
            .collect()
    }

    // ---- solvers -----------------------------------------------------------------------

    fn build_blocks(&mut self) -> Result<()> {
        let (nt, nr) = (self.n_theta, self.n_r);
        let rows = &self.interior_rows;
        let ni = rows.len();
        // angle-averaged coefficients
        let avg = |c: &[f64], i: usize| (0..nt).map(|j| c[j * nr + i]).sum::<f64>() / nt as f64;
        let css: Vec<f64> = (0..nr).map(|i| avg(&self.c_ss, i)).collect();
        let cs: Vec<f64> = (0..nr).map(|i| avg(&self.c_s, i)).collect();
        let ctt: Vec<f64> = (0..nr).map(|i| avg(&self.c_tt, i)).collect();
        let mut blocks = Vec::with_capacity(nt / 2 + 1);
        let mut cond: f64 = 1.0;
        for m in 0..=nt / 2 {
            let nyq = m == nt / 2;
            let m2 = if nyq { 0.0 } else { (m * m) as f64 };
            let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
            let mut a = DMatrix::<f64>::zeros(ni, ni);
            for (ii, &i) in rows.iter().enumerate() {
                for (kk, &k) in rows.iter().enumerate() {
                    let (mut d1, mut d2) = (self.d1.at(i, k), self.d2.at(i, k));
                    if self.disk {
                        let mk = 2 * nr - 1 - k;
                        d1 += parity * self.d1.at(i, mk);
                        d2 += parity * self.d2.at(i, mk);
                    }
                    a[(ii, kk)] = css[i] * d2 + cs[i] * d1;
                }
                a[(ii, ii)] -= m2 * ctt[i];
            }
            let lu = a.lu();
            let u = lu.u();
            let diag: Vec<f64> = (0..ni).map(|k| u[(k, k)].abs()).collect();
            let (mx, mn) = diag.iter().fold((0.0f64, f64::MAX), |(a, b), &d| (a.max(d), b.min(d)));
            if !(mn > 0.0) {
                return Err(Error::Solver { iterations: 0, residual: f64::NAN, condition: f64::INFINITY });
            }
            cond = cond.max(mx / mn);
            blocks.push(lu);
        }
        self.blocks = blocks;
        self.cond_estimate = cond;
        Ok(())
    }

    fn precondition(&self, r: &[f64], out: &mut [f64]) {
        let nt = self.n_theta;
        let ni = self.interior_rows.len();
        let fr = fourier(nt);
        // r, out indexed j * ni + ii
        let mut spec = vec![vec![Complex64::new(0.0, 0.0); nt]; ni];
        let mut col = vec![0.0; nt];
        for ii in 0..ni {
            for j in 0..nt {
                col[j] = r[j * ni + ii];
            }
            spec[ii] = fr.forward(&col);
        }
        let mut sol = vec![vec![Complex64::new(0.0, 0.0); nt]; ni];
        for m in 0..=nt / 2 {
            let re = DVector::from_iterator(ni, (0..ni).map(|ii| spec[ii][m].re));
            let im = DVector::from_iterator(ni, (0..ni).map(|ii| spec[ii][m].im));
            let xr = self.blocks[m].solve(&re).expect("factorized block");
            let xi = self.blocks[m].solve(&im).expect("factorized block");
            for ii in 0..ni {
                let z = Complex64::new(xr[ii], xi[ii]);
                sol[ii][m] = z;
                if m != 0 && m != nt / 2 {
                    sol[ii][nt - m] = z.conj();
                }
            }
        }
        for ii in 0..ni {
            let v = fr.inverse(&sol[ii]);
            for j in 0..nt {
                out[j * ni + ii] = v[j];
            }
        }
    }

    fn embed(&self, x: &[f64], full: &mut [f64]) {
        let ni = self.interior_rows.len();
        for j in 0..self.n_theta {
            for (ii, &i) in self.interior_rows.iter().enumerate() {
                full[j * self.n_r + i] = x[j * ni + ii];
            }
        }
    }

    fn restrict(&self, full: &[f64], x: &mut [f64]) {
        let ni = self.interior_rows.len();
        for j in 0..self.n_theta {
            for (ii, &i) in self.interior_rows.iter().enumerate() {
                x[j * ni + ii] = full[j * self.n_r + i];
            }
        }
    }

    /// Solve Δu = g with u = data on each boundary.
    pub fn solve_dirichlet(&self, g: Option<&InteriorField>, data: &[BoundaryScalar]) -> Result<InteriorField> {
        if data.len() != self.boundaries.len() {
            return Err(Error::Invalid(format!(
                "expected data on {} boundaries, got {}",
                self.boundaries.len(),
                data.len()
            )));
        }
        for d in data {
            if d.len() != self.n_theta {
                return Err(Error::GridMismatch { expected: self.n_theta, got: d.len() });
            }
        }
        if let Some(g) = g {
            self.check(g)?;
        }
        let npts = self.npts();
        let ni = self.interior_rows.len();
        let nint = self.n_theta * ni;
        let mut lift = vec![0.0; npts];
        for (b, d) in self.boundaries.iter().zip(data) {
            for j in 0..self.n_theta {
                lift[j * self.n_r + b.row] = d.values[j];
            }
        }
        let lap_lift = self.apply_laplacian(&lift);
        let mut rhs_full = vec![0.0; npts];
        for p in 0..npts {
            rhs_full[p] = g.map_or(0.0, |g| g.values[p]) - lap_lift[p];
        }
        let mut b = vec![0.0; nint];
        self.restrict(&rhs_full, &mut b);
        let op = |x: &[f64], y: &mut [f64]| {
            let mut full = vec![0.0; npts];
            self.embed(x, &mut full);
            let l = self.apply_laplacian(&full);
            self.restrict(&l, y);
        };
        let prec = |x: &[f64], y: &mut [f64]| self.precondition(x, y);
        let mut x = vec![0.0; nint];
        let out = gmres(op, prec, &b, &mut x, self.solver);
        if !out.converged || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver {
                iterations: out.iterations,
                residual: out.relative_residual,
                condition: self.cond_estimate,
            });
        }
        let mut u = lift;
        self.embed(&x, &mut u);
        Ok(self.field(u))
    }

    pub fn harmonic_extension(&self, data: &[BoundaryScalar]) -> Result<InteriorField> {
        self.solve_dirichlet(None, data)
    }

    /// Δ⁻¹ with zero Dirichlet data.
    pub fn poisson_zero_dirichlet(&self, g: &InteriorField) -> Result<InteriorField> {
        let zero: Vec<BoundaryScalar> =
            self.boundaries.iter().map(|b| BoundaryScalar::new(b.tag, vec![0.0; self.n_theta])).collect();
        self.solve_dirichlet(Some(g), &zero)
    }

    pub fn dirichlet_neumann(&self, data: &[BoundaryScalar]) -> Result<Vec<BoundaryScalar>> {
        let u = self.harmonic_extension(data)?;
        Ok(self.normal_derivative(&u))
    }

    fn boundary_mean(&self, f: &[BoundaryScalar]) -> f64 {
        self.boundary_integral(f) / self.perimeter()
    }

    /// Preconditioner for 𝒩 + P₀: (−Δ_∂Ω)^{-1/2} on each boundary, exact on constants for circles.
    fn dn_precondition(&self, f: &[BoundaryScalar]) -> Vec<BoundaryScalar> {
        let spectra = self.surface_spectra();
        let means: Vec<f64> = self
            .boundaries
            .iter()
            .zip(f)
            .map(|(b, v)| b.geo.integrate(&v.values) / b.geo.arclength)
            .collect();
        let mut out: Vec<BoundaryScalar> = self
            .boundaries
            .iter()
            .zip(f)
            .zip(spectra)
            .zip(&means)
            .map(|(((b, v), sp), &mu)| {
                let rest: Vec<f64> = v.values.iter().map(|x| x - mu).collect();
                let vals = sp.apply(&rest, |l| if l > 1e-9 { 1.0 / l.sqrt() } else { 0.0 });
                BoundaryScalar::new(b.tag, vals)
            })
            .collect();
        let consts: Vec<f64> = if self.disk {
            vec![means[0]]
        } else {
            let r2 = self.boundaries[0].geo.arclength / (2.0 * PI);
            let r1 = self.boundaries[1].geo.arclength / (2.0 * PI);
            let l = (r2 / r1).ln();
            let (w2, w1) = (r2 / (r1 + r2), r1 / (r1 + r2));
            let a = [[1.0 / (r2 * l) + w2, -1.0 / (r2 * l) + w1], [-1.0 / (r1 * l) + w2, 1.0 / (r1 * l) + w1]];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            let (b0, b1) = (means[0], means[1]);
            vec![(a[1][1] * b0 - a[0][1] * b1) / det, (-a[1][0] * b0 + a[0][0] * b1) / det]
        };
        for (o, c) in out.iter_mut().zip(consts) {
            o.values.iter_mut().for_each(|v| *v += c);
        }
        out
    }

    fn flatten(f: &[BoundaryScalar]) -> Vec<f64> {
        f.iter().flat_map(|b| b.values.iter().cloned()).collect()
    }

    fn unflatten(&self, x: &[f64]) -> Vec<BoundaryScalar> {
        self.boundaries
            .iter()
            .enumerate()
            .map(|(k, b)| BoundaryScalar::new(b.tag, x[k * self.n_theta..(k + 1) * self.n_theta].to_vec()))
            .collect()
    }

    /// 𝒩⁻¹ on zero-mean data, returning the zero-mean preimage.
    pub fn dn_inverse(&self, f: &[BoundaryScalar]) -> Result<Vec<BoundaryScalar>> {
        let total = self.boundary_integral(f);
        let scale: f64 = self
            .boundaries
            .iter()
            .zip(f)
            .map(|(b, v)| b.geo.integrate(&v.values.iter().map(|x| x * x).collect::<Vec<_>>()))
            .sum::<f64>()
            .sqrt();
        if total.abs() > 1e-8 * scale.max(1e-300) {
            return Err(Error::NotInRange { mean: total / self.perimeter() });
        }
        let b = Self::flatten(f);
        let failure: std::cell::Cell<Option<Error>> = std::cell::Cell::new(None);
        let op = |x: &[f64], y: &mut [f64]| {
            let u = self.unflatten(x);
            let mean = self.boundary_mean(&u);
            match self.dirichlet_neumann(&u) {
                Ok(n) => {
                    for (k, v) in Self::flatten(&n).into_iter().enumerate() {
                        y[k] = v + mean;
                    }
                }
                Err(e) => {
                    failure.set(Some(e));
                    y.iter_mut().for_each(|v| *v = 0.0);
                }
            }
        };
        let prec = |x: &[f64], y: &mut [f64]| {
            let p = self.dn_precondition(&self.unflatten(x));
            y.copy_from_slice(&Self::flatten(&p));
        };
        let mut x = vec![0.0; b.len()];
        let opts = GmresOptions { tol: 1e-12, restart: 40, max_iter: 200, accept: 1e-8 };
        let out = gmres(op, prec, &b, &mut x, opts);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        if !out.converged {
            return Err(Error::Solver {
                iterations: out.iterations,
                residual: out.relative_residual,
                condition: self.cond_estimate,
            });
        }
        let mut u = self.unflatten(&x);
        let mean = self.boundary_mean(&u);
        for b in u.iter_mut() {
            b.values.iter_mut().for_each(|v| *v -= mean);
        }
        Ok(u)
    }

    // ---- point evaluation --------------------------------------------------------------

    /// Reference coordinates (s, θ) of a physical point. Points up to `LOCATE_TOL` outside
    /// the reference interval are accepted and evaluated by polynomial continuation.
    pub fn locate(&self, p: [f64; 2]) -> Result<(f64, f64)> {
        let c = self.shape.center();
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        let r = (dx * dx + dy * dy).sqrt();
        let th = dy.atan2(dx).rem_euclid(2.0 * PI);
        match &self.shape {
            Shape::Disk(curve) => {
                if r == 0.0 {
                    return Ok((0.0, 0.0));
                }
                let modes = curve.rho_modes();
                let fr = fourier(self.n_theta);
                let n = self.n_theta;
                // R(s) = s F(s, θ), F = Σ ρ̂_m s^|m| e^{imθ}
                let eval = |s: f64| -> (f64, f64) {
                    let mut f = modes[0].re;
                    let mut fs = 0.0;
                    for k in 1..n / 2 {
                        let z = modes[k] * Complex64::from_polar(1.0, k as f64 * th);
                        let sk = s.powi(k as i32);
                        f += 2.0 * z.re * sk;
                        fs += 2.0 * z.re * k as f64 * s.powi(k as i32 - 1);
                    }
                    (s * f, f + s * fs)
                };
                let mut s = r / fr.eval(modes, th);
                for _ in 0..50 {
                    let (rr, rs) = eval(s);
                    let step = (rr - r) / rs;
                    s -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                if !(s.is_finite()) || s > 1.0 + LOCATE_TOL {
                    return Err(Error::Invalid(format!("point ({:.4}, {:.4}) outside the domain", p[0], p[1])));
                }
                Ok((s, th))
            }
            Shape::Annulus(a) => {
                let ri = a.inner.rho_at(th);
                let ro = a.outer.rho_at(th);
                let s = (2.0 * r - ri - ro) / (ro - ri);
                if s.abs() > 1.0 + LOCATE_TOL {
                    return Err(Error::Invalid(format!("point ({:.4}, {:.4}) outside the domain", p[0], p[1])));
                }
                Ok((s, th))
            }
        }
    }

    /// Evaluate an interior field at arbitrary points by spectral interpolation.
    pub fn interpolate(&self, u: &InteriorField, pts: &[[f64; 2]]) -> Result<Vec<f64>> {
        self.check(u)?;
        let (nt, nr) = (self.n_theta, self.n_r);
        let fr = fourier(nt);
        let spectra: Vec<Vec<Complex64>> = (0..nr)
            .map(|i| fr.forward(&(0..nt).map(|j| u.values[j * nr + i]).collect::<Vec<_>>()))
            .collect();
        let mut out = Vec::with_capacity(pts.len());
        let mut line = vec![0.0; self.s_full.len()];
        for &p in pts {
            let (s, th) = self.locate(p)?;
            if self.disk {
                let m = 2 * nr - 1;
                for i in 0..nr {
                    line[i] = fr.eval(&spectra[i], th);
                    line[m - i] = fr.eval(&spectra[i], th + PI);
                }
            } else {
                for i in 0..nr {
                    line[i] = fr.eval(&spectra[i], th);
                }
            }
            out.push(crate::spectral::barycentric(&self.s_full, &line, s));
        }
        Ok(out)
    }
}

const LOCATE_TOL: f64 = 1e-6;

/// Weights for ∫_{-1}^{1} h(τ) dτ on τ_i = cos(2iπ/M), M = 2n − 1, exact for degree < n.
fn disk_radial_weights(n: usize) -> Vec<f64> {
    let m = (2 * n - 1) as f64;
    let mut v = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for k in 0..n {
        for i in 0..n {
            v[(k, i)] = (k as f64 * 2.0 * i as f64 * PI / m).cos();
        }
        rhs[k] = if k % 2 == 0 { 2.0 / (1.0 - (k * k) as f64) } else { 0.0 };
    }
    let w = v.lu().solve(&rhs).expect("nonsingular cosine Vandermonde");
    w.iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_disk(n_theta: usize, n_r: usize) -> SpectralDomain {
        SpectralDomain::disk(StarCurve::circle(1.0, n_theta).unwrap(), n_r).unwrap()
    }

    #[test]
    fn disk_area_and_harmonic_power() {
        let d = unit_disk(32, 12);
        assert!((d.area() - PI).abs() < 1e-13);
        let th = d.theta().to_vec();
        let f = BoundaryScalar::single(th.iter().map(|t| (3.0 * t).cos()).collect());
        let u = d.harmonic_extension(&[f]).unwrap();
        let v = d.interpolate(&u, &[[0.5 * 0.3f64.cos(), 0.5 * 0.3f64.sin()]]).unwrap();
        assert!((v[0] - 0.125 * 0.9f64.cos()).abs() < 1e-12);
        let n = d.dirichlet_neumann(&[BoundaryScalar::single(th.iter().map(|t| (3.0 * t).cos()).collect())]).unwrap();
        for j in 0..32 {
            assert!((n[0].values[j] - 3.0 * (3.0 * th[j]).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn ellipse_laplacian_of_polynomials() {
        let d = SpectralDomain::disk(StarCurve::ellipse(1.3, 0.8, 128).unwrap(), 20).unwrap();
        let u = d.sample(|x, y| x * x + 2.0 * y * y + x * y * y);
        let l = d.laplacian(&u);
        let ex = d.sample(|x, _| 6.0 + 2.0 * x);
        for p in 0..d.npts() {
            assert!((l.values[p] - ex.values[p]).abs() < 1e-7, "{} vs {}", l.values[p], ex.values[p]);
        }
        let area = PI * 1.3 * 0.8;
        assert!((d.area() - area).abs() < 1e-12);
    }

    #[test]
    fn annulus_log_profile() {
        let d = SpectralDomain::annulus(AnnulusShape::circular(1.0, 2.0, 32).unwrap(), 16).unwrap();
        let data = vec![
            BoundaryScalar::new(BoundaryTag::Outer, vec![1.0; 32]),
            BoundaryScalar::new(BoundaryTag::Inner, vec![0.0; 32]),
        ];
        let u = d.harmonic_extension(&data).unwrap();
        let ex = d.sample(|x, y| (x * x + y * y).sqrt().ln() / 2f64.ln());
        for p in 0..d.npts() {
            assert!((u.values[p] - ex.values[p]).abs() < 1e-10);
        }
        assert!((d.area() - 3.0 * PI).abs() < 1e-12);
    }
}
