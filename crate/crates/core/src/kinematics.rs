//! Material-derivative and commutator formulas on a moving domain, and the flow
//! finite-difference oracle that validates them by advecting the domain.

use crate::error::{Error, Result};
use crate::fields::{
    curvature, curvature_extension, d_ds_all, frobenius, jacobian, normal_trace, pressure_bilinear, surface_laplacian_all,
    tangential_trace, VectorField2,
};
use crate::geometry::{BoundaryScalar, BoundaryTag, ParamCurve};
use crate::laplace::{InteriorField, Shape, SpectralDomain};
use crate::spectral::fourier;
use std::sync::Arc;

/// Vector samples on one boundary.
#[derive(Clone, Debug)]
pub struct BoundaryVector {
    pub tag: BoundaryTag,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl BoundaryVector {
    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Instantaneous state (Ω, v) with an optional acceleration D_t v.
#[derive(Clone)]
pub struct FlowSnapshot {
    pub domain: Arc<SpectralDomain>,
    pub v: VectorField2,
    pub dtv: Option<VectorField2>,
    pub eps: f64,
}

/// Boundary traces of a vector field and its first two arclength derivatives.
struct Traces {
    fs: [Vec<f64>; 2],
    fss: [Vec<f64>; 2],
}

fn traces(dom: &SpectralDomain, w: &VectorField2, b: usize) -> Traces {
    let info = &dom.boundaries[b];
    let get = |u: &InteriorField| -> Vec<f64> { (0..dom.n_theta).map(|j| u.values[j * dom.n_r + info.row]).collect() };
    let f = [get(&w.x), get(&w.y)];
    let fs = [info.geo.d_ds(&f[0]), info.geo.d_ds(&f[1])];
    let fss = [info.geo.laplacian(&f[0]), info.geo.laplacian(&f[1])];
    Traces { fs, fss }
}

fn dot(a: &[Vec<f64>; 2], b: &[[f64; 2]], j: usize) -> f64 {
    a[0][j] * b[j][0] + a[1][j] * b[j][1]
}

impl FlowSnapshot {
    pub fn new(domain: Arc<SpectralDomain>, v: VectorField2) -> Self {
        FlowSnapshot { domain, v, dtv: None, eps: 0.0 }
    }

    pub fn with_acceleration(mut self, dtv: VectorField2) -> Self {
        self.dtv = Some(dtv);
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    fn nb(&self) -> usize {
        self.domain.boundaries.len()
    }

    /// D_t N = −(N·∂_s v) T.
    pub fn dt_normal(&self) -> Vec<BoundaryVector> {
        let dom = &*self.domain;
        (0..self.nb())
            .map(|b| {
                let g = &dom.boundaries[b].geo;
                let t = traces(dom, &self.v, b);
                let a: Vec<f64> = (0..dom.n_theta).map(|j| dot(&t.fs, &g.normal, j)).collect();
                BoundaryVector {
                    tag: g.tag,
                    x: (0..dom.n_theta).map(|j| -a[j] * g.tangent[j][0]).collect(),
                    y: (0..dom.n_theta).map(|j| -a[j] * g.tangent[j][1]).collect(),
                }
            })
            .collect()
    }

    /// D_t dS = (v⊥κ + ∂_s v^⊤) dS; returns the factor.
    pub fn dt_surface_measure(&self) -> Vec<BoundaryScalar> {
        let dom = &*self.domain;
        let vn = normal_trace(dom, &self.v);
        let vt = tangential_trace(dom, &self.v);
        let dvt = d_ds_all(dom, &vt);
        dom.boundaries
            .iter()
            .enumerate()
            .map(|(b, info)| {
                BoundaryScalar::new(
                    info.tag,
                    (0..dom.n_theta).map(|j| vn[b].values[j] * info.geo.kappa[j] + dvt[b].values[j]).collect(),
                )
            })
            .collect()
    }

    /// D_t κ = −N·Δ_∂Ω v − 2κ T·∂_s v.
    pub fn dt_curvature_k1(&self) -> Vec<BoundaryScalar> {
        let dom = &*self.domain;
        (0..self.nb())
            .map(|b| {
                let g = &dom.boundaries[b].geo;
                let t = traces(dom, &self.v, b);
                let vals = (0..dom.n_theta)
                    .map(|j| -dot(&t.fss, &g.normal, j) - 2.0 * g.kappa[j] * dot(&t.fs, &g.tangent, j))
                    .collect();
                BoundaryScalar::new(g.tag, vals)
            })
            .collect()
    }

    /// D_t κ = −Δ_∂Ω v⊥ − v⊥κ² + (∂_sκ) v^⊤.
    pub fn dt_curvature_k2(&self) -> Vec<BoundaryScalar> {
        let dom = &*self.domain;
        let vn = normal_trace(dom, &self.v);
        let vt = tangential_trace(dom, &self.v);
        let lap = surface_laplacian_all(dom, &vn);
        let k = curvature(dom);
        let ks = d_ds_all(dom, &k);
        (0..self.nb())
            .map(|b| {
                let vals = (0..dom.n_theta)
                    .map(|j| {
                        let kj = k[b].values[j];
                        -lap[b].values[j] - vn[b].values[j] * kj * kj + ks[b].values[j] * vt[b].values[j]
                    })
                    .collect();
                BoundaryScalar::new(k[b].tag, vals)
            })
            .collect()
    }

    pub fn dt_curvature(&self) -> Vec<BoundaryScalar> {
        self.dt_curvature_k2()
    }

    /// D_t²κ in two dimensions. With a = N·∂_s v, λ = T·∂_s v and A = D_t v:
    /// −N·∂_s²A − 2κ T·∂_sA + 4λ N·∂_s²v + 2a T·∂_s²v − 3κa² + 6κλ².
    pub fn dt2_curvature(&self) -> Result<Vec<BoundaryScalar>> {
        self.dt2_impl(false)
    }

    /// The expansion obtained by transcribing the general-dimension derivation term by term,
    /// keeping only the tangential part of D_t(Π(τ)) and omitting ∇_{D_tτ}v.
    pub fn dt2_curvature_transcribed(&self) -> Result<Vec<BoundaryScalar>> {
        self.dt2_impl(true)
    }

    fn dt2_impl(&self, transcribed: bool) -> Result<Vec<BoundaryScalar>> {
        let acc = self.dtv.as_ref().ok_or(Error::MissingAcceleration)?;
        let dom = &*self.domain;
        let jac = jacobian(dom, &self.v);
        Ok((0..self.nb())
            .map(|b| {
                let info = &dom.boundaries[b];
                let g = &info.geo;
                let t = traces(dom, &self.v, b);
                let ta = traces(dom, acc, b);
                let vals = (0..dom.n_theta)
                    .map(|j| {
                        let (nn, tt, k) = (&g.normal, &g.tangent, g.kappa[j]);
                        let a = dot(&t.fs, nn, j);
                        let lam = dot(&t.fs, tt, j);
                        let mut out = -dot(&ta.fss, nn, j) - 2.0 * k * dot(&ta.fs, tt, j)
                            + 4.0 * lam * dot(&t.fss, nn, j)
                            + 2.0 * a * dot(&t.fss, tt, j)
                            - 3.0 * k * a * a
                            + 6.0 * k * lam * lam;
                        if transcribed {
                            let p = j * dom.n_r + info.row;
                            // T·∇_N v
                            let mut t_dn_v = 0.0;
                            for (i, ti) in tt[j].iter().enumerate() {
                                for (m, nm) in nn[j].iter().enumerate() {
                                    t_dn_v += ti * jac[i][m].values[p] * nm;
                                }
                            }
                            out += 2.0 * k * a * (a + t_dn_v);
                        }
                        out
                    })
                    .collect();
                BoundaryScalar::new(g.tag, vals)
            })
            .collect())
    }

    /// Split D_t²κ = −N·Δ_∂Ω D_tv + 2ε²κ T·∂_s J + r; returns (leading, remainder).
    pub fn dt2_curvature_split(&self) -> Result<(Vec<BoundaryScalar>, Vec<BoundaryScalar>)> {
        let acc = self.dtv.as_ref().ok_or(Error::MissingAcceleration)?;
        let dom = &*self.domain;
        let full = self.dt2_curvature()?;
        let jf = crate::fields::curvature_force_j(dom)?;
        let mut lead = Vec::new();
        let mut rest = Vec::new();
        for b in 0..self.nb() {
            let g = &dom.boundaries[b].geo;
            let ta = traces(dom, acc, b);
            let tj = traces(dom, &jf, b);
            let l: Vec<f64> = (0..dom.n_theta)
                .map(|j| -dot(&ta.fss, &g.normal, j) + 2.0 * self.eps * self.eps * g.kappa[j] * dot(&tj.fs, &g.tangent, j))
                .collect();
            rest.push(BoundaryScalar::new(g.tag, full[b].values.iter().zip(&l).map(|(a, b)| a - b).collect()));
            lead.push(BoundaryScalar::new(g.tag, l));
        }
        Ok((lead, rest))
    }

    /// D_t J = −∇ℋ(Δ_∂Ω v⊥) + ∇ℋ(−v⊥κ² + ∂_sκ v^⊤) + ∇Δ⁻¹(2Dv·DJ + J·Δv) − (Dv)*J.
    pub fn dt_j(&self) -> Result<VectorField2> {
        let dom = &*self.domain;
        let kh = curvature_extension(dom)?;
        let j = VectorField2::gradient(dom, &kh);
        let dtk = self.dt_curvature_k2();
        let ext = dom.harmonic_extension(&dtk)?;
        let corr = hessian_commutator_source(dom, &self.v, &kh);
        let inv = dom.poisson_zero_dirichlet(&corr)?;
        let gh = dom.gradient(&ext.zip(&inv, |a, b| a + b));
        let dv = jacobian(dom, &self.v);
        let n = dom.npts();
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for p in 0..n {
            // ((Dv)*J)_i = Σ_m ∂_i v^m J_m
            let (jx, jy) = (j.x.values[p], j.y.values[p]);
            x[p] = gh[0].values[p] - (dv[0][0].values[p] * jx + dv[1][0].values[p] * jy);
            y[p] = gh[1].values[p] - (dv[0][1].values[p] * jx + dv[1][1].values[p] * jy);
        }
        Ok(VectorField2::new(dom.field(x), dom.field(y)))
    }

    /// 𝒟_t J = D_t J + ∇p_{v,J}.
    pub fn covariant_dt_j(&self) -> Result<VectorField2> {
        let dom = &*self.domain;
        let j = crate::fields::curvature_force_j(dom)?;
        let p = pressure_bilinear(dom, &self.v, &j)?;
        Ok(self.dt_j()?.add(&VectorField2::gradient(dom, &p)))
    }

    /// [D_t, ℋ]f = Δ⁻¹(2Dv·D²f_ℋ + ∇f_ℋ·Δv).
    pub fn commutator_h(&self, f: &[BoundaryScalar]) -> Result<InteriorField> {
        let dom = &*self.domain;
        let fh = dom.harmonic_extension(f)?;
        dom.poisson_zero_dirichlet(&hessian_commutator_source(dom, &self.v, &fh))
    }

    /// [D_t, Δ⁻¹]g = Δ⁻¹(2Dv·D²φ + Δv·∇φ), φ = Δ⁻¹g.
    pub fn commutator_inv_laplace(&self, g: &InteriorField) -> Result<InteriorField> {
        let dom = &*self.domain;
        let phi = dom.poisson_zero_dirichlet(g)?;
        dom.poisson_zero_dirichlet(&hessian_commutator_source(dom, &self.v, &phi))
    }

    /// [D_t, 𝒩]f = ∇_NΔ⁻¹(2Dv·D²f_ℋ + ∇f_ℋ·Δv) − ∇f_ℋ·∇_N v − ∇_{∇^⊤f}v·N.
    pub fn commutator_dn(&self, f: &[BoundaryScalar]) -> Result<Vec<BoundaryScalar>> {
        let dom = &*self.domain;
        let fh = dom.harmonic_extension(f)?;
        let inv = dom.poisson_zero_dirichlet(&hessian_commutator_source(dom, &self.v, &fh))?;
        let first = dom.normal_derivative(&inv);
        let gf = dom.gradient(&fh);
        let dv = jacobian(dom, &self.v);
        let fs = d_ds_all(dom, f);
        Ok(dom
            .boundaries
            .iter()
            .enumerate()
            .map(|(b, info)| {
                let g = &info.geo;
                let vals = (0..dom.n_theta)
                    .map(|j| {
                        let p = j * dom.n_r + info.row;
                        let (nx, ny) = (g.normal[j][0], g.normal[j][1]);
                        let (tx, ty) = (g.tangent[j][0], g.tangent[j][1]);
                        let mut s = first[b].values[j];
                        // ∇_N v = Dv N, ∇_{T} v = Dv T
                        for i in 0..2 {
                            let dnv = dv[i][0].values[p] * nx + dv[i][1].values[p] * ny;
                            let dtv = dv[i][0].values[p] * tx + dv[i][1].values[p] * ty;
                            s -= gf[i].values[p] * dnv;
                            s -= fs[b].values[j] * dtv * g.normal[j][i];
                        }
                        s
                    })
                    .collect();
                BoundaryScalar::new(info.tag, vals)
            })
            .collect())
    }

    /// [D_t, Δ_∂Ω]f = −2λ ∂_s²f − ∂_sf (T·∂_s²v) + κ ∂_sf (N·∂_s v).
    pub fn commutator_surface_laplace(&self, f: &[BoundaryScalar]) -> Vec<BoundaryScalar> {
        let dom = &*self.domain;
        (0..self.nb())
            .map(|b| {
                let g = &dom.boundaries[b].geo;
                let t = traces(dom, &self.v, b);
                let fs = g.d_ds(&f[b].values);
                let fss = g.laplacian(&f[b].values);
                let vals = (0..dom.n_theta)
                    .map(|j| {
                        let lam = dot(&t.fs, &g.tangent, j);
                        -2.0 * lam * fss[j] - fs[j] * dot(&t.fss, &g.tangent, j)
                            + g.kappa[j] * fs[j] * dot(&t.fs, &g.normal, j)
                    })
                    .collect();
                BoundaryScalar::new(g.tag, vals)
            })
            .collect()
    }
}

/// 2Dv·D²F + ∇F·Δv.
pub fn hessian_commutator_source(dom: &SpectralDomain, v: &VectorField2, f: &InteriorField) -> InteriorField {
    let gf = VectorField2::gradient(dom, f);
    let hf = jacobian(dom, &gf);
    let dv = jacobian(dom, v);
    let lx = dom.laplacian(&v.x);
    let ly = dom.laplacian(&v.y);
    let vals = (0..dom.npts())
        .map(|p| 2.0 * frobenius(&dv, &hf, p) + gf.x.values[p] * lx.values[p] + gf.y.values[p] * ly.values[p])
        .collect();
    dom.field(vals)
}

// ---- analytic velocity fields ---------------------------------------------------------

/// Steady velocity field with analytic gradient, used to build flow families.
pub trait VelocityField: Send + Sync {
    fn velocity(&self, p: [f64; 2]) -> [f64; 2];
    /// `g[i][j] = ∂_j v^i`.
    fn gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2];
    /// D_t v = (v·∇)v for a steady field.
    fn acceleration(&self, p: [f64; 2]) -> [f64; 2] {
        let v = self.velocity(p);
        let g = self.gradient(p);
        [g[0][0] * v[0] + g[0][1] * v[1], g[1][0] * v[0] + g[1][1] * v[1]]
    }
    fn name(&self) -> String;
}

/// v = (a·y, 0).
pub struct Shear(pub f64);

impl VelocityField for Shear {
    fn velocity(&self, p: [f64; 2]) -> [f64; 2] {
        [self.0 * p[1], 0.0]
    }
    fn gradient(&self, _: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0, self.0], [0.0, 0.0]]
    }
    fn name(&self) -> String {
        format!("shear({})", self.0)
    }
}

/// v = Ω(−y, x).
pub struct RigidRotation(pub f64);

impl VelocityField for RigidRotation {
    fn velocity(&self, p: [f64; 2]) -> [f64; 2] {
        [-self.0 * p[1], self.0 * p[0]]
    }
    fn gradient(&self, _: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0, -self.0], [self.0, 0.0]]
    }
    fn name(&self) -> String {
        format!("rotation({})", self.0)
    }
}

/// v = x/|x|, unit-speed radial expansion (not divergence free; kinematics only).
pub struct RadialExpansion;

impl VelocityField for RadialExpansion {
    fn velocity(&self, p: [f64; 2]) -> [f64; 2] {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        [p[0] / r, p[1] / r]
    }
    fn gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let r3 = r * r * r;
        [[1.0 / r - p[0] * p[0] / r3, -p[0] * p[1] / r3], [-p[0] * p[1] / r3, 1.0 / r - p[1] * p[1] / r3]]
    }
    fn name(&self) -> String {
        "radial".into()
    }
}

/// Divergence-free cubic flow from the stream function ψ = c₀x²y + c₁y³ + c₂xy + c₃x² ,
/// v = (ψ_y, −ψ_x).
pub struct CubicStream(pub [f64; 4]);

impl VelocityField for CubicStream {
    fn velocity(&self, p: [f64; 2]) -> [f64; 2] {
        let [a, b, c, d] = self.0;
        let (x, y) = (p[0], p[1]);
        [a * x * x + 3.0 * b * y * y + c * x, -(2.0 * a * x * y + c * y + 2.0 * d * x)]
    }
    fn gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let [a, b, c, d] = self.0;
        let (x, y) = (p[0], p[1]);
        [[2.0 * a * x + c, 6.0 * b * y], [-(2.0 * a * y + 2.0 * d), -(2.0 * a * x + c)]]
    }
    fn name(&self) -> String {
        format!("cubic{:?}", self.0)
    }
}

/// Irrotational flow v = ∇Φ with Φ = Re(c z³)/3 + Re(d z²)/2 (harmonic).
pub struct PotentialFlow {
    pub c: [f64; 2],
    pub d: [f64; 2],
}

impl VelocityField for PotentialFlow {
    fn velocity(&self, p: [f64; 2]) -> [f64; 2] {
        // Φ' = c z² + d z, v = conj(Φ')
        let (x, y) = (p[0], p[1]);
        let z2 = [x * x - y * y, 2.0 * x * y];
        let w = [
            self.c[0] * z2[0] - self.c[1] * z2[1] + self.d[0] * x - self.d[1] * y,
            self.c[0] * z2[1] + self.c[1] * z2[0] + self.d[0] * y + self.d[1] * x,
        ];
        [w[0], -w[1]]
    }
    fn gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        // Φ'' = 2cz + d = α + iβ; v_x = Re, v_y = −Im; Cauchy–Riemann
        let (x, y) = (p[0], p[1]);
        let al = 2.0 * (self.c[0] * x - self.c[1] * y) + self.d[0];
        let be = 2.0 * (self.c[0] * y + self.c[1] * x) + self.d[1];
        [[al, -be], [-be, -al]]
    }
    fn name(&self) -> String {
        "potential".into()
    }
}

// ---- flow families and the finite-difference oracle -------------------------------------

/// A base shape transported by a steady velocity field.
#[derive(Clone)]
pub struct FlowFamily {
    pub base: Shape,
    pub n_r: usize,
    pub field: Arc<dyn VelocityField>,
}

fn rk4_advect(field: &dyn VelocityField, p: [f64; 2], t: f64) -> [f64; 2] {
    if t == 0.0 {
        return p;
    }
    let steps = ((t.abs() / 1e-4).ceil() as usize).max(4);
    let h = t / steps as f64;
    let mut x = p;
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    for _ in 0..steps {
        let k1 = field.velocity(x);
        let k2 = field.velocity(add(x, k1, h / 2.0));
        let k3 = field.velocity(add(x, k2, h / 2.0));
        let k4 = field.velocity(add(x, k3, h));
        x = [
            x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
    }
    x
}

/// Functions of position used as test data.
pub type SpatialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Quantities that the oracle differentiates along particle paths.
#[derive(Clone)]
pub enum Quantity {
    Normal,
    LogSurfaceMeasure,
    Curvature,
    SurfaceLaplacian(SpatialFn),
    DirichletNeumann(SpatialFn),
    JNormal,
    HarmonicExtension(SpatialFn),
    InverseLaplacian(SpatialFn),
    J,
}

impl Quantity {
    fn interior(&self) -> bool {
        matches!(self, Quantity::HarmonicExtension(_) | Quantity::InverseLaplacian(_) | Quantity::J)
    }
}

/// Finite-difference estimate along particle paths at two step sizes.
#[derive(Clone, Debug)]
pub struct FdEstimate {
    pub dt: f64,
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    /// Richardson-extrapolated derivative (4·fine − coarse)/3.
    pub extrapolated: Vec<f64>,
    /// Order from three levels dt, dt/2, dt/4 (None when differences vanish).
    pub self_order: Option<f64>,
}

impl FlowFamily {
    pub fn new(base: Shape, n_r: usize, field: Arc<dyn VelocityField>) -> Self {
        FlowFamily { base, n_r, field }
    }

    pub fn base_domain(&self) -> Result<SpectralDomain> {
        SpectralDomain::new(self.base.clone(), self.n_r)
    }

    pub fn snapshot(&self) -> Result<FlowSnapshot> {
        let dom = Arc::new(self.base_domain()?);
        let f = self.field.clone();
        let v = VectorField2::sample(&dom, |x, y| f.velocity([x, y]));
        let a = VectorField2::sample(&dom, |x, y| f.acceleration([x, y]));
        Ok(FlowSnapshot::new(dom, v).with_acceleration(a))
    }

    fn boundary_particles(&self, t: f64) -> Vec<(BoundaryTag, Vec<[f64; 2]>)> {
        self.base
            .curves()
            .into_iter()
            .map(|(tag, c)| (tag, c.points().iter().map(|&p| rk4_advect(&*self.field, p, t)).collect()))
            .collect()
    }

    /// The transported domain, resampled in polar form about the base center.
    pub fn domain_at(&self, t: f64) -> Result<SpectralDomain> {
        let center = self.base.center();
        let parts = self.boundary_particles(t);
        let curves: Vec<_> =
            parts.iter().map(|(_, pts)| ParamCurve::from_points(pts).to_star(center)).collect::<Result<_>>()?;
        let shape = match &self.base {
            Shape::Disk(_) => Shape::Disk(curves[0].clone()),
            Shape::Annulus(_) => {
                Shape::Annulus(crate::geometry::AnnulusShape::new(curves[1].clone(), curves[0].clone())?)
            }
        };
        SpectralDomain::new(shape, self.n_r)
    }

    /// Boundary normal speed from the advected positions vs v⊥; relative mismatch.
    pub fn consistency(&self, dt: f64) -> Result<f64> {
        let plus = self.boundary_particles(dt);
        let minus = self.boundary_particles(-dt);
        let dom = self.base_domain()?;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1e-300;
        for (b, info) in dom.boundaries.iter().enumerate() {
            for j in 0..dom.n_theta {
                let (p, m) = (plus[b].1[j], minus[b].1[j]);
                let vel = [(p[0] - m[0]) / (2.0 * dt), (p[1] - m[1]) / (2.0 * dt)];
                let exact = self.field.velocity(info.geo.points[j]);
                let n = info.geo.normal[j];
                let fd = vel[0] * n[0] + vel[1] * n[1];
                let ex = exact[0] * n[0] + exact[1] * n[1];
                worst = worst.max((fd - ex).abs());
                scale = scale.max(ex.abs()).max(exact[0].hypot(exact[1]));
            }
        }
        Ok(worst / scale)
    }

    fn eval(&self, q: &Quantity, t: f64) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        if q.interior() {
            let dom = self.domain_at(t)?;
            let base = self.base_domain()?;
            let pts: Vec<[f64; 2]> = base.points().iter().map(|&p| rk4_advect(&*self.field, p, t)).collect();
            let fields: Vec<InteriorField> = match q {
                Quantity::HarmonicExtension(f) => vec![dom.harmonic_extension(&dom.sample_boundary(|x, y| f(x, y)))?],
                Quantity::InverseLaplacian(g) => vec![dom.poisson_zero_dirichlet(&dom.sample(|x, y| g(x, y)))?],
                Quantity::J => {
                    let [a, b] = dom.gradient(&curvature_extension(&dom)?);
                    vec![a, b]
                }
                _ => unreachable!(),
            };
            for f in &fields {
                out.extend(dom.interpolate(f, &pts)?);
            }
            return Ok(out);
        }
        let parts = self.boundary_particles(t);
        let needs_domain = matches!(q, Quantity::DirichletNeumann(_) | Quantity::JNormal);
        let dom = if needs_domain { Some(self.domain_at(t)?) } else { None };
        for (b, (tag, pts)) in parts.iter().enumerate() {
            let geo = ParamCurve::from_points(pts).geometry(*tag);
            match q {
                Quantity::Normal => {
                    out.extend(geo.normal.iter().map(|n| n[0]));
                    out.extend(geo.normal.iter().map(|n| n[1]));
                }
                Quantity::LogSurfaceMeasure => out.extend(geo.ds_dtheta.iter().map(|g| g.ln())),
                Quantity::Curvature => out.extend(geo.kappa.iter()),
                Quantity::SurfaceLaplacian(f) => {
                    let vals: Vec<f64> = pts.iter().map(|p| f(p[0], p[1])).collect();
                    out.extend(geo.laplacian(&vals));
                }
                Quantity::DirichletNeumann(_) | Quantity::JNormal => {
                    let dom = dom.as_ref().expect("domain built");
                    let vals = match q {
                        Quantity::DirichletNeumann(f) => dom.dirichlet_neumann(&dom.sample_boundary(|x, y| f(x, y)))?,
                        _ => dom.dirichlet_neumann(&curvature(dom))?,
                    };
                    let fr = fourier(dom.n_theta);
                    let c = fr.forward(&vals[b].values);
                    let center = dom.shape.center();
                    out.extend(pts.iter().map(|p| fr.eval(&c, (p[1] - center[1]).atan2(p[0] - center[0]))));
                }
                _ => unreachable!(),
            }
        }
        Ok(out)
    }

    fn central(&self, q: &Quantity, dt: f64, second: bool, at0: Option<&[f64]>) -> Result<Vec<f64>> {
        let p = self.eval(q, dt)?;
        let m = self.eval(q, -dt)?;
        Ok(if second {
            let z = at0.expect("value at t = 0");
            p.iter().zip(&m).zip(z).map(|((a, b), c)| (a - 2.0 * c + b) / (dt * dt)).collect()
        } else {
            p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * dt)).collect()
        })
    }

    /// Centered FD of a quantity along particle paths at dt and dt/2 (and dt/4 for the order).
    pub fn flow_fd(&self, q: &Quantity, dt: f64, second: bool) -> Result<FdEstimate> {
        let mismatch = self.consistency(dt)?;
        if mismatch > 1e-4 {
            return Err(Error::InconsistentFamily(mismatch));
        }
        let z = if second { Some(self.eval(q, 0.0)?) } else { None };
        let coarse = self.central(q, dt, second, z.as_deref())?;
        let fine = self.central(q, dt / 2.0, second, z.as_deref())?;
        let finest = self.central(q, dt / 4.0, second, z.as_deref())?;
        let d1 = max_diff(&coarse, &fine);
        let d2 = max_diff(&fine, &finest);
        let self_order = if d1 > 0.0 && d2 > 0.0 { Some((d1 / d2).log2()) } else { None };
        let extrapolated = coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect();
        Ok(FdEstimate { dt, coarse, fine, extrapolated, self_order })
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Outcome of comparing one formula with the flow oracle.
#[derive(Clone, Debug)]
pub struct FormulaCheck {
    pub id: String,
    pub error_coarse: f64,
    pub error_fine: f64,
    /// Observed order log₂(e(dt)/e(dt/2)); None when both errors are at round-off.
    pub order: Option<f64>,
    pub terminal_relative: f64,
    pub scale: f64,
}

impl FormulaCheck {
    pub fn passes(&self, min_order: f64, max_rel: f64) -> bool {
        let order_ok = match self.order {
            Some(p) => p >= min_order,
            None => true,
        };
        order_ok && self.terminal_relative < max_rel
    }
}

/// Errors below this relative level are treated as exact (round-off floor).
const ROUNDOFF_FLOOR: f64 = 1e-11;

fn compare(id: &str, est: &FdEstimate, formula: &[f64]) -> FormulaCheck {
    let scale = max_abs(formula).max(1e-300);
    let ec = max_diff(&est.coarse, formula);
    let ef = max_diff(&est.fine, formula);
    let order = if ec / scale > ROUNDOFF_FLOOR && ef / scale > ROUNDOFF_FLOOR { Some((ec / ef).log2()) } else { None };
    FormulaCheck {
        id: id.to_string(),
        error_coarse: ec,
        error_fine: ef,
        order,
        terminal_relative: if max_abs(formula) < 1e-12 { ef } else { ef / scale },
        scale: max_abs(formula),
    }
}

fn flatten(b: &[BoundaryScalar]) -> Vec<f64> {
    b.iter().flat_map(|x| x.values.iter().cloned()).collect()
}

/// Formula identifiers understood by [`check_formula`].
pub const FORMULAS: [&str; 10] = [
    "dt_normal",
    "dt_surface_measure",
    "dt_curvature_k1",
    "dt_curvature_k2",
    "dt2_curvature",
    "dt_J",
    "commutator_H",
    "commutator_N",
    "commutator_inv_laplace",
    "commutator_surface_laplace",
];

/// Test data used by the commutator checks.
pub fn default_test_functions() -> (SpatialFn, SpatialFn) {
    let f: SpatialFn = Arc::new(|x, y| x * x * x - 2.0 * x * y * y + 0.5 * y * y + 0.3 * x);
    let g: SpatialFn = Arc::new(|x, y| 1.0 + x * x - 0.5 * x * y + 0.2 * y);
    (f, g)
}

fn grad_fd(f: &SpatialFn, x: f64, y: f64) -> [f64; 2] {
    let h = 1e-3;
    let d = |dx: f64, dy: f64| f(x + dx, y + dy);
    [
        (-d(2.0 * h, 0.0) + 8.0 * d(h, 0.0) - 8.0 * d(-h, 0.0) + d(-2.0 * h, 0.0)) / (12.0 * h),
        (-d(0.0, 2.0 * h) + 8.0 * d(0.0, h) - 8.0 * d(0.0, -h) + d(0.0, -2.0 * h)) / (12.0 * h),
    ]
}

/// Material derivative v·∇f of a steady spatial function.
fn material(field: &Arc<dyn VelocityField>, f: &SpatialFn) -> SpatialFn {
    let field = field.clone();
    let f = f.clone();
    Arc::new(move |x, y| {
        let v = field.velocity([x, y]);
        let g = grad_fd(&f, x, y);
        v[0] * g[0] + v[1] * g[1]
    })
}

/// Compare one evaluator with the flow oracle. `f` is used by the boundary commutators and
/// `g` by the inverse-Laplacian commutator.
pub fn check_formula(family: &FlowFamily, id: &str, dt: f64, f: &SpatialFn, g: &SpatialFn) -> Result<FormulaCheck> {
    let snap = family.snapshot()?;
    let dom = &*snap.domain;
    match id {
        "dt_normal" => {
            let est = family.flow_fd(&Quantity::Normal, dt, false)?;
            let d = snap.dt_normal();
            let mut flat: Vec<f64> = Vec::new();
            for b in &d {
                flat.extend(&b.x);
                flat.extend(&b.y);
            }
            Ok(compare(id, &est, &flat))
        }
        "dt_surface_measure" => {
            let est = family.flow_fd(&Quantity::LogSurfaceMeasure, dt, false)?;
            Ok(compare(id, &est, &flatten(&snap.dt_surface_measure())))
        }
        "dt_curvature_k1" | "dt_curvature_k2" => {
            let est = family.flow_fd(&Quantity::Curvature, dt, false)?;
            let form = if id.ends_with("k1") { snap.dt_curvature_k1() } else { snap.dt_curvature_k2() };
            Ok(compare(id, &est, &flatten(&form)))
        }
        "dt2_curvature" | "dt2_curvature_transcribed" => {
            let est = family.flow_fd(&Quantity::Curvature, dt, true)?;
            let form = if id == "dt2_curvature" { snap.dt2_curvature()? } else { snap.dt2_curvature_transcribed()? };
            Ok(compare(id, &est, &flatten(&form)))
        }
        "dt_J" => {
            let est = family.flow_fd(&Quantity::J, dt, false)?;
            let dj = snap.dt_j()?;
            let mut flat = dj.x.values.clone();
            flat.extend(&dj.y.values);
            Ok(compare(id, &est, &flat))
        }
        "commutator_H" => {
            let est = family.flow_fd(&Quantity::HarmonicExtension(f.clone()), dt, false)?;
            let df = material(&family.field, f);
            let h_df = dom.harmonic_extension(&dom.sample_boundary(|x, y| df(x, y)))?;
            let lhs = shift(&est, &h_df.values);
            let rhs = snap.commutator_h(&dom.sample_boundary(|x, y| f(x, y)))?;
            Ok(compare(id, &lhs, &rhs.values))
        }
        "commutator_inv_laplace" => {
            let est = family.flow_fd(&Quantity::InverseLaplacian(g.clone()), dt, false)?;
            let dg = material(&family.field, g);
            let inv_dg = dom.poisson_zero_dirichlet(&dom.sample(|x, y| dg(x, y)))?;
            let lhs = shift(&est, &inv_dg.values);
            let rhs = snap.commutator_inv_laplace(&dom.sample(|x, y| g(x, y)))?;
            Ok(compare(id, &lhs, &rhs.values))
        }
        "commutator_N" => {
            let est = family.flow_fd(&Quantity::DirichletNeumann(f.clone()), dt, false)?;
            let df = material(&family.field, f);
            let n_df = dom.dirichlet_neumann(&dom.sample_boundary(|x, y| df(x, y)))?;
            let lhs = shift(&est, &flatten(&n_df));
            let rhs = snap.commutator_dn(&dom.sample_boundary(|x, y| f(x, y)))?;
            Ok(compare(id, &lhs, &flatten(&rhs)))
        }
        "commutator_surface_laplace" => {
            let est = family.flow_fd(&Quantity::SurfaceLaplacian(f.clone()), dt, false)?;
            let df = material(&family.field, f);
            let bd = dom.sample_boundary(|x, y| df(x, y));
            let lap_df = surface_laplacian_all(dom, &bd);
            let lhs = shift(&est, &flatten(&lap_df));
            let rhs = snap.commutator_surface_laplace(&dom.sample_boundary(|x, y| f(x, y)));
            Ok(compare(id, &lhs, &flatten(&rhs)))
        }
        other => Err(Error::Invalid(format!("unknown formula id {other}"))),
    }
}

fn shift(est: &FdEstimate, sub: &[f64]) -> FdEstimate {
    let s = |v: &[f64]| v.iter().zip(sub).map(|(a, b)| a - b).collect::<Vec<f64>>();
    FdEstimate {
        dt: est.dt,
        coarse: s(&est.coarse),
        fine: s(&est.fine),
        extrapolated: s(&est.extrapolated),
        self_order: est.self_order,
    }
}

/// Commutator residual ‖LHS − RHS‖ with the oracle's order report.
pub fn commutator_residual(family: &FlowFamily, which: &str, f: &SpatialFn, dt: f64) -> Result<FormulaCheck> {
    let id = match which {
        "H" => "commutator_H",
        "N" => "commutator_N",
        "inv_laplace" => "commutator_inv_laplace",
        "surface_laplace" => "commutator_surface_laplace",
        other => return Err(Error::Invalid(format!("unknown commutator {other}"))),
    };
    check_formula(family, id, dt, f, f)
}

/// The ellipse + shear family used throughout the formula suite.
pub fn ellipse_shear_family(n_theta: usize, n_r: usize) -> Result<FlowFamily> {
    Ok(FlowFamily::new(
        Shape::Disk(crate::geometry::StarCurve::ellipse(1.2, 1.0, n_theta)?),
        n_r,
        Arc::new(Shear(1.0)),
    ))
}
