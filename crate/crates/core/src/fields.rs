//! Vector-field operators on Ω: pressure form, surface-tension force, 𝒜, ℛ₀, Hodge splits.

use crate::error::{Error, Result};
use crate::geometry::BoundaryScalar;
use crate::laplace::{InteriorField, SpectralDomain};

/// Cartesian vector field on a spectral domain.
#[derive(Clone, Debug)]
pub struct VectorField2 {
    pub x: InteriorField,
    pub y: InteriorField,
}

impl VectorField2 {
    pub fn new(x: InteriorField, y: InteriorField) -> Self {
        VectorField2 { x, y }
    }

    pub fn zeros(dom: &SpectralDomain) -> Self {
        VectorField2 { x: dom.zeros(), y: dom.zeros() }
    }

    pub fn sample(dom: &SpectralDomain, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let pts = dom.points();
        let vals: Vec<[f64; 2]> = pts.iter().map(|p| f(p[0], p[1])).collect();
        VectorField2 {
            x: dom.field(vals.iter().map(|v| v[0]).collect()),
            y: dom.field(vals.iter().map(|v| v[1]).collect()),
        }
    }

    pub fn gradient(dom: &SpectralDomain, u: &InteriorField) -> Self {
        let [x, y] = dom.gradient(u);
        VectorField2 { x, y }
    }

    pub fn add(&self, o: &Self) -> Self {
        VectorField2 { x: self.x.zip(&o.x, |a, b| a + b), y: self.y.zip(&o.y, |a, b| a + b) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        VectorField2 { x: self.x.zip(&o.x, |a, b| a - b), y: self.y.zip(&o.y, |a, b| a - b) }
    }

    pub fn scale(&self, c: f64) -> Self {
        VectorField2 { x: self.x.map(|a| c * a), y: self.y.map(|a| c * a) }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }

    pub fn domain_id(&self) -> u64 {
        self.x.domain_id
    }

    /// Pointwise value at grid index p.
    pub fn at(&self, p: usize) -> [f64; 2] {
        [self.x.values[p], self.y.values[p]]
    }
}

fn check(dom: &SpectralDomain, v: &VectorField2) -> Result<()> {
    dom.check(&v.x)?;
    dom.check(&v.y)
}

/// L² inner product ∫ u·w dx.
pub fn inner(dom: &SpectralDomain, u: &VectorField2, w: &VectorField2) -> f64 {
    dom.inner_product(&u.x, &w.x) + dom.inner_product(&u.y, &w.y)
}

pub fn l2_norm_sq(dom: &SpectralDomain, u: &VectorField2) -> f64 {
    inner(dom, u, u)
}

/// Velocity gradient, `d[i][j] = ∂_j v^i`.
pub fn jacobian(dom: &SpectralDomain, v: &VectorField2) -> [[InteriorField; 2]; 2] {
    let [a, b] = dom.gradient(&v.x);
    let [c, d] = dom.gradient(&v.y);
    [[a, b], [c, d]]
}

/// tr(Dv Dw) = Σ ∂_j v^i ∂_i w^j, symmetrised in (v, w).
pub fn trace_product(dom: &SpectralDomain, v: &VectorField2, w: &VectorField2) -> InteriorField {
    let dv = jacobian(dom, v);
    let dw = jacobian(dom, w);
    let n = dom.npts();
    let vals = (0..n)
        .map(|p| {
            let mut a = 0.0;
            let mut b = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    a += dv[i][j].values[p] * dw[j][i].values[p];
                    b += dw[i][j].values[p] * dv[j][i].values[p];
                }
            }
            0.5 * (a + b)
        })
        .collect();
    dom.field(vals)
}

/// p_{v,w}: −Δp = tr(Dv Dw), p = 0 on ∂Ω.
pub fn pressure_bilinear(dom: &SpectralDomain, v: &VectorField2, w: &VectorField2) -> Result<InteriorField> {
    check(dom, v)?;
    check(dom, w)?;
    let g = trace_product(dom, v, w).map(|a| -a);
    dom.poisson_zero_dirichlet(&g)
}

/// Curvature of every boundary as fluid-side traces.
pub fn curvature(dom: &SpectralDomain) -> Vec<BoundaryScalar> {
    dom.boundaries.iter().map(|b| BoundaryScalar::new(b.tag, b.geo.kappa.clone())).collect()
}

/// κ_ℋ, the harmonic extension of the curvature.
pub fn curvature_extension(dom: &SpectralDomain) -> Result<InteriorField> {
    dom.harmonic_extension(&curvature(dom))
}

/// J = ∇κ_ℋ.
pub fn curvature_force_j(dom: &SpectralDomain) -> Result<VectorField2> {
    Ok(VectorField2::gradient(dom, &curvature_extension(dom)?))
}

/// w⊥ = w·N on each boundary.
pub fn normal_trace(dom: &SpectralDomain, w: &VectorField2) -> Vec<BoundaryScalar> {
    dom.boundaries
        .iter()
        .map(|b| {
            let vals = (0..dom.n_theta)
                .map(|j| {
                    let p = j * dom.n_r + b.row;
                    w.x.values[p] * b.geo.normal[j][0] + w.y.values[p] * b.geo.normal[j][1]
                })
                .collect();
            BoundaryScalar::new(b.tag, vals)
        })
        .collect()
}

/// w^⊤ = w·T on each boundary.
pub fn tangential_trace(dom: &SpectralDomain, w: &VectorField2) -> Vec<BoundaryScalar> {
    dom.boundaries
        .iter()
        .map(|b| {
            let vals = (0..dom.n_theta)
                .map(|j| {
                    let p = j * dom.n_r + b.row;
                    w.x.values[p] * b.geo.tangent[j][0] + w.y.values[p] * b.geo.tangent[j][1]
                })
                .collect();
            BoundaryScalar::new(b.tag, vals)
        })
        .collect()
}

/// Δ_∂Ω applied on each boundary.
pub fn surface_laplacian_all(dom: &SpectralDomain, f: &[BoundaryScalar]) -> Vec<BoundaryScalar> {
    dom.boundaries.iter().zip(f).map(|(b, v)| BoundaryScalar::new(b.tag, b.geo.laplacian(&v.values))).collect()
}

/// ∂_s applied on each boundary.
pub fn d_ds_all(dom: &SpectralDomain, f: &[BoundaryScalar]) -> Vec<BoundaryScalar> {
    dom.boundaries.iter().zip(f).map(|(b, v)| BoundaryScalar::new(b.tag, b.geo.d_ds(&v.values))).collect()
}

/// 𝒜w = −∇ℋ(Δ_∂Ω w⊥).
pub fn op_a(dom: &SpectralDomain, w_perp: &[BoundaryScalar]) -> Result<VectorField2> {
    let lap: Vec<BoundaryScalar> = surface_laplacian_all(dom, w_perp).iter().map(|b| b.map(|a| -a)).collect();
    Ok(VectorField2::gradient(dom, &dom.harmonic_extension(&lap)?))
}

/// (𝒜w)⊥ = −𝒩(Δ_∂Ω w⊥), without forming the interior field.
pub fn op_a_trace(dom: &SpectralDomain, w_perp: &[BoundaryScalar]) -> Result<Vec<BoundaryScalar>> {
    let lap: Vec<BoundaryScalar> = surface_laplacian_all(dom, w_perp).iter().map(|b| b.map(|a| -a)).collect();
    dom.dirichlet_neumann(&lap)
}

/// −∇_N p_{v,v} on each boundary.
pub fn rt_weight(dom: &SpectralDomain, v: &VectorField2) -> Result<Vec<BoundaryScalar>> {
    let p = pressure_bilinear(dom, v, v)?;
    Ok(dom.normal_derivative(&p).iter().map(|b| b.map(|a| -a)).collect())
}

fn weighted(weight: &[BoundaryScalar], w_perp: &[BoundaryScalar]) -> Vec<BoundaryScalar> {
    weight.iter().zip(w_perp).map(|(a, b)| a.zip(b, |x, y| x * y)).collect()
}

/// ℛ₀(v)w = ∇ℋ((−∇_N p_{v,v}) w⊥).
pub fn op_r0(dom: &SpectralDomain, v: &VectorField2, w_perp: &[BoundaryScalar]) -> Result<VectorField2> {
    let a = rt_weight(dom, v)?;
    Ok(VectorField2::gradient(dom, &dom.harmonic_extension(&weighted(&a, w_perp))?))
}

/// (ℛ₀(v)w)⊥ given a precomputed weight −∇_N p_{v,v}.
pub fn op_r0_trace_with(dom: &SpectralDomain, weight: &[BoundaryScalar], w_perp: &[BoundaryScalar]) -> Result<Vec<BoundaryScalar>> {
    dom.dirichlet_neumann(&weighted(weight, w_perp))
}

/// ω = ∂_x v_y − ∂_y v_x.
pub fn vorticity(dom: &SpectralDomain, v: &VectorField2) -> Result<InteriorField> {
    check(dom, v)?;
    let gx = dom.gradient(&v.x);
    let gy = dom.gradient(&v.y);
    Ok(gy[0].zip(&gx[1], |a, b| a - b))
}

pub fn divergence(dom: &SpectralDomain, v: &VectorField2) -> InteriorField {
    dom.divergence(&v.x, &v.y)
}

/// u = v − ∇p with ∇·v = 0 and p = 0 on ∂Ω.
pub fn hodge_decompose(dom: &SpectralDomain, u: &VectorField2) -> Result<(VectorField2, InteriorField)> {
    check(dom, u)?;
    let div = divergence(dom, u).map(|a| -a);
    let p = dom.poisson_zero_dirichlet(&div)?;
    let v = u.add(&VectorField2::gradient(dom, &p));
    Ok((v, p))
}

/// v = v_r + v_ir with v_ir = ∇ℋ𝒩⁻¹(v⊥) and v_r⊥ = 0.
pub fn rotational_split(dom: &SpectralDomain, v: &VectorField2) -> Result<(VectorField2, VectorField2)> {
    check(dom, v)?;
    let mut vn = normal_trace(dom, v);
    // remove the discretisation-level net flux so the data lie in the range of 𝒩
    let mean = dom.boundary_integral(&vn) / dom.perimeter();
    let scale = vn.iter().map(|b| b.max_abs()).fold(0.0, f64::max);
    if mean.abs() > 1e-6 * scale.max(1e-300) {
        return Err(Error::Invalid(format!("field is not divergence free: net flux density {mean:.3e}")));
    }
    for b in vn.iter_mut() {
        b.values.iter_mut().for_each(|a| *a -= mean);
    }
    let phi = dom.dn_inverse(&vn)?;
    let v_ir = VectorField2::gradient(dom, &dom.harmonic_extension(&phi)?);
    Ok((v.sub(&v_ir), v_ir))
}

/// Σ_ij A_ij B_ij for 2×2 fields of matrices.
pub fn frobenius(a: &[[InteriorField; 2]; 2], b: &[[InteriorField; 2]; 2], p: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += a[i][j].values[p] * b[i][j].values[p];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StarCurve;

    #[test]
    fn rigid_rotation_pressure() {
        let d = SpectralDomain::disk(StarCurve::circle(1.0, 32).unwrap(), 12).unwrap();
        let om = 0.7;
        let v = VectorField2::sample(&d, |x, y| [-om * y, om * x]);
        let p = pressure_bilinear(&d, &v, &v).unwrap();
        let ex = d.sample(|x, y| 0.5 * om * om * (x * x + y * y - 1.0));
        for k in 0..d.npts() {
            assert!((p.values[k] - ex.values[k]).abs() < 1e-12);
        }
        let w = vorticity(&d, &v).unwrap();
        assert!(w.values.iter().all(|a| (a - 2.0 * om).abs() < 1e-12));
    }
}
