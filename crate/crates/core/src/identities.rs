//! Numerical identity checks for the Dirichlet–Neumann calculus.

use crate::error::Result;
use crate::fields::{d_ds_all, jacobian, surface_laplacian_all, VectorField2};
use crate::geometry::BoundaryScalar;
use crate::laplace::SpectralDomain;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub name: String,
    /// ‖lhs − rhs‖_{L²(∂Ω)}
    pub absolute: f64,
    /// absolute / ‖lhs‖_{L²(∂Ω)}
    pub relative: f64,
}

fn l2(dom: &SpectralDomain, f: &[BoundaryScalar]) -> f64 {
    let sq: Vec<BoundaryScalar> = f.iter().map(|b| b.map(|x| x * x)).collect();
    dom.boundary_integral(&sq).max(0.0).sqrt()
}

fn combine(a: &[BoundaryScalar], b: &[BoundaryScalar], f: impl Fn(f64, f64) -> f64) -> Vec<BoundaryScalar> {
    a.iter().zip(b).map(|(x, y)| x.zip(y, &f)).collect()
}

fn residual(dom: &SpectralDomain, name: &str, lhs: &[BoundaryScalar], rhs: &[BoundaryScalar]) -> IdentityResidual {
    let diff = combine(lhs, rhs, |a, b| a - b);
    let absolute = l2(dom, &diff);
    let scale = l2(dom, lhs);
    IdentityResidual { name: name.into(), absolute, relative: if scale > 0.0 { absolute / scale } else { absolute } }
}

/// 𝒩(fg) = f𝒩g + g𝒩f − 2∇_NΔ⁻¹(∇f_ℋ·∇g_ℋ).
pub fn product_rule(dom: &SpectralDomain, f: &[BoundaryScalar], g: &[BoundaryScalar]) -> Result<IdentityResidual> {
    let fg = combine(f, g, |a, b| a * b);
    let lhs = dom.dirichlet_neumann(&fg)?;
    let nf = dom.dirichlet_neumann(f)?;
    let ng = dom.dirichlet_neumann(g)?;
    let [fx, fy] = dom.gradient(&dom.harmonic_extension(f)?);
    let [gx, gy] = dom.gradient(&dom.harmonic_extension(g)?);
    let src = fx.zip(&gx, |a, b| a * b).zip(&fy.zip(&gy, |a, b| a * b), |a, b| a + b);
    let corr = dom.normal_derivative(&dom.poisson_zero_dirichlet(&src)?);
    let rhs: Vec<BoundaryScalar> = (0..f.len())
        .map(|b| {
            let vals = (0..dom.n_theta)
                .map(|j| {
                    f[b].values[j] * ng[b].values[j] + g[b].values[j] * nf[b].values[j] - 2.0 * corr[b].values[j]
                })
                .collect();
            BoundaryScalar::new(f[b].tag, vals)
        })
        .collect();
    Ok(residual(dom, "product_rule", &lhs, &rhs))
}

/// (−Δ_∂Ω − 𝒩²)f = κ𝒩f + 2∇_NΔ⁻¹(DN_ℋ·D²f_ℋ) − 𝒩(N)·(𝒩(f)N + ∇^⊤f).
pub fn dn_square_identity(dom: &SpectralDomain, f: &[BoundaryScalar]) -> Result<IdentityResidual> {
    let nf = dom.dirichlet_neumann(f)?;
    let nnf = dom.dirichlet_neumann(&nf)?;
    let lap = surface_laplacian_all(dom, f);
    let lhs = combine(&lap, &nnf, |a, b| -a - b);

    let comp = |c: usize| -> Vec<BoundaryScalar> {
        dom.boundaries.iter().map(|b| BoundaryScalar::new(b.tag, b.geo.normal.iter().map(|n| n[c]).collect())).collect()
    };
    let (nx, ny) = (comp(0), comp(1));
    let nh = VectorField2::new(dom.harmonic_extension(&nx)?, dom.harmonic_extension(&ny)?);
    let fh = dom.harmonic_extension(f)?;
    let hess = jacobian(dom, &VectorField2::gradient(dom, &fh));
    let dn = jacobian(dom, &nh);
    let mut src = dom.zeros();
    for i in 0..2 {
        for j in 0..2 {
            for (s, (a, b)) in src.values.iter_mut().zip(dn[i][j].values.iter().zip(&hess[i][j].values)) {
                *s += a * b;
            }
        }
    }
    let corr = dom.normal_derivative(&dom.poisson_zero_dirichlet(&src)?);
    let (nnx, nny) = (dom.dirichlet_neumann(&nx)?, dom.dirichlet_neumann(&ny)?);
    let fs = d_ds_all(dom, f);
    let rhs: Vec<BoundaryScalar> = dom
        .boundaries
        .iter()
        .enumerate()
        .map(|(b, info)| {
            let g = &info.geo;
            let vals = (0..dom.n_theta)
                .map(|j| {
                    let (n, t) = (g.normal[j], g.tangent[j]);
                    let w = [nf[b].values[j] * n[0] + fs[b].values[j] * t[0], nf[b].values[j] * n[1] + fs[b].values[j] * t[1]];
                    g.kappa[j] * nf[b].values[j] + 2.0 * corr[b].values[j]
                        - (nnx[b].values[j] * w[0] + nny[b].values[j] * w[1])
                })
                .collect();
            BoundaryScalar::new(info.tag, vals)
        })
        .collect();
    Ok(residual(dom, "dn_square_identity", &lhs, &rhs))
}

/// ∮ f𝒩f dS = ∫|∇f_ℋ|² dx.
pub fn energy_identity(dom: &SpectralDomain, f: &[BoundaryScalar]) -> Result<IdentityResidual> {
    let nf = dom.dirichlet_neumann(f)?;
    let lhs = dom.boundary_integral(&combine(f, &nf, |a, b| a * b));
    let [gx, gy] = dom.gradient(&dom.harmonic_extension(f)?);
    let rhs = dom.inner_product(&gx, &gx) + dom.inner_product(&gy, &gy);
    let absolute = (lhs - rhs).abs();
    Ok(IdentityResidual { name: "energy_identity".into(), absolute, relative: absolute / lhs.abs().max(1e-300) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DnSqrtGapRow {
    pub k: usize,
    /// ‖((−Δ_∂Ω)^{1/2} − 𝒩) cos kθ‖
    pub difference: f64,
    pub dn_norm: f64,
    pub sqrt_norm: f64,
    /// difference / dn_norm
    pub ratio: f64,
}

/// ((−Δ_∂Ω)^{1/2} − 𝒩) cos kθ on every boundary, in L²(∂Ω).
pub fn dn_sqrt_gap(dom: &SpectralDomain, ks: &[usize]) -> Result<Vec<DnSqrtGapRow>> {
    let theta = dom.theta().to_vec();
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let f: Vec<BoundaryScalar> = dom
            .boundaries
            .iter()
            .map(|b| BoundaryScalar::new(b.tag, theta.iter().map(|t| (k as f64 * t).cos()).collect()))
            .collect();
        let nf = dom.dirichlet_neumann(&f)?;
        let sq: Vec<BoundaryScalar> = dom
            .surface_spectra()
            .iter()
            .zip(&f)
            .map(|(sp, b)| BoundaryScalar::new(b.tag, sp.apply(&b.values, f64::sqrt)))
            .collect();
        let difference = l2(dom, &combine(&sq, &nf, |a, b| a - b));
        let dn_norm = l2(dom, &nf);
        rows.push(DnSqrtGapRow { k, difference, dn_norm, sqrt_norm: l2(dom, &sq), ratio: difference / dn_norm.max(1e-300) });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StarCurve;

    fn ellipse() -> SpectralDomain {
        SpectralDomain::disk(StarCurve::ellipse(1.2, 1.0, 64).unwrap(), 24).unwrap()
    }

    fn band(dom: &SpectralDomain, f: impl Fn(f64, f64) -> f64) -> Vec<BoundaryScalar> {
        dom.sample_boundary(f)
    }

    #[test]
    fn identities_on_ellipse() {
        let d = ellipse();
        let f = band(&d, |x, y| x * x * y - 0.3 * x + 0.2 * y * y);
        let g = band(&d, |x, y| 1.0 + x * y + 0.1 * x * x * x);
        assert!(product_rule(&d, &f, &g).unwrap().relative < 1e-6);
        assert!(dn_square_identity(&d, &f).unwrap().relative < 1e-6);
        assert!(energy_identity(&d, &f).unwrap().relative < 1e-8);
    }

    #[test]
    fn sqrt_gap_vanishes_on_circle() {
        let d = SpectralDomain::disk(StarCurve::circle(1.0, 64).unwrap(), 24).unwrap();
        for r in dn_sqrt_gap(&d, &[1, 4, 9]).unwrap() {
            assert!(r.difference < 1e-8 * r.dn_norm, "{r:?}");
        }
    }
}
