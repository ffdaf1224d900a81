use capeuler::fields::{
    d_ds_all, divergence, hodge_decompose, inner, normal_trace, op_a, pressure_bilinear, rotational_split, VectorField2,
};
use capeuler::geometry::{make_star_curve, AnnulusShape, BoundaryScalar, StarCurve};
use capeuler::kinematics::{CubicStream, FlowFamily};
use capeuler::{Shape, SpectralDomain};
use proptest::prelude::*;
use std::sync::Arc;

fn star(a2: f64, a3: f64) -> SpectralDomain {
    SpectralDomain::disk(make_star_curve(&[(2, a2), (3, a3)], 1.0, 64).unwrap(), 16).unwrap()
}

fn annulus(a3: f64) -> SpectralDomain {
    let outer = make_star_curve(&[(3, a3)], 2.0, 64).unwrap();
    let inner = StarCurve::circle(1.0, 64).unwrap();
    SpectralDomain::annulus(AnnulusShape::new(inner, outer).unwrap(), 16).unwrap()
}

/// Band-limited boundary data Σ c_k cos kθ + s_k sin kθ on every boundary.
fn data(dom: &SpectralDomain, c: &[f64]) -> Vec<BoundaryScalar> {
    dom.boundaries
        .iter()
        .enumerate()
        .map(|(b, info)| {
            let vals = dom
                .theta()
                .iter()
                .map(|t| {
                    c.chunks(2)
                        .enumerate()
                        .map(|(k, p)| {
                            let kf = (k + 1 + b) as f64;
                            p[0] * (kf * t).cos() + p[1] * (kf * t).sin()
                        })
                        .sum()
                })
                .collect();
            BoundaryScalar::new(info.tag, vals)
        })
        .collect()
}

fn pair(dom: &SpectralDomain, f: &[BoundaryScalar], g: &[BoundaryScalar]) -> f64 {
    let p: Vec<BoundaryScalar> = f.iter().zip(g).map(|(a, b)| a.zip(b, |x, y| x * y)).collect();
    dom.boundary_integral(&p)
}

fn field(dom: &SpectralDomain, c: &[f64]) -> VectorField2 {
    VectorField2::sample(dom, |x, y| {
        [c[0] + c[1] * x * y + c[2] * y * y * x, c[3] * x - c[4] * y * y + c[5] * (x + y).sin()]
    })
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pressure_form_is_symmetric(a2 in -0.1f64..0.1, c in coeffs(6), d in coeffs(6)) {
        let dom = star(a2, 0.05);
        let (v, w) = (field(&dom, &c), field(&dom, &d));
        let p = pressure_bilinear(&dom, &v, &w).unwrap();
        let q = pressure_bilinear(&dom, &w, &v).unwrap();
        let scale = p.max_abs().max(1e-12);
        prop_assert!(p.zip(&q, |a, b| a - b).max_abs() < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn dn_is_symmetric_and_nonnegative(a2 in -0.1f64..0.1, a3 in -0.1f64..0.1, c in coeffs(8), d in coeffs(8)) {
        for dom in [star(a2, a3), annulus(a3)] {
            let (f, g) = (data(&dom, &c), data(&dom, &d));
            let nf = dom.dirichlet_neumann(&f).unwrap();
            let ng = dom.dirichlet_neumann(&g).unwrap();
            let (fg, gf) = (pair(&dom, &f, &ng), pair(&dom, &g, &nf));
            let scale = pair(&dom, &f, &nf).abs() + pair(&dom, &g, &ng).abs();
            prop_assert!((fg - gf).abs() < 1e-8 * scale.max(1e-12));
            prop_assert!(pair(&dom, &f, &nf) >= -1e-10);
        }
    }

    #[test]
    fn a_quadratic_form(a2 in -0.1f64..0.1, c in coeffs(8)) {
        let dom = star(a2, 0.05);
        // w = ∇ℋh, so w⊥ = 𝒩h
        let h = data(&dom, &c);
        let w = VectorField2::gradient(&dom, &dom.harmonic_extension(&h).unwrap());
        let wp = dom.dirichlet_neumann(&h).unwrap();
        let aw = op_a(&dom, &wp).unwrap();
        let lhs = inner(&dom, &aw, &w);
        let ds = d_ds_all(&dom, &wp);
        let rhs = pair(&dom, &ds, &ds);
        prop_assert!(rhs >= 0.0);
        prop_assert!((lhs - rhs).abs() < 1e-6 * rhs.max(1e-12), "{} {}", lhs, rhs);
    }

    #[test]
    fn curvature_rate_formulas_agree(a2 in -0.1f64..0.1, c in coeffs(4)) {
        let fam = FlowFamily::new(
            Shape::Disk(make_star_curve(&[(2, a2), (3, 0.05)], 1.0, 128).unwrap()),
            16,
            Arc::new(CubicStream([c[0], c[1], c[2], c[3]])),
        );
        let snap = fam.snapshot().unwrap();
        let (k1, k2) = (snap.dt_curvature_k1(), snap.dt_curvature_k2());
        let scale = k1[0].max_abs().max(1e-12);
        let diff = k1[0].zip(&k2[0], |a, b| a - b).max_abs();
        prop_assert!(diff < 1e-8 * scale.max(1.0), "{}", diff);
    }

    #[test]
    fn hodge_round_trip(a2 in -0.1f64..0.1, c in coeffs(6)) {
        let dom = star(a2, 0.05);
        let u = field(&dom, &c);
        let (w, p) = hodge_decompose(&dom, &u).unwrap();
        let back = w.sub(&VectorField2::gradient(&dom, &p));
        prop_assert!(back.sub(&u).max_abs() < 1e-12 * u.max_abs().max(1.0));
        prop_assert!(divergence(&dom, &w).max_abs() < 1e-7 * u.max_abs().max(1.0));
        let tr = dom.trace(&p);
        prop_assert!(tr.iter().all(|b| b.max_abs() < 1e-12));
    }

    #[test]
    fn inverse_laplacian_is_self_adjoint(a3 in -0.1f64..0.1, c in coeffs(4)) {
        let dom = star(0.05, a3);
        let a = dom.sample(|x, y| c[0] + c[1] * x * y + (c[2] * x).cos());
        let b = dom.sample(|x, y| c[3] * y + x * x);
        let ia = dom.poisson_zero_dirichlet(&a).unwrap();
        let ib = dom.poisson_zero_dirichlet(&b).unwrap();
        let (l, r) = (dom.inner_product(&ia, &b), dom.inner_product(&a, &ib));
        prop_assert!((l - r).abs() < 1e-8 * l.abs().max(r.abs()).max(1e-12));
    }

    #[test]
    fn dn_inverse_round_trip(a2 in -0.1f64..0.1, c in coeffs(8)) {
        for dom in [star(a2, 0.05), annulus(a2)] {
            let f = dom.dirichlet_neumann(&data(&dom, &c)).unwrap();
            let g = dom.dn_inverse(&f).unwrap();
            let back = dom.dirichlet_neumann(&g).unwrap();
            let scale = f.iter().map(|b| b.max_abs()).fold(0.0, f64::max).max(1e-12);
            for (x, y) in back.iter().zip(&f) {
                prop_assert!(x.zip(y, |a, b| a - b).max_abs() < 1e-7 * scale);
            }
        }
    }

    #[test]
    fn rotational_split_has_tangential_part(a2 in -0.1f64..0.1, c in coeffs(6)) {
        let dom = star(a2, 0.05);
        let (v, _) = hodge_decompose(&dom, &field(&dom, &c)).unwrap();
        let (vr, vi) = rotational_split(&dom, &v).unwrap();
        prop_assert!(vr.add(&vi).sub(&v).max_abs() < 1e-12 * v.max_abs().max(1.0));
        let n = normal_trace(&dom, &vr);
        prop_assert!(n.iter().all(|b| b.max_abs() < 1e-6 * v.max_abs().max(1.0)));
    }
}
