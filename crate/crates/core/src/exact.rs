//! Two explicit solutions: the rotating disk with compactly supported angular velocity and
//! the expanding/rotating annulus reduced to an ODE in (A, θ₁).

use crate::error::{Error, Result};
use crate::fields::{curvature, divergence, VectorField2};
use crate::geometry::StarCurve;
use crate::laplace::SpectralDomain;
use crate::spectral::{chebyshev, chebyshev_coefficients, clenshaw_curtis};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Angular-velocity profiles Θ(r).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// amp · exp(1 − 1/(1 − u²)), u = (2r − lo − hi)/(hi − lo), zero outside (lo, hi).
    Bump { lo: f64, hi: f64, amp: f64 },
    Constant { value: f64 },
    /// amp · exp(−((r − center)/width)²)
    Gaussian { center: f64, width: f64, amp: f64 },
}

impl Profile {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value,
            Profile::Bump { lo, hi, amp } => {
                let u = (2.0 * r - lo - hi) / (hi - lo);
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    amp * (1.0 - 1.0 / (1.0 - u * u)).exp()
                }
            }
            Profile::Gaussian { center, width, amp } => amp * (-((r - center) / width).powi(2)).exp(),
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Profile::Zero => None,
            Profile::Bump { lo, hi, .. } => Some((lo, hi)),
            _ => Some((0.0, f64::INFINITY)),
        }
    }
}

/// 8-point Gauss–Legendre nodes and weights on [−1, 1].
const GL8: [(f64, f64); 8] = [
    (-0.9602898564975363, 0.1012285362903763),
    (-0.7966664774136267, 0.2223810344533745),
    (-0.5255324099163290, 0.3137066458778873),
    (-0.1834346424956498, 0.3626837833783620),
    (0.1834346424956498, 0.3626837833783620),
    (0.5255324099163290, 0.3137066458778873),
    (0.7966664774136267, 0.2223810344533745),
    (0.9602898564975363, 0.1012285362903763),
];

/// Composite Gauss–Legendre quadrature.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let m = a + (p as f64 + 0.5) * h;
        for (x, w) in GL8 {
            s += w * f(m + 0.5 * h * x);
        }
    }
    0.5 * h * s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RotatingDiskSolution {
    pub profile: Profile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RotatingDiskReport {
    pub divergence: f64,
    pub euler_residual: f64,
    /// max − min of p − ε²κ on the boundary.
    pub boundary_residual: f64,
    pub vorticity_time_derivative: f64,
    pub rt_margin: f64,
}

impl RotatingDiskSolution {
    pub fn new(profile: Profile) -> Result<Self> {
        if let Profile::Bump { lo, hi, .. } = profile {
            if !(lo > 0.0 && hi < 1.0 && lo < hi) {
                return Err(Error::Invalid(format!("Θ support ({lo}, {hi}) must lie inside (0, 1)")));
            }
        }
        if let Profile::Gaussian { .. } | Profile::Constant { .. } = profile {
            // admitted for diagnostics; not compactly supported
        }
        Ok(RotatingDiskSolution { profile })
    }

    /// p(r) = −∫_r^1 r'Θ(r')² dr', so that p_r = rΘ² and p(1) = 0.
    pub fn pressure(&self, r: f64) -> f64 {
        let (lo, hi) = match self.profile.support() {
            None => return 0.0,
            Some((lo, hi)) => (lo.max(r), hi.min(1.0)),
        };
        -gauss_legendre(|s| s * self.profile.eval(s).powi(2), lo, hi, 64)
    }

    pub fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        let th = self.profile.eval(x.hypot(y));
        [-th * y, th * x]
    }

    /// Lagrangian map u(t, r₀, θ₀) = (r₀, θ₀ + tΘ(r₀)).
    pub fn lagrangian(&self, t: f64, r0: f64, theta0: f64) -> (f64, f64) {
        (r0, theta0 + t * self.profile.eval(r0))
    }

    /// Evaluate the solution on the unit disk with ε = 1.
    pub fn verify(&self, n_theta: usize, n_r: usize) -> Result<RotatingDiskReport> {
        let dom = Arc::new(SpectralDomain::disk(StarCurve::circle(1.0, n_theta)?, n_r)?);
        let v = VectorField2::sample(&dom, |x, y| self.velocity(x, y));
        let p = dom.sample(|x, y| self.pressure(x.hypot(y)));
        let div = divergence(&dom, &v).max_abs();
        let [px, py] = dom.gradient(&p);
        let [vxx, vxy] = dom.gradient(&v.x);
        let [vyx, vyy] = dom.gradient(&v.y);
        let mut res: f64 = 0.0;
        for i in 0..dom.npts() {
            let (a, b) = (v.x.values[i], v.y.values[i]);
            let rx = a * vxx.values[i] + b * vxy.values[i] + px.values[i];
            let ry = a * vyx.values[i] + b * vyy.values[i] + py.values[i];
            res = res.max(rx.abs()).max(ry.abs());
        }
        let tr = dom.trace(&p);
        let k = curvature(&dom);
        let diff: Vec<f64> = tr[0].values.iter().zip(&k[0].values).map(|(a, b)| a - b).collect();
        let spread = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - diff.iter().cloned().fold(f64::INFINITY, f64::min);
        // D_tω = v·∇ω for a steady field
        let w = crate::fields::vorticity(&dom, &v)?;
        let [wx, wy] = dom.gradient(&w);
        let dtw = (0..dom.npts()).map(|i| (v.x.values[i] * wx.values[i] + v.y.values[i] * wy.values[i]).abs()).fold(0.0, f64::max);
        let margin = crate::energies::rt_margin(&dom, &v)?;
        Ok(RotatingDiskReport {
            divergence: div,
            euler_residual: res,
            boundary_residual: spread,
            vorticity_time_derivative: dtw,
            rt_margin: margin,
        })
    }

    /// Chebyshev coefficient magnitudes on [0, 1] of Θ(r₀) and of the Cartesian Lagrangian
    /// component x(t, r₀, θ₀) = r₀ cos(θ₀ + tΘ(r₀)).
    pub fn radial_coefficients(&self, t: f64, theta0: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
        let (x, _) = chebyshev(m);
        let r: Vec<f64> = x.iter().map(|s| 0.5 * (s + 1.0)).collect();
        let th: Vec<f64> = r.iter().map(|&s| self.profile.eval(s)).collect();
        let ux: Vec<f64> = r.iter().map(|&s| s * (theta0 + t * self.profile.eval(s)).cos()).collect();
        let abs = |c: Vec<f64>| c.into_iter().map(f64::abs).collect();
        (abs(chebyshev_coefficients(&th)), abs(chebyshev_coefficients(&ux)))
    }
}

// ---- annulus ------------------------------------------------------------------------------

/// State of the annulus system: A, A', θ₁ and ω₁ = ∂_tθ₁ on a Chebyshev r₀ grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnnulusODEState {
    pub t: f64,
    pub a: f64,
    pub adot: f64,
    pub r0: Vec<f64>,
    pub theta1: Vec<f64>,
    pub omega1: Vec<f64>,
    pub r10: f64,
    pub r20: f64,
    pub eps: f64,
    #[serde(skip)]
    weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtSigns {
    pub pr_inner: f64,
    pub pr_outer: f64,
    /// min(p_r(r₁), −p_r(r₂)) for the zero-trace pressure p_{v,v}.
    pub margin: f64,
    pub satisfied: bool,
}

impl AnnulusODEState {
    pub fn new(r10: f64, r20: f64, a1: f64, theta0: &Profile, eps: f64, nodes: usize) -> Result<Self> {
        if !(r10 > 0.0 && r20 > r10) {
            return Err(Error::Invalid(format!("need 0 < r1 < r2, got {r10}, {r20}")));
        }
        if nodes < 2 {
            return Err(Error::Invalid("at least two r0 nodes".into()));
        }
        let m = nodes - 1;
        let (x, _) = chebyshev(m);
        let r0: Vec<f64> = x.iter().map(|s| 0.5 * (r10 + r20) + 0.5 * (r20 - r10) * s).collect();
        let w: Vec<f64> = clenshaw_curtis(m).iter().map(|w| 0.5 * (r20 - r10) * w).collect();
        let omega1 = r0.iter().map(|&r| theta0.eval(r)).collect();
        Ok(AnnulusODEState {
            t: 0.0,
            a: 0.0,
            adot: a1,
            theta1: vec![0.0; r0.len()],
            omega1,
            r0,
            r10,
            r20,
            eps,
            weights: w,
        })
    }

    fn ensure_weights(&mut self) {
        if self.weights.len() != self.r0.len() {
            let m = self.r0.len() - 1;
            self.weights = clenshaw_curtis(m).iter().map(|w| 0.5 * (self.r20 - self.r10) * w).collect();
        }
    }

    pub fn r1(&self) -> f64 {
        (self.r10 * self.r10 + 2.0 * self.a).sqrt()
    }

    pub fn r2(&self) -> f64 {
        (self.r20 * self.r20 + 2.0 * self.a).sqrt()
    }

    /// ∫_{r₁}^{r₂} rΘ² dr = ∫ r₀ ω₁² dr₀.
    fn swirl_integral(&self, omega: &[f64]) -> f64 {
        self.r0.iter().zip(omega).zip(&self.weights).map(|((r, w), q)| q * r * w * w).sum()
    }

    /// ∫ r³Θ² dr = ∫ r₀ (r₀² + 2A) ω₁² dr₀.
    fn swirl_energy(&self) -> f64 {
        self.r0
            .iter()
            .zip(&self.omega1)
            .zip(&self.weights)
            .map(|((r, w), q)| q * r * (r * r + 2.0 * self.a) * w * w)
            .sum()
    }

    /// A'' with the boundary pressure p = ε²κ (κ = 1/r₂ outside, −1/r₁ inside).
    fn accel(&self, a: f64, adot: f64, omega: &[f64]) -> Result<f64> {
        let q1 = self.r10 * self.r10 + 2.0 * a;
        let q2 = self.r20 * self.r20 + 2.0 * a;
        if q1 <= 0.0 {
            return Err(Error::Collapse(q1));
        }
        let log = 0.5 * (q2 / q1).ln();
        let e2 = self.eps * self.eps;
        let num = 0.5 * adot * adot * (1.0 / q1 - 1.0 / q2) + self.swirl_integral(omega) - e2 * (1.0 / q1.sqrt() + 1.0 / q2.sqrt());
        Ok(num / log)
    }

    /// (dA/dt, dA'/dt, dθ₁/dt, dω₁/dt).
    pub fn rhs(&self) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
        let mut s = self.clone();
        s.ensure_weights();
        s.rhs_at(s.a, s.adot, &s.omega1)
    }

    fn rhs_at(&self, a: f64, adot: f64, omega: &[f64]) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
        let acc = self.accel(a, adot, omega)?;
        let domega = self.r0.iter().zip(omega).map(|(r, w)| -2.0 * adot / (r * r + 2.0 * a) * w).collect();
        Ok((adot, acc, omega.to_vec(), domega))
    }

    /// Classical RK4 step.
    pub fn step(&self, dt: f64) -> Result<Self> {
        let mut s = self.clone();
        s.ensure_weights();
        let n = s.r0.len();
        let (a0, b0) = (s.a, s.adot);
        let th0 = s.theta1.clone();
        let om0 = s.omega1.clone();
        let k1 = s.rhs_at(a0, b0, &om0)?;
        let mid = |k: &(f64, f64, Vec<f64>, Vec<f64>), h: f64| -> (f64, f64, Vec<f64>) {
            (a0 + h * k.0, b0 + h * k.1, (0..n).map(|i| om0[i] + h * k.3[i]).collect())
        };
        let (a2, b2, o2) = mid(&k1, 0.5 * dt);
        let k2 = s.rhs_at(a2, b2, &o2)?;
        let (a3, b3, o3) = mid(&k2, 0.5 * dt);
        let k3 = s.rhs_at(a3, b3, &o3)?;
        let (a4, b4, o4) = mid(&k3, dt);
        let k4 = s.rhs_at(a4, b4, &o4)?;
        let c = dt / 6.0;
        s.a = a0 + c * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        s.adot = b0 + c * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        for i in 0..n {
            s.theta1[i] = th0[i] + c * (k1.2[i] + 2.0 * k2.2[i] + 2.0 * k3.2[i] + k4.2[i]);
            s.omega1[i] = om0[i] + c * (k1.3[i] + 2.0 * k2.3[i] + 2.0 * k3.3[i] + k4.3[i]);
        }
        s.t += dt;
        if s.r10 * s.r10 + 2.0 * s.a <= 0.0 {
            return Err(Error::Collapse(s.r10 * s.r10 + 2.0 * s.a));
        }
        Ok(s)
    }

    /// E₀ = πa₁² log(r₂/r₁) + π∫r³Θ² dr + 2πε²(r₁ + r₂).
    pub fn energy(&self) -> f64 {
        let mut s = self.clone();
        s.ensure_weights();
        PI * s.adot * s.adot * (s.r2() / s.r1()).ln() + PI * s.swirl_energy() + 2.0 * PI * s.eps * s.eps * (s.r1() + s.r2())
    }

    /// Radial derivative of p_{v,v} at both radii and the RT verdict.
    pub fn rt_signs(&self) -> RtSigns {
        let mut s = self.clone();
        s.ensure_weights();
        let (r1, r2) = (s.r1(), s.r2());
        let a1 = s.adot;
        let log = (r2 / r1).ln();
        let a2 = -(0.5 * a1 * a1 * (1.0 / (r1 * r1) - 1.0 / (r2 * r2)) + s.swirl_integral(&s.omega1)) / log;
        // r0 nodes run from r20 (index 0) to r10 (last)
        let th_out = s.omega1[0];
        let th_in = *s.omega1.last().unwrap();
        let pr = |r: f64, th: f64| a1 * a1 / r.powi(3) + r * th * th + a2 / r;
        let (pi, po) = (pr(r1, th_in), pr(r2, th_out));
        let margin = pi.min(-po);
        RtSigns { pr_inner: pi, pr_outer: po, margin, satisfied: pi > 0.0 && po < 0.0 }
    }

    /// ω(t, r(t, r₀)) = ∂_{r₀}(r²ω₁) / r₀, r² = r₀² + 2A.
    pub fn vorticity(&self) -> Vec<f64> {
        let m = self.r0.len() - 1;
        let (_, d) = chebyshev(m);
        let scale = 2.0 / (self.r20 - self.r10);
        let f: Vec<f64> = self.r0.iter().zip(&self.omega1).map(|(r, w)| (r * r + 2.0 * self.a) * w).collect();
        let mut df = vec![0.0; f.len()];
        d.apply(&f, &mut df);
        self.r0.iter().zip(&df).map(|(r, g)| scale * g / r).collect()
    }
}

/// One row of an annulus trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnnulusSample {
    pub t: f64,
    pub r1: f64,
    pub r2: f64,
    pub a: f64,
    pub a1: f64,
    pub e0: f64,
    pub rt: RtSigns,
}

#[derive(Clone, Debug)]
pub struct AnnulusTrajectory {
    pub samples: Vec<AnnulusSample>,
    pub final_state: AnnulusODEState,
}

impl AnnulusTrajectory {
    /// Linear-in-time lookup is not accurate enough for oracle comparisons; use cubic Hermite
    /// interpolation of (A, A').
    pub fn radii_at(&self, t: f64) -> (f64, f64) {
        let s = &self.samples;
        let i = match s.iter().position(|x| x.t >= t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => s.len() - 2,
        };
        let (p, q) = (&s[i], &s[(i + 1).min(s.len() - 1)]);
        let h = q.t - p.t;
        let a = if h == 0.0 {
            p.a
        } else {
            let u = (t - p.t) / h;
            let h00 = 2.0 * u.powi(3) - 3.0 * u * u + 1.0;
            let h10 = u.powi(3) - 2.0 * u * u + u;
            let h01 = -2.0 * u.powi(3) + 3.0 * u * u;
            let h11 = u.powi(3) - u * u;
            h00 * p.a + h10 * h * p.a1 + h01 * q.a + h11 * h * q.a1
        };
        let st = &self.final_state;
        ((st.r10 * st.r10 + 2.0 * a).sqrt(), (st.r20 * st.r20 + 2.0 * a).sqrt())
    }
}

fn sample(s: &AnnulusODEState) -> AnnulusSample {
    AnnulusSample { t: s.t, r1: s.r1(), r2: s.r2(), a: s.a, a1: s.adot, e0: s.energy(), rt: s.rt_signs() }
}

/// Fixed-step RK4 integration to time `t_end`.
pub fn annulus_integrate(init: &AnnulusODEState, t_end: f64, dt: f64) -> Result<AnnulusTrajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Invalid("dt must be positive and T non-negative".into()));
    }
    let steps = (t_end / dt).round() as usize;
    let h = if steps > 0 { t_end / steps as f64 } else { dt };
    let mut s = init.clone();
    s.ensure_weights();
    let mut out = vec![sample(&s)];
    for _ in 0..steps {
        s = s.step(h)?;
        out.push(sample(&s));
    }
    Ok(AnnulusTrajectory { samples: out, final_state: s })
}

/// θ₁(t, r₀) = Θ(0, r₀) ∫₀ᵗ r₀²/(r₀² + 2A) dt' by composite Simpson on the sampled A.
pub fn closed_form_theta1(traj: &AnnulusTrajectory, theta0: &Profile) -> Result<Vec<f64>> {
    let s = &traj.samples;
    let n = s.len() - 1;
    if n % 2 != 0 {
        return Err(Error::Invalid("Simpson quadrature needs an even number of steps".into()));
    }
    let h = if n > 0 { s[n].t / n as f64 } else { 0.0 };
    let st = &traj.final_state;
    Ok(st
        .r0
        .iter()
        .map(|&r| {
            let f = |k: usize| r * r / (r * r + 2.0 * s[k].a);
            let mut acc = 0.0;
            for k in 0..=n {
                let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(k);
            }
            theta0.eval(r) * acc * h / 3.0
        })
        .collect())
}

/// Θ(t, r) = ((r² − 2A)/r²) Θ(0, √(r² − 2A)).
pub fn closed_form_theta(theta0: &Profile, a: f64, r: f64) -> f64 {
    let q = r * r - 2.0 * a;
    q / (r * r) * theta0.eval(q.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_annulus_is_fixed() {
        let s = AnnulusODEState::new(1.0, 2.0, 0.0, &Profile::Zero, 0.0, 16).unwrap();
        let (a, b, c, d) = s.rhs().unwrap();
        assert_eq!(a, 0.0);
        assert_eq!(b, 0.0);
        assert!(c.iter().chain(&d).all(|x| *x == 0.0));
        let rt = s.rt_signs();
        assert_eq!(rt.margin, 0.0);
    }

    #[test]
    fn radial_acceleration_closed_form() {
        let a1 = 0.7;
        let s = AnnulusODEState::new(1.0, 2.0, a1, &Profile::Zero, 0.0, 16).unwrap();
        let (_, acc, _, _) = s.rhs().unwrap();
        let ex = 0.5 * a1 * a1 * (1.0 - 0.25) / 2f64.ln();
        assert!((acc - ex).abs() < 1e-14);
    }

    #[test]
    fn energy_conserved_with_swirl_and_tension() {
        let th = Profile::Gaussian { center: 1.5, width: 0.2, amp: 0.3 };
        let s = AnnulusODEState::new(1.0, 2.0, 0.4, &th, 0.3, 48).unwrap();
        let e0 = s.energy();
        let tr = annulus_integrate(&s, 0.5, 1e-3).unwrap();
        let e1 = tr.final_state.energy();
        assert!((e1 - e0).abs() / e0 < 1e-10, "{e0} {e1}");
    }

    #[test]
    fn vorticity_is_transported() {
        let th = Profile::Gaussian { center: 1.5, width: 0.3, amp: 0.2 };
        let s = AnnulusODEState::new(1.0, 2.0, 0.5, &th, 0.0, 48).unwrap();
        let w0 = s.vorticity();
        let tr = annulus_integrate(&s, 0.3, 1e-3).unwrap();
        let w1 = tr.final_state.vorticity();
        for (a, b) in w0.iter().zip(&w1) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }
}
