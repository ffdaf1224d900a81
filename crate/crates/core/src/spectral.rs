//! Fourier and Chebyshev building blocks shared by the geometry and Laplace solvers.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

/// FFT pair for one periodic grid size.
pub struct Fourier {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

static PLANS: Lazy<Mutex<HashMap<usize, Arc<Fourier>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// Cached transform for grid size `n`.
pub fn fourier(n: usize) -> Arc<Fourier> {
    let mut plans = PLANS.lock().expect("fft plan cache poisoned");
    plans
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Fourier {
                n,
                fwd: planner.plan_fft_forward(n),
                inv: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Angular nodes θ_j = 2πj/n.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}

impl Fourier {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Signed wavenumber of slot `j`; the Nyquist slot reports +n/2.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        self.n % 2 == 0 && j == self.n / 2
    }

    /// Normalized coefficients: x_j = Σ c_k e^{ikθ_j}.
    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        let s = 1.0 / self.n as f64;
        for c in buf.iter_mut() {
            *c *= s;
        }
        buf
    }

    pub fn forward_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = x.to_vec();
        self.fwd.process(&mut buf);
        let s = 1.0 / self.n as f64;
        for c in buf.iter_mut() {
            *c *= s;
        }
        buf
    }

    pub fn inverse_complex(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut buf = c.to_vec();
        self.inv.process(&mut buf);
        buf
    }

    /// Real part of the synthesis.
    pub fn inverse(&self, c: &[Complex64]) -> Vec<f64> {
        assert_eq!(c.len(), self.n);
        let mut buf = c.to_vec();
        self.inv.process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// m-th derivative in θ. The Nyquist mode is dropped so that D is skew.
    pub fn diff(&self, x: &[f64], order: u32) -> Vec<f64> {
        if order == 0 {
            return x.to_vec();
        }
        let mut c = self.forward(x);
        self.diff_spectrum(&mut c, order);
        self.inverse(&c)
    }

    pub fn diff_spectrum(&self, c: &mut [Complex64], order: u32) {
        for (j, cj) in c.iter_mut().enumerate() {
            if self.is_nyquist(j) {
                *cj = Complex64::new(0.0, 0.0);
                continue;
            }
            let ik = Complex64::new(0.0, self.wavenumber(j) as f64);
            *cj *= ik.powu(order);
        }
    }

    /// Zero every mode with |k| > n/3.
    pub fn dealias(&self, x: &[f64]) -> Vec<f64> {
        let mut c = self.forward(x);
        let cut = self.n as i64 / 3;
        for (j, cj) in c.iter_mut().enumerate() {
            if self.wavenumber(j).abs() > cut || self.is_nyquist(j) {
                *cj = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse(&c)
    }

    /// Exponential filter exp(-strength (|k|/k_max)^order).
    pub fn filter(&self, x: &[f64], strength: f64, order: i32) -> Vec<f64> {
        let mut c = self.forward(x);
        let kmax = (self.n / 2) as f64;
        for (j, cj) in c.iter_mut().enumerate() {
            let k = self.wavenumber(j).abs() as f64 / kmax;
            *cj *= (-strength * k.powi(order)).exp();
        }
        self.inverse(&c)
    }

    /// Evaluate the trigonometric interpolant at an arbitrary angle.
    pub fn eval(&self, c: &[Complex64], theta: f64) -> f64 {
        let mut acc = c[0].re;
        let half = self.n / 2;
        for k in 1..half {
            let e = Complex64::from_polar(1.0, k as f64 * theta);
            acc += 2.0 * (c[k] * e).re;
        }
        if self.n % 2 == 0 {
            acc += c[half].re * (half as f64 * theta).cos();
        } else {
            let e = Complex64::from_polar(1.0, half as f64 * theta);
            acc += 2.0 * (c[half] * e).re;
        }
        acc
    }

    /// Value and first two θ-derivatives of the interpolant (Nyquist ignored).
    pub fn eval_derivs(&self, c: &[Complex64], theta: f64) -> [f64; 3] {
        let mut out = [c[0].re, 0.0, 0.0];
        for k in 1..self.n.div_ceil(2) {
            let kf = k as f64;
            let z = c[k] * Complex64::from_polar(1.0, kf * theta);
            out[0] += 2.0 * z.re;
            out[1] += -2.0 * kf * z.im;
            out[2] += -2.0 * kf * kf * z.re;
        }
        if self.n % 2 == 0 {
            let h = self.n / 2;
            out[0] += c[h].re * (h as f64 * theta).cos();
        }
        out
    }

    /// Resample to a different grid size by zero padding or truncation.
    pub fn resample(&self, x: &[f64], m: usize) -> Vec<f64> {
        let c = self.forward(x);
        let mut d = vec![Complex64::new(0.0, 0.0); m];
        let keep = (self.n.min(m) / 2) as i64;
        for (j, cj) in c.iter().enumerate() {
            let k = self.wavenumber(j);
            if k.abs() < keep {
                let slot = if k >= 0 { k as usize } else { (m as i64 + k) as usize };
                d[slot] = *cj;
            }
        }
        fourier(m).inverse(&d)
    }
}

/// Fraction of spectral energy carried by the top third of resolved wavenumbers.
pub fn tail_fraction(x: &[f64]) -> f64 {
    let f = fourier(x.len());
    let c = f.forward(x);
    let cut = (x.len() / 2) as i64 * 2 / 3;
    let mut total = 0.0;
    let mut tail = 0.0;
    for (j, cj) in c.iter().enumerate() {
        let e = cj.norm_sqr();
        total += e;
        if f.wavenumber(j).abs() > cut {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Dense row-major square matrix, small and cache friendly.
#[derive(Clone, Debug)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![0.0; n * n] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.at(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Chebyshev–Lobatto points x_j = cos(jπ/m), j = 0..m, and the differentiation matrix.
pub fn chebyshev(m: usize) -> (Vec<f64>, Mat) {
    let n = m + 1;
    let x: Vec<f64> = (0..n).map(|j| (j as f64 * PI / m as f64).cos()).collect();
    let mut d = Mat::zeros(n);
    if m == 0 {
        return (x, d);
    }
    let c = |j: usize| -> f64 {
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == m {
            2.0 * s
        } else {
            s
        }
    };
    for i in 0..n {
        for j in 0..n {
            if i != j {
                // sin-product form of x_i - x_j keeps the entries accurate near the ends
                let diff = -2.0
                    * (((i + j) as f64) * PI / (2.0 * m as f64)).sin()
                    * (((i as f64) - (j as f64)) * PI / (2.0 * m as f64)).sin();
                d.set(i, j, c(i) / c(j) / diff);
            }
        }
    }
    // negative sum trick for the diagonal
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| d.at(i, j)).sum();
        d.set(i, i, -s);
    }
    (x, d)
}

/// Clenshaw–Curtis weights on the Lobatto points of `chebyshev(m)`.
pub fn clenshaw_curtis(m: usize) -> Vec<f64> {
    let n = m + 1;
    let mut w = vec![0.0; n];
    if m == 0 {
        w[0] = 2.0;
        return w;
    }
    let theta: Vec<f64> = (0..n).map(|j| j as f64 * PI / m as f64).collect();
    let mut v = vec![1.0; m - 1];
    let inner = |w: &mut Vec<f64>, v: &mut Vec<f64>| {
        if m % 2 == 0 {
            let e = 1.0 / ((m * m) as f64 - 1.0);
            w[0] = e;
            w[m] = e;
            for k in 1..m / 2 {
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= 2.0 * (2.0 * k as f64 * theta[i + 1]).cos() / (4.0 * (k * k) as f64 - 1.0);
                }
            }
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= (m as f64 * theta[i + 1]).cos() / ((m * m) as f64 - 1.0);
            }
        } else {
            let e = 1.0 / (m * m) as f64;
            w[0] = e;
            w[m] = e;
            for k in 1..=(m - 1) / 2 {
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= 2.0 * (2.0 * k as f64 * theta[i + 1]).cos() / (4.0 * (k * k) as f64 - 1.0);
                }
            }
        }
    };
    inner(&mut w, &mut v);
    for i in 1..m {
        w[i] = 2.0 * v[i - 1] / m as f64;
    }
    w
}

/// Barycentric interpolation on Lobatto points (values ordered as in `chebyshev`).
pub fn barycentric(x: &[f64], f: &[f64], t: f64) -> f64 {
    let m = x.len() - 1;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..=m {
        let d = t - x[j];
        if d.abs() < 1e-15 {
            return f[j];
        }
        let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == m {
            w *= 0.5;
        }
        num += w * f[j] / d;
        den += w / d;
    }
    num / den
}

/// Chebyshev coefficients of Lobatto samples (first-kind expansion).
pub fn chebyshev_coefficients(f: &[f64]) -> Vec<f64> {
    let m = f.len() - 1;
    let mut a = vec![0.0; m + 1];
    for (k, ak) in a.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, fj) in f.iter().enumerate() {
            let mut w = 1.0;
            if j == 0 || j == m {
                w = 0.5;
            }
            s += w * fj * (k as f64 * j as f64 * PI / m as f64).cos();
        }
        let mut scale = 2.0 / m as f64;
        if k == 0 || k == m {
            scale *= 0.5;
        }
        *ak = scale * s;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_derivative_of_sine() {
        let n = 32;
        let th = theta_grid(n);
        let x: Vec<f64> = th.iter().map(|t| (3.0 * t).sin()).collect();
        let d = fourier(n).diff(&x, 1);
        for (t, v) in th.iter().zip(&d) {
            assert!((v - 3.0 * (3.0 * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_matches_grid_and_offgrid() {
        let n = 16;
        let f = fourier(n);
        let th = theta_grid(n);
        let x: Vec<f64> = th.iter().map(|t| 1.0 + (2.0 * t).cos() + 0.5 * (5.0 * t).sin()).collect();
        let c = f.forward(&x);
        let t: f64 = 0.377;
        let exact = 1.0 + (2.0 * t).cos() + 0.5 * (5.0 * t).sin();
        assert!((f.eval(&c, t) - exact).abs() < 1e-13);
        let d = f.eval_derivs(&c, t);
        assert!((d[1] - (-2.0 * (2.0 * t).sin() + 2.5 * (5.0 * t).cos())).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_differentiates_polynomials() {
        let (x, d) = chebyshev(12);
        let f: Vec<f64> = x.iter().map(|t| t.powi(5)).collect();
        let mut df = vec![0.0; x.len()];
        d.apply(&f, &mut df);
        for (t, v) in x.iter().zip(&df) {
            assert!((v - 5.0 * t.powi(4)).abs() < 1e-11);
        }
    }

    #[test]
    fn clenshaw_curtis_integrates() {
        for m in [8, 9, 16] {
            let (x, _) = chebyshev(m);
            let w = clenshaw_curtis(m);
            let s: f64 = x.iter().zip(&w).map(|(t, w)| w * t.exp()).sum();
            assert!((s - (1f64.exp() - (-1f64).exp())).abs() < 1e-6, "m={m} {s}");
            let s2: f64 = x.iter().zip(&w).map(|(t, w)| w * t * t).sum();
            assert!((s2 - 2.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn barycentric_reproduces() {
        let (x, _) = chebyshev(10);
        let f: Vec<f64> = x.iter().map(|t| (2.0 * t).sin()).collect();
        assert!((barycentric(&x, &f, 0.3) - 0.6f64.sin()).abs() < 1e-8);
    }
}
