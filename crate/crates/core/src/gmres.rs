//! Restarted GMRES with right preconditioning.

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    /// Residual accepted when the iteration stagnates before reaching `tol`.
    pub accept: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { tol: 1e-13, restart: 40, max_iter: 400, accept: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve A x = b where the solution is x = M⁻¹ y; `op` applies A, `prec` applies M⁻¹.
/// `x` holds the initial guess on entry.
pub fn gmres<A, P>(op: A, prec: P, b: &[f64], x: &mut [f64], opts: GmresOptions) -> GmresOutcome
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return GmresOutcome { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut total = 0;
    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut rel;
    let mut last_true = f64::INFINITY;
    loop {
        op(x, &mut tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= opts.tol || total >= opts.max_iter || rel > 0.5 * last_true {
            break;
        }
        last_true = rel;
        let m = opts.restart;
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|a| a / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            prec(&v[k], &mut z);
            let mut w = vec![0.0; n];
            op(&z, &mut w);
            // modified Gram-Schmidt, twice for stability
            for _ in 0..2 {
                for (j, vj) in v.iter().enumerate() {
                    let hj = dot(&w, vj);
                    h[j][k] += hj;
                    for i in 0..n {
                        w[i] -= hj * vj[i];
                    }
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= opts.tol || total >= opts.max_iter || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|a| a / wn).collect());
        }
        // back substitution
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut upd = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                upd[i] += yj * v[j][i];
            }
        }
        prec(&upd, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
    }
    GmresOutcome { iterations: total, relative_residual: rel, converged: rel <= opts.accept.max(opts.tol) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 30;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 4.0 } else { 1.0 / (1.0 + i as f64 + 2.0 * j as f64) }).collect())
            .collect();
        let xs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = a.iter().map(|row| dot(row, &xs)).collect();
        let op = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = dot(&a[i], x);
            }
        };
        let prec = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = x[i] / 4.0;
            }
        };
        let mut x = vec![0.0; n];
        let out = gmres(op, prec, &b, &mut x, GmresOptions { restart: 5, ..Default::default() });
        assert!(out.converged);
        for i in 0..n {
            assert!((x[i] - xs[i]).abs() < 1e-11);
        }
    }
}
