//! Deterministic linear model fitting on sparse rows: ridge regression by
//! conjugate gradient and L2-regularized logistic regression by L-BFGS.

use crate::error::{Error, Result};
use crate::features::SparseVec;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Minimizes `(1/n) Σ (x_i·w + b - y_i)² + lambda ‖w‖²` with an unpenalized
/// intercept. Columns are centered implicitly, so sparsity is preserved.
pub fn ridge(rows: &[SparseVec], dim: usize, y: &[f64], lambda: f64) -> Result<LinearFit> {
    let n = rows.len().max(1) as f64;
    ridge_weighted(rows, dim, y, &vec![1.0 / n; rows.len()], lambda)
}

/// Ridge with per-row weights summing to one: minimizes
/// `Σ s_i (x_i·w + b - y_i)² + lambda ‖w‖²`.
pub fn ridge_weighted(rows: &[SparseVec], dim: usize, y: &[f64], s: &[f64], lambda: f64) -> Result<LinearFit> {
    if rows.len() != y.len() || rows.len() != s.len() || rows.is_empty() {
        return Err(Error::Argument("ridge needs one target and weight per row and at least one row".into()));
    }
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::Argument(format!("regularization must be positive, got {lambda}")));
    }
    if s.iter().any(|&w| w.is_nan() || w < 0.0) {
        return Err(Error::Argument("row weights must be non-negative".into()));
    }
    let mut mean_x = vec![0.0; dim];
    for (r, &si) in rows.iter().zip(s) {
        for &(i, v) in r {
            mean_x[i as usize] += si * v;
        }
    }
    let mean_y: f64 = y.iter().zip(s).map(|(v, si)| v * si).sum();

    // Xcᵀ S u
    let xt = |u: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        let mut su = 0.0;
        for ((r, &ui), &si) in rows.iter().zip(u).zip(s) {
            let wu = si * ui;
            su += wu;
            for &(i, v) in r {
                out[i as usize] += v * wu;
            }
        }
        for (o, m) in out.iter_mut().zip(&mean_x) {
            *o -= m * su;
        }
        out
    };
    // (Xcᵀ S Xc + lambda I) v
    let apply = |v: &[f64]| -> Vec<f64> {
        let mv = dot(&mean_x, v);
        let xv: Vec<f64> = rows.iter().map(|r| r.iter().map(|&(i, x)| x * v[i as usize]).sum::<f64>() - mv).collect();
        let mut out = xt(&xv);
        axpy(lambda, v, &mut out);
        out
    };

    let yc: Vec<f64> = y.iter().map(|v| v - mean_y).collect();
    let b = xt(&yc);
    let mut w = vec![0.0; dim];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let tol = 1e-24 * dot(&b, &b).max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    while rr > tol && iterations < 5000 {
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        axpy(alpha, &p, &mut w);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
        iterations += 1;
    }
    let intercept = mean_y - dot(&mean_x, &w);
    Ok(LinearFit { weights: w, intercept, iterations })
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Minimizes the mean logistic loss plus `(l2 / 2) ‖w‖²` (intercept
/// unpenalized). `labels[i]` is true for the positive class.
pub fn logistic(rows: &[SparseVec], dim: usize, labels: &[bool], l2: f64) -> Result<LinearFit> {
    if rows.len() != labels.len() || rows.is_empty() {
        return Err(Error::Argument("logistic regression needs one label per row".into()));
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(Error::Argument("logistic regression needs both classes".into()));
    }
    let n = rows.len() as f64;
    // parameter layout: [w_0 .. w_{dim-1}, b]
    let objective = |theta: &[f64], grad: &mut [f64]| -> f64 {
        let (w, b) = (&theta[..dim], theta[dim]);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (r, &y) in rows.iter().zip(labels) {
            let z = r.iter().map(|&(i, v)| v * w[i as usize]).sum::<f64>() + b;
            let t = if y { 1.0 } else { 0.0 };
            loss += softplus(z) - t * z;
            let e = (sigmoid(z) - t) / n;
            for &(i, v) in r {
                grad[i as usize] += e * v;
            }
            grad[dim] += e;
        }
        let mut reg = 0.0;
        for (g, wi) in grad[..dim].iter_mut().zip(w) {
            *g += l2 * wi;
            reg += wi * wi;
        }
        loss / n + 0.5 * l2 * reg
    };
    let (theta, iterations) = lbfgs(dim + 1, objective, 1000, 1e-9);
    Ok(LinearFit { weights: theta[..dim].to_vec(), intercept: theta[dim], iterations })
}

/// Limited-memory BFGS with Armijo backtracking, starting from zero.
fn lbfgs(n: usize, mut f: impl FnMut(&[f64], &mut [f64]) -> f64, max_iter: usize, gtol: f64) -> (Vec<f64>, usize) {
    const MEMORY: usize = 10;
    let mut x = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut iter = 0;
    while iter < max_iter {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax < gtol {
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &d);
            axpy(-a, y, &mut d);
            alphas.push(a);
        }
        let gamma = hist.back().map_or(1.0 / gmax.max(1.0), |(s, y, _)| dot(s, y) / dot(y, y));
        d.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            axpy(a - b, s, &mut d);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut step = 1.0;
        let mut g_new = vec![0.0; n];
        let mut x_new;
        let mut f_new;
        loop {
            x_new = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect::<Vec<_>>();
            f_new = f(&x_new, &mut g_new);
            if f_new <= fx + 1e-4 * step * slope || step < 1e-20 {
                break;
            }
            step *= 0.5;
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let converged = (fx - f_new).abs() <= 1e-15 * fx.abs().max(1.0);
        x = x_new;
        g = g_new;
        fx = f_new;
        iter += 1;
        if sy > 1e-12 {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        if converged {
            break;
        }
    }
    (x, iter)
}
