//! Jacobi-preconditioned conjugate gradients for the singular Neumann system,
//! and EEG transfer matrices built on it.

use crate::error::{Error, Result};
use crate::parallel::{map_range, Execution};
use crate::sparse::{CsrMatrix, SparseVector};

/// Largest `|Σ b| / ‖b‖₁` accepted as a compatible right-hand side.
pub const ZERO_SUM_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    /// Relative residual `‖Kx - b‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub exec: Execution,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn subtract_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

/// Subtract the mean.
pub fn zero_mean(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let mut out = values.to_vec();
    subtract_mean(&mut out);
    Ok(out)
}

/// Solve `K x = b` with zero-mean `x`, starting from zero.
pub fn cg_solve(k: &CsrMatrix, b: &[f64], opts: &CgOptions) -> Result<CgSolution> {
    cg_solve_from(k, b, vec![0.0; b.len()], opts)
}

/// Solve `K x = b` with zero-mean `x` from a given start vector.
pub fn cg_solve_from(k: &CsrMatrix, b: &[f64], start: Vec<f64>, opts: &CgOptions) -> Result<CgSolution> {
    let n = k.n();
    if b.len() != n || start.len() != n {
        return Err(Error::Dimension(format!("matrix has {n} rows, rhs {} and start {}", b.len(), start.len())));
    }
    let l1: f64 = b.iter().map(|v| v.abs()).sum();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let sum: f64 = b.iter().sum();
    if sum.abs() > ZERO_SUM_TOL * l1 {
        return Err(Error::NotZeroSum(sum / l1));
    }
    let inv_diag: Vec<f64> = k
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = start;
    subtract_mean(&mut x);
    let mut r = vec![0.0; n];
    k.matvec(opts.exec, &x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut kp = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while res > opts.tol {
        if it == opts.max_iter {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: res,
            });
        }
        k.matvec(opts.exec, &p, &mut kp);
        let alpha = rz / dot(&p, &kp);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        subtract_mean(&mut x);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        it += 1;
    }
    // the recursive residual drifts from the true one; report the true one
    k.matvec(opts.exec, &x, &mut kp);
    let true_res = kp.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt() / bnorm;
    Ok(CgSolution {
        x,
        iterations: it,
        residual: true_res,
    })
}

/// One row per electrode mapping a right-hand side to the potential difference
/// between that electrode and the first one.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub rows: Vec<Vec<f64>>,
    pub sensor_vertex_ids: Vec<usize>,
}

impl TransferMatrix {
    /// Electrode potentials relative to the first electrode.
    pub fn apply(&self, rhs: &SparseVector) -> Vec<f64> {
        self.rows.iter().map(|row| rhs.dot_dense(row)).collect()
    }

    pub fn apply_dense(&self, rhs: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| dot(row, rhs)).collect()
    }
}

/// Solve `K t_r = e_{s_r} - e_{s_0}` for each electrode; the reference row is zero.
///
/// Rows are solved independently and in parallel under `opts.exec`; each solve
/// itself then runs sequentially.
pub fn compute_transfer(k: &CsrMatrix, electrodes: &[usize], opts: &CgOptions) -> Result<TransferMatrix> {
    let Some(&reference) = electrodes.first() else {
        return Err(Error::Empty);
    };
    let n = k.n();
    if let Some(&bad) = electrodes.iter().find(|&&v| v >= n) {
        return Err(Error::Dimension(format!("electrode vertex {bad} out of range")));
    }
    let inner = CgOptions {
        exec: if opts.exec.is_parallel() { Execution::Sequential } else { opts.exec },
        ..*opts
    };
    let rows = map_range(opts.exec, electrodes.len(), |r| -> Result<Vec<f64>> {
        let s = electrodes[r];
        if s == reference {
            return Ok(vec![0.0; n]);
        }
        let mut b = vec![0.0; n];
        b[s] = 1.0;
        b[reference] = -1.0;
        Ok(cg_solve(k, &b, &inner)?.x)
    });
    Ok(TransferMatrix {
        rows: rows.into_iter().collect::<Result<_>>()?,
        sensor_vertex_ids: electrodes.to_vec(),
    })
}
