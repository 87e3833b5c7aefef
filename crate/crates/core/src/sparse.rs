//! Compressed sparse rows, ILU(0) and restarted GMRES for the large
//! stationary-distribution solves.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// column indices within a row are sorted.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            out[r] = s;
        }
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for k in lu.row_ptr[r]..lu.row_ptr[r + 1] {
                if lu.col_idx[k] == r {
                    diag[r] = k;
                }
            }
            if diag[r] == usize::MAX {
                return Err(Error::NonConvergence(format!("ILU(0): missing diagonal in row {r}")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.col_idx[k]] = k;
            }
            for k in start..end {
                let j = lu.col_idx[k];
                if j >= i {
                    break;
                }
                let pivot = lu.values[diag[j]];
                let factor = lu.values[k] / pivot;
                lu.values[k] = factor;
                for m in diag[j] + 1..lu.row_ptr[j + 1] {
                    let c = lu.col_idx[m];
                    if pos[c] != usize::MAX {
                        lu.values[pos[c]] -= factor * lu.values[m];
                    }
                }
            }
            for k in start..end {
                pos[lu.col_idx[k]] = usize::MAX;
            }
            if lu.values[diag[i]] == 0.0 || !lu.values[diag[i]].is_finite() {
                return Err(Error::NonConvergence(format!("ILU(0): zero pivot in row {i}")));
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// Overwrites `x` with `(LU)⁻¹ x`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = x[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.values[k] * x[lu.col_idx[k]];
            }
            x[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.values[k] * x[lu.col_idx[k]];
            }
            x[i] = s / lu.values[self.diag[i]];
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Right-preconditioned restarted GMRES; stops when `‖b − A x‖₂ ≤ rtol ‖b‖₂`.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    precond: &Ilu0,
    rtol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<()> {
    let n = a.n;
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut iters = 0;
    let mut previous = f64::INFINITY;
    let mut stalled = 0;
    loop {
        a.matvec(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm(&r);
        if beta <= rtol * bnorm {
            return Ok(());
        }
        stalled = if beta > 0.99 * previous { stalled + 1 } else { 0 };
        previous = beta;
        if iters >= max_iter || stalled >= 3 {
            return Err(Error::NonConvergence(format!(
                "GMRES: relative residual {:.3e} after {iters} iterations",
                beta / bnorm
            )));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k = 0;
        while k < restart && iters < max_iter {
            let mut zk = v[k].clone();
            precond.solve_in_place(&mut zk);
            a.matvec(&zk, &mut w);
            z.push(zk);
            for j in 0..=k {
                h[j][k] = dot(&w, &v[j]);
                let hj = h[j][k];
                for (wi, vi) in w.iter_mut().zip(&v[j]) {
                    *wi -= hj * vi;
                }
            }
            // second orthogonalization pass for stability
            for j in 0..=k {
                let c = dot(&w, &v[j]);
                h[j][k] += c;
                for (wi, vi) in w.iter_mut().zip(&v[j]) {
                    *wi -= c * vi;
                }
            }
            h[k + 1][k] = norm(&w);
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == 0.0 {
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            let next = h[k + 1][k];
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iters += 1;
            k += 1;
            if g[k].abs() <= rtol * bnorm || next == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / next).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&z[j]) {
                *xi += yj * zi;
            }
        }
    }
}
