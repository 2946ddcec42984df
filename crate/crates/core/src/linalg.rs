//! Small dense helpers for least squares on Gram matrices.

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub(crate) struct Square {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Square {
    pub fn zeros(n: usize) -> Self {
        Square {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix. Pivots
/// below `rel_tol` times the original diagonal are reported as the failing
/// column index.
pub(crate) fn cholesky(a: &Square, rel_tol: f64) -> Result<Square, usize> {
    let n = a.n;
    let mut l = Square::zeros(n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > rel_tol * a.get(j, j).abs()) || !d.is_finite() {
            return Err(j);
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// Solves `L z = b` for lower-triangular `L`, using only the leading `m` block.
pub(crate) fn forward_solve(l: &Square, b: &[f64], m: usize) -> Vec<f64> {
    let mut z = vec![0.0; m];
    for i in 0..m {
        let mut s = b[i];
        for (k, zk) in z[..i].iter().enumerate() {
            s -= l.get(i, k) * zk;
        }
        z[i] = s / l.get(i, i);
    }
    z
}

/// Solves `L^T x = z` on the leading `m` block.
pub(crate) fn backward_solve(l: &Square, z: &[f64], m: usize) -> Vec<f64> {
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = z[i];
        for (k, xk) in x.iter().enumerate().skip(i + 1) {
            s -= l.get(k, i) * xk;
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Diagonal entry `j` of `(L L^T)^{-1}` restricted to the leading `m` block.
pub(crate) fn inverse_diag(l: &Square, j: usize, m: usize) -> f64 {
    let mut e = vec![0.0; m];
    e[j] = 1.0;
    let z = forward_solve(l, &e, m);
    z.iter().map(|v| v * v).sum()
}
