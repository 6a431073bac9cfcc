//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Column `k` of the factors comes from one sparse triangular solve
//! `x = L \ A(:, q[k])` whose nonzero pattern is found by a depth-first
//! reach through the columns of `L` computed so far. The pivot is taken
//! from the not-yet-pivotal rows of `x`: the diagonal entry when its
//! modulus is at least `pivot_threshold` times the column maximum,
//! otherwise the maximum itself.

use super::{minimum_degree, SparseMatrix};
use crate::kernels::{cfma2, ComplexPair};
use crate::{Error, Result};
use num_complex::Complex64;

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug)]
pub struct LuOptions {
    /// Diagonal preference threshold in `(0, 1]`.
    pub pivot_threshold: f64,
    /// A pivot column whose largest candidate is at most
    /// `singular_tol * max|A|` is reported as singular.
    pub singular_tol: f64,
}

impl Default for LuOptions {
    fn default() -> Self {
        LuOptions { pivot_threshold: 0.1, singular_tol: 1e-13 }
    }
}

/// `P A Q = L U` with `L` unit lower triangular.
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<Complex64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<Complex64>,
    pinv: Vec<usize>,
    q: Vec<usize>,
    max_abs_a: f64,
    max_abs_u: f64,
    min_pivot: f64,
    max_pivot: f64,
}

#[inline]
fn scatter_axpy(x: &mut [Complex64], idx: &[usize], vals: &[Complex64], alpha: Complex64) {
    let a = ComplexPair::splat(alpha);
    let mut p = 0;
    while p + 1 < idx.len() {
        let (i0, i1) = (idx[p], idx[p + 1]);
        let acc = ComplexPair::new(x[i0], x[i1]);
        let r = cfma2(ComplexPair::load(vals, p), a, acc);
        x[i0] = r.lane(0);
        x[i1] = r.lane(1);
        p += 2;
    }
    if p < idx.len() {
        x[idx[p]] += vals[p] * alpha;
    }
}

impl LuFactors {
    /// Factors `a` after computing a minimum-degree column order on the
    /// symmetrized pattern.
    pub fn factor(a: &SparseMatrix, opts: LuOptions) -> Result<Self> {
        let q = minimum_degree(&a.symmetric_pattern());
        Self::factor_with_order(a, &q, opts)
    }

    pub fn factor_with_order(a: &SparseMatrix, q: &[usize], opts: LuOptions) -> Result<Self> {
        let n = a.ncols();
        if a.nrows() != n || q.len() != n {
            return Err(Error::Dimension(format!(
                "LU needs a square matrix and a full column order, got {}x{} with {} columns ordered",
                a.nrows(),
                n,
                q.len()
            )));
        }
        let max_abs_a = a.max_abs();
        let singular_abs = opts.singular_tol * max_abs_a;

        let cap = 4 * a.nnz() + n;
        let mut l_ptr = vec![0usize; n + 1];
        let mut u_ptr = vec![0usize; n + 1];
        let mut l_idx: Vec<usize> = Vec::with_capacity(cap);
        let mut l_val: Vec<Complex64> = Vec::with_capacity(cap);
        let mut u_idx: Vec<usize> = Vec::with_capacity(cap);
        let mut u_val = Vec::with_capacity(cap);
        let mut pinv = vec![NONE; n];

        let zero = Complex64::new(0.0, 0.0);
        let mut x = vec![zero; n];
        let mut xi = vec![0usize; n];
        let mut marked = vec![false; n];
        let mut pstack = vec![0usize; n];
        let mut stack: Vec<usize> = Vec::with_capacity(n);

        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        let mut max_abs_u = 0.0f64;

        for k in 0..n {
            l_ptr[k] = l_idx.len();
            u_ptr[k] = u_idx.len();
            let col = q[k];
            let (a_rows, a_vals) = a.col(col);

            // reach of A(:, col) through the graph of L
            let mut top = n;
            for &start in a_rows {
                if marked[start] {
                    continue;
                }
                stack.push(start);
                while let Some(&j) = stack.last() {
                    let jnew = pinv[j];
                    if !marked[j] {
                        marked[j] = true;
                        pstack[j] = if jnew == NONE { 0 } else { l_ptr[jnew] };
                    }
                    let end = if jnew == NONE { 0 } else { l_ptr[jnew + 1] };
                    let mut pushed = false;
                    while pstack[j] < end {
                        let i = l_idx[pstack[j]];
                        pstack[j] += 1;
                        if !marked[i] {
                            stack.push(i);
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        stack.pop();
                        top -= 1;
                        xi[top] = j;
                    }
                }
            }
            for &j in &xi[top..n] {
                marked[j] = false;
            }

            // x = L \ A(:, col)
            for &j in &xi[top..n] {
                x[j] = zero;
            }
            for (&i, &v) in a_rows.iter().zip(a_vals) {
                x[i] = v;
            }
            for px in top..n {
                let j = xi[px];
                let jcol = pinv[j];
                if jcol == NONE {
                    continue;
                }
                let xj = x[j];
                let (s, e) = (l_ptr[jcol] + 1, l_ptr[jcol + 1]);
                scatter_axpy(&mut x, &l_idx[s..e], &l_val[s..e], -xj);
            }

            // pivot selection
            let mut ipiv = NONE;
            let mut best = -1.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    let t = x[i].norm();
                    if t > best {
                        best = t;
                        ipiv = i;
                    }
                } else {
                    u_idx.push(pinv[i]);
                    u_val.push(x[i]);
                    max_abs_u = max_abs_u.max(x[i].norm());
                }
            }
            if ipiv == NONE || best <= singular_abs {
                return Err(Error::Singular { pivot: k });
            }
            if pinv[col] == NONE && x[col].norm() >= best * opts.pivot_threshold {
                ipiv = col;
            }
            let pivot = x[ipiv];
            let pn = pivot.norm();
            min_pivot = min_pivot.min(pn);
            max_pivot = max_pivot.max(pn);
            max_abs_u = max_abs_u.max(pn);
            u_idx.push(k);
            u_val.push(pivot);
            pinv[ipiv] = k;
            l_idx.push(ipiv);
            l_val.push(Complex64::new(1.0, 0.0));
            let inv = pivot.inv();
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    l_idx.push(i);
                    l_val.push(x[i] * inv);
                }
                x[i] = zero;
            }
        }
        l_ptr[n] = l_idx.len();
        u_ptr[n] = u_idx.len();
        for i in &mut l_idx {
            *i = pinv[*i];
        }

        Ok(LuFactors {
            n,
            l_ptr,
            l_idx,
            l_val,
            u_ptr,
            u_idx,
            u_val,
            pinv,
            q: q.to_vec(),
            max_abs_a,
            max_abs_u,
            min_pivot,
            max_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of `L` and `U` (unit diagonal of `L` included).
    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }

    /// `max|U| / max|A|`.
    pub fn pivot_growth(&self) -> f64 {
        if self.max_abs_a > 0.0 {
            self.max_abs_u / self.max_abs_a
        } else {
            f64::INFINITY
        }
    }

    /// `max|pivot| / min|pivot|`, a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        self.max_pivot / self.min_pivot
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (i, &bi) in b.iter().enumerate() {
            y[self.pinv[i]] = bi;
        }
        for j in 0..n {
            let yj = y[j];
            let (s, e) = (self.l_ptr[j] + 1, self.l_ptr[j + 1]);
            scatter_axpy(&mut y, &self.l_idx[s..e], &self.l_val[s..e], -yj);
        }
        for j in (0..n).rev() {
            let (s, e) = (self.u_ptr[j], self.u_ptr[j + 1] - 1);
            y[j] /= self.u_val[e];
            let yj = y[j];
            scatter_axpy(&mut y, &self.u_idx[s..e], &self.u_val[s..e], -yj);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            out[self.q[k]] = y[k];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn residual(a: &SparseMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
        a.mul_vec(x).iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_diagonal_forces_off_diagonal_pivot() {
        let a = SparseMatrix::from_dense(&[
            vec![c(0.0, 0.0), c(1.0, 1.0), c(0.0, 0.0)],
            vec![c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(3.0, 0.0), c(4.0, -1.0)],
        ]);
        let b = vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.5)];
        let lu = LuFactors::factor(&a, LuOptions::default()).unwrap();
        let x = lu.solve(&b);
        assert!(residual(&a, &x, &b) < 1e-14);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = SparseMatrix::from_dense(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ]);
        match LuFactors::factor(&a, LuOptions::default()) {
            Err(Error::Singular { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn structurally_empty_column_is_singular() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))]);
        assert!(matches!(LuFactors::factor(&a, LuOptions::default()), Err(Error::Singular { .. })));
    }

    #[test]
    fn tridiagonal_complex_system() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, c(4.0, 1.0 + i as f64 * 0.01)));
            if i > 0 {
                t.push((i, i - 1, c(-1.0, 0.5)));
                t.push((i - 1, i, c(-1.0, -0.5)));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t);
        let b: Vec<_> = (0..n).map(|i| c(i as f64, 1.0)).collect();
        let lu = LuFactors::factor(&a, LuOptions::default()).unwrap();
        let x = lu.solve(&b);
        assert!(residual(&a, &x, &b) < 1e-12);
        assert!(lu.pivot_growth() < 10.0);
    }
}
