//! Bounds-checked wrapper over the strided GEMM kernels.

use crate::real::Real;

/// Placement of a matrix inside a flat buffer.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Layout {
    pub offset: usize,
    pub rs: usize,
    pub cs: usize,
}

impl Layout {
    /// Dense row-major matrix with `cols` columns.
    pub fn rows(cols: usize) -> Self {
        Layout {
            offset: 0,
            rs: cols,
            cs: 1,
        }
    }

    /// Transposed view of a dense row-major matrix with `cols` columns.
    pub fn transposed(cols: usize) -> Self {
        Layout {
            offset: 0,
            rs: 1,
            cs: cols,
        }
    }

    pub fn at(mut self, offset: usize) -> Self {
        self.offset = offset;
        self
    }

    fn check(&self, rows: usize, cols: usize, len: usize, what: &str) {
        if rows == 0 || cols == 0 {
            return;
        }
        let last = self.offset + (rows - 1) * self.rs + (cols - 1) * self.cs;
        assert!(
            last < len,
            "gemm operand {what} out of bounds: index {last} >= {len}"
        );
    }
}

/// `c[m×n] = alpha · a[m×k] · b[k×n] + beta · c`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<F: Real>(
    m: usize,
    k: usize,
    n: usize,
    alpha: F,
    a: &[F],
    la: Layout,
    b: &[F],
    lb: Layout,
    beta: F,
    c: &mut [F],
    lc: Layout,
) {
    if m == 0 || n == 0 {
        return;
    }
    la.check(m, k, a.len(), "a");
    lb.check(k, n, b.len(), "b");
    lc.check(m, n, c.len(), "c");
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let idx = lc.offset + i * lc.rs + j * lc.cs;
                c[idx] = if beta == F::zero() { F::zero() } else { beta * c[idx] };
            }
        }
        return;
    }
    // SAFETY: all reachable indices were bounds-checked above, and `c` is
    // borrowed mutably so it cannot alias `a` or `b`.
    unsafe {
        F::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr().add(la.offset),
            la.rs as isize,
            la.cs as isize,
            b.as_ptr().add(lb.offset),
            lb.rs as isize,
            lb.cs as isize,
            beta,
            c.as_mut_ptr().add(lc.offset),
            lc.rs as isize,
            lc.cs as isize,
        );
    }
}

/// Row-vector times row-major matrix, accumulated in a fixed order.
///
/// The result for a row never depends on how many rows a caller processes at
/// once, which is what makes cached and uncached inference agree bit for bit.
pub(crate) fn vec_mat<F: Real>(x: &[F], w: &[F], cols: usize, out: &mut [F]) {
    debug_assert_eq!(x.len() * cols, w.len());
    debug_assert_eq!(out.len(), cols);
    out.iter_mut().for_each(|o| *o = F::zero());
    for (xi, row) in x.iter().zip(w.chunks_exact(cols)) {
        let xi = *xi;
        for (o, wv) in out.iter_mut().zip(row) {
            *o += xi * *wv;
        }
    }
}

pub(crate) fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_with_transposed_operand() {
        // a = [[1,2],[3,4]], b stored as [[5,6],[7,8]] and read transposed
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0f64, 6.0, 7.0, 8.0];
        let mut c = [0.0f64; 4];
        gemm(2, 2, 2, 1.0, &a, Layout::rows(2), &b, Layout::transposed(2), 0.0, &mut c, Layout::rows(2));
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn vec_mat_matches_gemm_row() {
        let x = [0.5f64, -1.0, 2.0];
        let w = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut out = [0.0; 2];
        vec_mat(&x, &w, 2, &mut out);
        assert_eq!(out, [0.5 - 3.0 + 10.0, 1.0 - 4.0 + 12.0]);
    }
}
