//! Small dense kernels used inside supernode updates.

const BLOCK_J: usize = 256;
const BLOCK_K: usize = 64;

/// `c = a * b` for row-major `a` (`m x k`, stride `lda`), `b` (`k x n`,
/// stride `ldb`) and `c` (`m x n`, stride `ldc`).
///
/// Every output element is accumulated in ascending `k` and starts from the
/// `k = 0` product rather than from zero, so a single-term product equals
/// the plain scalar multiplication bit for bit.
#[allow(clippy::too_many_arguments)]
pub fn gemm(m: usize, n: usize, k: usize, a: &[f64], lda: usize, b: &[f64], ldb: usize, c: &mut [f64], ldc: usize) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for i in 0..m {
            c[i * ldc..i * ldc + n].fill(0.0);
        }
        return;
    }
    for j0 in (0..n).step_by(BLOCK_J) {
        let j1 = (j0 + BLOCK_J).min(n);
        for k0 in (0..k).step_by(BLOCK_K) {
            let k1 = (k0 + BLOCK_K).min(k);
            for i in 0..m {
                let crow = &mut c[i * ldc + j0..i * ldc + j1];
                let arow = &a[i * lda..i * lda + k];
                let mut kk = k0;
                if kk == 0 {
                    let a0 = arow[0];
                    for (cv, &bv) in crow.iter_mut().zip(&b[j0..j1]) {
                        *cv = a0 * bv;
                    }
                    kk = 1;
                }
                for p in kk..k1 {
                    let ap = arow[p];
                    let brow = &b[p * ldb + j0..p * ldb + j1];
                    for (cv, &bv) in crow.iter_mut().zip(brow) {
                        *cv += ap * bv;
                    }
                }
            }
        }
    }
}

/// `y -= alpha * x`, elementwise in index order.
#[inline]
pub fn axpy_sub(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv -= alpha * xv;
    }
}
