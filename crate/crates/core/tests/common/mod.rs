//! Matrix generators and dense reference computations shared by the
//! integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use hybrid_lu::numeric::{factorize, FactorOptions, NumericFactors};
use hybrid_lu::preprocess::{analyze, Analysis, AnalyzeOptions};
use hybrid_lu::CsrMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random sparse matrix with the given density. A random transversal keeps
/// it structurally nonsingular; magnitudes spread over four decades so the
/// scaling has work to do.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, density: f64) -> CsrMatrix {
    let mut dense = vec![vec![0.0; n]; n];
    let mut cols: Vec<usize> = (0..n).collect();
    cols.shuffle(rng);
    let value = |rng: &mut ChaCha8Rng| {
        let mag = 10f64.powf(rng.gen_range(-2.0..2.0));
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    for (i, row) in dense.iter_mut().enumerate() {
        row[cols[i]] = value(rng);
        for v in row.iter_mut() {
            if *v == 0.0 && rng.gen_bool(density) {
                *v = value(rng);
            }
        }
    }
    CsrMatrix::from_dense(&dense).unwrap()
}

/// Five-point Laplacian on a `k x k` grid.
pub fn laplacian_2d(k: usize) -> CsrMatrix {
    let n = k * k;
    let mut t = Vec::with_capacity(5 * n);
    for r in 0..k {
        for c in 0..k {
            let i = r * k + c;
            t.push((i, i, 4.0).into());
            if r > 0 {
                t.push((i, i - k, -1.0).into());
            }
            if r + 1 < k {
                t.push((i, i + k, -1.0).into());
            }
            if c > 0 {
                t.push((i, i - 1, -1.0).into());
            }
            if c + 1 < k {
                t.push((i, i + 1, -1.0).into());
            }
        }
    }
    CsrMatrix::from_triplets(n, &t).unwrap()
}

/// Nonsymmetric diagonally dominant tridiagonal matrix.
pub fn tridiagonal(n: usize) -> CsrMatrix {
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        t.push((i, i, 4.0 + (i % 7) as f64 * 0.1).into());
        if i > 0 {
            t.push((i, i - 1, -1.0).into());
        }
        if i + 1 < n {
            t.push((i, i + 1, -1.5).into());
        }
    }
    CsrMatrix::from_triplets(n, &t).unwrap()
}

/// Dense LU with partial pivoting.
pub struct DenseLu {
    lu: Dense,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn new(a: &Dense) -> Option<Self> {
        let n = a.len();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // ties go to the lowest row
            let p = (k..n).fold(k, |p, i| if lu[i][k].abs() > lu[p][k].abs() { i } else { p });
            if lu[p][k] == 0.0 {
                return None;
            }
            lu.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..n {
                let l = lu[i][k] / lu[k][k];
                lu[i][k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        lu[i][j] -= l * lu[k][j];
                    }
                }
            }
        }
        Some(Self { lu, perm })
    }

    /// Unit-lower L and upper U with `L U = P A`.
    pub fn factors(&self) -> (Dense, Dense) {
        let n = self.lu.len();
        let mut l = vec![vec![0.0; n]; n];
        let mut u = vec![vec![0.0; n]; n];
        for i in 0..n {
            l[i][i] = 1.0;
            for j in 0..n {
                if j < i {
                    l[i][j] = self.lu[i][j];
                } else {
                    u[i][j] = self.lu[i][j];
                }
            }
        }
        (l, u)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[i][j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[i][j] * y[j];
            }
            y[i] /= self.lu[i][i];
        }
        y
    }

    /// Solution refined with compensated residuals, accurate well below
    /// the tolerances checked against it.
    pub fn solve_refined(&self, a: &Dense, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        for _ in 0..3 {
            let r: Vec<f64> = (0..b.len()).map(|i| compensated_residual(&a[i], &x, b[i])).collect();
            let d = self.solve(&r);
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
        }
        x
    }

    /// One-norm condition number from the explicit inverse.
    pub fn cond1(&self, a: &Dense) -> f64 {
        let n = a.len();
        let norm_a = (0..n).map(|j| (0..n).map(|i| a[i][j].abs()).sum::<f64>()).fold(0.0, f64::max);
        let mut norm_inv = 0.0f64;
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.solve(&e);
            norm_inv = norm_inv.max(col.iter().map(|v| v.abs()).sum());
        }
        norm_a * norm_inv
    }
}

/// `b - a . x` with error-free product and sum transformations.
fn compensated_residual(a: &[f64], x: &[f64], b: f64) -> f64 {
    let (mut s, mut c) = (b, 0.0f64);
    for (aij, xj) in a.iter().zip(x) {
        let p = -aij * xj;
        let p_err = (-aij).mul_add(*xj, -p);
        let t = s + p;
        let bp = t - s;
        c += (s - (t - bp)) + (p - bp) + p_err;
        s = t;
    }
    s + c
}

/// A random corpus member with its dense form.
pub struct CorpusMatrix {
    pub seed: u64,
    pub a: CsrMatrix,
    pub dense: Dense,
    pub oracle: DenseLu,
    pub cond: f64,
}

/// Deterministic random corpus with `n` in [2, 64], density in [0.05, 1]
/// and one-norm condition number at most 1e8.
pub fn corpus(count: usize) -> Vec<CorpusMatrix> {
    let mut out = Vec::with_capacity(count);
    let mut seed = 0u64;
    while out.len() < count {
        seed += 1;
        let mut r = rng(seed);
        let n = r.gen_range(2..=64);
        let density = r.gen_range(0.05..=1.0);
        let a = random_matrix(&mut r, n, density);
        let dense = a.to_dense();
        let Some(oracle) = DenseLu::new(&dense) else { continue };
        let cond = oracle.cond1(&dense);
        if !(cond <= 1e8) {
            continue;
        }
        out.push(CorpusMatrix {
            seed,
            a,
            dense,
            oracle,
            cond,
        });
    }
    out
}

pub fn analysis(a: &CsrMatrix, opts: &AnalyzeOptions) -> Arc<Analysis> {
    Arc::new(analyze(a, opts).unwrap())
}

pub fn factor_with(a: &CsrMatrix, opts: &AnalyzeOptions, fopts: &FactorOptions) -> NumericFactors {
    factorize(a, analysis(a, opts), fopts).unwrap()
}

/// Dense unit-lower L and upper U of the factors.
pub fn dense_factors(f: &NumericFactors) -> (Dense, Dense) {
    let n = f.n();
    let mut l = vec![vec![0.0; n]; n];
    let mut u = vec![vec![0.0; n]; n];
    let (lp, up) = (f.l_pattern(), f.u_pattern());
    for i in 0..n {
        l[i][i] = 1.0;
        for k in lp.row_range(i) {
            l[i][lp.indices()[k]] = f.l_values()[k];
        }
        for k in up.row_range(i) {
            u[i][up.indices()[k]] = f.u_values()[k];
        }
    }
    (l, u)
}

/// The scaled permuted matrix with its rows in factor order.
pub fn factor_order_matrix(a: &Dense, f: &NumericFactors) -> Dense {
    let an = f.analysis();
    let n = a.len();
    let ps = &an.pivot;
    let cols = &an.ordering.perm;
    f.factor_rows()
        .iter()
        .map(|&r| (0..n).map(|j| ps.dr[r] * a[r][cols[j]] * ps.dc[cols[j]]).collect())
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..n {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
    }
    c
}

pub fn max_abs(a: &Dense) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn rel_inf_err(x: &[f64], reference: &[f64]) -> f64 {
    let num = x.iter().zip(reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let den = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Writes `a` in Matrix Market coordinate format.
pub fn write_matrix_market(path: &std::path::Path, a: &CsrMatrix) {
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    s.push_str(&format!("{} {} {}\n", a.n(), a.n(), a.nnz()));
    for t in a.to_triplets() {
        s.push_str(&format!("{} {} {:e}\n", t.row + 1, t.col + 1, t.value));
    }
    std::fs::write(path, s).unwrap();
}
