//! Forward and backward substitution on computed factors, with iterative
//! refinement after pivot perturbation.

mod partition;

pub use partition::{Coverage, PartitionParams, Segment, SolvePartition, TriangleMode};

use partition::{run_sweep, TriSystem};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::CsrMatrix;
use crate::numeric::NumericFactors;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub threads: usize,
    /// Refinement stops once the backward error is at or below this.
    pub refine_tolerance: f64,
    pub max_refine_iters: usize,
    /// Refinement stops when a step shrinks the backward error by less than
    /// this factor.
    pub stagnation_factor: f64,
    pub seg_nnz_min: usize,
    pub seg_nnz_divisor: usize,
    pub small_tri_threshold: usize,
    pub bulk_width_factor: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            threads: 1,
            refine_tolerance: 1e-13,
            max_refine_iters: 5,
            stagnation_factor: 0.5,
            seg_nnz_min: 4096,
            seg_nnz_divisor: 8,
            small_tri_threshold: 1024,
            bulk_width_factor: 2,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        if !(self.refine_tolerance >= 0.0) || !(self.stagnation_factor > 0.0 && self.stagnation_factor <= 1.0) {
            return Err(Error::InvalidConfig(
                "need refine_tolerance >= 0 and 0 < stagnation_factor <= 1".into(),
            ));
        }
        Ok(())
    }

    /// Sets an option by its configuration name. Returns `Ok(false)` when
    /// the name is not a solve option.
    pub fn set(&mut self, name: &str, value: &str) -> Result<bool> {
        let bad = |e: &dyn std::fmt::Display| Error::InvalidConfig(format!("{name}={value}: {e}"));
        match name {
            "refine_tolerance" => self.refine_tolerance = value.parse().map_err(|e| bad(&e))?,
            "max_refine_iters" => self.max_refine_iters = value.parse().map_err(|e| bad(&e))?,
            "stagnation_factor" => self.stagnation_factor = value.parse().map_err(|e| bad(&e))?,
            "seg_nnz_min" => self.seg_nnz_min = value.parse().map_err(|e| bad(&e))?,
            "seg_nnz_divisor" => self.seg_nnz_divisor = value.parse().map_err(|e| bad(&e))?,
            "small_tri_threshold" => self.small_tri_threshold = value.parse().map_err(|e| bad(&e))?,
            "solve_bulk_width_factor" => self.bulk_width_factor = value.parse().map_err(|e| bad(&e))?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn partition_params(&self) -> PartitionParams {
        PartitionParams {
            threads: self.threads,
            seg_nnz_min: self.seg_nnz_min,
            seg_nnz_divisor: self.seg_nnz_divisor,
            small_tri_threshold: self.small_tri_threshold,
            bulk_width_factor: self.bulk_width_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    /// Accepted refinement steps.
    pub iterations: usize,
    /// Backward error of the initial solution followed by one entry per
    /// accepted step.
    pub backward_errors: Vec<f64>,
    pub converged: bool,
}

impl RefinementReport {
    pub fn final_backward_error(&self) -> f64 {
        self.backward_errors.last().copied().unwrap_or(0.0)
    }
}

/// Substitution plans for one set of factors.
#[derive(Debug, Clone)]
pub struct TriangularSolver {
    n: usize,
    forward: TriSystem,
    backward: TriSystem,
    forward_part: SolvePartition,
    backward_part: SolvePartition,
    /// Row of `A` and its scaling for each factor row.
    factor_rows: Vec<usize>,
    row_scale: Vec<f64>,
    /// Column of `A` and its scaling for each factor column.
    factor_cols: Vec<usize>,
    col_scale: Vec<f64>,
}

impl TriangularSolver {
    pub fn new(factors: &NumericFactors, opts: &SolveOptions) -> Result<Self> {
        opts.validate()?;
        let an = factors.analysis();
        let sym = &an.symbolic;
        let n = factors.n();
        let nodes = &sym.nodes;
        let nn = nodes.len();

        let mut node_bounds: Vec<usize> = nodes.iter().map(|nd| nd.first_row).collect();
        node_bounds.push(n);
        let forward = TriSystem {
            ptr: factors.l_pattern().ptr().to_vec(),
            idx: factors.l_pattern().indices().to_vec(),
            val: factors.l_values().to_vec(),
            diag: None,
            node_bounds,
            node_deps: nodes.iter().map(|nd| nd.deps.clone()).collect(),
        };

        // U in reversed order: position p is row n - 1 - p
        let up = factors.u_pattern();
        let uv = factors.u_values();
        let mut ptr = Vec::with_capacity(n + 1);
        let mut idx = Vec::with_capacity(up.nnz() - n);
        let mut val = Vec::with_capacity(up.nnz() - n);
        let mut diag = Vec::with_capacity(n);
        ptr.push(0);
        for p in 0..n {
            let i = n - 1 - p;
            let r = up.row_range(i);
            diag.push(uv[r.start]);
            for k in (r.start + 1..r.end).rev() {
                idx.push(n - 1 - up.indices()[k]);
                val.push(uv[k]);
            }
            ptr.push(idx.len());
        }
        let mut rev_bounds = vec![0];
        let mut rev_deps = Vec::with_capacity(nn);
        let mut mark = vec![usize::MAX; nn];
        for r in 0..nn {
            let u = nn - 1 - r;
            let node = &nodes[u];
            rev_bounds.push(n - node.first_row);
            let mut deps = Vec::new();
            for row in node.rows() {
                for &c in &up.row(row)[1..] {
                    let v = sym.node_of_row[c];
                    if v != u && mark[v] != u {
                        mark[v] = u;
                        deps.push(nn - 1 - v);
                    }
                }
            }
            deps.sort_unstable();
            rev_deps.push(deps);
        }
        let backward = TriSystem {
            ptr,
            idx,
            val,
            diag: Some(diag),
            node_bounds: rev_bounds,
            node_deps: rev_deps,
        };

        let params = opts.partition_params();
        let forward_part = SolvePartition::build(&forward, &params);
        let backward_part = SolvePartition::build(&backward, &params);
        let factor_rows = factors.factor_rows().to_vec();
        let row_scale = factor_rows.iter().map(|&r| an.pivot.dr[r]).collect();
        let factor_cols = an.ordering.perm.clone();
        let col_scale = factor_cols.iter().map(|&c| an.pivot.dc[c]).collect();
        Ok(Self {
            n,
            forward,
            backward,
            forward_part,
            backward_part,
            factor_rows,
            row_scale,
            factor_cols,
            col_scale,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward_partition(&self) -> &SolvePartition {
        &self.forward_part
    }

    /// Partition of the backward pass, in reversed row order.
    pub fn backward_partition(&self) -> &SolvePartition {
        &self.backward_part
    }

    pub fn forward_coverage(&self) -> Coverage {
        self.forward_part.coverage(self.n, &self.forward.ptr)
    }

    pub fn backward_coverage(&self) -> Coverage {
        self.backward_part.coverage(self.n, &self.backward.ptr)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: len,
            });
        }
        Ok(())
    }

    /// Solves `L y = b` in factor coordinates.
    pub fn forward_substitution(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check(b.len())?;
        let mut y = b.to_vec();
        run_sweep(&self.forward, &self.forward_part, &mut y);
        Ok(y)
    }

    /// Solves `U x = y` in factor coordinates.
    pub fn backward_substitution(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y.len())?;
        let mut x: Vec<f64> = y.iter().rev().copied().collect();
        run_sweep(&self.backward, &self.backward_part, &mut x);
        x.reverse();
        Ok(x)
    }

    /// One solve of `A x = b` in original coordinates, without refinement.
    pub fn apply(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check(b.len())?;
        let n = self.n;
        let mut t: Vec<f64> = (0..n).map(|k| self.row_scale[k] * b[self.factor_rows[k]]).collect();
        run_sweep(&self.forward, &self.forward_part, &mut t);
        t.reverse();
        run_sweep(&self.backward, &self.backward_part, &mut t);
        let mut x = vec![0.0; n];
        for j in 0..n {
            x[self.factor_cols[j]] = t[n - 1 - j] * self.col_scale[j];
        }
        Ok(x)
    }
}

/// Solves `A x = b`. When any pivot was perturbed the solution is refined
/// automatically.
pub fn solve(a: &CsrMatrix, factors: &NumericFactors, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, RefinementReport)> {
    if a.n() != factors.n() {
        return Err(Error::DimensionMismatch {
            expected: factors.n(),
            found: a.n(),
        });
    }
    let solver = TriangularSolver::new(factors, opts)?;
    solve_with(a, factors, &solver, b, opts)
}

/// Like [`solve`] with a prebuilt solver.
pub fn solve_with(
    a: &CsrMatrix,
    factors: &NumericFactors,
    solver: &TriangularSolver,
    b: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, RefinementReport)> {
    let x0 = solver.apply(b)?;
    if factors.perturbed().is_empty() {
        let be = a.backward_error(&x0, b)?;
        let report = RefinementReport {
            iterations: 0,
            backward_errors: vec![be],
            converged: be <= opts.refine_tolerance,
        };
        return Ok((x0, report));
    }
    iterative_refinement(a, solver, b, x0, opts)
}

/// Refines `x0` with residuals computed on the original matrix. A step that
/// would increase the backward error is discarded and ends the loop, so the
/// reported errors never increase.
pub fn iterative_refinement(
    a: &CsrMatrix,
    solver: &TriangularSolver,
    b: &[f64],
    x0: Vec<f64>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, RefinementReport)> {
    let mut x = x0;
    let mut be = a.backward_error(&x, b)?;
    let mut errors = vec![be];
    let mut iterations = 0;
    while be > opts.refine_tolerance && iterations < opts.max_refine_iters {
        let r = a.residual(&x, b)?;
        let d = solver.apply(&r)?;
        let next: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + di).collect();
        let next_be = a.backward_error(&next, b)?;
        if !(next_be <= be) {
            break;
        }
        x = next;
        errors.push(next_be);
        iterations += 1;
        let stalled = next_be > opts.stagnation_factor * be;
        be = next_be;
        if stalled {
            break;
        }
    }
    Ok((
        x,
        RefinementReport {
            iterations,
            backward_errors: errors,
            converged: be <= opts.refine_tolerance,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{factorize, FactorOptions};
    use crate::preprocess::{analyze, AnalyzeOptions};
    use std::sync::Arc;

    fn factor(a: &CsrMatrix) -> NumericFactors {
        let an = Arc::new(analyze(a, &AnalyzeOptions::default()).unwrap());
        factorize(a, an, &FactorOptions::default()).unwrap()
    }

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(4).unwrap();
        let f = factor(&a);
        let b = vec![1.0, -2.0, 3.5, 0.25];
        let (x, rep) = solve(&a, &f, &b, &SolveOptions::default()).unwrap();
        assert_eq!(x, b);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn diagonal_solve() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let f = factor(&a);
        let (x, _) = solve(&a, &f, &[2.0, 4.0], &SolveOptions::default()).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn length_is_checked() {
        let a = CsrMatrix::identity(3).unwrap();
        let f = factor(&a);
        assert!(matches!(
            solve(&a, &f, &[1.0], &SolveOptions::default()),
            Err(Error::DimensionMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn backward_hand_example() {
        // U = [[2,1],[0,4]] with natural order and no scaling effects on U
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![0.0, 4.0]]).unwrap();
        let f = factor(&a);
        let s = TriangularSolver::new(&f, &SolveOptions::default()).unwrap();
        let y = vec![1.0, 1.0];
        let x = s.backward_substitution(&y).unwrap();
        // U x = y on the factor's own U
        let u = f.u_values();
        let up = f.u_pattern();
        for i in 0..2 {
            let r = up.row_range(i);
            let lhs: f64 = r.clone().map(|k| u[k] * x[up.indices()[k]]).sum();
            assert!((lhs - y[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn refinement_stops_when_singular() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let f = factor(&a);
        assert!(!f.perturbed().is_empty());
        let (_, rep) = solve(&a, &f, &[1.0, 2.0], &SolveOptions::default()).unwrap();
        assert!(!rep.converged);
        assert!(rep.iterations <= 5);
        assert!(rep.backward_errors.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn options_set() {
        let mut o = SolveOptions::default();
        assert!(o.set("refine_tolerance", "1e-10").unwrap());
        assert!(o.set("small_tri_threshold", "10").unwrap());
        assert!(!o.set("nope", "1").unwrap());
        assert!(o.set("max_refine_iters", "x").is_err());
    }
}
