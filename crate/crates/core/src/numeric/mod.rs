//! Numerical LU factorization on top of a symbolic analysis.
//!
//! Nodes are processed in pivot order by the scheduler. Each node is built in
//! a dense panel: the rows of the permuted scaled matrix are scattered in,
//! every finished dependency is applied in ascending order with the update
//! primitive chosen by (target kind, source kind, kernel mode), and the
//! diagonal block is factorized with pivoting confined to the block.

mod dense;
mod kernels;

use std::sync::{Arc, OnceLock};

pub use dense::gemm;
pub use kernels::{
    internal_factorize, map_source, pivot_perturb, update_row_by_row, update_row_by_sup, update_sup_by_sup,
    PivotRule, SourcePanel, NO_POS,
};

use crate::error::{Error, Result};
use crate::matrix::CsrMatrix;
use crate::preprocess::{bulk_cutoff, Analysis, KernelMode, Pattern};
use crate::sched::{self, NodeGate};

pub const DEFAULT_PERTURBATION_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FactorOptions {
    /// Forces a kernel tier instead of the one chosen during analysis.
    pub kernel_override: Option<KernelMode>,
    /// Pivots below `perturbation_epsilon * anorm` are replaced; zero
    /// disables perturbation.
    pub perturbation_epsilon: f64,
    pub threads: usize,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self {
            kernel_override: None,
            perturbation_epsilon: DEFAULT_PERTURBATION_EPSILON,
            threads: 1,
        }
    }
}

impl FactorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.perturbation_epsilon) {
            return Err(Error::InvalidConfig("perturbation_epsilon must lie in [0, 1)".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Sets an option by its configuration name. Returns `Ok(false)` when
    /// the name is not a factorization option.
    pub fn set(&mut self, name: &str, value: &str) -> Result<bool> {
        let bad = |e: &dyn std::fmt::Display| Error::InvalidConfig(format!("{name}={value}: {e}"));
        match name {
            "perturbation_epsilon" => self.perturbation_epsilon = value.parse().map_err(|e| bad(&e))?,
            "kernel" => {
                self.kernel_override = match value {
                    "auto" => None,
                    v => Some(v.parse()?),
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Computed factors `L U = Pi M`, where `M` is the scaled permuted matrix
/// and `Pi` the row exchanges made inside supernodes.
///
/// L has a unit diagonal and is stored along the analysis' L storage
/// pattern; U is stored along the U pattern with the pivot first in each row.
#[derive(Debug, Clone)]
pub struct NumericFactors {
    analysis: Arc<Analysis>,
    kernel_mode: KernelMode,
    l_values: Vec<f64>,
    u_values: Vec<f64>,
    inner_perm: Vec<usize>,
    row_order: Vec<usize>,
    factor_rows: Vec<usize>,
    perturbed: Vec<(usize, f64)>,
    anorm: f64,
    epsilon: f64,
}

impl NumericFactors {
    pub fn analysis(&self) -> &Arc<Analysis> {
        &self.analysis
    }

    pub fn n(&self) -> usize {
        self.analysis.n()
    }

    pub fn kernel_mode(&self) -> KernelMode {
        self.kernel_mode
    }

    pub fn l_pattern(&self) -> &Pattern {
        &self.analysis.symbolic.l_factor
    }

    pub fn u_pattern(&self) -> &Pattern {
        &self.analysis.symbolic.u_pattern
    }

    /// Strictly lower L values aligned with [`NumericFactors::l_pattern`].
    pub fn l_values(&self) -> &[f64] {
        &self.l_values
    }

    /// U values aligned with [`NumericFactors::u_pattern`], pivot first.
    pub fn u_values(&self) -> &[f64] {
        &self.u_values
    }

    pub fn u_diag(&self, row: usize) -> f64 {
        self.u_values[self.u_pattern().ptr()[row]]
    }

    /// For factor row `first + t` of a node, the node-local index of the row
    /// of `M` that ended up there.
    pub fn inner_perm(&self) -> &[usize] {
        &self.inner_perm
    }

    /// Row of `M` held by each factor row.
    pub fn row_order(&self) -> &[usize] {
        &self.row_order
    }

    /// Row of the original matrix held by each factor row.
    pub fn factor_rows(&self) -> &[usize] {
        &self.factor_rows
    }

    /// `(factor row, pivot before perturbation)` for every perturbed pivot.
    pub fn perturbed(&self) -> &[(usize, f64)] {
        &self.perturbed
    }

    /// Largest magnitude in `M`.
    pub fn anorm(&self) -> f64 {
        self.anorm
    }

    pub fn perturbation_epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Whether two factorizations hold bitwise identical values and row
    /// choices.
    pub fn bitwise_eq(&self, other: &NumericFactors) -> bool {
        let same = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        same(&self.l_values, &other.l_values)
            && same(&self.u_values, &other.u_values)
            && self.inner_perm == other.inner_perm
            && self.perturbed.len() == other.perturbed.len()
    }
}

/// Factorizes `a`, which must have exactly the pattern `analysis` was built
/// from.
pub fn factorize(a: &CsrMatrix, analysis: Arc<Analysis>, opts: &FactorOptions) -> Result<NumericFactors> {
    run(a, analysis, opts, None)
}

/// Factorizes new values on the pattern of `prior`, reusing its scalings,
/// orderings, symbolic structure and the row exchanges chosen inside
/// supernodes. Perturbation stays active.
pub fn refactorize(a: &CsrMatrix, prior: &NumericFactors, opts: &FactorOptions) -> Result<NumericFactors> {
    if a.n() != prior.n() || !prior.analysis.matches_pattern(a) {
        return Err(Error::PatternMismatch);
    }
    run(a, prior.analysis.clone(), opts, Some(&prior.inner_perm))
}

struct NodePanel {
    values: Vec<f64>,
    inner: Vec<usize>,
    perturbed: Vec<(usize, f64)>,
}

/// Per-worker scratch space.
struct Work {
    pos: Vec<u32>,
    block_pos: Vec<u32>,
    trailing_pos: Vec<u32>,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self {
            pos: vec![NO_POS; n],
            block_pos: Vec::new(),
            trailing_pos: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
        }
    }
}

struct Factorizer<'a> {
    analysis: &'a Analysis,
    m_values: &'a [f64],
    mode: KernelMode,
    rule: PivotRule,
    prior_inner: Option<&'a [usize]>,
    results: &'a [OnceLock<NodePanel>],
}

impl Factorizer<'_> {
    fn source<'s>(&'s self, v: usize, panel: &'s NodePanel) -> SourcePanel<'s> {
        let sym = &self.analysis.symbolic;
        let node = &sym.nodes[v];
        let (lcols, ucols) = sym.node_columns(v);
        SourcePanel {
            first_row: node.first_row,
            rows: node.row_count,
            n_lower: lcols.len(),
            ncols: lcols.len() + ucols.len(),
            u_cols: ucols,
            values: &panel.values,
        }
    }

    /// Computes node `u`; `None` means the run was aborted while waiting.
    fn node(&self, w: &mut Work, u: usize, gate: &NodeGate) -> Result<Option<NodePanel>> {
        let sym = &self.analysis.symbolic;
        let node = &sym.nodes[u];
        let (first, rows) = (node.first_row, node.row_count);
        let (lcols, ucols) = sym.node_columns(u);
        let n_lower = lcols.len();
        let ncols = n_lower + ucols.len();
        for (k, &c) in lcols.iter().chain(ucols).enumerate() {
            w.pos[c] = k as u32;
        }
        let out = self.fill_panel(w, u, gate, first, rows, n_lower, ncols);
        for &c in lcols.iter().chain(ucols) {
            w.pos[c] = NO_POS;
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn fill_panel(
        &self,
        w: &mut Work,
        u: usize,
        gate: &NodeGate,
        first: usize,
        rows: usize,
        n_lower: usize,
        ncols: usize,
    ) -> Result<Option<NodePanel>> {
        let sym = &self.analysis.symbolic;
        let pm = &sym.permuted;
        let mut values = vec![0.0; rows * ncols];
        let mut inner: Vec<usize> = match self.prior_inner {
            Some(p) => p[first..first + rows].to_vec(),
            None => (0..rows).collect(),
        };
        for (t, &local) in inner.iter().enumerate() {
            let m_row = first + local;
            let row = &mut values[t * ncols..(t + 1) * ncols];
            for k in pm.row_ptr[m_row]..pm.row_ptr[m_row + 1] {
                row[w.pos[pm.col_idx[k]] as usize] = self.m_values[k];
            }
        }

        let target_is_sup = sym.nodes[u].is_supernode();
        for &v in &sym.nodes[u].deps {
            if !gate.wait(v) {
                return Ok(None);
            }
            let panel = self.results[v].get().expect("finished node has a panel");
            let src = self.source(v, panel);
            if src.rows == 1 || self.mode == KernelMode::RowRow {
                for t in 0..rows {
                    let row = &mut values[t * ncols..(t + 1) * ncols];
                    for a in 0..src.rows {
                        update_row_by_row(row, &w.pos, &src, a);
                    }
                }
                continue;
            }
            let a0 = map_source(&src, &w.pos, &mut w.block_pos, &mut w.trailing_pos);
            if a0 == src.rows {
                continue;
            }
            if self.mode == KernelMode::SupSup && target_is_sup {
                update_sup_by_sup(
                    &mut values,
                    rows,
                    ncols,
                    &src,
                    a0,
                    &w.block_pos,
                    &w.trailing_pos,
                    &mut w.x,
                    &mut w.y,
                );
            } else {
                for t in 0..rows {
                    let row = &mut values[t * ncols..(t + 1) * ncols];
                    update_row_by_sup(row, &src, a0, &w.block_pos, &w.trailing_pos, &mut w.x, &mut w.y);
                }
            }
        }

        let mut perturbed = Vec::new();
        internal_factorize(&mut values, rows, ncols, n_lower, first, &mut inner, self.rule, &mut perturbed)?;
        Ok(Some(NodePanel {
            values,
            inner,
            perturbed,
        }))
    }
}

fn run(a: &CsrMatrix, analysis: Arc<Analysis>, opts: &FactorOptions, prior_inner: Option<&[usize]>) -> Result<NumericFactors> {
    opts.validate()?;
    if a.n() != analysis.n() {
        return Err(Error::DimensionMismatch {
            expected: analysis.n(),
            found: a.n(),
        });
    }
    if !analysis.matches_pattern(a) {
        return Err(Error::PatternMismatch);
    }
    let sym = &analysis.symbolic;
    let n = sym.n;
    let m_values = sym.permuted.values(a.values(), &analysis.pivot);
    let anorm = m_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mode = opts.kernel_override.unwrap_or(sym.kernel_mode);
    let results: Vec<OnceLock<NodePanel>> = (0..sym.nodes.len()).map(|_| OnceLock::new()).collect();
    let f = Factorizer {
        analysis: &analysis,
        m_values: &m_values,
        mode,
        rule: PivotRule {
            search: prior_inner.is_none(),
            anorm,
            epsilon: opts.perturbation_epsilon,
        },
        prior_inner,
        results: &results,
    };

    let threads = opts.threads;
    let cutoff = bulk_cutoff(&sym.levels, analysis.options.bulk_width_factor.max(1) * threads);
    sched::execute(
        &sym.levels,
        cutoff,
        threads,
        || Work::new(n),
        |w, u, gate| {
            if let Some(panel) = f.node(w, u, gate)? {
                if results[u].set(panel).is_err() {
                    unreachable!("node {u} computed twice");
                }
            }
            Ok::<(), Error>(())
        },
    )?;

    let mut l_values = Vec::with_capacity(sym.l_factor.nnz());
    let mut u_values = Vec::with_capacity(sym.u_pattern.nnz());
    let mut inner_perm = vec![0; n];
    let mut row_order = vec![0; n];
    let mut perturbed = Vec::new();
    for (u, node) in sym.nodes.iter().enumerate() {
        let panel = results[u].get().expect("every node finished");
        let (lcols, ucols) = sym.node_columns(u);
        let n_lower = lcols.len();
        let ncols = n_lower + ucols.len();
        for t in 0..node.row_count {
            let row = &panel.values[t * ncols..(t + 1) * ncols];
            l_values.extend_from_slice(&row[..n_lower + t]);
            u_values.extend_from_slice(&row[n_lower + t..]);
            inner_perm[node.first_row + t] = panel.inner[t];
            row_order[node.first_row + t] = node.first_row + panel.inner[t];
        }
        perturbed.extend_from_slice(&panel.perturbed);
    }
    debug_assert_eq!(l_values.len(), sym.l_factor.nnz());
    debug_assert_eq!(u_values.len(), sym.u_pattern.nnz());
    let factor_rows = row_order.iter().map(|&r| sym.permuted.row_orig[r]).collect();

    Ok(NumericFactors {
        kernel_mode: mode,
        l_values,
        u_values,
        inner_perm,
        row_order,
        factor_rows,
        perturbed,
        anorm,
        epsilon: opts.perturbation_epsilon,
        analysis,
    })
}
