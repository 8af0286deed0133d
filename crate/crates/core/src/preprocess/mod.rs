//! Static pivoting, fill-reducing ordering and symbolic factorization.

mod amd;
mod matching;
mod symbolic;

pub use amd::{amd_order, SymmetricPattern};
pub use matching::static_pivot;
pub use symbolic::{
    bulk_cutoff, build_task_graph, compute_levels, detect_supernodes, select_kernel, symbolic_factorize,
    KernelMode, Node, NodeKind, Pattern, PermutedMatrix, SymbolicStructure,
};

pub(crate) use symbolic::compute_levels_from;

use crate::error::{Error, Result};
use crate::matrix::CsrMatrix;

/// Row permutation and scalings chosen by static pivoting.
///
/// Row `k` of the pivoted matrix is row `row_perm[k]` of `A`; the scaled
/// entry is `dr[i] * a_ij * dc[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotScale {
    pub row_perm: Vec<usize>,
    pub dr: Vec<f64>,
    pub dc: Vec<f64>,
}

impl PivotScale {
    pub fn identity(n: usize) -> Self {
        Self {
            row_perm: (0..n).collect(),
            dr: vec![1.0; n],
            dc: vec![1.0; n],
        }
    }
}

/// Symmetric permutation applied after static pivoting: position `k` holds
/// index `perm[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    pub perm: Vec<usize>,
    pub inverse_perm: Vec<usize>,
}

impl Ordering {
    pub fn natural(n: usize) -> Self {
        Self::from_perm((0..n).collect())
    }

    /// Panics if `perm` is not a permutation; use [`Ordering::try_from_perm`]
    /// for untrusted input.
    pub fn from_perm(perm: Vec<usize>) -> Self {
        Self::try_from_perm(perm).expect("valid permutation")
    }

    pub fn try_from_perm(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut inverse_perm = vec![usize::MAX; n];
        for (k, &p) in perm.iter().enumerate() {
            if p >= n || inverse_perm[p] != usize::MAX {
                return Err(Error::InvalidConfig(format!("ordering is not a permutation of 0..{n}")));
            }
            inverse_perm[p] = k;
        }
        Ok(Self { perm, inverse_perm })
    }
}

/// How the fill-reducing ordering is produced.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum OrderingMethod {
    #[default]
    Amd,
    Natural,
    /// A caller-supplied permutation of the statically pivoted matrix.
    User(Vec<usize>),
}

impl OrderingMethod {
    pub fn name(&self) -> &'static str {
        match self {
            OrderingMethod::Amd => "amd",
            OrderingMethod::Natural => "natural",
            OrderingMethod::User(_) => "user",
        }
    }

    /// Orders the pattern of `B + B^T`, where `B` is `A` after the static
    /// pivoting row permutation.
    pub fn order(&self, a: &CsrMatrix, ps: &PivotScale) -> Result<Ordering> {
        let n = a.n();
        match self {
            OrderingMethod::Natural => Ok(Ordering::natural(n)),
            OrderingMethod::User(p) => {
                if p.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        found: p.len(),
                    });
                }
                Ordering::try_from_perm(p.clone())
            }
            OrderingMethod::Amd => {
                let pattern = SymmetricPattern::from_rows(n, |k| a.row(ps.row_perm[k]).0);
                Ok(amd_order(&pattern))
            }
        }
    }
}

/// Tuning knobs of the analysis phase.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub min_supernode_rows: usize,
    pub max_supernode_rows: usize,
    /// Below this flops-per-entry ratio the row-row kernel is used.
    pub kernel_q_rowrow: f64,
    /// Below this ratio (and above `kernel_q_rowrow`) the sup-row kernel is used.
    pub kernel_q_suprow: f64,
    /// Minimum fraction of rows inside supernodes for any supernodal kernel.
    pub kernel_rho_min: f64,
    /// Levels at least `bulk_width_factor * threads` wide run in bulk mode.
    pub bulk_width_factor: usize,
    pub ordering: OrderingMethod,
    pub kernel_override: Option<KernelMode>,
    pub threads: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            min_supernode_rows: 2,
            max_supernode_rows: 64,
            kernel_q_rowrow: 8.0,
            kernel_q_suprow: 64.0,
            kernel_rho_min: 0.1,
            bulk_width_factor: 2,
            ordering: OrderingMethod::Amd,
            kernel_override: None,
            threads: 1,
        }
    }
}

impl AnalyzeOptions {
    pub fn bulk_width_threshold(&self) -> usize {
        (self.bulk_width_factor * self.threads.max(1)).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_supernode_rows == 0 || self.max_supernode_rows < self.min_supernode_rows {
            return Err(Error::InvalidConfig(
                "need 1 <= min_supernode_rows <= max_supernode_rows".into(),
            ));
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        if !(self.kernel_q_rowrow <= self.kernel_q_suprow) {
            return Err(Error::InvalidConfig("kernel_q_rowrow must not exceed kernel_q_suprow".into()));
        }
        Ok(())
    }

    /// Sets a threshold by its configuration name. Returns `Ok(false)` when
    /// the name is not an analysis option.
    pub fn set(&mut self, name: &str, value: &str) -> Result<bool> {
        let bad = |e: &dyn std::fmt::Display| Error::InvalidConfig(format!("{name}={value}: {e}"));
        match name {
            "min_supernode_rows" => self.min_supernode_rows = value.parse().map_err(|e| bad(&e))?,
            "max_supernode_rows" => self.max_supernode_rows = value.parse().map_err(|e| bad(&e))?,
            "kernel_q_rowrow" => self.kernel_q_rowrow = value.parse().map_err(|e| bad(&e))?,
            "kernel_q_suprow" => self.kernel_q_suprow = value.parse().map_err(|e| bad(&e))?,
            "kernel_rho_min" => self.kernel_rho_min = value.parse().map_err(|e| bad(&e))?,
            "bulk_width_factor" => self.bulk_width_factor = value.parse().map_err(|e| bad(&e))?,
            "ordering" => {
                self.ordering = match value {
                    "amd" => OrderingMethod::Amd,
                    "natural" => OrderingMethod::Natural,
                    _ => return Err(bad(&"expected amd or natural")),
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Result of the complete preprocessing phase; immutable and shareable.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub pivot: PivotScale,
    pub ordering: Ordering,
    pub symbolic: SymbolicStructure,
    pub options: AnalyzeOptions,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Analysis {
    pub fn n(&self) -> usize {
        self.symbolic.n
    }

    /// Whether `a` has exactly the pattern this analysis was built for.
    pub fn matches_pattern(&self, a: &CsrMatrix) -> bool {
        a.n() == self.n() && a.row_ptr() == self.row_ptr.as_slice() && a.col_idx() == self.col_idx.as_slice()
    }
}

/// Static pivoting, ordering and symbolic factorization of `a`.
pub fn analyze(a: &CsrMatrix, opts: &AnalyzeOptions) -> Result<Analysis> {
    opts.validate()?;
    let pivot = static_pivot(a)?;
    let ordering = opts.ordering.order(a, &pivot)?;
    let symbolic = symbolic_factorize(a, &pivot, &ordering, opts)?;
    Ok(Analysis {
        pivot,
        ordering,
        symbolic,
        options: opts.clone(),
        row_ptr: a.row_ptr().to_vec(),
        col_idx: a.col_idx().to_vec(),
    })
}
