//! Symbolic factorization, supernode detection and task-graph construction.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{AnalyzeOptions, Ordering, PivotScale};
use crate::error::{Error, Result};
use crate::matrix::CsrMatrix;

/// Row-wise index lists in compressed form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pattern {
    ptr: Vec<usize>,
    idx: Vec<usize>,
}

impl Pattern {
    fn with_capacity(rows: usize, nnz: usize) -> Self {
        let mut ptr = Vec::with_capacity(rows + 1);
        ptr.push(0);
        Self {
            ptr,
            idx: Vec::with_capacity(nnz),
        }
    }

    pub fn from_rows<I, R>(rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[usize]>,
    {
        let mut p = Self::with_capacity(0, 0);
        for r in rows {
            p.push_row(r.as_ref());
        }
        p
    }

    fn push_row(&mut self, row: &[usize]) {
        self.idx.extend_from_slice(row);
        self.ptr.push(self.idx.len());
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.idx[self.ptr[i]..self.ptr[i + 1]]
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> Range<usize> {
        self.ptr[i]..self.ptr[i + 1]
    }

    pub fn rows(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn ptr(&self) -> &[usize] {
        &self.ptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }
}

/// Numerical kernel tier used during factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    RowRow,
    SupRow,
    SupSup,
}

impl KernelMode {
    pub fn name(self) -> &'static str {
        match self {
            KernelMode::RowRow => "rowrow",
            KernelMode::SupRow => "suprow",
            KernelMode::SupSup => "supsup",
        }
    }
}

impl std::str::FromStr for KernelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rowrow" => Ok(KernelMode::RowRow),
            "suprow" => Ok(KernelMode::SupRow),
            "supsup" => Ok(KernelMode::SupSup),
            other => Err(Error::InvalidConfig(format!("unknown kernel mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    StandaloneRow,
    Supernode,
}

/// A task of the factorization: one standalone row or one supernode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub first_row: usize,
    pub row_count: usize,
    /// Nodes whose finished rows this node reads, ascending.
    pub deps: Vec<usize>,
}

impl Node {
    pub fn rows(&self) -> Range<usize> {
        self.first_row..self.first_row + self.row_count
    }

    pub fn is_supernode(&self) -> bool {
        self.kind == NodeKind::Supernode
    }
}

/// Pattern of `M = P (Dr A Dc) Q` with the source position of every entry.
#[derive(Debug, Clone)]
pub struct PermutedMatrix {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    /// Index into the values of `A` for each entry of `M`.
    pub src: Vec<usize>,
    /// Row of `A` that becomes row `i` of `M`.
    pub row_orig: Vec<usize>,
    /// Column of `A` that becomes column `j` of `M`.
    pub col_orig: Vec<usize>,
}

impl PermutedMatrix {
    fn new(a: &CsrMatrix, ps: &PivotScale, ord: &Ordering) -> Result<Self> {
        let n = a.n();
        let row_orig: Vec<usize> = ord.perm.iter().map(|&k| ps.row_perm[k]).collect();
        let col_orig = ord.perm.clone();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(a.nnz());
        let mut src = Vec::with_capacity(a.nnz());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, usize)> = Vec::new();
        for (i, &orow) in row_orig.iter().enumerate() {
            let start = a.row_ptr()[orow];
            let (cols, _) = a.row(orow);
            scratch.clear();
            scratch.extend(cols.iter().enumerate().map(|(k, &c)| (ord.inverse_perm[c], start + k)));
            scratch.sort_unstable();
            if scratch.binary_search_by_key(&i, |&(c, _)| c).is_err() {
                return Err(Error::ZeroDiagonal { row: i });
            }
            for &(c, k) in &scratch {
                col_idx.push(c);
                src.push(k);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            row_ptr,
            col_idx,
            src,
            row_orig,
            col_orig,
        })
    }

    pub fn n(&self) -> usize {
        self.row_orig.len()
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Values of `M` for the given `A` values and scalings.
    pub fn values(&self, a_values: &[f64], ps: &PivotScale) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n() {
            let dr = ps.dr[self.row_orig[i]];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let dc = ps.dc[self.col_orig[self.col_idx[k]]];
                out.push(dr * a_values[self.src[k]] * dc);
            }
        }
        out
    }
}

/// Everything about the factors that is fixed before numerical work.
#[derive(Debug, Clone)]
pub struct SymbolicStructure {
    pub n: usize,
    /// Exact U pattern per row, diagonal first.
    pub u_pattern: Pattern,
    /// Exact strictly-lower L pattern per row.
    pub l_pattern: Pattern,
    /// Storage pattern of L: supernode rows share the union of their
    /// off-block L columns plus the dense lower part of the diagonal block.
    pub l_factor: Pattern,
    pub nodes: Vec<Node>,
    pub node_of_row: Vec<usize>,
    pub flops: u64,
    pub fill_nnz: usize,
    pub supernode_row_fraction: f64,
    pub kernel_mode: KernelMode,
    pub levels: Vec<Vec<usize>>,
    pub bulk_level_cutoff: usize,
    pub permuted: PermutedMatrix,
}

impl SymbolicStructure {
    pub fn supernode_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_supernode()).count()
    }

    pub fn standalone_row_count(&self) -> usize {
        self.nodes.len() - self.supernode_count()
    }

    /// Column indices of a node's panel: its L storage columns followed by
    /// the U pattern of its first row.
    pub fn node_columns(&self, node: usize) -> (&[usize], &[usize]) {
        let r = self.nodes[node].first_row;
        (self.l_factor.row(r), self.u_pattern.row(r))
    }
}

/// Runs the symbolic phase on `A` after static pivoting and ordering.
pub fn symbolic_factorize(
    a: &CsrMatrix,
    ps: &PivotScale,
    ord: &Ordering,
    opts: &AnalyzeOptions,
) -> Result<SymbolicStructure> {
    let n = a.n();
    let permuted = PermutedMatrix::new(a, ps, ord)?;
    let (u_pattern, l_pattern) = lu_pattern(n, &permuted.row_ptr, &permuted.col_idx);

    let mut l_col_count = vec![0u64; n];
    for &c in l_pattern.indices() {
        l_col_count[c] += 1;
    }
    let flops = (0..n)
        .map(|k| {
            let lk = l_col_count[k];
            let uk = (u_pattern.row(k).len() - 1) as u64;
            2 * lk * uk + lk
        })
        .sum();
    let fill_nnz = u_pattern.nnz() + l_pattern.nnz();

    let mut nodes = detect_supernodes(&u_pattern, opts.min_supernode_rows, opts.max_supernode_rows);
    let mut node_of_row = vec![0; n];
    for (k, node) in nodes.iter().enumerate() {
        for r in node.rows() {
            node_of_row[r] = k;
        }
    }
    let l_factor = storage_pattern(&l_pattern, &nodes);
    build_task_graph(&l_pattern, &mut nodes, &node_of_row);
    let (levels, bulk_level_cutoff) = compute_levels(&nodes, opts.bulk_width_threshold())?;

    let sn_rows: usize = nodes.iter().filter(|n| n.is_supernode()).map(|n| n.row_count).sum();
    let rho = sn_rows as f64 / n as f64;
    let kernel_mode = opts
        .kernel_override
        .unwrap_or_else(|| select_kernel(flops, fill_nnz, rho, opts));

    Ok(SymbolicStructure {
        n,
        u_pattern,
        l_pattern,
        l_factor,
        nodes,
        node_of_row,
        flops,
        fill_nnz,
        supernode_row_fraction: rho,
        kernel_mode,
        levels,
        bulk_level_cutoff,
        permuted,
    })
}

/// No-cancellation L and U patterns by row-wise reachability.
///
/// The L part of row `i` is the set of columns `j < i` reachable from the
/// row's own entries through the U rows already computed; the U part is
/// everything reached at or beyond the diagonal. U rows are pruned at the
/// first symmetric pair `L(i, j), U(j, i)`, since everything beyond `i` in
/// row `j` is also in row `i`.
pub(crate) fn lu_pattern(n: usize, row_ptr: &[usize], col_idx: &[usize]) -> (Pattern, Pattern) {
    let mut u = Pattern::with_capacity(n, row_ptr[n]);
    let mut l = Pattern::with_capacity(n, row_ptr[n]);
    let mut prune = vec![0usize; n];
    let mut pruned = vec![false; n];
    let mut mark = vec![usize::MAX; n];
    let mut lrow: Vec<usize> = Vec::new();
    let mut urow: Vec<usize> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    for i in 0..n {
        lrow.clear();
        urow.clear();
        mark[i] = i;
        urow.push(i);
        for &c in &col_idx[row_ptr[i]..row_ptr[i + 1]] {
            if mark[c] == i {
                continue;
            }
            mark[c] = i;
            if c > i {
                urow.push(c);
                continue;
            }
            lrow.push(c);
            stack.push(c);
            while let Some(j) = stack.pop() {
                let range = u.ptr[j] + 1..u.ptr[j] + prune[j];
                for p in range {
                    let k = u.idx[p];
                    if mark[k] == i {
                        continue;
                    }
                    mark[k] = i;
                    if k < i {
                        lrow.push(k);
                        stack.push(k);
                    } else {
                        urow.push(k);
                    }
                }
            }
        }
        lrow.sort_unstable();
        urow[1..].sort_unstable();
        u.push_row(&urow);
        l.push_row(&lrow);
        prune[i] = urow.len();

        for &j in &lrow {
            if pruned[j] {
                continue;
            }
            let uj = &u.idx[u.ptr[j]..u.ptr[j + 1]];
            if let Ok(p) = uj.binary_search(&i) {
                prune[j] = p + 1;
                pruned[j] = true;
            }
        }
    }
    (u, l)
}

/// Splits the rows into supernodes (maximal runs of nested U rows) and
/// standalone rows.
pub fn detect_supernodes(u_pattern: &Pattern, min_rows: usize, max_rows: usize) -> Vec<Node> {
    let n = u_pattern.rows();
    let min_rows = min_rows.max(1);
    let max_rows = max_rows.max(min_rows);
    let mut nodes = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && u_pattern.row(end) == &u_pattern.row(end - 1)[1..] {
            end += 1;
        }
        let len = end - start;
        if len < min_rows || len == 1 {
            for r in start..end {
                nodes.push(Node {
                    kind: NodeKind::StandaloneRow,
                    first_row: r,
                    row_count: 1,
                    deps: Vec::new(),
                });
            }
        } else {
            let chunks = len.div_ceil(max_rows);
            let base = len / chunks;
            let extra = len % chunks;
            let mut r = start;
            for c in 0..chunks {
                let size = base + usize::from(c < extra);
                let kind = if size >= 2 {
                    NodeKind::Supernode
                } else {
                    NodeKind::StandaloneRow
                };
                nodes.push(Node {
                    kind,
                    first_row: r,
                    row_count: size,
                    deps: Vec::new(),
                });
                r += size;
            }
        }
        start = end;
    }
    nodes
}

fn storage_pattern(l_pattern: &Pattern, nodes: &[Node]) -> Pattern {
    let mut out = Pattern::with_capacity(l_pattern.rows(), l_pattern.nnz());
    let mut union: Vec<usize> = Vec::new();
    for node in nodes {
        if !node.is_supernode() {
            out.push_row(l_pattern.row(node.first_row));
            continue;
        }
        let r = node.first_row;
        union.clear();
        for row in node.rows() {
            union.extend(l_pattern.row(row).iter().copied().filter(|&c| c < r));
        }
        union.sort_unstable();
        union.dedup();
        let nl = union.len();
        for t in 0..node.row_count {
            union.truncate(nl);
            union.extend(r..r + t);
            out.push_row(&union);
        }
    }
    out
}

/// Fills each node's dependency list: node `u` depends on `v < u` when a row
/// of `u` has an L entry in a column owned by `v`.
pub fn build_task_graph(l_pattern: &Pattern, nodes: &mut [Node], node_of_row: &[usize]) {
    let mut mark = vec![usize::MAX; nodes.len()];
    for u in 0..nodes.len() {
        let mut deps = Vec::new();
        for row in nodes[u].rows() {
            for &c in l_pattern.row(row) {
                let v = node_of_row[c];
                if v != u && mark[v] != u {
                    mark[v] = u;
                    deps.push(v);
                }
            }
        }
        deps.sort_unstable();
        nodes[u].deps = deps;
    }
}

/// Longest-path levels of the task graph and the first level run in pipeline
/// mode (the first level narrower than `bulk_width_threshold`).
pub fn compute_levels(nodes: &[Node], bulk_width_threshold: usize) -> Result<(Vec<Vec<usize>>, usize)> {
    let deps: Vec<&[usize]> = nodes.iter().map(|n| n.deps.as_slice()).collect();
    compute_levels_from(&deps, bulk_width_threshold)
}

pub(crate) fn compute_levels_from(
    deps: &[&[usize]],
    bulk_width_threshold: usize,
) -> Result<(Vec<Vec<usize>>, usize)> {
    let mut level = vec![0usize; deps.len()];
    let mut levels: Vec<Vec<usize>> = Vec::new();
    for (u, d) in deps.iter().enumerate() {
        let mut lv = 0;
        for &v in d.iter() {
            if v >= u {
                return Err(Error::CycleDetected { node: u });
            }
            lv = lv.max(level[v] + 1);
        }
        level[u] = lv;
        if levels.len() <= lv {
            levels.resize_with(lv + 1, Vec::new);
        }
        levels[lv].push(u);
    }
    let cutoff = bulk_cutoff(&levels, bulk_width_threshold);
    Ok((levels, cutoff))
}

/// Index of the first level whose width is below the threshold.
pub fn bulk_cutoff(levels: &[Vec<usize>], bulk_width_threshold: usize) -> usize {
    levels
        .iter()
        .position(|l| l.len() < bulk_width_threshold)
        .unwrap_or(levels.len())
}

/// Picks the kernel tier from flops per factor entry and supernode coverage.
pub fn select_kernel(flops: u64, fill_nnz: usize, supernode_row_fraction: f64, opts: &AnalyzeOptions) -> KernelMode {
    let q = if fill_nnz == 0 {
        0.0
    } else {
        flops as f64 / fill_nnz as f64
    };
    if supernode_row_fraction < opts.kernel_rho_min || q < opts.kernel_q_rowrow {
        KernelMode::RowRow
    } else if q < opts.kernel_q_suprow {
        KernelMode::SupRow
    } else {
        KernelMode::SupSup
    }
}
