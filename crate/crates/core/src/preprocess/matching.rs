//! Static pivoting by maximum-product bipartite matching with scaling.
//!
//! Each column `j` gets costs `c_ij = ln(max_i |a_ij|) - ln|a_ij|` over its
//! nonzero entries. A minimum-cost perfect matching on these costs maximizes
//! the product of the matched magnitudes. It is found by successive shortest
//! augmenting paths (Dijkstra on reduced costs), which also yields dual
//! variables `u` (rows) and `v` (columns) with `c_ij - u_i - v_j >= 0` and
//! equality on matched edges. The scalings `dr_i = exp(u_i)`,
//! `dc_j = exp(v_j) / max_i |a_ij|` then map matched entries to magnitude one
//! and bound every other entry by one.

use std::cmp::Ordering as CmpOrdering;
use std::collections::BinaryHeap;

use super::PivotScale;
use crate::error::{Error, Result};
use crate::matrix::CsrMatrix;

const UNMATCHED: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct HeapItem {
    dist: f64,
    row: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == CmpOrdering::Equal
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // min-heap on (dist, row)
    fn cmp(&self, other: &Self) -> CmpOrdering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.row.cmp(&self.row))
    }
}

/// Column-oriented view of the nonzero entries with their matching costs.
struct CostGraph {
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    cost: Vec<f64>,
    abs: Vec<f64>,
}

impl CostGraph {
    fn new(a: &CsrMatrix) -> Self {
        let n = a.n();
        let at = a.transpose();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut rows = Vec::with_capacity(a.nnz());
        let mut cost = Vec::with_capacity(a.nnz());
        let mut abs = Vec::with_capacity(a.nnz());
        col_ptr.push(0);
        for j in 0..n {
            let (ri, vals) = at.row(j);
            let cmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let lmax = cmax.ln();
            for (&i, &v) in ri.iter().zip(vals) {
                // zero entries cannot be matched
                if v != 0.0 && v.is_finite() {
                    rows.push(i);
                    abs.push(v.abs());
                    cost.push(lmax - v.abs().ln());
                }
            }
            col_ptr.push(rows.len());
        }
        Self {
            col_ptr,
            rows,
            cost,
            abs,
        }
    }

    #[inline]
    fn col(&self, j: usize) -> std::ops::Range<usize> {
        self.col_ptr[j]..self.col_ptr[j + 1]
    }
}

/// Computes the row permutation and scalings of static pivoting.
pub fn static_pivot(a: &CsrMatrix) -> Result<PivotScale> {
    let n = a.n();
    let g = CostGraph::new(a);

    // u_i = min_j c_ij keeps every reduced cost nonnegative with v = 0
    let mut u = vec![f64::INFINITY; n];
    for j in 0..n {
        for p in g.col(j) {
            let i = g.rows[p];
            u[i] = u[i].min(g.cost[p]);
        }
    }
    let mut v = vec![0.0f64; n];
    let mut match_row = vec![UNMATCHED; n]; // row -> column
    let mut match_col = vec![UNMATCHED; n]; // column -> row

    // cheap start: match along tight edges
    for j in 0..n {
        for p in g.col(j) {
            let i = g.rows[p];
            if match_row[i] == UNMATCHED && g.cost[p] - u[i] == 0.0 {
                match_row[i] = j;
                match_col[j] = i;
                break;
            }
        }
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![UNMATCHED; n];
    let mut done = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut finalized: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut deficient = Vec::new();

    for root in 0..n {
        if match_col[root] != UNMATCHED {
            continue;
        }
        heap.clear();
        finalized.clear();

        let scan = |j: usize,
                        dj: f64,
                        dist: &mut [f64],
                        pred: &mut [usize],
                        done: &[bool],
                        touched: &mut Vec<usize>,
                        heap: &mut BinaryHeap<HeapItem>,
                        u: &[f64],
                        v: &[f64]| {
            for p in g.col(j) {
                let i = g.rows[p];
                if done[i] {
                    continue;
                }
                let reduced = (g.cost[p] - u[i] - v[j]).max(0.0);
                let nd = dj + reduced;
                if nd < dist[i] {
                    if dist[i] == f64::INFINITY {
                        touched.push(i);
                    }
                    dist[i] = nd;
                    pred[i] = j;
                    heap.push(HeapItem { dist: nd, row: i });
                }
            }
        };

        scan(root, 0.0, &mut dist, &mut pred, &done, &mut touched, &mut heap, &u, &v);
        let mut end_row = UNMATCHED;
        while let Some(HeapItem { dist: d, row: i }) = heap.pop() {
            if done[i] || d > dist[i] {
                continue;
            }
            done[i] = true;
            finalized.push(i);
            if match_row[i] == UNMATCHED {
                end_row = i;
                break;
            }
            let j = match_row[i];
            scan(j, d, &mut dist, &mut pred, &done, &mut touched, &mut heap, &u, &v);
        }

        if end_row != UNMATCHED {
            let len = dist[end_row];
            for &i in &finalized {
                if i == end_row {
                    continue;
                }
                let delta = len - dist[i];
                u[i] -= delta;
                v[match_row[i]] += delta;
            }
            v[root] += len;

            let mut i = end_row;
            loop {
                let j = pred[i];
                let prev = match_col[j];
                match_col[j] = i;
                match_row[i] = j;
                if j == root {
                    break;
                }
                i = prev;
            }
        } else {
            deficient.push(root);
        }

        for &i in &touched {
            dist[i] = f64::INFINITY;
            pred[i] = UNMATCHED;
            done[i] = false;
        }
        touched.clear();
    }

    if !deficient.is_empty() {
        return Err(Error::StructurallySingular { columns: deficient });
    }

    let (dr, dc) = scalings(&g, &u, &v, &match_row, &match_col);
    Ok(PivotScale {
        row_perm: match_col,
        dr,
        dc,
    })
}

/// Reduced costs at most this are treated as tight.
const TIGHT: f64 = 1e-9;

/// Turns the duals into scalings. Exponentiating duals of size ~10 would
/// cost several ulps, so only one root per component of the tight-edge graph
/// takes `exp(u_i)`; everything else follows in linear space along tight
/// edges, each matched pair being assigned together so matched entries come
/// out within rounding of one.
fn scalings(g: &CostGraph, u: &[f64], v: &[f64], match_row: &[usize], match_col: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let tight = |p: usize, j: usize| g.cost[p] - u[g.rows[p]] - v[j] <= TIGHT;
    let mut row_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        for p in g.col(j) {
            if tight(p, j) {
                row_edges[g.rows[p]].push(p);
            }
        }
    }
    let mut col_of = vec![0usize; g.rows.len()];
    for j in 0..n {
        for p in g.col(j) {
            col_of[p] = j;
        }
    }
    let matched_entry = |j: usize| {
        let i = match_col[j];
        g.col(j).find(|&p| g.rows[p] == i).expect("matched edge exists")
    };

    let mut dr = vec![0.0f64; n];
    let mut dc = vec![0.0f64; n];
    let mut queue = std::collections::VecDeque::new();
    for root in 0..n {
        if dr[root] != 0.0 {
            continue;
        }
        dr[root] = u[root].exp();
        let j = match_row[root];
        dc[j] = 1.0 / (dr[root] * g.abs[matched_entry(j)]);
        queue.push_back(root);
        while let Some(i) = queue.pop_front() {
            // row i and its matched column are both assigned here
            for &p in &row_edges[i] {
                let j = col_of[p];
                if dc[j] == 0.0 {
                    dc[j] = 1.0 / (dr[i] * g.abs[p]);
                    let k = match_col[j];
                    dr[k] = 1.0 / (g.abs[matched_entry(j)] * dc[j]);
                    queue.push_back(k);
                }
            }
            let j = match_row[i];
            for p in g.col(j) {
                let k = g.rows[p];
                if dr[k] == 0.0 && tight(p, j) {
                    dr[k] = 1.0 / (g.abs[p] * dc[j]);
                    let jk = match_row[k];
                    dc[jk] = 1.0 / (dr[k] * g.abs[matched_entry(jk)]);
                    queue.push_back(k);
                }
            }
        }
    }
    (dr, dc)
}
