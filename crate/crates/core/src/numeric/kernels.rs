//! Update primitives of the up-looking factorization.
//!
//! A node (standalone row or supernode) is computed in a dense panel of
//! `s` rows. The panel's columns are the node's L storage columns followed by
//! the U pattern of its first row, so row `t` holds L entries in
//! `[0, n_lower + t)`, its pivot at `n_lower + t` and its U entries after
//! that. A `pos` map sends a global column to its panel column.

use super::dense::{axpy_sub, gemm};
use crate::error::{Error, Result};

pub const NO_POS: u32 = u32::MAX;

/// A finished node read as the source of updates.
#[derive(Debug, Clone, Copy)]
pub struct SourcePanel<'a> {
    pub first_row: usize,
    pub rows: usize,
    pub n_lower: usize,
    pub ncols: usize,
    /// U pattern of the first row: the block columns, then the shared trailing
    /// columns.
    pub u_cols: &'a [usize],
    pub values: &'a [f64],
}

impl<'a> SourcePanel<'a> {
    /// U row `a` of the node, pivot first.
    #[inline]
    pub fn u_row(&self, a: usize) -> &'a [f64] {
        &self.values[a * self.ncols + self.n_lower + a..(a + 1) * self.ncols]
    }

    #[inline]
    pub fn trailing_cols(&self) -> &'a [usize] {
        &self.u_cols[self.rows..]
    }
}

/// Maps the source's block and trailing columns into the target panel.
/// Returns the first source row the target actually touches; the touched
/// block columns always form a suffix of the block.
pub fn map_source(src: &SourcePanel, pos: &[u32], block_pos: &mut Vec<u32>, trailing_pos: &mut Vec<u32>) -> usize {
    let a0 = (0..src.rows)
        .find(|&a| pos[src.first_row + a] != NO_POS)
        .unwrap_or(src.rows);
    block_pos.clear();
    block_pos.extend((a0..src.rows).map(|a| pos[src.first_row + a]));
    debug_assert!(block_pos.iter().all(|&p| p != NO_POS));
    trailing_pos.clear();
    if a0 < src.rows {
        trailing_pos.extend(src.trailing_cols().iter().map(|&c| pos[c]));
        debug_assert!(trailing_pos.iter().all(|&p| p != NO_POS));
    }
    a0
}

/// Applies source row `a` to one target row: the multiplier is divided by
/// the source pivot, stored as the L entry and spread over the source's U
/// row.
pub fn update_row_by_row(row: &mut [f64], pos: &[u32], src: &SourcePanel, a: usize) {
    let pc = pos[src.first_row + a];
    if pc == NO_POS {
        return;
    }
    let pc = pc as usize;
    let w = row[pc];
    if w == 0.0 {
        return;
    }
    let u = src.u_row(a);
    let l = w / u[0];
    row[pc] = l;
    for (&c, &uv) in src.u_cols[a + 1..].iter().zip(&u[1..]) {
        row[pos[c] as usize] -= l * uv;
    }
}

/// Applies source rows `a0..` of a supernode to one target row. The
/// multipliers are gathered, solved against the source's upper diagonal
/// block and then the trailing U panel is applied as a dense vector update.
/// The per-element operation order equals repeated [`update_row_by_row`].
pub fn update_row_by_sup(
    row: &mut [f64],
    src: &SourcePanel,
    a0: usize,
    block_pos: &[u32],
    trailing_pos: &[u32],
    x: &mut Vec<f64>,
    y: &mut Vec<f64>,
) {
    let m = src.rows - a0;
    x.clear();
    x.extend(block_pos.iter().map(|&p| row[p as usize]));
    if x.iter().all(|&v| v == 0.0) {
        return;
    }
    y.clear();
    y.extend(trailing_pos.iter().map(|&p| row[p as usize]));
    for i in 0..m {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        let a = a0 + i;
        let u = src.u_row(a);
        let l = xi / u[0];
        x[i] = l;
        axpy_sub(l, &u[1..m - i], &mut x[i + 1..]);
        axpy_sub(l, &u[src.rows - a..], y);
    }
    for (&p, &v) in block_pos.iter().zip(x.iter()) {
        row[p as usize] = v;
    }
    for (&p, &v) in trailing_pos.iter().zip(y.iter()) {
        row[p as usize] = v;
    }
}

/// Applies source rows `a0..` of a supernode to all rows of a target panel:
/// the multiplier block is solved against the source's diagonal block, then
/// multiplied by the source's trailing U panel and subtracted.
#[allow(clippy::too_many_arguments)]
pub fn update_sup_by_sup(
    panel: &mut [f64],
    target_rows: usize,
    target_ncols: usize,
    src: &SourcePanel,
    a0: usize,
    block_pos: &[u32],
    trailing_pos: &[u32],
    x: &mut Vec<f64>,
    prod: &mut Vec<f64>,
) {
    let m = src.rows - a0;
    let ntr = trailing_pos.len();
    x.clear();
    for t in 0..target_rows {
        let row = &panel[t * target_ncols..(t + 1) * target_ncols];
        x.extend(block_pos.iter().map(|&p| row[p as usize]));
    }
    if x.iter().all(|&v| v == 0.0) {
        return;
    }
    for t in 0..target_rows {
        let xr = &mut x[t * m..(t + 1) * m];
        for i in 0..m {
            let xi = xr[i];
            if xi == 0.0 {
                continue;
            }
            let u = src.u_row(a0 + i);
            let l = xi / u[0];
            xr[i] = l;
            axpy_sub(l, &u[1..m - i], &mut xr[i + 1..]);
        }
        let row = &mut panel[t * target_ncols..(t + 1) * target_ncols];
        for (&p, &v) in block_pos.iter().zip(xr.iter()) {
            row[p as usize] = v;
        }
    }
    if ntr == 0 {
        return;
    }
    prod.clear();
    prod.resize(target_rows * ntr, 0.0);
    let b_off = a0 * src.ncols + src.n_lower + src.rows;
    gemm(
        target_rows,
        ntr,
        m,
        x,
        m,
        &src.values[b_off..],
        src.ncols,
        prod,
        ntr,
    );
    for t in 0..target_rows {
        let row = &mut panel[t * target_ncols..(t + 1) * target_ncols];
        for (&p, &v) in trailing_pos.iter().zip(&prod[t * ntr..(t + 1) * ntr]) {
            row[p as usize] -= v;
        }
    }
}

/// Replaces a pivot smaller than `epsilon * anorm` in magnitude by
/// `sign(pivot) * epsilon * anorm`; zero counts as positive.
pub fn pivot_perturb(pivot: f64, anorm: f64, epsilon: f64) -> (f64, bool) {
    let floor = epsilon * anorm;
    if epsilon > 0.0 && pivot.abs() < floor {
        let p = if pivot < 0.0 { -floor } else { floor };
        (p, true)
    } else {
        (pivot, false)
    }
}

/// Pivoting and perturbation settings of one internal factorization.
#[derive(Debug, Clone, Copy)]
pub struct PivotRule {
    pub search: bool,
    pub anorm: f64,
    pub epsilon: f64,
}

/// Dense LU of the panel's diagonal block once all external updates are in.
///
/// With `rule.search` the row with the largest magnitude in column `t` among
/// rows `t..s` (lowest index on ties) is swapped into position `t`, moving
/// the whole panel row and its entry of `inner`. Without it the rows are
/// taken as they are. Perturbed pivots are appended to `perturbed` as
/// `(first_row + t, original value)`.
#[allow(clippy::too_many_arguments)]
pub fn internal_factorize(
    panel: &mut [f64],
    rows: usize,
    ncols: usize,
    n_lower: usize,
    first_row: usize,
    inner: &mut [usize],
    rule: PivotRule,
    perturbed: &mut Vec<(usize, f64)>,
) -> Result<()> {
    for t in 0..rows {
        let dc = n_lower + t;
        if rule.search {
            let mut best = t;
            let mut best_abs = panel[t * ncols + dc].abs();
            for r in t + 1..rows {
                let v = panel[r * ncols + dc].abs();
                if v > best_abs {
                    best = r;
                    best_abs = v;
                }
            }
            if best != t {
                let (head, tail) = panel.split_at_mut(best * ncols);
                head[t * ncols..(t + 1) * ncols].swap_with_slice(&mut tail[..ncols]);
                inner.swap(t, best);
            }
        }
        let piv = panel[t * ncols + dc];
        let (p, fired) = pivot_perturb(piv, rule.anorm, rule.epsilon);
        if fired {
            perturbed.push((first_row + t, piv));
        }
        if p == 0.0 {
            return Err(Error::NumericBreakdown { row: first_row + t });
        }
        panel[t * ncols + dc] = p;
        let (head, tail) = panel.split_at_mut((t + 1) * ncols);
        let prow = &head[t * ncols + dc + 1..(t + 1) * ncols];
        for r in 0..rows - t - 1 {
            let row = &mut tail[r * ncols..(r + 1) * ncols];
            let w = row[dc];
            if w == 0.0 {
                continue;
            }
            let l = w / p;
            row[dc] = l;
            axpy_sub(l, prow, &mut row[dc + 1..]);
        }
    }
    Ok(())
}
