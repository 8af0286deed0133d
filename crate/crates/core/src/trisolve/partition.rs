//! Segment partition of a triangular sweep and its parallel execution.
//!
//! A sweep solves a unit or non-unit lower triangular system in "processing
//! order": position `p` only reads positions `q < p`. The backward pass over
//! U is expressed the same way by reversing indices. Positions are split into
//! segments; inside a segment the entries pointing before the segment form a
//! rectangular block, applied row-parallel, and the rest form a triangle,
//! solved level by level while levels are wide and sequentially afterwards.
//!
//! Every row subtracts its terms one at a time in ascending processing
//! order, rectangular part first, so the result does not depend on where the
//! cuts fall or how many threads run.

use std::cell::Cell;
use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::preprocess::compute_levels_from;
use crate::sched::{block_range, team};

/// Triangular system in processing order.
#[derive(Debug, Clone)]
pub(crate) struct TriSystem {
    pub ptr: Vec<usize>,
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
    /// Divisors for a non-unit diagonal.
    pub diag: Option<Vec<f64>>,
    /// Node boundaries in processing order, from 0 to n.
    pub node_bounds: Vec<usize>,
    /// Dependencies of each node (in processing order) on earlier nodes.
    pub node_deps: Vec<Vec<usize>>,
}

impl TriSystem {
    pub fn n(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }
}

/// Size thresholds of the partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionParams {
    pub threads: usize,
    /// Segments close once they exceed `max(seg_nnz_min, nnz / (seg_nnz_divisor * threads))`.
    pub seg_nnz_min: usize,
    pub seg_nnz_divisor: usize,
    /// Triangles with fewer entries are solved sequentially.
    pub small_tri_threshold: usize,
    /// Levels at least `bulk_width_factor * threads` wide run in parallel.
    pub bulk_width_factor: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TriangleMode {
    Sequential,
    /// Wide levels in parallel with a barrier after each, then the remaining
    /// rows sequentially in ascending order.
    BulkSequential {
        parallel_levels: Vec<Vec<usize>>,
        rest: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub rows: Range<usize>,
    /// Row range per thread for the rectangular block; empty when the
    /// segment has no entries pointing before it.
    pub rect_ranges: Vec<Range<usize>>,
    pub rect_nnz: usize,
    pub tri_nnz: usize,
    pub tri: TriangleMode,
}

/// Segments of one sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolvePartition {
    /// Interior segment starts, strictly ascending inside `(0, n)`.
    pub cut_points: Vec<usize>,
    pub segments: Vec<Segment>,
    pub threads: usize,
    /// Per row, the first entry belonging to the triangle of its segment.
    split: Vec<usize>,
}

/// Result of walking a partition, used to check that it is exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coverage {
    /// Number of times each row is finalized.
    pub row_visits: Vec<u32>,
    /// Number of matrix entries applied.
    pub entries: usize,
}

impl SolvePartition {
    pub(crate) fn build(sys: &TriSystem, params: &PartitionParams) -> Self {
        let n = sys.n();
        let threads = params.threads.max(1);
        let width = (params.bulk_width_factor.max(1) * threads).max(1);

        // leading segment: rows of every node in a wide (bulk) level
        let deps: Vec<&[usize]> = sys.node_deps.iter().map(Vec::as_slice).collect();
        let (levels, cutoff) = compute_levels_from(&deps, width).expect("node dependencies point backward");
        let c0 = levels[..cutoff]
            .iter()
            .flatten()
            .map(|&u| sys.node_bounds[u + 1])
            .max()
            .unwrap_or(0);

        let seg_threshold = params
            .seg_nnz_min
            .max(sys.nnz() / (params.seg_nnz_divisor.max(1) * threads));
        let mut bounds = vec![0];
        if c0 > 0 && c0 < n {
            bounds.push(c0);
        }
        for &end in sys.node_bounds.iter().skip(1) {
            let start = *bounds.last().unwrap();
            if end > c0 && end < n && sys.ptr[end] - sys.ptr[start] > seg_threshold {
                bounds.push(end);
            }
        }
        if *bounds.last().unwrap() != n || n == 0 {
            bounds.push(n);
        }

        let mut split = sys.ptr[..n].to_vec();
        let mut segments = Vec::with_capacity(bounds.len() - 1);
        for w in bounds.windows(2) {
            segments.push(build_segment(sys, w[0]..w[1], threads, width, params.small_tri_threshold, &mut split));
        }
        Self {
            cut_points: bounds[1..bounds.len() - 1].to_vec(),
            segments,
            threads,
            split,
        }
    }

    /// Walks the partition the way execution does.
    pub fn coverage(&self, n: usize, ptr: &[usize]) -> Coverage {
        let mut row_visits = vec![0u32; n];
        let mut entries = 0;
        for seg in &self.segments {
            for r in &seg.rect_ranges {
                for p in r.clone() {
                    entries += self.split[p] - ptr[p];
                }
            }
            let mut tri_row = |p: usize| {
                row_visits[p] += 1;
                entries += ptr[p + 1] - self.split[p];
            };
            match &seg.tri {
                TriangleMode::Sequential => seg.rows.clone().for_each(&mut tri_row),
                TriangleMode::BulkSequential { parallel_levels, rest } => {
                    parallel_levels.iter().flatten().copied().for_each(&mut tri_row);
                    rest.iter().copied().for_each(&mut tri_row);
                }
            }
        }
        Coverage { row_visits, entries }
    }
}

fn build_segment(
    sys: &TriSystem,
    rows: Range<usize>,
    threads: usize,
    width: usize,
    small_tri: usize,
    split: &mut [usize],
) -> Segment {
    let s0 = rows.start;
    let mut rect_nnz = 0;
    let mut tri_nnz = 0;
    for p in rows.clone() {
        let row = &sys.idx[sys.ptr[p]..sys.ptr[p + 1]];
        let k = row.partition_point(|&q| q < s0);
        split[p] = sys.ptr[p] + k;
        rect_nnz += k;
        tri_nnz += row.len() - k;
    }

    let rect_ranges = if rect_nnz == 0 {
        Vec::new()
    } else {
        balance_rows(rows.clone(), threads, rect_nnz, |p| split[p] - sys.ptr[p])
    };

    let tri = if tri_nnz < small_tri || threads == 1 {
        TriangleMode::Sequential
    } else {
        let mut level = vec![0usize; rows.len()];
        let mut levels: Vec<Vec<usize>> = Vec::new();
        for p in rows.clone() {
            let lv = sys.idx[split[p]..sys.ptr[p + 1]]
                .iter()
                .map(|&q| level[q - s0] + 1)
                .max()
                .unwrap_or(0);
            level[p - s0] = lv;
            if levels.len() <= lv {
                levels.resize_with(lv + 1, Vec::new);
            }
            levels[lv].push(p);
        }
        let wide = levels.iter().position(|l| l.len() < width).unwrap_or(levels.len());
        let mut rest: Vec<usize> = levels[wide..].iter().flatten().copied().collect();
        rest.sort_unstable();
        levels.truncate(wide);
        if levels.is_empty() {
            TriangleMode::Sequential
        } else {
            TriangleMode::BulkSequential {
                parallel_levels: levels,
                rest,
            }
        }
    };

    Segment {
        rows,
        rect_ranges,
        rect_nnz,
        tri_nnz,
        tri,
    }
}

/// Splits `rows` into `threads` contiguous ranges with balanced total
/// weight: range `t` ends at the first row where the running weight reaches
/// `total * (t + 1) / threads`.
fn balance_rows(rows: Range<usize>, threads: usize, total: usize, weight: impl Fn(usize) -> usize) -> Vec<Range<usize>> {
    let mut out = Vec::with_capacity(threads);
    let mut start = rows.start;
    let mut p = rows.start;
    let mut acc = 0usize;
    for t in 0..threads {
        if t + 1 == threads {
            out.push(start..rows.end);
            break;
        }
        let goal = total * (t + 1);
        while p < rows.end && acc * threads < goal {
            acc += weight(p);
            p += 1;
        }
        out.push(start..p);
        start = p;
    }
    out
}

/// Shared access to the solution vector during a sweep.
trait Slots {
    fn load(&self, i: usize) -> f64;
    fn store(&self, i: usize, v: f64);
}

impl Slots for [AtomicU64] {
    #[inline]
    fn load(&self, i: usize) -> f64 {
        f64::from_bits(self[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn store(&self, i: usize, v: f64) {
        self[i].store(v.to_bits(), Ordering::Relaxed);
    }
}

/// Single-threaded view.
struct Local<'a>(&'a [Cell<f64>]);

impl Slots for Local<'_> {
    #[inline]
    fn load(&self, i: usize) -> f64 {
        self.0[i].get()
    }

    #[inline]
    fn store(&self, i: usize, v: f64) {
        self.0[i].set(v);
    }
}

struct Sweep<'a, S: ?Sized> {
    sys: &'a TriSystem,
    split: &'a [usize],
    x: &'a S,
}

impl<S: Slots + ?Sized> Sweep<'_, S> {
    #[inline]
    fn rect_row(&self, p: usize) {
        let mut acc = self.x.load(p);
        for k in self.sys.ptr[p]..self.split[p] {
            acc -= self.sys.val[k] * self.x.load(self.sys.idx[k]);
        }
        self.x.store(p, acc);
    }

    #[inline]
    fn tri_row(&self, p: usize) {
        let mut acc = self.x.load(p);
        for k in self.split[p]..self.sys.ptr[p + 1] {
            acc -= self.sys.val[k] * self.x.load(self.sys.idx[k]);
        }
        if let Some(d) = &self.sys.diag {
            acc /= d[p];
        }
        self.x.store(p, acc);
    }
}

/// Solves the system in place: `x` holds the right-hand side on entry.
pub(crate) fn run_sweep(sys: &TriSystem, part: &SolvePartition, x: &mut [f64]) {
    if part.threads <= 1 {
        let cells = Cell::from_mut(x).as_slice_of_cells();
        let local = Local(cells);
        let sw = Sweep {
            sys,
            split: &part.split,
            x: &local,
        };
        for seg in &part.segments {
            if !seg.rect_ranges.is_empty() {
                seg.rows.clone().for_each(|p| sw.rect_row(p));
            }
            match &seg.tri {
                TriangleMode::Sequential => seg.rows.clone().for_each(|p| sw.tri_row(p)),
                TriangleMode::BulkSequential { parallel_levels, rest } => {
                    parallel_levels.iter().flatten().for_each(|&p| sw.tri_row(p));
                    rest.iter().for_each(|&p| sw.tri_row(p));
                }
            }
        }
        return;
    }

    let threads = part.threads;
    let shared: Vec<AtomicU64> = x.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let sw = Sweep {
        sys,
        split: &part.split,
        x: shared.as_slice(),
    };
    team(threads, |w, barrier| {
        for seg in &part.segments {
            if !seg.rect_ranges.is_empty() {
                seg.rect_ranges[w].clone().for_each(|p| sw.rect_row(p));
                barrier.wait();
            }
            match &seg.tri {
                TriangleMode::Sequential => {
                    if w == 0 {
                        seg.rows.clone().for_each(|p| sw.tri_row(p));
                    }
                    barrier.wait();
                }
                TriangleMode::BulkSequential { parallel_levels, rest } => {
                    for level in parallel_levels {
                        level[block_range(level.len(), w, threads)]
                            .iter()
                            .for_each(|&p| sw.tri_row(p));
                        barrier.wait();
                    }
                    if !rest.is_empty() {
                        if w == 0 {
                            rest.iter().for_each(|&p| sw.tri_row(p));
                        }
                        barrier.wait();
                    }
                }
            }
        }
    });
    for (xi, s) in x.iter_mut().zip(&shared) {
        *xi = f64::from_bits(s.load(Ordering::Relaxed));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(threads: usize) -> PartitionParams {
        PartitionParams {
            threads,
            seg_nnz_min: 4096,
            seg_nnz_divisor: 8,
            small_tri_threshold: 1024,
            bulk_width_factor: 2,
        }
    }

    /// Unit lower system with one node per row.
    fn rowwise(rows: Vec<Vec<(usize, f64)>>) -> TriSystem {
        let n = rows.len();
        let mut ptr = vec![0];
        let mut idx = vec![];
        let mut val = vec![];
        let mut node_deps = vec![];
        for r in &rows {
            let mut r = r.clone();
            r.sort_by_key(|e| e.0);
            for &(c, v) in &r {
                idx.push(c);
                val.push(v);
            }
            ptr.push(idx.len());
            node_deps.push(r.iter().map(|e| e.0).collect());
        }
        TriSystem {
            ptr,
            idx,
            val,
            diag: None,
            node_bounds: (0..=n).collect(),
            node_deps,
        }
    }

    #[test]
    fn diagonal_is_one_bulk_segment() {
        let sys = rowwise(vec![vec![]; 10]);
        let part = SolvePartition::build(&sys, &params(2));
        assert!(part.cut_points.is_empty());
        assert_eq!(part.segments.len(), 1);
        assert!(part.segments[0].rect_ranges.is_empty());
        let cov = part.coverage(10, &sys.ptr);
        assert!(cov.row_visits.iter().all(|&v| v == 1));
    }

    #[test]
    fn chain_has_no_cuts_when_small() {
        let rows: Vec<Vec<(usize, f64)>> = (0..100)
            .map(|i| if i == 0 { vec![] } else { vec![(i - 1, 0.5)] })
            .collect();
        let sys = rowwise(rows);
        let part = SolvePartition::build(&sys, &params(4));
        assert!(part.cut_points.is_empty());
        assert_eq!(part.segments[0].tri, TriangleMode::Sequential);
        let mut x = vec![1.0; 100];
        run_sweep(&sys, &part, &mut x);
        assert_eq!(x[1], 0.5);
        assert_eq!(x[2], 0.75);
    }

    #[test]
    fn hand_example() {
        let sys = rowwise(vec![vec![], vec![(0, 2.0)]]);
        let part = SolvePartition::build(&sys, &params(1));
        let mut x = vec![1.0, 4.0];
        run_sweep(&sys, &part, &mut x);
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn balance_is_within_one_row() {
        let weights = [5usize, 1, 1, 1, 7, 2, 2, 2, 3, 1];
        let total: usize = weights.iter().sum();
        for threads in 1..6 {
            let r = balance_rows(0..10, threads, total, |p| weights[p]);
            assert_eq!(r.len(), threads);
            assert_eq!(r[0].start, 0);
            assert_eq!(r[threads - 1].end, 10);
            let maxw = *weights.iter().max().unwrap();
            for (t, range) in r.iter().enumerate() {
                let w: usize = range.clone().map(|p| weights[p]).sum();
                let ideal = total as f64 / threads as f64;
                assert!((w as f64 - ideal).abs() <= maxw as f64 + 1.0, "thread {t}: {w} vs {ideal}");
            }
        }
    }
}
