//! Approximate minimum degree ordering.
//!
//! Quotient-graph elimination with approximate external degrees, element
//! absorption (including aggressive absorption), supervariable detection and
//! mass elimination, followed by a postorder of the assembly tree. Ties in
//! the degree are broken by the smallest variable index so the result is
//! fully deterministic.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::Ordering;

/// Symmetric adjacency structure without self loops.
#[derive(Debug, Clone)]
pub struct SymmetricPattern {
    n: usize,
    adj: Vec<Vec<usize>>,
}

impl SymmetricPattern {
    /// Builds the pattern of `B + B^T` minus the diagonal, where row `k` of
    /// `B` is given by `row(k)`.
    pub fn from_rows<'a, F>(n: usize, row: F) -> Self
    where
        F: Fn(usize) -> &'a [usize],
    {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for &j in row(i) {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Self { n, adj }
    }

    pub fn from_adjacency(adj: Vec<Vec<usize>>) -> Self {
        let n = adj.len();
        let mut full: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, list) in adj.iter().enumerate() {
            for &j in list {
                if i != j {
                    full[i].push(j);
                    full[j].push(i);
                }
            }
        }
        for list in &mut full {
            list.sort_unstable();
            list.dedup();
        }
        Self { n, adj: full }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// Number of off-diagonal entries in the Cholesky factor of the pattern
    /// under the ordering `perm` (`perm[k]` is the vertex eliminated k-th).
    pub fn cholesky_nnz(&self, perm: &[usize]) -> usize {
        let n = self.n;
        let mut inv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        // row subtrees of the elimination tree, built lazily
        let mut parent = vec![usize::MAX; n];
        let mut mark = vec![usize::MAX; n];
        let mut count = 0usize;
        for k in 0..n {
            mark[k] = k;
            for &w in &self.adj[perm[k]] {
                let mut i = inv[w];
                if i > k {
                    continue;
                }
                while mark[i] != k {
                    mark[i] = k;
                    count += 1;
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    i = parent[i];
                }
            }
        }
        count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Variable,
    /// Merged into the principal supervariable.
    Merged(usize),
    /// Eliminated as a pivot; now an element.
    Element,
    /// Element absorbed by another element.
    Absorbed(usize),
    /// Eliminated together with the pivot element.
    MassEliminated(usize),
    Dense,
}

/// Approximate minimum degree ordering of a symmetric pattern.
pub fn amd_order(pattern: &SymmetricPattern) -> Ordering {
    let n = pattern.n();
    let dense_threshold = ((10.0 * (n as f64).sqrt()) as usize).max(16);

    let mut state = vec![State::Variable; n];
    let mut nv = vec![1usize; n];
    let mut degree = vec![0usize; n];
    let mut elems: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut vars: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut le: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut esize = vec![0usize; n];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];

    let mut dense = Vec::new();
    for i in 0..n {
        if pattern.neighbors(i).len() > dense_threshold && n > dense_threshold + 1 {
            state[i] = State::Dense;
            dense.push(i);
        }
    }
    let mut heap = BinaryHeap::new();
    for i in 0..n {
        if state[i] != State::Variable {
            continue;
        }
        vars[i] = pattern
            .neighbors(i)
            .iter()
            .copied()
            .filter(|&j| state[j] == State::Variable)
            .collect();
        degree[i] = vars[i].len();
        heap.push(Reverse((degree[i], i)));
    }

    let nleft_total = n - dense.len();
    let mut eliminated = 0usize;
    let mut pivots = Vec::new();
    let mut mark = vec![0usize; n];
    let mut stamp = 0usize;
    let mut wmark = vec![0usize; n];
    let mut wval = vec![0usize; n];
    let mut partial = vec![0usize; n];
    let mut hash = vec![0u64; n];
    let mut lme: Vec<usize> = Vec::new();

    while eliminated < nleft_total {
        let Some(Reverse((d, me))) = heap.pop() else {
            break;
        };
        if state[me] != State::Variable || degree[me] != d {
            continue;
        }
        pivots.push(me);

        // new element: union of adjacent elements and variables
        stamp += 1;
        mark[me] = stamp;
        lme.clear();
        for e in std::mem::take(&mut elems[me]) {
            if state[e] != State::Element {
                continue;
            }
            for &i in &le[e] {
                if state[i] == State::Variable && mark[i] != stamp {
                    mark[i] = stamp;
                    lme.push(i);
                }
            }
            state[e] = State::Absorbed(me);
            children[me].push(e);
            le[e] = Vec::new();
        }
        for i in std::mem::take(&mut vars[me]) {
            if state[i] == State::Variable && mark[i] != stamp {
                mark[i] = stamp;
                lme.push(i);
            }
        }
        state[me] = State::Element;
        eliminated += nv[me];
        let mut degme: usize = lme.iter().map(|&i| nv[i]).sum();

        // |Le \ Lme| for every element touching the new element
        for &i in &lme {
            for &e in &elems[i] {
                if state[e] != State::Element {
                    continue;
                }
                if wmark[e] != stamp {
                    wmark[e] = stamp;
                    wval[e] = esize[e];
                }
                wval[e] = wval[e].saturating_sub(nv[i]);
            }
        }

        // degree update, aggressive absorption and mass elimination
        let mut remaining = Vec::with_capacity(lme.len());
        for &i in &lme {
            let mut ext = 0usize;
            let mut h = 0u64;
            let mut kept = Vec::with_capacity(elems[i].len() + 1);
            kept.push(me);
            for &e in &elems[i] {
                if state[e] != State::Element || e == me {
                    continue;
                }
                let we = wval[e];
                if we == 0 {
                    state[e] = State::Absorbed(me);
                    children[me].push(e);
                    le[e] = Vec::new();
                    continue;
                }
                ext += we;
                h = h.wrapping_add(e as u64);
                kept.push(e);
            }
            let mut kept_vars = Vec::with_capacity(vars[i].len());
            for &j in &vars[i] {
                if state[j] == State::Variable && j != i && mark[j] != stamp {
                    ext += nv[j];
                    h = h.wrapping_add(j as u64);
                    kept_vars.push(j);
                }
            }
            if kept.len() == 1 && kept_vars.is_empty() {
                state[i] = State::MassEliminated(me);
                members[me].push(i);
                eliminated += nv[i];
                degme -= nv[i];
                elems[i] = Vec::new();
                vars[i] = Vec::new();
                continue;
            }
            elems[i] = kept;
            vars[i] = kept_vars;
            partial[i] = degree[i].min(ext);
            hash[i] = h;
            remaining.push(i);
        }

        // supervariables: identical element and variable lists
        remaining.sort_unstable_by_key(|&i| (hash[i], i));
        let mut g = 0;
        while g < remaining.len() {
            let mut end = g + 1;
            while end < remaining.len() && hash[remaining[end]] == hash[remaining[g]] {
                end += 1;
            }
            for a in g..end {
                let i = remaining[a];
                if state[i] != State::Variable {
                    continue;
                }
                for &j in &remaining[a + 1..end] {
                    if state[j] != State::Variable {
                        continue;
                    }
                    if same_set(&elems[i], &elems[j]) && same_set(&vars[i], &vars[j]) {
                        nv[i] += nv[j];
                        nv[j] = 0;
                        state[j] = State::Merged(i);
                        members[i].push(j);
                        elems[j] = Vec::new();
                        vars[j] = Vec::new();
                    }
                }
            }
            g = end;
        }

        let nleft = nleft_total - eliminated;
        let mut element_vars = Vec::with_capacity(remaining.len());
        for &i in &remaining {
            if state[i] != State::Variable {
                continue;
            }
            let nvi = nv[i];
            let d = (partial[i] + degme - nvi).min(nleft - nvi);
            degree[i] = d;
            heap.push(Reverse((d, i)));
            element_vars.push(i);
        }
        le[me] = element_vars;
        esize[me] = degme;
    }

    // postorder of the assembly tree; roots in elimination order
    let mut is_child = vec![false; n];
    for &p in &pivots {
        for &c in &children[p] {
            is_child[c] = true;
        }
    }
    let mut perm = Vec::with_capacity(n);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for &root in &pivots {
        if is_child[root] {
            continue;
        }
        stack.push((root, 0));
        while let Some(&mut (e, ref mut next)) = stack.last_mut() {
            if *next < children[e].len() {
                let c = children[e][*next];
                *next += 1;
                stack.push((c, 0));
            } else {
                stack.pop();
                emit_variables(e, &members, &mut perm);
            }
        }
    }
    perm.extend(dense);
    debug_assert_eq!(perm.len(), n);
    Ordering::from_perm(perm)
}

fn emit_variables(v: usize, members: &[Vec<usize>], out: &mut Vec<usize>) {
    let mut stack = vec![v];
    // depth-first, preserving member order
    while let Some(x) = stack.pop() {
        out.push(x);
        for &m in members[x].iter().rev() {
            stack.push(m);
        }
    }
}

fn same_set(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable();
    y.sort_unstable();
    x == y
}
