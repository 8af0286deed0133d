//! Dual-mode parallel execution of a levelized task graph.
//!
//! Front levels run in bulk mode: the nodes of a level are split into
//! contiguous blocks, one per worker, with a barrier after every level. The
//! remaining levels run in pipeline mode: workers claim nodes in ascending
//! index order from a shared cursor and block on per-node completion flags
//! only when they actually need a dependency's data.
//!
//! A node body receives the [`NodeGate`] and must call [`NodeGate::wait`] on
//! every dependency before reading its output. Marking a node done is a
//! release store and `wait` an acquire load, so everything the producing
//! node wrote is visible once `wait` returns.

use std::sync::atomic::{AtomicBool, AtomicU8, AtomicUsize, Ordering};
use std::sync::{Barrier, Mutex};
use std::thread;

const NOT_STARTED: u8 = 0;
const IN_PROGRESS: u8 = 1;
const DONE: u8 = 2;

const SPINS_BEFORE_YIELD: u32 = 64;

/// Per-node completion flags shared by all workers.
#[derive(Debug)]
pub struct NodeGate {
    states: Vec<AtomicU8>,
    aborted: AtomicBool,
}

impl NodeGate {
    pub fn new(nodes: usize) -> Self {
        Self {
            states: (0..nodes).map(|_| AtomicU8::new(NOT_STARTED)).collect(),
            aborted: AtomicBool::new(false),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_done(&self, node: usize) -> bool {
        self.states[node].load(Ordering::Acquire) == DONE
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted.load(Ordering::Acquire)
    }

    /// Blocks until `node` is done. Returns `false` if execution was aborted
    /// first, in which case the caller must stop without producing output.
    pub fn wait(&self, node: usize) -> bool {
        let mut spins = 0u32;
        loop {
            if self.states[node].load(Ordering::Acquire) == DONE {
                return true;
            }
            if self.is_aborted() {
                return false;
            }
            if spins < SPINS_BEFORE_YIELD {
                std::hint::spin_loop();
                spins += 1;
            } else {
                thread::yield_now();
            }
        }
    }

    fn start(&self, node: usize) {
        let prev = self.states[node].swap(IN_PROGRESS, Ordering::AcqRel);
        debug_assert_eq!(prev, NOT_STARTED, "node {node} claimed twice");
    }

    fn finish(&self, node: usize) {
        self.states[node].store(DONE, Ordering::Release);
    }

    fn abort(&self) {
        self.aborted.store(true, Ordering::Release);
    }
}

/// Holds the first error raised by any worker.
struct FirstError<E> {
    slot: Mutex<Option<E>>,
}

impl<E> FirstError<E> {
    fn new() -> Self {
        Self { slot: Mutex::new(None) }
    }

    fn record(&self, e: E) {
        let mut slot = self.slot.lock().unwrap_or_else(|p| p.into_inner());
        if slot.is_none() {
            *slot = Some(e);
        }
    }

    fn into_result(self) -> Result<(), E> {
        match self.slot.into_inner().unwrap_or_else(|p| p.into_inner()) {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

fn run_node<W, E, F>(gate: &NodeGate, errors: &FirstError<E>, ws: &mut W, node: usize, body: &F) -> bool
where
    F: Fn(&mut W, usize, &NodeGate) -> Result<(), E>,
{
    gate.start(node);
    match body(ws, node, gate) {
        Ok(()) if !gate.is_aborted() => {
            gate.finish(node);
            true
        }
        Ok(()) => false,
        Err(e) => {
            errors.record(e);
            gate.abort();
            false
        }
    }
}

/// Runs `f(worker_id, barrier)` on `threads` workers, the calling thread
/// being worker 0.
pub(crate) fn team<F>(threads: usize, f: F)
where
    F: Fn(usize, &Barrier) + Sync,
{
    let barrier = Barrier::new(threads);
    thread::scope(|s| {
        for w in 1..threads {
            let f = &f;
            let barrier = &barrier;
            s.spawn(move || f(w, barrier));
        }
        f(0, &barrier);
    });
}

/// Contiguous share of `len` items for `worker` out of `workers`.
#[inline]
pub(crate) fn block_range(len: usize, worker: usize, workers: usize) -> std::ops::Range<usize> {
    (len * worker / workers)..(len * (worker + 1) / workers)
}

/// Executes `levels` one after another; within a level nodes are statically
/// block-distributed over the workers and a barrier closes every level.
pub fn run_bulk<W, E, F, M>(
    levels: &[Vec<usize>],
    threads: usize,
    gate: &NodeGate,
    make_workspace: M,
    body: F,
) -> Result<(), E>
where
    M: Fn() -> W + Sync,
    F: Fn(&mut W, usize, &NodeGate) -> Result<(), E> + Sync,
    E: Send,
{
    if levels.is_empty() {
        return Ok(());
    }
    let errors = FirstError::new();
    if threads <= 1 {
        let mut ws = make_workspace();
        'outer: for level in levels {
            for &u in level {
                if !run_node(gate, &errors, &mut ws, u, &body) {
                    break 'outer;
                }
            }
        }
        return errors.into_result();
    }

    let failed_level = AtomicUsize::new(usize::MAX);
    team(threads, |w, barrier| {
        let mut ws = make_workspace();
        for (lv, level) in levels.iter().enumerate() {
            if failed_level.load(Ordering::Acquire) == usize::MAX {
                for &u in &level[block_range(level.len(), w, threads)] {
                    if !run_node(gate, &errors, &mut ws, u, &body) {
                        failed_level.fetch_min(lv, Ordering::AcqRel);
                        break;
                    }
                }
            }
            barrier.wait();
            // every failure of this level happened before the barrier
            if failed_level.load(Ordering::Acquire) <= lv {
                break;
            }
        }
    });
    errors.into_result()
}

/// Executes `order` (ascending node indices) in pipeline mode: each worker
/// repeatedly claims the next node and runs it; bodies block on their
/// dependencies through the gate.
pub fn run_pipeline<W, E, F, M>(
    order: &[usize],
    threads: usize,
    gate: &NodeGate,
    make_workspace: M,
    body: F,
) -> Result<(), E>
where
    M: Fn() -> W + Sync,
    F: Fn(&mut W, usize, &NodeGate) -> Result<(), E> + Sync,
    E: Send,
{
    if order.is_empty() {
        return Ok(());
    }
    let errors = FirstError::new();
    if threads <= 1 {
        let mut ws = make_workspace();
        for &u in order {
            if !run_node(gate, &errors, &mut ws, u, &body) {
                break;
            }
        }
        return errors.into_result();
    }

    let cursor = AtomicUsize::new(0);
    team(threads, |_, _| {
        let mut ws = make_workspace();
        loop {
            if gate.is_aborted() {
                break;
            }
            let k = cursor.fetch_add(1, Ordering::AcqRel);
            if k >= order.len() {
                break;
            }
            if !run_node(gate, &errors, &mut ws, order[k], &body) {
                break;
            }
        }
    });
    errors.into_result()
}

/// Runs a whole levelized graph: levels before `bulk_cutoff` in bulk mode,
/// the rest in pipeline mode. With one thread the nodes simply run in
/// ascending index order.
pub fn execute<W, E, F, M>(
    levels: &[Vec<usize>],
    bulk_cutoff: usize,
    threads: usize,
    make_workspace: M,
    body: F,
) -> Result<(), E>
where
    M: Fn() -> W + Sync,
    F: Fn(&mut W, usize, &NodeGate) -> Result<(), E> + Sync,
    E: Send,
{
    let total: usize = levels.iter().map(Vec::len).sum();
    let gate = NodeGate::new(total);
    if threads <= 1 {
        let order: Vec<usize> = (0..total).collect();
        return run_pipeline(&order, 1, &gate, make_workspace, body);
    }
    let cutoff = bulk_cutoff.min(levels.len());
    run_bulk(&levels[..cutoff], threads, &gate, &make_workspace, &body)?;
    let mut order: Vec<usize> = levels[cutoff..].iter().flatten().copied().collect();
    order.sort_unstable();
    run_pipeline(&order, threads, &gate, &make_workspace, &body)
}
