//! Acceptance run: one line per criterion, nonzero exit on any failure.

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use clap::Parser;
use common::*;
use hybrid_lu::cli::{run_solve, Cli, Command, RunConfig};
use hybrid_lu::numeric::{factorize, refactorize, FactorOptions, NumericFactors};
use hybrid_lu::preprocess::{analyze, bulk_cutoff, compute_levels, AnalyzeOptions, KernelMode};
use hybrid_lu::sched;
use hybrid_lu::trisolve::{solve, SolveOptions};
use hybrid_lu::CsrMatrix;
use rand::Rng;

const MODES: [KernelMode; 3] = [KernelMode::RowRow, KernelMode::SupRow, KernelMode::SupSup];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn factor_opts(mode: Option<KernelMode>, threads: usize) -> FactorOptions {
    FactorOptions {
        kernel_override: mode,
        threads,
        ..Default::default()
    }
}

fn solve_opts(threads: usize) -> SolveOptions {
    SolveOptions {
        threads,
        ..Default::default()
    }
}

/// Solve options that partition even tiny triangles into parallel segments.
fn eager_solve_opts(threads: usize) -> SolveOptions {
    SolveOptions {
        threads,
        seg_nnz_min: 0,
        small_tri_threshold: 0,
        ..Default::default()
    }
}

fn criterion_1(corpus: &[CorpusMatrix]) -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_seed = 0;
    let mut solver_time = Duration::ZERO;
    let mut failures = 0;
    for m in corpus {
        let b: Vec<f64> = (0..m.a.n()).map(|i| 1.0 + (i % 5) as f64 * 0.25).collect();
        let start = Instant::now();
        let result = analyze(&m.a, &AnalyzeOptions::default())
            .and_then(|an| factorize(&m.a, Arc::new(an), &FactorOptions::default()))
            .and_then(|f| solve(&m.a, &f, &b, &SolveOptions::default()));
        solver_time += start.elapsed();
        match result {
            Ok((x, _)) => {
                let err = rel_inf_err(&x, &m.oracle.solve_refined(&m.dense, &b));
                if !(err <= 1e-8) {
                    failures += 1;
                }
                if !(err <= worst) {
                    worst = err;
                    worst_seed = m.seed;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let secs = solver_time.as_secs_f64();
    outcome(
        failures == 0 && secs < 30.0 && corpus.len() >= 200,
        format!(
            "{} matrices, worst relative error {worst:.2e} (seed {worst_seed}), {failures} failures, solver time {secs:.2} s",
            corpus.len()
        ),
    )
}

fn criterion_2(corpus: &[CorpusMatrix]) -> Outcome {
    let mut worst_ratio = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    for m in corpus {
        let f = factor_with(&m.a, &AnalyzeOptions::default(), &FactorOptions::default());
        if !f.perturbed().is_empty() {
            skipped += 1;
            continue;
        }
        let mm = factor_order_matrix(&m.dense, &f);
        let (l, u) = dense_factors(&f);
        let lu = matmul(&l, &u);
        let n = mm.len();
        let diff = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .fold(0.0f64, |acc, (i, j)| acc.max((lu[i][j] - mm[i][j]).abs()));
        let bound = 64.0 * f64::EPSILON * n as f64 * max_abs(&mm);
        worst_ratio = worst_ratio.max(diff / bound);
        checked += 1;
    }
    outcome(
        worst_ratio <= 1.0,
        format!("{checked} checked, {skipped} with perturbation skipped, worst max|LU-M| / bound = {worst_ratio:.2e}"),
    )
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn criterion_3(corpus: &[CorpusMatrix]) -> Outcome {
    let mut worst = 0.0f64;
    let mut pivot_mismatch = 0;
    let mut bitwise_failures = 0;
    for m in corpus {
        let an = analysis(&m.a, &AnalyzeOptions::default());
        let reference = factorize(&m.a, an.clone(), &factor_opts(Some(KernelMode::RowRow), 1)).unwrap();
        for mode in [KernelMode::SupRow, KernelMode::SupSup] {
            let f = factorize(&m.a, an.clone(), &factor_opts(Some(mode), 1)).unwrap();
            if f.inner_perm() != reference.inner_perm() {
                pivot_mismatch += 1;
                continue;
            }
            worst = worst
                .max(rel_diff(f.l_values(), reference.l_values()))
                .max(rel_diff(f.u_values(), reference.u_values()));
            if mode == KernelMode::SupRow && !f.bitwise_eq(&reference) {
                bitwise_failures += 1;
            }
        }
        // every supernode a single row
        let singles = analysis(
            &m.a,
            &AnalyzeOptions {
                min_supernode_rows: 1,
                max_supernode_rows: 1,
                ..Default::default()
            },
        );
        let reference = factorize(&m.a, singles.clone(), &factor_opts(Some(KernelMode::RowRow), 1)).unwrap();
        for mode in [KernelMode::SupRow, KernelMode::SupSup] {
            let f = factorize(&m.a, singles.clone(), &factor_opts(Some(mode), 1)).unwrap();
            if !f.bitwise_eq(&reference) {
                bitwise_failures += 1;
            }
        }
    }
    outcome(
        worst <= 1e-12 && pivot_mismatch == 0 && bitwise_failures == 0,
        format!(
            "worst normwise relative difference {worst:.2e}, {pivot_mismatch} pivot-order mismatches, {bitwise_failures} single-row or sup-row bitwise mismatches"
        ),
    )
}

fn run_threads(a: &CsrMatrix, mode: KernelMode, threads: usize, eager: bool) -> (NumericFactors, Vec<f64>) {
    let an = analysis(
        a,
        &AnalyzeOptions {
            threads,
            ..Default::default()
        },
    );
    let f = factorize(a, an, &factor_opts(Some(mode), threads)).unwrap();
    let b: Vec<f64> = (0..a.n()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
    let opts = if eager { eager_solve_opts(threads) } else { solve_opts(threads) };
    let (x, _) = solve(a, &f, &b, &opts).unwrap();
    (f, x)
}

fn criterion_4(corpus: &[CorpusMatrix]) -> Outcome {
    let lap = laplacian_2d(100);
    let mut cases: Vec<(&CsrMatrix, bool)> = corpus.iter().take(20).map(|m| (&m.a, true)).collect();
    cases.push((&lap, false));
    let mut mismatches = 0;
    let mut runs = 0;
    for (a, eager) in cases {
        for mode in MODES {
            let (f1, x1) = run_threads(a, mode, 1, eager);
            for threads in [2, 4, 8] {
                let (f, x) = run_threads(a, mode, threads, eager);
                runs += 1;
                if !f.bitwise_eq(&f1) || bits(&x) != bits(&x1) {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{runs} multi-thread runs against 1 thread over 21 matrices and 3 modes, {mismatches} bitwise mismatches"),
    )
}

/// Largest sum of `ln|a[sigma(j)][j]|` over all permutations.
fn best_log_product(a: &Dense) -> f64 {
    fn go(a: &Dense, col: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        let n = a.len();
        if col == n {
            *best = best.max(acc);
            return;
        }
        for i in 0..n {
            if !used[i] && a[i][col] != 0.0 {
                used[i] = true;
                go(a, col + 1, used, acc + a[i][col].abs().ln(), best);
                used[i] = false;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    go(a, 0, &mut vec![false; a.len()], 0.0, &mut best);
    best
}

fn criterion_5(corpus: &[CorpusMatrix]) -> Outcome {
    let tol = 4.0 * f64::EPSILON;
    let mut worst_diag = 0.0f64;
    let mut worst_off = 0.0f64;
    let mut brute = 0;
    let mut suboptimal = 0;
    for m in corpus {
        let ps = hybrid_lu::preprocess::static_pivot(&m.a).unwrap();
        let n = m.dense.len();
        for k in 0..n {
            let r = ps.row_perm[k];
            for j in 0..n {
                let s = (ps.dr[r] * m.dense[r][j] * ps.dc[j]).abs();
                if j == k {
                    worst_diag = worst_diag.max((s - 1.0).abs());
                } else {
                    worst_off = worst_off.max(s - 1.0);
                }
            }
        }
        if n <= 7 {
            brute += 1;
            let matched: f64 = (0..n).map(|j| m.dense[ps.row_perm[j]][j].abs().ln()).sum();
            let best = best_log_product(&m.dense);
            if matched < best - 1e-12 * (1.0 + best.abs()) {
                suboptimal += 1;
            }
        }
    }
    outcome(
        worst_diag <= tol && worst_off <= tol && suboptimal == 0 && brute > 0,
        format!(
            "max ||d|-1| = {worst_diag:.2e}, max off-diagonal excess = {worst_off:.2e} (limit {tol:.2e}), {brute} matchings brute-forced, {suboptimal} suboptimal"
        ),
    )
}

/// Boolean Gaussian elimination without cancellation.
fn dense_symbolic(n: usize, row_ptr: &[usize], col_idx: &[usize]) -> Vec<Vec<bool>> {
    let mut p = vec![vec![false; n]; n];
    for i in 0..n {
        for &j in &col_idx[row_ptr[i]..row_ptr[i + 1]] {
            p[i][j] = true;
        }
    }
    for k in 0..n {
        for i in k + 1..n {
            if p[i][k] {
                for j in k + 1..n {
                    if p[k][j] {
                        p[i][j] = true;
                    }
                }
            }
        }
    }
    p
}

fn criterion_6(corpus: &[CorpusMatrix]) -> Outcome {
    let mut compared = 0;
    let mut wrong = 0;
    for m in corpus.iter().filter(|m| m.a.n() <= 32) {
        let an = analysis(&m.a, &AnalyzeOptions::default());
        let s = &an.symbolic;
        let n = s.n;
        let oracle = dense_symbolic(n, &s.permuted.row_ptr, &s.permuted.col_idx);
        compared += 1;
        let ok = (0..n).all(|i| {
            let l: Vec<usize> = (0..i).filter(|&j| oracle[i][j]).collect();
            let u: Vec<usize> = (i..n).filter(|&j| oracle[i][j]).collect();
            s.l_pattern.row(i) == l.as_slice() && s.u_pattern.row(i) == u.as_slice()
        });
        if !ok {
            wrong += 1;
        }
    }

    let a = tridiagonal(100_000);
    let b = vec![1.0; a.n()];
    let start = Instant::now();
    let an = Arc::new(analyze(&a, &AnalyzeOptions::default()).unwrap());
    let f = factorize(&a, an.clone(), &FactorOptions::default()).unwrap();
    let (_, report) = solve(&a, &f, &b, &SolveOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let s = &an.symbolic;
    let be = report.final_backward_error();
    let tri_ok = s.fill_nnz == a.nnz() && s.kernel_mode == KernelMode::RowRow && be <= 1e-12 && secs < 1.0;
    outcome(
        wrong == 0 && compared > 0 && tri_ok,
        format!(
            "{compared} patterns vs dense oracle, {wrong} wrong; tridiagonal n=100000: factor nnz {} vs A nnz {}, mode {}, backward error {be:.2e}, {secs:.3} s",
            s.fill_nnz,
            a.nnz(),
            s.kernel_mode.name()
        ),
    )
}

fn best_factor_time(a: &CsrMatrix, an: &Arc<hybrid_lu::preprocess::Analysis>, threads: usize) -> f64 {
    (0..3)
        .map(|_| {
            let start = Instant::now();
            factorize(a, an.clone(), &factor_opts(None, threads)).unwrap();
            start.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn criterion_7() -> Outcome {
    let a = laplacian_2d(250);
    let an = Arc::new(analyze(&a, &AnalyzeOptions::default()).unwrap());
    let mode = an.symbolic.kernel_mode;
    let f = factorize(&a, an.clone(), &FactorOptions::default()).unwrap();
    let b = vec![1.0; a.n()];
    let (_, report) = solve(&a, &f, &b, &SolveOptions::default()).unwrap();
    let be = report.final_backward_error();
    let t1 = best_factor_time(&a, &an, 1);
    let t4 = best_factor_time(&a, &an, 4);
    let speedup = t1 / t4;
    outcome(
        mode != KernelMode::RowRow && be <= 1e-12,
        format!(
            "mode {}, backward error {be:.2e}; 4-thread speedup {speedup:.2}x ({t1:.3} s / {t4:.3} s, informational target 1.2x, {} core(s) available)",
            mode.name(),
            cores()
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lap200.mtx");
    let a = laplacian_2d(200);
    write_matrix_market(&path, &a);
    let cli = Cli::try_parse_from(["hybrid-lu", "solve", "--matrix", path.to_str().unwrap(), "--repeat", "10"]).unwrap();
    let Command::Solve(args) = cli.command;
    let cfg = RunConfig::from_args(&args).unwrap();
    let (report, _) = run_solve(&args, &cfg).unwrap();
    let full = report.phase_times_seconds.preprocess + report.phase_times_seconds.factorize;
    let reps = report.repeat_times_seconds.len();
    let refac = report.repeat_times_seconds.iter().map(|r| r.refactorize).sum::<f64>() / reps.max(1) as f64;

    let an = Arc::new(analyze(&a, &AnalyzeOptions::default()).unwrap());
    let f = factorize(&a, an, &FactorOptions::default()).unwrap();
    let g = refactorize(&a, &f, &FactorOptions::default()).unwrap();
    let b = vec![1.0; a.n()];
    let (x, _) = solve(&a, &f, &b, &SolveOptions::default()).unwrap();
    let (y, _) = solve(&a, &g, &b, &SolveOptions::default()).unwrap();
    let bitwise = f.bitwise_eq(&g) && bits(&x) == bits(&y);
    outcome(
        bitwise && reps == 10,
        format!(
            "refactorize bitwise identical: {bitwise}; {reps} repetitions, preprocess+factorize {full:.3} s vs refactorize {refac:.3} s = {:.2}x (informational target 1.3x)",
            full / refac
        ),
    )
}

/// Tridiagonal matrix with a nearly singular 2x2 block `[[1, 1], [1, 1+gap]]`
/// on rows `k, k+1`. No other row touches the block columns, so the block's
/// second pivot is `gap` under any ordering, and a `gap` just below the
/// threshold gets perturbed.
fn near_singular(n: usize, k: usize, gap: f64) -> CsrMatrix {
    let mut t: Vec<hybrid_lu::Triplet> = Vec::new();
    for i in 0..n {
        if i == k || i == k + 1 {
            continue;
        }
        t.push((i, i, 4.0).into());
        if i > 0 && i - 1 != k + 1 {
            t.push((i, i - 1, -1.0).into());
        }
        if i + 1 < n && i + 1 != k {
            t.push((i, i + 1, -1.0).into());
        }
    }
    t.extend([(k, k, 1.0), (k, k + 1, 1.0), (k + 1, k, 1.0), (k + 1, k + 1, 1.0 + gap)].map(hybrid_lu::Triplet::from));
    t.extend([(k, k - 1, -0.5), (k + 1, k + 2, -0.5)].map(hybrid_lu::Triplet::from));
    CsrMatrix::from_triplets(n, &t).unwrap()
}

fn criterion_9() -> Outcome {
    let a = near_singular(40, 20, 0.99e-8);
    let an = Arc::new(analyze(&a, &AnalyzeOptions::default()).unwrap());
    let f = factorize(&a, an, &FactorOptions::default()).unwrap();
    let b: Vec<f64> = (0..a.n()).map(|i| 1.0 + i as f64 * 0.01).collect();
    let (_, report) = solve(&a, &f, &b, &SolveOptions::default()).unwrap();
    let errs = &report.backward_errors;
    let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
    let last = report.final_backward_error();
    outcome(
        f.perturbed().len() == 1 && monotone && last <= 1e-13 && report.iterations <= 5,
        format!(
            "{} perturbed pivot(s), {} iterations, backward errors {:?}",
            f.perturbed().len(),
            report.iterations,
            errs.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>()
        ),
    )
}

/// Random DAG with deps pointing to lower indices.
fn random_dag(rng: &mut rand_chacha::ChaCha8Rng, nodes: usize) -> Vec<hybrid_lu::preprocess::Node> {
    (0..nodes)
        .map(|u| {
            let mut deps: Vec<usize> = (0..u).filter(|_| rng.gen_bool(0.08)).collect();
            deps.dedup();
            hybrid_lu::preprocess::Node {
                kind: hybrid_lu::preprocess::NodeKind::StandaloneRow,
                first_row: u,
                row_count: 1,
                deps,
            }
        })
        .collect()
}

fn stress_run(run: u64) -> bool {
    let mut r = rng(10_000 + run);
    let count = r.gen_range(8..=96);
    let nodes = random_dag(&mut r, count);
    let threads = [2, 3, 4, 8][run as usize % 4];
    let (levels, _) = compute_levels(&nodes, 1).unwrap();
    let cutoff = bulk_cutoff(&levels, r.gen_range(1..=6));
    let delays: Vec<u32> = (0..nodes.len()).map(|_| r.gen_range(0..4000)).collect();
    let clock = AtomicUsize::new(0);
    let stamps: Vec<AtomicUsize> = (0..nodes.len()).map(|_| AtomicUsize::new(usize::MAX)).collect();
    let result = sched::execute(&levels, cutoff, threads, || (), |_, u, gate| {
        for &d in &nodes[u].deps {
            if !gate.wait(d) {
                return Err(());
            }
        }
        for i in 0..delays[u] {
            std::hint::black_box(i);
            if i % 1024 == 1023 {
                std::thread::yield_now();
            }
        }
        stamps[u].store(clock.fetch_add(1, Ordering::AcqRel), Ordering::Release);
        Ok(())
    });
    let stamp = |u: usize| stamps[u].load(Ordering::Acquire);
    result.is_ok()
        && (0..nodes.len()).all(|u| stamp(u) != usize::MAX && nodes[u].deps.iter().all(|&d| stamp(d) < stamp(u)))
}

fn criterion_10(corpus: &[CorpusMatrix]) -> Outcome {
    let mut violations = 0;
    for m in corpus {
        let an = analysis(&m.a, &AnalyzeOptions::default());
        let s = &an.symbolic;
        let mut level = vec![0usize; s.nodes.len()];
        for (lv, nodes) in s.levels.iter().enumerate() {
            for &u in nodes {
                level[u] = lv;
            }
        }
        for (u, node) in s.nodes.iter().enumerate() {
            if node.deps.iter().any(|&d| level[d] >= level[u]) {
                violations += 1;
            }
        }
    }

    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let bad = (0..1000).filter(|&run| !stress_run(run)).count();
        let _ = tx.send(bad);
    });
    let stress = rx.recv_timeout(Duration::from_secs(300));
    let stress_detail = match stress {
        Ok(bad) => format!("1000 pipeline stress runs, {bad} with ordering or completion errors"),
        Err(_) => "pipeline stress timed out (deadlock)".to_string(),
    };
    outcome(
        violations == 0 && stress == Ok(0),
        format!("{violations} level violations over {} matrices; {stress_detail}", corpus.len()),
    )
}

fn main() {
    let corpus = corpus(220);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("oracle equivalence", Box::new(|| criterion_1(&corpus))),
        ("reconstruction", Box::new(|| criterion_2(&corpus))),
        ("kernel cross-equivalence", Box::new(|| criterion_3(&corpus))),
        ("determinism", Box::new(|| criterion_4(&corpus))),
        ("static pivoting", Box::new(|| criterion_5(&corpus))),
        ("symbolic correctness", Box::new(|| criterion_6(&corpus))),
        ("structured parallel benchmark", Box::new(criterion_7)),
        ("repeated-solve path", Box::new(criterion_8)),
        ("refinement", Box::new(criterion_9)),
        ("levelization", Box::new(|| criterion_10(&corpus))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {} ({name}): {}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
