//! Acceptance run: one PASS/FAIL line per criterion, with the evidence behind it.

mod common;

use std::time::{Duration, Instant};

use common::*;
use pstchain::basis::{full_basis, k_states};
use pstchain::chain::{build_couplings, hamiltonian_block, hamiltonian_full, ChainSpec, Partition};
use pstchain::dynamics::{eigendecompose, propagator, TransferEvaluator};
use pstchain::lambda::{min_root_at, scan, ScanOptions, TauGrid};
use pstchain::protocol::{
    amplification_runs, run_arbitrary_pst, run_k_excitation_pst, run_k_excitation_pst_full,
};
use pstchain::reproduce::{
    adjusted_chains, long_chain_grid, ADJUSTED_LAMBDA_TOL, ADJUSTED_TAU_TOL, SCAN_STEP, TABLE_1A,
    TABLE_2_ADJUSTED, TABLE_2_HOMOGENEOUS,
};
use pstchain::restore::circuit::apply_exchange_gate;
use pstchain::restore::{solve, RestoreMode, RestoreProblem, SolverOptions};
use pstchain::{CMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU_GRID_TOL: f64 = SCAN_STEP / 2.0;
const LAMBDA_TOL: f64 = 5e-4;
const ROOT_TOL: f64 = 5e-4;
const TABLE_1A_BUDGET: Duration = Duration::from_secs(120);
const TABLE_2_BUDGET: Duration = Duration::from_secs(600);
const SOLVER_RUNS: u64 = 25;
const RUN_SPREAD_TOL: f64 = 1e-8;
const ROOT_MATCH_TOL: f64 = 1e-6;
const PROTOCOL_TRIALS: u64 = 100;
const FIDELITY_TOL: f64 = 1e-8;
const PROBABILITY: f64 = 0.356;
const PROBABILITY_TOL: f64 = 1e-3;
const PROTOCOL_BUDGET: Duration = Duration::from_secs(60);
const ARBITRARY_PROBABILITY_TOL: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-10;
const GATE_TRIALS: usize = 100;
const GATE_TOL: f64 = 1e-12;
const PRESERVING_CIRCUIT_FLOOR: f64 = 0.42;
const NONPRESERVING_CIRCUIT_BAND: (f64, f64) = (0.22, 0.27);
const CIRCUIT_SEED: u64 = 1;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            detail: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.detail
            .push(format!("{} {line}", if ok { "ok  " } else { "MISS" }));
    }
}

fn homogeneous(n: usize) -> pstchain::chain::CouplingMatrix {
    build_couplings(&ChainSpec::homogeneous(n)).unwrap()
}

fn table_1a_scan() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let c = homogeneous(10);
    let grid = TauGrid::new(0.0, 20.0, SCAN_STEP).unwrap();
    for (n_er, tau0, lam, _, _) in TABLE_1A {
        let r = scan(
            &c,
            &Partition::new(10, 3, n_er).unwrap(),
            2,
            &grid,
            ScanOptions::default(),
        )
        .unwrap();
        o.check(
            (r.tau0 - tau0).abs() <= TAU_GRID_TOL,
            format!("n_ER={n_er} tau0 {:.3} (want {tau0:.3})", r.tau0),
        );
        o.check(
            (r.lambda_min - lam).abs() <= LAMBDA_TOL,
            format!(
                "n_ER={n_er} |lambda|_min {:.5} (want {lam} +- {LAMBDA_TOL})",
                r.lambda_min
            ),
        );
    }
    let elapsed = start.elapsed();
    o.check(elapsed < TABLE_1A_BUDGET, format!("runtime {elapsed:.1?}"));
    o
}

fn polynomial_roots() -> Outcome {
    let mut o = Outcome::new();
    let c = homogeneous(10);
    for (n_er, tau0, _, _, reference) in TABLE_1A {
        let ev = TransferEvaluator::new(&c, &Partition::new(10, 3, n_er).unwrap(), 2).unwrap();
        let (found, _) = min_root_at(&ev, tau0);
        let ok = found.len() == reference.len()
            && found
                .iter()
                .zip(reference)
                .all(|(a, b)| (a - b).abs() <= ROOT_TOL);
        o.check(
            ok,
            format!("n_ER={n_er} tau={tau0} roots {found:.5?} (want {reference:?})"),
        );
    }
    o
}

fn table_2_scan() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    for (n, tau0, lam) in TABLE_2_HOMOGENEOUS {
        let t = Instant::now();
        let grid = long_chain_grid(n).unwrap();
        let r = scan(
            &homogeneous(n),
            &Partition::new(n, 3, 5).unwrap(),
            2,
            &grid,
            ScanOptions::default(),
        )
        .unwrap();
        o.check(
            (r.tau0 - tau0).abs() <= TAU_GRID_TOL,
            format!(
                "N={n} tau0 {:.3} (want {tau0:.3}) in {:.1?}",
                r.tau0,
                t.elapsed()
            ),
        );
        o.check(
            (r.lambda_min - lam).abs() <= LAMBDA_TOL,
            format!(
                "N={n} |lambda| {:.5} (want {lam} +- {LAMBDA_TOL})",
                r.lambda_min
            ),
        );
    }
    let elapsed = start.elapsed();
    o.check(
        elapsed < TABLE_2_BUDGET,
        format!("homogeneous rows runtime {elapsed:.1?}"),
    );

    let (n, tau0, lam) = TABLE_2_ADJUSTED;
    let mut any = false;
    let mut readings = Vec::new();
    for (name, spec) in adjusted_chains() {
        let c = build_couplings(&spec).unwrap();
        let r = scan(
            &c,
            &Partition::new(n, 3, 5).unwrap(),
            2,
            &long_chain_grid(n).unwrap(),
            ScanOptions::default(),
        )
        .unwrap();
        let hit = (r.tau0 - tau0).abs() <= ADJUSTED_TAU_TOL
            && (r.lambda_min - lam).abs() <= ADJUSTED_LAMBDA_TOL;
        any |= hit;
        readings.push(format!(
            "{name}: tau0 {:.3} |lambda| {:.5}{}",
            r.tau0,
            r.lambda_min,
            if hit { " (match)" } else { "" }
        ));
    }
    o.check(
        any,
        format!(
            "N={n} adjusted (want {tau0} / {lam}) {}",
            readings.join("; ")
        ),
    );
    o
}

fn solver_agreement() -> Outcome {
    let mut o = Outcome::new();
    let c = homogeneous(10);
    for (n_er, tau0, _, _, _) in TABLE_1A {
        let ev = TransferEvaluator::new(&c, &Partition::new(10, 3, n_er).unwrap(), 2).unwrap();
        let root = min_root_at(&ev, tau0).1;
        let block = ev.at(tau0);
        for preserving in [true, false] {
            let values: Vec<f64> = (0..SOLVER_RUNS)
                .map(|seed| {
                    let p = RestoreProblem::general(
                        block.clone(),
                        preserving,
                        SolverOptions::general(seed),
                    )
                    .unwrap();
                    solve(&p).unwrap().lambda.norm()
                })
                .collect();
            let hi = values.iter().cloned().fold(f64::MIN, f64::max);
            let lo = values.iter().cloned().fold(f64::MAX, f64::min);
            let off = values.iter().map(|v| (v - root).abs()).fold(0.0, f64::max);
            let mode = if preserving {
                "preserving"
            } else {
                "nonpreserving"
            };
            o.check(
                hi - lo <= RUN_SPREAD_TOL && off <= ROOT_MATCH_TOL,
                format!("n_ER={n_er} {mode}: {SOLVER_RUNS} runs spread {:.1e}, max offset from root {off:.1e}", hi - lo),
            );
        }
    }
    o
}

fn protocol_fidelity() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let tau = 14.391;
    let (c, part, sol) = solution_at(10, 5, tau, 0);
    let mut worst_fidelity = 1.0f64;
    let mut worst_probability = 0.0f64;
    for trial in 0..PROTOCOL_TRIALS {
        let s = random_state(3, 1000 + trial);
        let r = run_k_excitation_pst(&c, &part, 2, &s, &sol, tau).unwrap();
        worst_fidelity = worst_fidelity.min(r.fidelity);
        worst_probability = worst_probability.max((r.success_probability - PROBABILITY).abs());
    }
    let elapsed = start.elapsed();
    o.check(
        worst_fidelity >= 1.0 - FIDELITY_TOL,
        format!("min fidelity {worst_fidelity:.15}"),
    );
    o.check(
        worst_probability <= PROBABILITY_TOL,
        format!(
            "max |p - {PROBABILITY}| {worst_probability:.2e} (p = |lambda|^2 = {:.6})",
            sol.lambda.norm_sqr()
        ),
    );
    o.check(
        elapsed < PROTOCOL_BUDGET,
        format!("{PROTOCOL_TRIALS} trials in {elapsed:.1?}"),
    );
    o
}

fn arbitrary_protocol() -> Outcome {
    let mut o = Outcome::new();
    let tau = 14.391;
    let (c, _, sol) = solution_at(10, 5, tau, 0);
    let part = Partition::new(10, 3, 5)
        .unwrap()
        .with_registers(vec![3], vec![6])
        .unwrap();
    let want = sol.lambda.norm_sqr();
    let mut worst_fidelity = 1.0f64;
    let mut worst_probability = 0.0f64;
    for trial in 0..20 {
        let input = random_state(2, 500 + trial);
        let r = run_arbitrary_pst(&c, &part, 2, &input, &sol, tau).unwrap();
        worst_fidelity = worst_fidelity.min(r.fidelity);
        worst_probability = worst_probability.max((r.success_probability - want).abs());
    }
    o.check(
        worst_fidelity >= 1.0 - FIDELITY_TOL,
        format!("min fidelity {worst_fidelity:.15} over 20 inputs"),
    );
    o.check(
        worst_probability <= ARBITRARY_PROBABILITY_TOL,
        format!("max |p - |lambda|^2| {worst_probability:.2e}"),
    );
    o
}

fn oracle_equivalence() -> Outcome {
    let mut o = Outcome::new();
    let mut h_dev = 0.0f64;
    let mut v_dev = 0.0f64;
    for n in 2..=8 {
        let c = build_couplings(&ChainSpec::with_positions(random_positions(
            n,
            40 + n as u64,
        )))
        .unwrap();
        let oracle = pauli_hamiltonian(&c);
        let order = full_basis(n).unwrap();
        let permuted = CMatrix::from_fn(1 << n, 1 << n, |a, b| {
            oracle[(order[a] as usize, order[b] as usize)]
        });
        h_dev = h_dev.max(max_abs(
            &(hamiltonian_full(&c).unwrap().to_dense() - permuted),
        ));
        let tau = 0.7 * n as f64;
        let v_full = expm_hermitian(&oracle, tau);
        for k in 0..=n {
            let basis = k_states(n, k).unwrap();
            let v = propagator(
                &eigendecompose(&hamiltonian_block(&c, &basis).unwrap()).unwrap(),
                tau,
            );
            let s = basis.states();
            let want = CMatrix::from_fn(s.len(), s.len(), |a, b| {
                v_full[(s[a] as usize, s[b] as usize)]
            });
            v_dev = v_dev.max(max_abs(&(v - want)));
        }
    }
    o.check(
        h_dev < ORACLE_TOL,
        format!("Hamiltonians N=2..8 max deviation {h_dev:.1e}"),
    );
    o.check(
        v_dev < ORACLE_TOL,
        format!("sector propagators N=2..8 max deviation {v_dev:.1e}"),
    );

    let mut p_dev = 0.0f64;
    for (n, n_er, tau) in [(7, 4, 5.1), (8, 4, 6.0), (8, 5, 6.2)] {
        let (c, part, sol) = solution_at(n, n_er, tau, 3);
        for seed in 0..3 {
            let s = random_state(3, 70 + seed);
            let (p, amps) = dense_protocol(&c, &part, &sol, &s, tau);
            for r in [
                run_k_excitation_pst(&c, &part, 2, &s, &sol, tau).unwrap(),
                run_k_excitation_pst_full(&c, &part, 2, &s, &sol, tau).unwrap(),
            ] {
                p_dev = p_dev.max((r.success_probability - p).abs());
                p_dev = p_dev.max(max_diff(&r.output_amplitudes, &amps));
            }
        }
    }
    o.check(
        p_dev < ORACLE_TOL,
        format!("protocol on N=7,8 max deviation {p_dev:.1e}"),
    );
    o
}

/// Dense matrix of the two-qubit exchange gate on a `n`-qubit register.
fn exchange_matrix(n: usize, i: usize, j: usize, alpha: f64, beta: f64) -> CMatrix {
    let dim = 1 << n;
    let mut u = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut e = vec![C64::new(0.0, 0.0); dim];
        e[col] = C64::new(1.0, 0.0);
        apply_exchange_gate(&mut e, i, j, alpha, beta);
        u.set_column(col, &pstchain::CVector::from_vec(e));
    }
    u
}

fn gate_algebra() -> Outcome {
    let mut o = Outcome::new();
    let n = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut leak = 0.0f64;
    for _ in 0..GATE_TRIALS {
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let u = exchange_matrix(
            n,
            i,
            j,
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        for r in 0..u.nrows() {
            for col in 0..u.ncols() {
                if (r as u32).count_ones() != (col as u32).count_ones() {
                    leak = leak.max(u[(r, col)].norm());
                }
            }
        }
    }
    o.check(
        leak <= GATE_TOL,
        format!("{GATE_TRIALS} random gates, max off-block entry {leak:.1e}"),
    );

    let mut swap_dev = 0.0f64;
    for (i, j) in [(0, 1), (1, 3), (2, 0)] {
        let u = exchange_matrix(n, i, j, 0.0, 0.0);
        let swap = CMatrix::from_fn(1 << n, 1 << n, |r, col| {
            let (bi, bj) = (col >> i & 1, col >> j & 1);
            let swapped = col & !(1 << i | 1 << j) | bj << i | bi << j;
            C64::new(if r == swapped { 1.0 } else { 0.0 }, 0.0)
        });
        swap_dev = swap_dev.max(max_abs(&(u - swap)));
    }
    o.check(
        swap_dev <= GATE_TOL,
        format!("alpha = beta = 0 against SWAP: {swap_dev:.1e}"),
    );
    o
}

fn circuit_fits() -> Outcome {
    let mut o = Outcome::new();
    let block = TransferEvaluator::new(&homogeneous(10), &Partition::new(10, 3, 4).unwrap(), 2)
        .unwrap()
        .at(12.493);
    let opts = SolverOptions::circuit(CIRCUIT_SEED);
    let fit = |mode| {
        let t = Instant::now();
        let sol = solve(&RestoreProblem::circuit(block.clone(), mode, 0, opts).unwrap()).unwrap();
        (sol, t.elapsed())
    };
    let (pres, t) = fit(RestoreMode::CircuitPreserving { layers: 3 });
    let lam = pres.lambda.norm();
    o.check(
        lam >= PRESERVING_CIRCUIT_FLOOR,
        format!(
            "preserving Q=3, {} restarts: best |lambda| {lam:.5} (seed {}, restart {}) in {t:.1?}",
            opts.restarts, pres.seed, pres.restart
        ),
    );
    let (non, t) = fit(RestoreMode::CircuitNonpreserving { layers: 2 });
    let lam = non.lambda.norm();
    let (lo, hi) = NONPRESERVING_CIRCUIT_BAND;
    o.check(
        (lo..=hi).contains(&lam),
        format!(
            "nonpreserving Q=2, {} restarts: best |lambda| {lam:.5} (seed {}, restart {}) in {t:.1?}",
            opts.restarts, non.seed, non.restart
        ),
    );
    o
}

fn amplification() -> Outcome {
    let mut o = Outcome::new();
    let m = amplification_runs(0.5, 0.001).unwrap();
    o.check(m == 10, format!("M(0.5, 0.001) = {m}"));
    let ps: Vec<f64> = (1..=10).map(|i| i as f64 / 11.0).collect();
    let eps: Vec<f64> = (1..=10).map(|i| 10f64.powi(-i)).collect();
    let grid: Vec<Vec<u64>> = ps
        .iter()
        .map(|&p| {
            eps.iter()
                .map(|&e| amplification_runs(p, e).unwrap())
                .collect()
        })
        .collect();
    let down_in_p = (0..10).all(|e| grid.windows(2).all(|w| w[1][e] <= w[0][e]));
    let up_in_inv_eps = grid.iter().all(|row| row.windows(2).all(|w| w[1] >= w[0]));
    o.check(
        down_in_p && up_in_inv_eps,
        "monotone over a 10x10 (p, epsilon) grid".into(),
    );
    o
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Table 1a scan", table_1a_scan),
        ("lambda polynomial roots", polynomial_roots),
        ("Table 2 scan", table_2_scan),
        ("solver runs agree with minimal root", solver_agreement),
        ("k-excitation protocol fidelity", protocol_fidelity),
        ("arbitrary-state protocol", arbitrary_protocol),
        ("oracle equivalence", oracle_equivalence),
        ("gate algebra", gate_algebra),
        ("circuit fits", circuit_fits),
        ("amplification", amplification),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {}: {name} ({:.1?})",
            if outcome.pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed()
        );
        for line in &outcome.detail {
            println!("       {line}");
        }
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
