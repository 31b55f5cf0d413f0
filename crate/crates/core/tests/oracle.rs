mod common;

use common::*;
use pstchain::basis::{embed_subsystem, full_basis, k_states};
use pstchain::chain::{build_couplings, hamiltonian_block, hamiltonian_full, ChainSpec, Partition};
use pstchain::dynamics::{eigendecompose, propagator, TransferEvaluator};
use pstchain::protocol::{
    arbitrary_encoding_flips, run_arbitrary_pst, run_global_pst, run_k_excitation_pst,
    run_k_excitation_pst_full, s0_pattern, ControlledFlip, LineOperator,
};
use pstchain::{CMatrix, CVector, C64};

const ORACLE_TOL: f64 = 1e-10;

#[test]
fn two_site_block() {
    let c = build_couplings(&ChainSpec::homogeneous(2)).unwrap();
    let h = hamiltonian_block(&c, &k_states(2, 1).unwrap()).unwrap();
    assert_eq!(h[(0, 1)], C64::new(0.5, 0.0));
    assert_eq!(h[(1, 0)], C64::new(0.5, 0.0));
    assert_eq!(h[(0, 0)], C64::new(0.0, 0.0));
    let oracle = pauli_hamiltonian(&c);
    assert!((oracle[(0b01, 0b10)] - C64::new(0.5, 0.0)).norm() < 1e-15);
}

#[test]
fn full_hamiltonian_matches_pauli_construction() {
    for n in 2..=8 {
        let spec = ChainSpec::with_positions(random_positions(n, n as u64));
        let c = build_couplings(&spec).unwrap();
        let oracle = pauli_hamiltonian(&c);
        let order = full_basis(n).unwrap();
        let permuted = CMatrix::from_fn(1 << n, 1 << n, |a, b| {
            oracle[(order[a] as usize, order[b] as usize)]
        });
        let dense = hamiltonian_full(&c).unwrap().to_dense();
        assert!(max_abs(&(dense - permuted)) < 1e-12, "n = {n}");
    }
}

#[test]
fn sector_propagators_match_dense_exponential() {
    let n = 8;
    let c = build_couplings(&ChainSpec::with_positions(random_positions(n, 11))).unwrap();
    let v_full = expm_hermitian(&pauli_hamiltonian(&c), 3.7);
    for k in 0..=n {
        let basis = k_states(n, k).unwrap();
        let v = propagator(
            &eigendecompose(&hamiltonian_block(&c, &basis).unwrap()).unwrap(),
            3.7,
        );
        let s = basis.states();
        let oracle = CMatrix::from_fn(s.len(), s.len(), |a, b| {
            v_full[(s[a] as usize, s[b] as usize)]
        });
        assert!(max_abs(&(v - oracle)) < ORACLE_TOL, "k = {k}");
    }
}

#[test]
fn transfer_block_matches_dense_exponential() {
    let n = 8;
    let c = build_couplings(&ChainSpec::homogeneous(n)).unwrap();
    let part = Partition::new(n, 3, 5).unwrap();
    let v_full = expm_hermitian(&pauli_hamiltonian(&c), 5.3);
    let block = TransferEvaluator::new(&c, &part, 2).unwrap().at(5.3);
    let s = embed_subsystem(&part.sender(), n, 2).unwrap();
    let er = embed_subsystem(&part.extended_receiver(), n, 2).unwrap();
    for r in 0..er.len() {
        for col in 0..s.len() {
            let want = v_full[(er.chain_mask(r) as usize, s.chain_mask(col) as usize)];
            assert!((block.v_hat[(r, col)] - want).norm() < ORACLE_TOL);
        }
    }
}

#[test]
fn k_protocol_matches_dense_oracle() {
    let tau = 6.2;
    let (c, part, sol) = solution_at(8, 5, tau, 3);
    for seed in 0..3 {
        let s = random_state(3, seed);
        let sector = run_k_excitation_pst(&c, &part, 2, &s, &sol, tau).unwrap();
        let full = run_k_excitation_pst_full(&c, &part, 2, &s, &sol, tau).unwrap();
        let (p, amps) = dense_protocol(&c, &part, &sol, &s, tau);
        assert!((sector.success_probability - p).abs() < ORACLE_TOL);
        assert!((full.success_probability - p).abs() < ORACLE_TOL);
        assert!(max_diff(&sector.output_amplitudes, &amps) < ORACLE_TOL);
        assert!(max_diff(&full.output_amplitudes, &amps) < ORACLE_TOL);
        assert!(sector.fidelity > 1.0 - 1e-8);
    }
}

#[test]
fn identity_restoring_leaves_transfer_amplitudes() {
    let n = 8;
    let tau = 4.4;
    let c = build_couplings(&ChainSpec::homogeneous(n)).unwrap();
    let part = Partition::new(n, 3, 5).unwrap();
    let s = random_state(3, 9);
    let block = TransferEvaluator::new(&c, &part, 2).unwrap().at(tau);
    let expected = &block.v_hat * CVector::from_column_slice(&s);
    let v = expm_hermitian(&pauli_hamiltonian(&c), tau);
    let sender = embed_subsystem(&part.sender(), n, 2).unwrap();
    let mut psi = CVector::zeros(1 << n);
    for (j, &z) in s.iter().enumerate() {
        psi[sender.chain_mask(j) as usize] = z;
    }
    let out = v * psi;
    let er = embed_subsystem(&part.extended_receiver(), n, 2).unwrap();
    for r in 0..er.len() {
        assert!((out[er.chain_mask(r) as usize] - expected[r]).norm() < ORACLE_TOL);
    }
}

#[test]
fn partial_projector_equals_full_pattern_in_sector() {
    let n = 8;
    let part = Partition::new(n, 3, 5).unwrap();
    let recv = embed_subsystem(&part.receiver(), n, 2).unwrap();
    let chain_dim = 1usize << n;
    let sector = k_states(n, 2).unwrap();
    let mut partial = vec![C64::new(0.0, 0.0); 2 * chain_dim];
    for (i, &m) in sector.states().iter().enumerate() {
        partial[m as usize] = C64::new(i as f64 + 1.0, 0.5 * i as f64);
    }
    let mut exact = partial.clone();
    let all = chain_dim - 1;
    for &m in recv.chain_masks() {
        ControlledFlip::on_excited(m as usize, chain_dim)
            .unwrap()
            .apply(&mut partial);
        ControlledFlip::new(all, m as usize, chain_dim)
            .unwrap()
            .apply(&mut exact);
    }
    assert!(max_diff(&partial, &exact) < 1e-15);
}

#[test]
fn encoding_cascades_are_index_maps() {
    let n = 10;
    let part = Partition::new(n, 3, 5)
        .unwrap()
        .with_registers(vec![3], vec![6])
        .unwrap();
    let (encode, decode) = arbitrary_encoding_flips(&part, 2).unwrap();
    let sender = embed_subsystem(&part.sender(), n, 2).unwrap();
    let recv = embed_subsystem(&part.receiver(), n, 2).unwrap();
    for j in 0..2 {
        let mut v = vec![C64::new(0.0, 0.0); 1 << n];
        v[s0_pattern(&[3], j)] = C64::new(1.0, 0.0);
        encode.iter().for_each(|f| f.apply(&mut v));
        assert_eq!(v[sender.chain_mask(j) as usize], C64::new(1.0, 0.0));
        let mut w = vec![C64::new(0.0, 0.0); 1 << n];
        w[recv.chain_mask(j) as usize] = C64::new(1.0, 0.0);
        decode.iter().for_each(|f| f.apply(&mut w));
        assert_eq!(w[s0_pattern(&[6], j)], C64::new(1.0, 0.0));
    }
}

#[test]
fn arbitrary_protocol_is_k_protocol_through_index_maps() {
    let tau = 14.391;
    let (c, _, sol) = solution_at(10, 5, tau, 1);
    let part = Partition::new(10, 3, 5)
        .unwrap()
        .with_registers(vec![3], vec![6])
        .unwrap();
    let input = random_state(2, 4);
    let arb = run_arbitrary_pst(&c, &part, 2, &input, &sol, tau).unwrap();
    let s = vec![input[0], input[1], C64::new(0.0, 0.0)];
    let k = run_k_excitation_pst(&c, &part, 2, &s, &sol, tau).unwrap();
    assert!((arb.success_probability - k.success_probability).abs() < ORACLE_TOL);
    assert!(max_diff(&arb.output_amplitudes, &k.output_amplitudes[..2]) < ORACLE_TOL);
    assert!(arb.fidelity > 1.0 - 1e-8);
    let ground = run_arbitrary_pst(
        &c,
        &part,
        2,
        &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        &sol,
        tau,
    )
    .unwrap();
    // bounded by the solver tolerance over |lambda|
    assert!(ground.output_amplitudes[1].norm() < 1e-9);
    assert!((ground.fidelity - 1.0).abs() < 1e-12);
}

#[test]
fn global_protocol_agrees_with_k_protocol() {
    let tau = 6.2;
    let (c, part, sol) = solution_at(8, 5, tau, 3);
    let s = random_state(3, 21);
    let k = run_k_excitation_pst(&c, &part, 2, &s, &sol, tau).unwrap();
    let sender_states = k_states(3, 2).unwrap();
    let mut full = vec![C64::new(0.0, 0.0); 8];
    for (j, &m) in sender_states.states().iter().enumerate() {
        full[m as usize] = s[j];
    }
    let g = run_global_pst(&c, &part, &full, LineOperator::Restoring(&sol), tau).unwrap();
    assert!((g.success_probability - k.success_probability).abs() < ORACLE_TOL);
    let g_out: Vec<C64> = sender_states
        .states()
        .iter()
        .map(|&m| g.output_amplitudes[m as usize])
        .collect();
    assert!(max_diff(&g_out, &k.output_amplitudes) < ORACLE_TOL);
}

#[test]
fn global_protocol_with_perfect_mirror_succeeds_surely() {
    let n = 6;
    let tau = 2.9;
    let c = build_couplings(&ChainSpec::homogeneous(n)).unwrap();
    let part = Partition::new(n, 2, 2).unwrap();
    let v = expm_hermitian(&pauli_hamiltonian(&c), tau);
    // cyclic shift of the sites by n - n_s undoes the evolution and moves S onto R
    let shift = n - 2;
    let perm = CMatrix::from_fn(1 << n, 1 << n, |r, col| {
        let moved = (0..n)
            .filter(|i| col >> i & 1 == 1)
            .fold(0usize, |m, i| m | 1 << ((i + shift) % n));
        if moved == r {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let w = perm * v.adjoint();
    let input = vec![
        C64::new(0.0, 0.0),
        C64::new(0.6, 0.0),
        C64::new(0.0, 0.8),
        C64::new(0.0, 0.0),
    ];
    let r = run_global_pst(&c, &part, &input, LineOperator::Dense(&w), tau).unwrap();
    assert!((r.success_probability - 1.0).abs() < 1e-12);
    assert!((r.fidelity - 1.0).abs() < 1e-12);
    assert!(r.garbage_norm < 1e-12);

    let mixed = vec![
        C64::new(0.6, 0.0),
        C64::new(0.8, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
    ];
    assert!(run_global_pst(&c, &part, &mixed, LineOperator::Dense(&w), tau).is_err());
}
