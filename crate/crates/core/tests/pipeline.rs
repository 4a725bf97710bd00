//! Cross-module integration: golden hierarchy dump, serialization of
//! synthesized circuits, and gate-level verification of the translated
//! moment pipeline on a lattice deep enough to exercise child-to-parent
//! translation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use q2fmm_core::circuit::Circuit;
use q2fmm_core::hierarchy::BoxHierarchy;
use q2fmm_core::lattice::{FockState, LatticeSpec};
use q2fmm_core::sim::run_basis;
use q2fmm_core::synth::{quantized_outcome, synthesize, SynthesisOptions};

#[test]
fn hierarchy_dump_matches_golden_file() {
    let h = BoxHierarchy::build(&LatticeSpec::square(4).unwrap());
    let golden = include_str!("data/hierarchy_4x4.txt");
    assert_eq!(h.dump(), golden);
}

#[test]
fn synthesized_circuit_serialization_round_trips() {
    let h = BoxHierarchy::build(&LatticeSpec::square(4).unwrap());
    let r = synthesize(&h, &SynthesisOptions::default()).unwrap();
    let text = r.circuit.serialize();
    let back = Circuit::deserialize(&text).unwrap();
    assert_eq!(back, r.circuit);
    assert_eq!(back.serialize(), text);
}

/// Spinful lattices with real merge stages: 4x4 exercises the extra-bit box
/// sums (eight spin qubits per box), 8x8 at order 1 exercises moment loads
/// drawing from both spin qubits of a site.
#[test]
fn spinful_merges_and_moments_verified_at_gate_level() {
    let checks = [(4u32, 0u32, 30), (8, 1, 4)];
    for (width, p, samples) in checks {
        let lattice = LatticeSpec::new(width, width, true, 1.0, 0.4, width * width).unwrap();
        let h = BoxHierarchy::build(&lattice);
        let opts = SynthesisOptions {
            order_p: p,
            spinful: true,
            ..SynthesisOptions::default()
        };
        let r = synthesize(&h, &opts).unwrap();
        let n_sys = lattice.system_qubits();
        let mut rng = ChaCha8Rng::seed_from_u64(width as u64 * 100 + p as u64);
        for _ in 0..samples {
            let st = FockState::random_with_count(&lattice, width * width / 2, &mut rng).unwrap();
            let sys = st.to_bits();
            let mut bits = vec![false; r.circuit.n_qubits() as usize];
            bits[..n_sys].copy_from_slice(&sys);
            let out = run_basis(&r.circuit, &bits).unwrap();
            assert_eq!(&out.bits[..n_sys], &sys[..]);
            assert!(out.bits[n_sys..].iter().all(|&b| !b), "{width}x{width} p={p}");
            let oracle = quantized_outcome(&r.plan, &sys);
            assert_eq!(out.phase, oracle.phase, "{width}x{width} p={p}");
        }
    }
}

/// Tightening the binary precision shrinks the quantization gap to the
/// analytic expansion value.
#[test]
fn precision_controls_quantization_gap() {
    use q2fmm_core::multipole::fmm_total_energy;
    let lattice = LatticeSpec::square(8).unwrap();
    let h = BoxHierarchy::build(&lattice);
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let st = FockState::random_with_count(&lattice, 32, &mut rng).unwrap();
    let analytic = fmm_total_energy(&h, &st, 2);
    let mut gaps = Vec::new();
    for f in [4u32, 8, 12, 16] {
        let opts = SynthesisOptions {
            order_p: 2,
            eps_b: 0.5f64.powi(f as i32),
            ..SynthesisOptions::default()
        };
        let r = synthesize(&h, &opts).unwrap();
        let gap = (quantized_outcome(&r.plan, &st.to_bits()).energy - analytic).abs();
        assert!(gap <= r.plan.quantization_bound, "f={f}: {gap} > bound");
        gaps.push(gap);
    }
    assert!(gaps[3] < gaps[0] / 100.0, "gaps {gaps:?} did not shrink");
}

/// Range-truncated hierarchies synthesize consistently: fewer pairs, same
/// bit-exact agreement between gates and the quantized evaluator.
#[test]
fn truncated_hierarchy_synthesizes_consistently() {
    let lattice = LatticeSpec::square(8).unwrap();
    let full = BoxHierarchy::build(&lattice);
    let cut = full.level_cutoff(4.0).unwrap();
    let opts = SynthesisOptions::default();
    let r_full = synthesize(&full, &opts).unwrap();
    let r_cut = synthesize(&cut, &opts).unwrap();
    assert!(r_cut.circuit.len() < r_full.circuit.len());

    let n_sys = lattice.system_qubits();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..5 {
        let st = FockState::random_with_count(&lattice, 20, &mut rng).unwrap();
        let sys = st.to_bits();
        let mut bits = vec![false; r_cut.circuit.n_qubits() as usize];
        bits[..n_sys].copy_from_slice(&sys);
        let out = run_basis(&r_cut.circuit, &bits).unwrap();
        assert!(out.bits[n_sys..].iter().all(|&b| !b));
        assert_eq!(out.phase, quantized_outcome(&r_cut.plan, &sys).phase);
    }
}

/// On 16x16, order >= 1 moments at the coarser level come from quantized
/// child-to-parent translation; the gate-level phases must still match the
/// classical evaluator bit-exactly and leave every ancilla clean.
#[test]
fn translated_moments_verified_at_gate_level_16x16() {
    let lattice = LatticeSpec::new(16, 16, false, 1.0, 0.0, 64).unwrap();
    let h = BoxHierarchy::build(&lattice);
    let opts = SynthesisOptions {
        order_p: 1,
        ..SynthesisOptions::default()
    };
    let r = synthesize(&h, &opts).unwrap();
    // the plan must actually contain a translated level
    assert!(r.plan.merge_counts().len() >= 2, "{:?}", r.plan.merge_counts());

    let n_sys = lattice.system_qubits();
    let n_total = r.circuit.n_qubits() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(1616);
    for _ in 0..3 {
        let st = FockState::random_with_count(&lattice, 64, &mut rng).unwrap();
        let sys = st.to_bits();
        let mut bits = vec![false; n_total];
        bits[..n_sys].copy_from_slice(&sys);
        let out = run_basis(&r.circuit, &bits).unwrap();
        assert_eq!(&out.bits[..n_sys], &sys[..]);
        assert!(out.bits[n_sys..].iter().all(|&b| !b), "ancillae dirty");
        let oracle = quantized_outcome(&r.plan, &sys);
        assert_eq!(out.phase, oracle.phase);
    }
}
