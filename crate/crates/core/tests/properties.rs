mod common;

use common::{dm, max_abs_diff};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use ququart::constraint_toric::{
    cnot12, cnot_conjugate_word, GateAssignment, Pauli, QubitPairView, QubitRef, StabilizerOperator,
};
use ququart::gamma_algebra::{monomial_to_dense, to_dense, OperatorSum, QuditMonomial, SiteFactor};
use ququart::lattice::{LatticeSpec, Site};
use ququart::linalg::embed;
use ququart::statevector::QuditState;

const N: usize = 3;

fn factor() -> impl Strategy<Value = SiteFactor> {
    (0u8..16).prop_map(|m| SiteFactor::from_mask(m).unwrap())
}

fn coeff() -> impl Strategy<Value = Complex64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn monomial() -> impl Strategy<Value = QuditMonomial> {
    (coeff(), prop::collection::vec((0..N, factor()), 0..4)).prop_map(|(c, fs)| QuditMonomial::new(c, &fs))
}

fn operator() -> impl Strategy<Value = OperatorSum> {
    prop::collection::vec(monomial(), 0..4).prop_map(OperatorSum::from_terms)
}

fn pauli() -> impl Strategy<Value = Pauli> {
    prop::sample::select(Pauli::ALL.to_vec())
}

/// Words on the 2×1 lattice (two ququarts, four qubits).
fn word() -> impl Strategy<Value = StabilizerOperator> {
    (0u8..4, prop::collection::vec((0usize..2, 1u8..3, pauli()), 0..5)).prop_map(|(ph, letters)| {
        let letters: Vec<_> = letters
            .into_iter()
            .map(|(x, slot, p)| (QubitRef::new(Site::new(x, 0), slot).unwrap(), p))
            .collect();
        StabilizerOperator::new(ph, &letters)
    })
}

proptest! {
    #[test]
    fn site_factor_product_matches_matrices(a in factor(), b in factor()) {
        let (s, f) = a.mul_signed(b);
        let lhs = dm(a.matrix() * b.matrix());
        let rhs = dm(f.matrix()) * Complex64::new(s as f64, 0.0);
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-14);
    }

    #[test]
    fn site_factor_commutation_sign_matches_matrices(a in factor(), b in factor()) {
        let ab = a.matrix() * b.matrix();
        let ba = b.matrix() * a.matrix();
        let s = a.commutation_sign(b) as f64;
        prop_assert!((ab - ba * Complex64::new(s, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn monomial_product_matches_dense(a in monomial(), b in monomial()) {
        let lhs = monomial_to_dense(&a.product(&b), N).unwrap();
        let rhs = monomial_to_dense(&a, N).unwrap() * monomial_to_dense(&b, N).unwrap();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn monomial_adjoint_matches_dense(a in monomial()) {
        let lhs = monomial_to_dense(&a.adjoint(), N).unwrap();
        let rhs = monomial_to_dense(&a, N).unwrap().adjoint();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn operator_sum_algebra_matches_dense(a in operator(), b in operator()) {
        let lhs = to_dense(&(&a * &b), N).unwrap();
        let rhs = to_dense(&a, N).unwrap() * to_dense(&b, N).unwrap();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-11);
        let sum = to_dense(&(&a + &b), N).unwrap();
        prop_assert!(max_abs_diff(&sum, &(to_dense(&a, N).unwrap() + to_dense(&b, N).unwrap())) < 1e-12);
    }

    #[test]
    fn operator_sum_json_round_trips(a in operator()) {
        let back = OperatorSum::from_json(&a.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.canonical(), a.canonical());
    }

    #[test]
    fn stabilizer_text_round_trips(w in word()) {
        prop_assert_eq!(StabilizerOperator::parse(&w.to_string()).unwrap(), w);
    }

    #[test]
    fn stabilizer_product_and_commutation_match_dense(a in word(), b in word()) {
        let spec = LatticeSpec::open(2, 1).unwrap();
        let da = a.to_dense(&spec).unwrap();
        let db = b.to_dense(&spec).unwrap();
        prop_assert!(max_abs_diff(&a.product(&b).to_dense(&spec).unwrap(), &(&da * &db)) < 1e-14);
        let comm = &da * &db - &db * &da;
        let commutes = comm.iter().all(|z| z.norm() < 1e-12);
        prop_assert_eq!(a.commutes_with(&b), commutes);
    }

    #[test]
    fn stabilizer_monomial_view_is_exact(w in word()) {
        let spec = LatticeSpec::open(2, 1).unwrap();
        let view = QubitPairView::new(spec);
        let m = view.to_monomial(&w).unwrap();
        prop_assert!(max_abs_diff(&monomial_to_dense(&m, 2).unwrap(), &w.to_dense(&spec).unwrap()) < 1e-14);
        prop_assert_eq!(view.from_monomial(&m).unwrap(), w);
    }

    #[test]
    fn cnot_conjugation_matches_dense(w in word()) {
        let spec = LatticeSpec::open(2, 1).unwrap();
        let c = embed(&cnot12(), &[0], &[0, 1]).unwrap() * embed(&cnot12(), &[1], &[0, 1]).unwrap();
        let lhs = &c * w.to_dense(&spec).unwrap() * c.adjoint();
        let rhs = cnot_conjugate_word(&spec, &w).unwrap().to_dense(&spec).unwrap();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-14);
    }

    #[test]
    fn gate_assignment_parser_never_panics(text in "[ -~\n]{0,80}") {
        let _ = GateAssignment::parse(&text);
    }

    #[test]
    fn unitary_gates_preserve_the_norm(seed in 0u64..1000, q in 0usize..3) {
        let mut amps = Vec::with_capacity(64);
        for i in 0..64u64 {
            let t = (i * 7919 + seed) as f64;
            amps.push(Complex64::new(t.sin(), t.cos()));
        }
        let mut s = QuditState::from_amplitudes(3, amps).unwrap();
        s.normalize().unwrap();
        let g: DMatrix<Complex64> = ququart::linalg::expm_hermitian(&monomial_to_dense(&QuditMonomial::single(0, SiteFactor::G3), 1).unwrap(), 0.3).unwrap();
        s.apply_local(&[q], &g).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trips(seed in 0u64..1000) {
        let amps: Vec<Complex64> = (0..16u64).map(|i| Complex64::new(((i + seed) as f64).sin(), (i as f64).cos())).collect();
        let s = QuditState::from_amplitudes(2, amps).unwrap();
        let (bytes, sidecar) = s.encode_snapshot().unwrap();
        let back = QuditState::decode_snapshot(&bytes, &sidecar).unwrap();
        prop_assert_eq!(back.amplitudes(), s.amplitudes());
    }
}
