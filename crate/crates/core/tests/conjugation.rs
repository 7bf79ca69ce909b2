mod common;

use common::{max_abs_diff, printed_relations, random_hermitian, read_matrix_fixture};
use ququart::decomposition::{solve_conjugation, unitary_conj_residual};
use ququart::linalg::unitarity_defect;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn printed_matrices_are_unitary_and_satisfy_their_relations() {
    for (name, a, d) in printed_relations() {
        let m = read_matrix_fixture(name);
        assert!(unitarity_defect(&m) < 1e-12, "{name}");
        // A = M† D M
        let r = max_abs_diff(&(m.adjoint() * &d * &m), &a);
        assert!(r < 1e-9, "{name}: residual {r:e}");
    }
}

#[test]
fn solver_reproduces_each_relation_for_random_b() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (name, a, d) in printed_relations() {
        let sol = solve_conjugation(&a, &d).unwrap();
        assert!(sol.residual() < 1e-10, "{name}");
        assert!(sol.unitarity_defect() < 1e-12, "{name}");
        for _ in 0..10 {
            let b = random_hermitian(&mut rng, 4);
            let r = unitary_conj_residual(&sol.u, &a, &d, &b).unwrap();
            assert!(r < 1e-10, "{name}: {r:e}");
        }
    }
}

#[test]
fn mismatched_spectra_are_rejected() {
    let (_, a, _) = &printed_relations()[0];
    let (_, _, d_single) = &printed_relations()[2];
    assert!(solve_conjugation(a, d_single).is_err());
}

#[test]
fn fixture_parser_rejects_unknown_tokens() {
    assert!(common::parse_matrix("1 0\n0 q\n").is_err());
    assert!(common::parse_matrix("1 0\n0\n").is_err());
}
