use ququart::constraint_toric::{
    audit_toric, build_vvc, cnot_conjugate, printed_r_dagger, site_identity_residual, vacuum_prepare, wen_plaquette,
    GateAssignment, ToricGate,
};
use ququart::lattice::{plaquettes, LatticeSpec};
use ququart::linalg::max_abs_diff;
use ququart::mappings::{build_hamiltonian, MappingKind};
use ququart::model::Model;
use ququart::statevector::DEFAULT_BUDGET;

#[test]
fn every_plaquette_of_three_by_two_reaches_wen_form() {
    let spec = LatticeSpec::open(3, 2).unwrap();
    let mm = build_hamiltonian(MappingKind::SpinlessLocal, spec, Model::TV { t: 1.0, v: 0.5 }).unwrap();
    let ps = plaquettes(&spec);
    assert_eq!(ps.len(), 2);
    for (g, p) in mm.constraints.iter().zip(&ps) {
        let w = cnot_conjugate(&mm, g).unwrap();
        assert_eq!(w, wen_plaquette(p));
        assert_eq!(w.weight(), 6);
        assert_eq!(w.sign(), Some(1));
    }
    assert!(site_identity_residual() < 1e-12);
}

#[test]
fn circuit_audit_on_three_by_two_uses_the_state_route() {
    let spec = LatticeSpec::open(3, 2).unwrap();
    let mm = build_hamiltonian(MappingKind::SpinlessLocal, spec, Model::TV { t: 1.0, v: 0.5 }).unwrap();
    let circuit = build_vvc(&spec, GateAssignment::default_for(&spec)).unwrap();
    let report = audit_toric(&mm, &circuit).unwrap();
    assert!(report.passed(), "{report:?}");
    assert!(report.spectra_match.is_none());
}

#[test]
fn custom_assignment_is_audited() {
    let spec = LatticeSpec::open(2, 2).unwrap();
    let mm = build_hamiltonian(MappingKind::SpinlessLocal, spec, Model::TV { t: 1.0, v: 0.5 }).unwrap();
    let text = "# swap-axis CZ ladder\nV2 H 0,0:1\nV3 S 1,0:1\nV4 R 0,1:2\nV5 Rdg 1,1:2\nV6 CZ 0,0:2 0,1:1\nV6 CZ 1,0:2 1,1:1\n";
    let circuit = build_vvc(&spec, GateAssignment::parse(text).unwrap()).unwrap();
    assert_eq!(circuit.two_qudit_gates(), 2);
    let report = audit_toric(&mm, &circuit).unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn printed_r_dagger_is_minus_r() {
    assert!(max_abs_diff(&printed_r_dagger(), &-ToricGate::R.matrix()) < 1e-15);
}

#[test]
fn spin_split_vacuum_is_certified() {
    let spec = LatticeSpec::open(2, 2).unwrap();
    let mm = build_hamiltonian(MappingKind::SpinSplit, spec, Model::FermiHubbard { j: 1.0, u: 0.5 }).unwrap();
    let (state, cert) = vacuum_prepare(&mm, DEFAULT_BUDGET).unwrap();
    assert!(cert.passed(1e-10), "{cert:?}");
    assert_eq!(cert.constraints.len(), 2);
    assert!(cert.energy.abs() < 1e-12);
    assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
    let json: serde_json::Value = serde_json::from_str(&cert.to_json().unwrap()).unwrap();
    assert_eq!(json["mapping"], "spin_split");
}
