use ququart::decomposition::jwt_hopping_weight;
use ququart::fermion_oracle::{build_fermion_hamiltonian, ModelCase};
use ququart::lattice::{LatticeSpec, Site};
use ququart::mappings::{build_hamiltonian, MappingKind};
use ququart::model::{Model, Spin};
use ququart::recipe::{Recipe, RecipeStep};
use ququart::sector::{restricted_spectrum, spectra_match};
use ququart::statevector::DEFAULT_BUDGET;
use ququart::trotter::{evolve_and_record, exact_occupations, RunOptions, TrotterPlan};

#[test]
fn spinless_spectrum_embeds_sector_by_sector() {
    let spec = LatticeSpec::open(2, 2).unwrap();
    let model = Model::TV { t: 1.0, v: 0.5 };
    let mm = build_hamiltonian(MappingKind::SpinlessLocal, spec, model).unwrap();
    let mut mapped: Vec<f64> = (0..=4).flat_map(|n| restricted_spectrum(&mm, n, 0).unwrap()).collect();
    mapped.sort_by(f64::total_cmp);
    let oracle = build_fermion_hamiltonian(&spec, &model).unwrap().spectrum().unwrap();
    assert_eq!(oracle.len(), 16);
    // four ququarts carry eight qubits: four modes, one constraint, three free gauge qubits
    assert_eq!(spectra_match(&mapped, &oracle, 1e-9).unwrap(), 8);
}

#[test]
fn prepared_states_start_on_the_oracle() {
    for (case, kind) in [
        (ModelCase::TV2x3, MappingKind::SpinlessLocal),
        (ModelCase::FH2x3, MappingKind::AuxiliaryParity),
    ] {
        let model = if case.spinful() {
            Model::FermiHubbard { j: 1.0, u: 0.5 }
        } else {
            Model::TV { t: 1.0, v: 0.5 }
        };
        let mm = build_hamiltonian(kind, case.spec(), model).unwrap();
        let recipe = Recipe::preset(case);
        let plan = TrotterPlan::new(&mm, 0.05, 0).unwrap();
        let rec = evolve_and_record(&mm, &recipe, &plan, DEFAULT_BUDGET, RunOptions::default()).unwrap();
        assert_eq!(rec.times, vec![0.0]);
        assert!(rec.delta_n[0] < 1e-9, "{case:?}: {}", rec.delta_n[0]);
    }
}

#[test]
fn trotter_error_is_second_order_on_two_by_two() {
    let spec = LatticeSpec::open(2, 2).unwrap();
    let mm = build_hamiltonian(MappingKind::SpinlessLocal, spec, Model::TV { t: 1.0, v: 0.5 }).unwrap();
    let recipe = Recipe {
        steps: vec![
            RecipeStep::PairCreate {
                a: Site::new(0, 0),
                b: Site::new(0, 1),
                spin: None,
            },
            RecipeStep::HopSuperposition {
                from: Site::new(0, 0),
                to: Site::new(1, 0),
                spin: None,
            },
        ],
    };
    let run = |tau: f64, steps: usize| {
        let plan = TrotterPlan::new(&mm, tau, steps).unwrap();
        evolve_and_record(&mm, &recipe, &plan, DEFAULT_BUDGET, RunOptions::default())
            .unwrap()
            .max_delta_n()
    };
    let coarse = run(0.1, 20);
    let fine = run(0.05, 40);
    let ratio = fine / coarse;
    assert!(coarse > 1e-8, "{coarse}");
    assert!((0.2..=0.33).contains(&ratio), "ratio {ratio}");
}

#[test]
fn exact_occupations_conserve_particles() {
    let case = ModelCase::FH2x3;
    let mm = build_hamiltonian(
        MappingKind::AuxiliaryParity,
        case.spec(),
        Model::FermiHubbard { j: 1.0, u: 0.5 },
    )
    .unwrap();
    let occ = exact_occupations(&mm, &Recipe::preset(case), &[0.0, 0.7, 2.5]).unwrap();
    for row in occ {
        let total: f64 = row.iter().sum();
        assert!((total - 4.0).abs() < 1e-10, "{total}");
    }
}

#[test]
fn jwt_hopping_weights() {
    // one-dimensional chain: strings cancel
    for l in 2..=5 {
        let spec = LatticeSpec::open(l, 1).unwrap();
        for i in 0..l - 1 {
            assert_eq!(jwt_hopping_weight(spec, i, i + 1, Spin::Up).unwrap(), 2);
        }
    }
    // vertical hop in two dimensions grows linearly with the row length
    let w: Vec<usize> = (2..=4)
        .map(|lx| {
            let spec = LatticeSpec::open(lx, 2).unwrap();
            let from = spec.index(Site::new(0, 0));
            let to = spec.index(Site::new(0, 1));
            jwt_hopping_weight(spec, from, to, Spin::Down).unwrap()
        })
        .collect();
    assert_eq!(w[1] - w[0], w[2] - w[1]);
    assert!(w[1] > w[0]);
}
