//! Brute-force second-quantized reference: occupation-number basis, sparse
//! Hamiltonians, exact spectra and exact time evolution.
//!
//! Modes are numbered spin-up for all sites first (row-major), then spin-down.
//! A basis state is a bitstring with mode 0 in the most significant position,
//! so numeric order equals lexicographic order of occupation strings. Creation
//! operators carry the sign (−1)^{occupied modes before the target}.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gamma_algebra::{C0, C1, CI};
use crate::lattice::{all_edges, enumerate_sites, LatticeSpec, Site};
use crate::linalg::{eigh, HermitianEigen};
use crate::model::{Model, Spin};
use crate::sparse::SparseMatrix;

/// Largest mode count accepted by the oracle.
pub const MODE_CAP: usize = 16;

/// Occupation-number basis of `n_modes` fermionic modes.
#[derive(Clone, Debug)]
pub struct FockBasis {
    pub n_sites: usize,
    pub spinful: bool,
    pub n_modes: usize,
    states: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl FockBasis {
    fn build(n_sites: usize, spinful: bool, keep: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let n_modes = if spinful { 2 * n_sites } else { n_sites };
        if n_modes > MODE_CAP {
            return Err(Error::OracleTooLarge { n_modes, cap: MODE_CAP });
        }
        let site_mask = ((1u64 << n_sites) - 1) << (n_modes - n_sites);
        let states: Vec<u64> = (0..(1u64 << n_modes))
            .filter(|&s| {
                let up = (s & site_mask).count_ones() as usize;
                let down = (s & !site_mask).count_ones() as usize;
                keep(up, down)
            })
            .collect();
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(FockBasis {
            n_sites,
            spinful,
            n_modes,
            states,
            index,
        })
    }

    /// All occupation strings.
    pub fn full(n_sites: usize, spinful: bool) -> Result<Self> {
        Self::build(n_sites, spinful, |_, _| true)
    }

    /// States with the given particle numbers; `n_down` is ignored for spinless bases.
    pub fn sector(n_sites: usize, spinful: bool, n_up: usize, n_down: usize) -> Result<Self> {
        Self::build(n_sites, spinful, |u, d| u == n_up && (!spinful || d == n_down))
    }

    /// States whose (N↑, N↓) pair is in `sectors` (N↓ = 0 for spinless).
    pub fn sectors(n_sites: usize, spinful: bool, sectors: &[(usize, usize)]) -> Result<Self> {
        Self::build(n_sites, spinful, |u, d| sectors.contains(&(u, d)))
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.index.get(&state).copied()
    }

    /// Mode index of a site and spin.
    pub fn mode(&self, site_index: usize, spin: Option<Spin>) -> usize {
        match spin {
            Some(Spin::Down) => self.n_sites + site_index,
            _ => site_index,
        }
    }

    fn bit(&self, mode: usize) -> u64 {
        1u64 << (self.n_modes - 1 - mode)
    }

    pub fn occupied(&self, state: u64, mode: usize) -> bool {
        state & self.bit(mode) != 0
    }

    /// Sign of moving an operator on `mode` past all occupied modes before it.
    fn string_sign(&self, state: u64, mode: usize) -> f64 {
        let before = state >> (self.n_modes - mode);
        if before.count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// f†_mode |state⟩.
    pub fn create(&self, state: u64, mode: usize) -> Option<(u64, f64)> {
        (!self.occupied(state, mode)).then(|| (state | self.bit(mode), self.string_sign(state, mode)))
    }

    /// f_mode |state⟩.
    pub fn annihilate(&self, state: u64, mode: usize) -> Option<(u64, f64)> {
        self.occupied(state, mode)
            .then(|| (state & !self.bit(mode), self.string_sign(state, mode)))
    }

    /// Particle numbers (N↑, N↓) of a state.
    pub fn particle_numbers(&self, state: u64) -> (usize, usize) {
        let up = (0..self.n_sites).filter(|&i| self.occupied(state, i)).count();
        let down = if self.spinful {
            (0..self.n_sites)
                .filter(|&i| self.occupied(state, self.n_sites + i))
                .count()
        } else {
            0
        };
        (up, down)
    }

    /// Matrix of f†_mode on this basis (must be closed under the operator's range for exactness).
    pub fn creation_matrix(&self, mode: usize) -> SparseMatrix {
        let triplets = self.states.iter().enumerate().filter_map(|(col, &s)| {
            let (t, sign) = self.create(s, mode)?;
            let row = self.index_of(t)?;
            Some((row, col, Complex64::new(sign, 0.0)))
        });
        SparseMatrix::from_triplets(self.dim(), self.dim(), triplets)
    }
}

/// Sparse fermionic state keyed by occupation bitstring.
pub type FockState = BTreeMap<u64, Complex64>;

/// Elementary fermionic operator used to build states and observables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FermionOp {
    Create(usize),
    Annihilate(usize),
}

/// Applies a single creation or annihilation operator to a sparse state.
pub fn apply_fermion_op(basis: &FockBasis, op: FermionOp, psi: &FockState) -> FockState {
    let mut out = FockState::new();
    for (&s, &a) in psi {
        let r = match op {
            FermionOp::Create(m) => basis.create(s, m),
            FermionOp::Annihilate(m) => basis.annihilate(s, m),
        };
        if let Some((t, sign)) = r {
            *out.entry(t).or_insert(C0) += a * sign;
        }
    }
    out.retain(|_, v| v.norm() > 0.0);
    out
}

/// Majorana γ_m = f†_m + f_m applied to a sparse state.
pub fn apply_gamma(basis: &FockBasis, mode: usize, psi: &FockState) -> FockState {
    let a = apply_fermion_op(basis, FermionOp::Create(mode), psi);
    let b = apply_fermion_op(basis, FermionOp::Annihilate(mode), psi);
    add_states(&a, &b, C1)
}

/// Majorana γ′_m = i(f†_m − f_m) applied to a sparse state.
pub fn apply_gamma_prime(basis: &FockBasis, mode: usize, psi: &FockState) -> FockState {
    let a = apply_fermion_op(basis, FermionOp::Create(mode), psi);
    let b = apply_fermion_op(basis, FermionOp::Annihilate(mode), psi);
    scale_state(&add_states(&a, &b, -C1), CI)
}

/// a + c·b.
pub fn add_states(a: &FockState, b: &FockState, c: Complex64) -> FockState {
    let mut out = a.clone();
    for (&s, &v) in b {
        *out.entry(s).or_insert(C0) += c * v;
    }
    out.retain(|_, v| v.norm() > 1e-15);
    out
}

pub fn scale_state(a: &FockState, c: Complex64) -> FockState {
    a.iter().map(|(&s, &v)| (s, v * c)).collect()
}

/// Second-quantized Hamiltonian on a Fock basis.
#[derive(Clone, Debug)]
pub struct FermionHamiltonian {
    pub basis: FockBasis,
    pub matrix: SparseMatrix,
}

/// Nearest-neighbour t-V or Fermi-Hubbard Hamiltonian on `basis`.
pub fn build_fermion_hamiltonian_on(spec: &LatticeSpec, model: &Model, basis: FockBasis) -> Result<FermionHamiltonian> {
    if basis.spinful != model.is_spinful() || basis.n_sites != spec.n_sites() {
        return Err(Error::IncompatibleModel {
            model: model.name().to_string(),
            kind: "fock basis".to_string(),
        });
    }
    let spins: Vec<Option<Spin>> = if model.is_spinful() {
        vec![Some(Spin::Up), Some(Spin::Down)]
    } else {
        vec![None]
    };
    let edges = all_edges(spec);
    let hop = -model.hopping();
    let mut triplets = Vec::new();
    for (col, &s) in basis.states().iter().enumerate() {
        for e in &edges {
            let (i, j) = (spec.index(e.from), spec.index(e.to));
            for &spin in &spins {
                let (mi, mj) = (basis.mode(i, spin), basis.mode(j, spin));
                for (a, b) in [(mi, mj), (mj, mi)] {
                    if let Some((t1, s1)) = basis.annihilate(s, b) {
                        if let Some((t2, s2)) = basis.create(t1, a) {
                            if let Some(row) = basis.index_of(t2) {
                                triplets.push((row, col, Complex64::new(hop * s1 * s2, 0.0)));
                            }
                        }
                    }
                }
            }
        }
        let diag = match *model {
            Model::TV { v, .. } => {
                edges
                    .iter()
                    .filter(|e| basis.occupied(s, spec.index(e.from)) && basis.occupied(s, spec.index(e.to)))
                    .count() as f64
                    * v
            }
            Model::FermiHubbard { u, .. } => {
                (0..spec.n_sites())
                    .filter(|&i| basis.occupied(s, i) && basis.occupied(s, spec.n_sites() + i))
                    .count() as f64
                    * u
            }
        };
        if diag != 0.0 {
            triplets.push((col, col, Complex64::new(diag, 0.0)));
        }
    }
    let matrix = SparseMatrix::from_triplets(basis.dim(), basis.dim(), triplets);
    Ok(FermionHamiltonian { basis, matrix })
}

/// Hamiltonian on the full Fock space of the lattice.
pub fn build_fermion_hamiltonian(spec: &LatticeSpec, model: &Model) -> Result<FermionHamiltonian> {
    let basis = FockBasis::full(spec.n_sites(), model.is_spinful())?;
    build_fermion_hamiltonian_on(spec, model, basis)
}

impl FermionHamiltonian {
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.matrix.to_dense()
    }

    /// Sorted eigenvalues.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        Ok(eigh(&self.to_dense())?.values)
    }

    pub fn propagator(&self) -> Result<ExactPropagator> {
        Ok(ExactPropagator {
            eig: eigh(&self.to_dense())?,
        })
    }

    /// Dense amplitude vector of a sparse state; components outside the basis are an error.
    pub fn dense_state(&self, psi: &FockState) -> Result<Vec<Complex64>> {
        let mut out = vec![C0; self.basis.dim()];
        for (&s, &a) in psi {
            match self.basis.index_of(s) {
                Some(i) => out[i] = a,
                None => {
                    return Err(Error::Validation(format!(
                        "state component {s:b} is outside the oracle basis"
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn energy(&self, psi: &[Complex64]) -> f64 {
        let h_psi = self.matrix.mul_vec(psi);
        psi.iter().zip(&h_psi).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
    }
}

/// Exact evolution by full eigendecomposition.
pub struct ExactPropagator {
    eig: HermitianEigen,
}

impl ExactPropagator {
    /// e^{−iHt}ψ0; ψ0 must be normalized to 1e-10.
    pub fn evolve(&self, psi0: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        let norm = psi0.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Unnormalized(norm));
        }
        let v = &self.eig.vectors;
        let dim = psi0.len();
        let coeffs: Vec<Complex64> = (0..dim)
            .map(|k| {
                let overlap: Complex64 = (0..dim).map(|i| v[(i, k)].conj() * psi0[i]).sum();
                overlap * Complex64::from_polar(1.0, -self.eig.values[k] * t)
            })
            .collect();
        Ok((0..dim)
            .map(|i| (0..dim).map(|k| v[(i, k)] * coeffs[k]).sum())
            .collect())
    }
}

/// ⟨n_mode⟩ of a dense state on `basis`.
pub fn occupation(basis: &FockBasis, psi: &[Complex64], mode: usize) -> f64 {
    basis
        .states()
        .iter()
        .zip(psi)
        .filter(|(&s, _)| basis.occupied(s, mode))
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Named initial states of the reference dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelCase {
    /// Spinless t-V on 3 columns × 2 rows.
    TV2x3,
    /// Fermi-Hubbard on 3 columns × 2 rows.
    FH2x3,
}

impl ModelCase {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tv_2x3" => Ok(ModelCase::TV2x3),
            "fh_2x3" => Ok(ModelCase::FH2x3),
            _ => Err(Error::UnknownCase(name.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelCase::TV2x3 => "tv_2x3",
            ModelCase::FH2x3 => "fh_2x3",
        }
    }

    pub fn spec(self) -> LatticeSpec {
        LatticeSpec::open(3, 2).expect("valid lattice")
    }

    pub fn spinful(self) -> bool {
        self == ModelCase::FH2x3
    }
}

/// Occupation string for a list of occupied (site, spin) pairs.
pub fn basis_state(basis: &FockBasis, occupied: &[(Site, Option<Spin>)], spec: &LatticeSpec) -> u64 {
    occupied.iter().fold(0u64, |acc, &(site, spin)| {
        acc | basis.bit(basis.mode(spec.index(site), spin))
    })
}

/// The literal reference superpositions with amplitude 1/√2 on each basis string.
///
/// t-V: |110;000⟩ + |101;000⟩. Fermi-Hubbard: |↑↓,↓,0;0,↑,0⟩ + |↑↓,↑↓,0;0,0,0⟩.
pub fn reference_initial_state(case: ModelCase) -> Result<(FockBasis, FockState)> {
    let spec = case.spec();
    let basis = FockBasis::full(spec.n_sites(), case.spinful())?;
    let s = |x, y| Site::new(x, y);
    let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let configs: Vec<Vec<(Site, Option<Spin>)>> = match case {
        ModelCase::TV2x3 => vec![
            vec![(s(0, 0), None), (s(1, 0), None)],
            vec![(s(0, 0), None), (s(2, 0), None)],
        ],
        ModelCase::FH2x3 => {
            let (u, d) = (Some(Spin::Up), Some(Spin::Down));
            vec![
                vec![(s(0, 0), u), (s(0, 0), d), (s(1, 0), d), (s(1, 1), u)],
                vec![(s(0, 0), u), (s(0, 0), d), (s(1, 0), u), (s(1, 0), d)],
            ]
        }
    };
    let state = configs
        .iter()
        .map(|occ| (basis_state(&basis, occ, &spec), amp))
        .collect();
    Ok((basis, state))
}

/// Sorted eigenvalues of the model restricted to the given particle-number sectors.
pub fn sector_spectrum(spec: &LatticeSpec, model: &Model, sectors: &[(usize, usize)]) -> Result<Vec<f64>> {
    let basis = FockBasis::sectors(spec.n_sites(), model.is_spinful(), sectors)?;
    build_fermion_hamiltonian_on(spec, model, basis)?.spectrum()
}

/// Site indices in enumeration order, for column labelling.
pub fn site_indices(spec: &LatticeSpec) -> Vec<usize> {
    enumerate_sites(spec).iter().map(|&s| spec.index(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_hopping_spectrum() {
        let spec = LatticeSpec::open(2, 1).unwrap();
        let h = build_fermion_hamiltonian(&spec, &Model::TV { t: 1.0, v: 0.0 }).unwrap();
        let e = h.spectrum().unwrap();
        let expected = [-1.0, 0.0, 0.0, 1.0];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn hubbard_single_site() {
        let spec = LatticeSpec::open(1, 1).unwrap();
        let h = build_fermion_hamiltonian(&spec, &Model::FermiHubbard { j: 1.0, u: 2.0 }).unwrap();
        let basis = &h.basis;
        let doubly = basis.index_of(0b11).unwrap();
        assert_eq!(h.matrix.get(doubly, doubly), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn canonical_anticommutation() {
        let basis = FockBasis::full(2, true).unwrap();
        let dim = basis.dim();
        let id = SparseMatrix::identity(dim);
        for i in 0..4 {
            let ci = basis.creation_matrix(i);
            let ai = ci.adjoint();
            for j in 0..4 {
                let cj = basis.creation_matrix(j);
                let aj = cj.adjoint();
                let anti = ai.mul(&cj).add(&cj.mul(&ai));
                let expected = if i == j {
                    id.clone()
                } else {
                    SparseMatrix::zeros(dim, dim)
                };
                assert!(anti.sub(&expected).max_abs() == 0.0);
                assert!(ai.mul(&aj).add(&aj.mul(&ai)).max_abs() == 0.0);
            }
        }
    }

    #[test]
    fn number_conserved_and_hermitian() {
        let spec = LatticeSpec::open(2, 2).unwrap();
        let h = build_fermion_hamiltonian(&spec, &Model::FermiHubbard { j: 1.0, u: 0.5 }).unwrap();
        assert!(h.matrix.is_hermitian(0.0));
        for (r, c, _) in h.matrix.triplets() {
            let (a, b) = (h.basis.states()[r], h.basis.states()[c]);
            assert_eq!(h.basis.particle_numbers(a), h.basis.particle_numbers(b));
        }
    }

    #[test]
    fn reference_states_are_normalized() {
        for case in [ModelCase::TV2x3, ModelCase::FH2x3] {
            let (basis, psi) = reference_initial_state(case).unwrap();
            assert_eq!(psi.len(), 2);
            let norm: f64 = psi.values().map(|a| a.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-15);
            if case == ModelCase::FH2x3 {
                assert!(psi.keys().all(|&s| s.count_ones() == 4));
                assert_eq!(basis.n_modes, 12);
            }
        }
        assert!(ModelCase::parse("tv_3x3").is_err());
        let (basis, psi) = reference_initial_state(ModelCase::TV2x3).unwrap();
        let strings: Vec<String> = psi.keys().map(|s| format!("{:0w$b}", s, w = basis.n_modes)).collect();
        assert_eq!(strings, vec!["101000", "110000"]);
    }

    #[test]
    fn evolution_preserves_norm_and_energy() {
        let spec = LatticeSpec::open(3, 2).unwrap();
        let model = Model::TV { t: 1.0, v: 0.5 };
        let basis = FockBasis::sector(6, false, 2, 0).unwrap();
        let h = build_fermion_hamiltonian_on(&spec, &model, basis).unwrap();
        let (_, psi) = reference_initial_state(ModelCase::TV2x3).unwrap();
        let psi0 = h.dense_state(&psi).unwrap();
        let prop = h.propagator().unwrap();
        let e0 = h.energy(&psi0);
        let same = prop.evolve(&psi0, 0.0).unwrap();
        assert!(same.iter().zip(&psi0).all(|(a, b)| (a - b).norm() < 1e-12));
        for t in [0.5, 3.0, 10.0] {
            let psi_t = prop.evolve(&psi0, t).unwrap();
            let norm: f64 = psi_t.iter().map(|a| a.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!((h.energy(&psi_t) - e0).abs() < 1e-10);
            let total: f64 = (0..6).map(|m| occupation(&h.basis, &psi_t, m)).sum();
            assert!((total - 2.0).abs() < 1e-10);
        }
        let unnormalized = vec![Complex64::new(2.0, 0.0); h.basis.dim()];
        assert!(prop.evolve(&unnormalized, 1.0).is_err());
    }

    #[test]
    fn majorana_identities_on_basis_states() {
        let basis = FockBasis::full(3, false).unwrap();
        for &s in basis.states() {
            let psi: FockState = [(s, C1)].into_iter().collect();
            for m in 0..3 {
                // n = (1 + iγγ′)/2 and P = −iγγ′ = 1 − 2n
                let ggp = apply_gamma(&basis, m, &apply_gamma_prime(&basis, m, &psi));
                let parity = scale_state(&ggp, -CI);
                let expected = if basis.occupied(s, m) { -1.0 } else { 1.0 };
                assert!((parity[&s] - Complex64::new(expected, 0.0)).norm() < 1e-15);
                let n = add_states(&psi, &scale_state(&ggp, CI), C1);
                let n_val = n.get(&s).copied().unwrap_or(C0) * 0.5;
                let expected_n = if basis.occupied(s, m) { 1.0 } else { 0.0 };
                assert!((n_val - Complex64::new(expected_n, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn oracle_size_cap() {
        assert!(matches!(FockBasis::full(9, true), Err(Error::OracleTooLarge { .. })));
    }
}
