//! Constrained subspaces of mapped models, restricted spectra and the
//! calibration of constraint-sector signs against the fermionic oracle.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermion_oracle::sector_spectrum;
use crate::gamma_algebra::{MonomialAction, C0};
use crate::lattice::{enumerate_sites, LatticeSpec};
use crate::linalg::eigvalsh;
use crate::mappings::{build_unsigned, Constraint, ConstraintCategory, MappedModel, MappingKind};
use crate::model::{Model, Spin};

/// Sparse vector keyed by computational-basis index.
pub type SparseVec = HashMap<usize, Complex64>;

/// Largest qudit count for which sectors are enumerated exhaustively.
pub const SECTOR_QUDIT_CAP: usize = 12;

/// Orthonormal basis of a constrained particle-number sector: one vector P|b⟩
/// per orbit of the constraint group.
#[derive(Clone, Debug)]
pub struct ConstrainedSector {
    pub n_qudits: usize,
    pub vectors: Vec<Vec<(usize, Complex64)>>,
}

impl ConstrainedSector {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }
}

/// Computational-basis states with `n_up` (and `n_down`) vertex operators equal to −1.
pub fn sector_states(mm: &MappedModel, n_up: usize, n_down: usize) -> Result<Vec<usize>> {
    let n = mm.n_qudits();
    if n > SECTOR_QUDIT_CAP {
        return Err(Error::DenseCapExceeded {
            n_qudits: n,
            cap: SECTOR_QUDIT_CAP,
        });
    }
    let mapping = mm.mapping();
    let mut vertex = Vec::new();
    for (spin, target) in mm.spins().into_iter().zip([n_up, n_down]) {
        let ops = enumerate_sites(&mm.spec)
            .into_iter()
            .map(|s| MonomialAction::new(&mapping.vertex_operator(s, spin)?, n))
            .collect::<Result<Vec<_>>>()?;
        vertex.push((ops, target));
    }
    Ok((0..1usize << (2 * n))
        .filter(|&b| {
            vertex
                .iter()
                .all(|(ops, target)| ops.iter().filter(|a| a.apply(b).1.re < 0.0).count() == *target)
        })
        .collect())
}

/// Applies (I + sG)/2 for every constraint to a sparse vector.
pub fn project(v: &SparseVec, actions: &[(MonomialAction, f64)]) -> SparseVec {
    let mut cur = v.clone();
    for (g, s) in actions {
        let mut next = SparseVec::with_capacity(2 * cur.len());
        for (&b, &a) in &cur {
            *next.entry(b).or_insert(C0) += a * 0.5;
            let (t, amp) = g.apply(b);
            *next.entry(t).or_insert(C0) += a * amp * (0.5 * s);
        }
        next.retain(|_, a| a.norm() > 1e-14);
        cur = next;
    }
    cur
}

/// Constrained sector spanned by P|b⟩ for the given basis states and constraints.
pub fn constrained_sector(n_qudits: usize, states: &[usize], constraints: &[Constraint]) -> Result<ConstrainedSector> {
    let actions = constraints
        .iter()
        .map(|g| Ok((MonomialAction::new(&g.op, n_qudits)?, g.sign as f64)))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = std::collections::HashSet::new();
    let mut vectors = Vec::new();
    for &b in states {
        if seen.contains(&b) {
            continue;
        }
        let v = project(&SparseVec::from([(b, Complex64::new(1.0, 0.0))]), &actions);
        seen.extend(v.keys().copied());
        seen.insert(b);
        let norm = v.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let mut comps: Vec<(usize, Complex64)> = v.into_iter().map(|(k, a)| (k, a / norm)).collect();
        comps.sort_by_key(|&(k, _)| k);
        vectors.push(comps);
    }
    Ok(ConstrainedSector { n_qudits, vectors })
}

/// Matrix of the Hamiltonian in the orthonormal sector basis.
pub fn restricted_hamiltonian(mm: &MappedModel, sector: &ConstrainedSector) -> Result<DMatrix<Complex64>> {
    let actions = mm
        .hamiltonian
        .terms
        .iter()
        .map(|t| MonomialAction::new(t, mm.n_qudits()))
        .collect::<Result<Vec<_>>>()?;
    let mut owner: HashMap<usize, (usize, Complex64)> = HashMap::new();
    for (o, v) in sector.vectors.iter().enumerate() {
        for &(k, a) in v {
            owner.insert(k, (o, a));
        }
    }
    let d = sector.dim();
    let mut h = DMatrix::from_element(d, d, C0);
    for (o, v) in sector.vectors.iter().enumerate() {
        let mut hv = SparseVec::new();
        for &(k, a) in v {
            for act in &actions {
                let (t, amp) = act.apply(k);
                *hv.entry(t).or_insert(C0) += amp * a;
            }
        }
        for (t, val) in hv {
            if let Some(&(o2, a2)) = owner.get(&t) {
                h[(o2, o)] += a2.conj() * val;
            }
        }
    }
    Ok(h)
}

/// Sorted spectrum of `mm` in the particle sector (n_up, n_down) with all constraints imposed.
pub fn restricted_spectrum(mm: &MappedModel, n_up: usize, n_down: usize) -> Result<Vec<f64>> {
    let states = sector_states(mm, n_up, n_down)?;
    let sector = constrained_sector(mm.n_qudits(), &states, &mm.constraints)?;
    eigvalsh(&restricted_hamiltonian(mm, &sector)?)
}

/// Checks that `mapped` equals `oracle` with every level repeated the same number
/// of times; returns that multiplicity.
pub fn spectra_match(mapped: &[f64], oracle: &[f64], tol: f64) -> Result<usize> {
    if oracle.is_empty() || mapped.is_empty() || !mapped.len().is_multiple_of(oracle.len()) {
        return Err(Error::SpectraMismatch(format!(
            "dimension {} is not a multiple of {}",
            mapped.len(),
            oracle.len()
        )));
    }
    let m = mapped.len() / oracle.len();
    let mut repeated: Vec<f64> = oracle.iter().flat_map(|&e| std::iter::repeat_n(e, m)).collect();
    repeated.sort_by(f64::total_cmp);
    let mut sorted = mapped.to_vec();
    sorted.sort_by(f64::total_cmp);
    let dev = sorted
        .iter()
        .zip(&repeated)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if dev > tol {
        return Err(Error::SpectraMismatch(format!(
            "max deviation {dev:.3e} exceeds {tol:.1e}"
        )));
    }
    Ok(m)
}

/// Physical-sector sign per constraint category and spin.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignTable {
    pub entries: BTreeMap<String, i8>,
}

fn key(category: ConstraintCategory, spin: Option<Spin>) -> String {
    let cat = match category {
        ConstraintCategory::Plaquette => "plaquette",
        ConstraintCategory::PolyakovHorizontal => "polyakov_horizontal",
        ConstraintCategory::PolyakovVertical => "polyakov_vertical",
    };
    match spin {
        None => cat.to_string(),
        Some(s) => format!("{cat}_{}", s.label()),
    }
}

impl SignTable {
    /// Sign for a category; +1 if it was never calibrated.
    pub fn sign(&self, category: ConstraintCategory, spin: Option<Spin>) -> i8 {
        self.entries.get(&key(category, spin)).copied().unwrap_or(1)
    }

    pub fn set(&mut self, category: ConstraintCategory, spin: Option<Spin>, sign: i8) {
        self.entries.insert(key(category, spin), sign);
    }
}

fn calibration_lattices(periodic: bool) -> Vec<LatticeSpec> {
    [(2, 2), (3, 2)]
        .into_iter()
        .map(|(lx, ly)| {
            if periodic {
                LatticeSpec::periodic(lx, ly).expect("valid lattice")
            } else {
                LatticeSpec::open(lx, ly).expect("valid lattice")
            }
        })
        .collect()
}

/// Finds, for each spin, the unique assignment of category signs under which
/// the constrained spectrum reproduces the oracle, using one particle on open
/// lattices and two on tori.
///
/// The other spin is kept empty and its constraints are not imposed. If more
/// than one assignment matches, the next larger lattice is tried.
pub fn calibrate(kind: MappingKind, periodic: bool) -> Result<SignTable> {
    let model = if kind.is_spinful() {
        Model::FermiHubbard { j: 1.0, u: 0.0 }
    } else {
        Model::TV { t: 1.0, v: 0.0 }
    };
    let mut table = SignTable::default();
    if kind == MappingKind::GeneralizedJw {
        return Ok(table);
    }
    for spin in crate::model::spin_species(kind.is_spinful()) {
        let mut resolved = false;
        for spec in calibration_lattices(periodic) {
            let mm = build_unsigned(kind, spec, model)?;
            if mm.n_qudits() > SECTOR_QUDIT_CAP {
                break;
            }
            let own: Vec<Constraint> = mm.constraints.iter().filter(|g| g.spin == spin).cloned().collect();
            let mut categories: Vec<ConstraintCategory> = own.iter().map(|g| g.category).collect();
            categories.sort();
            categories.dedup();
            // on a torus the product of all loop constraints equals the total
            // parity, so only the even sector reproduces periodic fermions
            let n = if periodic { 2 } else { 1 };
            let (n_up, n_down) = if spin == Some(Spin::Down) { (0, n) } else { (n, 0) };
            let oracle = sector_spectrum(&spec, &model, &[(n_up, n_down)])?;
            let states = sector_states(&mm, n_up, n_down)?;
            let mut matches = Vec::new();
            for combo in 0..1u32 << categories.len() {
                let signs: Vec<i8> = (0..categories.len())
                    .map(|i| if combo >> i & 1 == 1 { -1 } else { 1 })
                    .collect();
                let signed: Vec<Constraint> = own
                    .iter()
                    .map(|g| {
                        let i = categories.iter().position(|&c| c == g.category).unwrap();
                        Constraint {
                            sign: signs[i],
                            ..g.clone()
                        }
                    })
                    .collect();
                let sector = constrained_sector(mm.n_qudits(), &states, &signed)?;
                if sector.dim() == 0 {
                    continue;
                }
                let spectrum = eigvalsh(&restricted_hamiltonian(&mm, &sector)?)?;
                if spectra_match(&spectrum, &oracle, 1e-9).is_ok() {
                    matches.push(signs);
                }
            }
            if matches.len() == 1 {
                for (c, s) in categories.iter().zip(&matches[0]) {
                    table.set(*c, spin, *s);
                }
                resolved = true;
                break;
            }
            if matches.is_empty() {
                return Err(Error::Calibration(format!(
                    "no sign assignment of {kind} reproduces the oracle on {}x{}",
                    spec.lx, spec.ly
                )));
            }
        }
        if !resolved {
            return Err(Error::Calibration(format!(
                "sign assignment of {kind} is not unique on any calibration lattice"
            )));
        }
    }
    Ok(table)
}

/// Calibrated sign table, computed once per mapping and boundary condition.
pub fn calibrated_signs(kind: MappingKind, periodic: bool) -> Result<SignTable> {
    static CACHE: OnceLock<Mutex<HashMap<(MappingKind, bool), SignTable>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("sign cache poisoned").get(&(kind, periodic)) {
        return Ok(t.clone());
    }
    let table = calibrate(kind, periodic)?;
    cache
        .lock()
        .expect("sign cache poisoned")
        .insert((kind, periodic), table.clone());
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mappings::build_hamiltonian;

    #[test]
    fn spectra_match_detects_multiplicity() {
        assert_eq!(spectra_match(&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0], 1e-12).unwrap(), 2);
        assert!(spectra_match(&[1.0, 0.0, 1.0], &[0.0, 1.0], 1e-12).is_err());
        assert!(spectra_match(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0], 1e-12).is_err());
        assert!(spectra_match(&[], &[0.0, 1.0], 1e-12).is_err());
    }

    #[test]
    fn open_spinless_sign_is_calibrated() {
        let table = calibrated_signs(MappingKind::SpinlessLocal, false).unwrap();
        assert!(table.entries.contains_key("plaquette"));
    }

    #[test]
    fn spinless_two_particle_spectrum_matches_oracle() {
        let spec = LatticeSpec::open(2, 2).unwrap();
        let model = Model::TV { t: 1.0, v: 0.7 };
        let mm = build_hamiltonian(MappingKind::SpinlessLocal, spec, model).unwrap();
        let mapped = restricted_spectrum(&mm, 2, 0).unwrap();
        let oracle = sector_spectrum(&spec, &model, &[(2, 0)]).unwrap();
        assert_eq!(spectra_match(&mapped, &oracle, 1e-9).unwrap(), 8);
    }

    #[test]
    fn sector_vectors_are_orthonormal() {
        let spec = LatticeSpec::open(2, 2).unwrap();
        let mm = build_hamiltonian(MappingKind::SpinlessLocal, spec, Model::TV { t: 1.0, v: 0.0 }).unwrap();
        let states = sector_states(&mm, 1, 0).unwrap();
        let sector = constrained_sector(mm.n_qudits(), &states, &mm.constraints).unwrap();
        assert_eq!(sector.dim(), 32);
        for v in &sector.vectors {
            let n: f64 = v.iter().map(|(_, a)| a.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let h = restricted_hamiltonian(&mm, &sector).unwrap();
        assert!(crate::linalg::hermiticity_defect(&h) < 1e-12);
    }

    #[test]
    fn spinful_spectra_match_oracle_in_every_mapping() {
        let spec = LatticeSpec::open(2, 2).unwrap();
        let model = Model::FermiHubbard { j: 1.0, u: 1.3 };
        let oracle = sector_spectrum(&spec, &model, &[(1, 1)]).unwrap();
        for kind in [MappingKind::SpinSplit, MappingKind::AuxiliaryParity] {
            let mm = build_hamiltonian(kind, spec, model).unwrap();
            let mapped = restricted_spectrum(&mm, 1, 1).unwrap();
            spectra_match(&mapped, &oracle, 1e-9).unwrap();
        }
    }

    #[test]
    fn periodic_spinless_spectrum_matches_oracle() {
        let spec = LatticeSpec::periodic(2, 2).unwrap();
        let model = Model::TV { t: 1.0, v: 0.4 };
        let mm = build_hamiltonian(MappingKind::SpinlessLocal, spec, model).unwrap();
        let table = calibrated_signs(MappingKind::SpinlessLocal, true).unwrap();
        assert_eq!(table.entries.len(), 3);
        for n in [0, 2, 4] {
            let mapped = restricted_spectrum(&mm, n, 0).unwrap();
            let oracle = sector_spectrum(&spec, &model, &[(n, 0)]).unwrap();
            spectra_match(&mapped, &oracle, 1e-9).unwrap();
        }
        // the loop constraints fix the global parity to even
        assert!(restricted_spectrum(&mm, 1, 0).unwrap().is_empty());
    }
}
