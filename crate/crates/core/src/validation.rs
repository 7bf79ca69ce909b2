//! Verification suites for a mapping: the (anti)commutation rule table of edge,
//! vertex and hopping operators, antisymmetry, cross-spin commutation and the
//! loop-constraint algebra. Every relation is checked symbolically and on the
//! explicit matrices.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_algebra::{commutator, to_sparse, MonomialAction, OperatorSum, QuditMonomial, SiteFactor, C1, CI};
use crate::lattice::{all_edges, enumerate_sites, Edge, LatticeSpec};
use crate::mappings::{build_hamiltonian, Mapping, MappingKind};
use crate::model::{spin_species, Model, Spin};
use crate::sparse::SparseMatrix;

/// Tolerance of the matrix route.
pub const NUMERIC_TOL: f64 = 1e-12;
/// Largest register for which constraint relations are also checked on sparse matrices.
pub const CONSTRAINT_MATRIX_QUDITS: usize = 8;

/// A deliberately corrupted edge operator, used to show that the suites detect faults.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Fault {
    /// Negates A on the forward direction of canonical edge `edge` only.
    FlipEdgeSign { edge: usize },
    /// Multiplies the factor on the last qudit of A by Γ1 on canonical edge `edge`.
    WrongFactor { edge: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Majorana {
    site: usize,
    spin: Option<Spin>,
    primed: bool,
}

/// An operator of the rule table with its Majorana content.
#[derive(Clone, Debug)]
pub struct Generator {
    pub label: String,
    pub spin: Option<Spin>,
    pub op: QuditMonomial,
    majoranas: BTreeSet<Majorana>,
}

impl Generator {
    /// +1 if the fermionic images commute, −1 if they anticommute.
    pub fn expected_sign(&self, other: &Generator) -> i8 {
        if self.majoranas.intersection(&other.majoranas).count().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub checked: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl SuiteResult {
    fn new(name: &str) -> Self {
        SuiteResult {
            name: name.to_string(),
            ..Default::default()
        }
    }

    fn record(&mut self, ok: bool, relation: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(relation());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mapping: String,
    pub lattice: String,
    pub fault: Option<Fault>,
    pub suites: Vec<SuiteResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn checked(&self) -> usize {
        self.suites.iter().map(|s| s.checked).sum()
    }

    pub fn first_failure(&self) -> Option<String> {
        self.suites
            .iter()
            .find_map(|s| s.first_failure.as_ref().map(|f| format!("{}: {f}", s.name)))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("mapping {} on {}\n", self.mapping, self.lattice);
        for s in &self.suites {
            out.push_str(&format!(
                "{:<24} {:>6} checked  {:>4} failed  {}\n",
                s.name,
                s.checked,
                s.failures,
                if s.passed() { "PASS" } else { "FAIL" }
            ));
        }
        out.push_str(if self.passed() { "PASS\n" } else { "FAIL\n" });
        if let Some(f) = self.first_failure() {
            out.push_str(&format!("first failure: {f}\n"));
        }
        out
    }
}

fn canonical_index(spec: &LatticeSpec, e: &Edge) -> Option<usize> {
    let c = e.canonical();
    all_edges(spec).iter().position(|x| *x == c)
}

fn edge_op(mapping: &Mapping, e: &Edge, spin: Option<Spin>, fault: Option<Fault>) -> Result<QuditMonomial> {
    let op = mapping.edge_operator(e, spin)?;
    let idx = canonical_index(&mapping.spec, e);
    Ok(match fault {
        Some(Fault::FlipEdgeSign { edge }) if Some(edge) == idx && !e.reversed => op.scaled(-C1),
        Some(Fault::WrongFactor { edge }) if Some(edge) == idx => {
            let (&q, &f) = op.factors.iter().next_back().expect("edge operators are non-trivial");
            let (sign, g) = f.mul_signed(SiteFactor::G1);
            let mut op = op;
            op.factors.insert(q, g);
            op.scaled(Complex64::new(sign as f64, 0.0))
        }
        _ => op,
    })
}

fn check_fault(spec: &LatticeSpec, fault: Option<Fault>) -> Result<()> {
    let n = all_edges(spec).len();
    match fault {
        Some(Fault::FlipEdgeSign { edge }) | Some(Fault::WrongFactor { edge }) if edge >= n => {
            Err(Error::Config(format!("fault edge {edge} out of range for {n} edges")))
        }
        _ => Ok(()),
    }
}

/// Edge operators in both directions, vertex operators and hopping operators in
/// both directions, for every spin species.
pub fn generators(mapping: &Mapping, fault: Option<Fault>) -> Result<Vec<Generator>> {
    check_fault(&mapping.spec, fault)?;
    let spec = &mapping.spec;
    let mut out = Vec::new();
    let sites = enumerate_sites(spec);
    for spin in spin_species(mapping.kind.is_spinful()) {
        let tag = spin.map(|s| format!("_{}", s.label())).unwrap_or_default();
        let maj = |site: usize, primed: bool| Majorana { site, spin, primed };
        for e in all_edges(spec) {
            for dir in [e, e.reversed()] {
                let (i, j) = (spec.index(dir.from), spec.index(dir.to));
                out.push(Generator {
                    label: format!("A{tag}[{}->{}]", dir.from, dir.to),
                    spin,
                    op: edge_op(mapping, &dir, spin, fault)?,
                    majoranas: [maj(i, false), maj(j, false)].into(),
                });
            }
        }
        for &s in &sites {
            let i = spec.index(s);
            out.push(Generator {
                label: format!("B{tag}[{s}]"),
                spin,
                op: mapping.vertex_operator(s, spin)?,
                majoranas: [maj(i, false), maj(i, true)].into(),
            });
        }
        for e in all_edges(spec) {
            for dir in [e, e.reversed()] {
                let (i, j) = (spec.index(dir.from), spec.index(dir.to));
                let a = edge_op(mapping, &dir, spin, fault)?;
                let b = mapping.vertex_operator(dir.to, spin)?;
                out.push(Generator {
                    label: format!("S{tag}[{}->{}]", dir.from, dir.to),
                    spin,
                    op: a.product(&b).scaled(-CI),
                    majoranas: [maj(i, false), maj(j, true)].into(),
                });
            }
        }
    }
    Ok(out)
}

/// Max entry of L − sign·R, where L and R are products of `ops` (indices listed
/// left to right) evaluated as matrices on the joint support of `ops`.
fn chain_residual(ops: &[&QuditMonomial], left: &[usize], right: &[usize], sign: i8) -> Result<f64> {
    let joint: Vec<usize> = ops
        .iter()
        .flat_map(|m| m.support())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = joint.len().max(1);
    let actions = ops
        .iter()
        .map(|m| {
            let mut c = QuditMonomial::scalar(m.coeff);
            for (q, f) in &m.factors {
                let pos = joint.binary_search(q).expect("joint support covers every operator");
                c.factors.insert(pos, *f);
            }
            MonomialAction::new(&c, n)
        })
        .collect::<Result<Vec<_>>>()?;
    let apply = |word: &[usize], col: usize| {
        word.iter().rev().fold((col, C1), |(row, amp), &i| {
            let (r, a) = actions[i].apply(row);
            (r, amp * a)
        })
    };
    let s = Complex64::new(sign as f64, 0.0);
    let mut worst: f64 = 0.0;
    for col in 0..1usize << (2 * n) {
        let (rl, a) = apply(left, col);
        let (rr, b) = apply(right, col);
        let b = b * s;
        let d = if rl == rr {
            (a - b).norm()
        } else {
            a.norm().max(b.norm())
        };
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Max entry of g·h − sign·h·g, computed on the matrices of g and h restricted
/// to their joint support (both act as identity elsewhere).
pub fn relation_residual(g: &QuditMonomial, h: &QuditMonomial, sign: i8) -> Result<f64> {
    chain_residual(&[g, h], &[0, 1], &[1, 0], sign)
}

/// Max entry of g − g† plus the max entry of g² − I.
pub fn hermitian_involution_residual(g: &QuditMonomial) -> Result<f64> {
    let adj = g.adjoint();
    Ok(chain_residual(&[g, &adj], &[0], &[1], 1)? + chain_residual(&[g], &[0, 0], &[], 1)?)
}

fn rule_suites(gens: &[Generator]) -> Result<(SuiteResult, SuiteResult)> {
    let mut rules = SuiteResult::new("rule_table");
    let mut cross = SuiteResult::new("cross_spin");
    for (i, g) in gens.iter().enumerate() {
        for h in &gens[i + 1..] {
            let expected = g.expected_sign(h);
            let symbolic = g.op.commutation_sign(&h.op);
            let numeric = relation_residual(&g.op, &h.op, expected)?;
            let ok = symbolic == expected && numeric <= NUMERIC_TOL;
            let describe = || {
                let rel = if expected == 1 { "commutator" } else { "anticommutator" };
                format!("{rel} of {} and {} (residual {numeric:.3e})", g.label, h.label)
            };
            if g.spin != h.spin {
                cross.record(ok, describe);
            } else {
                rules.record(ok, describe);
            }
        }
    }
    Ok((rules, cross))
}

fn generator_suites(mapping: &Mapping, gens: &[Generator], fault: Option<Fault>) -> Result<(SuiteResult, SuiteResult)> {
    let mut anti = SuiteResult::new("antisymmetry");
    for spin in spin_species(mapping.kind.is_spinful()) {
        for e in all_edges(&mapping.spec) {
            let fwd = edge_op(mapping, &e, spin, fault)?;
            let back = edge_op(mapping, &e.reversed(), spin, fault)?;
            let symbolic = back == fwd.clone().scaled(-C1);
            let numeric = chain_residual(&[&fwd, &back], &[0], &[1], -1)? <= NUMERIC_TOL;
            anti.record(symbolic && numeric, || {
                format!("A[{}->{}] = −A[{}->{}]", e.to, e.from, e.from, e.to)
            });
        }
    }
    let mut herm = SuiteResult::new("hermitian_involutory");
    for g in gens {
        let ok = g.op.adjoint() == g.op
            && g.op.product(&g.op) == QuditMonomial::identity()
            && hermitian_involution_residual(&g.op)? <= NUMERIC_TOL;
        herm.record(ok, || format!("{} Hermitian with square I", g.label));
    }
    Ok((anti, herm))
}

fn default_model(kind: MappingKind) -> Model {
    if kind.is_spinful() {
        Model::FermiHubbard { j: 1.0, u: 0.5 }
    } else {
        Model::TV { t: 1.0, v: 0.5 }
    }
}

fn sparse_max(m: &SparseMatrix) -> f64 {
    m.max_abs()
}

/// Hermiticity, involution, mutual commutation and commutation with H of every loop constraint.
pub fn constraint_suite(kind: MappingKind, spec: LatticeSpec, model: Model) -> Result<SuiteResult> {
    let mm = build_hamiltonian(kind, spec, model)?;
    let mut suite = SuiteResult::new("constraints");
    let n = mm.n_qudits();
    let numeric = n <= CONSTRAINT_MATRIX_QUDITS;
    let h_sparse = if numeric {
        Some(to_sparse(&mm.hamiltonian, n)?)
    } else {
        None
    };
    let g_sparse: Vec<Option<SparseMatrix>> = mm
        .constraints
        .iter()
        .map(|g| numeric.then(|| to_sparse(&g.op.clone().into(), n)).transpose())
        .collect::<Result<_>>()?;
    let id = numeric.then(|| SparseMatrix::identity(1 << (2 * n)));
    for (i, g) in mm.constraints.iter().enumerate() {
        let mut ok = g.op.adjoint() == g.op && g.op.product(&g.op) == QuditMonomial::identity();
        if let (Some(gs), Some(id)) = (&g_sparse[i], &id) {
            ok &= gs.is_hermitian(1e-10) && sparse_max(&gs.mul(gs).sub(id)) <= 1e-10;
        }
        suite.record(ok, || format!("{} Hermitian with square I", g.label));
        let gop: OperatorSum = g.op.clone().into();
        let mut ok = commutator(&gop, &mm.hamiltonian).is_zero();
        if let (Some(gs), Some(hs)) = (&g_sparse[i], &h_sparse) {
            ok &= sparse_max(&gs.mul(hs).sub(&hs.mul(gs))) <= 1e-10;
        }
        suite.record(ok, || format!("[{}, H] = 0", g.label));
        for (j, other) in mm.constraints.iter().enumerate().skip(i + 1) {
            let mut ok = g.op.commutation_sign(&other.op) == 1;
            if let (Some(a), Some(b)) = (&g_sparse[i], &g_sparse[j]) {
                ok &= sparse_max(&a.mul(b).sub(&b.mul(a))) <= 1e-10;
            }
            suite.record(ok, || format!("[{}, {}] = 0", g.label, other.label));
        }
    }
    Ok(suite)
}

/// Runs every suite for one mapping on one lattice.
pub fn validate_mapping(kind: MappingKind, spec: LatticeSpec, fault: Option<Fault>) -> Result<ValidationReport> {
    let mapping = Mapping::new(kind, spec)?;
    let gens = generators(&mapping, fault)?;
    let (rules, cross) = rule_suites(&gens)?;
    let (anti, herm) = generator_suites(&mapping, &gens, fault)?;
    let mut suites = vec![rules, anti, herm];
    if kind.is_spinful() {
        suites.push(cross);
    }
    suites.push(constraint_suite(kind, spec, default_model(kind))?);
    Ok(ValidationReport {
        mapping: kind.name().to_string(),
        lattice: format!("{}x{} {:?}", spec.lx, spec.ly, spec.boundary).to_lowercase(),
        fault,
        suites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spinless_two_by_two_passes() {
        let r = validate_mapping(MappingKind::SpinlessLocal, LatticeSpec::open(2, 2).unwrap(), None).unwrap();
        assert!(r.passed(), "{}", r.to_text());
        // 20 generators → 190 pairs
        assert_eq!(r.suites[0].checked, 190);
    }

    #[test]
    fn flipped_edge_sign_is_caught() {
        let spec = LatticeSpec::open(2, 2).unwrap();
        let r = validate_mapping(MappingKind::SpinlessLocal, spec, Some(Fault::FlipEdgeSign { edge: 0 })).unwrap();
        assert!(!r.passed());
        assert!(r.first_failure().unwrap().starts_with("antisymmetry"));
    }

    #[test]
    fn wrong_factor_is_caught_as_anticommutator() {
        let spec = LatticeSpec::open(2, 2).unwrap();
        let r = validate_mapping(MappingKind::SpinlessLocal, spec, Some(Fault::WrongFactor { edge: 0 })).unwrap();
        assert!(!r.passed());
        let f = r.first_failure().unwrap();
        assert!(f.starts_with("rule_table: anticommutator"), "{f}");
    }

    #[test]
    fn residual_detects_anticommutation() {
        let a = QuditMonomial::new(C1, &[(0, SiteFactor::G1), (3, SiteFactor::G2)]);
        let b = QuditMonomial::single(3, SiteFactor::TILDE);
        assert!(relation_residual(&a, &b, -1).unwrap() < 1e-15);
        assert!((relation_residual(&a, &b, 1).unwrap() - 2.0).abs() < 1e-15);
        assert!(hermitian_involution_residual(&a).unwrap() < 1e-15);
        assert!(hermitian_involution_residual(&a.clone().scaled(CI)).unwrap() > 1.0);
    }

    #[test]
    fn fault_out_of_range_is_rejected() {
        let spec = LatticeSpec::open(2, 2).unwrap();
        assert!(validate_mapping(MappingKind::SpinlessLocal, spec, Some(Fault::FlipEdgeSign { edge: 4 })).is_err());
    }
}
