//! Qubit-pair view of the spinless plaquette constraints.
//!
//! Each ququart splits into two qubits: slot 1 is the leading tensor factor
//! and slot 2 the trailing one, so Γ̃ = σz⊗σz, Γ1 = σx⊗I and Γ3 = σz⊗σx.
//! Conjugating every ququart by CNOT_12 turns a plaquette constraint into a
//! Wen-plaquette word on slot 1 times a σz pair on slot 2. A further Clifford
//! circuit V^VC, whose per-site placement is configuration data, is checked
//! only through the invariants it must preserve.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_algebra::{commutator, monomial_to_dense, OperatorSum, QuditMonomial, SiteFactor, C0, C1, CI};
use crate::lattice::{enumerate_sites, plaquettes, LatticeSpec, Plaquette, Site};
use crate::linalg::{eigvalsh, kron, max_abs_diff, unitarity_defect};
use crate::mappings::{Constraint, MappedModel, MappingKind};
use crate::model::Spin;
use crate::statevector::QuditState;

/// Largest register on which the circuit checks build full matrices.
pub const TORIC_DENSE_QUDITS: usize = 6;

/// Ququarts whose full 4^n matrices are small enough to diagonalize.
pub const TORIC_SPECTRUM_QUDITS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Matrix2<Complex64> {
        let (o, l, i) = (C0, C1, CI);
        match self {
            Pauli::I => Matrix2::new(l, o, o, l),
            Pauli::X => Matrix2::new(o, l, l, o),
            Pauli::Y => Matrix2::new(o, -i, i, o),
            Pauli::Z => Matrix2::new(l, o, o, -l),
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn from_letter(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// One qubit of the pair view: slot 1 or 2 of the ququart at `site`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QubitRef {
    pub site: Site,
    pub slot: u8,
}

impl QubitRef {
    pub fn new(site: Site, slot: u8) -> Result<Self> {
        if slot != 1 && slot != 2 {
            return Err(Error::InvalidSupport(format!("qubit slot {slot} is not 1 or 2")));
        }
        Ok(QubitRef { site, slot })
    }
}

impl fmt::Display for QubitRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}:{}", self.site.x, self.site.y, self.slot)
    }
}

/// Phase i^k times a Pauli word over (site, slot) qubits.
///
/// Text form: an optional sign (`+`, `-`, `+i`, `-i`) followed by
/// space-separated `<P><slot>@<x>,<y>` tokens, e.g. `-Y1@0,0 X1@1,0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizerOperator {
    phase: u8,
    paulis: BTreeMap<QubitRef, Pauli>,
}

/// Product P·Q = i^k R of single-qubit Paulis.
fn pauli_mul(p: Pauli, q: Pauli) -> (u8, Pauli) {
    use Pauli::*;
    match (p, q) {
        (I, q) => (0, q),
        (p, I) => (0, p),
        (X, X) | (Y, Y) | (Z, Z) => (0, I),
        (X, Y) => (1, Z),
        (Y, Z) => (1, X),
        (Z, X) => (1, Y),
        (Y, X) => (3, Z),
        (Z, Y) => (3, X),
        (X, Z) => (3, Y),
    }
}

fn i_power(k: u8) -> Complex64 {
    [C1, CI, -C1, -CI][(k % 4) as usize]
}

fn phase_of(c: Complex64) -> Option<u8> {
    (0..4u8).find(|&k| (c - i_power(k)).norm() < 1e-9)
}

impl StabilizerOperator {
    pub fn identity() -> Self {
        StabilizerOperator {
            phase: 0,
            paulis: BTreeMap::new(),
        }
    }

    /// Word with phase i^`phase`; identity letters are dropped.
    pub fn new(phase: u8, letters: &[(QubitRef, Pauli)]) -> Self {
        let mut w = Self::identity();
        w.phase = phase % 4;
        for &(q, p) in letters {
            w = w.product(&Self::single(q, p));
        }
        w
    }

    pub fn single(q: QubitRef, p: Pauli) -> Self {
        let mut paulis = BTreeMap::new();
        if p != Pauli::I {
            paulis.insert(q, p);
        }
        StabilizerOperator { phase: 0, paulis }
    }

    pub fn phase(&self) -> Complex64 {
        i_power(self.phase)
    }

    /// ±1 when the word is Hermitian.
    pub fn sign(&self) -> Option<i8> {
        match self.phase {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.sign().is_some()
    }

    pub fn paulis(&self) -> &BTreeMap<QubitRef, Pauli> {
        &self.paulis
    }

    pub fn get(&self, q: QubitRef) -> Pauli {
        self.paulis.get(&q).copied().unwrap_or(Pauli::I)
    }

    pub fn weight(&self) -> usize {
        self.paulis.len()
    }

    pub fn product(&self, other: &StabilizerOperator) -> StabilizerOperator {
        let mut out = self.clone();
        out.phase = (out.phase + other.phase) % 4;
        for (&q, &p) in &other.paulis {
            let (k, r) = pauli_mul(out.get(q), p);
            out.phase = (out.phase + k) % 4;
            if r == Pauli::I {
                out.paulis.remove(&q);
            } else {
                out.paulis.insert(q, r);
            }
        }
        out
    }

    pub fn scaled_by_phase(mut self, k: u8) -> Self {
        self.phase = (self.phase + k) % 4;
        self
    }

    /// Restriction to the qubits in one slot, with phase 0.
    pub fn slot_part(&self, slot: u8) -> StabilizerOperator {
        StabilizerOperator {
            phase: 0,
            paulis: self
                .paulis
                .iter()
                .filter(|(q, _)| q.slot == slot)
                .map(|(&q, &p)| (q, p))
                .collect(),
        }
    }

    /// True when the words commute, false when they anticommute.
    pub fn commutes_with(&self, other: &StabilizerOperator) -> bool {
        let clashes = self
            .paulis
            .iter()
            .filter(|(q, p)| {
                let o = other.get(**q);
                o != Pauli::I && o != **p
            })
            .count();
        clashes % 2 == 0
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("stabilizer word `{text}`: {msg}"));
        let mut tokens = text.split_whitespace().peekable();
        let mut phase = 0u8;
        if let Some(&t) = tokens.peek() {
            let p = match t {
                "+" | "+1" => Some(0),
                "-" | "-1" => Some(2),
                "+i" | "i" => Some(1),
                "-i" => Some(3),
                _ => None,
            };
            if let Some(p) = p {
                phase = p;
                tokens.next();
            }
        }
        let mut w = Self::identity().scaled_by_phase(phase);
        for t in tokens {
            let mut chars = t.chars();
            let letter = chars
                .next()
                .and_then(Pauli::from_letter)
                .ok_or_else(|| bad("expected Pauli letter"))?;
            let rest = chars.as_str();
            let (slot, site) = rest.split_once('@').ok_or_else(|| bad("expected `@`"))?;
            let slot: u8 = slot.parse().map_err(|_| bad("bad slot"))?;
            let (x, y) = site.split_once(',').ok_or_else(|| bad("expected `x,y`"))?;
            let x: usize = x.parse().map_err(|_| bad("bad x"))?;
            let y: usize = y.parse().map_err(|_| bad("bad y"))?;
            let q = QubitRef::new(Site::new(x, y), slot)?;
            w = w.product(&Self::single(q, letter));
        }
        Ok(w)
    }

    /// Full 4^n matrix on the ququarts of `spec`, built from 2×2 Paulis.
    pub fn to_dense(&self, spec: &LatticeSpec) -> Result<DMatrix<Complex64>> {
        let n = spec.n_sites();
        if n > TORIC_DENSE_QUDITS {
            return Err(Error::DenseCapExceeded {
                n_qudits: n,
                cap: TORIC_DENSE_QUDITS,
            });
        }
        let mut m = DMatrix::from_element(1, 1, self.phase());
        for site in enumerate_sites(spec) {
            for slot in [1, 2] {
                let p = self.get(QubitRef { site, slot }).matrix();
                m = kron(&m, &DMatrix::from_fn(2, 2, |r, c| p[(r, c)]));
            }
        }
        Ok(m)
    }
}

impl fmt::Display for StabilizerOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["+", "+i", "-", "-i"][self.phase as usize])?;
        for (q, p) in &self.paulis {
            write!(f, " {}{}@{},{}", p.letter(), q.slot, q.site.x, q.site.y)?;
        }
        Ok(())
    }
}

/// Translation between single-layer ququart monomials and qubit-pair words.
#[derive(Clone, Debug)]
pub struct QubitPairView {
    spec: LatticeSpec,
    /// Γ basis element k = i^phase (σ_a ⊗ σ_b).
    split: [(u8, Pauli, Pauli); 16],
}

impl QubitPairView {
    pub fn new(spec: LatticeSpec) -> Self {
        let mut split = [(0u8, Pauli::I, Pauli::I); 16];
        for f in SiteFactor::all() {
            let m = f.matrix();
            let (a, b, k) = Pauli::ALL
                .iter()
                .flat_map(|&a| Pauli::ALL.iter().map(move |&b| (a, b)))
                .find_map(|(a, b)| {
                    let pm = pair_matrix(a, b);
                    let c = (pm.adjoint() * m).trace() / 4.0;
                    phase_of(c).filter(|_| (m - pm * c).norm() < 1e-12).map(|k| (a, b, k))
                })
                .expect("every Γ basis element is a phased Pauli pair");
            split[f.mask() as usize] = (k, a, b);
        }
        QubitPairView { spec, split }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    /// Phase and Pauli pair with F = i^k (σ_a ⊗ σ_b).
    pub fn split_factor(&self, f: SiteFactor) -> (u8, Pauli, Pauli) {
        self.split[f.mask() as usize]
    }

    /// Inverse of `split_factor`: σ_a ⊗ σ_b = i^k F.
    pub fn join(&self, a: Pauli, b: Pauli) -> (u8, SiteFactor) {
        let mask = self
            .split
            .iter()
            .position(|&(_, pa, pb)| pa == a && pb == b)
            .expect("16 Pauli pairs");
        let (k, _, _) = self.split[mask];
        ((4 - k) % 4, SiteFactor::from_mask(mask as u8).expect("mask below 16"))
    }

    pub fn from_monomial(&self, m: &QuditMonomial) -> Result<StabilizerOperator> {
        let phase = phase_of(m.coeff)
            .ok_or_else(|| Error::Unsupported(format!("coefficient {} is not a power of i", m.coeff)))?;
        let mut w = StabilizerOperator::identity().scaled_by_phase(phase);
        for (&q, &f) in &m.factors {
            if q >= self.spec.n_sites() {
                return Err(Error::QuditOutOfRange {
                    qudit: q,
                    n_qudits: self.spec.n_sites(),
                });
            }
            let site = self.spec.site(q);
            let (k, a, b) = self.split_factor(f);
            w = w
                .product(&StabilizerOperator::single(QubitRef { site, slot: 1 }, a))
                .product(&StabilizerOperator::single(QubitRef { site, slot: 2 }, b))
                .scaled_by_phase(k);
        }
        Ok(w)
    }

    pub fn to_monomial(&self, w: &StabilizerOperator) -> Result<QuditMonomial> {
        let mut m = QuditMonomial::scalar(w.phase());
        for site in enumerate_sites(&self.spec) {
            let a = w.get(QubitRef { site, slot: 1 });
            let b = w.get(QubitRef { site, slot: 2 });
            if a == Pauli::I && b == Pauli::I {
                continue;
            }
            let (k, f) = self.join(a, b);
            m = m.with(self.spec.index(site), f).scaled(i_power(k));
        }
        for q in w.paulis.keys() {
            if !self.spec.contains(q.site) {
                return Err(Error::EdgeNotOnLattice(format!("qubit {q} is off the lattice")));
            }
        }
        Ok(m)
    }

    /// Dense matrix of a qubit gate on the ququarts hosting `qubits`, in sorted qudit order.
    fn placed_matrix(
        &self,
        gate: &DMatrix<Complex64>,
        qubits: &[QubitRef],
    ) -> Result<(Vec<usize>, DMatrix<Complex64>)> {
        let mut sites: Vec<Site> = qubits.iter().map(|q| q.site).collect();
        sites.sort();
        sites.dedup();
        for s in &sites {
            if !self.spec.contains(*s) {
                return Err(Error::EdgeNotOnLattice(format!("site {s} is off the lattice")));
            }
        }
        // qubit order of the register: (site0,1),(site0,2),(site1,1),…
        let position = |q: &QubitRef| 2 * sites.iter().position(|s| *s == q.site).unwrap() + (q.slot as usize - 1);
        let targets: Vec<usize> = qubits.iter().map(position).collect();
        let n = 2 * sites.len();
        let matrix = embed_qubits(gate, &targets, n);
        Ok((sites.iter().map(|s| self.spec.index(*s)).collect(), matrix))
    }
}

fn pair_matrix(a: Pauli, b: Pauli) -> Matrix4<Complex64> {
    a.matrix().kronecker(&b.matrix())
}

/// Lifts a gate on qubits `targets` (in gate order) into an n-qubit register, qubit 0 most significant.
fn embed_qubits(gate: &DMatrix<Complex64>, targets: &[usize], n: usize) -> DMatrix<Complex64> {
    let k = targets.len();
    let dim = 1usize << n;
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
    let mut out = DMatrix::from_element(dim, dim, C0);
    for col in 0..dim {
        let sub_col = targets.iter().fold(0, |acc, &q| (acc << 1) | bit(col, q));
        for sub_row in 0..(1 << k) {
            let g = gate[(sub_row, sub_col)];
            if g == C0 {
                continue;
            }
            let mut row = col;
            for (j, &q) in targets.iter().enumerate() {
                let b = (sub_row >> (k - 1 - j)) & 1;
                let mask = 1 << (n - 1 - q);
                row = if b == 1 { row | mask } else { row & !mask };
            }
            out[(row, col)] += g;
        }
    }
    out
}

/// CNOT with control on slot 1 and target on slot 2 of one ququart.
pub fn cnot12() -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(4, 4, C0);
    for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m[(r, c)] = C1;
    }
    m
}

/// `(σa, σb)` on slot 1 and 2, mapped to `sign · σc⊗σd` under CNOT_12.
pub type SiteIdentity = ((Pauli, Pauli), (i8, Pauli, Pauli));

/// The four single-ququart identities U P U† = Q with U = CNOT_12.
pub fn cnot_site_identities() -> [SiteIdentity; 4] {
    use Pauli::*;
    [
        ((Y, X), (1, Y, I)),
        ((X, X), (1, X, I)),
        ((X, Y), (1, Y, Z)),
        ((Y, Y), (-1, X, Z)),
    ]
}

/// Conjugates a word by a Clifford gate acting on `qubits`, via its local matrix.
fn conjugate_local(
    w: &StabilizerOperator,
    gate: &DMatrix<Complex64>,
    qubits: &[QubitRef],
) -> Result<StabilizerOperator> {
    let k = qubits.len();
    let mut local = DMatrix::from_element(1, 1, C1);
    for q in qubits {
        let p = w.get(*q).matrix();
        local = kron(&local, &DMatrix::from_fn(2, 2, |r, c| p[(r, c)]));
    }
    let conj = gate * local * gate.adjoint();
    // Decompose the result into a phased Pauli string on the same qubits.
    let mut strings: Vec<(Vec<Pauli>, DMatrix<Complex64>)> = vec![(vec![], DMatrix::from_element(1, 1, C1))];
    for _ in 0..k {
        strings = strings
            .into_iter()
            .flat_map(|(ps, m)| {
                Pauli::ALL.iter().map(move |&p| {
                    let pm = p.matrix();
                    let mut next = ps.clone();
                    next.push(p);
                    (next, kron(&m, &DMatrix::from_fn(2, 2, |r, c| pm[(r, c)])))
                })
            })
            .collect();
    }
    let dim = (1usize << k) as f64;
    for (ps, pm) in strings {
        let c = (pm.adjoint() * &conj).trace() / dim;
        if let Some(phase) = phase_of(c) {
            if (&conj - pm * c).norm() > 1e-9 {
                break;
            }
            let mut out = w.clone();
            for q in qubits {
                out.paulis.remove(q);
            }
            out = out.scaled_by_phase(phase);
            for (q, p) in qubits.iter().zip(ps) {
                out = out.product(&StabilizerOperator::single(*q, p));
            }
            return Ok(out);
        }
    }
    Err(Error::Unsupported("gate is not a Clifford on this word".into()))
}

/// Conjugates a word by CNOT_12 on every ququart of the lattice.
pub fn cnot_conjugate_word(spec: &LatticeSpec, w: &StabilizerOperator) -> Result<StabilizerOperator> {
    let u = cnot12();
    let mut out = w.clone();
    for site in enumerate_sites(spec) {
        out = conjugate_local(&out, &u, &[QubitRef { site, slot: 1 }, QubitRef { site, slot: 2 }])?;
    }
    Ok(out)
}

/// Image of a spinless plaquette constraint under CNOT_12 on every ququart.
pub fn cnot_conjugate(mm: &MappedModel, g: &Constraint) -> Result<StabilizerOperator> {
    if mm.kind != MappingKind::SpinlessLocal {
        return Err(Error::Unsupported(format!(
            "qubit-pair conjugation needs the spinless_local mapping, got {}",
            mm.kind.name()
        )));
    }
    let view = QubitPairView::new(mm.spec);
    cnot_conjugate_word(&mm.spec, &view.from_monomial(&g.op)?)
}

/// σ^{y,1}_r σ^{x,1}_{r+x} σ^{y,1}_{r+x+y} σ^{x,1}_{r+y} σ^{z,2}_{r+x+y} σ^{z,2}_{r+y}.
pub fn wen_plaquette(p: &Plaquette) -> StabilizerOperator {
    let [r, rx, rxy, ry] = p.sites;
    let q = |site, slot| QubitRef { site, slot };
    StabilizerOperator::new(
        0,
        &[
            (q(r, 1), Pauli::Y),
            (q(rx, 1), Pauli::X),
            (q(rxy, 1), Pauli::Y),
            (q(ry, 1), Pauli::X),
            (q(rxy, 2), Pauli::Z),
            (q(ry, 2), Pauli::Z),
        ],
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToricGate {
    H,
    S,
    R,
    /// Adjoint of R.
    RDagger,
    Cz,
}

impl ToricGate {
    pub const ALL: [ToricGate; 5] = [
        ToricGate::H,
        ToricGate::S,
        ToricGate::R,
        ToricGate::RDagger,
        ToricGate::Cz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToricGate::H => "H",
            ToricGate::S => "S",
            ToricGate::R => "R",
            ToricGate::RDagger => "Rdg",
            ToricGate::Cz => "CZ",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        ToricGate::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown gate `{s}`")))
    }

    pub fn arity(self) -> usize {
        if self == ToricGate::Cz {
            2
        } else {
            1
        }
    }

    pub fn matrix(self) -> DMatrix<Complex64> {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let hi = CI * h;
        match self {
            ToricGate::H => DMatrix::from_row_slice(2, 2, &[h, h, h, -h]),
            ToricGate::S => DMatrix::from_row_slice(2, 2, &[C1, C0, C0, CI]),
            ToricGate::R => DMatrix::from_row_slice(2, 2, &[h, hi, hi, h]),
            ToricGate::RDagger => ToricGate::R.matrix().adjoint(),
            ToricGate::Cz => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C1, C1, C1, -C1])),
        }
    }
}

/// The gate set {H, S, R, R†, CZ} with R† the true adjoint.
pub fn toric_gate_set() -> Vec<(ToricGate, DMatrix<Complex64>)> {
    ToricGate::ALL.into_iter().map(|g| (g, g.matrix())).collect()
}

/// R† as it is commonly printed, −(1/√2)[[1, i], [i, 1]]; this equals −R, not R's adjoint.
pub fn printed_r_dagger() -> DMatrix<Complex64> {
    -ToricGate::R.matrix()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedGate {
    pub gate: ToricGate,
    pub qubits: Vec<QubitRef>,
}

/// Per-site placement of the V2..V6 layers.
///
/// Text form, one gate per line: `<layer> <gate> <x>,<y>:<slot> [<x>,<y>:<slot>]`,
/// with `#` comments. Layers are V2..V6; gates H, S, R, Rdg, CZ.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GateAssignment {
    /// Layers V2..V6 in order.
    pub layers: [Vec<PlacedGate>; 5],
}

pub const VVC_LAYERS: [&str; 5] = ["V2", "V3", "V4", "V5", "V6"];

fn parse_qubit(tok: &str) -> Result<QubitRef> {
    let bad = || Error::Config(format!("bad qubit `{tok}`, expected x,y:slot"));
    let (site, slot) = tok.split_once(':').ok_or_else(bad)?;
    let (x, y) = site.split_once(',').ok_or_else(bad)?;
    let site = Site::new(
        x.trim().parse().map_err(|_| bad())?,
        y.trim().parse().map_err(|_| bad())?,
    );
    QubitRef::new(site, slot.trim().parse().map_err(|_| bad())?).map_err(|_| bad())
}

impl GateAssignment {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = GateAssignment::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("gate assignment line {}: {msg}", n + 1));
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 3 {
                return Err(at("expected `<layer> <gate> <qubit>...`".into()));
            }
            let layer = VVC_LAYERS
                .iter()
                .position(|l| l.eq_ignore_ascii_case(toks[0]))
                .ok_or_else(|| at(format!("unknown layer `{}`", toks[0])))?;
            let gate = ToricGate::from_name(toks[1]).map_err(|e| at(e.to_string()))?;
            let qubits = toks[2..]
                .iter()
                .map(|t| parse_qubit(t))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| at(e.to_string()))?;
            if qubits.len() != gate.arity() {
                return Err(at(format!("{} takes {} qubit(s)", gate.name(), gate.arity())));
            }
            if qubits.len() == 2 && qubits[0] == qubits[1] {
                return Err(at("CZ needs two distinct qubits".into()));
            }
            if qubits.len() == 2 && qubits[0].site != qubits[1].site && layer != 4 {
                return Err(at("gates across two ququarts belong to V6".into()));
            }
            out.layers[layer].push(PlacedGate { gate, qubits });
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, layer) in VVC_LAYERS.iter().zip(&self.layers) {
            for g in layer {
                let qs: Vec<String> = g.qubits.iter().map(|q| q.to_string()).collect();
                s.push_str(&format!("{name} {} {}\n", g.gate.name(), qs.join(" ")));
            }
        }
        s
    }

    /// Placeholder placement exercising every gate kind, with the CZ layer
    /// along the vertical axis (horizontal and vertical swapped).
    pub fn default_for(spec: &LatticeSpec) -> Self {
        let mut out = GateAssignment::default();
        let q = |site, slot| QubitRef { site, slot };
        for site in enumerate_sites(spec) {
            let parity = (site.x + site.y) % 2;
            let gate = |g: ToricGate, slot| PlacedGate {
                gate: g,
                qubits: vec![q(site, slot)],
            };
            out.layers[0].push(gate(ToricGate::H, 1 + parity as u8));
            if site.x % 2 == 1 {
                out.layers[1].push(gate(ToricGate::S, 1));
            }
            out.layers[2].push(gate(ToricGate::R, 2));
            if parity == 0 {
                out.layers[3].push(gate(ToricGate::RDagger, 1));
            }
            if let Some(e) = spec.edge_from(site, crate::lattice::Orientation::Vertical) {
                if !e.wraps {
                    out.layers[4].push(PlacedGate {
                        gate: ToricGate::Cz,
                        qubits: vec![q(site, 2), q(e.to, 1)],
                    });
                }
            }
        }
        out
    }
}

/// V^VC = V6·V5·V4·V3·V2 on a fixed lattice.
#[derive(Clone, Debug)]
pub struct VvcCircuit {
    view: QubitPairView,
    assignment: GateAssignment,
}

/// Ququart gates of a circuit in application order.
type LoweredGate = (Vec<usize>, DMatrix<Complex64>);

impl VvcCircuit {
    pub fn gates(&self) -> impl Iterator<Item = &PlacedGate> {
        self.assignment.layers.iter().flatten()
    }

    pub fn assignment(&self) -> &GateAssignment {
        &self.assignment
    }

    pub fn n_gates(&self) -> usize {
        self.gates().count()
    }

    pub fn two_qudit_gates(&self) -> usize {
        self.gates()
            .filter(|g| g.qubits.len() == 2 && g.qubits[0].site != g.qubits[1].site)
            .count()
    }

    fn lowered(&self) -> Result<Vec<LoweredGate>> {
        self.gates()
            .map(|g| self.view.placed_matrix(&g.gate.matrix(), &g.qubits))
            .collect()
    }

    /// V w V†, gate by gate.
    pub fn conjugate(&self, w: &StabilizerOperator) -> Result<StabilizerOperator> {
        let mut out = w.clone();
        for g in self.gates() {
            out = conjugate_local(&out, &g.gate.matrix(), &g.qubits)?;
        }
        Ok(out)
    }

    /// ψ ← V ψ.
    pub fn apply(&self, state: &mut QuditState) -> Result<()> {
        for (support, m) in self.lowered()? {
            state.apply_local(&support, &m)?;
        }
        Ok(())
    }

    /// ψ ← V† ψ.
    pub fn apply_adjoint(&self, state: &mut QuditState) -> Result<()> {
        for (support, m) in self.lowered()?.into_iter().rev() {
            state.apply_local(&support, &m.adjoint())?;
        }
        Ok(())
    }

    /// Full matrix of V^VC.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        let n = self.view.spec.n_sites();
        if n > TORIC_SPECTRUM_QUDITS {
            return Err(Error::DenseCapExceeded {
                n_qudits: n,
                cap: TORIC_SPECTRUM_QUDITS,
            });
        }
        let dim = 1usize << (2 * n);
        let mut v = DMatrix::<Complex64>::identity(dim, dim);
        for (support, m) in self.lowered()? {
            let full: Vec<usize> = (0..n).collect();
            v = crate::linalg::embed(&m, &support, &full)? * v;
        }
        Ok(v)
    }
}

/// Builds V^VC for `spec` from a placement; every qubit must lie on the lattice.
pub fn build_vvc(spec: &LatticeSpec, assignment: GateAssignment) -> Result<VvcCircuit> {
    if spec.n_sites() > TORIC_DENSE_QUDITS {
        return Err(Error::DenseCapExceeded {
            n_qudits: spec.n_sites(),
            cap: TORIC_DENSE_QUDITS,
        });
    }
    for g in assignment.layers.iter().flatten() {
        for q in &g.qubits {
            if !spec.contains(q.site) {
                return Err(Error::EdgeNotOnLattice(format!("gate {} on {q}", g.gate.name())));
            }
        }
    }
    Ok(VvcCircuit {
        view: QubitPairView::new(*spec),
        assignment,
    })
}

/// Structural audit of the constraints after CNOT_12 and V^VC.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToricReport {
    pub lattice: String,
    pub n_gates: usize,
    pub two_qudit_gates: usize,
    /// Plaquette words after CNOT_12, then after V^VC.
    pub wen_words: Vec<String>,
    pub conjugated_words: Vec<String>,
    pub wen_form_matches: bool,
    pub hermitian: bool,
    pub commuting: bool,
    pub commute_with_hamiltonian: bool,
    /// Largest |V G V† ψ − G_eb ψ| over the probe states.
    pub state_residual: f64,
    pub unitarity_defect: Option<f64>,
    pub spectra_match: Option<bool>,
}

impl ToricReport {
    pub fn passed(&self) -> bool {
        self.wen_form_matches
            && self.hermitian
            && self.commuting
            && self.commute_with_hamiltonian
            && self.state_residual < 1e-10
            && self.unitarity_defect.is_none_or(|d| d < 1e-12)
            && self.spectra_match.unwrap_or(true)
    }
}

/// Deterministic probe state with all amplitudes nonzero.
fn probe_state(n_qudits: usize, seed: u64) -> Result<QuditState> {
    let dim = 1usize << (2 * n_qudits);
    let amps = (0..dim)
        .map(|i| {
            let t = (i as f64 + 1.0) * (0.618_033_988_75 + seed as f64 * 0.1);
            Complex64::new(t.sin(), (1.7 * t).cos())
        })
        .collect();
    let mut s = QuditState::from_amplitudes(n_qudits, amps)?;
    s.normalize()?;
    Ok(s)
}

/// Checks CNOT_12 then V^VC on every plaquette constraint of a spinless model.
pub fn audit_toric(mm: &MappedModel, circuit: &VvcCircuit) -> Result<ToricReport> {
    if mm.kind != MappingKind::SpinlessLocal {
        return Err(Error::Unsupported(format!(
            "toric audit needs the spinless_local mapping, got {}",
            mm.kind.name()
        )));
    }
    if circuit.view.spec != mm.spec {
        return Err(Error::InvalidLattice("circuit and model lattices differ".into()));
    }
    let view = &circuit.view;
    let plaqs = plaquettes(&mm.spec);
    let mut wen = Vec::new();
    let mut conj = Vec::new();
    let mut originals = Vec::new();
    let mut wen_form_matches = true;
    let plaquette_constraints = mm
        .constraints
        .iter()
        .filter(|g| g.category == crate::mappings::ConstraintCategory::Plaquette);
    // constraints are built in plaquette enumeration order
    for (g, p) in plaquette_constraints.zip(&plaqs) {
        let w = cnot_conjugate(mm, g)?;
        wen_form_matches &= w == wen_plaquette(p);
        conj.push(circuit.conjugate(&w)?);
        wen.push(w);
        originals.push(g.op.clone());
    }
    let hermitian = conj.iter().all(|w| w.is_hermitian());
    let commuting = conj
        .iter()
        .enumerate()
        .all(|(i, a)| conj[i + 1..].iter().all(|b| a.commutes_with(b)));

    // The Hamiltonian follows the same two conjugations term by term.
    let mut h_terms = Vec::new();
    for t in &mm.hamiltonian.terms {
        let unit = QuditMonomial {
            coeff: C1,
            factors: t.factors.clone(),
        };
        let w = circuit.conjugate(&cnot_conjugate_word(&mm.spec, &view.from_monomial(&unit)?)?)?;
        h_terms.push(view.to_monomial(&w)?.scaled(t.coeff));
    }
    let h_eb = OperatorSum::from_terms(h_terms);
    let mut commute_with_hamiltonian = true;
    let mut g_eb = Vec::new();
    for w in &conj {
        let g: OperatorSum = view.to_monomial(w)?.into();
        commute_with_hamiltonian &= commutator(&g, &h_eb).canonical().is_zero();
        g_eb.push(g);
    }

    // Numeric route: CNOT layer and V applied to states through the gate kernel.
    let n = mm.n_qudits();
    let cnots: Vec<usize> = (0..n).collect();
    let mut state_residual: f64 = 0.0;
    for (seed, (g, geb)) in originals.iter().zip(&g_eb).enumerate() {
        let psi = probe_state(n, seed as u64)?;
        // V C G C† V† ψ
        let mut lhs = psi.clone();
        circuit.apply_adjoint(&mut lhs)?;
        for &q in &cnots {
            lhs.apply_local(&[q], &cnot12())?;
        }
        lhs.apply_operator(&g.clone().into())?;
        for &q in &cnots {
            lhs.apply_local(&[q], &cnot12())?;
        }
        circuit.apply(&mut lhs)?;
        let mut rhs = psi;
        rhs.apply_operator(geb)?;
        let d = lhs
            .amplitudes()
            .iter()
            .zip(rhs.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        state_residual = state_residual.max(d);
    }

    let (unitarity, spectra_match) = if n <= TORIC_SPECTRUM_QUDITS {
        let v = circuit.to_dense()?;
        let mut same = true;
        for (i, (g, geb)) in originals.iter().zip(&g_eb).enumerate() {
            let a = eigvalsh(&monomial_to_dense(g, n)?)?;
            let b = eigvalsh(&crate::gamma_algebra::to_dense(geb, n)?)?;
            same &= a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9);
            for (h, gh) in originals.iter().zip(&g_eb).skip(i + 1) {
                let orig = g.commutation_sign(h);
                let new = commutator(geb, gh).canonical().is_zero();
                same &= (orig == 1) == new;
            }
        }
        (Some(unitarity_defect(&v)), Some(same))
    } else {
        (None, None)
    };

    Ok(ToricReport {
        lattice: format!("{}x{} {:?}", mm.spec.lx, mm.spec.ly, mm.spec.boundary).to_lowercase(),
        n_gates: circuit.n_gates(),
        two_qudit_gates: circuit.two_qudit_gates(),
        wen_words: wen.iter().map(|w| w.to_string()).collect(),
        conjugated_words: conj.iter().map(|w| w.to_string()).collect(),
        wen_form_matches,
        hermitian,
        commuting,
        commute_with_hamiltonian,
        state_residual,
        unitarity_defect: unitarity,
        spectra_match,
    })
}

/// Largest deviation of U P U† from Q over the four single-ququart identities.
pub fn site_identity_residual() -> f64 {
    let u = cnot12();
    cnot_site_identities()
        .iter()
        .map(|&((a, b), (s, c, d))| {
            let p = pair_matrix(a, b);
            let q = pair_matrix(c, d) * Complex64::new(s as f64, 0.0);
            let p = DMatrix::from_fn(4, 4, |r, k| p[(r, k)]);
            let q = DMatrix::from_fn(4, 4, |r, k| q[(r, k)]);
            max_abs_diff(&(&u * p * u.adjoint()), &q)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintExpectation {
    pub label: String,
    pub spin: Option<Spin>,
    pub sign: i8,
    pub expectation: f64,
}

/// Audit of the prepared constrained vacuum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VacuumCertificate {
    pub mapping: String,
    pub lattice: String,
    pub survival_probability: f64,
    pub constraints: Vec<ConstraintExpectation>,
    pub max_constraint_deviation: f64,
    pub max_occupation: f64,
    pub energy: f64,
}

impl VacuumCertificate {
    /// All |⟨G_p⟩ − s_p| and ⟨n_r⟩ below `tol`.
    pub fn passed(&self, tol: f64) -> bool {
        self.max_constraint_deviation < tol && self.max_occupation.abs() < tol
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Projects the empty reference state onto the constraint sector.
pub fn vacuum_prepare(mm: &MappedModel, budget: u128) -> Result<(QuditState, VacuumCertificate)> {
    if !matches!(mm.kind, MappingKind::SpinlessLocal | MappingKind::SpinSplit) {
        return Err(Error::Unsupported(format!(
            "vacuum preparation covers spinless_local and spin_split, got {}",
            mm.kind.name()
        )));
    }
    let mut state = QuditState::basis(mm.n_qudits(), mm.mapping().empty_reference_index(), budget)?;
    let survival_probability = state.project_constraints(&mm.constraints)?;
    let mut constraints = Vec::with_capacity(mm.constraints.len());
    let mut max_dev: f64 = 0.0;
    for g in &mm.constraints {
        let e = state.expectation_real(&g.op.clone().into())?;
        max_dev = max_dev.max((e - g.sign as f64).abs());
        constraints.push(ConstraintExpectation {
            label: g.label.clone(),
            spin: g.spin,
            sign: g.sign,
            expectation: e,
        });
    }
    let numbers: Vec<OperatorSum> = mm.number_operators()?.into_iter().map(|(_, o)| o).collect();
    let occ = state.diagonal_expectations(&numbers)?;
    let max_occupation = occ.iter().fold(0.0f64, |m, o| m.max(o.abs()));
    let energy = state.expectation_real(&mm.hamiltonian)?;
    let cert = VacuumCertificate {
        mapping: mm.kind.name().to_string(),
        lattice: format!("{}x{} {:?}", mm.spec.lx, mm.spec.ly, mm.spec.boundary).to_lowercase(),
        survival_probability,
        constraints,
        max_constraint_deviation: max_dev,
        max_occupation,
        energy,
    };
    Ok((state, cert))
}
