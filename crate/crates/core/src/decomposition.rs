//! Two-qudit decompositions of term exponentials by unitary conjugation,
//! per-term circuit templates, gate counts and operator-weight tables.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_algebra::{OperatorSum, QuditMonomial, SiteFactor, C0, C1};
use crate::lattice::{LatticeSpec, Orientation, Site};
use crate::linalg::{eigh, embed, exp_hermitian_real, expm_hermitian, max_abs_diff, unitarity_defect};
use crate::mappings::{Mapping, MappingKind};
use crate::model::Spin;
use crate::statevector::local_matrix;

/// Eigenvalues closer than this are treated as degenerate.
const DEGENERACY_TOL: f64 = 1e-9;

/// A unitary u with u·a·u† = d, i.e. a = u†·d·u.
#[derive(Clone, Debug)]
pub struct ConjugationSolution {
    pub u: DMatrix<Complex64>,
    pub a: DMatrix<Complex64>,
    pub d: DMatrix<Complex64>,
}

impl ConjugationSolution {
    /// Max entry of u·a·u† − d.
    pub fn residual(&self) -> f64 {
        max_abs_diff(&(&self.u * &self.a * self.u.adjoint()), &self.d)
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.u)
    }
}

/// Relative deviation of e^{a⊗b} from (u⊗I)† e^{d⊗b} (u⊗I), with `b` on the
/// less significant qudits.
pub fn unitary_conj_residual(
    u: &DMatrix<Complex64>,
    a: &DMatrix<Complex64>,
    d: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Result<f64> {
    let id = DMatrix::<Complex64>::identity(b.nrows(), b.ncols());
    let lhs = exp_hermitian_real(&a.kronecker(b))?;
    let uu = u.kronecker(&id);
    let rhs = uu.adjoint() * exp_hermitian_real(&d.kronecker(b))? * &uu;
    let scale = lhs.iter().map(|v| v.norm()).fold(1.0, f64::max);
    Ok(max_abs_diff(&lhs, &rhs) / scale)
}

/// Orthonormal basis of each eigenspace, eigenvalues in descending order.
/// Within a degenerate block the basis is the QR orthonormalization of the
/// block projector applied to the standard basis vectors in order, keeping the
/// first linearly independent columns; each vector is then rotated so its
/// first nonzero entry is real and positive.
fn canonical_eigenbasis(m: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let eig = eigh(m)?;
    let n = m.nrows();
    let mut values = Vec::with_capacity(n);
    let mut basis = DMatrix::<Complex64>::zeros(n, n);
    let mut col = 0;
    let mut hi = n;
    while hi > 0 {
        let mut lo = hi - 1;
        while lo > 0 && (eig.values[hi - 1] - eig.values[lo - 1]).abs() <= DEGENERACY_TOL {
            lo -= 1;
        }
        let block = eig.vectors.columns(lo, hi - lo).into_owned();
        let projector = &block * block.adjoint();
        let mut kept: Vec<nalgebra::DVector<Complex64>> = Vec::new();
        for j in 0..n {
            if kept.len() == hi - lo {
                break;
            }
            let mut v = projector.column(j).into_owned();
            for k in &kept {
                let overlap = k.dotc(&v);
                v -= k * overlap;
            }
            let norm = v.norm();
            if norm > 1e-8 {
                kept.push(v / Complex64::new(norm, 0.0));
            }
        }
        if kept.len() != hi - lo {
            return Err(Error::SpectraMismatch("eigenspace basis is rank deficient".into()));
        }
        let raw = DMatrix::from_columns(&kept);
        let q = raw.qr().q();
        for k in 0..hi - lo {
            let mut v = q.column(k).into_owned();
            if let Some(first) = v.iter().find(|x| x.norm() > 1e-12).copied() {
                v *= first.conj() / first.norm();
            }
            basis.set_column(col, &v);
            values.push(eig.values[hi - 1]);
            col += 1;
        }
        hi = lo;
    }
    Ok((values, basis))
}

/// Solves u·a·u† = d for Hermitian a and d with equal spectra.
pub fn solve_conjugation(a: &DMatrix<Complex64>, d: &DMatrix<Complex64>) -> Result<ConjugationSolution> {
    if a.shape() != d.shape() || a.nrows() != a.ncols() {
        return Err(Error::SpectraMismatch(format!(
            "shapes {:?} and {:?}",
            a.shape(),
            d.shape()
        )));
    }
    let (va, ea) = canonical_eigenbasis(a)?;
    let (vd, ed) = canonical_eigenbasis(d)?;
    if let Some((x, y)) = va.iter().zip(&vd).find(|(x, y)| (*x - *y).abs() > DEGENERACY_TOL) {
        return Err(Error::SpectraMismatch(format!("eigenvalue {x} against {y}")));
    }
    let u = &ed * ea.adjoint();
    Ok(ConjugationSolution {
        u,
        a: a.clone(),
        d: d.clone(),
    })
}

/// Operator form of [`solve_conjugation`] on the ordered qudits `support`.
pub fn solve_operator_conjugation(a: &OperatorSum, d: &OperatorSum, support: &[usize]) -> Result<ConjugationSolution> {
    solve_conjugation(&local_matrix(a, support)?, &local_matrix(d, support)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermType {
    HopX,
    HopY,
    Interaction,
}

impl TermType {
    pub const ALL: [TermType; 3] = [TermType::HopX, TermType::HopY, TermType::Interaction];
}

/// A gate on ordered qudits; `support[0]` is the most significant index of `matrix`.
#[derive(Clone, Debug)]
pub struct Gate {
    pub label: String,
    pub support: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
}

#[derive(Serialize)]
struct GateJson<'a> {
    label: &'a str,
    support: &'a [usize],
    /// Row-major entries as [re, im].
    matrix: Vec<[f64; 2]>,
}

/// Ordered gate list implementing e^{−iθ·term} for one term.
#[derive(Clone, Debug)]
pub struct CircuitTemplate {
    pub kind: MappingKind,
    pub term_type: TermType,
    pub spin: Option<Spin>,
    pub theta: f64,
    pub term: OperatorSum,
    /// Gates in application order.
    pub gates: Vec<Gate>,
}

impl CircuitTemplate {
    pub fn two_qudit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.support.len() == 2).count()
    }

    pub fn two_qudit_depth(&self) -> usize {
        two_qudit_depth(&self.gates)
    }

    /// Qudits touched by the term or a gate, ascending.
    pub fn register(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.term.support();
        r.extend(self.gates.iter().flat_map(|g| g.support.iter().copied()));
        r.sort_unstable();
        r.dedup();
        r
    }

    /// Product of all gates on [`CircuitTemplate::register`].
    pub fn composed_unitary(&self) -> Result<DMatrix<Complex64>> {
        let reg = self.register();
        let dim = 1usize << (2 * reg.len());
        let mut u = DMatrix::<Complex64>::identity(dim, dim);
        for g in &self.gates {
            u = embed(&g.matrix, &g.support, &reg)? * u;
        }
        Ok(u)
    }

    /// e^{−iθ·term} on [`CircuitTemplate::register`].
    pub fn target_unitary(&self) -> Result<DMatrix<Complex64>> {
        expm_hermitian(&local_matrix(&self.term, &self.register())?, self.theta)
    }

    pub fn residual(&self) -> Result<f64> {
        Ok(max_abs_diff(&self.composed_unitary()?, &self.target_unitary()?))
    }

    pub fn to_json(&self) -> Result<String> {
        let gates: Vec<GateJson> = self
            .gates
            .iter()
            .map(|g| GateJson {
                label: &g.label,
                support: &g.support,
                matrix: (0..g.matrix.nrows())
                    .flat_map(|r| (0..g.matrix.ncols()).map(move |c| (r, c)))
                    .map(|(r, c)| [g.matrix[(r, c)].re, g.matrix[(r, c)].im])
                    .collect(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "mapping": self.kind.name(),
            "term_type": self.term_type,
            "spin": self.spin,
            "theta": self.theta,
            "gates": gates,
        }))?)
    }
}

/// Layers of two-qudit gates under as-soon-as-possible scheduling; single-qudit gates are free.
pub fn two_qudit_depth(gates: &[Gate]) -> usize {
    let mut ready: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut depth = 0;
    for g in gates.iter().filter(|g| g.support.len() >= 2) {
        let layer = g
            .support
            .iter()
            .map(|q| ready.get(q).copied().unwrap_or(0))
            .max()
            .unwrap_or(0)
            + 1;
        for &q in &g.support {
            ready.insert(q, layer);
        }
        depth = depth.max(layer);
    }
    depth
}

/// Reference lattice on which templates are built.
fn reference_spec() -> LatticeSpec {
    LatticeSpec::open(2, 2).expect("2×2 is a valid lattice")
}

/// The term of the given type on the reference lattice: S+S† on the edge from
/// (0,0) along x or y, or the interaction on edge (0,0)–(1,0) (t-V) or site (0,0) (Fermi-Hubbard).
pub fn reference_term(mapping: &Mapping, term_type: TermType, spin: Option<Spin>) -> Result<OperatorSum> {
    let spec = &mapping.spec;
    let origin = Site::new(0, 0);
    match term_type {
        TermType::HopX | TermType::HopY => {
            let orientation = if term_type == TermType::HopX {
                Orientation::Horizontal
            } else {
                Orientation::Vertical
            };
            let edge = spec
                .edge_from(origin, orientation)
                .ok_or_else(|| Error::InvalidLattice("reference lattice lacks the edge".into()))?;
            mapping.hopping_sum(&edge, spin)
        }
        TermType::Interaction => {
            if mapping.kind.is_spinful() {
                mapping.interaction_term((origin, origin), (Some(Spin::Up), Some(Spin::Down)))
            } else {
                mapping.interaction_term((origin, Site::new(1, 0)), (None, None))
            }
        }
    }
}

fn exp_gate(label: String, op: &OperatorSum, support: Vec<usize>, theta: f64) -> Result<Gate> {
    let matrix = expm_hermitian(&local_matrix(op, &support)?, theta)?;
    Ok(Gate { label, support, matrix })
}

/// One gate per multi-qudit monomial and one per qudit for all single-qudit
/// monomials; the identity part joins the first gate.
fn direct_template(term: &OperatorSum, theta: f64) -> Result<Vec<Gate>> {
    let mut identity = C0;
    let mut singles: std::collections::BTreeMap<usize, Vec<QuditMonomial>> = Default::default();
    let mut multis = Vec::new();
    for m in &term.terms {
        match m.weight() {
            0 => identity += m.coeff,
            1 => singles.entry(m.support()[0]).or_default().push(m.clone()),
            _ => multis.push(m.clone()),
        }
    }
    let mut ops: Vec<(OperatorSum, Vec<usize>)> = singles
        .into_iter()
        .map(|(q, ms)| (OperatorSum::from_terms(ms), vec![q]))
        .collect();
    ops.extend(multis.into_iter().map(|m| {
        let s = m.support();
        (OperatorSum::from(m), s)
    }));
    if identity != C0 {
        match ops.first_mut() {
            Some((op, _)) => *op = &*op + &OperatorSum::scalar(identity),
            None => return Err(Error::Unsupported("term is a pure scalar".into())),
        }
    }
    ops.iter()
        .map(|(op, s)| exp_gate(format!("exp[{}]", op.pretty()), op, s.clone(), theta))
        .collect()
}

/// Splits a term into X ⊗ Y, where Y is the factor shared by all monomials
/// and X lives on the remaining qudits.
fn factor_shared(term: &OperatorSum) -> Option<(OperatorSum, QuditMonomial, Vec<usize>, Vec<usize>)> {
    let first = term.terms.first()?;
    let support = term.support();
    let shared: Vec<usize> = support
        .iter()
        .copied()
        .filter(|q| term.terms.iter().all(|m| m.factor(*q) == first.factor(*q)))
        .collect();
    let core: Vec<usize> = support.iter().copied().filter(|q| !shared.contains(q)).collect();
    let mut y = QuditMonomial::identity();
    for &q in &shared {
        y = y.with(q, first.factor(q));
    }
    let x = OperatorSum::from_terms(
        term.terms
            .iter()
            .map(|m| {
                let mut c = QuditMonomial::scalar(m.coeff);
                for &q in &core {
                    c = c.with(q, m.factor(q));
                }
                c
            })
            .collect(),
    );
    Some((x, y, core, shared))
}

fn tilde_sum(qudits: &[usize]) -> OperatorSum {
    qudits.iter().fold(OperatorSum::zero(), |acc, &q| {
        &acc + &QuditMonomial::single(q, SiteFactor::TILDE).into()
    })
}

fn adjoint_gate(g: &Gate) -> Gate {
    Gate {
        label: format!("{}†", g.label),
        support: g.support.clone(),
        matrix: g.matrix.adjoint(),
    }
}

/// e^{−iθ X⊗Y} = C† e^{−iθ D_X⊗D_Y} C with X = V† (Γ̃_a + Γ̃_b) V on the core pair
/// and, for a two-qudit shared factor, Y = W† Γ̃_c W on the shared pair.
fn conjugation_template(term: &OperatorSum, theta: f64) -> Result<Vec<Gate>> {
    let (x, y, core, shared) = factor_shared(term).ok_or_else(|| Error::Unsupported("empty term".into()))?;
    if core.len() != 2 || shared.is_empty() || shared.len() > 2 || y.adjoint() != y {
        return Err(Error::Unsupported(format!(
            "no conjugation template for {}",
            term.pretty()
        )));
    }
    let v = solve_operator_conjugation(&x, &tilde_sum(&core), &core)?;
    let (v_label, w_label) = if shared.len() == 1 { ("U", "") } else { ("V", "W") };
    let mut pre = vec![Gate {
        label: v_label.to_string(),
        support: core.clone(),
        matrix: v.u,
    }];
    let target = if shared.len() == 2 {
        let d_y: OperatorSum = QuditMonomial::single(shared[0], SiteFactor::TILDE).into();
        let w = solve_operator_conjugation(&y.clone().into(), &d_y, &shared)?;
        pre.push(Gate {
            label: w_label.to_string(),
            support: shared.clone(),
            matrix: w.u,
        });
        QuditMonomial::single(shared[0], SiteFactor::TILDE)
    } else {
        y.clone()
    };
    let mut gates = pre.clone();
    for (i, &c) in core.iter().enumerate() {
        let mut rot = target.clone().with(c, SiteFactor::TILDE);
        rot.coeff = C1;
        let op: OperatorSum = rot.into();
        let support = op.support();
        gates.push(exp_gate(format!("R{}", i + 1), &op, support, theta)?);
    }
    gates.extend(pre.iter().map(adjoint_gate));
    Ok(gates)
}

/// Gate list for e^{−iθ·term} of one term type and spin on the reference lattice.
pub fn circuit_template(
    kind: MappingKind,
    term_type: TermType,
    spin: Option<Spin>,
    theta: f64,
) -> Result<CircuitTemplate> {
    if kind == MappingKind::GeneralizedJw {
        return Err(Error::Unsupported(
            "no circuit templates for the generalized Jordan-Wigner mapping".into(),
        ));
    }
    let mapping = Mapping::new(kind, reference_spec())?;
    let spin = if term_type == TermType::Interaction { None } else { spin };
    if term_type != TermType::Interaction && spin.is_some() != kind.is_spinful() {
        return Err(Error::SpinMismatch(format!("{kind} template with spin {spin:?}")));
    }
    let term = reference_term(&mapping, term_type, spin)?;
    let gates = if term.weight() <= 2 {
        direct_template(&term, theta)?
    } else {
        conjugation_template(&term, theta)?
    };
    Ok(CircuitTemplate {
        kind,
        term_type,
        spin,
        theta,
        term,
        gates,
    })
}

/// Two-qudit gate counts of one symmetrization-free Trotter step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCountReport {
    pub mapping: String,
    /// Two-qudit gates per term and spin species.
    pub hop_x: Vec<usize>,
    pub hop_y: Vec<usize>,
    pub interaction: usize,
    pub total: usize,
    /// Two-qudit depth of the concatenated step circuit.
    pub depth: usize,
}

impl GateCountReport {
    pub fn to_markdown(&self) -> String {
        let mut out =
            String::from("| mapping | hop_x | hop_y | interaction | total | depth |\n|---|---|---|---|---|---|\n");
        let join = |v: &[usize]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("+");
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            self.mapping,
            join(&self.hop_x),
            join(&self.hop_y),
            self.interaction,
            self.total,
            self.depth
        );
        out
    }

    pub fn csv_header() -> &'static str {
        "mapping,hop_x,hop_y,interaction,total,depth"
    }

    pub fn csv_row(&self) -> String {
        let sum = |v: &[usize]| v.iter().sum::<usize>();
        format!(
            "{},{},{},{},{},{}",
            self.mapping,
            sum(&self.hop_x),
            sum(&self.hop_y),
            self.interaction,
            self.total,
            self.depth
        )
    }
}

/// Counts two-qudit gates in the emitted templates of one step: horizontal and
/// vertical hops for every spin, then the interaction.
pub fn gate_count(kind: MappingKind) -> Result<GateCountReport> {
    let spins = crate::model::spin_species(kind.is_spinful());
    let theta = 0.1;
    let mut step = Vec::new();
    let mut hop_x = Vec::new();
    let mut hop_y = Vec::new();
    for (tt, counts) in [(TermType::HopX, &mut hop_x), (TermType::HopY, &mut hop_y)] {
        for &spin in &spins {
            let t = circuit_template(kind, tt, spin, theta)?;
            counts.push(t.two_qudit_count());
            step.extend(t.gates);
        }
    }
    let int = circuit_template(kind, TermType::Interaction, None, theta)?;
    let interaction = int.two_qudit_count();
    step.extend(int.gates);
    let total = hop_x.iter().sum::<usize>() + hop_y.iter().sum::<usize>() + interaction;
    Ok(GateCountReport {
        mapping: kind.name().to_string(),
        hop_x,
        hop_y,
        interaction,
        total,
        depth: two_qudit_depth(&step),
    })
}

/// One cell of the weight table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightCell {
    Exact {
        weight: usize,
    },
    /// Grows linearly with L_x; `measured` is the weight at the given L_x when computed.
    LinearInLx {
        measured: Option<usize>,
        lx: Option<usize>,
    },
    NotApplicable,
}

impl std::fmt::Display for WeightCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightCell::Exact { weight } => write!(f, "{weight}"),
            WeightCell::LinearInLx {
                measured: Some(w),
                lx: Some(lx),
            } => write!(f, "O(L_x) [{w} at L_x={lx}]"),
            WeightCell::LinearInLx { .. } => write!(f, "O(L_x)"),
            WeightCell::NotApplicable => write!(f, "N/A"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightRow {
    pub method: String,
    pub d: usize,
    /// Qudits per fermionic mode as a reduced fraction.
    pub ratio: (usize, usize),
    pub w_x: WeightCell,
    pub w_y: WeightCell,
    pub w_int: WeightCell,
    pub w_g: WeightCell,
    /// False for reference rows of mappings that are not implemented.
    pub computed: bool,
}

impl WeightRow {
    pub fn ratio_label(&self) -> String {
        match self.ratio {
            (n, 1) => n.to_string(),
            (n, d) => format!("{n}/{d}"),
        }
    }
}

/// Lattice on which weights are measured; L_x = 3 for the O(L_x) column.
pub const WEIGHT_LATTICE: (usize, usize) = (3, 2);

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Weight row of an implemented mapping, measured on [`WEIGHT_LATTICE`].
pub fn weight_row(kind: MappingKind) -> Result<WeightRow> {
    let spec = LatticeSpec::open(WEIGHT_LATTICE.0, WEIGHT_LATTICE.1)?;
    let mapping = Mapping::new(kind, spec)?;
    let spin = if kind.is_spinful() { Some(Spin::Up) } else { None };
    let origin = Site::new(0, 0);
    let hop = |o: Orientation| -> Result<usize> {
        let e = spec.edge_from(origin, o).expect("weight lattice has both orientations");
        Ok(mapping.hopping_sum(&e, spin)?.weight())
    };
    let w_int = if kind.is_spinful() {
        mapping.interaction_term((origin, origin), (Some(Spin::Up), Some(Spin::Down)))?
    } else {
        mapping.interaction_term((origin, Site::new(1, 0)), (None, None))?
    }
    .weight();
    let w_y = hop(Orientation::Vertical)?;
    let (w_y, w_g) = if kind == MappingKind::GeneralizedJw {
        (
            WeightCell::LinearInLx {
                measured: Some(w_y),
                lx: Some(spec.lx),
            },
            WeightCell::NotApplicable,
        )
    } else {
        let p = crate::lattice::plaquettes(&spec)
            .into_iter()
            .next()
            .expect("weight lattice has a plaquette");
        (
            WeightCell::Exact { weight: w_y },
            WeightCell::Exact {
                weight: mapping.plaquette_constraint(&p, spin)?.weight(),
            },
        )
    };
    let modes = spec.n_sites() * if kind.is_spinful() { 2 } else { 1 };
    let qudits = mapping.n_qudits();
    let g = gcd(qudits, modes);
    let method = match kind {
        MappingKind::SpinlessLocal => "Spinless local",
        MappingKind::SpinSplit => "Local spin split",
        MappingKind::AuxiliaryParity => "Spinful auxiliary parity",
        MappingKind::GeneralizedJw => "Generalized JW",
    };
    Ok(WeightRow {
        method: method.to_string(),
        d: 4,
        ratio: (qudits / g, modes / g),
        w_x: WeightCell::Exact {
            weight: hop(Orientation::Horizontal)?,
        },
        w_y,
        w_int: WeightCell::Exact { weight: w_int },
        w_g,
        computed: true,
    })
}

/// Reference rows for the qubit Jordan-Wigner and BVC mappings, which are not implemented.
pub fn static_reference_rows() -> Vec<WeightRow> {
    let e = |weight| WeightCell::Exact { weight };
    vec![
        WeightRow {
            method: "JW (qubit, reference)".into(),
            d: 2,
            ratio: (1, 1),
            w_x: e(2),
            w_y: WeightCell::LinearInLx {
                measured: None,
                lx: None,
            },
            w_int: e(2),
            w_g: WeightCell::NotApplicable,
            computed: false,
        },
        WeightRow {
            method: "BVC (qubit, reference)".into(),
            d: 2,
            ratio: (2, 1),
            w_x: e(3),
            w_y: e(4),
            w_int: e(2),
            w_g: e(6),
            computed: false,
        },
    ]
}

/// Spinless rows first, then spinful, with the static reference rows in place.
pub fn weight_table() -> Result<Vec<WeightRow>> {
    let refs = static_reference_rows();
    Ok(vec![
        refs[0].clone(),
        weight_row(MappingKind::SpinlessLocal)?,
        weight_row(MappingKind::GeneralizedJw)?,
        refs[1].clone(),
        weight_row(MappingKind::SpinSplit)?,
        weight_row(MappingKind::AuxiliaryParity)?,
    ])
}

pub fn weight_table_markdown(rows: &[WeightRow]) -> String {
    let mut out =
        String::from("| method | d | ratio | W_x | W_y | W_int | W_g | source |\n|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            r.method,
            r.d,
            r.ratio_label(),
            r.w_x,
            r.w_y,
            r.w_int,
            r.w_g,
            if r.computed { "computed" } else { "static reference" }
        );
    }
    out
}

pub fn weight_table_csv(rows: &[WeightRow]) -> String {
    let mut out = String::from("method,d,ratio,w_x,w_y,w_int,w_g,source\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.d,
            r.ratio_label(),
            r.w_x,
            r.w_y,
            r.w_int,
            r.w_g,
            if r.computed { "computed" } else { "static_reference" }
        );
    }
    out
}

/// Weight of the qudit Jordan-Wigner hopping f†_from f_to + h.c. on `spec`.
pub fn jwt_hopping_weight(spec: LatticeSpec, from: usize, to: usize, spin: Spin) -> Result<usize> {
    let mapping = Mapping::new(MappingKind::GeneralizedJw, spec)?;
    let (c_from, a_from) = mapping.jwt_operators(from, Some(spin))?;
    let (c_to, a_to) = mapping.jwt_operators(to, Some(spin))?;
    let hop = &(&c_from * &a_to) + &(&c_to * &a_from);
    Ok(hop.weight())
}
