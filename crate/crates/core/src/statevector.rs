//! Dense ququart statevector with strided k-local kernels.
//!
//! Amplitude index convention: qudit 0 is the most significant base-4 digit,
//! so qudit q sits at digit position n−1−q (bits 2(n−1−q) and 2(n−1−q)+1).

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_algebra::{MonomialAction, OperatorSum, QuditMonomial, C0, C1, CI};
use crate::linalg::{expm_hermitian, hermiticity_defect, kron};
use crate::mappings::Constraint;

/// Default memory cap for a state and its scratch buffer.
pub const DEFAULT_BUDGET: u128 = 1 << 30;

/// Largest support of a local gate.
pub const MAX_LOCALITY: usize = 4;

/// Indices per chunk in reductions; fixed so results do not depend on the thread count.
const REDUCTION_CHUNK: usize = 1 << 14;

/// Minimum number of groups handed to one rayon task.
const MIN_GROUPS_PER_TASK: usize = 1 << 10;

/// Largest qudit count accepted when decoding snapshots.
pub const SNAPSHOT_QUDIT_CAP: usize = 16;

pub const ORDERING: &str = "qudit0-most-significant";

/// Bytes needed for a state of `n_qudits` plus one scratch buffer of equal size.
pub fn required_bytes(n_qudits: usize) -> u128 {
    2 * 16 * (1u128 << (2 * n_qudits))
}

pub fn check_budget(n_qudits: usize, budget: u128) -> Result<()> {
    let required = required_bytes(n_qudits);
    if n_qudits == 0 || n_qudits > 30 || required > budget {
        return Err(Error::MemoryBudget {
            n_qudits,
            required,
            budget,
        });
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct SyncPtr(*mut Complex64);

// SAFETY: kernels write through the pointer only at indices owned by exactly one group.
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}

impl SyncPtr {
    #[inline]
    fn get(self) -> *mut Complex64 {
        self.0
    }
}

/// Index geometry of a k-local support inside an n-qudit register.
#[derive(Clone, Debug)]
struct Layout {
    /// Bit shift of every support qudit, in support order.
    shifts: Vec<usize>,
    /// Ascending shifts used to insert zero digits into group counters.
    sorted_shifts: Vec<usize>,
    /// Offset of every local index from the group base.
    offsets: Vec<usize>,
    n_groups: usize,
}

impl Layout {
    fn new(n_qudits: usize, support: &[usize]) -> Result<Self> {
        let k = support.len();
        if k == 0 || k > MAX_LOCALITY {
            return Err(Error::InvalidSupport(format!("support of size {k}")));
        }
        for (i, &q) in support.iter().enumerate() {
            if q >= n_qudits {
                return Err(Error::QuditOutOfRange { qudit: q, n_qudits });
            }
            if support[..i].contains(&q) {
                return Err(Error::InvalidSupport(format!("qudit {q} repeated in {support:?}")));
            }
        }
        let shifts: Vec<usize> = support.iter().map(|&q| 2 * (n_qudits - 1 - q)).collect();
        let mut sorted_shifts = shifts.clone();
        sorted_shifts.sort_unstable();
        let offsets = (0..1usize << (2 * k))
            .map(|l| {
                shifts
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| ((l >> (2 * (k - 1 - i))) & 3) << s)
                    .sum()
            })
            .collect();
        Ok(Layout {
            shifts,
            sorted_shifts,
            offsets,
            n_groups: 1usize << (2 * (n_qudits - k)),
        })
    }

    #[inline]
    fn base(&self, mut g: usize) -> usize {
        for &s in &self.sorted_shifts {
            let low = g & ((1usize << s) - 1);
            g = ((g >> s) << (s + 2)) | low;
        }
        g
    }

    #[inline]
    fn local_index(&self, index: usize) -> usize {
        self.shifts
            .iter()
            .fold(0usize, |acc, &s| (acc << 2) | ((index >> s) & 3))
    }
}

#[derive(Clone, Debug)]
enum GateKind {
    Diagonal(Vec<Complex64>),
    Sparse {
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<Complex64>,
    },
}

/// A 4^k × 4^k matrix on a fixed support, stored as a diagonal or in CSR form.
#[derive(Clone, Debug)]
pub struct CompiledGate {
    support: Vec<usize>,
    kind: GateKind,
}

impl CompiledGate {
    /// Compiles a dense local matrix; exact zeros are dropped.
    pub fn new(support: &[usize], matrix: &DMatrix<Complex64>) -> Result<Self> {
        let k = support.len();
        if k == 0 || k > MAX_LOCALITY {
            return Err(Error::InvalidSupport(format!("support of size {k}")));
        }
        let dim = 1usize << (2 * k);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::MatrixShape {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                k,
            });
        }
        for (i, q) in support.iter().enumerate() {
            if support[..i].contains(q) {
                return Err(Error::InvalidSupport(format!("qudit {q} repeated in {support:?}")));
            }
        }
        let diagonal = (0..dim).all(|r| (0..dim).all(|c| r == c || matrix[(r, c)] == C0));
        let kind = if diagonal {
            GateKind::Diagonal((0..dim).map(|i| matrix[(i, i)]).collect())
        } else {
            let mut row_ptr = vec![0];
            let mut cols = Vec::new();
            let mut vals = Vec::new();
            for r in 0..dim {
                for c in 0..dim {
                    if matrix[(r, c)] != C0 {
                        cols.push(c);
                        vals.push(matrix[(r, c)]);
                    }
                }
                row_ptr.push(cols.len());
            }
            GateKind::Sparse { row_ptr, cols, vals }
        };
        Ok(CompiledGate {
            support: support.to_vec(),
            kind,
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.kind, GateKind::Diagonal(_))
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << (2 * self.support.len());
        let mut m = DMatrix::from_element(dim, dim, C0);
        match &self.kind {
            GateKind::Diagonal(d) => {
                for (i, &v) in d.iter().enumerate() {
                    m[(i, i)] = v;
                }
            }
            GateKind::Sparse { row_ptr, cols, vals } => {
                for r in 0..dim {
                    for p in row_ptr[r]..row_ptr[r + 1] {
                        m[(r, cols[p])] = vals[p];
                    }
                }
            }
        }
        m
    }
}

/// Dense matrix of a monomial on an ordered support; the first support qudit is most significant.
pub fn monomial_local_matrix(m: &QuditMonomial, support: &[usize]) -> Result<DMatrix<Complex64>> {
    for q in m.support() {
        if !support.contains(&q) {
            return Err(Error::InvalidSupport(format!(
                "monomial acts on qudit {q} outside {support:?}"
            )));
        }
    }
    let mut out = DMatrix::from_element(1, 1, m.coeff);
    for &q in support {
        let f = m.factor(q).matrix();
        out = kron(&out, &DMatrix::from_fn(4, 4, |r, c| f[(r, c)]));
    }
    Ok(out)
}

/// Dense matrix of an operator sum on an ordered support.
pub fn local_matrix(op: &OperatorSum, support: &[usize]) -> Result<DMatrix<Complex64>> {
    let dim = 1usize << (2 * support.len());
    let mut out = DMatrix::from_element(dim, dim, C0);
    for t in &op.terms {
        out += monomial_local_matrix(t, support)?;
    }
    Ok(out)
}

/// A Hermitian generator on at most four qudits.
#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub support: Vec<usize>,
    pub generator: DMatrix<Complex64>,
    pub involutory: bool,
    monomials: Vec<QuditMonomial>,
}

impl LocalTerm {
    pub fn new(support: Vec<usize>, generator: DMatrix<Complex64>) -> Result<Self> {
        let k = support.len();
        let dim = 1usize << (2 * k);
        if k > MAX_LOCALITY {
            return Err(Error::InvalidSupport(format!("support of size {k}")));
        }
        if generator.nrows() != dim || generator.ncols() != dim {
            return Err(Error::MatrixShape {
                rows: generator.nrows(),
                cols: generator.ncols(),
                k,
            });
        }
        let defect = hermiticity_defect(&generator);
        if defect > 1e-12 {
            return Err(Error::NonHermitian(defect));
        }
        let sq = &generator * &generator;
        let involutory = crate::linalg::max_abs_diff(&sq, &DMatrix::identity(dim, dim)) < 1e-12;
        Ok(LocalTerm {
            support,
            generator,
            involutory,
            monomials: Vec::new(),
        })
    }

    /// Generator built from an operator sum on its own support.
    pub fn from_operator(op: &OperatorSum) -> Result<Self> {
        let support = op.support();
        let generator = local_matrix(op, &support)?;
        let mut term = LocalTerm::new(support, generator)?;
        term.monomials = op.terms.clone();
        Ok(term)
    }

    pub fn is_diagonal(&self) -> bool {
        let dim = self.generator.nrows();
        (0..dim).all(|r| (0..dim).all(|c| r == c || self.generator[(r, c)] == C0))
    }

    /// e^{−iθG} on the local support.
    ///
    /// Sums of commuting monomials with M² = λ²I are exponentiated factor by
    /// factor, which keeps exact zeros; involutory generators use the closed
    /// form; everything else goes through the eigendecomposition.
    pub fn exp_matrix(&self, theta: f64) -> Result<DMatrix<Complex64>> {
        let dim = self.generator.nrows();
        if let Some(scales) = self.commuting_involutions() {
            let mut u = DMatrix::<Complex64>::identity(dim, dim);
            for (m, lambda) in self.monomials.iter().zip(scales) {
                let (s, c) = (theta * lambda).sin_cos();
                if m.factors.is_empty() {
                    u *= Complex64::from_polar(1.0, -theta * m.coeff.re);
                    continue;
                }
                let n = monomial_local_matrix(m, &self.support)? / Complex64::new(lambda, 0.0);
                let f = DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(c, 0.0) - n * (CI * s);
                u = f * u;
            }
            return Ok(u);
        }
        if self.involutory {
            let (s, c) = theta.sin_cos();
            return Ok(DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(c, 0.0) - &self.generator * (CI * s));
        }
        expm_hermitian(&self.generator, theta)
    }

    /// λ for every monomial if all pairwise commute and each squares to λ²I with λ > 0.
    fn commuting_involutions(&self) -> Option<Vec<f64>> {
        if self.monomials.is_empty() {
            return None;
        }
        for (i, a) in self.monomials.iter().enumerate() {
            for b in &self.monomials[i + 1..] {
                if a.commutation_sign(b) != 1 {
                    return None;
                }
            }
        }
        self.monomials
            .iter()
            .map(|m| {
                if m.factors.is_empty() {
                    return (m.coeff.im.abs() < 1e-15).then_some(1.0);
                }
                let sq = m.product(m);
                (sq.factors.is_empty() && sq.coeff.im.abs() < 1e-15 && sq.coeff.re > 0.0).then(|| sq.coeff.re.sqrt())
            })
            .collect()
    }

    pub fn exp_gate(&self, theta: f64) -> Result<CompiledGate> {
        if self.support.is_empty() {
            return Err(Error::InvalidSupport("scalar generator has no support".into()));
        }
        CompiledGate::new(&self.support, &self.exp_matrix(theta)?)
    }
}

/// Serializable description of a snapshot file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    pub n_qudits: usize,
    pub ordering: String,
}

/// Dense amplitudes of n ququarts.
#[derive(Clone, Debug, PartialEq)]
pub struct QuditState {
    n_qudits: usize,
    amps: Vec<Complex64>,
}

impl QuditState {
    /// |0⟩^{⊗n}.
    pub fn zero(n_qudits: usize, budget: u128) -> Result<Self> {
        Self::basis(n_qudits, 0, budget)
    }

    /// Computational basis state |index⟩.
    pub fn basis(n_qudits: usize, index: usize, budget: u128) -> Result<Self> {
        check_budget(n_qudits, budget)?;
        let dim = 1usize << (2 * n_qudits);
        if index >= dim {
            return Err(Error::InvalidSupport(format!("basis index {index} ≥ {dim}")));
        }
        let mut amps = vec![C0; dim];
        amps[index] = C1;
        Ok(QuditState { n_qudits, amps })
    }

    pub fn from_amplitudes(n_qudits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n_qudits == 0 || amps.len() != 1usize << (2 * n_qudits) {
            return Err(Error::InvalidSupport(format!(
                "{} amplitudes for {n_qudits} qudits",
                amps.len()
            )));
        }
        Ok(QuditState { n_qudits, amps })
    }

    pub fn n_qudits(&self) -> usize {
        self.n_qudits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        chunked_sum(self.amps.len(), |r| {
            self.amps[r].iter().map(|a| a.norm_sqr()).sum::<f64>()
        })
    }

    /// Scales to unit norm and returns the squared norm before scaling.
    pub fn normalize(&mut self) -> Result<f64> {
        let n2 = self.norm_sqr();
        if n2.is_nan() || n2 <= 1e-24 {
            return Err(Error::Annihilated(n2));
        }
        let inv = 1.0 / n2.sqrt();
        self.amps.par_iter_mut().for_each(|a| *a *= inv);
        Ok(n2)
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &QuditState) -> Complex64 {
        assert_eq!(self.amps.len(), other.amps.len());
        chunked_sum_c(self.amps.len(), |r| {
            self.amps[r.clone()]
                .iter()
                .zip(&other.amps[r])
                .map(|(a, b)| a.conj() * b)
                .sum()
        })
    }

    /// Applies a dense 4^k × 4^k matrix to the given support.
    pub fn apply_local(&mut self, support: &[usize], matrix: &DMatrix<Complex64>) -> Result<()> {
        let gate = CompiledGate::new(support, matrix)?;
        self.apply_gate(&gate)
    }

    /// Applies a compiled gate; every amplitude is read and written by exactly one group.
    pub fn apply_gate(&mut self, gate: &CompiledGate) -> Result<()> {
        let layout = Layout::new(self.n_qudits, &gate.support)?;
        match &gate.kind {
            GateKind::Diagonal(d) => {
                let chunk = REDUCTION_CHUNK;
                self.amps.par_chunks_mut(chunk).enumerate().for_each(|(ci, block)| {
                    let start = ci * chunk;
                    for (j, a) in block.iter_mut().enumerate() {
                        *a *= d[layout.local_index(start + j)];
                    }
                });
            }
            GateKind::Sparse { row_ptr, cols, vals } => {
                let ptr = SyncPtr(self.amps.as_mut_ptr());
                let dim = layout.offsets.len();
                (0..layout.n_groups)
                    .into_par_iter()
                    .with_min_len(MIN_GROUPS_PER_TASK)
                    .for_each_init(
                        || vec![C0; dim],
                        |buf, g| {
                            let base = layout.base(g);
                            let p = ptr.get();
                            // SAFETY: base + offsets[l] enumerates the indices of group g,
                            // and distinct groups have disjoint index sets.
                            unsafe {
                                for (l, &o) in layout.offsets.iter().enumerate() {
                                    buf[l] = *p.add(base + o);
                                }
                                for (r, &o) in layout.offsets.iter().enumerate() {
                                    let mut acc = C0;
                                    for q in row_ptr[r]..row_ptr[r + 1] {
                                        acc += vals[q] * buf[cols[q]];
                                    }
                                    *p.add(base + o) = acc;
                                }
                            }
                        },
                    );
            }
        }
        Ok(())
    }

    /// Applies e^{−iθG} for a local term.
    pub fn apply_exp(&mut self, term: &LocalTerm, theta: f64) -> Result<()> {
        if term.support.is_empty() {
            let phase = Complex64::from_polar(1.0, -theta * term.generator[(0, 0)].re);
            self.amps.par_iter_mut().for_each(|a| *a *= phase);
            return Ok(());
        }
        self.apply_gate(&term.exp_gate(theta)?)
    }

    fn actions(&self, op: &OperatorSum) -> Result<Vec<MonomialAction>> {
        op.terms.iter().map(|t| MonomialAction::new(t, self.n_qudits)).collect()
    }

    /// ψ ← op·ψ without normalization.
    pub fn apply_operator(&mut self, op: &OperatorSum) -> Result<()> {
        let actions = self.actions(op)?;
        let src = &self.amps;
        let mut out = vec![C0; src.len()];
        out.par_chunks_mut(REDUCTION_CHUNK).enumerate().for_each(|(ci, block)| {
            let start = ci * REDUCTION_CHUNK;
            for (j, o) in block.iter_mut().enumerate() {
                let idx = start + j;
                let mut acc = C0;
                for a in &actions {
                    // the permutation is an involution: row idx is reached from column π(idx)
                    let (from, _) = a.apply(idx);
                    let (_, amp) = a.apply(from);
                    acc += amp * src[from];
                }
                *o = acc;
            }
        });
        self.amps = out;
        Ok(())
    }

    /// Applies (I + s_p G_p)/2 for every constraint in order, then renormalizes once.
    ///
    /// Returns the squared norm before renormalization.
    pub fn project_constraints(&mut self, constraints: &[Constraint]) -> Result<f64> {
        let mut scratch = vec![C0; self.amps.len()];
        for g in constraints {
            let action = MonomialAction::new(&g.op, self.n_qudits)?;
            let s = g.sign as f64;
            let src = &self.amps;
            scratch
                .par_chunks_mut(REDUCTION_CHUNK)
                .enumerate()
                .for_each(|(ci, block)| {
                    let start = ci * REDUCTION_CHUNK;
                    for (j, o) in block.iter_mut().enumerate() {
                        let idx = start + j;
                        let (from, _) = action.apply(idx);
                        let (_, amp) = action.apply(from);
                        *o = (src[idx] + amp * src[from] * s) * 0.5;
                    }
                });
            std::mem::swap(&mut self.amps, &mut scratch);
        }
        self.normalize()
    }

    /// ⟨ψ|op|ψ⟩ with a fixed reduction order.
    pub fn expectation(&self, op: &OperatorSum) -> Result<Complex64> {
        let actions = self.actions(op)?;
        let amps = &self.amps;
        Ok(chunked_sum_c(amps.len(), |r| {
            let mut acc = C0;
            for idx in r {
                let a = amps[idx];
                if a == C0 {
                    continue;
                }
                for act in &actions {
                    let (row, amp) = act.apply(idx);
                    acc += amps[row].conj() * amp * a;
                }
            }
            acc
        }))
    }

    /// Real expectation of a Hermitian operator; fails if the imaginary part exceeds 1e-10.
    pub fn expectation_real(&self, op: &OperatorSum) -> Result<f64> {
        let e = self.expectation(op)?;
        if e.im.abs() > 1e-10 {
            return Err(Error::NonHermitian(e.im.abs()));
        }
        Ok(e.re)
    }

    /// Expectations of several diagonal operators in one pass over the state.
    pub fn diagonal_expectations(&self, ops: &[OperatorSum]) -> Result<Vec<f64>> {
        let mut compiled = Vec::with_capacity(ops.len());
        for op in ops {
            let support = op.support();
            if support.is_empty() {
                let c = op.terms.iter().map(|t| t.coeff).sum::<Complex64>();
                compiled.push((None, vec![c.re]));
                continue;
            }
            let m = local_matrix(op, &support)?;
            let dim = m.nrows();
            if (0..dim).any(|r| (0..dim).any(|c| r != c && m[(r, c)] != C0)) {
                return Err(Error::Unsupported(format!("operator {} is not diagonal", op.pretty())));
            }
            if (0..dim).any(|i| m[(i, i)].im.abs() > 1e-12) {
                return Err(Error::NonHermitian(
                    (0..dim).map(|i| m[(i, i)].im.abs()).fold(0.0, f64::max),
                ));
            }
            let layout = Layout::new(self.n_qudits, &support)?;
            compiled.push((Some(layout), (0..dim).map(|i| m[(i, i)].re).collect()));
        }
        let amps = &self.amps;
        let n_ops = compiled.len();
        let partials: Vec<Vec<f64>> = amps
            .par_chunks(REDUCTION_CHUNK)
            .enumerate()
            .map(|(ci, block)| {
                let start = ci * REDUCTION_CHUNK;
                let mut acc = vec![0.0; n_ops];
                for (j, a) in block.iter().enumerate() {
                    let p = a.norm_sqr();
                    if p == 0.0 {
                        continue;
                    }
                    for (o, (layout, table)) in compiled.iter().enumerate() {
                        let v = match layout {
                            Some(l) => table[l.local_index(start + j)],
                            None => table[0],
                        };
                        acc[o] += p * v;
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![0.0; n_ops];
        for part in partials {
            for (t, v) in total.iter_mut().zip(part) {
                *t += v;
            }
        }
        Ok(total)
    }

    /// Little-endian interleaved (re, im) f64 bytes and the JSON sidecar.
    pub fn encode_snapshot(&self) -> Result<(Vec<u8>, String)> {
        let mut bytes = Vec::with_capacity(16 * self.amps.len());
        for a in &self.amps {
            bytes.extend_from_slice(&a.re.to_le_bytes());
            bytes.extend_from_slice(&a.im.to_le_bytes());
        }
        let meta = SnapshotMeta {
            n_qudits: self.n_qudits,
            ordering: ORDERING.to_string(),
        };
        Ok((bytes, serde_json::to_string_pretty(&meta)?))
    }

    pub fn decode_snapshot(bytes: &[u8], sidecar: &str) -> Result<Self> {
        let meta: SnapshotMeta = serde_json::from_str(sidecar)?;
        if meta.ordering != ORDERING {
            return Err(Error::Snapshot(format!("unsupported ordering `{}`", meta.ordering)));
        }
        if meta.n_qudits == 0 || meta.n_qudits > SNAPSHOT_QUDIT_CAP {
            return Err(Error::Snapshot(format!(
                "n_qudits must be in 1..={SNAPSHOT_QUDIT_CAP}, got {}",
                meta.n_qudits
            )));
        }
        let expected = 16usize << (2 * meta.n_qudits);
        if bytes.len() != expected {
            return Err(Error::Snapshot(format!(
                "expected {expected} bytes for {} qudits, got {}",
                meta.n_qudits,
                bytes.len()
            )));
        }
        let amps = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                if re.is_finite() && im.is_finite() {
                    Ok(Complex64::new(re, im))
                } else {
                    Err(Error::Snapshot("non-finite amplitude".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        QuditState::from_amplitudes(meta.n_qudits, amps)
    }

    /// Writes `<path>` (binary) and `<path>.json` (sidecar).
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let (bytes, meta) = self.encode_snapshot()?;
        fs::write(path, bytes)?;
        fs::write(sidecar_path(path), meta)?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let meta = fs::read_to_string(sidecar_path(path))?;
        Self::decode_snapshot(&bytes, &meta)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

fn chunk_ranges(len: usize) -> Vec<std::ops::Range<usize>> {
    (0..len.div_ceil(REDUCTION_CHUNK))
        .map(|c| c * REDUCTION_CHUNK..((c + 1) * REDUCTION_CHUNK).min(len))
        .collect()
}

/// Sum of per-chunk partials, added in chunk order.
fn chunked_sum(len: usize, f: impl Fn(std::ops::Range<usize>) -> f64 + Sync) -> f64 {
    let parts: Vec<f64> = chunk_ranges(len).into_par_iter().map(&f).collect();
    parts.into_iter().sum()
}

fn chunked_sum_c(len: usize, f: impl Fn(std::ops::Range<usize>) -> Complex64 + Sync) -> Complex64 {
    let parts: Vec<Complex64> = chunk_ranges(len).into_par_iter().map(&f).collect();
    parts.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma_algebra::{to_dense, SiteFactor};
    use crate::linalg::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> QuditState {
        let amps = (0..1usize << (2 * n))
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut s = QuditState::from_amplitudes(n, amps).unwrap();
        s.normalize().unwrap();
        s
    }

    fn random_matrix(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    /// Embeds a local matrix into the full register by permuting tensor factors.
    fn embed(n: usize, support: &[usize], m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let dim = 1usize << (2 * n);
        let layout = Layout::new(n, support).unwrap();
        let mut full = DMatrix::from_element(dim, dim, C0);
        for col in 0..dim {
            let lc = layout.local_index(col);
            let rest = col & !layout.offsets[layout.offsets.len() - 1];
            for lr in 0..m.nrows() {
                full[(rest | layout.offsets[lr], col)] += m[(lr, lc)];
            }
        }
        full
    }

    #[test]
    fn zero_state_and_budget() {
        let s = QuditState::zero(1, DEFAULT_BUDGET).unwrap();
        assert_eq!(s.amplitudes(), &[C1, C0, C0, C0]);
        assert_eq!(QuditState::zero(6, DEFAULT_BUDGET).unwrap().dim(), 4096);
        assert!(matches!(
            QuditState::zero(13, DEFAULT_BUDGET),
            Err(Error::MemoryBudget { n_qudits: 13, .. })
        ));
        check_budget(12, DEFAULT_BUDGET).unwrap();
    }

    #[test]
    fn kernel_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=5 {
            for k in 1..=n.min(4) {
                let mut qudits: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    qudits.swap(i, rng.random_range(0..=i));
                }
                let support = &qudits[..k];
                let m = random_matrix(1 << (2 * k), &mut rng);
                let psi = random_state(n, &mut rng);
                let mut out = psi.clone();
                out.apply_local(support, &m).unwrap();
                let full = embed(n, support, &m);
                let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
                let expected = &full * v;
                let dev = out
                    .amplitudes()
                    .iter()
                    .zip(expected.iter())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(dev < 1e-12, "n={n} k={k} support={support:?} dev={dev}");
            }
        }
    }

    #[test]
    fn embedding_agrees_with_kronecker_for_monomials() {
        let m = QuditMonomial::new(C1, &[(0, SiteFactor::G1), (2, SiteFactor::G4)]);
        let local = monomial_local_matrix(&m, &[0, 2]).unwrap();
        let full = to_dense(&m.clone().into(), 3).unwrap();
        assert!(max_abs_diff(&embed(3, &[0, 2], &local), &full) < 1e-15);
        let swapped = monomial_local_matrix(&m, &[2, 0]).unwrap();
        assert!(max_abs_diff(&embed(3, &[2, 0], &swapped), &full) < 1e-15);
    }

    #[test]
    fn identity_and_gamma_tilde_leave_states_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_state(3, &mut rng);
        let mut out = psi.clone();
        out.apply_local(&[1, 2], &DMatrix::identity(16, 16)).unwrap();
        assert_eq!(out, psi);
        let mut zero = QuditState::zero(2, DEFAULT_BUDGET).unwrap();
        let t = SiteFactor::TILDE.matrix();
        zero.apply_local(&[0], &DMatrix::from_fn(4, 4, |r, c| t[(r, c)]))
            .unwrap();
        assert_eq!(zero, QuditState::zero(2, DEFAULT_BUDGET).unwrap());
    }

    #[test]
    fn invalid_supports_are_rejected() {
        let mut s = QuditState::zero(3, DEFAULT_BUDGET).unwrap();
        let m = DMatrix::identity(16, 16);
        assert!(matches!(s.apply_local(&[1, 1], &m), Err(Error::InvalidSupport(_))));
        assert!(matches!(s.apply_local(&[0], &m), Err(Error::MatrixShape { .. })));
        assert!(matches!(s.apply_local(&[0, 5], &m), Err(Error::QuditOutOfRange { .. })));
    }

    #[test]
    fn exp_forms_match_dense_expm() {
        let tt = OperatorSum::from(QuditMonomial::new(
            C1,
            &[(0, SiteFactor::TILDE), (1, SiteFactor::TILDE)],
        ));
        let term = LocalTerm::from_operator(&tt).unwrap();
        assert!(term.involutory);
        for theta in [0.0, 0.3, std::f64::consts::PI] {
            let u = term.exp_matrix(theta).unwrap();
            let e = expm_hermitian(&term.generator, theta).unwrap();
            assert!(max_abs_diff(&u, &e) < 1e-12);
        }
        let t1 = SiteFactor::tilde_times(1).unwrap();
        let t2 = SiteFactor::tilde_times(2).unwrap();
        let hop = OperatorSum::from_terms(vec![
            QuditMonomial::new(Complex64::new(0.0, -0.5), &[(0, t1), (1, SiteFactor::G2)]),
            QuditMonomial::new(Complex64::new(0.0, 0.5), &[(0, SiteFactor::G1), (1, t2)]),
            QuditMonomial::scalar(Complex64::new(0.25, 0.0)),
        ]);
        let term = LocalTerm::from_operator(&hop).unwrap();
        let mut generic = term.clone();
        generic.monomials.clear();
        for theta in [0.1, -0.7, 2.0] {
            let a = term.exp_matrix(theta).unwrap();
            let b = generic.exp_matrix(theta).unwrap();
            assert!(max_abs_diff(&a, &b) < 1e-12);
        }
        assert!(LocalTerm::new(
            vec![0],
            DMatrix::from_fn(4, 4, |r, c| Complex64::new(r as f64, c as f64))
        )
        .is_err());
    }

    #[test]
    fn exp_roundtrip_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random_state(4, &mut rng);
        let raw = random_matrix(16, &mut rng);
        let herm = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
        let term = LocalTerm::new(vec![3, 1], herm).unwrap();
        let mut out = psi.clone();
        out.apply_exp(&term, 0.37).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        out.apply_exp(&term, -0.37).unwrap();
        let dev = out
            .amplitudes()
            .iter()
            .zip(psi.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12);
    }

    #[test]
    fn operator_application_and_expectation_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let op = OperatorSum::from_terms(vec![
            QuditMonomial::new(Complex64::new(0.3, 0.1), &[(0, SiteFactor::G1), (2, SiteFactor::G3)]),
            QuditMonomial::new(Complex64::new(-1.0, 0.0), &[(1, SiteFactor::tilde_times(4).unwrap())]),
            QuditMonomial::scalar(Complex64::new(0.5, 0.0)),
        ]);
        let dense = to_dense(&op, 3).unwrap();
        let psi = random_state(3, &mut rng);
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let expected = &dense * &v;
        let mut out = psi.clone();
        out.apply_operator(&op).unwrap();
        for (a, b) in out.amplitudes().iter().zip(expected.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        let e = psi.expectation(&op).unwrap();
        let e_dense = v.adjoint() * &expected;
        assert!((e - e_dense[(0, 0)]).norm() < 1e-12);
    }

    #[test]
    fn diagonal_expectations_match_generic_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = random_state(3, &mut rng);
        let ops: Vec<OperatorSum> = (0..3)
            .map(|q| {
                OperatorSum::from_terms(vec![
                    QuditMonomial::scalar(Complex64::new(0.5, 0.0)),
                    QuditMonomial::new(Complex64::new(-0.5, 0.0), &[(q, SiteFactor::TILDE)]),
                ])
            })
            .chain([OperatorSum::from(QuditMonomial::new(
                Complex64::new(0.0, 1.0),
                &[(1, SiteFactor::pair(1, 2).unwrap())],
            ))])
            .collect();
        let fast = psi.diagonal_expectations(&ops).unwrap();
        for (op, f) in ops.iter().zip(fast) {
            assert!((psi.expectation_real(op).unwrap() - f).abs() < 1e-12);
        }
        let off = OperatorSum::from(QuditMonomial::single(0, SiteFactor::G1));
        assert!(psi.diagonal_expectations(&[off]).is_err());
    }

    #[test]
    fn snapshot_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let psi = random_state(2, &mut rng);
        let (bytes, meta) = psi.encode_snapshot().unwrap();
        assert_eq!(bytes.len(), 16 * 16);
        assert_eq!(QuditState::decode_snapshot(&bytes, &meta).unwrap(), psi);
        assert!(QuditState::decode_snapshot(&bytes[1..], &meta).is_err());
        let bad = meta.replace(ORDERING, "little");
        assert!(QuditState::decode_snapshot(&bytes, &bad).is_err());
        let dir = std::env::temp_dir().join(format!("ququart-snap-{}", std::process::id()));
        psi.write_snapshot(&dir).unwrap();
        assert_eq!(QuditState::read_snapshot(&dir).unwrap(), psi);
        let _ = fs::remove_file(&dir);
        let _ = fs::remove_file(sidecar_path(&dir));
    }
}
