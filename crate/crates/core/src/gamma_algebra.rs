//! Single-ququart Γ operators and tensor-product monomials over many ququarts.
//!
//! The sixteen products of the four Euclidean Dirac matrices form a basis of
//! all 4×4 matrices. Each basis element is addressed by a 4-bit mask over
//! (Γ1, Γ2, Γ3, Γ4) and carries a fixed phase relative to the ascending
//! product of its generators, so that the labels match the usual names
//! `Γμ`, `Γμν = ΓμΓν`, `Γ̃μ = Γ̃Γμ` and `Γ̃ = −Γ1Γ2Γ3Γ4`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Coefficients with modulus below this value are treated as exact zeros.
pub const ZERO_SNAP: f64 = 1e-12;

/// Largest qudit count accepted by [`to_dense`].
pub const DENSE_CAP: usize = 7;

pub(crate) const C0: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const C1: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const CI: Complex64 = Complex64::new(0.0, 1.0);

/// Generator index accepted by [`gamma`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GammaIndex {
    G1,
    G2,
    G3,
    G4,
    Tilde,
}

impl GammaIndex {
    /// Maps 1..=4 to Γ1..Γ4 and 5 to Γ̃.
    pub fn from_index(mu: u8) -> Result<Self> {
        match mu {
            1 => Ok(GammaIndex::G1),
            2 => Ok(GammaIndex::G2),
            3 => Ok(GammaIndex::G3),
            4 => Ok(GammaIndex::G4),
            5 => Ok(GammaIndex::Tilde),
            _ => Err(Error::InvalidGammaIndex(mu.to_string())),
        }
    }
}

/// One of the sixteen canonical Γ-words acting on a single ququart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteFactor(u8);

/// Single generator Γμ or Γ̃.
pub fn gamma(mu: GammaIndex) -> SiteFactor {
    match mu {
        GammaIndex::G1 => SiteFactor::G1,
        GammaIndex::G2 => SiteFactor::G2,
        GammaIndex::G3 => SiteFactor::G3,
        GammaIndex::G4 => SiteFactor::G4,
        GammaIndex::Tilde => SiteFactor::TILDE,
    }
}

fn pauli(k: u8) -> [[Complex64; 2]; 2] {
    match k {
        0 => [[C1, C0], [C0, C1]],
        1 => [[C0, C1], [C1, C0]],
        2 => [[C0, -CI], [CI, C0]],
        _ => [[C1, C0], [C0, -C1]],
    }
}

/// σ_a ⊗ σ_b with the first factor acting on the most significant bit.
pub(crate) fn pauli_pair(a: u8, b: u8) -> Matrix4<Complex64> {
    let pa = pauli(a);
    let pb = pauli(b);
    Matrix4::from_fn(|r, c| pa[r >> 1][c >> 1] * pb[r & 1][c & 1])
}

fn generator_matrix(bit: u8) -> Matrix4<Complex64> {
    match bit {
        0 => pauli_pair(1, 0),
        1 => pauli_pair(2, 0),
        2 => pauli_pair(3, 1),
        _ => pauli_pair(3, 2),
    }
}

/// Phase φ with E_mask = φ · (ascending product of the generators in mask).
fn basis_phase(mask: u8) -> i8 {
    match mask.count_ones() {
        0..=2 => 1,
        4 => -1,
        _ => {
            let missing = (!mask & 0xf).trailing_zeros() as i32;
            // Γ̃Γμ = −(Γ1Γ2Γ3Γ4)Γμ = −(−1)^{3−μ} · ascending word without μ
            if (3 - missing) % 2 == 0 {
                -1
            } else {
                1
            }
        }
    }
}

/// Sign of moving the generators of `b` through those of `a` in P_a · P_b.
fn reorder_sign(a: u8, b: u8) -> i8 {
    let mut swaps = 0u32;
    for j in 0..4 {
        if b & (1 << j) != 0 {
            swaps += (a >> (j + 1)).count_ones();
        }
    }
    if swaps.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

const ASCII_LABELS: [&str; 16] = [
    "I", "G1", "G2", "G12", "G3", "G13", "G23", "Gt4", "G4", "G14", "G24", "Gt3", "G34", "Gt2", "Gt1", "Gt",
];

const UNICODE_LABELS: [&str; 16] = [
    "I", "Γ1", "Γ2", "Γ12", "Γ3", "Γ13", "Γ23", "Γ̃4", "Γ4", "Γ14", "Γ24", "Γ̃3", "Γ34", "Γ̃2", "Γ̃1", "Γ̃",
];

impl SiteFactor {
    pub const IDENTITY: SiteFactor = SiteFactor(0);
    pub const G1: SiteFactor = SiteFactor(0b0001);
    pub const G2: SiteFactor = SiteFactor(0b0010);
    pub const G3: SiteFactor = SiteFactor(0b0100);
    pub const G4: SiteFactor = SiteFactor(0b1000);
    pub const TILDE: SiteFactor = SiteFactor(0b1111);

    /// All sixteen basis elements in mask order.
    pub fn all() -> impl Iterator<Item = SiteFactor> {
        (0u8..16).map(SiteFactor)
    }

    /// Builds a factor from its generator mask (bit μ−1 set for Γμ).
    pub fn from_mask(mask: u8) -> Result<Self> {
        if mask < 16 {
            Ok(SiteFactor(mask))
        } else {
            Err(Error::InvalidGammaIndex(format!("mask {mask}")))
        }
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn is_identity(self) -> bool {
        self.0 == 0
    }

    /// Γμν = ΓμΓν for μ < ν.
    pub fn pair(mu: u8, nu: u8) -> Result<Self> {
        let (a, b) = Self::checked_pair(mu, nu)?;
        Ok(SiteFactor((1 << (a - 1)) | (1 << (b - 1))))
    }

    /// Γ̃μ = Γ̃Γμ.
    pub fn tilde_times(mu: u8) -> Result<Self> {
        if !(1..=4).contains(&mu) {
            return Err(Error::InvalidGammaIndex(mu.to_string()));
        }
        Ok(SiteFactor(0b1111 ^ (1 << (mu - 1))))
    }

    fn checked_pair(mu: u8, nu: u8) -> Result<(u8, u8)> {
        if !(1..=4).contains(&mu) || !(1..=4).contains(&nu) || mu >= nu {
            return Err(Error::InvalidGammaIndex(format!("{mu}{nu}")));
        }
        Ok((mu, nu))
    }

    /// Exact product `self · other = sign · result`, sign ∈ {±1}.
    pub fn mul_signed(self, other: SiteFactor) -> (i8, SiteFactor) {
        let (a, b) = (self.0, other.0);
        let c = a ^ b;
        let sign = basis_phase(a) * basis_phase(b) * basis_phase(c) * reorder_sign(a, b);
        (sign, SiteFactor(c))
    }

    /// `self† = sign · self`.
    pub fn adjoint_sign(self) -> i8 {
        match self.0.count_ones() {
            2 | 3 => -1,
            _ => 1,
        }
    }

    pub fn is_hermitian(self) -> bool {
        self.adjoint_sign() == 1
    }

    /// +1 if the two factors commute, −1 if they anticommute.
    pub fn commutation_sign(self, other: SiteFactor) -> i8 {
        let (s1, _) = self.mul_signed(other);
        let (s2, _) = other.mul_signed(self);
        s1 * s2
    }

    /// True when the matrix is diagonal in the computational basis.
    pub fn is_diagonal(self) -> bool {
        // Γ̃ = σz⊗σz, Γ12 = iσz⊗I, Γ34 = iI⊗σz and their products
        matches!(self.0, 0b0000 | 0b1111 | 0b0011 | 0b1100)
    }

    /// Dense 4×4 matrix with Γ1 = σx⊗I, Γ2 = σy⊗I, Γ3 = σz⊗σx, Γ4 = σz⊗σy.
    pub fn matrix(self) -> Matrix4<Complex64> {
        let mut m = Matrix4::<Complex64>::identity();
        for bit in 0..4 {
            if self.0 & (1 << bit) != 0 {
                m *= generator_matrix(bit);
            }
        }
        if basis_phase(self.0) < 0 {
            m = -m;
        }
        m
    }

    /// Phased-permutation form: column `c` maps to row `perm[c]` with `phase[c]`.
    pub fn action(self) -> ([usize; 4], [Complex64; 4]) {
        let m = self.matrix();
        let mut perm = [0usize; 4];
        let mut phase = [C0; 4];
        for c in 0..4 {
            for r in 0..4 {
                if m[(r, c)].norm() > 0.5 {
                    perm[c] = r;
                    phase[c] = m[(r, c)];
                }
            }
        }
        (perm, phase)
    }

    /// Decomposes a matrix proportional to a basis element: m = coeff · F.
    pub fn from_matrix(m: &Matrix4<Complex64>) -> Option<(Complex64, SiteFactor)> {
        let scale = (m.adjoint() * m).trace().re / 4.0;
        if scale <= ZERO_SNAP {
            return None;
        }
        for f in SiteFactor::all() {
            let fm = f.matrix();
            let coeff = (fm.adjoint() * m).trace() / 4.0;
            if (coeff.norm_sqr() - scale).abs() <= 1e-9 * scale.max(1.0)
                && (m - fm * coeff).norm() <= 1e-9 * scale.sqrt().max(1.0)
            {
                return Some((coeff, f));
            }
        }
        None
    }

    pub fn ascii_label(self) -> &'static str {
        ASCII_LABELS[self.0 as usize]
    }

    /// Parses either the ASCII (`G13`, `Gt2`, `Gt`) or the Unicode (`Γ13`, `Γ̃2`, `Γ̃`) label.
    pub fn from_label(label: &str) -> Result<Self> {
        ASCII_LABELS
            .iter()
            .position(|l| *l == label)
            .or_else(|| UNICODE_LABELS.iter().position(|l| *l == label))
            .map(|i| SiteFactor(i as u8))
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }
}

impl fmt::Display for SiteFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(UNICODE_LABELS[self.0 as usize])
    }
}

impl Serialize for SiteFactor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.ascii_label())
    }
}

impl<'de> Deserialize<'de> for SiteFactor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SiteFactor::from_label(&s).map_err(serde::de::Error::custom)
    }
}

fn snap(c: Complex64) -> Complex64 {
    let re = if c.re.abs() < ZERO_SNAP { 0.0 } else { c.re };
    let im = if c.im.abs() < ZERO_SNAP { 0.0 } else { c.im };
    Complex64::new(re, im)
}

fn sign_c(s: i8) -> Complex64 {
    Complex64::new(s as f64, 0.0)
}

/// Scalar times a tensor product of site factors; absent qudits carry the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuditMonomial {
    #[serde(with = "complex_pair")]
    pub coeff: Complex64,
    #[serde(with = "factor_list")]
    pub factors: BTreeMap<usize, SiteFactor>,
}

impl QuditMonomial {
    pub fn identity() -> Self {
        Self::scalar(C1)
    }

    pub fn scalar(coeff: Complex64) -> Self {
        QuditMonomial {
            coeff,
            factors: BTreeMap::new(),
        }
    }

    pub fn single(qudit: usize, factor: SiteFactor) -> Self {
        Self::scalar(C1).with(qudit, factor)
    }

    /// Builds `coeff · ∏ factors`, multiplying repeated qudits left to right.
    pub fn new(coeff: Complex64, factors: &[(usize, SiteFactor)]) -> Self {
        let mut m = Self::scalar(coeff);
        for &(q, f) in factors {
            m = m.with(q, f);
        }
        m
    }

    /// Right-multiplies by `factor` on `qudit`.
    pub fn with(mut self, qudit: usize, factor: SiteFactor) -> Self {
        let current = self.factors.remove(&qudit).unwrap_or(SiteFactor::IDENTITY);
        let (s, f) = current.mul_signed(factor);
        self.coeff *= sign_c(s);
        if !f.is_identity() {
            self.factors.insert(qudit, f);
        }
        self
    }

    pub fn scaled(mut self, c: Complex64) -> Self {
        self.coeff *= c;
        self
    }

    pub fn weight(&self) -> usize {
        self.factors.len()
    }

    pub fn support(&self) -> Vec<usize> {
        self.factors.keys().copied().collect()
    }

    pub fn factor(&self, qudit: usize) -> SiteFactor {
        self.factors.get(&qudit).copied().unwrap_or(SiteFactor::IDENTITY)
    }

    pub fn max_qudit(&self) -> Option<usize> {
        self.factors.keys().next_back().copied()
    }

    /// Factor-wise product with exact sign tracking.
    pub fn product(&self, other: &QuditMonomial) -> QuditMonomial {
        let mut out = self.clone();
        out.coeff *= other.coeff;
        for (&q, &f) in &other.factors {
            out = out.with(q, f);
        }
        out.coeff = snap(out.coeff);
        out
    }

    pub fn adjoint(&self) -> QuditMonomial {
        let sign: i8 = self.factors.values().map(|f| f.adjoint_sign()).product();
        QuditMonomial {
            coeff: self.coeff.conj() * sign_c(sign),
            factors: self.factors.clone(),
        }
    }

    /// +1 if the Γ-words commute, −1 if they anticommute (coefficients ignored).
    pub fn commutation_sign(&self, other: &QuditMonomial) -> i8 {
        let mut sign = 1;
        for (q, f) in &self.factors {
            if let Some(g) = other.factors.get(q) {
                sign *= f.commutation_sign(*g);
            }
        }
        sign
    }

    /// True when the Γ-word squares to the identity.
    pub fn word_is_involutory(&self) -> bool {
        let word = QuditMonomial {
            coeff: C1,
            factors: self.factors.clone(),
        };
        let sq = word.product(&word);
        sq.factors.is_empty() && (sq.coeff - C1).norm() < ZERO_SNAP
    }

    pub fn is_diagonal(&self) -> bool {
        self.factors.values().all(|f| f.is_diagonal())
    }

    fn key(&self) -> Vec<(usize, u8)> {
        self.factors.iter().map(|(&q, f)| (q, f.mask())).collect()
    }

    /// Human-readable form such as `(0+1i)·Γ1_0 Γ̃2_3`.
    pub fn pretty(&self) -> String {
        let mut s = format_complex(self.coeff);
        if self.factors.is_empty() {
            s.push_str("·I");
        }
        for (i, (q, f)) in self.factors.iter().enumerate() {
            s.push_str(if i == 0 { "·" } else { " " });
            s.push_str(&format!("{f}_{q}"));
        }
        s
    }
}

fn format_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.re == 0.0 {
        format!("{}i", c.im)
    } else {
        format!("({}{:+}i)", c.re, c.im)
    }
}

impl Mul for &QuditMonomial {
    type Output = QuditMonomial;
    fn mul(self, rhs: &QuditMonomial) -> QuditMonomial {
        self.product(rhs)
    }
}

/// Free-function form of [`QuditMonomial::product`].
pub fn monomial_product(a: &QuditMonomial, b: &QuditMonomial) -> QuditMonomial {
    a.product(b)
}

/// Number of non-identity factors.
pub fn weight(m: &QuditMonomial) -> usize {
    m.weight()
}

/// Finite sum of monomials.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OperatorSum {
    pub terms: Vec<QuditMonomial>,
}

type SiteMap = BTreeMap<usize, SiteFactor>;

impl OperatorSum {
    pub fn zero() -> Self {
        OperatorSum { terms: Vec::new() }
    }

    pub fn identity() -> Self {
        QuditMonomial::identity().into()
    }

    pub fn scalar(c: Complex64) -> Self {
        QuditMonomial::scalar(c).into()
    }

    pub fn from_terms(terms: Vec<QuditMonomial>) -> Self {
        OperatorSum { terms }.canonical()
    }

    /// Merges identical Γ-words, snaps tiny coefficients to zero and sorts terms.
    pub fn canonical(&self) -> Self {
        let mut merged: BTreeMap<Vec<(usize, u8)>, (Complex64, SiteMap)> = BTreeMap::new();
        for t in &self.terms {
            merged
                .entry(t.key())
                .and_modify(|e| e.0 += t.coeff)
                .or_insert((t.coeff, t.factors.clone()));
        }
        let terms = merged
            .into_values()
            .filter_map(|(c, factors)| {
                let c = snap(c);
                (c.norm() > ZERO_SNAP).then_some(QuditMonomial { coeff: c, factors })
            })
            .collect();
        OperatorSum { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.canonical().terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        OperatorSum {
            terms: self.terms.iter().map(|t| t.clone().scaled(c)).collect(),
        }
        .canonical()
    }

    pub fn product(&self, other: &OperatorSum) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(a.product(b));
            }
        }
        OperatorSum { terms }.canonical()
    }

    pub fn adjoint(&self) -> Self {
        OperatorSum {
            terms: self.terms.iter().map(|t| t.adjoint()).collect(),
        }
        .canonical()
    }

    pub fn is_hermitian(&self) -> bool {
        (self - &self.adjoint()).is_zero()
    }

    /// Largest weight among the terms.
    pub fn weight(&self) -> usize {
        self.terms.iter().map(|t| t.weight()).max().unwrap_or(0)
    }

    pub fn max_qudit(&self) -> Option<usize> {
        self.terms.iter().filter_map(|t| t.max_qudit()).max()
    }

    /// Sorted union of the supports of all terms.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.terms.iter().flat_map(|t| t.support()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn pretty(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        self.terms.iter().map(|t| t.pretty()).collect::<Vec<_>>().join(" + ")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str::<OperatorSum>(s)?.canonical())
    }
}

impl From<QuditMonomial> for OperatorSum {
    fn from(m: QuditMonomial) -> Self {
        OperatorSum { terms: vec![m] }.canonical()
    }
}

impl Add for &OperatorSum {
    type Output = OperatorSum;
    fn add(self, rhs: &OperatorSum) -> OperatorSum {
        let mut terms = self.terms.clone();
        terms.extend(rhs.terms.iter().cloned());
        OperatorSum { terms }.canonical()
    }
}

impl Sub for &OperatorSum {
    type Output = OperatorSum;
    fn sub(self, rhs: &OperatorSum) -> OperatorSum {
        self + &(-rhs)
    }
}

impl Neg for &OperatorSum {
    type Output = OperatorSum;
    fn neg(self) -> OperatorSum {
        self.scaled(-C1)
    }
}

impl Mul for &OperatorSum {
    type Output = OperatorSum;
    fn mul(self, rhs: &OperatorSum) -> OperatorSum {
        self.product(rhs)
    }
}

/// ab − ba, canonicalized.
pub fn commutator(a: &OperatorSum, b: &OperatorSum) -> OperatorSum {
    &(a * b) - &(b * a)
}

/// ab + ba, canonicalized.
pub fn anticommutator(a: &OperatorSum, b: &OperatorSum) -> OperatorSum {
    &(a * b) + &(b * a)
}

fn check_qudits(max: Option<usize>, n_qudits: usize) -> Result<()> {
    match max {
        Some(q) if q >= n_qudits => Err(Error::QuditOutOfRange { qudit: q, n_qudits }),
        _ => Ok(()),
    }
}

/// Dense Kronecker expansion of a monomial on `n_qudits` ququarts.
pub fn monomial_to_dense(m: &QuditMonomial, n_qudits: usize) -> Result<DMatrix<Complex64>> {
    if n_qudits > DENSE_CAP {
        return Err(Error::DenseCapExceeded {
            n_qudits,
            cap: DENSE_CAP,
        });
    }
    check_qudits(m.max_qudit(), n_qudits)?;
    let mut out = DMatrix::from_element(1, 1, m.coeff);
    for q in 0..n_qudits {
        let f = m.factor(q).matrix();
        let f = DMatrix::from_fn(4, 4, |r, c| f[(r, c)]);
        out = out.kronecker(&f);
    }
    Ok(out)
}

/// Dense Kronecker expansion; qudit 0 is the most significant tensor factor.
pub fn to_dense(op: &OperatorSum, n_qudits: usize) -> Result<DMatrix<Complex64>> {
    if n_qudits > DENSE_CAP {
        return Err(Error::DenseCapExceeded {
            n_qudits,
            cap: DENSE_CAP,
        });
    }
    let dim = 1usize << (2 * n_qudits);
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for t in &op.terms {
        out += monomial_to_dense(t, n_qudits)?;
    }
    Ok(out)
}

/// A monomial compiled to its action on computational basis indices of `n_qudits` ququarts.
///
/// Every Γ-word is a phased permutation matrix whose permutation is an
/// involution, so the same table serves for gathers and scatters.
#[derive(Clone, Debug)]
pub struct MonomialAction {
    pub coeff: Complex64,
    ops: Vec<(usize, [usize; 4], [Complex64; 4])>,
}

impl MonomialAction {
    pub fn new(m: &QuditMonomial, n_qudits: usize) -> Result<Self> {
        check_qudits(m.max_qudit(), n_qudits)?;
        let ops = m
            .factors
            .iter()
            .map(|(&q, f)| {
                let (perm, phase) = f.action();
                (2 * (n_qudits - 1 - q), perm, phase)
            })
            .collect();
        Ok(MonomialAction { coeff: m.coeff, ops })
    }

    /// M|col⟩ = amplitude · |row⟩, returned as (row, amplitude).
    #[inline]
    pub fn apply(&self, col: usize) -> (usize, Complex64) {
        let mut row = col;
        let mut amp = self.coeff;
        for (shift, perm, phase) in &self.ops {
            let d = (col >> shift) & 3;
            row = (row & !(3 << shift)) | (perm[d] << shift);
            amp *= phase[d];
        }
        (row, amp)
    }

    pub fn is_diagonal(&self) -> bool {
        self.ops.iter().all(|(_, perm, _)| *perm == [0, 1, 2, 3])
    }
}

/// Sparse form of a monomial: one nonzero per column.
pub fn monomial_to_sparse(m: &QuditMonomial, n_qudits: usize) -> Result<SparseMatrix> {
    let action = MonomialAction::new(m, n_qudits)?;
    let dim = 1usize << (2 * n_qudits);
    let triplets = (0..dim).map(|col| {
        let (row, amp) = action.apply(col);
        (row, col, amp)
    });
    Ok(SparseMatrix::from_triplets(dim, dim, triplets))
}

/// Sparse matrix of an operator sum on `n_qudits` ququarts.
pub fn to_sparse(op: &OperatorSum, n_qudits: usize) -> Result<SparseMatrix> {
    let dim = 1usize << (2 * n_qudits);
    let mut out = SparseMatrix::zeros(dim, dim);
    for t in &op.terms {
        out = out.add(&monomial_to_sparse(t, n_qudits)?);
    }
    Ok(out)
}

pub(crate) mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

mod factor_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::SiteFactor;

    pub fn serialize<S: Serializer>(m: &BTreeMap<usize, SiteFactor>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, SiteFactor>, D::Error> {
        let pairs = Vec::<(usize, SiteFactor)>::deserialize(d)?;
        let mut out = BTreeMap::new();
        for (q, f) in pairs {
            if f.is_identity() {
                continue;
            }
            if out.insert(q, f).is_some() {
                return Err(serde::de::Error::custom(format!("qudit {q} listed twice")));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_eq(a: &Matrix4<Complex64>, b: &Matrix4<Complex64>) -> bool {
        (a - b).norm() < 1e-14
    }

    #[test]
    fn generator_matrices() {
        assert!(dense_eq(&SiteFactor::G1.matrix(), &pauli_pair(1, 0)));
        assert!(dense_eq(&SiteFactor::G2.matrix(), &pauli_pair(2, 0)));
        assert!(dense_eq(&SiteFactor::G3.matrix(), &pauli_pair(3, 1)));
        assert!(dense_eq(&SiteFactor::G4.matrix(), &pauli_pair(3, 2)));
        let t = gamma(GammaIndex::Tilde).matrix();
        let diag = Matrix4::from_diagonal(&nalgebra::Vector4::new(C1, -C1, -C1, C1));
        assert!(dense_eq(&t, &diag));
    }

    #[test]
    fn tilde_is_minus_product_of_generators() {
        let p = generator_matrix(0) * generator_matrix(1) * generator_matrix(2) * generator_matrix(3);
        assert!(dense_eq(&SiteFactor::TILDE.matrix(), &(-p)));
        let m = QuditMonomial::new(
            C1,
            &[
                (0, SiteFactor::G1),
                (0, SiteFactor::G2),
                (0, SiteFactor::G3),
                (0, SiteFactor::G4),
            ],
        )
        .scaled(-C1);
        assert_eq!(m.factor(0), SiteFactor::TILDE);
        assert_eq!(m.coeff, C1);
    }

    #[test]
    fn clifford_relations() {
        let gens = [SiteFactor::G1, SiteFactor::G2, SiteFactor::G3, SiteFactor::G4];
        for (i, a) in gens.iter().enumerate() {
            for (j, b) in gens.iter().enumerate() {
                let anti = a.matrix() * b.matrix() + b.matrix() * a.matrix();
                let expected = if i == j {
                    Matrix4::identity() * Complex64::new(2.0, 0.0)
                } else {
                    Matrix4::zeros()
                };
                assert!(dense_eq(&anti, &expected));
            }
            assert_eq!(a.commutation_sign(SiteFactor::TILDE), -1);
        }
    }

    #[test]
    fn symbolic_products_match_dense_products() {
        for a in SiteFactor::all() {
            for b in SiteFactor::all() {
                let (s, c) = a.mul_signed(b);
                let dense = a.matrix() * b.matrix();
                let (coeff, f) = SiteFactor::from_matrix(&dense).unwrap();
                assert_eq!(f, c, "{a}·{b}");
                assert!((coeff - sign_c(s)).norm() < 1e-14, "{a}·{b}");
            }
        }
    }

    #[test]
    fn adjoint_signs_match_dense() {
        for f in SiteFactor::all() {
            let m = f.matrix();
            assert!(dense_eq(&m.adjoint(), &(m * sign_c(f.adjoint_sign()))));
            assert!(dense_eq(&(m * m.adjoint()), &Matrix4::identity()));
        }
    }

    #[test]
    fn named_products() {
        let m = QuditMonomial::new(C1, &[(0, SiteFactor::G1), (0, SiteFactor::G2)]);
        assert_eq!(m.factor(0), SiteFactor::pair(1, 2).unwrap());
        assert_eq!(m.coeff, C1);
        let t1 = QuditMonomial::new(C1, &[(0, SiteFactor::TILDE), (0, SiteFactor::G1)]);
        assert_eq!(t1.factor(0), SiteFactor::tilde_times(1).unwrap());
        assert_eq!(t1.coeff, C1);
        let disjoint = QuditMonomial::single(0, SiteFactor::G1).product(&QuditMonomial::single(1, SiteFactor::G2));
        assert_eq!(disjoint.weight(), 2);
    }

    #[test]
    fn diagonal_flags_match_matrices() {
        for f in SiteFactor::all() {
            let m = f.matrix();
            let off: f64 = (0..4)
                .flat_map(|r| (0..4).map(move |c| (r, c)))
                .filter(|(r, c)| r != c)
                .map(|(r, c)| m[(r, c)].norm())
                .sum();
            assert_eq!(f.is_diagonal(), off == 0.0, "{f}");
        }
    }

    #[test]
    fn commutators_of_basic_operators() {
        let t0: OperatorSum = QuditMonomial::single(0, SiteFactor::TILDE).into();
        let t1: OperatorSum = QuditMonomial::single(1, SiteFactor::TILDE).into();
        let g0: OperatorSum = QuditMonomial::single(0, SiteFactor::G1).into();
        assert!(commutator(&t0, &t1).is_empty());
        assert!(anticommutator(&g0, &t0).is_empty());
        assert!(!commutator(&g0, &t0).is_empty());
    }

    #[test]
    fn labels_round_trip() {
        for f in SiteFactor::all() {
            assert_eq!(SiteFactor::from_label(f.ascii_label()).unwrap(), f);
            assert_eq!(SiteFactor::from_label(&f.to_string()).unwrap(), f);
        }
        assert!(SiteFactor::from_label("G5").is_err());
        assert!(GammaIndex::from_index(0).is_err());
    }

    #[test]
    fn dense_expansion_small_cases() {
        let id = to_dense(&OperatorSum::identity(), 2).unwrap();
        assert_eq!(id, DMatrix::identity(16, 16));
        let t = to_dense(&QuditMonomial::single(0, SiteFactor::TILDE).into(), 1).unwrap();
        assert_eq!(t[(1, 1)], -C1);
        assert_eq!(t[(3, 3)], C1);
        assert!(to_dense(&OperatorSum::identity(), DENSE_CAP + 1).is_err());
    }

    #[test]
    fn sparse_matches_dense() {
        let m = QuditMonomial::new(
            Complex64::new(0.5, -0.25),
            &[(0, SiteFactor::G2), (2, SiteFactor::tilde_times(3).unwrap())],
        );
        let op: OperatorSum = m.into();
        let d = to_dense(&op, 3).unwrap();
        let s = to_sparse(&op, 3).unwrap().to_dense();
        assert!((d - s).norm() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let op = OperatorSum::from_terms(vec![
            QuditMonomial::new(CI, &[(0, SiteFactor::G1), (3, SiteFactor::pair(2, 4).unwrap())]),
            QuditMonomial::scalar(Complex64::new(0.25, 0.0)),
        ]);
        let back = OperatorSum::from_json(&op.to_json().unwrap()).unwrap();
        assert_eq!(back, op);
    }
}
