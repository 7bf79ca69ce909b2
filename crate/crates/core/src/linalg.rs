//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenpairs of a Hermitian matrix with eigenvalues in ascending order.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

/// Largest entry modulus of `a − a†`.
pub fn hermiticity_defect(a: &DMatrix<Complex64>) -> f64 {
    (a - a.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    max_abs_diff(&(u * u.adjoint()), &DMatrix::identity(n, n))
}

/// Diagonalizes a Hermitian matrix; fails if it is not Hermitian to `1e-10`.
pub fn eigh(a: &DMatrix<Complex64>) -> Result<HermitianEigen> {
    let defect = hermiticity_defect(a);
    if defect > 1e-10 {
        return Err(Error::NonHermitian(defect));
    }
    if a.nrows() == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let sym = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn eigvalsh(a: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    Ok(eigh(a)?.values)
}

/// e^{−iθA} for Hermitian A.
pub fn expm_hermitian(a: &DMatrix<Complex64>, theta: f64) -> Result<DMatrix<Complex64>> {
    let eig = eigh(a)?;
    let phases = DVector::from_iterator(
        eig.values.len(),
        eig.values.iter().map(|&l| Complex64::from_polar(1.0, -theta * l)),
    );
    let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.vectors[(r, c)] * phases[c]);
    Ok(&scaled * eig.vectors.adjoint())
}

/// e^{A} for Hermitian A.
pub fn exp_hermitian_real(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let eig = eigh(a)?;
    let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.vectors[(r, c)] * eig.values[c].exp());
    Ok(&scaled * eig.vectors.adjoint())
}

/// Lifts a matrix on `sub` (ordered qudits) to the register `full` (ordered
/// qudits, first most significant) by tensoring with the identity.
pub fn embed(m: &DMatrix<Complex64>, sub: &[usize], full: &[usize]) -> Result<DMatrix<Complex64>> {
    let pos: Vec<usize> = sub
        .iter()
        .map(|q| {
            full.iter()
                .position(|f| f == q)
                .ok_or_else(|| Error::InvalidSupport(format!("qudit {q} not in {full:?}")))
        })
        .collect::<Result<_>>()?;
    let k = sub.len();
    if m.nrows() != 1 << (2 * k) || m.ncols() != m.nrows() {
        return Err(Error::MatrixShape {
            rows: m.nrows(),
            cols: m.ncols(),
            k,
        });
    }
    let n = full.len();
    let dim = 1usize << (2 * n);
    let shift = |p: usize| 2 * (n - 1 - p);
    let local = |idx: usize| pos.iter().fold(0usize, |acc, &p| (acc << 2) | ((idx >> shift(p)) & 3));
    let mask = pos.iter().fold(0usize, |acc, &p| acc | (3 << shift(p)));
    let mut out = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let lc = local(col);
        let rest = col & !mask;
        for lr in 0..m.nrows() {
            let v = m[(lr, lc)];
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            let row = pos
                .iter()
                .enumerate()
                .fold(rest, |acc, (i, &p)| acc | (((lr >> (2 * (k - 1 - i))) & 3) << shift(p)));
            out[(row, col)] = v;
        }
    }
    Ok(out)
}

/// Kronecker product with `a` on the most significant index.
pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_of_pauli_x() {
        let x = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let theta = 0.3f64;
        let u = expm_hermitian(&x, theta).unwrap();
        assert!((u[(0, 0)] - Complex64::new(theta.cos(), 0.0)).norm() < 1e-14);
        assert!((u[(0, 1)] - Complex64::new(0.0, -theta.sin())).norm() < 1e-14);
        assert!(unitarity_defect(&u) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        assert!(matches!(eigh(&a), Err(Error::NonHermitian(_))));
    }
}
