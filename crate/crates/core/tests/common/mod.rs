#![allow(dead_code)]

use std::path::Path;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use ququart::gamma_algebra::SiteFactor;

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Reads a 16×16 matrix written with tokens 0, ±1, ±h, ±ih (h = 1/√2).
pub fn read_matrix_fixture(name: &str) -> DMatrix<Complex64> {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    parse_matrix(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<Complex64>, String> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let rows: Vec<Vec<Complex64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|t| match t {
                    "0" => Ok(Complex64::new(0.0, 0.0)),
                    "1" => Ok(Complex64::new(1.0, 0.0)),
                    "-1" => Ok(Complex64::new(-1.0, 0.0)),
                    "h" => Ok(Complex64::new(h, 0.0)),
                    "-h" => Ok(Complex64::new(-h, 0.0)),
                    "ih" => Ok(Complex64::new(0.0, h)),
                    "-ih" => Ok(Complex64::new(0.0, -h)),
                    other => Err(format!("unknown token `{other}`")),
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err("matrix is not square".into());
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

pub fn dm(m: Matrix4<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(4, 4, |r, c| m[(r, c)])
}

pub fn g(f: SiteFactor) -> DMatrix<Complex64> {
    dm(f.matrix())
}

/// Γ̃Γ^μ as a matrix product.
pub fn tilde_gamma(mu: SiteFactor) -> DMatrix<Complex64> {
    g(SiteFactor::TILDE) * g(mu)
}

pub fn id4() -> DMatrix<Complex64> {
    DMatrix::identity(4, 4)
}

/// The (A, D) pairs of the three printed conjugations, keyed by fixture name.
pub fn printed_relations() -> Vec<(&'static str, DMatrix<Complex64>, DMatrix<Complex64>)> {
    use SiteFactor as F;
    let i = Complex64::new(0.0, 1.0);
    let a_u = (tilde_gamma(F::G1).kronecker(&g(F::G2)) - tilde_gamma(F::G2).kronecker(&g(F::G1))) * i;
    let a_v = tilde_gamma(F::G1).kronecker(&tilde_gamma(F::G2)) - tilde_gamma(F::G2).kronecker(&tilde_gamma(F::G1));
    let a_w = g(F::G1).kronecker(&g(F::G2));
    let d_pair = g(F::TILDE).kronecker(&id4()) + id4().kronecker(&g(F::TILDE));
    let d_single = g(F::TILDE).kronecker(&id4());
    vec![
        ("conj_u.txt", a_u, d_pair.clone()),
        ("conj_v.txt", a_v, d_pair),
        ("conj_w.txt", a_w, d_single),
    ]
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Seeded random Hermitian matrix with entries of order one.
pub fn random_hermitian(rng: &mut impl rand::Rng, n: usize) -> DMatrix<Complex64> {
    let m = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}
