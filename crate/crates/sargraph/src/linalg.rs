//! Shared dense linear-algebra helpers.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// All eigenvalues of a general real square matrix.
///
/// nalgebra's Francis QR can stall on highly structured inputs (e.g. exact
/// permutation matrices). A random orthogonal similarity transform preserves
/// the spectrum exactly while breaking the structure, so we retry with one
/// before giving up.
pub fn eig_complex(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!(
            "eigenvalues need a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![Complex::new(m[(0, 0)], 0.0)]),
        2 => return Ok(eig2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]).to_vec()),
        _ => {}
    }
    // triangular (and in particular zero) matrices: the QR iteration is
    // pointless and nalgebra's Schur rejects the all-zero case outright
    if is_triangular(m) {
        return Ok((0..n).map(|i| Complex::new(m[(i, i)], 0.0)).collect());
    }

    let max_iter = 200 * n.max(30);
    if let Some(schur) = m.clone().try_schur(1e-13, max_iter) {
        return Ok(schur.complex_eigenvalues().iter().copied().collect());
    }
    for attempt in 0..3u64 {
        let q = random_orthogonal(n, 0x5eed_0001 + attempt);
        let conj = q.transpose() * m * &q;
        if let Some(schur) = conj.try_schur(1e-13, max_iter) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::Numeric(format!(
        "QR eigenvalue iteration failed to converge for a {n}x{n} matrix"
    )))
}

fn is_triangular(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let mut upper = true;
    let mut lower = true;
    for i in 0..n {
        for j in 0..n {
            if i > j && m[(i, j)] != 0.0 {
                upper = false;
            }
            if i < j && m[(i, j)] != 0.0 {
                lower = false;
            }
        }
    }
    upper || lower
}

/// Eigenvalues of a 2x2 real matrix in closed form.
fn eig2(a: f64, b: f64, c: f64, d: f64) -> [Complex<f64>; 2] {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [
            Complex::new(tr / 2.0 + r, 0.0),
            Complex::new(tr / 2.0 - r, 0.0),
        ]
    } else {
        let r = (-disc).sqrt();
        [Complex::new(tr / 2.0, r), Complex::new(tr / 2.0, -r)]
    }
}

/// Deterministic random orthogonal matrix (QR of a seeded Gaussian matrix).
fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    // splitmix64 stream; Box-Muller for normals
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        (z ^ (z >> 31)) as f64 / u64::MAX as f64
    };
    let g = DMatrix::from_fn(n, n, |_, _| {
        let u1: f64 = next().max(1e-12);
        let u2: f64 = next();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    });
    g.qr().q()
}

/// log|det| and sign of a square matrix via LU with partial pivoting.
pub fn logdet_lu(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape("logdet needs a square matrix".into()));
    }
    if n == 0 {
        return Ok((0.0, 1.0));
    }
    let lu = m.clone().lu();
    let mut log_abs = 0.0;
    let mut sign = 1.0;
    for i in 0..n {
        let d = lu.u()[(i, i)];
        if d == 0.0 {
            return Ok((f64::NEG_INFINITY, 0.0));
        }
        log_abs += d.abs().ln();
        if d < 0.0 {
            sign = -sign;
        }
    }
    let perm_sign: f64 = lu.p().determinant();
    Ok((log_abs, sign * perm_sign))
}

/// log det of a symmetric positive-definite matrix via Cholesky.
pub fn logdet_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// True iff the matrix is symmetric positive definite (Cholesky succeeds).
pub fn is_spd(m: &DMatrix<f64>) -> bool {
    m.nrows() == m.ncols() && is_symmetric(m, 0.0) && m.clone().cholesky().is_some()
}

/// Symmetry check with absolute tolerance (0.0 for exact).
pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Inverse of an SPD matrix via Cholesky solves against the identity.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    Ok(chol.inverse())
}

/// Solve `m x = b` for SPD `m`.
pub fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kron_matches_definition() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 6.0, 7.0]);
        let k = kron(&a, &b);
        assert_eq!(k[(0, 1)], 5.0);
        assert_eq!(k[(3, 0)], 18.0);
        assert_eq!(k[(3, 3)], 28.0);
    }

    #[test]
    fn eig_of_permutation_matrix_converges() {
        // pathological for plain Francis QR; the orthogonal-retry path must handle it
        let n = 64;
        let m = DMatrix::from_fn(n, n, |i, j| if (i + 1) % n == j { 1.0 } else { 0.0 });
        let ev = eig_complex(&m).unwrap();
        assert_eq!(ev.len(), n);
        for e in &ev {
            assert_relative_eq!(e.norm(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn logdet_lu_tracks_sign() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (log_abs, sign) = logdet_lu(&m).unwrap();
        assert_relative_eq!(log_abs, 0.0, epsilon = 1e-12);
        assert_eq!(sign, -1.0);
    }

    #[test]
    fn spd_helpers_roundtrip() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!(is_spd(&m));
        let inv = spd_inverse(&m).unwrap();
        let prod = &m * inv;
        assert_relative_eq!(prod[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(prod[(0, 1)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(logdet_spd(&m).unwrap(), (2.0_f64 * 1.0 - 0.25).ln(), epsilon = 1e-12);
    }
}
