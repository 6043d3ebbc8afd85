//! Small dense kernels shared across modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{input, Result};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators; fixed order keeps results bitwise reproducible
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn column(x: &DMatrix<f64>, i: usize) -> &[f64] {
    let d = x.nrows();
    &x.as_slice()[i * d..(i + 1) * d]
}

pub(crate) fn ensure_finite(x: &DMatrix<f64>, what: &str) -> Result<()> {
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        let d = x.nrows().max(1);
        return input(format!(
            "{what} has a non-finite entry at row {}, column {}",
            pos % d,
            pos / d
        ));
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted descending.
pub(crate) fn sym_eig_desc(g: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(g);
    let k = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), k, |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Largest absolute deviation of `QᵀQ` from the identity.
pub(crate) fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let g = q.tr_mul(q);
    let mut err = 0.0f64;
    for c in 0..g.ncols() {
        for r in 0..g.nrows() {
            let target = if r == c { 1.0 } else { 0.0 };
            err = err.max((g[(r, c)] - target).abs());
        }
    }
    err
}

/// Re-orthonormalize the columns of `q` in order with two passes of modified
/// Gram-Schmidt. Columns that are (numerically) dependent on earlier ones are
/// replaced with canonical basis vectors orthogonalized against the rest.
pub(crate) fn orthonormalize_columns(q: &mut DMatrix<f64>) {
    let (rows, cols) = q.shape();
    let mut next_canonical = 0usize;
    for j in 0..cols {
        let original_norm = q.column(j).norm();
        for _ in 0..2 {
            for p in 0..j {
                let proj = q.column(p).dot(&q.column(j));
                let qp = q.column(p).clone_owned();
                q.column_mut(j).axpy(-proj, &qp, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if norm > 1e-8 * original_norm.max(f64::MIN_POSITIVE) && norm > 0.0 {
            q.column_mut(j).unscale_mut(norm);
            continue;
        }
        // completion: first canonical direction with a substantial residual
        loop {
            assert!(next_canonical < rows, "cannot complete an orthonormal basis");
            let mut cand = DVector::<f64>::zeros(rows);
            cand[next_canonical] = 1.0;
            next_canonical += 1;
            for _ in 0..2 {
                for p in 0..j {
                    let proj = q.column(p).dot(&cand);
                    cand.axpy(-proj, &q.column(p), 1.0);
                }
            }
            let norm = cand.norm();
            if norm > 0.5 {
                q.set_column(j, &(cand / norm));
                break;
            }
        }
    }
}

/// Inverse of an upper-triangular matrix.
pub(crate) fn upper_triangular_inverse(r: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let k = r.nrows();
    let eye = DMatrix::<f64>::identity(k, k);
    r.solve_upper_triangular(&eye)
}

/// Thin QR of a tall matrix via two rounds of Cholesky QR. Returns `(Q, R)` with
/// `a = Q R`; requires `a` to have full column rank and moderate conditioning.
pub(crate) fn cholesky_qr2(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let (q1, r1) = cholesky_qr(a)?;
    let (q2, r2) = cholesky_qr(&q1)?;
    Some((q2, r2 * r1))
}

fn cholesky_qr(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let g = a.tr_mul(a);
    let chol = g.cholesky()?;
    let r = chol.l().transpose();
    let r_inv = upper_triangular_inverse(&r)?;
    Some((a * r_inv, r))
}
