//! Eigendecomposition of real symmetric tridiagonal matrices.
//!
//! Implicit QL with Wilkinson shifts and accumulated rotations (the classic
//! `tql2` scheme). The Fock-space oracle diagonalizes one such matrix per
//! photon-number-difference block, with depths in the hundreds, so the
//! rotation loop is kept tight and the eigenvector matrix column-major.

use crate::error::{Error, Result};

/// Maximum QL iterations per eigenvalue before giving up.
const MAX_ITER: usize = 64;

/// Eigendecomposition of the symmetric tridiagonal matrix with main
/// diagonal `diag` and sub/super diagonal `offdiag`.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues ascending and the
/// matching unit eigenvectors stored column-major in a flat `n*n` buffer:
/// component `k` of eigenvector `j` is `vecs[j * n + k]`.
pub fn eigh_tridiagonal(diag: &[f64], offdiag: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::InvalidParams("empty tridiagonal matrix".into()));
    }
    if offdiag.len() + 1 != n {
        return Err(Error::InvalidParams(format!(
            "off-diagonal length {} does not match dimension {}",
            offdiag.len(),
            n
        )));
    }
    if diag.iter().chain(offdiag).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("tridiagonal entries must be finite".into()));
    }

    let mut d = diag.to_vec();
    // e[i] couples rows i and i+1; e[n-1] is workspace.
    let mut e = Vec::with_capacity(n);
    e.extend_from_slice(offdiag);
    e.push(0.0);

    // Column-major identity; rotations act on column pairs.
    let mut z = vec![0.0f64; n * n];
    for j in 0..n {
        z[j * n + j] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            // Find the first negligible off-diagonal at or after l.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITER {
                return Err(Error::NumericalFailure(format!(
                    "tridiagonal QL did not converge for eigenvalue {l} of {n}"
                )));
            }

            // Wilkinson shift.
            let g0 = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let r0 = g0.hypot(1.0);
            let mut g = d[m] - d[l] + e[l] / (g0 + sign_like(r0, g0));
            let mut r;

            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut underflow = false;

            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Negligible rotation: deflate and restart this sweep.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;

                // Apply the rotation to eigenvector columns i and i+1.
                let (left, right) = z.split_at_mut((i + 1) * n);
                let col_i = &mut left[i * n..];
                let col_i1 = &mut right[..n];
                for k in 0..n {
                    f = col_i1[k];
                    col_i1[k] = s * col_i[k] + c * f;
                    col_i[k] = c * col_i[k] - s * f;
                }
            }

            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // Sort ascending, carrying eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let vals: Vec<f64> = order.iter().map(|&j| d[j]).collect();
    let mut vecs = vec![0.0f64; n * n];
    for (dst, &src) in order.iter().enumerate() {
        vecs[dst * n..(dst + 1) * n].copy_from_slice(&z[src * n..(src + 1) * n]);
    }
    Ok((vals, vecs))
}

/// `copysign(magnitude, sign_of)`, with the Fortran SIGN convention that a
/// zero `sign_of` counts as positive.
fn sign_like(magnitude: f64, sign_of: f64) -> f64 {
    if sign_of >= 0.0 {
        magnitude.abs()
    } else {
        -magnitude.abs()
    }
}
