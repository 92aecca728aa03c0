//! Small dense kernels: Cholesky, triangular inversion, singular values,
//! spectral norm, and a blocked standard-inner-product Householder QR used
//! by the test-problem generators.

use crate::error::{shape_mismatch, Error, Result};
use crate::matrix::{axpy, dot, gemm_into, norm2, Matrix, ViewMut, C64, ONE, ZERO};

const BLOCK: usize = 48;

/// Upper Cholesky factor `R` with `RᴴR = A` and a positive real diagonal.
///
/// Only the upper triangle of `A` is read. Fails with
/// [`Error::NotPositiveDefinite`] carrying the first non-positive pivot.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(shape_mismatch("cholesky", (n, n), a.shape()));
    }
    let mut r = a.clone();
    let mut kb = 0;
    while kb < n {
        let ke = (kb + BLOCK).min(n);
        factor_diagonal_block(&mut r, kb, ke)?;
        if ke < n {
            // Panel: R[kb..ke, ke..] = R_dd^{-H} A[kb..ke, ke..].
            for c in ke..n {
                for i in kb..ke {
                    let mut s = r[(i, c)];
                    for l in kb..i {
                        s -= r[(l, i)].conj() * r[(l, c)];
                    }
                    r[(i, c)] = s / r[(i, i)].re;
                }
            }
            // Trailing update A[ke.., ke..] -= Pᴴ P.
            let panel = r.block(kb..ke, ke..n);
            let off = ke + ke * n;
            let m = n - ke;
            let data = r.as_mut_slice();
            let mut dst = ViewMut {
                data: &mut data[off..],
                rows: m,
                cols: m,
                ld: n,
            };
            gemm_into(&mut dst, panel.view(), true, panel.view(), false, true, -ONE);
        }
        kb = ke;
    }
    for j in 0..n {
        for i in (j + 1)..n {
            r[(i, j)] = ZERO;
        }
    }
    Ok(r)
}

fn factor_diagonal_block(r: &mut Matrix, kb: usize, ke: usize) -> Result<()> {
    for j in kb..ke {
        for i in kb..j {
            let mut s = r[(i, j)];
            for l in kb..i {
                s -= r[(l, i)].conj() * r[(l, j)];
            }
            r[(i, j)] = s / r[(i, i)].re;
        }
        let mut d = r[(j, j)].re;
        for l in kb..j {
            d -= r[(l, j)].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { index: j });
        }
        r[(j, j)] = C64::new(d.sqrt(), 0.0);
    }
    Ok(())
}

/// Inverse of a nonsingular upper triangular matrix.
pub fn upper_triangular_inverse(r: &Matrix) -> Result<Matrix> {
    let n = r.rows();
    if r.cols() != n {
        return Err(shape_mismatch("upper_triangular_inverse", (n, n), r.shape()));
    }
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        if r[(j, j)] == ZERO {
            return Err(Error::InvalidArgument(format!("zero diagonal at {j}")));
        }
        inv[(j, j)] = ONE / r[(j, j)];
        for i in (0..j).rev() {
            let mut s = ZERO;
            for l in (i + 1)..=j {
                s += r[(i, l)] * inv[(l, j)];
            }
            inv[(i, j)] = -s / r[(i, i)];
        }
    }
    Ok(inv)
}

/// Singular values in descending order (one-sided Jacobi). Tall inputs are
/// first reduced to their triangular factor.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let work = if m.rows() < m.cols() { m.adjoint() } else { m.clone() };
    let work = if work.rows() > 2 * work.cols() {
        householder_qr(&work).1
    } else {
        work
    };
    let mut s = jacobi_column_norms(work);
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthogonalizes the columns of `a` by plane rotations and returns the
/// final column norms, which are the singular values of `a`.
fn jacobi_column_norms(mut a: Matrix) -> Vec<f64> {
    let n = a.cols();
    let scale = a.norm_max();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    a = a.scale(C64::new(1.0 / scale, 0.0));
    let tol = f64::EPSILON * (a.rows() as f64).sqrt();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(a.col(p), a.col(p)).re;
                let beta = dot(a.col(q), a.col(q)).re;
                let gamma = dot(a.col(p), a.col(q));
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (cp, cq) = {
                    let rows = a.rows();
                    let data = a.as_mut_slice();
                    let (lo, hi) = data.split_at_mut(q * rows);
                    (&mut lo[p * rows..(p + 1) * rows], &mut hi[..rows])
                };
                for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
                    let u = *xp;
                    let v = *xq * phase.conj();
                    *xp = u * c - v * s;
                    *xq = u * s + v * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (0..n).map(|j| norm2(a.col(j)) * scale).collect()
}

/// 2-norm condition number `sigma_max / sigma_min` (infinite when singular).
pub fn condition_number(m: &Matrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Largest singular value.
///
/// Square inputs use the full Jacobi SVD. Rectangular inputs use power
/// iteration on the Gram matrix `MᴴM` (or `MMᴴ` when wide) with relative
/// tolerance `1e-12` and at most `10^4` iterations.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.rows() == m.cols() {
        return singular_values(m)[0];
    }
    let scale = m.norm_max();
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let scaled = m.scale(C64::new(1.0 / scale, 0.0));
    let gram = if m.rows() > m.cols() {
        scaled.adjoint_matmul(&scaled).expect("shapes agree")
    } else {
        scaled.matmul_adjoint(&scaled).expect("shapes agree")
    };
    power_iteration_hermitian(&gram, 1e-12, 10_000).sqrt() * scale
}

/// Dominant eigenvalue of a Hermitian positive semidefinite matrix.
fn power_iteration_hermitian(g: &Matrix, tol: f64, max_iter: usize) -> f64 {
    let k = g.rows();
    // Deterministic start vector with no special alignment.
    let mut v: Vec<C64> = (0..k)
        .map(|i| C64::new(1.0 + ((i * 7919) % 101) as f64 / 101.0, ((i * 104729) % 37) as f64 / 37.0))
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    let mut w = vec![ZERO; k];
    for _ in 0..max_iter {
        w.fill(ZERO);
        for j in 0..k {
            axpy(v[j], g.col(j), &mut w);
        }
        let next = dot(&v, &w).re;
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let done = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

/// Blocked Householder QR in the standard inner product.
///
/// Returns the thin factors `(Q, R)` of an `n x m` input with `n >= m`.
/// The diagonal of `R` is real but may be negative.
pub fn householder_qr(a: &Matrix) -> (Matrix, Matrix) {
    let (n, m) = a.shape();
    assert!(n >= m, "householder_qr expects a tall matrix");
    let mut work = a.clone();
    let mut v_all = Matrix::zeros(n, m);
    let mut tau = vec![ZERO; m];
    let mut panels = Vec::new();

    let mut j0 = 0;
    while j0 < m {
        let j1 = (j0 + BLOCK).min(m);
        for j in j0..j1 {
            let (t, v, beta) = reflector_standard(&work.col(j)[j..]);
            tau[j] = t;
            v_all.col_mut(j)[j..].copy_from_slice(&v);
            work[(j, j)] = beta;
            for i in (j + 1)..n {
                work[(i, j)] = ZERO;
            }
            // Apply H_jᴴ to the remaining panel columns.
            for c in (j + 1)..j1 {
                let col = &mut work.col_mut(c)[j..];
                let s = dot(&v, col) * t.conj();
                axpy(-s, &v, col);
            }
        }
        let vp = v_all.columns(j0..j1);
        let t = build_t(&vp, &tau[j0..j1]);
        if j1 < m {
            // work[:, j1..] -= V Tᴴ (Vᴴ work[:, j1..])
            let mut w = Matrix::zeros(j1 - j0, m - j1);
            gemm_into(&mut w.view_mut(), vp.view(), true, work.view_cols(j1..m), false, false, ONE);
            let tw = t.adjoint().matmul(&w).expect("shapes agree");
            gemm_into(&mut work.view_cols_mut(j1..m), vp.view(), false, tw.view(), false, true, -ONE);
        }
        panels.push((j0, j1, vp, t));
        j0 = j1;
    }

    let r = work.block(0..m, 0..m);
    let mut q = Matrix::eye(n, m);
    for (_, _, vp, t) in panels.iter().rev() {
        // q <- (I - V T Vᴴ) q
        let mut w = Matrix::zeros(vp.cols(), m);
        gemm_into(&mut w.view_mut(), vp.view(), true, q.view(), false, false, ONE);
        let tw = t.matmul(&w).expect("shapes agree");
        gemm_into(&mut q.view_mut(), vp.view(), false, tw.view(), false, true, -ONE);
    }
    (q, r)
}

/// LAPACK-style elementary reflector `H = I - tau v vᴴ` with `v[0] = 1` and
/// `Hᴴ x = beta e_1`.
fn reflector_standard(x: &[C64]) -> (C64, Vec<C64>, C64) {
    let mut v = vec![ZERO; x.len()];
    v[0] = ONE;
    let alpha = x[0];
    let xnorm = norm2(&x[1..]);
    if xnorm == 0.0 && alpha.im == 0.0 {
        return (ZERO, v, alpha);
    }
    let beta = -alpha.re.signum() * alpha.norm().hypot(xnorm);
    let beta = if beta == 0.0 { -xnorm } else { beta };
    let tau = C64::new((beta - alpha.re) / beta, -alpha.im / beta);
    let denom = alpha - beta;
    for (vi, xi) in v[1..].iter_mut().zip(&x[1..]) {
        *vi = xi / denom;
    }
    (tau, v, C64::new(beta, 0.0))
}

/// Forward column-wise `T` with `H_1 ... H_b = I - V T Vᴴ`.
fn build_t(v: &Matrix, tau: &[C64]) -> Matrix {
    let b = v.cols();
    let mut t = Matrix::zeros(b, b);
    for i in 0..b {
        t[(i, i)] = tau[i];
        if i == 0 || tau[i] == ZERO {
            continue;
        }
        let z: Vec<C64> = (0..i).map(|l| dot(v.col(l), v.col(i))).collect();
        for r in 0..i {
            let mut s = ZERO;
            for l in r..i {
                s += t[(r, l)] * z[l];
            }
            t[(r, i)] = -tau[i] * s;
        }
    }
    t
}
