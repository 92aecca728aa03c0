//! Test problems and accuracy metrics.
//!
//! Random numbers come from ChaCha20 (a counter-mode generator) keyed by
//! a 64-bit seed, with one independent stream per role. Standard normals
//! are drawn by the Box–Muller transform, and a complex normal is
//! `(g1 + i g2) / sqrt(2)`. Identical seeds therefore give identical
//! matrices on every run.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dense::{cholesky, householder_qr, singular_values, spectral_norm};
use crate::error::{shape_mismatch, Error, Result};
use crate::matrix::{axpy, dot, norm2, Matrix, C64, ZERO};
use crate::operator::BOperator;

/// Stream ids under a common seed.
pub mod stream {
    pub const SPD_EIGENVECTORS: u64 = 1;
    pub const X_LEFT: u64 = 2;
    pub const X_RIGHT: u64 = 3;
    pub const LANCZOS_START: u64 = 4;
}

/// Parameters of one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub k: usize,
    pub log_kappa_b: f64,
    pub log_kappa_x: f64,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= k <= n, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        for (name, v) in [("log_kappa_b", self.log_kappa_b), ("log_kappa_x", self.log_kappa_x)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn b(&self) -> Result<BOperator> {
        self.validate()?;
        gen_spd(self.n, self.log_kappa_b, self.seed)
    }

    pub fn x(&self) -> Result<Matrix> {
        self.validate()?;
        gen_conditioned(self.n, self.k, self.log_kappa_x, self.seed)
    }
}

/// Standard normal deviates from a seeded ChaCha20 stream.
pub struct NormalStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }

    pub fn next_complex(&mut self) -> C64 {
        let re = self.next_normal();
        let im = self.next_normal();
        C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
    }
}

/// Complex Gaussian matrix filled column by column.
pub fn random_matrix(rows: usize, cols: usize, seed: u64, stream: u64) -> Matrix {
    let mut g = NormalStream::new(seed, stream);
    Matrix::from_fn(rows, cols, |_, _| g.next_complex())
}

/// `rows x cols` matrix with orthonormal columns (Q factor of a complex
/// Gaussian matrix, with the sign of `R`'s diagonal folded in).
pub fn random_orthonormal(rows: usize, cols: usize, seed: u64, stream: u64) -> Matrix {
    assert!(cols <= rows, "random_orthonormal needs cols <= rows");
    let (mut q, r) = householder_qr(&random_matrix(rows, cols, seed, stream));
    for j in 0..cols {
        if r[(j, j)].re < 0.0 {
            q.col_mut(j).iter_mut().for_each(|z| *z = -*z);
        }
    }
    q
}

/// `m` values from `10^a` to `10^b`, geometrically spaced.
pub fn logspace(a: f64, b: f64, m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![10f64.powf(a)],
        _ => (0..m)
            .map(|i| 10f64.powf(a + (b - a) * i as f64 / (m - 1) as f64))
            .collect(),
    }
}

/// Explicit Hermitian positive-definite `B = Q diag(d) Qᴴ` with `d`
/// geometrically spaced from `1` down to `10^-log_kappa`.
pub fn gen_spd(n: usize, log_kappa: f64, seed: u64) -> Result<BOperator> {
    if !(log_kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!("log_kappa must be >= 0, got {log_kappa}")));
    }
    let q = random_orthonormal(n, n, seed, stream::SPD_EIGENVECTORS);
    let d = logspace(0.0, -log_kappa, n);
    let mut qd = q.clone();
    for (j, dj) in d.iter().enumerate() {
        qd.col_mut(j).iter_mut().for_each(|z| *z *= dj);
    }
    BOperator::explicit(qd.matmul_adjoint(&q)?)
}

/// `X = U Σ V` with `U` (`n x k`) and `V` (`k x k`) orthonormal and `k`
/// singular values geometrically spaced from `1` down to `10^-log_kappa`.
///
/// `U` and `V` depend only on the seed, so a sweep over `log_kappa` changes
/// nothing but the spectrum.
pub fn gen_conditioned(n: usize, k: usize, log_kappa: f64, seed: u64) -> Result<Matrix> {
    if k > n {
        return Err(Error::InvalidArgument(format!("need k <= n, got n = {n}, k = {k}")));
    }
    if !(log_kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!("log_kappa must be >= 0, got {log_kappa}")));
    }
    let mut us = random_orthonormal(n, k, seed, stream::X_LEFT);
    let v = random_orthonormal(k, k, seed, stream::X_RIGHT);
    for (j, s) in logspace(0.0, -log_kappa, k).iter().enumerate() {
        us.col_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    us.matmul(&v)
}

/// `[X0, 0, X0]`.
pub fn build_rank_deficient(x0: &Matrix) -> Matrix {
    let zero = Matrix::zeros(x0.rows(), x0.cols());
    Matrix::hcat(&[x0, &zero, x0]).expect("equal row counts")
}

/// `||QᴴBQ - I||_2`.
pub fn loss_of_orthogonality(q: &Matrix, b: &BOperator) -> Result<f64> {
    if q.rows() != b.dim() {
        return Err(shape_mismatch("loss_of_orthogonality", (b.dim(), q.cols()), q.shape()));
    }
    let gram = q.adjoint_matmul(&b.apply(q)?)?;
    Ok(spectral_norm(&gram.sub(&Matrix::identity(q.cols()))?))
}

/// `||X - QR||_2 / ||X||_2`.
pub fn relative_residual(x: &Matrix, q: &Matrix, r: &Matrix) -> Result<f64> {
    if q.rows() != x.rows() || r.rows() != q.cols() || r.cols() != x.cols() {
        return Err(shape_mismatch(
            "relative_residual",
            (x.rows(), x.cols()),
            (q.rows(), r.cols()),
        ));
    }
    let xn = spectral_norm(x);
    if xn == 0.0 {
        return Err(Error::ZeroInput);
    }
    let qr = if q.cols() == 0 {
        Matrix::zeros(x.rows(), x.cols())
    } else {
        q.matmul(r)?
    };
    Ok(spectral_norm(&x.sub(&qr)?) / xn)
}

/// `sigma_max / sigma_min` of a dense matrix.
pub fn matrix_condition(m: &Matrix) -> f64 {
    crate::dense::condition_number(m)
}

/// `lambda_max(B) / lambda_min(B)`.
///
/// Both extreme eigenvalues come from Lanczos with full reorthogonalization,
/// the smallest through `B^{-1}` applied by Cholesky solves. Returns
/// infinity when `B` is numerically not positive definite.
pub fn spd_condition(b: &BOperator) -> f64 {
    let n = b.dim();
    if n == 0 {
        return 1.0;
    }
    let dense;
    let m = match b.matrix() {
        Some(m) => m,
        None => {
            dense = b.to_dense();
            &dense
        }
    };
    let lmax = lanczos_largest(n, |x| hermitian_matvec(m, x));
    let r = match cholesky(m) {
        Ok(r) => r,
        Err(_) => return f64::INFINITY,
    };
    let inv_lmin = lanczos_largest(n, |x| cholesky_solve(&r, x));
    if !(inv_lmin > 0.0) || !inv_lmin.is_finite() {
        return f64::INFINITY;
    }
    lmax * inv_lmin
}

fn hermitian_matvec(m: &Matrix, x: &[C64]) -> Vec<C64> {
    let mut y = vec![ZERO; m.rows()];
    for (j, xj) in x.iter().enumerate() {
        axpy(*xj, m.col(j), &mut y);
    }
    y
}

/// Solves `RᴴR z = x` for upper triangular `R`.
fn cholesky_solve(r: &Matrix, x: &[C64]) -> Vec<C64> {
    let n = r.rows();
    let mut y = x.to_vec();
    for i in 0..n {
        let s = dot(&r.col(i)[..i], &y[..i]);
        y[i] = (y[i] - s) / r[(i, i)].re;
    }
    for j in (0..n).rev() {
        y[j] /= r[(j, j)].re;
        let zj = y[j];
        let (head, _) = y.split_at_mut(j);
        axpy(-zj, &r.col(j)[..j], head);
    }
    y
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator.
fn lanczos_largest(n: usize, mut apply: impl FnMut(&[C64]) -> Vec<C64>) -> f64 {
    const MAX_STEPS: usize = 120;
    const CHECK_EVERY: usize = 10;
    let steps = n.min(MAX_STEPS);
    let mut g = NormalStream::new(0x6c61_6e63_7a6f_73, stream::LANCZOS_START);
    let mut v: Vec<C64> = (0..n).map(|_| g.next_complex()).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut last = f64::NAN;
    for step in 0..steps {
        let mut w = apply(&v);
        let a = dot(&v, &w).re;
        basis.push(v);
        alpha.push(a);
        // Full reorthogonalization, twice for safety.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let bnorm = norm2(&w);
        let done = (step + 1) % CHECK_EVERY == 0 || step + 1 == steps;
        let breakdown = bnorm <= 1e-14 * a.abs().max(f64::MIN_POSITIVE);
        if done || breakdown {
            let ritz = tridiagonal_largest(&alpha, &beta);
            if breakdown || (ritz - last).abs() <= 1e-12 * ritz.abs() {
                return ritz;
            }
            last = ritz;
        }
        if step + 1 == steps {
            break;
        }
        beta.push(bnorm);
        v = w.iter().map(|z| z / bnorm).collect();
    }
    last
}

fn tridiagonal_largest(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let mut t = Matrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = C64::new(alpha[i], 0.0);
        if i + 1 < m {
            t[(i, i + 1)] = C64::new(beta[i], 0.0);
            t[(i + 1, i)] = C64::new(beta[i], 0.0);
        }
    }
    // Positive semidefinite, so the largest singular value is the largest
    // eigenvalue.
    singular_values(&t)[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_stream_is_reproducible_and_streams_differ() {
        let a: Vec<f64> = {
            let mut g = NormalStream::new(7, 1);
            (0..10).map(|_| g.next_normal()).collect()
        };
        let b: Vec<f64> = {
            let mut g = NormalStream::new(7, 1);
            (0..10).map(|_| g.next_normal()).collect()
        };
        let c: Vec<f64> = {
            let mut g = NormalStream::new(7, 2);
            (0..10).map(|_| g.next_normal()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn normal_moments() {
        let mut g = NormalStream::new(1, 0);
        let m = 200_000;
        let xs: Vec<f64> = (0..m).map(|_| g.next_normal()).collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn logspace_endpoints() {
        let v = logspace(0.0, -3.0, 4);
        assert_eq!(v, vec![1.0, 0.1, 0.01, 0.001]);
        assert_eq!(logspace(0.0, 0.0, 3), vec![1.0; 3]);
        assert_eq!(logspace(2.0, 0.0, 1), vec![100.0]);
    }

    #[test]
    fn spd_with_zero_log_kappa_is_identity() {
        let b = gen_spd(40, 0.0, 3).unwrap();
        let e = b.matrix().unwrap().sub(&Matrix::identity(40)).unwrap();
        assert!(spectral_norm(&e) < 1e-13);
    }

    #[test]
    fn spd_condition_matches_target() {
        for &lk in &[2.0, 5.0, 8.0] {
            let b = gen_spd(150, lk, 11).unwrap();
            let kappa = spd_condition(&b);
            let want = 10f64.powf(lk);
            assert!((kappa / want - 1.0).abs() < 0.01, "log_kappa {lk}: {kappa:e}");
        }
    }

    #[test]
    fn spd_is_exactly_hermitian() {
        let b = gen_spd(30, 4.0, 5).unwrap();
        let m = b.matrix().unwrap();
        assert_eq!(m, &m.adjoint());
    }

    #[test]
    fn conditioned_matrix_hits_target() {
        let x = gen_conditioned(60, 8, 0.0, 9).unwrap();
        assert!((matrix_condition(&x) - 1.0).abs() < 1e-10);
        let x = gen_conditioned(500, 50, 8.0, 9).unwrap();
        let kappa = matrix_condition(&x);
        assert!((kappa / 1e8 - 1.0).abs() < 0.01, "{kappa:e}");
        assert_eq!(gen_conditioned(500, 50, 8.0, 9).unwrap(), x);
    }

    #[test]
    fn rank_deficient_layout() {
        let e1 = Matrix::eye(3, 1);
        let x = build_rank_deficient(&e1);
        assert_eq!(x.shape(), (3, 3));
        assert_eq!(x.col(0), e1.col(0));
        assert!(x.col(1).iter().all(|z| *z == ZERO));
        assert_eq!(x.col(2), e1.col(0));
    }

    #[test]
    fn metric_hand_cases() {
        let b = BOperator::identity(5);
        assert_eq!(loss_of_orthogonality(&Matrix::eye(5, 3), &b).unwrap(), 0.0);
        let q2 = Matrix::eye(5, 3).scale(C64::new(2.0, 0.0));
        assert!((loss_of_orthogonality(&q2, &b).unwrap() - 3.0).abs() < 1e-15);
        let x = Matrix::eye(5, 2);
        assert_eq!(relative_residual(&x, &Matrix::zeros(5, 2), &Matrix::zeros(2, 2)).unwrap(), 1.0);
        assert_eq!(relative_residual(&x, &x, &Matrix::identity(2)).unwrap(), 0.0);
        assert_eq!(
            relative_residual(&Matrix::zeros(5, 2), &x, &Matrix::identity(2)),
            Err(Error::ZeroInput)
        );
    }

    #[test]
    fn cholesky_solve_inverts() {
        let b = gen_spd(20, 2.0, 1).unwrap();
        let r = cholesky(b.matrix().unwrap()).unwrap();
        let x: Vec<C64> = (0..20).map(|i| C64::new(i as f64, 1.0)).collect();
        let z = cholesky_solve(&r, &x);
        let back = hermitian_matvec(b.matrix().unwrap(), &z);
        for (p, q) in back.iter().zip(&x) {
            assert!((p - q).norm() < 1e-11);
        }
    }
}
