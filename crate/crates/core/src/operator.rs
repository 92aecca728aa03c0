//! The Hermitian positive-definite weight `B` of the inner product
//! `<x, y>_B = yᴴ B x`, either stored explicitly or available only as a
//! black-box product `x -> Bx`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{shape_mismatch, Error, Result};
use crate::matrix::{dot, Matrix, C64, ZERO};

/// Column-wise product `out = B x`.
pub type ApplyFn = dyn Fn(&[C64], &mut [C64]) + Send + Sync;

#[derive(Clone)]
pub struct BOperator {
    dim: usize,
    form: Form,
    // Upper bound on ||B||_2, computed on demand.
    norm_bound: Arc<OnceLock<f64>>,
}

#[derive(Clone)]
enum Form {
    Explicit(Arc<Matrix>),
    Callback(Arc<ApplyFn>),
}

/// Raised when `xᴴBx` comes out clearly negative, i.e. `B` is numerically
/// indefinite along `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndefinitenessWarning {
    pub radicand: f64,
    pub threshold: f64,
}

impl BOperator {
    /// Wraps an explicit matrix. The matrix is replaced by `(B + Bᴴ)/2`,
    /// which leaves an exactly Hermitian input bit-for-bit unchanged.
    pub fn explicit(b: Matrix) -> Result<Self> {
        if b.rows() != b.cols() {
            return Err(shape_mismatch("BOperator::explicit", (b.rows(), b.rows()), b.shape()));
        }
        if !b.is_finite() {
            return Err(Error::NonFinite { what: "B" });
        }
        let n = b.rows();
        let mut sym = b;
        for j in 0..n {
            for i in 0..j {
                let avg = (sym[(i, j)] + sym[(j, i)].conj()) * 0.5;
                sym[(i, j)] = avg;
                sym[(j, i)] = avg.conj();
            }
            sym[(j, j)].im = 0.0;
        }
        Ok(Self {
            dim: n,
            form: Form::Explicit(Arc::new(sym)),
            norm_bound: Arc::new(OnceLock::new()),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::explicit(Matrix::identity(n)).expect("identity is square and finite")
    }

    /// Black-box operator; `apply` must write `B x` into its second argument
    /// and be deterministic.
    pub fn callback<F>(dim: usize, apply: F) -> Self
    where
        F: Fn(&[C64], &mut [C64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            form: Form::Callback(Arc::new(apply)),
            norm_bound: Arc::new(OnceLock::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> Option<&Matrix> {
        match &self.form {
            Form::Explicit(m) => Some(m),
            Form::Callback(_) => None,
        }
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.form, Form::Explicit(_))
    }

    /// Dense copy of `B`; costs `n` products for the callback form.
    pub fn to_dense(&self) -> Matrix {
        match &self.form {
            Form::Explicit(m) => (**m).clone(),
            Form::Callback(_) => self
                .apply(&Matrix::identity(self.dim))
                .expect("identity has matching dimension"),
        }
    }

    /// `B * m`.
    pub fn apply(&self, m: &Matrix) -> Result<Matrix> {
        if m.rows() != self.dim {
            return Err(shape_mismatch("apply_b", (self.dim, m.cols()), m.shape()));
        }
        match &self.form {
            Form::Explicit(b) => {
                if m.cols() == 1 {
                    let mut out = Matrix::zeros(self.dim, 1);
                    hemv(b, m.col(0), out.col_mut(0));
                    Ok(out)
                } else {
                    b.matmul(m)
                }
            }
            Form::Callback(f) => {
                let mut out = Matrix::zeros(self.dim, m.cols());
                for j in 0..m.cols() {
                    f(m.col(j), out.col_mut(j));
                }
                Ok(out)
            }
        }
    }

    /// `B * x` for a single vector.
    pub fn apply_vec(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim {
            return Err(shape_mismatch("apply_b", (self.dim, 1), (x.len(), 1)));
        }
        let mut out = vec![ZERO; self.dim];
        match &self.form {
            Form::Explicit(b) => hemv(b, x, &mut out),
            Form::Callback(f) => f(x, &mut out),
        }
        Ok(out)
    }

    /// Upper bound on `||B||_2`: the max row sum for explicit `B`, and the
    /// largest column norm of `B` times `sqrt(n)` for callbacks.
    pub fn norm_bound(&self) -> f64 {
        *self.norm_bound.get_or_init(|| match &self.form {
            Form::Explicit(b) => (0..self.dim)
                .map(|j| b.col(j).iter().map(|v| v.norm()).sum::<f64>())
                .fold(0.0, f64::max),
            Form::Callback(_) => {
                let dense = self.to_dense();
                let colmax = (0..self.dim)
                    .map(|j| crate::matrix::norm2(dense.col(j)))
                    .fold(0.0, f64::max);
                colmax * (self.dim as f64).sqrt()
            }
        })
    }
}

impl fmt::Debug for BOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let form = match self.form {
            Form::Explicit(_) => "explicit",
            Form::Callback(_) => "callback",
        };
        f.debug_struct("BOperator")
            .field("dim", &self.dim)
            .field("form", &form)
            .finish()
    }
}

/// Hermitian matrix-vector product reading only the upper triangle, which
/// halves the memory traffic of the dense product.
fn hemv(b: &Matrix, x: &[C64], y: &mut [C64]) {
    let n = b.rows();
    // Complex64 is two contiguous f64 (re, im).
    let bf = unsafe { std::slice::from_raw_parts(b.as_slice().as_ptr() as *const f64, 2 * n * n) };
    let xf = unsafe { std::slice::from_raw_parts(x.as_ptr() as *const f64, 2 * n) };
    let yf = unsafe { std::slice::from_raw_parts_mut(y.as_mut_ptr() as *mut f64, 2 * n) };
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the required features were detected at runtime.
            unsafe { hemv_avx2(bf, n, xf, yf) };
            return;
        }
    }
    hemv_kernel(bf, n, xf, yf);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn hemv_avx2(b: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    hemv_kernel(b, n, x, y)
}

/// `y = B x` from the upper triangle of `B`, on interleaved (re, im) data.
/// Column `j` updates `y[..j]` with `B[..j, j] x_j` and takes
/// `B[..j, j]ᴴ x[..j]` into `y_j`, so each stored entry is read once.
#[inline(always)]
fn hemv_kernel(b: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    const W: usize = 8;
    y.fill(0.0);
    for j in 0..n {
        let col = &b[2 * j * n..2 * j * n + 2 * j];
        let (xr, xi) = (x[2 * j], x[2 * j + 1]);
        let (head, tail) = y.split_at_mut(2 * j);
        let mut s1 = [0.0f64; W];
        let mut s2 = [0.0f64; W];
        let mut yc = head.chunks_exact_mut(W);
        let mut bc = col.chunks_exact(W);
        let mut xc = x[..2 * j].chunks_exact(W);
        for ((yv, bv), xv) in (&mut yc).zip(&mut bc).zip(&mut xc) {
            for l in (0..W).step_by(2) {
                let (br, bi) = (bv[l], bv[l + 1]);
                yv[l] += br * xr - bi * xi;
                yv[l + 1] += br * xi + bi * xr;
                s1[l] += br * xv[l];
                s1[l + 1] += bi * xv[l + 1];
                s2[l] += br * xv[l + 1];
                s2[l + 1] += bi * xv[l];
            }
        }
        for ((yv, bv), xv) in yc
            .into_remainder()
            .chunks_exact_mut(2)
            .zip(bc.remainder().chunks_exact(2))
            .zip(xc.remainder().chunks_exact(2))
        {
            let (br, bi) = (bv[0], bv[1]);
            yv[0] += br * xr - bi * xi;
            yv[1] += br * xi + bi * xr;
            s1[0] += br * xv[0];
            s1[1] += bi * xv[1];
            s2[0] += br * xv[1];
            s2[1] += bi * xv[0];
        }
        let acc_re: f64 = s1.iter().sum();
        let acc_im: f64 = s2.iter().step_by(2).sum::<f64>() - s2.iter().skip(1).step_by(2).sum::<f64>();
        let d = b[2 * j * n + 2 * j];
        tail[0] += acc_re + d * xr;
        tail[1] += acc_im + d * xi;
    }
}

/// `yᴴ (B x)`.
pub fn b_inner(x: &[C64], y: &[C64], b: &BOperator) -> Result<C64> {
    if y.len() != x.len() {
        return Err(shape_mismatch("b_inner", (x.len(), 1), (y.len(), 1)));
    }
    let bx = b.apply_vec(x)?;
    Ok(dot(y, &bx))
}

/// `||x||_B`, clamping a negative radicand to zero.
pub fn b_norm(x: &[C64], b: &BOperator) -> Result<f64> {
    b_norm_checked(x, b).map(|(v, _)| v)
}

/// `||x||_B` together with a warning when the radicand `Re(xᴴBx)` is below
/// `-1e-12 ||x||_2^2 ||B||_2`.
pub fn b_norm_checked(x: &[C64], b: &BOperator) -> Result<(f64, Option<IndefinitenessWarning>)> {
    let bx = b.apply_vec(x)?;
    Ok(norm_from_product(x, &bx, b))
}

pub(crate) fn norm_from_product(
    x: &[C64],
    bx: &[C64],
    b: &BOperator,
) -> (f64, Option<IndefinitenessWarning>) {
    let radicand = dot(x, bx).re;
    if radicand >= 0.0 {
        return (radicand.sqrt(), None);
    }
    let xn = crate::matrix::norm2(x);
    let threshold = -1e-12 * xn * xn * b.norm_bound();
    let warning = (radicand < threshold).then(|| {
        log::warn!("B is numerically indefinite: x^H B x = {radicand:e}");
        IndefinitenessWarning {
            radicand,
            threshold,
        }
    });
    (0.0, warning)
}
