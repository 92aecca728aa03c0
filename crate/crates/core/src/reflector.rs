//! Householder reflections `H = I - 2 w wᴴ B` in the B-inner product and
//! their compact WY aggregation `H_1 ⋯ H_k = I - 2 W T Wᴴ B`.
//!
//! Every routine here works with the pair `(w, Bw)`. Because `B` is
//! Hermitian, `wᴴ B m = (Bw)ᴴ m`, so once `Bw` is known a reflection costs
//! two passes over `m` and no further products with `B`.

use crate::error::{shape_mismatch, Error, Result};
use crate::matrix::{axpy, dot, gemm_into, Matrix, View, C64, ONE, ZERO};
use crate::operator::{norm_from_product, BOperator};

/// Below this B-norm a freshly formed Householder vector is rejected.
pub const DEGENERATE_NORM: f64 = 1e-14;

/// Order in which a WY aggregate is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `H_1 H_2 ⋯ H_k = I - 2 W T Wᴴ B`.
    Forward,
    /// `H_k ⋯ H_2 H_1 = I - 2 W Tᴴ Wᴴ B`, the inverse of `Forward`.
    Adjoint,
}

/// Householder vectors accumulated by a factorization, with their images
/// under `B` and the phases that map each basis vector onto its target.
#[derive(Clone, Debug)]
pub struct ReflectorSet {
    pub(crate) w: Matrix,
    pub(crate) bw: Matrix,
    pub(crate) phases: Vec<Option<C64>>,
    pub(crate) wy_t: Option<Matrix>,
}

impl ReflectorSet {
    pub fn new(n: usize) -> Self {
        Self {
            w: Matrix::zeros(n, 0),
            bw: Matrix::zeros(n, 0),
            phases: Vec::new(),
            wy_t: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn len(&self) -> usize {
        self.w.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.w.cols() == 0
    }

    /// `W = [w_1 … w_k]`; deflated steps hold a zero column.
    pub fn vectors(&self) -> &Matrix {
        &self.w
    }

    /// `B W`.
    pub fn b_vectors(&self) -> &Matrix {
        &self.bw
    }

    /// `alpha_i`, or `None` for a deflated step.
    pub fn phases(&self) -> &[Option<C64>] {
        &self.phases
    }

    pub fn wy_t(&self) -> Option<&Matrix> {
        self.wy_t.as_ref()
    }

    pub(crate) fn push(&mut self, w: &[C64], bw: &[C64], phase: Option<C64>) {
        self.w.push_col(w);
        self.bw.push_col(bw);
        self.phases.push(phase);
    }

    pub(crate) fn push_identity(&mut self) {
        let zero = vec![ZERO; self.dim()];
        self.push(&zero, &zero, None);
    }

    /// Builds `T` for the stored vectors.
    pub fn with_wy(mut self) -> Self {
        self.wy_t = Some(wy_build_from_products(&self.w, &self.bw));
        self
    }
}

pub(crate) struct Built {
    pub w: Vec<C64>,
    pub bw: Vec<C64>,
    pub alpha: C64,
}

/// `sign(z) = z/|z|` with `sign(0) = 1`.
pub fn sign(z: C64) -> C64 {
    let a = z.norm();
    if a == 0.0 {
        ONE
    } else {
        z / a
    }
}

/// Builds the Householder vector that swaps the B-unit vectors `v` and `u`
/// up to the phase `alpha = -sign(uᴴBv)`: `H v = u alpha` and
/// `H u = v conj(alpha)`.
///
/// With `reorth`, `w` is projected once more against the columns of
/// `prior` (which must be B-orthonormal and B-orthogonal to `u`) before it
/// is normalized.
pub fn make_reflector(
    v: &[C64],
    u: &[C64],
    b: &BOperator,
    prior: &Matrix,
    reorth: bool,
) -> Result<(Vec<C64>, C64)> {
    let n = b.dim();
    if v.len() != n || u.len() != n {
        return Err(shape_mismatch("make_reflector", (n, 1), (v.len().max(u.len()), 1)));
    }
    if prior.rows() != n {
        return Err(shape_mismatch("make_reflector", (n, prior.cols()), prior.shape()));
    }
    let bv = b.apply_vec(v)?;
    let bu = b.apply_vec(u)?;
    let b_prior = b.apply(prior)?;
    let built = build_reflector(v, &bv, u, &bu, prior.view(), b_prior.view(), reorth, b)?;
    Ok((built.w, built.alpha))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn build_reflector(
    v: &[C64],
    bv: &[C64],
    u: &[C64],
    bu: &[C64],
    prior: View<'_>,
    b_prior: View<'_>,
    reorth: bool,
    b: &BOperator,
) -> Result<Built> {
    let alpha = -sign(dot(bu, v));
    let mut w: Vec<C64> = v.iter().zip(u).map(|(vi, ui)| vi - ui * alpha).collect();
    let mut bw: Vec<C64> = bv.iter().zip(bu).map(|(vi, ui)| vi - ui * alpha).collect();
    if reorth && prior.cols > 0 {
        // c = priorᴴ B w, then w -= prior c and Bw -= (B prior) c.
        let mut c = Matrix::zeros(prior.cols, 1);
        let wv = View {
            data: &w,
            rows: w.len(),
            cols: 1,
            ld: w.len(),
        };
        gemm_into(&mut c.view_mut(), b_prior, true, wv, false, false, ONE);
        let mut wm = Matrix::from_col_major(w.len(), 1, w).expect("column");
        let mut bwm = Matrix::from_col_major(bw.len(), 1, bw).expect("column");
        gemm_into(&mut wm.view_mut(), prior, false, c.view(), false, true, -ONE);
        gemm_into(&mut bwm.view_mut(), b_prior, false, c.view(), false, true, -ONE);
        w = wm.into_vec();
        bw = bwm.into_vec();
    }
    let (norm, _) = norm_from_product(&w, &bw, b);
    if !(norm >= DEGENERATE_NORM) {
        return Err(Error::DegenerateReflector { norm });
    }
    let inv = C64::new(1.0 / norm, 0.0);
    w.iter_mut().for_each(|x| *x *= inv);
    bw.iter_mut().for_each(|x| *x *= inv);
    Ok(Built { w, bw, alpha })
}

/// `M - 2 w (wᴴ B M)`; a zero `w` leaves `M` unchanged.
pub fn apply_reflector(w: &[C64], b: &BOperator, m: &Matrix) -> Result<Matrix> {
    if w.len() != b.dim() {
        return Err(shape_mismatch("apply_reflector", (b.dim(), 1), (w.len(), 1)));
    }
    if m.rows() != b.dim() {
        return Err(shape_mismatch("apply_reflector", (b.dim(), m.cols()), m.shape()));
    }
    let mut out = m.clone();
    if w.iter().all(|&x| x == ZERO) {
        return Ok(out);
    }
    let bw = b.apply_vec(w)?;
    for j in 0..out.cols() {
        reflect_column(w, &bw, out.col_mut(j));
    }
    Ok(out)
}

/// `x <- x - 2 w ((Bw)ᴴ x)`.
#[inline]
pub(crate) fn reflect_column(w: &[C64], bw: &[C64], x: &mut [C64]) {
    let s = dot(bw, x);
    axpy(-2.0 * s, w, x);
}

/// Unit upper triangular `T` with `H_1 ⋯ H_k = I - 2 W T Wᴴ B`.
pub fn wy_build(w: &Matrix, b: &BOperator) -> Result<Matrix> {
    if w.rows() != b.dim() {
        return Err(shape_mismatch("wy_build", (b.dim(), w.cols()), w.shape()));
    }
    let bw = b.apply(w)?;
    Ok(wy_build_from_products(w, &bw))
}

/// Expanding `(I - 2 W T Wᴴ B)(I - 2 w wᴴ B)` gives the new last column
/// `t = -2 T (Wᴴ B w)` above a unit diagonal.
pub(crate) fn wy_build_from_products(w: &Matrix, bw: &Matrix) -> Matrix {
    let k = w.cols();
    let mut t = Matrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = ONE;
        extend_t(&mut t, w, bw, 0, i);
    }
    t
}

/// Fills column `i` of `T` above the diagonal for the reflectors
/// `start..=i`, whose vectors occupy the same columns of `w`/`bw`.
pub(crate) fn extend_t(t: &mut Matrix, w: &Matrix, bw: &Matrix, start: usize, i: usize) {
    if i == start {
        return;
    }
    let wi = w.col(i);
    let z: Vec<C64> = (start..i).map(|l| dot(bw.col(l), wi)).collect();
    for r in start..i {
        let mut s = ZERO;
        for l in r..i {
            s += t[(r, l)] * z[l - start];
        }
        t[(r, i)] = -2.0 * s;
    }
}

/// Applies the aggregate `I - 2 W op(T) Wᴴ B` to `m`.
pub fn wy_apply(
    w: &Matrix,
    t: &Matrix,
    b: &BOperator,
    m: &Matrix,
    direction: Direction,
) -> Result<Matrix> {
    let n = b.dim();
    if w.rows() != n {
        return Err(shape_mismatch("wy_apply", (n, w.cols()), w.shape()));
    }
    if t.shape() != (w.cols(), w.cols()) {
        return Err(shape_mismatch("wy_apply", (w.cols(), w.cols()), t.shape()));
    }
    if m.rows() != n {
        return Err(shape_mismatch("wy_apply", (n, m.cols()), m.shape()));
    }
    let bw = b.apply(w)?;
    let mut out = m.clone();
    wy_apply_in_place(w.view(), bw.view(), t.view(), &mut out, 0..m.cols(), direction);
    Ok(out)
}

pub(crate) fn wy_apply_in_place(
    w: View<'_>,
    bw: View<'_>,
    t: View<'_>,
    m: &mut Matrix,
    cols: std::ops::Range<usize>,
    direction: Direction,
) {
    let k = w.cols;
    if k == 0 || cols.is_empty() {
        return;
    }
    let mcols = cols.len();
    // Z = (BW)ᴴ M, Y = op(T) Z, M -= 2 W Y.
    let mut z = Matrix::zeros(k, mcols);
    gemm_into(&mut z.view_mut(), bw, true, m.view_cols(cols.clone()), false, false, ONE);
    let mut y = Matrix::zeros(k, mcols);
    gemm_into(
        &mut y.view_mut(),
        t,
        direction == Direction::Adjoint,
        z.view(),
        false,
        false,
        ONE,
    );
    gemm_into(
        &mut m.view_cols_mut(cols),
        w,
        false,
        y.view(),
        false,
        true,
        C64::new(-2.0, 0.0),
    );
}
