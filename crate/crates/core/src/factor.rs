//! Householder orthogonalization drivers in the B-inner product.
//!
//! Given `X` (`n x k`), a Hermitian positive-definite `B` and a B-orthonormal
//! `U` (`UᴴBU = I`), each driver computes `X = Q R` with `QᴴBQ = I` by
//! building reflections `H_i` that send `u_i` onto the normalized residual
//! of column `i`, and then forming `Q = H_1 ⋯ H_k U`.
//!
//! All drivers return `R` with a real non-negative diagonal. The phase
//! `alpha_i` picked for numerical safety is moved into column `i` of `Q`.

use crate::dense::{cholesky, spectral_norm, upper_triangular_inverse};
use crate::error::{shape_mismatch, Error, Result};
use crate::matrix::{axpy, dot, gemm_into, Matrix, View, C64, ONE, ZERO};
use crate::operator::{b_norm, norm_from_product, BOperator};
use crate::reflector::{
    build_reflector, extend_t, reflect_column, wy_apply_in_place, Direction, ReflectorSet,
};

/// `||UᴴBU - I||_2` above which the initial basis is reported as suspect.
pub const BASIS_WARN_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct OrthOptions {
    /// Re-project each Householder vector against the already used basis
    /// vectors before normalizing it.
    pub reorth: bool,
    /// Zero means a column is deflated only when its residual B-norm is
    /// exactly zero. A positive value deflates when the residual drops to
    /// `deflation_tol` times the column's original B-norm.
    pub deflation_tol: f64,
    /// Panel width of the blocked driver.
    pub panel_width: usize,
}

impl Default for OrthOptions {
    fn default() -> Self {
        Self {
            reorth: true,
            deflation_tol: 0.0,
            panel_width: 32,
        }
    }
}

impl OrthOptions {
    fn validate(&self) -> Result<()> {
        if !(self.deflation_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "deflation_tol must be >= 0, got {}",
                self.deflation_tol
            )));
        }
        if self.panel_width == 0 {
            return Err(Error::InvalidArgument("panel_width must be >= 1".into()));
        }
        Ok(())
    }
}

/// `X = Q R` with `QᴴBQ = I`.
///
/// For the Householder drivers `q` has all `k` columns even when `X` is rank
/// deficient, and `r` is `k x k`. Gram–Schmidt results keep only accepted
/// columns: `q` is `n x rank` and `r` is `rank x k`.
#[derive(Clone, Debug)]
pub struct QRFactorization {
    pub q: Matrix,
    pub r: Matrix,
    pub reflectors: ReflectorSet,
    pub numerical_rank: usize,
    pub deflated: Vec<bool>,
}

impl QRFactorization {
    /// Number of basis vectors returned in `q`.
    pub fn rank_q(&self) -> usize {
        self.q.cols()
    }
}

/// A B-orthonormal starting basis together with `BU`, which every driver
/// needs and which can be reused across factorizations with the same `B`.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    u: Matrix,
    bu: Matrix,
    orthogonality_error: f64,
}

impl OrthoBasis {
    pub fn new(b: &BOperator, u: Matrix) -> Result<Self> {
        if u.rows() != b.dim() {
            return Err(shape_mismatch("OrthoBasis::new", (b.dim(), u.cols()), u.shape()));
        }
        if !u.is_finite() {
            return Err(Error::NonFinite { what: "U" });
        }
        let bu = b.apply(&u)?;
        let gram = u.adjoint_matmul(&bu)?;
        let orthogonality_error = spectral_norm(&gram.sub(&Matrix::identity(u.cols()))?);
        if !(orthogonality_error <= BASIS_WARN_TOL) {
            log::warn!(
                "initial basis is not B-orthonormal: ||U^H B U - I||_2 = {orthogonality_error:e}"
            );
        }
        Ok(Self {
            u,
            bu,
            orthogonality_error,
        })
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn bu(&self) -> &Matrix {
        &self.bu
    }

    /// `||UᴴBU - I||_2`.
    pub fn orthogonality_error(&self) -> f64 {
        self.orthogonality_error
    }

    pub fn into_u(self) -> Matrix {
        self.u
    }
}

/// `U = [R̃⁻¹; 0]` where `R̃ᴴR̃` is the leading `k x k` block of `B`.
///
/// In callback form the block is assembled as `E_kᴴ (B E_k)`, costing `k`
/// products with `B`.
pub fn initial_basis(b: &BOperator, k: usize) -> Result<Matrix> {
    let n = b.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "initial basis needs 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let leading = match b.matrix() {
        Some(m) => m.block(0..k, 0..k),
        None => b.apply(&Matrix::eye(n, k))?.block(0..k, 0..k),
    };
    let r = cholesky(&leading).map_err(|e| match e {
        Error::NotPositiveDefinite { index } => Error::InitialBasisFailure { index },
        other => other,
    })?;
    let rinv = upper_triangular_inverse(&r)?;
    let mut u = Matrix::zeros(n, k);
    for j in 0..k {
        u.col_mut(j)[..k].copy_from_slice(rinv.col(j));
    }
    Ok(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Driver {
    RightLooking,
    LeftLooking,
    Blocked,
}

/// Runs `driver` against a prepared basis.
pub fn householder_qr(
    driver: Driver,
    x: &Matrix,
    b: &BOperator,
    basis: &OrthoBasis,
    opts: &OrthOptions,
) -> Result<QRFactorization> {
    check_inputs(x, b, basis)?;
    opts.validate()?;
    match driver {
        Driver::RightLooking => right_looking(x, b, basis, opts),
        Driver::LeftLooking => {
            let mut ll = LeftLooking::new(b, basis, opts.clone())?;
            for j in 0..x.cols() {
                ll.push_column(x.col(j))?;
            }
            ll.finish()
        }
        Driver::Blocked => {
            if opts.panel_width > x.cols().max(1) {
                return Err(Error::InvalidArgument(format!(
                    "panel_width {} exceeds k = {}",
                    opts.panel_width,
                    x.cols()
                )));
            }
            blocked(x, b, basis, opts)
        }
    }
}

/// Right-looking driver: after step `i` every trailing column is reflected
/// by `H_i` and stripped of its `u_i` component.
pub fn householder_qr_right(
    x: &Matrix,
    b: &BOperator,
    u: &Matrix,
    opts: &OrthOptions,
) -> Result<QRFactorization> {
    let basis = OrthoBasis::new(b, u.clone())?;
    householder_qr(Driver::RightLooking, x, b, &basis, opts)
}

/// Left-looking driver: column `i` receives `H_{i-1} ⋯ H_1` (through the
/// WY form) and one classical Gram–Schmidt projection just before it is
/// reduced. See [`LeftLooking`] for column-at-a-time use.
pub fn householder_qr_left(
    x: &Matrix,
    b: &BOperator,
    u: &Matrix,
    opts: &OrthOptions,
) -> Result<QRFactorization> {
    let basis = OrthoBasis::new(b, u.clone())?;
    householder_qr(Driver::LeftLooking, x, b, &basis, opts)
}

/// Blocked driver: panels of `opts.panel_width` columns are factored
/// left-looking, then the trailing columns get one WY application and one
/// block projection per panel.
pub fn householder_qr_block(
    x: &Matrix,
    b: &BOperator,
    u: &Matrix,
    opts: &OrthOptions,
) -> Result<QRFactorization> {
    let basis = OrthoBasis::new(b, u.clone())?;
    householder_qr(Driver::Blocked, x, b, &basis, opts)
}

fn check_inputs(x: &Matrix, b: &BOperator, basis: &OrthoBasis) -> Result<()> {
    let n = b.dim();
    if x.rows() != n {
        return Err(shape_mismatch("householder_qr", (n, x.cols()), x.shape()));
    }
    if basis.u.shape() != x.shape() {
        return Err(shape_mismatch("householder_qr (U)", x.shape(), basis.u.shape()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite { what: "X" });
    }
    Ok(())
}

/// Shared bookkeeping of the drivers.
struct State<'a> {
    b: &'a BOperator,
    basis: &'a OrthoBasis,
    opts: OrthOptions,
    refl: ReflectorSet,
    /// `R` before the phases are moved into `Q`.
    r: Matrix,
    deflated: Vec<bool>,
    t: Matrix,
}

impl<'a> State<'a> {
    fn new(b: &'a BOperator, basis: &'a OrthoBasis, opts: OrthOptions) -> Self {
        let k = basis.u.cols();
        Self {
            b,
            basis,
            opts,
            refl: ReflectorSet::new(b.dim()),
            r: Matrix::zeros(k, k),
            deflated: Vec::with_capacity(k),
            t: Matrix::zeros(k, k),
        }
    }

    fn k(&self) -> usize {
        self.basis.u.cols()
    }

    /// Normalizes the reduced column `i` and builds `H_i`. The residual
    /// B-norm is always taken from a fresh product with `B`, since `x` is
    /// typically the result of heavy cancellation.
    fn reduce_column(&mut self, i: usize, x: &[C64], original: &[C64]) -> Result<()> {
        debug_assert_eq!(self.refl.len(), i);
        let bx = self.b.apply_vec(x)?;
        let (rii, _) = norm_from_product(x, &bx, self.b);
        let tol = self.opts.deflation_tol;
        let deflate = rii == 0.0 || (tol > 0.0 && rii <= tol * b_norm(original, self.b)?);
        if deflate {
            self.r[(i, i)] = ZERO;
            self.deflated.push(true);
            self.refl.push_identity();
            return Ok(());
        }
        let inv = 1.0 / rii;
        let v: Vec<C64> = x.iter().map(|z| z * inv).collect();
        let bv: Vec<C64> = bx.iter().map(|z| z * inv).collect();
        let built = build_reflector(
            &v,
            &bv,
            self.basis.u.col(i),
            self.basis.bu.col(i),
            self.basis.u.view_cols(0..i),
            self.basis.bu.view_cols(0..i),
            self.opts.reorth,
            self.b,
        )?;
        self.r[(i, i)] = C64::new(rii, 0.0);
        self.deflated.push(false);
        self.refl.push(&built.w, &built.bw, Some(built.alpha));
        Ok(())
    }

    /// Left-looking preparation of column `i` inside a panel that starts at
    /// `start`: apply `H_{i-1} ⋯ H_start` in WY form, then remove the
    /// components along `u_start … u_{i-1}` (recorded in `R`).
    fn prepare_column(&mut self, start: usize, i: usize, x: &mut [C64]) {
        if i == start {
            return;
        }
        let w = &self.refl.w;
        let bw = &self.refl.bw;
        let z: Vec<C64> = (start..i).map(|l| dot(bw.col(l), x)).collect();
        for r in start..i {
            // (Tᴴ z)_r = sum_{l <= r} conj(T[l, r]) z_l
            let mut y = ZERO;
            for l in start..=r {
                y += self.t[(l, r)].conj() * z[l - start];
            }
            axpy(-2.0 * y, w.col(r), x);
        }
        let coeffs: Vec<C64> = (start..i).map(|l| dot(self.basis.bu.col(l), x)).collect();
        for (l, c) in (start..i).zip(coeffs) {
            axpy(-c, self.basis.u.col(l), x);
            self.r[(l, i)] = c;
        }
    }

    fn extend_wy(&mut self, start: usize, i: usize) {
        self.t[(i, i)] = ONE;
        extend_t(&mut self.t, &self.refl.w, &self.refl.bw, start, i);
    }

    fn finish(mut self, keep_t: bool) -> Result<QRFactorization> {
        let q = assemble_q(&self.refl, &self.basis.u, self.b)?;
        let k = self.k();
        for (i, phase) in self.refl.phases.iter().enumerate() {
            if let Some(alpha) = phase {
                for j in (i + 1)..k {
                    self.r[(i, j)] *= alpha.conj();
                }
            }
        }
        if keep_t {
            self.refl.wy_t = Some(self.t);
        }
        let numerical_rank = self.deflated.iter().filter(|&&d| !d).count();
        Ok(QRFactorization {
            q,
            r: self.r,
            reflectors: self.refl,
            numerical_rank,
            deflated: self.deflated,
        })
    }
}

/// `Q = H_1 ⋯ H_k U` by a reverse sweep that applies `H_i` only to columns
/// `i..k` (earlier basis vectors are left fixed by later reflections), with
/// column `i` finally multiplied by `alpha_i`.
pub fn assemble_q(reflectors: &ReflectorSet, u: &Matrix, b: &BOperator) -> Result<Matrix> {
    let n = b.dim();
    if u.rows() != n || reflectors.dim() != n {
        return Err(shape_mismatch("assemble_q", (n, reflectors.len()), u.shape()));
    }
    if u.cols() != reflectors.len() {
        return Err(shape_mismatch("assemble_q", (n, reflectors.len()), u.shape()));
    }
    let k = u.cols();
    let mut q = u.clone();
    for i in (0..k).rev() {
        if reflectors.phases[i].is_none() {
            continue;
        }
        let w = reflectors.w.col(i);
        let bw = reflectors.bw.col(i);
        for j in i..k {
            reflect_column(w, bw, q.col_mut(j));
        }
    }
    for (i, phase) in reflectors.phases.iter().enumerate() {
        if let Some(alpha) = phase {
            q.col_mut(i).iter_mut().for_each(|z| *z *= alpha);
        }
    }
    Ok(q)
}

fn right_looking(
    x: &Matrix,
    b: &BOperator,
    basis: &OrthoBasis,
    opts: &OrthOptions,
) -> Result<QRFactorization> {
    let k = x.cols();
    let mut st = State::new(b, basis, opts.clone());
    let mut work = x.clone();
    for i in 0..k {
        let col = work.col(i).to_vec();
        st.reduce_column(i, &col, x.col(i))?;
        let u_i = basis.u.col(i);
        let bu_i = basis.bu.col(i);
        let w_i = st.refl.w.col(i);
        let bw_i = st.refl.bw.col(i);
        let reflect = !st.deflated[i];
        for j in (i + 1)..k {
            let xj = work.col_mut(j);
            if reflect {
                reflect_column(w_i, bw_i, xj);
            }
            let rij = dot(bu_i, xj);
            axpy(-rij, u_i, xj);
            st.r[(i, j)] = rij;
        }
    }
    st.finish(false)
}

fn blocked(
    x: &Matrix,
    b: &BOperator,
    basis: &OrthoBasis,
    opts: &OrthOptions,
) -> Result<QRFactorization> {
    let k = x.cols();
    let width = opts.panel_width;
    let mut st = State::new(b, basis, opts.clone());
    let mut work = x.clone();
    let mut c0 = 0;
    while c0 < k {
        let c1 = (c0 + width).min(k);
        for i in c0..c1 {
            let mut col = work.col(i).to_vec();
            st.prepare_column(c0, i, &mut col);
            st.reduce_column(i, &col, x.col(i))?;
            st.extend_wy(c0, i);
        }
        if c1 < k {
            let p = c1 - c0;
            let t_block = View {
                data: &st.t.as_slice()[c0 + c0 * k..],
                rows: p,
                cols: p,
                ld: k,
            };
            wy_apply_in_place(
                st.refl.w.view_cols(c0..c1),
                st.refl.bw.view_cols(c0..c1),
                t_block,
                &mut work,
                c1..k,
                Direction::Adjoint,
            );
            let mut rb = Matrix::zeros(p, k - c1);
            gemm_into(
                &mut rb.view_mut(),
                basis.bu.view_cols(c0..c1),
                true,
                work.view_cols(c1..k),
                false,
                false,
                ONE,
            );
            gemm_into(
                &mut work.view_cols_mut(c1..k),
                basis.u.view_cols(c0..c1),
                false,
                rb.view(),
                false,
                true,
                -ONE,
            );
            for jj in 0..(k - c1) {
                for ii in 0..p {
                    st.r[(c0 + ii, c1 + jj)] = rb[(ii, jj)];
                }
            }
        }
        c0 = c1;
    }
    st.finish(false)
}

/// Left-looking factorization fed one column at a time, as in a
/// Lanczos/Arnoldi process that produces its vectors on the fly.
pub struct LeftLooking<'a> {
    state: State<'a>,
}

impl<'a> LeftLooking<'a> {
    /// Capacity is `basis.u().cols()` columns.
    pub fn new(b: &'a BOperator, basis: &'a OrthoBasis, opts: OrthOptions) -> Result<Self> {
        opts.validate()?;
        if basis.u.rows() != b.dim() {
            return Err(shape_mismatch("LeftLooking::new", (b.dim(), basis.u.cols()), basis.u.shape()));
        }
        Ok(Self {
            state: State::new(b, basis, opts),
        })
    }

    pub fn len(&self) -> usize {
        self.state.refl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.refl.is_empty()
    }

    pub fn push_column(&mut self, x: &[C64]) -> Result<()> {
        let i = self.len();
        if i >= self.state.k() {
            return Err(Error::InvalidArgument(format!(
                "basis has only {} columns",
                self.state.k()
            )));
        }
        if x.len() != self.state.b.dim() {
            return Err(shape_mismatch("LeftLooking::push_column", (self.state.b.dim(), 1), (x.len(), 1)));
        }
        if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite { what: "X" });
        }
        let mut col = x.to_vec();
        self.state.prepare_column(0, i, &mut col);
        self.state.reduce_column(i, &col, x)?;
        self.state.extend_wy(0, i);
        Ok(())
    }

    /// Factorization of the columns pushed so far; requires all `k`.
    pub fn finish(self) -> Result<QRFactorization> {
        if self.len() != self.state.k() {
            return Err(Error::InvalidArgument(format!(
                "{} of {} columns pushed",
                self.len(),
                self.state.k()
            )));
        }
        self.state.finish(true)
    }
}
