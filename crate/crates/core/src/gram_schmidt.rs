//! Gram–Schmidt in the B-inner product, used as a comparator for the
//! Householder drivers.

use std::fmt;
use std::str::FromStr;

use crate::error::{shape_mismatch, Error, Result};
use crate::factor::QRFactorization;
use crate::matrix::{axpy, dot, Matrix, C64};
use crate::operator::BOperator;
use crate::reflector::ReflectorSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GsVariant {
    /// Classical: all coefficients from the unmodified column.
    Cgs,
    /// Modified: coefficients taken one at a time from the updated column.
    Mgs,
    /// Classical with one unconditional second pass.
    Cgs2,
    /// Modified with one unconditional second pass.
    Mgs2,
}

impl GsVariant {
    pub const ALL: [GsVariant; 4] = [GsVariant::Cgs, GsVariant::Mgs, GsVariant::Cgs2, GsVariant::Mgs2];

    pub fn name(self) -> &'static str {
        match self {
            GsVariant::Cgs => "cgs",
            GsVariant::Mgs => "mgs",
            GsVariant::Cgs2 => "cgs2",
            GsVariant::Mgs2 => "mgs2",
        }
    }

    fn modified(self) -> bool {
        matches!(self, GsVariant::Mgs | GsVariant::Mgs2)
    }

    fn passes(self) -> usize {
        match self {
            GsVariant::Cgs | GsVariant::Mgs => 1,
            GsVariant::Cgs2 | GsVariant::Mgs2 => 2,
        }
    }
}

impl fmt::Display for GsVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GsVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GsVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown Gram-Schmidt variant '{s}'")))
    }
}

/// What the reorthogonalized variants record in `R` for the second pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SecondPassCoefficients {
    /// Both passes are summed, so `X ≈ Q R`.
    #[default]
    Summed,
    /// Only first-pass coefficients are kept. The second pass still
    /// changes `Q`, so `X - Q R` retains whatever it removed.
    Discarded,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GsOptions {
    /// A column with `q̂ᴴBq̂ <= drop_tol` is dropped.
    pub drop_tol: f64,
    pub second_pass: SecondPassCoefficients,
}

/// Orthogonalizes the columns of `x` one after another.
///
/// A column whose residual satisfies `q̂ᴴBq̂ <= drop_tol` is dropped: it is
/// marked deflated and contributes no column to `Q` and no row to `R`. The
/// returned `q` is `n x rank` and `r` is `rank x k`, so `X ≈ Q R` holds for
/// every column including the dropped ones. Coefficients from both passes
/// of the reorthogonalized variants are summed into `R`.
pub fn gram_schmidt(
    x: &Matrix,
    b: &BOperator,
    variant: GsVariant,
    drop_tol: f64,
) -> Result<QRFactorization> {
    gram_schmidt_with(
        x,
        b,
        variant,
        &GsOptions {
            drop_tol,
            ..Default::default()
        },
    )
}

pub fn gram_schmidt_with(
    x: &Matrix,
    b: &BOperator,
    variant: GsVariant,
    opts: &GsOptions,
) -> Result<QRFactorization> {
    let drop_tol = opts.drop_tol;
    let n = b.dim();
    let k = x.cols();
    if x.rows() != n {
        return Err(shape_mismatch("gram_schmidt", (n, k), x.shape()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite { what: "X" });
    }
    if drop_tol.is_nan() {
        return Err(Error::InvalidArgument("drop_tol is NaN".into()));
    }
    let mut q = Matrix::zeros(n, 0);
    let mut bq = Matrix::zeros(n, 0);
    // coeffs[j][a]: coefficient of accepted column a in original column j.
    let mut coeffs: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut deflated = Vec::with_capacity(k);
    for j in 0..k {
        let mut col = x.column_vec(j);
        let mut c = vec![C64::new(0.0, 0.0); q.cols()];
        for pass in 0..variant.passes() {
            if pass == 0 || opts.second_pass == SecondPassCoefficients::Summed {
                project(&mut col, &q, &bq, &mut c, variant.modified());
            } else {
                let mut discard = vec![C64::new(0.0, 0.0); q.cols()];
                project(&mut col, &q, &bq, &mut discard, variant.modified());
            }
        }
        let bcol = b.apply_vec(&col)?;
        let nrm2 = dot(&col, &bcol).re;
        if nrm2 <= drop_tol || !nrm2.is_finite() {
            deflated.push(true);
            coeffs.push(c);
            continue;
        }
        let r = nrm2.sqrt();
        let inv = 1.0 / r;
        col.iter_mut().for_each(|z| *z *= inv);
        let bcol: Vec<C64> = bcol.iter().map(|z| z * inv).collect();
        q.push_col(&col);
        bq.push_col(&bcol);
        c.push(C64::new(r, 0.0));
        deflated.push(false);
        coeffs.push(c);
    }
    let rank = q.cols();
    let mut r = Matrix::zeros(rank, k);
    for (j, c) in coeffs.iter().enumerate() {
        for (a, v) in c.iter().enumerate() {
            r[(a, j)] = *v;
        }
    }
    Ok(QRFactorization {
        q,
        r,
        reflectors: ReflectorSet::new(n),
        numerical_rank: rank,
        deflated,
    })
}

fn project(col: &mut [C64], q: &Matrix, bq: &Matrix, c: &mut [C64], modified: bool) {
    if modified {
        for a in 0..q.cols() {
            let s = dot(bq.col(a), col);
            axpy(-s, q.col(a), col);
            c[a] += s;
        }
    } else {
        let s: Vec<C64> = (0..q.cols()).map(|a| dot(bq.col(a), col)).collect();
        for (a, s) in s.into_iter().enumerate() {
            axpy(-s, q.col(a), col);
            c[a] += s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_input_is_returned_unchanged() {
        let b = BOperator::explicit(Matrix::diag_real(&[4.0, 1.0, 9.0])).unwrap();
        let x = Matrix::from_real_rows(&[[0.5, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
        for v in GsVariant::ALL {
            let qr = gram_schmidt(&x, &b, v, 0.0).unwrap();
            assert!(qr.q.sub(&x).unwrap().norm_max() < 1e-13, "{v}");
            assert!(qr.r.sub(&Matrix::identity(2)).unwrap().norm_max() < 1e-13, "{v}");
        }
    }

    #[test]
    fn duplicate_column_is_dropped() {
        let b = BOperator::identity(3);
        let x = Matrix::from_real_rows(&[[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]]).unwrap();
        for v in GsVariant::ALL {
            let qr = gram_schmidt(&x, &b, v, 0.0).unwrap();
            assert_eq!(qr.numerical_rank, 1);
            assert_eq!(qr.q.shape(), (3, 1));
            assert_eq!(qr.r.shape(), (1, 2));
            assert_eq!(qr.deflated, vec![false, true]);
            let res = qr.q.matmul(&qr.r).unwrap().sub(&x).unwrap();
            assert_eq!(res.norm_max(), 0.0);
        }
    }

    #[test]
    fn second_pass_coefficients_are_summed() {
        let b = BOperator::identity(3);
        let x = Matrix::from_real_rows(&[[1.0, 1.0], [0.0, 1e-9], [1e-3, 0.0]]).unwrap();
        for v in GsVariant::ALL {
            let qr = gram_schmidt(&x, &b, v, 0.0).unwrap();
            let res = qr.q.matmul(&qr.r).unwrap().sub(&x).unwrap();
            assert!(res.norm_max() < 1e-15, "{v}");
        }
    }

    #[test]
    fn discarded_second_pass_keeps_first_pass_r() {
        let b = BOperator::identity(3);
        let x = Matrix::from_real_rows(&[[1.0, 1.0], [0.0, 1e-9], [1e-3, 0.0]]).unwrap();
        let opts = GsOptions {
            second_pass: SecondPassCoefficients::Discarded,
            ..Default::default()
        };
        let one = gram_schmidt(&x, &b, GsVariant::Cgs, 0.0).unwrap();
        let two = gram_schmidt_with(&x, &b, GsVariant::Cgs2, &opts).unwrap();
        assert_eq!(one.r[(0, 1)], two.r[(0, 1)]);
        // Single-pass variants ignore the setting.
        let mgs = gram_schmidt_with(&x, &b, GsVariant::Mgs, &opts).unwrap();
        assert_eq!(mgs.r, gram_schmidt(&x, &b, GsVariant::Mgs, 0.0).unwrap().r);
    }

    #[test]
    fn parse_and_errors() {
        assert_eq!("mgs2".parse::<GsVariant>().unwrap(), GsVariant::Mgs2);
        assert!("gs".parse::<GsVariant>().is_err());
        let b = BOperator::identity(3);
        assert!(gram_schmidt(&Matrix::zeros(2, 1), &b, GsVariant::Cgs, 0.0).is_err());
    }
}
