//! Matrix Market I/O for dense matrices.
//!
//! Reads `coordinate` and `array` files with `real`, `integer`, `complex`
//! or `pattern` fields and any of the four symmetry kinds. Writes `array`
//! files, using the `real` field when every imaginary part is zero. Values
//! are printed in the shortest form that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, C64};
use crate::operator::BOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
    Hermitian,
    SkewSymmetric,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<Matrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (lineno, header) = match lines.next() {
        Some((n, l)) => (n, l?),
        None => return Err(parse_err(1, "empty file")),
    };
    let (format, field, symmetry) = parse_header(lineno, &header)?;

    let mut data_lines = lines.filter_map(|(n, l)| match l {
        Ok(s) => {
            let t = s.trim().to_string();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok((n, t)))
            }
        }
        Err(e) => Some(Err(Error::from(e))),
    });

    let (size_line, size) = data_lines
        .next()
        .transpose()?
        .ok_or_else(|| parse_err(lineno + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| parse_err(size_line, format!("bad size entry '{t}'"))))
        .collect::<Result<_>>()?;
    let want = if format == Format::Coordinate { 3 } else { 2 };
    if dims.len() != want {
        return Err(parse_err(size_line, format!("expected {want} size entries, found {}", dims.len())));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if symmetry != Symmetry::General && rows != cols {
        return Err(parse_err(size_line, "symmetric storage requires a square matrix"));
    }
    let mut m = Matrix::zeros(rows, cols);

    let set = |m: &mut Matrix, i: usize, j: usize, v: C64| {
        m[(i, j)] = v;
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => m[(j, i)] = v,
                Symmetry::Hermitian => m[(j, i)] = v.conj(),
                Symmetry::SkewSymmetric => m[(j, i)] = -v,
            }
        }
    };

    match format {
        Format::Coordinate => {
            let nnz = dims[2];
            for _ in 0..nnz {
                let (n, line) = data_lines
                    .next()
                    .transpose()?
                    .ok_or_else(|| parse_err(size_line, format!("expected {nnz} entries")))?;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() < 2 {
                    return Err(parse_err(n, "expected row and column indices"));
                }
                let i = parse_index(n, toks[0], rows)?;
                let j = parse_index(n, toks[1], cols)?;
                let v = parse_value(n, &toks[2..], field)?;
                check_triangle(n, i, j, symmetry)?;
                set(&mut m, i, j, v);
            }
        }
        Format::Array => {
            if field == Field::Pattern {
                return Err(parse_err(lineno, "pattern field is not valid for array format"));
            }
            for j in 0..cols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric | Symmetry::Hermitian => j,
                    Symmetry::SkewSymmetric => j + 1,
                };
                for i in start..rows {
                    let (n, line) = data_lines
                        .next()
                        .transpose()?
                        .ok_or_else(|| parse_err(size_line, "too few entries"))?;
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    let v = parse_value(n, &toks, field)?;
                    set(&mut m, i, j, v);
                }
            }
        }
    }
    if let Some(extra) = data_lines.next() {
        let (n, _) = extra?;
        return Err(parse_err(n, "unexpected trailing data"));
    }
    Ok(m)
}

fn parse_header(line: usize, header: &str) -> Result<(Format, Field, Symmetry)> {
    let toks: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(parse_err(line, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let format = match toks[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(parse_err(line, format!("unknown format '{other}'"))),
    };
    let field = match toks[3].as_str() {
        "real" | "double" | "integer" => Field::Real,
        "complex" => Field::Complex,
        "pattern" => Field::Pattern,
        other => return Err(parse_err(line, format!("unknown field '{other}'"))),
    };
    let symmetry = match toks[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "hermitian" => Symmetry::Hermitian,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(line, format!("unknown symmetry '{other}'"))),
    };
    if symmetry == Symmetry::Hermitian && field != Field::Complex {
        // Real hermitian is the same as real symmetric.
        return Ok((format, field, Symmetry::Symmetric));
    }
    Ok((format, field, symmetry))
}

fn parse_index(line: usize, tok: &str, bound: usize) -> Result<usize> {
    let i: usize = tok
        .parse()
        .map_err(|_| parse_err(line, format!("bad index '{tok}'")))?;
    if i == 0 || i > bound {
        return Err(parse_err(line, format!("index {i} out of range 1..={bound}")));
    }
    Ok(i - 1)
}

fn parse_float(line: usize, tok: &str) -> Result<f64> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad number '{tok}'")))
}

fn parse_value(line: usize, toks: &[&str], field: Field) -> Result<C64> {
    let want = match field {
        Field::Pattern => 0,
        Field::Real => 1,
        Field::Complex => 2,
    };
    if toks.len() != want {
        return Err(parse_err(line, format!("expected {want} value(s), found {}", toks.len())));
    }
    Ok(match field {
        Field::Pattern => C64::new(1.0, 0.0),
        Field::Real => C64::new(parse_float(line, toks[0])?, 0.0),
        Field::Complex => C64::new(parse_float(line, toks[0])?, parse_float(line, toks[1])?),
    })
}

fn check_triangle(line: usize, i: usize, j: usize, symmetry: Symmetry) -> Result<()> {
    match symmetry {
        Symmetry::General => Ok(()),
        Symmetry::SkewSymmetric if i <= j => Err(parse_err(line, "skew-symmetric entries must lie below the diagonal")),
        _ if i < j => Err(parse_err(line, "symmetric entries must lie on or below the diagonal")),
        _ => Ok(()),
    }
}

/// Writes `m` in `array` format with the given symmetry. For anything other
/// than [`Symmetry::General`] only the lower triangle is written, and the
/// caller is responsible for `m` actually having that symmetry.
pub fn write_matrix_market<W: Write>(mut w: W, m: &Matrix, symmetry: Symmetry) -> Result<()> {
    let real = m.as_slice().iter().all(|z| z.im == 0.0);
    let sym = match symmetry {
        Symmetry::General => "general",
        Symmetry::Symmetric => "symmetric",
        Symmetry::Hermitian if real => "symmetric",
        Symmetry::Hermitian => "hermitian",
        Symmetry::SkewSymmetric => "skew-symmetric",
    };
    if symmetry != Symmetry::General && m.rows() != m.cols() {
        return Err(Error::InvalidArgument("symmetric storage requires a square matrix".into()));
    }
    let field = if real { "real" } else { "complex" };
    writeln!(w, "%%MatrixMarket matrix array {field} {sym}")?;
    writeln!(w, "{} {}", m.rows(), m.cols())?;
    for j in 0..m.cols() {
        let start = match symmetry {
            Symmetry::General => 0,
            Symmetry::Symmetric | Symmetry::Hermitian => j,
            Symmetry::SkewSymmetric => j + 1,
        };
        for z in &m.col(j)[start..] {
            if real {
                writeln!(w, "{:e}", z.re)?;
            } else {
                writeln!(w, "{:e} {:e}", z.re, z.im)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_matrix_market(BufReader::new(f))
}

pub fn write_matrix_file(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_matrix_market(BufWriter::new(f), m, Symmetry::General)
}

/// Reads an explicit `B`; it is symmetrized on construction.
pub fn read_b_operator(path: impl AsRef<Path>) -> Result<BOperator> {
    BOperator::explicit(read_matrix_file(path)?)
}

/// Writes the stored matrix of an explicit `B` as a Hermitian array file.
pub fn write_b_operator(path: impl AsRef<Path>, b: &BOperator) -> Result<()> {
    let m = b
        .matrix()
        .ok_or_else(|| Error::InvalidArgument("only explicit operators can be written".into()))?;
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_matrix_market(BufWriter::new(f), m, Symmetry::Hermitian)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<Matrix> {
        read_matrix_market(s.as_bytes())
    }

    #[test]
    fn coordinate_real_general() {
        let m = read("%%MatrixMarket matrix coordinate real general\n% comment\n2 3 2\n1 1 1.5\n2 3 -2\n").unwrap();
        let want = Matrix::from_real_rows(&[[1.5, 0.0, 0.0], [0.0, 0.0, -2.0]]).unwrap();
        assert_eq!(m, want);
    }

    #[test]
    fn coordinate_hermitian_mirrors_conjugate() {
        let m = read("%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n1 1 2 0\n2 1 1 3\n").unwrap();
        assert_eq!(m[(1, 0)], C64::new(1.0, 3.0));
        assert_eq!(m[(0, 1)], C64::new(1.0, -3.0));
    }

    #[test]
    fn array_symmetric_and_skew() {
        let m = read("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n").unwrap();
        assert_eq!(m, Matrix::from_real_rows(&[[1.0, 2.0], [2.0, 3.0]]).unwrap());
        let s = read("%%MatrixMarket matrix array real skew-symmetric\n2 2\n4\n").unwrap();
        assert_eq!(s, Matrix::from_real_rows(&[[0.0, -4.0], [4.0, 0.0]]).unwrap());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let vals = [0.1, -1.0 / 3.0, 1e-300, 5e-324, f64::MAX, -0.0, 123456789.0];
        let m = Matrix::from_fn(7, 2, |i, j| C64::new(vals[i], vals[(i + j) % 7] * 0.7));
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &m, Symmetry::General).unwrap();
        let back = read_matrix_market(buf.as_slice()).unwrap();
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn hermitian_round_trip() {
        let m = Matrix::from_rows(&[
            [C64::new(2.0, 0.0), C64::new(1.0, -1.0)],
            [C64::new(1.0, 1.0), C64::new(3.0, 0.0)],
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &m, Symmetry::Hermitian).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("%%MatrixMarket matrix array complex hermitian"));
        assert_eq!(read_matrix_market(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn errors_name_the_line() {
        let e = read("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        assert!(e.to_string().contains("line 3"));
        let e = read("%%MatrixMarket matrix array real general\n2 2\n1\n2\nnope\n4\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 5, .. }), "{e:?}");
        let e = read("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        let e = read("%%MatrixMarket tensor array real general\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = read("%%MatrixMarket matrix array real general\n1 1\n1\n2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }));
        assert!(read("").is_err());
    }
}
