//! Matrix Market coordinate format (`real`, `general` or `symmetric`).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{BiotError, Result};

use super::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxSymmetry {
    General,
    /// Only the lower triangle is written.
    Symmetric,
}

/// Serializes with 17 significant digits, so values round-trip exactly.
pub fn to_matrix_market(m: &CsrMatrix, symmetry: MtxSymmetry) -> String {
    let kind = match symmetry {
        MtxSymmetry::General => "general",
        MtxSymmetry::Symmetric => "symmetric",
    };
    let entries: Vec<_> = m
        .triplets()
        .into_iter()
        .filter(|&(r, c, _)| symmetry == MtxSymmetry::General || r >= c)
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "%%MatrixMarket matrix coordinate real {kind}");
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), entries.len());
    for (r, c, v) in entries {
        let _ = writeln!(out, "{} {} {:.16e}", r + 1, c + 1, v);
    }
    out
}

pub fn write_matrix_market<W: Write>(w: &mut W, m: &CsrMatrix, symmetry: MtxSymmetry) -> Result<()> {
    w.write_all(to_matrix_market(m, symmetry).as_bytes())?;
    Ok(())
}

pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| BiotError::Parse("empty Matrix Market file".into()))??;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(BiotError::Parse(format!("unsupported header '{header}'")));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(BiotError::Parse(format!("unsupported field '{}'", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(BiotError::Parse(format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| BiotError::Parse(format!("'{s}': {e}")));
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(BiotError::Parse(format!("bad size line '{line}'")));
                }
                let s = (parse_usize(parts[0])?, parse_usize(parts[1])?, parse_usize(parts[2])?);
                triplets.reserve(s.2 * if symmetric { 2 } else { 1 });
                size = Some(s);
            }
            Some((nr, nc, _)) => {
                if parts.len() != 3 {
                    return Err(BiotError::Parse(format!("bad entry line '{line}'")));
                }
                let (r, c) = (parse_usize(parts[0])?, parse_usize(parts[1])?);
                let v: f64 = parts[2]
                    .parse()
                    .map_err(|e| BiotError::Parse(format!("'{}': {e}", parts[2])))?;
                if r == 0 || c == 0 || r > nr || c > nc {
                    return Err(BiotError::Parse(format!("entry ({r},{c}) out of bounds")));
                }
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| BiotError::Parse("missing size line".into()))?;
    let stored = if symmetric {
        triplets.iter().filter(|t| t.0 >= t.1).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(BiotError::Parse(format!("expected {nnz} entries, found {stored}")));
    }
    Ok(CsrMatrix::from_triplets(nr, nc, &triplets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_roundtrip_is_exact() {
        let m = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0 / 3.0), (1, 0, -2e-17), (0, 1, -2e-17), (2, 2, 7.25)]);
        let text = to_matrix_market(&m, MtxSymmetry::Symmetric);
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n"));
        let back = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_matrix_market("hello".as_bytes()).is_err());
        assert!(
            read_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n".as_bytes()).is_err()
        );
        assert!(
            read_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n".as_bytes()).is_err()
        );
    }

    proptest! {
        #[test]
        fn general_roundtrip(entries in proptest::collection::vec((0usize..6, 0usize..4, -1e6f64..1e6), 0..20)) {
            let m = CsrMatrix::from_triplets(6, 4, &entries);
            let back = read_matrix_market(to_matrix_market(&m, MtxSymmetry::General).as_bytes()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
