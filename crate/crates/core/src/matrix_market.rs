//! MatrixMarket coordinate files (`real`, `general` or `symmetric`).
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write followed by a read reproduces every entry bit for bit.

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

/// A coordinate-format matrix as read from disk. Symmetric files store the
/// lower triangle only.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixMarket {
    pub nrows: usize,
    pub ncols: usize,
    pub symmetry: Symmetry,
    pub entries: Vec<(usize, usize, f64)>,
}

impl MatrixMarket {
    /// Expand to CSR, mirroring the stored triangle when symmetric.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut t = TripletBuilder::new(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            t.push(i, j, v);
            if self.symmetry == Symmetry::Symmetric && i != j {
                t.push(j, i, v);
            }
        }
        t.build()
    }
}

/// Serialize; for `Symmetric` only entries with `i ≥ j` are kept.
pub fn to_string(a: &CsrMatrix, symmetry: Symmetry) -> String {
    let entries: Vec<(usize, usize, f64)> = a
        .iter()
        .filter(|&(i, j, _)| symmetry == Symmetry::General || i >= j)
        .collect();
    let kind = match symmetry {
        Symmetry::General => "general",
        Symmetry::Symmetric => "symmetric",
    };
    let mut s = format!("%%MatrixMarket matrix coordinate real {kind}\n");
    let _ = writeln!(s, "{} {} {}", a.nrows(), a.ncols(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
    }
    s
}

pub fn write(path: &Path, a: &CsrMatrix, symmetry: Symmetry) -> Result<()> {
    std::fs::write(path, to_string(a, symmetry))?;
    Ok(())
}

/// Dense vector as an `n × 1` general coordinate matrix (zeros omitted).
pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut t = TripletBuilder::new(v.len(), 1);
    for (i, &x) in v.iter().enumerate() {
        if x != 0.0 {
            t.push(i, 0, x);
        }
    }
    write(path, &t.build(), Symmetry::General)
}

pub fn parse(text: &str) -> Result<MatrixMarket> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty MatrixMarket file".into()))?;
    let h: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if h.len() != 5
        || h[0] != "%%matrixmarket"
        || h[1] != "matrix"
        || h[2] != "coordinate"
        || h[3] != "real"
    {
        return Err(Error::Parse(format!(
            "unsupported MatrixMarket header `{header}`"
        )));
    }
    let symmetry = match h[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(Error::Parse(format!("unsupported symmetry `{other}`"))),
    };
    let mut data = lines.filter(|l| !l.trim().is_empty() && !l.starts_with('%'));
    let size = data
        .next()
        .ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Parse(format!("bad size line `{size}`")))
        })
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(Error::Parse(format!("bad size line `{size}`")));
    }
    let mut entries = Vec::with_capacity(dims[2]);
    for line in data {
        let tok: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parse(format!("bad entry `{line}`"));
        if tok.len() != 3 {
            return Err(bad());
        }
        let i: usize = tok[0].parse().map_err(|_| bad())?;
        let j: usize = tok[1].parse().map_err(|_| bad())?;
        let v: f64 = tok[2].parse().map_err(|_| bad())?;
        if i == 0 || j == 0 || i > dims[0] || j > dims[1] {
            return Err(bad());
        }
        entries.push((i - 1, j - 1, v));
    }
    if entries.len() != dims[2] {
        return Err(Error::Parse(format!(
            "expected {} entries, found {}",
            dims[2],
            entries.len()
        )));
    }
    Ok(MatrixMarket {
        nrows: dims[0],
        ncols: dims[1],
        symmetry,
        entries,
    })
}

pub fn read(path: &Path) -> Result<MatrixMarket> {
    parse(&std::fs::read_to_string(path)?)
}
