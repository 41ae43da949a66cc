//! MatrixMarket reading/writing and factorization files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{LelaError, Result};
use crate::linalg::{DenseMatrix, Factorization};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

/// Parse a real MatrixMarket matrix (array or coordinate, general or
/// symmetric) into a dense matrix.
pub fn parse_matrix_market(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| LelaError::Parse("empty MatrixMarket input".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(LelaError::Parse(format!("bad MatrixMarket banner: {header}")));
    }
    let layout = match tokens[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(LelaError::Parse(format!("unsupported layout {other}"))),
    };
    if !matches!(tokens[3].as_str(), "real" | "integer" | "double") {
        return Err(LelaError::Parse(format!("unsupported field {}", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(LelaError::Parse(format!("unsupported symmetry {other}"))),
    };

    let mut body = lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size_line = body.next().ok_or_else(|| LelaError::Parse("missing size line".into()))?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| LelaError::Parse(format!("bad size token {t}"))))
        .collect::<Result<_>>()?;
    let num = |t: &str| -> Result<f64> { t.parse().map_err(|_| LelaError::Parse(format!("bad number {t}"))) };

    match layout {
        Layout::Array => {
            let [n, d] = sizes[..] else {
                return Err(LelaError::Parse("array size line needs 2 fields".into()));
            };
            let values: Vec<f64> = body.flat_map(|l| l.split_whitespace().map(num).collect::<Vec<_>>()).collect::<Result<_>>()?;
            if symmetric {
                if n != d {
                    return Err(LelaError::Parse("symmetric matrix must be square".into()));
                }
                let mut m = DenseMatrix::zeros(n, n);
                let mut it = values.into_iter();
                for j in 0..n {
                    for i in j..n {
                        let x = it.next().ok_or_else(|| LelaError::Parse("too few entries".into()))?;
                        m.set(i, j, x);
                        m.set(j, i, x);
                    }
                }
                DenseMatrix::new(n, n, m.into_data())
            } else {
                if values.len() != n * d {
                    return Err(LelaError::Parse(format!("expected {} entries, found {}", n * d, values.len())));
                }
                DenseMatrix::new(n, d, values)
            }
        }
        Layout::Coordinate => {
            let [n, d, count] = sizes[..] else {
                return Err(LelaError::Parse("coordinate size line needs 3 fields".into()));
            };
            let mut m = DenseMatrix::zeros(n, d);
            let mut seen = 0;
            for line in body {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() < 3 {
                    return Err(LelaError::Parse(format!("bad entry line: {line}")));
                }
                let i: usize = f[0].parse().map_err(|_| LelaError::Parse(format!("bad row index {}", f[0])))?;
                let j: usize = f[1].parse().map_err(|_| LelaError::Parse(format!("bad column index {}", f[1])))?;
                if i == 0 || j == 0 || i > n || j > d {
                    return Err(LelaError::Parse(format!("index ({i}, {j}) out of range")));
                }
                let x = num(f[2])?;
                m.set(i - 1, j - 1, m.get(i - 1, j - 1) + x);
                if symmetric && i != j {
                    m.set(j - 1, i - 1, m.get(j - 1, i - 1) + x);
                }
                seen += 1;
            }
            if seen != count {
                return Err(LelaError::Parse(format!("expected {count} entries, found {seen}")));
            }
            DenseMatrix::new(n, d, m.into_data())
        }
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

pub fn format_array(m: &DenseMatrix) -> String {
    let mut s = String::with_capacity(m.data().len() * 24 + 64);
    s.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", m.nrows(), m.ncols());
    for x in m.data() {
        let _ = writeln!(s, "{x:e}");
    }
    s
}

pub fn format_coordinate(m: &DenseMatrix) -> String {
    let mut s = String::new();
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let nnz = m.data().iter().filter(|x| **x != 0.0).count();
    let _ = writeln!(s, "{} {} {}", m.nrows(), m.ncols(), nnz);
    for j in 0..m.ncols() {
        for (i, &x) in m.col(j).iter().enumerate() {
            if x != 0.0 {
                let _ = writeln!(s, "{} {} {x:e}", i + 1, j + 1);
            }
        }
    }
    s
}

pub fn write_matrix_market_array(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    Ok(fs::write(path, format_array(m))?)
}

pub fn write_matrix_market_coordinate(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    Ok(fs::write(path, format_coordinate(m))?)
}

/// Metadata stored next to a saved factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactorMeta {
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub iterations: usize,
    pub seed: u64,
}

fn factor_paths(prefix: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(suffix);
        PathBuf::from(p)
    };
    (with(".U.mtx"), with(".V.mtx"), with(".meta"))
}

/// Write `<prefix>.U.mtx`, `<prefix>.V.mtx` and `<prefix>.meta`.
pub fn write_factorization(prefix: impl AsRef<Path>, f: &Factorization, iterations: usize, seed: u64) -> Result<()> {
    let (pu, pv, pm) = factor_paths(prefix.as_ref());
    write_matrix_market_array(pu, &f.u)?;
    write_matrix_market_array(pv, &f.v)?;
    let meta = format!(
        "n={}\nd={}\nr={}\nT={}\nseed={}\n",
        f.nrows(),
        f.ncols(),
        f.rank(),
        iterations,
        seed
    );
    Ok(fs::write(pm, meta)?)
}

pub fn read_factorization(prefix: impl AsRef<Path>) -> Result<(Factorization, FactorMeta)> {
    let (pu, pv, pm) = factor_paths(prefix.as_ref());
    let f = Factorization::new(read_matrix_market(pu)?, read_matrix_market(pv)?)?;
    let text = fs::read_to_string(pm)?;
    let mut meta = FactorMeta { n: 0, d: 0, r: 0, iterations: 0, seed: 0 };
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| LelaError::Parse(format!("bad meta line {line}")))?;
        let parse = |v: &str| v.trim().parse::<u64>().map_err(|_| LelaError::Parse(format!("bad meta value {v}")));
        match k.trim() {
            "n" => meta.n = parse(v)? as usize,
            "d" => meta.d = parse(v)? as usize,
            "r" => meta.r = parse(v)? as usize,
            "T" => meta.iterations = parse(v)? as usize,
            "seed" => meta.seed = parse(v)?,
            other => return Err(LelaError::Parse(format!("unknown meta key {other}"))),
        }
    }
    if (meta.n, meta.d, meta.r) != (f.nrows(), f.ncols(), f.rank()) {
        return Err(LelaError::Parse("factorization metadata disagrees with factor shapes".into()));
    }
    Ok((f, meta))
}
