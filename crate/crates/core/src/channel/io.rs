//! Ensemble serialization: a JSON manifest plus one triplet text file per
//! Kraus operator (`i j re im` lines after an `n nnz` header).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{KrausEnsemble, Normalization, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CsrMatrix, Matrix};
use crate::scalar::Real;

const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub format_version: u32,
    pub n: usize,
    pub d: usize,
    pub normalization: Normalization,
    pub provenance: Provenance,
    pub sparse: bool,
    pub kraus_files: Vec<String>,
    /// Present for factored ensembles: effective operators are `K_s R`.
    pub right_factor_file: Option<String>,
}

fn write_triplets<T: Real>(n: usize, entries: impl Iterator<Item = (usize, usize, Complex<T>)>) -> String {
    let entries: Vec<_> = entries.filter(|(_, _, z)| z.re != T::zero() || z.im != T::zero()).collect();
    let mut out = format!("{n} {}\n", entries.len());
    for (i, j, z) in entries {
        writeln!(out, "{i} {j} {:e} {:e}", z.re.as_f64(), z.im.as_f64()).expect("write to string");
    }
    out
}

fn read_triplets<T: Real>(text: &str, n: usize) -> Result<Vec<(usize, usize, Complex<T>)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let perr = |line: usize, message: String| Error::ParseError { line, message };
    let (hl, header) = lines.next().ok_or_else(|| perr(0, "missing header".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 2 {
        return Err(perr(hl, "expected header `n nnz`".into()));
    }
    let file_n: usize = h[0].parse().map_err(|e| perr(hl, format!("bad n: {e}")))?;
    let nnz: usize = h[1].parse().map_err(|e| perr(hl, format!("bad nnz: {e}")))?;
    if file_n != n {
        return Err(perr(hl, format!("dimension {file_n} does not match manifest n = {n}")));
    }
    let mut out = Vec::with_capacity(nnz);
    for (ln, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(perr(ln, format!("expected `i j re im`, found {} fields", f.len())));
        }
        let i: usize = f[0].parse().map_err(|e| perr(ln, format!("bad row: {e}")))?;
        let j: usize = f[1].parse().map_err(|e| perr(ln, format!("bad column: {e}")))?;
        let re: f64 = f[2].parse().map_err(|e| perr(ln, format!("bad real part: {e}")))?;
        let im: f64 = f[3].parse().map_err(|e| perr(ln, format!("bad imaginary part: {e}")))?;
        if i >= n || j >= n {
            return Err(perr(ln, format!("index ({i}, {j}) out of range")));
        }
        out.push((i, j, Complex::new(T::lit(re), T::lit(im))));
    }
    if out.len() != nnz {
        return Err(perr(0, format!("header announces {nnz} entries, found {}", out.len())));
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `manifest.json`, `kraus_<s>.txt` and, for factored ensembles,
/// `right_factor.txt` into `dir` (created if missing).
pub fn save_ensemble<T: Real>(e: &KrausEnsemble<T>, dir: impl AsRef<Path>) -> Result<EnsembleManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|err| Error::io(dir, err))?;
    let n = e.n();
    let mut kraus_files = Vec::with_capacity(e.d());
    for (s, op) in e.stored_ops().iter().enumerate() {
        let name = format!("kraus_{s}.txt");
        let text = match op {
            Matrix::Sparse(m) => write_triplets(n, m.iter()),
            Matrix::Dense(m) => write_triplets(n, (0..n * n).map(|p| (p / n, p % n, m[(p / n, p % n)]))),
        };
        write_file(&dir.join(&name), &text)?;
        kraus_files.push(name);
    }
    let right_factor_file = match e.right_factor() {
        Some(r) => {
            let name = "right_factor.txt".to_string();
            write_file(
                &dir.join(&name),
                &write_triplets(n, (0..n * n).map(|p| (p / n, p % n, r[(p / n, p % n)]))),
            )?;
            Some(name)
        }
        None => None,
    };
    let manifest = EnsembleManifest {
        format_version: FORMAT_VERSION,
        n,
        d: e.d(),
        normalization: e.normalization(),
        provenance: e.provenance().clone(),
        sparse: e.is_sparse(),
        kraus_files,
        right_factor_file,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|err| Error::Format {
        what: "manifest",
        message: err.to_string(),
    })?;
    write_file(&dir.join(MANIFEST), &json)?;
    Ok(manifest)
}

pub fn load_ensemble<T: Real>(dir: impl AsRef<Path>) -> Result<KrausEnsemble<T>> {
    let dir = dir.as_ref();
    let manifest: EnsembleManifest = serde_json::from_str(&read_file(&dir.join(MANIFEST))?).map_err(|err| Error::Format {
        what: "manifest",
        message: err.to_string(),
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Format {
            what: "manifest",
            message: format!("unsupported format version {}", manifest.format_version),
        });
    }
    if manifest.kraus_files.len() != manifest.d {
        return Err(Error::Format {
            what: "manifest",
            message: format!("d = {} but {} Kraus files listed", manifest.d, manifest.kraus_files.len()),
        });
    }
    let n = manifest.n;
    let mut ops = Vec::with_capacity(manifest.d);
    for name in &manifest.kraus_files {
        let trip = read_triplets::<T>(&read_file(&dir.join(name))?, n)?;
        let csr = CsrMatrix::from_triplets(n, n, trip)?;
        ops.push(if manifest.sparse {
            Matrix::Sparse(csr)
        } else {
            Matrix::Dense(csr.to_dense())
        });
    }
    let e = KrausEnsemble::from_parts(n, ops, manifest.normalization, manifest.provenance)?;
    match &manifest.right_factor_file {
        Some(name) => {
            let trip = read_triplets::<T>(&read_file(&dir.join(name))?, n)?;
            let mut r = CMatrix::zeros(n, n);
            for (i, j, z) in trip {
                r[(i, j)] = z;
            }
            let rr = r.matmul(&r).hermitian_part();
            Ok(e.with_right_factor(r, rr))
        }
        None => Ok(e),
    }
}
