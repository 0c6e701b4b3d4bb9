//! Matrix Market files and TOML system manifests.
//!
//! Dense matrices are written as `array complex general` with every value
//! in shortest round-trip form, so a write/read cycle is lossless.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::reduce::{Provenance, ReducedModel};
use crate::system::{AffineTerm, CaseTag, Coefficient, Operator, ScalarFunction, StructuredSystem, SystemParts};

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn matrix_market_string(a: &CMat) -> String {
    let mut out = String::with_capacity(32 * a.len() + 64);
    out.push_str("%%MatrixMarket matrix array complex general\n");
    out.push_str(&format!("{} {}\n", a.nrows(), a.ncols()));
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            out.push_str(&format!("{:e} {:e}\n", z.re, z.im));
        }
    }
    out
}

pub fn write_matrix_market(path: &Path, a: &CMat) -> Result<()> {
    write_atomic(path, matrix_market_string(a).as_bytes())
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Complex,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

fn perr(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// Parses `array` and `coordinate` files with real, integer, complex or
/// pattern entries and general, symmetric, skew-symmetric or Hermitian
/// storage.
pub fn parse_matrix_market(text: &str) -> Result<CMat> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| perr("empty Matrix Market file"))?;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(perr(format!("bad Matrix Market header `{header}`")));
    }
    let coordinate = match h[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(perr(format!("unsupported format `{other}`"))),
    };
    let field = match h[3].as_str() {
        "real" | "double" => Field::Real,
        "complex" => Field::Complex,
        "integer" => Field::Integer,
        "pattern" if coordinate => Field::Pattern,
        other => return Err(perr(format!("unsupported field `{other}`"))),
    };
    let sym = match h[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        "hermitian" => Symmetry::Hermitian,
        other => return Err(perr(format!("unsupported symmetry `{other}`"))),
    };
    let mut body = lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size: Vec<usize> = body
        .next()
        .ok_or_else(|| perr("missing size line"))?
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| perr(format!("size line: {e}"))))
        .collect::<Result<_>>()?;
    let num = |t: &str| t.parse::<f64>().map_err(|e| perr(format!("value `{t}`: {e}")));
    let value = |toks: &[&str]| -> Result<C64> {
        match field {
            Field::Complex => {
                if toks.len() < 2 {
                    return Err(perr("complex entry needs two values"));
                }
                Ok(C64::new(num(toks[0])?, num(toks[1])?))
            }
            Field::Pattern => Ok(C64::new(1.0, 0.0)),
            _ => {
                let t = toks.first().ok_or_else(|| perr("missing value"))?;
                Ok(C64::new(num(t)?, 0.0))
            }
        }
    };
    let mirror = |a: &mut CMat, i: usize, j: usize, v: C64| {
        a[(i, j)] = v;
        if i != j {
            match sym {
                Symmetry::General => {}
                Symmetry::Symmetric => a[(j, i)] = v,
                Symmetry::SkewSymmetric => a[(j, i)] = -v,
                Symmetry::Hermitian => a[(j, i)] = v.conj(),
            }
        }
    };
    if coordinate {
        if size.len() != 3 {
            return Err(perr("coordinate size line needs rows, cols and nnz"));
        }
        let (rows, cols, nnz) = (size[0], size[1], size[2]);
        let mut a = CMat::zeros(rows, cols);
        let mut seen = 0;
        for line in body {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 2 {
                return Err(perr(format!("bad entry `{line}`")));
            }
            let i: usize = toks[0].parse().map_err(|e| perr(format!("row index: {e}")))?;
            let j: usize = toks[1].parse().map_err(|e| perr(format!("column index: {e}")))?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(perr(format!("entry ({i}, {j}) out of range")));
            }
            let v = value(&toks[2..])?;
            mirror(&mut a, i - 1, j - 1, v);
            seen += 1;
        }
        if seen != nnz {
            return Err(perr(format!("expected {nnz} entries, found {seen}")));
        }
        Ok(a)
    } else {
        if size.len() != 2 {
            return Err(perr("array size line needs rows and cols"));
        }
        let (rows, cols) = (size[0], size[1]);
        let mut a = CMat::zeros(rows, cols);
        let mut positions = Vec::new();
        for j in 0..cols {
            let start = match sym {
                Symmetry::General => 0,
                Symmetry::SkewSymmetric => j + 1,
                _ => j,
            };
            for i in start..rows {
                positions.push((i, j));
            }
        }
        let mut it = positions.into_iter();
        for line in body {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let (i, j) = it.next().ok_or_else(|| perr("too many array entries"))?;
            mirror(&mut a, i, j, value(&toks)?);
        }
        if it.next().is_some() {
            return Err(perr("too few array entries"));
        }
        Ok(a)
    }
}

pub fn read_matrix_market(path: &Path) -> Result<CMat> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_market(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    pub coeff: Coefficient,
    pub matrix: String,
}

/// On-disk description of a system: coefficient tags and matrix file paths
/// relative to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub case: CaseTag,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    #[serde(default)]
    pub test_frequency: Option<C64>,
    pub output: String,
    #[serde(default)]
    pub mass: Vec<TermEntry>,
    #[serde(default)]
    pub damping: Vec<TermEntry>,
    #[serde(default)]
    pub stiffness: Vec<TermEntry>,
    #[serde(default)]
    pub nonlinear: Vec<TermEntry>,
    #[serde(default)]
    pub input: Vec<TermEntry>,
    #[serde(default)]
    pub functions: BTreeMap<String, ScalarFunction>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

fn op_key(op: Operator) -> &'static str {
    match op {
        Operator::Mass => "mass",
        Operator::Damping => "damping",
        Operator::Stiffness => "stiffness",
        Operator::Nonlinear => "nonlinear",
    }
}

/// Writes `<name>.toml` plus one `.mtx` per matrix into `dir` and returns
/// the manifest path.
pub fn save_system(sys: &StructuredSystem, dir: &Path, name: &str, provenance: Option<&Provenance>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let write = |file: String, a: &CMat| -> Result<String> {
        write_matrix_market(&dir.join(&file), a)?;
        Ok(file)
    };
    let mut entries: BTreeMap<&str, Vec<TermEntry>> = BTreeMap::new();
    for op in Operator::ALL {
        let mut list = Vec::new();
        for (k, t) in sys.terms(op).iter().enumerate() {
            let file = write(format!("{name}_{}{k}.mtx", op_key(op)), &t.matrix)?;
            list.push(TermEntry {
                coeff: t.coeff.clone(),
                matrix: file,
            });
        }
        entries.insert(op_key(op), list);
    }
    let mut input = Vec::new();
    for (k, t) in sys.input.iter().enumerate() {
        input.push(TermEntry {
            coeff: t.coeff.clone(),
            matrix: write(format!("{name}_input{k}.mtx"), &t.matrix)?,
        });
    }
    let output = write(format!("{name}_output.mtx"), &sys.output)?;
    let manifest = Manifest {
        case: sys.case,
        n: sys.n,
        m: sys.m,
        p: sys.p,
        test_frequency: Some(sys.test_frequency),
        output,
        mass: entries.remove("mass").unwrap_or_default(),
        damping: entries.remove("damping").unwrap_or_default(),
        stiffness: entries.remove("stiffness").unwrap_or_default(),
        nonlinear: entries.remove("nonlinear").unwrap_or_default(),
        input,
        functions: sys.functions.clone(),
        provenance: provenance.cloned(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    let path = dir.join(format!("{name}.toml"));
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

pub fn save_reduced(rom: &ReducedModel, dir: &Path, name: &str) -> Result<PathBuf> {
    save_system(&rom.system, dir, name, Some(&rom.provenance))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn load_system(path: &Path) -> Result<StructuredSystem> {
    let man = read_manifest(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let load = |entries: &[TermEntry]| -> Result<Vec<AffineTerm>> {
        entries
            .iter()
            .map(|e| Ok(AffineTerm::new(e.coeff.clone(), read_matrix_market(&dir.join(&e.matrix))?)))
            .collect()
    };
    let sys = StructuredSystem::from_parts(SystemParts {
        mass: load(&man.mass)?,
        damping: load(&man.damping)?,
        stiffness: load(&man.stiffness)?,
        nonlinear: load(&man.nonlinear)?,
        input: load(&man.input)?,
        output: read_matrix_market(&dir.join(&man.output))?,
        functions: man.functions.clone(),
        case: Some(man.case),
        test_frequency: man.test_frequency,
    })?;
    if (sys.n, sys.m, sys.p) != (man.n, man.m, man.p) {
        return Err(Error::DimensionMismatch(format!(
            "manifest declares ({}, {}, {}) but matrices give ({}, {}, {})",
            man.n, man.m, man.p, sys.n, sys.m, sys.p
        )));
    }
    Ok(sys)
}
