//! File formats: problem, regulator and system files (TOML, matrices as
//! arrays of row arrays) and trajectory CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{KnownMatrices, Problem, ProblemData, Provenance, Regulator, TrueSystem};
use crate::simulation::Trajectory;
use crate::synthesis::{SynthesisConfig, TryOrder};
use crate::Matrix;

pub type Rows = Vec<Vec<f64>>;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    pub p: usize,
    pub tau: usize,
}

/// Optional overrides of [`SynthesisConfig`] carried by a problem file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lmi_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lmi_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lmi_max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lmi_starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify_samples: Option<usize>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut SynthesisConfig) -> Result<()> {
        if let Some(v) = self.residual_tol {
            cfg.residual_tol = v;
        }
        if let Some(o) = &self.order {
            cfg.order = TryOrder::parse(o)
                .ok_or_else(|| Error::Invalid(format!("config.order: unknown order `{o}`")))?;
        }
        if let Some(v) = self.seed {
            cfg.lmi.seed = v;
        }
        if let Some(v) = self.lmi_bound {
            cfg.lmi.bound = v;
        }
        if let Some(v) = self.lmi_margin {
            cfg.lmi.margin = v;
        }
        if let Some(v) = self.lmi_max_iterations {
            cfg.lmi.max_iterations = v;
        }
        if let Some(v) = self.lmi_starts {
            cfg.lmi.starts = v;
        }
        if let Some(v) = self.verify_samples {
            cfg.verify_samples = v;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(rename = "A1")]
    pub a1: Rows,
    #[serde(rename = "A3", default, skip_serializing_if = "Option::is_none")]
    pub a3: Option<Rows>,
    #[serde(rename = "D1")]
    pub d1: Rows,
    #[serde(rename = "D2")]
    pub d2: Rows,
    #[serde(rename = "E")]
    pub e: Rows,
    #[serde(rename = "U_minus")]
    pub u_minus: Rows,
    #[serde(rename = "X1_minus")]
    pub x1_minus: Rows,
    #[serde(rename = "X2")]
    pub x2: Rows,
    pub dims: Dims,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigOverrides>,
}

/// Convert row arrays to a matrix of the expected shape.
pub fn matrix_from_rows(field: &str, rows: &Rows, shape: (usize, usize)) -> Result<Matrix> {
    let (r, c) = shape;
    if rows.len() != r {
        return Err(Error::Parse {
            source_name: field.into(),
            message: format!("field `{field}`: expected {r} rows, found {}", rows.len()),
        });
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::Parse {
                source_name: field.into(),
                message: format!(
                    "field `{field}`, row {}: expected {c} entries, found {}",
                    i + 1,
                    row.len()
                ),
            });
        }
    }
    let m = Matrix::from_fn(r, c, |i, j| rows[i][j]);
    crate::linalg::check_finite(field, &m)?;
    Ok(m)
}

/// Matrix whose shape is read from the row arrays themselves.
pub fn matrix_from_rows_any(field: &str, rows: &Rows) -> Result<Matrix> {
    let c = rows.first().map_or(0, Vec::len);
    matrix_from_rows(field, rows, (rows.len(), c))
}

pub fn rows_of(m: &Matrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ProblemFile {
    pub fn from_problem(problem: &Problem, config: Option<ConfigOverrides>) -> Self {
        let d = &problem.data;
        let k = &problem.known;
        ProblemFile {
            a1: rows_of(&k.a1),
            a3: k.a3.as_ref().map(rows_of),
            d1: rows_of(&k.d1),
            d2: rows_of(&k.d2),
            e: rows_of(&k.e),
            u_minus: rows_of(&d.u_minus),
            x1_minus: rows_of(&d.x1_minus),
            x2: rows_of(&d.x2),
            dims: Dims {
                n1: d.n1(),
                n2: d.n2(),
                m: d.m(),
                p: k.p(),
                tau: d.tau(),
            },
            config,
        }
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let Dims { n1, n2, m, p, tau } = self.dims;
        let data = ProblemData::new(
            matrix_from_rows("U_minus", &self.u_minus, (m, tau))?,
            matrix_from_rows("X1_minus", &self.x1_minus, (n1, tau))?,
            matrix_from_rows("X2", &self.x2, (n2, tau + 1))?,
        )?;
        let known = KnownMatrices {
            a1: matrix_from_rows("A1", &self.a1, (n1, n1))?,
            a3: self
                .a3
                .as_ref()
                .map(|a3| matrix_from_rows("A3", a3, (n2, n1)))
                .transpose()?,
            d1: matrix_from_rows("D1", &self.d1, (p, n1))?,
            d2: matrix_from_rows("D2", &self.d2, (p, n2))?,
            e: matrix_from_rows("E", &self.e, (p, m))?,
        };
        Problem::new(data, known)
    }
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, source_name: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse {
        source_name: source_name.into(),
        message: e.to_string(),
    })
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Invalid(format!("serialization failed: {e}")))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A parsed problem file with its raw-content hash.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: Problem,
    pub config: Option<ConfigOverrides>,
    pub sha256: String,
}

pub fn parse_problem(text: &str, source_name: &str) -> Result<LoadedProblem> {
    let file: ProblemFile = parse_toml(text, source_name)?;
    let problem = file.to_problem().map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            source_name: source_name.into(),
            message,
        },
        other => other,
    })?;
    Ok(LoadedProblem {
        problem,
        config: file.config,
        sha256: sha256_hex(text.as_bytes()),
    })
}

pub fn load_problem(path: &Path) -> Result<LoadedProblem> {
    let text = fs::read_to_string(path)?;
    parse_problem(&text, &path.display().to_string())
}

pub fn problem_to_string(problem: &Problem, config: Option<ConfigOverrides>) -> Result<String> {
    to_toml(&ProblemFile::from_problem(problem, config))
}

/// Write via a temporary file in the target directory, then rename.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorFile {
    pub tool_version: String,
    pub problem_sha256: String,
    pub provenance: String,
    pub seed: u64,
    #[serde(rename = "K1")]
    pub k1: Rows,
    #[serde(rename = "K2")]
    pub k2: Rows,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Rows>,
    #[serde(rename = "Theta", default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Rows>,
    #[serde(rename = "X_dagger", default, skip_serializing_if = "Option::is_none")]
    pub x_dagger: Option<Rows>,
}

impl RegulatorFile {
    pub fn new(reg: &Regulator, problem_sha256: &str, seed: u64) -> Self {
        RegulatorFile {
            tool_version: TOOL_VERSION.into(),
            problem_sha256: problem_sha256.into(),
            provenance: reg.provenance.as_str().into(),
            seed,
            k1: rows_of(&reg.k1),
            k2: rows_of(&reg.k2),
            w: reg.w.as_ref().map(rows_of),
            theta: reg.theta.as_ref().map(rows_of),
            x_dagger: reg.x_dagger.as_ref().map(rows_of),
        }
    }

    /// Rebuild the regulator, shaped against the problem it belongs to.
    pub fn to_regulator(&self, problem: &Problem) -> Result<Regulator> {
        let d = &problem.data;
        let (n1, n2, m, tau) = (d.n1(), d.n2(), d.m(), d.tau());
        let provenance = Provenance::parse(&self.provenance).ok_or_else(|| Error::Parse {
            source_name: "regulator".into(),
            message: format!("unknown provenance `{}`", self.provenance),
        })?;
        Ok(Regulator {
            k1: matrix_from_rows("K1", &self.k1, (m, n1))?,
            k2: matrix_from_rows("K2", &self.k2, (m, n2))?,
            provenance,
            w: self
                .w
                .as_ref()
                .map(|w| matrix_from_rows("W", w, (tau, n1)))
                .transpose()?,
            theta: self
                .theta
                .as_ref()
                .map(|t| matrix_from_rows("Theta", t, (tau, n2)))
                .transpose()?,
            x_dagger: self
                .x_dagger
                .as_ref()
                .map(|x| matrix_from_rows("X_dagger", x, (tau, n2)))
                .transpose()?,
        })
    }
}

pub fn parse_regulator(text: &str, source_name: &str) -> Result<RegulatorFile> {
    parse_toml(text, source_name)
}

pub fn load_regulator(path: &Path) -> Result<RegulatorFile> {
    parse_regulator(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn regulator_to_string(file: &RegulatorFile) -> Result<String> {
    to_toml(file)
}

/// A full interconnection with output matrices, used to generate data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(rename = "A1")]
    pub a1: Rows,
    #[serde(rename = "A2")]
    pub a2: Rows,
    #[serde(rename = "B2")]
    pub b2: Rows,
    #[serde(rename = "A3")]
    pub a3: Rows,
    #[serde(rename = "D1")]
    pub d1: Rows,
    #[serde(rename = "D2")]
    pub d2: Rows,
    #[serde(rename = "E")]
    pub e: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1_0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x2_0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Rows>,
}

/// Parsed system file: the interconnection plus its output matrices.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub system: TrueSystem,
    pub known: KnownMatrices,
    pub x1_0: Option<DVector<f64>>,
    pub x2_0: Option<DVector<f64>>,
    pub inputs: Option<Matrix>,
}

impl SystemFile {
    pub fn to_system(&self) -> Result<LoadedSystem> {
        let a1 = matrix_from_rows_any("A1", &self.a1)?;
        let a2 = matrix_from_rows_any("A2", &self.a2)?;
        let n1 = a1.nrows();
        let n2 = a2.nrows();
        let b2 = matrix_from_rows_any("B2", &self.b2)?;
        let m = b2.ncols();
        let a3 = matrix_from_rows("A3", &self.a3, (n2, n1))?;
        let d1 = matrix_from_rows_any("D1", &self.d1)?;
        let p = d1.nrows();
        let d2 = matrix_from_rows("D2", &self.d2, (p, n2))?;
        let e = matrix_from_rows("E", &self.e, (p, m))?;
        let system = TrueSystem::new(a1.clone(), a2, b2, a3.clone())?;
        if d1.ncols() != n1 {
            return Err(Error::mismatch(
                "D1",
                "A1",
                format!("D1 needs {n1} columns"),
            ));
        }
        Ok(LoadedSystem {
            system,
            known: KnownMatrices {
                a1,
                a3: Some(a3),
                d1,
                d2,
                e,
            },
            x1_0: self.x1_0.as_ref().map(|v| DVector::from_vec(v.clone())),
            x2_0: self.x2_0.as_ref().map(|v| DVector::from_vec(v.clone())),
            inputs: self
                .inputs
                .as_ref()
                .map(|r| matrix_from_rows_any("inputs", r))
                .transpose()?,
        })
    }
}

pub fn parse_system(text: &str, source_name: &str) -> Result<LoadedSystem> {
    parse_toml::<SystemFile>(text, source_name)?.to_system()
}

pub fn load_system(path: &Path) -> Result<LoadedSystem> {
    parse_system(&fs::read_to_string(path)?, &path.display().to_string())
}

/// CSV header: `t,x1_1..,x2_1..,u_1..,z_1..,member_id`.
pub fn csv_header(n1: usize, n2: usize, m: usize, p: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for (prefix, n) in [("x1", n1), ("x2", n2), ("u", m), ("z", p)] {
        cols.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    cols.push("member_id".into());
    cols.join(",")
}

/// Write one block of rows per `(member_id, trajectory)`.
pub fn write_trajectories_csv<W: Write>(
    out: &mut W,
    blocks: &[(usize, &Trajectory)],
) -> Result<()> {
    let Some((_, first)) = blocks.first() else {
        return Ok(());
    };
    let (n1, n2, m, p) = (
        first.x1.nrows(),
        first.x2.nrows(),
        first.u.nrows(),
        first.z.nrows(),
    );
    writeln!(out, "{}", csv_header(n1, n2, m, p))?;
    for (id, traj) in blocks {
        for t in 0..traj.len() {
            let mut line = t.to_string();
            for mat in [&traj.x1, &traj.x2, &traj.u, &traj.z] {
                for v in mat.column(t).iter() {
                    line.push(',');
                    line.push_str(&csv_number(*v));
                }
            }
            line.push(',');
            line.push_str(&id.to_string());
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

/// Shortest round-trip text, in exponent form for very small or large
/// magnitudes.
fn csv_number(v: f64) -> String {
    if v != 0.0 && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Parse a vector flag such as `1,0,0.5`.
pub fn parse_vector(s: &str) -> Result<DVector<f64>> {
    let vals = parse_list(s)?;
    Ok(DVector::from_vec(vals))
}

/// Parse a matrix flag: rows separated by `;`, entries by `,`.
pub fn parse_matrix(s: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = s.split(';').map(parse_list).collect::<Result<_>>()?;
    matrix_from_rows_any("matrix argument", &rows)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| Error::Invalid(format!("cannot parse `{t}` as a number")))
        })
        .collect()
}
