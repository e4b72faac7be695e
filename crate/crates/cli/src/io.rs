use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use werner_core::polarimetry::{CoincidenceRecord, CountsFile};
use werner_core::qlinalg::CMatrix;
use werner_core::states::{DensityMatrix, BASIS_LABELS};

use crate::cli::Command;

/// Exit code 2: bad input or parameters. Exit code 3: numerical failure.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn input(context: impl fmt::Display, e: impl fmt::Display) -> Self {
        Failure::Input(format!("{context}: {e}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<werner_core::Error> for Failure {
    fn from(e: werner_core::Error) -> Self {
        use werner_core::Error as E;
        match e {
            E::SingularSystem(_) | E::EmptyData(_) | E::Unphysical(_) | E::DegenerateDiagonal(_) => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::input(path.display(), e))
}

pub fn read_state(path: &Path) -> CliResult<DensityMatrix> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Failure::input(path.display(), e))
}

pub fn read_counts(path: &Path) -> CliResult<Vec<CoincidenceRecord>> {
    let file: CountsFile = serde_json::from_str(&read_text(path)?).map_err(|e| Failure::input(path.display(), e))?;
    file.to_records().map_err(|e| Failure::input(path.display(), e))
}

pub fn read_manifest(path: &Path) -> CliResult<Manifest> {
    let m: Manifest = serde_json::from_str(&read_text(path)?).map_err(|e| Failure::input(path.display(), e))?;
    if m.tool != TOOL {
        return Err(Failure::input(path.display(), format!("manifest written by {:?}, not {TOOL}", m.tool)));
    }
    Ok(m)
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s.into_bytes()
}

/// A Hermitian matrix in the density-matrix JSON layout, written without
/// the positivity check (linear inversion may be unphysical).
pub fn matrix_json(m: &CMatrix) -> Vec<u8> {
    let rows: Vec<Vec<[f64; 2]>> = (0..4).map(|i| (0..4).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    to_json(&serde_json::json!({ "basis": BASIS_LABELS, "matrix": rows }))
}

pub const TOOL: &str = "werner";

/// Record of one run: the fully resolved command plus the physical
/// parameters it implied.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub parameters: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

/// Files of one run, held in memory until every computation has succeeded.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    pub fn paths(&self) -> Vec<PathBuf> {
        self.files.iter().map(|(p, _)| p.clone()).collect()
    }

    /// Adds `manifest` at `path` and writes everything. Each file goes to a
    /// sibling temporary first and is renamed into place.
    pub fn commit_with_manifest(
        mut self,
        path: PathBuf,
        command: &Command,
        parameters: serde_json::Value,
        inputs: Vec<PathBuf>,
    ) -> CliResult<()> {
        let manifest = Manifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.clone(),
            parameters,
            inputs,
            outputs: self.paths(),
        };
        self.add(path, to_json(&manifest));
        self.commit()
    }

    fn commit(self) -> CliResult<()> {
        for (path, bytes) in &self.files {
            let mut tmp = path.clone().into_os_string();
            tmp.push(".partial");
            let tmp = PathBuf::from(tmp);
            fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path)).map_err(|e| {
                let _ = fs::remove_file(&tmp);
                Failure::input(path.display(), e)
            })?;
        }
        Ok(())
    }
}

/// `<path>.<suffix>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}
