use std::fmt;
use std::io::Write;
use std::path::Path;

use omaxkit_core::error::Error;
use omaxkit_core::matcore::{CMatrix, HermitianMatrix};
use omaxkit_core::numrange::OperatorTuple;
use omaxkit_core::omax::BlockList;
use serde_json::Value;

pub const EXIT_POSITIVE: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::NotPsd { .. } => EXIT_INPUT,
            Error::Internal { .. } | Error::ConstructionFailure(_) => EXIT_UNKNOWN,
        };
        Self { code, message: e.to_string() }
    }
}

/// Contents of a matrix file: one matrix, a block list, or a Hermitian tuple.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixInput {
    Single(CMatrix),
    Blocks(Vec<CMatrix>),
    Tuple(Vec<HermitianMatrix>),
}

fn matrices(v: &Value, key: &str) -> Result<Vec<CMatrix>, CliError> {
    let list =
        v.get(key).and_then(Value::as_array).ok_or_else(|| CliError::input(format!("\"{key}\" must be a list")))?;
    list.iter()
        .enumerate()
        .map(|(i, m)| {
            serde_json::from_value::<CMatrix>(m.clone()).map_err(|e| CliError::input(format!("{key}[{i}]: {e}")))
        })
        .collect()
}

impl MatrixInput {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let v: Value = serde_json::from_str(text).map_err(|e| CliError::input(format!("not valid JSON: {e}")))?;
        if v.get("blocks").is_some() {
            let blocks = matrices(&v, "blocks")?;
            if blocks.is_empty() {
                return Err(CliError::input("\"blocks\" is empty"));
            }
            return Ok(MatrixInput::Blocks(blocks));
        }
        if v.get("tuple").is_some() {
            let ops = matrices(&v, "tuple")?
                .into_iter()
                .enumerate()
                .map(|(i, m)| HermitianMatrix::new(m, 1e-9).map_err(|e| CliError::input(format!("tuple[{i}]: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(MatrixInput::Tuple(ops));
        }
        let m: CMatrix = serde_json::from_value(v).map_err(|e| CliError::input(format!("matrix: {e}")))?;
        if !m.is_square() || m.rows() == 0 {
            return Err(CliError::input(format!("matrix must be square and non-empty, got {:?}", m.shape())));
        }
        Ok(MatrixInput::Single(m))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message)))
    }

    /// The tuple of Hermitian matrices; single matrices split as (Re, Im).
    pub fn tuple(&self) -> Result<OperatorTuple, CliError> {
        Ok(match self {
            MatrixInput::Single(m) => OperatorTuple::cartesian(m),
            MatrixInput::Blocks(b) => OperatorTuple::cartesian(&omaxkit_core::matcore::direct_sum(b)),
            MatrixInput::Tuple(ops) => OperatorTuple::new(ops.clone())?,
        })
    }

    /// A single complex matrix; pairs (H₁, H₂) become H₁ + iH₂.
    pub fn matrix(&self) -> Result<CMatrix, CliError> {
        match self {
            MatrixInput::Single(m) => Ok(m.clone()),
            MatrixInput::Blocks(b) => Ok(omaxkit_core::matcore::direct_sum(b)),
            MatrixInput::Tuple(ops) if ops.len() == 2 => {
                Ok(ops[0].matrix() + &ops[1].matrix().scale(omaxkit_core::matcore::I))
            }
            MatrixInput::Tuple(_) => Err(CliError::input("a planar numerical range needs one matrix or a pair")),
        }
    }

    pub fn block_list(&self) -> Result<BlockList, CliError> {
        match self {
            MatrixInput::Blocks(b) => Ok(BlockList::new(b.clone())?),
            MatrixInput::Single(m) => Ok(BlockList::new(vec![m.clone()])?),
            MatrixInput::Tuple(_) => Err(CliError::input("classification needs {\"blocks\": [...]}")),
        }
    }
}

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::input(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}
