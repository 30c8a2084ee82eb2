//! Point-set files and the run report envelope shared by the command line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{validate_point, Point, SpaceDescriptor};
use crate::SCHEMA_VERSION;

/// `{"space": {...}, "points": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub space: SpaceDescriptor,
    pub points: Vec<Point>,
}

impl PointSet {
    /// Parses and validates; errors name the failing field path.
    pub fn from_json(s: &str) -> Result<Self> {
        let set: PointSet = serde_json::from_str(s).map_err(|e| Error::Parse(format!("point set: {e}")))?;
        set.space.validate()?;
        for (i, p) in set.points.iter().enumerate() {
            validate_point(&set.space, p).map_err(|e| prefix(e, &format!("points[{i}]")))?;
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("point set serialises")
    }
}

fn prefix(e: Error, path: &str) -> Error {
    match e {
        Error::InvalidPoint(m) => Error::InvalidPoint(format!("{path}: {m}")),
        Error::DimensionMismatch(m) => Error::DimensionMismatch(format!("{path}: {m}")),
        other => other,
    }
}

/// Envelope for every JSON document the command line prints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport<I, O> {
    pub command: String,
    pub inputs: I,
    pub outputs: O,
    pub tool_version: String,
    pub schema_version: String,
    pub seed: u64,
}

impl<I, O> RunReport<I, O> {
    pub fn new(command: &str, inputs: I, outputs: O, seed: u64) -> Self {
        RunReport {
            command: command.into(),
            inputs,
            outputs,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            schema_version: SCHEMA_VERSION.into(),
            seed,
        }
    }
}
