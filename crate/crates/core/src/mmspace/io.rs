//! JSON space files: `{version, n, dist, measure, edges, psi, label}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use serde_json::Value;

use super::MMSpace;
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    version: u32,
    n: usize,
    #[serde(serialize_with = "serialize_matrix_17")]
    dist: Vec<Vec<f64>>,
    measure: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    psi: Option<Vec<f64>>,
    #[serde(default)]
    label: Value,
}

/// Writes every entry in scientific notation with 17 significant digits.
fn serialize_matrix_17<S: Serializer>(m: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<Box<RawValue>>> = m
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| RawValue::from_string(format!("{v:.16e}")).expect("finite float is valid json"))
                .collect()
        })
        .collect();
    rows.serialize(s)
}

pub fn space_to_json(space: &MMSpace) -> String {
    let n = space.n();
    let file = SpaceFile {
        version: FORMAT_VERSION,
        n,
        dist: (0..n).map(|i| space.dist_row(i).to_vec()).collect(),
        measure: space.measure().to_vec(),
        edges: space.edges().iter().map(|e| (e.i, e.j, e.w)).collect(),
        psi: space.psi().map(<[f64]>::to_vec),
        label: space.label().clone(),
    };
    serde_json::to_string_pretty(&file).expect("space serializes")
}

pub fn space_from_json(text: &str) -> Result<MMSpace> {
    let file: SpaceFile = serde_json::from_str(text)?;
    if file.version != FORMAT_VERSION {
        return Err(Error::InvariantViolation {
            field: "version",
            reason: format!("unsupported version {}, expected {FORMAT_VERSION}", file.version),
        });
    }
    if file.measure.len() != file.n {
        return Err(Error::InvariantViolation {
            field: "measure",
            reason: format!("{} entries for n = {}", file.measure.len(), file.n),
        });
    }
    MMSpace::new(file.dist, file.measure, file.edges, file.psi, file.label)
}

pub fn save_space(space: &MMSpace, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, space_to_json(space))?;
    Ok(())
}

pub fn load_space(path: impl AsRef<Path>) -> Result<MMSpace> {
    space_from_json(&fs::read_to_string(path)?)
}
