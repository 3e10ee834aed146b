//! Versioned JSON model file.
//!
//! ```text
//! {
//!   "format": "geoaudit-gbt",
//!   "version": 1,
//!   "features": ["age", ...],
//!   "base_score": -0.64,
//!   "shrinkage": 0.1,
//!   "trees": [
//!     [ {"kind": "split", "feature": 9, "threshold": 399.5, "left": 1, "right": 2,
//!        "default_left": true, "gain": 12.3, "cover": 4100.2},
//!       {"kind": "leaf", "weight": -0.21, "cover": 2050.0}, ... ],
//!     ...
//!   ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so margins survive a
//! save/load cycle bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Ensemble, Tree};
use crate::data::Schema;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "geoaudit-gbt";
pub const MODEL_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFileV1 {
    format: String,
    version: u64,
    features: Vec<String>,
    base_score: f64,
    shrinkage: f64,
    trees: Vec<Tree>,
}

pub fn write_model<W: Write>(model: &Ensemble, writer: W) -> Result<()> {
    let file = ModelFileV1 {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        features: model.schema().names().to_vec(),
        base_score: model.base_score(),
        shrinkage: model.shrinkage(),
        trees: model.trees().to_vec(),
    };
    let mut writer = writer;
    serde_json::to_writer_pretty(&mut writer, &file)?;
    writer
        .write_all(b"\n")
        .map_err(|e| Error::io("<model writer>", e))?;
    Ok(())
}

pub fn save_model(model: &Ensemble, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(model, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_model<R: Read>(reader: R) -> Result<Ensemble> {
    let value: serde_json::Value = serde_json::from_reader(reader)
        .map_err(|e| Error::Model(format!("corrupt model file: {e}")))?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(MODEL_FORMAT) => {}
        other => {
            return Err(Error::Model(format!(
                "not a {MODEL_FORMAT} file (format tag {other:?})"
            )))
        }
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Model("missing version tag".into()))?;
    if version != MODEL_VERSION {
        return Err(Error::Version {
            found: version,
            supported: MODEL_VERSION,
        });
    }
    let file: ModelFileV1 = serde_json::from_value(value)
        .map_err(|e| Error::Model(format!("corrupt model file: {e}")))?;
    Ensemble::new(
        Schema::new(file.features)?,
        file.base_score,
        file.shrinkage,
        file.trees,
    )
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Ensemble> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::TreeNode;

    fn model() -> Ensemble {
        let t = Tree::new(vec![
            TreeNode::split(1, 0.1 + 0.2, 1, 2, 3.0),
            TreeNode::leaf(-1.0 / 3.0, 1.0),
            TreeNode::leaf(std::f64::consts::PI, 2.0),
        ])
        .unwrap();
        Ensemble::new(Schema::new(["a", "b"]).unwrap(), -0.123456789, 0.1, vec![t]).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut buf = Vec::new();
        write_model(&model(), &mut buf).unwrap();
        let cut = &buf[..buf.len() / 2];
        assert!(matches!(read_model(cut), Err(Error::Model(_))));
    }

    #[test]
    fn unknown_version_is_explicit() {
        let mut buf = Vec::new();
        write_model(&model(), &mut buf).unwrap();
        let text = String::from_utf8(buf)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 7");
        match read_model(text.as_bytes()) {
            Err(Error::Version {
                found: 7,
                supported: 1,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_format_tag_is_rejected() {
        assert!(read_model(r#"{"format":"xgboost","version":1}"#.as_bytes()).is_err());
    }

    #[test]
    fn structural_corruption_is_rejected() {
        let mut buf = Vec::new();
        write_model(&model(), &mut buf).unwrap();
        let text = String::from_utf8(buf)
            .unwrap()
            .replace("\"left\": 1", "\"left\": 9");
        assert!(read_model(text.as_bytes()).is_err());
    }
}
