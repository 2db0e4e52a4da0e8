//! Ring annotation files (Labelme-style polygon JSON) and the pith CSV.
//!
//! Only the keys `imagePath`, `imageHeight`, `imageWidth`, `version`, `flags`,
//! `imageData` and `shapes` (with `label` and `points` per shape) are read;
//! anything else is ignored and not written back.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("I/O error on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    InvalidJson(#[from] serde_json::Error),
    #[error("annotation has no \"shapes\" list")]
    MissingShapesKey,
    #[error("shape {shape}: malformed point {point}: {reason}")]
    MalformedPoint {
        shape: usize,
        point: usize,
        reason: String,
    },
    #[error("shape {shape}: {detail}")]
    MalformedShape { shape: usize, detail: String },
    #[error("shape {shape} has {points} points, at least 3 are required")]
    DegenerateRing { shape: usize, points: usize },
    #[error("malformed pith CSV row {row}: {detail}")]
    MalformedRow { row: usize, detail: String },
    #[error("duplicate section name {0:?} in pith CSV")]
    DuplicateName(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingShape {
    pub label: Option<String>,
    /// (x horizontal, y vertical) in pixels.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationFile {
    pub image_path: Option<String>,
    pub image_height: Option<i64>,
    pub image_width: Option<i64>,
    pub version: Option<String>,
    pub flags: Option<Map<String, Value>>,
    pub image_data: Option<String>,
    pub shapes: Vec<RingShape>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageMeta {
    pub image_path: Option<String>,
    pub image_width: Option<u32>,
    pub image_height: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PithRecord {
    pub section_name: String,
    pub cx: f64,
    pub cy: f64,
}

/// Version string written into generated annotation files.
pub const FORMAT_VERSION: &str = "5.0.1";

fn read_file(path: &Path) -> Result<Vec<u8>, AnnotationError> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|source| AnnotationError::IoFailure {
            path: path.display().to_string(),
            source,
        })?;
    Ok(buf)
}

fn parse_point(shape: usize, point: usize, v: &Value) -> Result<[f64; 2], AnnotationError> {
    let bad = |reason: &str| AnnotationError::MalformedPoint {
        shape,
        point,
        reason: reason.to_string(),
    };
    let arr = v.as_array().ok_or_else(|| bad("not a list"))?;
    if arr.len() != 2 {
        return Err(bad(&format!("expected 2 coordinates, got {}", arr.len())));
    }
    let x = arr[0].as_f64().ok_or_else(|| bad("x is not a number"))?;
    let y = arr[1].as_f64().ok_or_else(|| bad("y is not a number"))?;
    Ok([x, y])
}

fn opt_str(obj: &Map<String, Value>, key: &str) -> Option<String> {
    obj.get(key).and_then(Value::as_str).map(str::to_string)
}

fn opt_int(obj: &Map<String, Value>, key: &str) -> Option<i64> {
    obj.get(key).and_then(|v| v.as_i64().or_else(|| v.as_f64().map(|f| f as i64)))
}

pub fn parse_annotation(bytes: &[u8]) -> Result<AnnotationFile, AnnotationError> {
    let root: Value = serde_json::from_slice(bytes)?;
    let obj = root.as_object().ok_or(AnnotationError::MissingShapesKey)?;
    let shapes_v = obj
        .get("shapes")
        .and_then(Value::as_array)
        .ok_or(AnnotationError::MissingShapesKey)?;
    let mut shapes = Vec::with_capacity(shapes_v.len());
    for (si, s) in shapes_v.iter().enumerate() {
        let s = s.as_object().ok_or_else(|| AnnotationError::MalformedShape {
            shape: si,
            detail: "not an object".into(),
        })?;
        let pts = s.get("points").and_then(Value::as_array).ok_or_else(|| {
            AnnotationError::MalformedShape {
                shape: si,
                detail: "missing \"points\" list".into(),
            }
        })?;
        let points = pts
            .iter()
            .enumerate()
            .map(|(pi, p)| parse_point(si, pi, p))
            .collect::<Result<Vec<_>, _>>()?;
        if points.len() < 3 {
            return Err(AnnotationError::DegenerateRing {
                shape: si,
                points: points.len(),
            });
        }
        let label = match s.get("label") {
            Some(Value::String(l)) => Some(l.clone()),
            Some(Value::Number(n)) => Some(n.to_string()),
            _ => None,
        };
        shapes.push(RingShape { label, points });
    }
    Ok(AnnotationFile {
        image_path: opt_str(obj, "imagePath"),
        image_height: opt_int(obj, "imageHeight"),
        image_width: opt_int(obj, "imageWidth"),
        version: opt_str(obj, "version"),
        flags: obj.get("flags").and_then(Value::as_object).cloned(),
        image_data: opt_str(obj, "imageData"),
        shapes,
    })
}

pub fn load_annotation(path: &Path) -> Result<AnnotationFile, AnnotationError> {
    parse_annotation(&read_file(path)?)
}

#[derive(Serialize)]
struct OutFile<'a> {
    version: &'a str,
    flags: Map<String, Value>,
    shapes: &'a [RingShape],
    #[serde(rename = "imagePath")]
    image_path: Option<&'a str>,
    #[serde(rename = "imageData")]
    image_data: Option<()>,
    #[serde(rename = "imageHeight")]
    image_height: Option<u32>,
    #[serde(rename = "imageWidth")]
    image_width: Option<u32>,
}

/// Serialize rings as an annotation file. Floats are written with the
/// shortest representation that parses back to the same value.
pub fn save_annotation(rings: &[RingShape], meta: Option<&ImageMeta>) -> Result<Vec<u8>, AnnotationError> {
    if let Some((shape, r)) = rings.iter().enumerate().find(|(_, r)| r.points.len() < 3) {
        return Err(AnnotationError::DegenerateRing {
            shape,
            points: r.points.len(),
        });
    }
    let meta = meta.cloned().unwrap_or_default();
    let out = OutFile {
        version: FORMAT_VERSION,
        flags: Map::new(),
        shapes: rings,
        image_path: meta.image_path.as_deref(),
        image_data: None,
        image_height: meta.image_height,
        image_width: meta.image_width,
    };
    let mut bytes = serde_json::to_vec_pretty(&out)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_annotation(path: &Path, rings: &[RingShape], meta: Option<&ImageMeta>) -> Result<(), AnnotationError> {
    let bytes = save_annotation(rings, meta)?;
    fs::write(path, bytes).map_err(|source| AnnotationError::IoFailure {
        path: path.display().to_string(),
        source,
    })
}

/// Parse a pith table: a header row, then `name,cx,cy` per section.
pub fn parse_pith_csv(bytes: &[u8]) -> Result<BTreeMap<String, PithRecord>, AnnotationError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| AnnotationError::MalformedRow {
            row,
            detail: e.to_string(),
        })?;
        if rec.len() != 3 {
            return Err(AnnotationError::MalformedRow {
                row,
                detail: format!("expected 3 fields, got {}", rec.len()),
            });
        }
        let coord = |k: usize| -> Result<f64, AnnotationError> {
            let v: f64 = rec[k].parse().map_err(|_| AnnotationError::MalformedRow {
                row,
                detail: format!("{:?} is not a number", &rec[k]),
            })?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(AnnotationError::MalformedRow {
                    row,
                    detail: format!("coordinate {v} must be non-negative"),
                });
            }
            Ok(v)
        };
        let name = rec[0].to_string();
        let record = PithRecord {
            section_name: name.clone(),
            cx: coord(1)?,
            cy: coord(2)?,
        };
        if out.insert(name.clone(), record).is_some() {
            return Err(AnnotationError::DuplicateName(name));
        }
    }
    Ok(out)
}

pub fn load_pith_csv(path: &Path) -> Result<BTreeMap<String, PithRecord>, AnnotationError> {
    parse_pith_csv(&read_file(path)?)
}
