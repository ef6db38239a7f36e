//! Deterministic report emission.
//!
//! Reports serialize to compact JSON with every float printed at 17
//! significant digits, which round-trips f64 exactly and keeps repeated runs
//! byte-identical.

use num_complex::Complex64;
use serde::ser::Serialize;
use serde::{Deserialize, Serialize as SerializeDerive};
use std::collections::BTreeMap;
use std::io;

use crate::error::Result;
use crate::quad::QuadratureSpec;

pub const REPORT_SCHEMA: &str = "tetralab/report-v1";

/// 17 significant digits: enough to reproduce any f64 bit pattern on parse.
pub fn fmt_sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Grid parameters and normalization constant echoed into every artifact.
#[derive(Clone, Copy, Debug, SerializeDerive, Deserialize, PartialEq)]
pub struct MeasureInfo {
    pub max_degree: u32,
    pub n_angular: usize,
    pub n_radial: usize,
    pub c: f64,
}

impl MeasureInfo {
    pub fn new(spec: &QuadratureSpec, c: f64) -> Self {
        Self {
            max_degree: spec.max_degree,
            n_angular: spec.n_angular,
            n_radial: spec.n_radial,
            c,
        }
    }

    pub fn spec(&self) -> QuadratureSpec {
        QuadratureSpec {
            max_degree: self.max_degree,
            n_angular: self.n_angular,
            n_radial: self.n_radial,
        }
    }
}

#[derive(Clone, Debug, SerializeDerive, Deserialize)]
pub struct ProfilePoint {
    pub r: u32,
    pub max_abs_entry: f64,
}

#[derive(Clone, Debug, SerializeDerive, Deserialize)]
pub struct RecoveredTerm {
    pub a: u32,
    pub b: u32,
    pub k: i32,
    pub re: f64,
    pub im: f64,
}

/// One report per command run. Optional sections stay out of the JSON when
/// empty so each command's schema is stable.
#[derive(Clone, Debug, SerializeDerive, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: Vec<String>,
    pub check: String,
    #[serde(rename = "N")]
    pub n: u32,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    pub residuals: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<BTreeMap<String, u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<ProfilePoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovered: Option<Vec<RecoveredTerm>>,
    pub pass: bool,
    pub basis_file: Option<String>,
    pub measure: MeasureInfo,
}

impl Report {
    pub fn new(check: &str, n: u32, tol: f64, measure: MeasureInfo) -> Self {
        Self {
            schema: REPORT_SCHEMA.to_string(),
            command: Vec::new(),
            check: check.to_string(),
            n,
            tol,
            seed: None,
            symbol: None,
            residuals: BTreeMap::new(),
            counts: None,
            profile: None,
            recovered: None,
            pass: false,
            basis_file: None,
            measure,
        }
    }
}

/// JSON formatter printing every float with 17 significant digits.
struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(fmt_sig17(value).as_bytes())
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes any value to deterministic JSON with a trailing newline.
pub fn to_json_deterministic<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17Formatter);
    value
        .serialize(&mut ser)
        .map_err(|e| crate::error::CoreError::BasisFormat(format!("serialize: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

pub fn write_json_file<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_deterministic(value)?)?;
    Ok(())
}

pub fn complex_to_pair(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}
