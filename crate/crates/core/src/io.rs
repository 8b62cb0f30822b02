//! Datum files and report serialization.
//!
//! A datum file is a JSON object with keys `quiver`, `dims`, `matrices`
//! and exactly one of `weight` (integer per vertex) or `exponents`
//! (`"num/den"` per sink). Matrices are row-major, `d(head)` rows by
//! `d(tail)` columns.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

use crate::bl::{BLDatum, ExtendedReal};
use crate::error::{Error, Result};
use crate::quiver::{
    validate_datum, Arrow, BipartiteQuiver, DimVector, ExponentTuple, QuiverDatum, Representation, ValidationReport,
    Weight,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrowFile {
    id: String,
    tail: String,
    head: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuiverFile {
    sources: Vec<String>,
    sinks: Vec<String>,
    arrows: Vec<ArrowFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumFile {
    quiver: QuiverFile,
    dims: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<BTreeMap<String, i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponents: Option<BTreeMap<String, String>>,
    matrices: BTreeMap<String, Vec<Vec<f64>>>,
}

/// A parsed datum file. The exponent form selects Brascamp-Lieb mode.
#[derive(Clone, Debug, PartialEq)]
pub enum ParsedDatum {
    Quiver(QuiverDatum),
    Bl(BLDatum),
}

impl ParsedDatum {
    /// The quiver datum to scale: `(V, σ)` or `(V, σ_p)`.
    pub fn quiver_datum(&self) -> Result<QuiverDatum> {
        match self {
            ParsedDatum::Quiver(d) => Ok(d.clone()),
            ParsedDatum::Bl(b) => b.to_quiver_datum(),
        }
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        Ok(validate_datum(&self.quiver_datum()?))
    }
}

fn matrix_from_rows(arrow: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::Parse(format!(
            "matrix for arrow {arrow} has {} rows, expected d(head) = {nrows}",
            rows.len()
        )));
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Parse(format!(
                "matrix for arrow {arrow}: row {r} has {} entries, expected d(tail) = {ncols}",
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

impl DatumFile {
    fn into_parts(self) -> Result<(BipartiteQuiver, DimVector, Representation, DatumMode)> {
        let quiver = BipartiteQuiver {
            sources: self.quiver.sources,
            sinks: self.quiver.sinks,
            arrows: self
                .quiver
                .arrows
                .into_iter()
                .map(|a| Arrow {
                    id: a.id,
                    tail: a.tail,
                    head: a.head,
                })
                .collect(),
        };
        let dims = DimVector(self.dims);
        let mut rep = Representation::default();
        for (id, rows) in &self.matrices {
            let Some(a) = quiver.arrows.iter().find(|a| &a.id == id) else {
                return Err(Error::Parse(format!("matrix given for unknown arrow {id}")));
            };
            let (h, t) = (dims.0.get(&a.head), dims.0.get(&a.tail));
            let (Some(&h), Some(&t)) = (h, t) else {
                return Err(Error::Parse(format!("arrow {id} has an endpoint without a dimension")));
            };
            rep.insert(id, matrix_from_rows(id, rows, h, t)?);
        }
        let mode = match (self.weight, self.exponents) {
            (Some(w), None) => DatumMode::Weight(Weight(w)),
            (None, Some(p)) => DatumMode::Exponents(p),
            (Some(_), Some(_)) => return Err(Error::Parse("both \"weight\" and \"exponents\" given".into())),
            (None, None) => return Err(Error::Parse("one of \"weight\" or \"exponents\" is required".into())),
        };
        Ok((quiver, dims, rep, mode))
    }

    /// Builds the datum without checking the quiver invariants.
    pub fn into_datum_unchecked(self) -> Result<ParsedDatum> {
        let (quiver, dims, rep, mode) = self.into_parts()?;
        match mode {
            DatumMode::Weight(weight) => Ok(ParsedDatum::Quiver(QuiverDatum::new(quiver, dims, weight, rep))),
            DatumMode::Exponents(p) => {
                for id in p.keys() {
                    if quiver.sink_index(id).is_none() {
                        return Err(Error::Parse(format!("exponent given for {id}, which is not a sink")));
                    }
                }
                let items = quiver
                    .sinks
                    .iter()
                    .map(|w| {
                        p.get(w)
                            .map(String::as_str)
                            .ok_or_else(|| Error::Parse(format!("no exponent for sink {w}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let exponents = ExponentTuple::parse(&items)?;
                Ok(ParsedDatum::Bl(BLDatum {
                    quiver,
                    dims,
                    rep,
                    exponents,
                }))
            }
        }
    }

    /// Builds and validates the datum.
    pub fn into_datum(self) -> Result<ParsedDatum> {
        let parsed = self.into_datum_unchecked()?;
        let report = parsed.validate()?;
        if !report.is_valid() {
            return Err(Error::Invalid(report.violations));
        }
        Ok(parsed)
    }

    pub fn from_datum(datum: &ParsedDatum) -> Self {
        let (quiver, dims, rep) = match datum {
            ParsedDatum::Quiver(d) => (&d.quiver, &d.dims, &d.rep),
            ParsedDatum::Bl(b) => (&b.quiver, &b.dims, &b.rep),
        };
        let (weight, exponents) = match datum {
            ParsedDatum::Quiver(d) => (Some(d.weight.0.clone()), None),
            ParsedDatum::Bl(b) => (
                None,
                Some(b.quiver.sinks.iter().cloned().zip(b.exponents.to_strings()).collect()),
            ),
        };
        Self {
            quiver: QuiverFile {
                sources: quiver.sources.clone(),
                sinks: quiver.sinks.clone(),
                arrows: quiver
                    .arrows
                    .iter()
                    .map(|a| ArrowFile {
                        id: a.id.clone(),
                        tail: a.tail.clone(),
                        head: a.head.clone(),
                    })
                    .collect(),
            },
            dims: dims.0.clone(),
            weight,
            exponents,
            matrices: rep
                .0
                .iter()
                .map(|(id, m)| (id.clone(), m.row_iter().map(|r| r.iter().copied().collect()).collect()))
                .collect(),
        }
    }
}

enum DatumMode {
    Weight(Weight),
    Exponents(BTreeMap<String, String>),
}

/// Parses datum JSON. Syntax errors carry line, column and key path.
pub fn parse_datum_file(text: &str) -> Result<DatumFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::Parse(inner.to_string())
        } else {
            Error::Parse(format!("at {path}: {inner}"))
        }
    })
}

pub fn parse_datum_str(text: &str) -> Result<ParsedDatum> {
    parse_datum_file(text)?.into_datum()
}

pub fn parse_datum(path: &Path) -> Result<ParsedDatum> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    parse_datum_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Pretty JSON; floats are written in shortest round-trip form.
pub fn serialize_datum(datum: &ParsedDatum) -> String {
    let mut s = serde_json::to_string_pretty(&DatumFile::from_datum(datum)).expect("datum files always serialize");
    s.push('\n');
    s
}

/// A float with 17 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&format!("{x:.16e}")).expect("formatted float is valid JSON"))
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

/// A capacity-like quantity: an exact zero is the string `"0"`.
pub fn nonneg(x: f64) -> Value {
    if x == 0.0 {
        Value::String("0".into())
    } else {
        num(x)
    }
}

pub fn extended(x: ExtendedReal) -> Value {
    match x {
        ExtendedReal::Finite(v) => nonneg(v),
        ExtendedReal::Infinity => Value::String("inf".into()),
    }
}

pub fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|&x| num(x)).collect()))
            .collect(),
    )
}

/// Inverse of [`num`], for reading reports back.
pub fn read_num(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "0" => Some(0.0),
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}
