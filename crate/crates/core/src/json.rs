//! JSON formats.
//!
//! * complex: `[re, im]` (a bare number is read as real)
//! * matrix: row-major array of rows of complex entries
//! * tuple: `{"n": n, "entries": [matrix, …]}`
//! * domain: `{"d", "k", "epsilon", "delta"}` with polynomial text, or a
//!   pencil `{"r", "A": [matrix, …]}`
//! * certificate: `"fixture:<name>"`, `{"poly": text}` or inline
//!   `{"shape": [rows, cols], "tail_bound": x, "values": [{"point", "value"}]}`

use std::sync::Arc;

use num_complex::Complex64;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};
use crate::ncdomain::{pencil_to_domain, DomainSpec, PencilSpec};
use crate::ncpoly::{parse_poly, FreePolynomial, MatrixTuple, NcFunction};
use crate::realize::{Certificate, Colligation, SampleDims, TabulatedFunction};

fn bad(what: &str) -> Error {
    Error::Json(format!("expected {what}"))
}

pub fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Json(format!("missing field `{key}`")))
}

pub fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| bad(what))
}

pub fn as_f64(v: &Value, what: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| bad(what))
}

pub fn as_str<'a>(v: &'a Value, what: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(what))
}

pub fn complex_to_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn complex_from_json(v: &Value) -> Result<Complex64> {
    if let Some(x) = v.as_f64() {
        return Ok(c64(x, 0.0));
    }
    match v.as_array().map(Vec::as_slice) {
        Some([re, im]) => Ok(c64(as_f64(re, "real part")?, as_f64(im, "imaginary part")?)),
        _ => Err(bad("complex number [re, im]")),
    }
}

pub fn matrix_to_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect())).collect(),
    )
}

pub fn matrix_from_json(v: &Value) -> Result<CMat> {
    let rows = v.as_array().ok_or_else(|| bad("matrix (array of rows)"))?;
    let parsed: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|r| r.as_array().ok_or_else(|| bad("matrix row"))?.iter().map(complex_from_json).collect())
        .collect::<Result<_>>()?;
    let cols = parsed.first().map_or(0, Vec::len);
    if parsed.iter().any(|r| r.len() != cols) {
        return Err(Error::Json("ragged matrix rows".into()));
    }
    Ok(CMat::from_fn(parsed.len(), cols, |i, j| parsed[i][j]))
}

pub fn tuple_to_json(x: &MatrixTuple) -> Value {
    json!({ "n": x.level(), "entries": x.entries().iter().map(matrix_to_json).collect::<Vec<_>>() })
}

pub fn tuple_from_json(v: &Value) -> Result<MatrixTuple> {
    let entries = field(v, "entries")?
        .as_array()
        .ok_or_else(|| bad("tuple entries"))?
        .iter()
        .map(matrix_from_json)
        .collect::<Result<Vec<_>>>()?;
    let x = MatrixTuple::new(entries)?;
    if let Some(n) = v.get("n") {
        if as_usize(n, "level n")? != x.level() {
            return Err(Error::Json(format!("declared level {} but entries are {0}x{0}", x.level())));
        }
    }
    Ok(x)
}

/// One tuple or an array of tuples.
pub fn tuples_from_json(v: &Value) -> Result<Vec<MatrixTuple>> {
    match v.as_array() {
        Some(list) => list.iter().map(tuple_from_json).collect(),
        None => Ok(vec![tuple_from_json(v)?]),
    }
}

pub fn tuples_to_json(xs: &[MatrixTuple]) -> Value {
    Value::Array(xs.iter().map(tuple_to_json).collect())
}

pub fn pencil_to_json(p: &PencilSpec) -> Value {
    json!({ "r": p.r(), "A": p.coeffs().iter().map(matrix_to_json).collect::<Vec<_>>() })
}

pub fn pencil_from_json(v: &Value) -> Result<PencilSpec> {
    let coeffs = field(v, "A")?
        .as_array()
        .ok_or_else(|| bad("pencil coefficient list"))?
        .iter()
        .map(matrix_from_json)
        .collect::<Result<Vec<_>>>()?;
    let p = PencilSpec::new(coeffs)?;
    if let Some(r) = v.get("r") {
        if as_usize(r, "pencil size r")? != p.r() {
            return Err(Error::Json(format!("declared r does not match {0}x{0} coefficients", p.r())));
        }
    }
    Ok(p)
}

pub fn domain_to_json(spec: &DomainSpec) -> Value {
    json!({
        "d": spec.d(),
        "k": spec.k(),
        "epsilon": spec.epsilon().to_string(),
        "delta": spec.delta().to_string(),
    })
}

/// Accepts the polynomial form (missing `epsilon` means `I`) or a pencil.
pub fn domain_from_json(v: &Value) -> Result<DomainSpec> {
    if v.get("A").is_some() {
        return Ok(pencil_to_domain(&pencil_from_json(v)?));
    }
    let d = as_usize(field(v, "d")?, "variable count d")?;
    let k = as_usize(field(v, "k")?, "coefficient size k")?;
    let delta = parse_poly(as_str(field(v, "delta")?, "delta text")?, d, (k, k))?;
    match v.get("epsilon") {
        Some(e) => DomainSpec::new(parse_poly(as_str(e, "epsilon text")?, d, (k, k))?, delta),
        None => DomainSpec::gdelta(delta),
    }
}

/// Certificate in any of the accepted forms. Fixture certificates are
/// resolved by the caller, which knows the sample radius.
pub enum CertificateSource {
    Fixture(String),
    Poly(FreePolynomial, f64),
    Inline(TabulatedFunction, f64),
}

pub fn certificate_from_json(v: &Value, d: usize, shape: Option<(usize, usize)>) -> Result<CertificateSource> {
    if let Some(s) = v.as_str() {
        return match s.strip_prefix("fixture:") {
            Some(name) => Ok(CertificateSource::Fixture(name.to_string())),
            None => Err(bad("certificate \"fixture:<name>\"")),
        };
    }
    let tail = v.get("tail_bound").map(|t| as_f64(t, "tail_bound")).transpose()?.unwrap_or(0.0);
    if let Some(text) = v.get("poly") {
        let text = as_str(text, "certificate polynomial text")?;
        let shape = match (v.get("shape"), shape) {
            (Some(s), _) => shape_from_json(s)?,
            (None, Some(s)) => s,
            (None, None) => return Err(Error::Json("polynomial certificate needs a shape".into())),
        };
        return Ok(CertificateSource::Poly(parse_poly(text, d, shape)?, tail));
    }
    let (rows, cols) = shape_from_json(field(v, "shape")?)?;
    let table = field(v, "values")?
        .as_array()
        .ok_or_else(|| bad("certificate values"))?
        .iter()
        .map(|e| Ok((tuple_from_json(field(e, "point")?)?, matrix_from_json(field(e, "value")?)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CertificateSource::Inline(TabulatedFunction::new(rows, cols, table)?, tail))
}

impl CertificateSource {
    /// Certificate for non-fixture sources.
    pub fn into_certificate(self) -> Option<Certificate> {
        match self {
            CertificateSource::Fixture(_) => None,
            CertificateSource::Poly(p, tail) => Some(Certificate { h: Arc::new(p), tail_bound: tail }),
            CertificateSource::Inline(t, tail) => {
                Some(Certificate { h: Arc::new(t) as Arc<dyn NcFunction>, tail_bound: tail })
            }
        }
    }
}

fn shape_from_json(v: &Value) -> Result<(usize, usize)> {
    match v.as_array().map(Vec::as_slice) {
        Some([r, c]) => Ok((as_usize(r, "rows")?, as_usize(c, "cols")?)),
        _ => Err(bad("shape [rows, cols]")),
    }
}

pub fn dims_to_json(d: &SampleDims) -> Value {
    serde_json::to_value(d).expect("dims serialize")
}

pub fn colligation_to_json(col: &Colligation) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("A".into(), matrix_to_json(&col.a));
    m.insert("B".into(), matrix_to_json(&col.b));
    m.insert("C".into(), matrix_to_json(&col.c));
    m.insert("D".into(), matrix_to_json(&col.d));
    m
}

pub fn colligation_from_json(v: &Value, dims: &SampleDims) -> Result<Colligation> {
    let a = matrix_from_json(field(v, "A")?)?;
    let b = matrix_from_json(field(v, "B")?)?;
    let c = matrix_from_json(field(v, "C")?)?;
    let d = matrix_from_json(field(v, "D")?)?;
    let col = Colligation { a, b, c, d, norm: 0.0 };
    Colligation::from_matrix(&col.matrix(), dims)
}

/// Hex SHA-256 of the compact serialization (object keys are sorted).
pub fn content_hash(v: &Value) -> String {
    let bytes = serde_json::to_vec(v).expect("json serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
