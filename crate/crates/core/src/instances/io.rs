//! JSON instance files.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "class": "procrustes",
//!   "n": 6, "p": 2, "seed": 42,
//!   "H": [["1.25", "-0.5", ...], ...],
//!   "g": ["0.1", ...],
//!   "aux": {"m": 7, "A": [[...]], "B": [[...]], "C": [[...]], "q": 5}
//! }
//! ```
//!
//! Reals are strings holding the shortest decimal that round-trips to the
//! same binary64 value, so a save/load cycle is bit-exact. `aux` is optional
//! and `C`/`q` appear only for Penrose instances.

use std::path::Path;

use serde_json::{json, Map, Value};

use super::{GeneratorWitness, ProblemClass, QpsInstance};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SymMatrix};

pub const SCHEMA_VERSION: u64 = 1;

/// Largest asymmetry `|H_ij − H_ji|` accepted on load.
const SYMMETRY_TOL: f64 = 1e-12;

pub(crate) fn format_real(v: f64) -> String {
    format!("{v:?}")
}

fn real_row(values: &[f64]) -> Value {
    Value::Array(
        values
            .iter()
            .map(|v| Value::String(format_real(*v)))
            .collect(),
    )
}

fn matrix_value(m: &DenseMatrix) -> Value {
    Value::Array((0..m.rows()).map(|i| real_row(m.row(i))).collect())
}

pub fn instance_to_json(inst: &QpsInstance) -> Value {
    let mut obj = Map::new();
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("class".into(), json!(inst.class().tag()));
    obj.insert("n".into(), json!(inst.n()));
    obj.insert("p".into(), json!(inst.p()));
    obj.insert("seed".into(), json!(inst.seed()));
    obj.insert("H".into(), matrix_value(&inst.h().to_dense()));
    obj.insert("g".into(), real_row(inst.g()));
    if let Some(w) = inst.aux() {
        let mut aux = Map::new();
        aux.insert("m".into(), json!(w.m));
        aux.insert("A".into(), matrix_value(&w.a));
        aux.insert("B".into(), matrix_value(&w.b));
        if let (Some(c), Some(q)) = (&w.c, w.q) {
            aux.insert("C".into(), matrix_value(c));
            aux.insert("q".into(), json!(q));
        }
        obj.insert("aux".into(), Value::Object(aux));
    }
    Value::Object(obj)
}

pub fn save_instance(inst: &QpsInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&instance_to_json(inst))
        .map_err(|e| Error::Validation(format!("cannot serialize instance: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<QpsInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    instance_from_str(&text)
}

pub fn instance_from_str(text: &str) -> Result<QpsInstance> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| Error::parse("<document>", e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::parse("<document>", "expected a JSON object"))?;

    let version = get_uint(obj, "schema_version")?;
    if version != SCHEMA_VERSION {
        return Err(Error::parse(
            "schema_version",
            format!("unsupported version {version}, expected {SCHEMA_VERSION}"),
        ));
    }
    let class: ProblemClass = get(obj, "class")?
        .as_str()
        .ok_or_else(|| Error::parse("class", "expected a string"))?
        .parse()
        .map_err(|e: Error| Error::parse("class", e.to_string()))?;
    let n = get_uint(obj, "n")? as usize;
    let p = get_uint(obj, "p")? as usize;
    let seed = get_uint(obj, "seed")?;
    if p == 0 || p > n {
        return Err(Error::Validation(format!(
            "need 1 <= p <= n, file has n={n}, p={p}"
        )));
    }
    let h_dense = get_matrix(obj, "H")?;
    let np = n * p;
    if h_dense.shape() != (np, np) {
        return Err(Error::Validation(format!(
            "H is {}x{}, expected {np}x{np}",
            h_dense.rows(),
            h_dense.cols()
        )));
    }
    for i in 0..np {
        for j in (i + 1)..np {
            let gap = (h_dense[(i, j)] - h_dense[(j, i)]).abs();
            if gap > SYMMETRY_TOL {
                return Err(Error::Validation(format!(
                    "H is not symmetric: |H[{i}][{j}] − H[{j}][{i}]| = {gap:.3e}"
                )));
            }
        }
    }
    let h = exact_symmetric(&h_dense);
    let g = get_reals(get(obj, "g")?, "g")?;

    let aux = match obj.get("aux") {
        None | Some(Value::Null) => None,
        Some(Value::Object(a)) => Some(parse_aux(a)?),
        Some(_) => return Err(Error::parse("aux", "expected an object")),
    };
    QpsInstance::new(n, p, h, g, class, seed, aux)
}

/// Keeps the upper triangle bit-for-bit when the file is already exactly
/// symmetric; otherwise averages.
fn exact_symmetric(h: &DenseMatrix) -> SymMatrix {
    let n = h.rows();
    SymMatrix::from_upper_fn(n, |i, j| {
        let (a, b) = (h[(i, j)], h[(j, i)]);
        if a == b {
            a
        } else {
            0.5 * (a + b)
        }
    })
}

fn parse_aux(a: &Map<String, Value>) -> Result<GeneratorWitness> {
    let m = get_uint(a, "m").map_err(|e| nest("aux", e))? as usize;
    let am = get_matrix(a, "A").map_err(|e| nest("aux", e))?;
    let bm = get_matrix(a, "B").map_err(|e| nest("aux", e))?;
    let (c, q) = match (a.get("C"), a.get("q")) {
        (Some(_), Some(_)) => (
            Some(get_matrix(a, "C").map_err(|e| nest("aux", e))?),
            Some(get_uint(a, "q").map_err(|e| nest("aux", e))? as usize),
        ),
        (None, None) => (None, None),
        _ => return Err(Error::parse("aux", "`C` and `q` must appear together")),
    };
    Ok(GeneratorWitness {
        m,
        a: am,
        b: bm,
        c,
        q,
    })
}

fn nest(prefix: &str, e: Error) -> Error {
    match e {
        Error::Parse { field, message } => Error::Parse {
            field: format!("{prefix}.{field}"),
            message,
        },
        other => other,
    }
}

fn get<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a Value> {
    obj.get(field)
        .ok_or_else(|| Error::parse(field, "missing required field"))
}

fn get_uint(obj: &Map<String, Value>, field: &str) -> Result<u64> {
    get(obj, field)?
        .as_u64()
        .ok_or_else(|| Error::parse(field, "expected a non-negative integer"))
}

fn parse_real(v: &Value, field: &str) -> Result<f64> {
    let s = v
        .as_str()
        .ok_or_else(|| Error::parse(field, "reals must be encoded as strings"))?;
    let x: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(field, format!("`{s}` is not a real number")))?;
    if !x.is_finite() {
        return Err(Error::parse(field, format!("`{s}` is not finite")));
    }
    Ok(x)
}

fn get_reals(v: &Value, field: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::parse(field, "expected an array"))?
        .iter()
        .map(|x| parse_real(x, field))
        .collect()
}

fn get_matrix(obj: &Map<String, Value>, field: &str) -> Result<DenseMatrix> {
    let rows = get(obj, field)?
        .as_array()
        .ok_or_else(|| Error::parse(field, "expected an array of rows"))?;
    let parsed: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| get_reals(r, field))
        .collect::<Result<_>>()?;
    let cols = parsed.first().map_or(0, |r| r.len());
    if parsed.iter().any(|r| r.len() != cols) {
        return Err(Error::parse(field, "rows have different lengths"));
    }
    let data = parsed.into_iter().flatten().collect();
    DenseMatrix::from_row_major(rows.len(), cols, data)
        .map_err(|e| Error::parse(field, e.to_string()))
}
