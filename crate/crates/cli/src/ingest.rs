//! Operator-spec ingestion: a small JSON schema describing grid,
//! coefficients, weight, and assembly family. Every parse failure names the
//! offending JSON path.

use fracext_core::assemble::{
    assemble_nondivergence, assemble_subelliptic_diagonal, assemble_weighted_elliptic,
};
use fracext_core::field::{CoeffField, CoeffKind, WeightField};
use fracext_core::grid::{Boundary, GridSpec};
use fracext_core::operator::AssembledOperator;
use ndarray::Array1;
use serde_json::Value;
use std::fmt;

#[derive(Debug)]
pub struct SpecError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "spec error at {}: {}", self.path, self.message)
    }
}

impl std::error::Error for SpecError {}

fn err(path: &str, message: impl Into<String>) -> SpecError {
    SpecError {
        path: path.to_string(),
        message: message.into(),
    }
}

fn get<'a>(v: &'a Value, parent: &str, key: &str) -> Result<&'a Value, SpecError> {
    v.get(key)
        .ok_or_else(|| err(&format!("{parent}.{key}"), "missing field"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64, SpecError> {
    v.as_f64()
        .ok_or_else(|| err(path, format!("expected a number, got {v}")))
}

fn as_usize(v: &Value, path: &str) -> Result<usize, SpecError> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| err(path, format!("expected a nonnegative integer, got {v}")))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, SpecError> {
    v.as_str()
        .ok_or_else(|| err(path, format!("expected a string, got {v}")))
}

fn opt_f64(v: &Value, parent: &str, key: &str, default: f64) -> Result<f64, SpecError> {
    match v.get(key) {
        Some(x) => as_f64(x, &format!("{parent}.{key}")),
        None => Ok(default),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssemblyKind {
    WeightedElliptic,
    SubellipticDiagonal,
    Nondivergence,
}

/// A fully constructed operator together with the pieces it was built from.
pub struct LoadedSpec {
    pub grid: GridSpec,
    pub coeff: CoeffField,
    pub weight: WeightField,
    pub assembly: AssemblyKind,
    pub op: AssembledOperator,
}

fn parse_grid(root: &Value) -> Result<GridSpec, SpecError> {
    let g = get(root, "$", "grid")?;
    let kind = as_str(get(g, "$.grid", "kind")?, "$.grid.kind")?;
    let lo = as_f64(get(g, "$.grid", "lo")?, "$.grid.lo")?;
    let hi = as_f64(get(g, "$.grid", "hi")?, "$.grid.hi")?;
    let points = as_usize(get(g, "$.grid", "points")?, "$.grid.points")?;
    let boundary = match as_str(get(g, "$.grid", "boundary")?, "$.grid.boundary")? {
        "dirichlet-eliminated" => Boundary::DirichletEliminated,
        "periodic" => Boundary::Periodic,
        other => {
            return Err(err(
                "$.grid.boundary",
                format!("unknown boundary '{other}' (expected dirichlet-eliminated or periodic)"),
            ))
        }
    };
    let built = match kind {
        "line" => GridSpec::line(lo, hi, points, boundary),
        "square" => GridSpec::square(lo, hi, points, boundary),
        other => {
            return Err(err(
                "$.grid.kind",
                format!("unknown grid kind '{other}' (expected line or square)"),
            ))
        }
    };
    built.map_err(|e| err("$.grid", e.to_string()))
}

fn parse_coeff(root: &Value, grid: &GridSpec) -> Result<CoeffField, SpecError> {
    let c = match root.get("coefficients") {
        None => return Ok(CoeffField::identity(grid)),
        Some(c) => c,
    };
    let kind = as_str(get(c, "$.coefficients", "kind")?, "$.coefficients.kind")?;
    match kind {
        "identity" => Ok(CoeffField::identity(grid)),
        "constant-matrix" => {
            let a = get(c, "$.coefficients", "a")?;
            let rows = a
                .as_array()
                .ok_or_else(|| err("$.coefficients.a", "expected a 2x2 array"))?;
            if rows.len() != 2 {
                return Err(err("$.coefficients.a", "expected exactly 2 rows"));
            }
            let mut m = [[0.0f64; 2]; 2];
            for (i, row) in rows.iter().enumerate() {
                let cols = row
                    .as_array()
                    .ok_or_else(|| err(&format!("$.coefficients.a[{i}]"), "expected 2 entries"))?;
                if cols.len() != 2 {
                    return Err(err(&format!("$.coefficients.a[{i}]"), "expected 2 entries"));
                }
                for (j, x) in cols.iter().enumerate() {
                    m[i][j] = as_f64(x, &format!("$.coefficients.a[{i}][{j}]"))?;
                }
            }
            let lambda = opt_f64(c, "$.coefficients", "lambda", 1.0)?;
            let big = opt_f64(c, "$.coefficients", "big_lambda", lambda.max(1.0))?;
            let form = match c.get("form") {
                None => CoeffKind::MatrixA,
                Some(f) => match as_str(f, "$.coefficients.form")? {
                    "divergence" => CoeffKind::MatrixA,
                    "nondivergence" => CoeffKind::NondivA,
                    other => {
                        return Err(err(
                            "$.coefficients.form",
                            format!("unknown form '{other}' (expected divergence or nondivergence)"),
                        ))
                    }
                },
            };
            CoeffField::constant_matrix(grid, form, m, lambda, big)
                .map_err(|e| err("$.coefficients", e.to_string()))
        }
        "constant-diagonal" => {
            let d = get(c, "$.coefficients", "d")?;
            let entries = d
                .as_array()
                .ok_or_else(|| err("$.coefficients.d", "expected an array"))?;
            if entries.is_empty() || entries.len() > 2 {
                return Err(err("$.coefficients.d", "expected 1 or 2 entries"));
            }
            let mut dd = [0.0f64; 2];
            for (i, x) in entries.iter().enumerate() {
                dd[i] = as_f64(x, &format!("$.coefficients.d[{i}]"))?;
            }
            CoeffField::diagonal(grid, |_| dd).map_err(|e| err("$.coefficients", e.to_string()))
        }
        "grushin" => {
            let k = opt_f64(c, "$.coefficients", "k", 1.0)?;
            CoeffField::grushin(grid, k).map_err(|e| err("$.coefficients", e.to_string()))
        }
        other => Err(err(
            "$.coefficients.kind",
            format!(
                "unknown coefficient kind '{other}' \
                 (expected identity, constant-matrix, constant-diagonal, or grushin)"
            ),
        )),
    }
}

fn parse_weight(root: &Value, grid: &GridSpec) -> Result<WeightField, SpecError> {
    let w = match root.get("weight") {
        None => return Ok(WeightField::unit(grid)),
        Some(w) => w,
    };
    let kind = as_str(get(w, "$.weight", "kind")?, "$.weight.kind")?;
    let built = match kind {
        "unit" => return Ok(WeightField::unit(grid)),
        "abs-pow" => {
            let p = as_f64(get(w, "$.weight", "p")?, "$.weight.p")?;
            let eps = opt_f64(w, "$.weight", "eps", 1e-12)?;
            WeightField::abs_pow(grid, p, eps)
        }
        "exp-clipped" => {
            let cap = opt_f64(w, "$.weight", "cap", 10.0)?;
            WeightField::exp_clipped(grid, cap)
        }
        "values" => {
            let vs = get(w, "$.weight", "values")?;
            let arr = vs
                .as_array()
                .ok_or_else(|| err("$.weight.values", "expected an array of numbers"))?;
            let mut values = Vec::with_capacity(arr.len());
            for (i, x) in arr.iter().enumerate() {
                values.push(as_f64(x, &format!("$.weight.values[{i}]"))?);
            }
            WeightField::from_values(Array1::from_vec(values))
        }
        other => {
            return Err(err(
                "$.weight.kind",
                format!(
                    "unknown weight kind '{other}' \
                     (expected unit, abs-pow, exp-clipped, or values)"
                ),
            ))
        }
    };
    built.map_err(|e| err("$.weight", e.to_string()))
}

fn parse_assembly(root: &Value) -> Result<AssemblyKind, SpecError> {
    match root.get("assembly") {
        None => Ok(AssemblyKind::WeightedElliptic),
        Some(a) => match as_str(a, "$.assembly")? {
            "weighted-elliptic" => Ok(AssemblyKind::WeightedElliptic),
            "subelliptic-diagonal" => Ok(AssemblyKind::SubellipticDiagonal),
            "nondivergence" => Ok(AssemblyKind::Nondivergence),
            other => Err(err(
                "$.assembly",
                format!(
                    "unknown assembly '{other}' (expected weighted-elliptic, \
                     subelliptic-diagonal, or nondivergence)"
                ),
            )),
        },
    }
}

/// Builds the operator described by a parsed JSON document.
pub fn load_spec_value(root: &Value) -> Result<LoadedSpec, SpecError> {
    if !root.is_object() {
        return Err(err("$", "spec document must be a JSON object"));
    }
    let grid = parse_grid(root)?;
    let coeff = parse_coeff(root, &grid)?;
    let weight = parse_weight(root, &grid)?;
    let assembly = parse_assembly(root)?;
    let op = match assembly {
        AssemblyKind::WeightedElliptic => assemble_weighted_elliptic(&grid, &coeff, &weight),
        AssemblyKind::SubellipticDiagonal => assemble_subelliptic_diagonal(&grid, &coeff),
        AssemblyKind::Nondivergence => assemble_nondivergence(&grid, &coeff),
    }
    .map_err(|e| err("$.assembly", e.to_string()))?;
    Ok(LoadedSpec {
        grid,
        coeff,
        weight,
        assembly,
        op,
    })
}

/// Reads and builds a spec file.
pub fn load_spec_file(path: &std::path::Path) -> Result<(Value, LoadedSpec), SpecError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err("$", format!("cannot read {}: {e}", path.display())))?;
    let root: Value = serde_json::from_str(&text)
        .map_err(|e| err("$", format!("invalid JSON in {}: {e}", path.display())))?;
    let loaded = load_spec_value(&root)?;
    Ok((root, loaded))
}

/// The same spec with the mesh refined one step: the node count doubles in a
/// way that halves the spacing for either boundary convention.
pub fn refined_value(root: &Value) -> Result<Value, SpecError> {
    let mut v = root.clone();
    let g = v
        .get_mut("grid")
        .ok_or_else(|| err("$.grid", "missing field"))?;
    let points = as_usize(get(g, "$.grid", "points")?, "$.grid.points")?;
    let boundary = as_str(get(g, "$.grid", "boundary")?, "$.grid.boundary")?.to_string();
    let refined = if boundary == "periodic" {
        2 * points
    } else {
        2 * points + 1
    };
    g.as_object_mut()
        .ok_or_else(|| err("$.grid", "expected an object"))?
        .insert("points".into(), Value::from(refined as u64));
    Ok(v)
}
