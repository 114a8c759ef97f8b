use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{parse_number, Cube};

/// One accepted key of a command: name, default (empty means "derived"),
/// and help text.
#[derive(Debug, Clone, Copy)]
pub struct Field {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn field(key: &'static str, default: &'static str, help: &'static str) -> Field {
    Field { key, default, help }
}

/// Keys accepted by every command.
pub const COMMON: &[Field] = &[
    field("dim", "1", "spatial dimension n"),
    field("out", ".", "directory receiving <command>.json and <command>.csv"),
    field("threads", "0", "worker threads (0 = all cores)"),
    field("seed", "24301", "seed for randomized sampling"),
    field("resolution", "", "quadrature nodes per axis (default depends on command and n)"),
];

pub const OSCILLATION: &[Field] = &[
    field("f", "", "function: catalog name or expression in x1..xn"),
    field("mode", "classify", "classify | small | translation | large | annulus"),
    field("cube", "", "base cube for translation mode, e.g. [-pi/2,pi/2]x[0,1]"),
    field("radii", "", "translation or annulus radii"),
    field("scales", "", "cube volumes for small or large mode"),
    field("half_width", "", "scan centres cover [-half_width, half_width]^n"),
    field("spacing", "", "scan centre spacing"),
    field("tol", "1e-2", "classification tolerance"),
];

pub const APPROX: &[Field] = &[
    field("f", "smoothed_log", "function: catalog name or expression"),
    field("eps", "0.5", "target accuracy epsilon"),
    field("kmax", "6", "number of annular generations"),
    field("radii", "10,100,1000", "radii of the derivative decay probes"),
    field("test_centers", "", "test cube centres per side in each regime"),
    field("gap_points", "", "sample points per axis for sup |g - h|"),
];

pub const KERNEL_VERIFY: &[Field] = &[
    field("kernel", "reference", "reference | riesz | tail_k3"),
    field("eta", "", "truncation parameter (omit for the untruncated kernel)"),
    field("a", "4", "cutoff scale A for tail_k3"),
    field("samples", "20000", "random sample triples"),
    field("sweep", "4096", "deterministic sweep samples"),
    field("s_min", "1e-3", "smallest separation sampled"),
    field("s_max", "1e3", "largest separation sampled"),
    field("decay_s", "10,100,1000", "separations for the decay slope"),
];

pub const COMMUTATOR: &[Field] = &[
    field("b", "smoothed_log", "multiplier b"),
    field("kernel", "reference", "reference | riesz | tail_k3"),
    field("eta", "", "truncation parameter"),
    field("a", "4", "cutoff scale A for tail_k3"),
    field("f", "bump", "first input"),
    field("f_support", "", "cube containing the support of f (default [-1,1]^n)"),
    field("g", "bump", "second input"),
    field("g_support", "", "cube containing the support of g (default [-1,1]^n)"),
    field("slot", "1", "argument receiving b: 1 or 2"),
    field("points", "0;0.5;1;2", "evaluation points, `;` between points, `,` between coordinates"),
];

pub const WEIGHTS: &[Field] = &[
    field("w1", "1", "first weight"),
    field("w2", "1", "second weight"),
    field("p1", "2", "first exponent"),
    field("p2", "2", "second exponent"),
    field("extent", "16", "scanned cubes lie in [-extent, extent]^n"),
];

pub const COMPACTNESS: &[Field] = &[
    field("family", "commutator", "commutator | zero | far_translate"),
    field("b", "smoothed_log", "multiplier b"),
    field("kernel", "reference", "reference | riesz | tail_k3"),
    field("eta", "0.25", "truncation parameter"),
    field("a", "4", "cutoff scale A for tail_k3"),
    field("w1", "1", "first weight"),
    field("w2", "1", "second weight"),
    field("p1", "4", "first exponent"),
    field("p2", "4", "second exponent"),
    field("half_width", "40", "output grid covers [-half_width, half_width]^n"),
    field("spacing", "1/32", "output grid spacing"),
    field("a_list", "5,10,20", "tail radii A"),
    field("t_list", "0.1,0.03,0.01", "translation lengths |t|"),
    field("bound_cap", "1e3", "boundedness cap"),
    field("tail_rel", "1e-2", "tail tolerance relative to the bounded sup"),
    field("modulus_rel", "1e-2", "modulus tolerance relative to the bounded sup"),
];

/// Fully resolved key-value configuration of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub values: BTreeMap<String, String>,
}

/// Normalizes `half-width` and `half_width` to the same key.
pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Reads a flat `key = value` file. Blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::precondition(format!(
                "config line {}: expected `key = value`, found `{line}`",
                i + 1
            )));
        };
        let k = normalize_key(k);
        if k.is_empty() {
            return Err(Error::precondition(format!("config line {}: empty key", i + 1)));
        }
        out.push((k, unquote(v.trim()).to_string()));
    }
    Ok(out)
}

fn unquote(v: &str) -> &str {
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}

impl RunConfig {
    /// Defaults, then `file` entries, then `overrides`; rejects unknown keys.
    pub fn resolve(
        command: &str,
        schema: &[Field],
        file: &[(String, String)],
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut values = BTreeMap::new();
        for f in COMMON.iter().chain(schema) {
            values.insert(f.key.to_string(), f.default.to_string());
        }
        for (k, v) in file.iter().chain(overrides) {
            if !values.contains_key(k.as_str()) {
                return Err(Error::precondition(format!(
                    "unknown field `{k}` for command `{command}`"
                )));
            }
            values.insert(k.clone(), v.clone());
        }
        Ok(RunConfig {
            command: command.to_string(),
            values,
        })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.raw(key).trim().is_empty()
    }

    /// Replaces a derived (empty) value so the report shows what ran.
    pub fn fill(&mut self, key: &str, value: impl ToString) {
        if !self.is_set(key) {
            self.values.insert(key.to_string(), value.to_string());
        }
    }

    pub fn text(&self, key: &str) -> Result<String> {
        let v = self.raw(key).trim();
        if v.is_empty() {
            return Err(field_error(key, "is required"));
        }
        Ok(v.to_string())
    }

    pub fn number(&self, key: &str) -> Result<f64> {
        let v = self.text(key)?;
        parse_number(&v).map_err(|e| field_error(key, &format!("`{v}` is not a number ({})", reason(&e))))
    }

    pub fn positive(&self, key: &str) -> Result<f64> {
        let v = self.number(key)?;
        if !(v > 0.0) {
            return Err(field_error(key, &format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    pub fn opt_number(&self, key: &str) -> Result<Option<f64>> {
        if self.is_set(key) {
            self.number(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn count(&self, key: &str) -> Result<usize> {
        let v = self.text(key)?;
        v.parse::<usize>()
            .map_err(|_| field_error(key, &format!("`{v}` is not a non-negative integer")))
    }

    pub fn opt_count(&self, key: &str) -> Result<Option<usize>> {
        if self.is_set(key) {
            self.count(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn seed(&self) -> Result<u64> {
        let v = self.text("seed")?;
        let parsed = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
            Some(hex) => u64::from_str_radix(hex, 16),
            None => v.parse::<u64>(),
        };
        parsed.map_err(|_| field_error("seed", &format!("`{v}` is not an unsigned 64-bit integer")))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.text(key)?;
        parse_list(&v).map_err(|e| field_error(key, &reason(&e)))
    }

    pub fn cube(&self, key: &str, dim: usize) -> Result<Cube> {
        let v = self.text(key)?;
        let q = parse_cube(&v).map_err(|e| field_error(key, &reason(&e)))?;
        if q.dim() != dim {
            return Err(field_error(key, &format!("has {} axes but dim = {dim}", q.dim())));
        }
        Ok(q)
    }

    pub fn points(&self, key: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
        let v = self.text(key)?;
        let pts = parse_points(&v).map_err(|e| field_error(key, &reason(&e)))?;
        if let Some(p) = pts.iter().find(|p| p.len() != dim) {
            return Err(field_error(key, &format!("point {p:?} does not have {dim} coordinates")));
        }
        Ok(pts)
    }
}

pub fn field_error(key: &str, msg: &str) -> Error {
    Error::precondition(format!("field `{key}`: {msg}"))
}

/// Message of `e` without the precondition prefix, for nesting under a field.
pub fn reason(e: &Error) -> String {
    match e {
        Error::Precondition(m) => m.clone(),
        other => other.to_string(),
    }
}

/// `2pi,4pi,6pi` style lists.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    let items: Vec<&str> = text.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(Error::precondition(format!("empty entry in list `{text}`")));
    }
    items.into_iter().map(parse_number).collect()
}

/// Points separated by `;`, coordinates by `,`.
pub fn parse_points(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';').map(parse_list).collect()
}

/// `[lo,hi]` per axis, axes joined by `x`: `[-pi/2,pi/2]x[0,1]`.
pub fn parse_cube(text: &str) -> Result<Cube> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut rest = text.trim();
    loop {
        let body = rest
            .strip_prefix('[')
            .and_then(|r| r.split_once(']'))
            .ok_or_else(|| Error::precondition(format!("expected `[lo,hi]` in `{text}`")))?;
        let bounds = parse_list(body.0)?;
        if bounds.len() != 2 {
            return Err(Error::precondition(format!("interval `[{}]` needs two bounds", body.0)));
        }
        lo.push(bounds[0]);
        hi.push(bounds[1]);
        rest = body.1.trim();
        if rest.is_empty() {
            break;
        }
        rest = rest
            .strip_prefix('x')
            .ok_or_else(|| Error::precondition(format!("expected `x` between intervals in `{text}`")))?
            .trim();
    }
    Cube::from_bounds(&lo, &hi)
}
