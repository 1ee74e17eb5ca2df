//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! nonlinearity = cubic
//! alpha = 1e-2
//! y0 = -1
//! y_a = pyramid_lower
//! y_b = inf
//! region = whole_domain
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use vdoc_core::{ConstraintRegion, Field, Nonlinearity, PdasConfig, ProblemSpec};

use crate::error::CliError;

pub const REQUIRED: [&str; 3] = ["nonlinearity", "alpha", "y0"];

const KNOWN: [&str; 22] = [
    "nonlinearity",
    "coefficients",
    "growth_r",
    "growth_m",
    "alpha",
    "y0",
    "y_a",
    "y_b",
    "u_a",
    "u_b",
    "region",
    "quadrature_order",
    "c_pdas",
    "tol_kkt",
    "max_outer",
    "max_newton_inner",
    "c_q",
    "level",
    "levels",
    "reference_level",
    "alphas",
    "output_directory",
];

/// Largest mesh level accepted anywhere (`n = 4096`).
pub const MAX_LEVEL: u32 = 12;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub pdas: PdasConfig,
    pub c_q: Option<f64>,
    pub level: Option<u32>,
    pub levels: Option<(u32, u32)>,
    pub reference_level: Option<u32>,
    pub alphas: Option<Vec<f64>>,
    pub output_directory: Option<PathBuf>,
    /// Raw file contents, hashed into the run manifest.
    pub source: String,
}

struct Entry {
    line: usize,
    value: String,
}

struct Parser<'a> {
    path: &'a Path,
    entries: BTreeMap<String, Entry>,
}

impl<'a> Parser<'a> {
    fn err(&self, line: usize, message: impl Into<String>) -> CliError {
        CliError::Config { path: self.path.to_path_buf(), line, message: message.into() }
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn number(&self, key: &str) -> Result<Option<f64>, CliError> {
        let Some(e) = self.get(key) else { return Ok(None) };
        parse_number(&e.value).map(Some).map_err(|m| self.err(e.line, format!("{key}: {m}")))
    }

    fn integer<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        let Some(e) = self.get(key) else { return Ok(None) };
        e.value
            .parse::<T>()
            .map(Some)
            .map_err(|_| self.err(e.line, format!("{key}: expected a non-negative integer, got `{}`", e.value)))
    }

    fn field(&self, key: &str) -> Result<Option<Field>, CliError> {
        let Some(e) = self.get(key) else { return Ok(None) };
        parse_field(&e.value).map(Some).map_err(|m| self.err(e.line, format!("{key}: {m}")))
    }
}

pub fn parse_number(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(v),
        _ => Err(format!("malformed number `{s}`")),
    }
}

/// A constant (including `inf`/`-inf`) or a built-in field name.
pub fn parse_field(s: &str) -> Result<Field, String> {
    if let Ok(v) = parse_number(s) {
        return Ok(Field::Constant(v));
    }
    Field::builtin(s).ok_or_else(|| {
        format!("`{s}` is neither a number nor a built-in field; built-ins are: {}", Field::BUILTINS.join(", "))
    })
}

/// `A..B` (inclusive) or a single level.
pub fn parse_level_range(s: &str) -> Result<(u32, u32), String> {
    let parse = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("malformed level `{t}`"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    check_level(a)?;
    check_level(b)?;
    if a > b {
        return Err(format!("empty level range {a}..{b}"));
    }
    Ok((a, b))
}

pub fn check_level(l: u32) -> Result<u32, String> {
    if (1..=MAX_LEVEL).contains(&l) {
        Ok(l)
    } else {
        Err(format!("level {l} out of range 1..={MAX_LEVEL}"))
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let values: Vec<f64> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(parse_number)
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err("empty list".into());
    }
    Ok(values)
}

fn parse_region(s: &str) -> Result<ConstraintRegion, String> {
    let mut words = s.split_whitespace();
    let kind = words.next().unwrap_or("");
    let rest: Vec<&str> = words.collect();
    let nums = |t: &str| parse_list(t);
    match kind {
        "empty" | "none" if rest.is_empty() => Ok(ConstraintRegion::Empty),
        "whole_domain" if rest.is_empty() => Ok(ConstraintRegion::WholeDomain),
        "rectangle" => {
            let v = nums(&rest.join(" "))?;
            if v.len() != 4 {
                return Err(format!("rectangle needs x0 x1 y0 y1, got {} numbers", v.len()));
            }
            ConstraintRegion::rectangle(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
        }
        "polygon" => {
            let joined = rest.join(" ");
            let points = joined
                .split(';')
                .filter(|p| !p.trim().is_empty())
                .map(|p| {
                    let v = nums(p)?;
                    if v.len() == 2 {
                        Ok([v[0], v[1]])
                    } else {
                        Err(format!("polygon vertex `{}` needs two coordinates", p.trim()))
                    }
                })
                .collect::<Result<Vec<_>, String>>()?;
            ConstraintRegion::polygon(points).map_err(|e| e.to_string())
        }
        _ => Err(format!(
            "unknown region `{s}`; expected empty, whole_domain, `rectangle x0 x1 y0 y1` or `polygon x y; x y; ...`"
        )),
    }
}

fn parse_nonlinearity(p: &Parser<'_>) -> Result<Nonlinearity, CliError> {
    let e = p.get("nonlinearity").expect("checked as required");
    let phi = match e.value.as_str() {
        "linear" => Nonlinearity::Linear,
        "cubic" => Nonlinearity::Cubic,
        "linear_cubic" => Nonlinearity::LinearCubic,
        "polynomial" => {
            let coeffs = match p.get("coefficients") {
                Some(c) => parse_list(&c.value).map_err(|m| p.err(c.line, format!("coefficients: {m}")))?,
                None => return Err(p.err(e.line, "polynomial nonlinearity needs `coefficients`")),
            };
            let r = p.number("growth_r")?.ok_or_else(|| p.err(e.line, "polynomial nonlinearity needs `growth_r`"))?;
            let m = p.number("growth_m")?.ok_or_else(|| p.err(e.line, "polynomial nonlinearity needs `growth_m`"))?;
            Nonlinearity::polynomial(coeffs, r, m).map_err(|err| p.err(e.line, err.to_string()))?
        }
        other => {
            return Err(p.err(
                e.line,
                format!("unknown nonlinearity `{other}`; available: {}", Nonlinearity::CATALOG.join(", ")),
            ))
        }
    };
    if !matches!(phi, Nonlinearity::Polynomial { .. }) {
        for key in ["coefficients", "growth_r", "growth_m"] {
            if let Some(x) = p.get(key) {
                return Err(p.err(x.line, format!("`{key}` only applies to the polynomial nonlinearity")));
            }
        }
    }
    Ok(phi)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| CliError::ConfigFile { path: path.to_path_buf(), message: e.to_string() })?;
    parse_config_str(&source, path)
}

pub fn parse_config_str(source: &str, path: &Path) -> Result<RunConfig, CliError> {
    let mut p = Parser { path, entries: BTreeMap::new() };
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let Some((key, value)) = text.split_once('=') else {
            return Err(p.err(line, format!("expected `key = value`, got `{text}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN.contains(&key) {
            return Err(p.err(line, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(p.err(line, format!("`{key}` has no value")));
        }
        if let Some(prev) = p.entries.get(key) {
            return Err(p.err(line, format!("`{key}` already set on line {}", prev.line)));
        }
        p.entries.insert(key.to_string(), Entry { line, value: value.to_string() });
    }
    let last_line = source.lines().count().max(1);
    for key in REQUIRED {
        if p.get(key).is_none() {
            return Err(p.err(last_line, format!("missing required key `{key}`")));
        }
    }

    let phi = parse_nonlinearity(&p)?;
    let alpha_line = p.get("alpha").unwrap().line;
    let alpha = p.number("alpha")?.unwrap();
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(p.err(alpha_line, format!("alpha must be positive and finite, got {alpha}")));
    }
    let y0 = p.field("y0")?.unwrap();
    let mut spec = ProblemSpec::new(phi, alpha, y0);

    let y_a = p.field("y_a")?;
    let y_b = p.field("y_b")?;
    let region = match p.get("region") {
        Some(e) => Some(parse_region(&e.value).map_err(|m| p.err(e.line, format!("region: {m}")))?),
        None => None,
    };
    if y_a.is_some() || y_b.is_some() {
        let Some(region) = region else {
            let line = p.get("y_a").or(p.get("y_b")).unwrap().line;
            return Err(p.err(line, "state bounds need a `region` (for example `region = whole_domain`)"));
        };
        spec = spec
            .with_state_bounds(
                y_a.unwrap_or(Field::Constant(f64::NEG_INFINITY)),
                y_b.unwrap_or(Field::Constant(f64::INFINITY)),
            )
            .with_region(region);
    } else if let Some(region) = region {
        spec = spec.with_region(region);
    }
    let u_a = p.number("u_a")?.unwrap_or(f64::NEG_INFINITY);
    let u_b = p.number("u_b")?.unwrap_or(f64::INFINITY);
    spec = spec.with_control_bounds(u_a, u_b);
    if let Some(q) = p.integer::<u32>("quadrature_order")? {
        spec = spec.with_quadrature_order(q);
    }
    if let Err(e) = spec.validate() {
        return Err(p.err(last_line, e.to_string()));
    }

    let mut pdas = PdasConfig::default();
    if let Some(c) = p.number("c_pdas")? {
        pdas.c_pdas = Some(c);
    }
    if let Some(t) = p.number("tol_kkt")? {
        pdas.tol_kkt = t;
    }
    if let Some(m) = p.integer("max_outer")? {
        pdas.max_outer = m;
    }
    if let Some(m) = p.integer("max_newton_inner")? {
        pdas.max_newton_inner = m;
    }
    if let Err(e) = pdas.validate() {
        return Err(p.err(last_line, e.to_string()));
    }

    let c_q = p.number("c_q")?;
    if let (Some(c), Some(e)) = (c_q, p.get("c_q")) {
        if !(c > 0.0 && c.is_finite()) {
            return Err(p.err(e.line, format!("c_q must be positive, got {c}")));
        }
    }
    let level = match p.get("level") {
        Some(e) => {
            let l = p.integer::<u32>("level")?.unwrap();
            Some(check_level(l).map_err(|m| p.err(e.line, m))?)
        }
        None => None,
    };
    let levels = match p.get("levels") {
        Some(e) => Some(parse_level_range(&e.value).map_err(|m| p.err(e.line, format!("levels: {m}")))?),
        None => None,
    };
    let reference_level = match p.get("reference_level") {
        Some(e) => {
            let l = p.integer::<u32>("reference_level")?.unwrap();
            Some(check_level(l).map_err(|m| p.err(e.line, m))?)
        }
        None => None,
    };
    let alphas = match p.get("alphas") {
        Some(e) => Some(parse_alphas(&e.value).map_err(|m| p.err(e.line, format!("alphas: {m}")))?),
        None => None,
    };
    let output_directory = p.get("output_directory").map(|e| PathBuf::from(&e.value));

    Ok(RunConfig {
        problem: spec,
        pdas,
        c_q,
        level,
        levels,
        reference_level,
        alphas,
        output_directory,
        source: source.to_string(),
    })
}

pub fn parse_alphas(s: &str) -> Result<Vec<f64>, String> {
    let v = parse_list(s)?;
    if let Some(bad) = v.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(format!("alpha must be positive and finite, got {bad}"));
    }
    Ok(v)
}
