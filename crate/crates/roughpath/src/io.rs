//! CSV and JSON serialization of sampled paths.
//!
//! All numbers are written as decimals with 17 significant digits, which
//! round-trips every finite f64 bit-exactly. CSV carries one row per grid
//! time: the time, then level-1 coordinates, then row-major level-2
//! coordinates where applicable. The JSON envelope adds dim/depth
//! metadata.

use crate::error::{invalid, Error, Result};
use crate::grid::GridPath;
use crate::lift::BracketGrid;
use crate::sig::{RoughPathGrid, SignaturePath};
use crate::tensor::TruncatedTensor;

/// 17-significant-digit decimal, bit-exact on re-parse.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}'")))
}

pub fn grid_path_to_csv(path: &GridPath) -> String {
    let d = path.dim();
    let mut out = String::from("t");
    for c in 0..d {
        out.push_str(&format!(",x{c}"));
    }
    out.push('\n');
    for i in 0..path.len() {
        out.push_str(&fmt_f64(path.times()[i]));
        for v in path.value(i) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn grid_path_from_csv(text: &str) -> Result<GridPath> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
    let cols = header.split(',').count();
    if cols < 2 {
        return Err(Error::Parse("grid path csv needs a time and a value column".into()));
    }
    let d = cols - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in lines {
        let mut fields = line.split(',');
        times.push(parse_f64(fields.next().ok_or_else(|| Error::Parse("missing time".into()))?)?);
        let mut count = 0;
        for f in fields {
            values.push(parse_f64(f)?);
            count += 1;
        }
        if count != d {
            return Err(Error::Parse(format!("expected {d} value columns, got {count}")));
        }
    }
    GridPath::new(times, d, values)
}

pub fn rough_path_to_csv(path: &RoughPathGrid) -> String {
    let d = path.dim();
    let mut out = String::from("t");
    for c in 0..d {
        out.push_str(&format!(",a{c}"));
    }
    for r in 0..d {
        for c in 0..d {
            out.push_str(&format!(",b{r}{c}"));
        }
    }
    out.push('\n');
    for i in 0..path.len() {
        out.push_str(&fmt_f64(path.times()[i]));
        let e = path.element(i);
        for v in e.level(1).iter().chain(e.level(2).iter()) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn rough_path_from_csv(text: &str) -> Result<RoughPathGrid> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
    let cols = header.split(',').count();
    // cols = 1 + d + d^2
    let d = (0..=16)
        .find(|d| 1 + d + d * d == cols)
        .ok_or_else(|| Error::Parse(format!("{cols} columns do not fit 1 + d + d^2")))?;
    let mut times = Vec::new();
    let mut elements = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::Parse("ragged csv row".into()));
        }
        times.push(parse_f64(fields[0])?);
        let level1 = fields[1..1 + d].iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?;
        let level2 =
            fields[1 + d..].iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?;
        elements.push(TruncatedTensor::from_levels(d, vec![level1, level2])?);
    }
    RoughPathGrid::new(times, elements)
}

pub fn bracket_to_csv(bracket: &BracketGrid) -> String {
    let d = bracket.dim();
    let mut out = String::from("t");
    for r in 0..d {
        for c in 0..d {
            out.push_str(&format!(",q{r}{c}"));
        }
    }
    out.push('\n');
    for i in 0..bracket.len() {
        out.push_str(&fmt_f64(bracket.times()[i]));
        for v in bracket.value(i) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// One row per time: t, then each stored level flattened in order.
pub fn signature_path_to_csv(path: &SignaturePath) -> String {
    let (d, n) = (path.dim(), path.depth());
    let mut out = String::from("t");
    for k in 1..=n {
        for idx in 0..d.pow(k as u32) {
            out.push_str(&format!(",l{k}_{idx}"));
        }
    }
    out.push('\n');
    for i in 0..path.len() {
        out.push_str(&fmt_f64(path.times()[i]));
        let e = path.element(i);
        for k in 1..=n {
            for v in e.level(k) {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
        }
        out.push('\n');
    }
    out
}

fn json_array(values: impl Iterator<Item = f64>) -> String {
    let inner: Vec<String> = values.map(fmt_f64).collect();
    format!("[{}]", inner.join(","))
}

pub fn grid_path_to_json(path: &GridPath) -> String {
    let rows: Vec<String> =
        (0..path.len()).map(|i| json_array(path.value(i).iter().copied())).collect();
    format!(
        "{{\"kind\":\"grid_path\",\"dim\":{},\"times\":{},\"values\":[{}]}}",
        path.dim(),
        json_array(path.times().iter().copied()),
        rows.join(",")
    )
}

pub fn rough_path_to_json(path: &RoughPathGrid) -> String {
    let l1: Vec<String> =
        (0..path.len()).map(|i| json_array(path.element(i).level(1).iter().copied())).collect();
    let l2: Vec<String> =
        (0..path.len()).map(|i| json_array(path.element(i).level(2).iter().copied())).collect();
    format!(
        "{{\"kind\":\"rough_path\",\"dim\":{},\"depth\":2,\"times\":{},\"level1\":[{}],\"level2\":[{}]}}",
        path.dim(),
        json_array(path.times().iter().copied()),
        l1.join(","),
        l2.join(",")
    )
}

fn json_f64_array(value: &serde_json::Value, what: &str) -> Result<Vec<f64>> {
    value
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{what} must be an array")))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| Error::Parse(format!("{what} holds a non-number"))))
        .collect()
}

pub fn grid_path_from_json(text: &str) -> Result<GridPath> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if v["kind"] != "grid_path" {
        return Err(Error::Parse("expected kind = grid_path".into()));
    }
    let dim = v["dim"].as_u64().ok_or_else(|| Error::Parse("missing dim".into()))? as usize;
    let times = json_f64_array(&v["times"], "times")?;
    let rows = v["values"].as_array().ok_or_else(|| Error::Parse("missing values".into()))?;
    let mut values = Vec::with_capacity(rows.len() * dim);
    for row in rows {
        values.extend(json_f64_array(row, "value row")?);
    }
    GridPath::new(times, dim, values)
}

pub fn rough_path_from_json(text: &str) -> Result<RoughPathGrid> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if v["kind"] != "rough_path" {
        return Err(Error::Parse("expected kind = rough_path".into()));
    }
    let dim = v["dim"].as_u64().ok_or_else(|| Error::Parse("missing dim".into()))? as usize;
    let times = json_f64_array(&v["times"], "times")?;
    let l1 = v["level1"].as_array().ok_or_else(|| Error::Parse("missing level1".into()))?;
    let l2 = v["level2"].as_array().ok_or_else(|| Error::Parse("missing level2".into()))?;
    if l1.len() != times.len() || l2.len() != times.len() {
        return Err(Error::Parse("level arrays must match the time grid".into()));
    }
    let mut elements = Vec::with_capacity(times.len());
    for (a, b) in l1.iter().zip(l2.iter()) {
        elements.push(TruncatedTensor::from_levels(
            dim,
            vec![json_f64_array(a, "level1 row")?, json_f64_array(b, "level2 row")?],
        )?);
    }
    RoughPathGrid::new(times, elements)
}

/// Reads a grid path from CSV or the JSON envelope, by file extension.
pub fn read_grid_path(path: &std::path::Path) -> Result<GridPath> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => grid_path_from_json(&text),
        Some("csv") => grid_path_from_csv(&text),
        _ => Err(invalid("expected a .csv or .json path file")),
    }
}

/// Reads a rough path grid from CSV or the JSON envelope, by extension.
pub fn read_rough_path(path: &std::path::Path) -> Result<RoughPathGrid> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => rough_path_from_json(&text),
        Some("csv") => rough_path_from_csv(&text),
        _ => Err(invalid("expected a .csv or .json path file")),
    }
}
