//! CSV and JSON exchange formats for sampled fields.
//!
//! CSV layout: an optional `# grid inner=.. outer=.. n_s=.. n_t=.. orientation=..`
//! header line, then columns `j,k,u,v,x,y,re,im` (plus `band` for extended
//! fields). `x,y` may be omitted on input. Floats are written in shortest
//! round-trip form so export followed by import is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Annulus, LogPolarGrid, MappingField, Orientation};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridHeader {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub n_s: usize,
    pub n_t: usize,
}

impl GridHeader {
    pub fn of(grid: &LogPolarGrid) -> Self {
        Self {
            inner_radius: grid.annulus().inner(),
            outer_radius: grid.annulus().outer(),
            n_s: grid.n_s(),
            n_t: grid.n_t(),
        }
    }

    pub fn to_grid(&self) -> Result<LogPolarGrid> {
        LogPolarGrid::new(Annulus::new(self.inner_radius, self.outer_radius)?, self.n_s, self.n_t)
    }
}

#[derive(Serialize, Deserialize)]
struct FieldDocument {
    grid: GridHeader,
    orientation: Orientation,
    values: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bands: Option<Vec<String>>,
}

fn orientation_tag(o: Orientation) -> &'static str {
    match o {
        Orientation::SensePreserving => "sense-preserving",
        Orientation::SenseReversing => "sense-reversing",
    }
}

/// Renders a field as CSV text. `bands`, when given, adds a trailing label column.
pub fn field_to_csv(field: &MappingField, bands: Option<&[String]>) -> String {
    let g = field.grid();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# grid inner={} outer={} n_s={} n_t={} orientation={}",
        g.annulus().inner(),
        g.annulus().outer(),
        g.n_s(),
        g.n_t(),
        orientation_tag(field.orientation())
    );
    out.push_str("j,k,u,v,x,y,re,im");
    if bands.is_some() {
        out.push_str(",band");
    }
    out.push('\n');
    for j in 0..g.n_s() {
        for k in 0..g.n_t() {
            let i = g.index(j, k);
            let z = g.z(j, k);
            let w = field.values()[i];
            let _ = write!(out, "{j},{k},{},{},{},{},{},{}", g.u(j), g.v(k), z.re, z.im, w.re, w.im);
            if let Some(b) = bands {
                let _ = write!(out, ",{}", b[i]);
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_field_csv(path: &Path, field: &MappingField, bands: Option<&[String]>) -> Result<()> {
    std::fs::write(path, field_to_csv(field, bands)).map_err(|source| Error::Io { op: "field_io::write_field_csv", source })
}

fn parse_header(line: &str) -> Result<(GridHeader, Orientation)> {
    const OP: &str = "field_io::read_field_csv";
    let mut inner = None;
    let mut outer = None;
    let mut n_s = None;
    let mut n_t = None;
    let mut orientation = Orientation::SensePreserving;
    for tok in line.trim_start_matches('#').split_whitespace().skip(1) {
        let (key, val) = tok.split_once('=').ok_or_else(|| Error::parse(OP, format!("bad header token {tok}")))?;
        let num = |v: &str| v.parse::<f64>().map_err(|e| Error::parse(OP, format!("{key}: {e}")));
        let int = |v: &str| v.parse::<usize>().map_err(|e| Error::parse(OP, format!("{key}: {e}")));
        match key {
            "inner" => inner = Some(num(val)?),
            "outer" => outer = Some(num(val)?),
            "n_s" => n_s = Some(int(val)?),
            "n_t" => n_t = Some(int(val)?),
            "orientation" => {
                orientation = match val {
                    "sense-reversing" => Orientation::SenseReversing,
                    _ => Orientation::SensePreserving,
                }
            }
            _ => {}
        }
    }
    match (inner, outer, n_s, n_t) {
        (Some(inner_radius), Some(outer_radius), Some(n_s), Some(n_t)) => {
            Ok((GridHeader { inner_radius, outer_radius, n_s, n_t }, orientation))
        }
        _ => Err(Error::parse(OP, "incomplete grid header")),
    }
}

/// Parses CSV text. Returns the field and the band labels if a `band` column exists.
/// Without a header line the grid is inferred from the `j,k,u,v` columns.
pub fn field_from_csv(text: &str) -> Result<(MappingField, Option<Vec<String>>)> {
    const OP: &str = "field_io::read_field_csv";
    let (header, body) = match text.lines().next() {
        Some(first) if first.starts_with('#') => {
            let rest = text.split_once('\n').map(|(_, r)| r).unwrap_or("");
            (Some(parse_header(first)?), rest)
        }
        _ => (None, text),
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = reader.headers().map_err(|e| Error::parse(OP, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (cj, ck, cu, cre, cim) = match (col("j"), col("k"), col("u"), col("re"), col("im")) {
        (Some(a), Some(b), Some(c), Some(d), Some(e)) => (a, b, c, d, e),
        _ => return Err(Error::parse(OP, "missing one of the columns j,k,u,re,im")),
    };
    let cband = col("band");
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::parse(OP, e.to_string()))?;
        let get = |i: usize| rec.get(i).ok_or_else(|| Error::parse(OP, "short record"));
        let j: usize = get(cj)?.parse().map_err(|e| Error::parse(OP, format!("j: {e}")))?;
        let k: usize = get(ck)?.parse().map_err(|e| Error::parse(OP, format!("k: {e}")))?;
        let u: f64 = get(cu)?.parse().map_err(|e| Error::parse(OP, format!("u: {e}")))?;
        let re: f64 = get(cre)?.parse().map_err(|e| Error::parse(OP, format!("re: {e}")))?;
        let im: f64 = get(cim)?.parse().map_err(|e| Error::parse(OP, format!("im: {e}")))?;
        let band = match cband {
            Some(c) => Some(get(c)?.to_string()),
            None => None,
        };
        rows.push((j, k, u, Complex64::new(re, im), band));
    }
    let (grid_header, orientation) = match header {
        Some(h) => h,
        None => {
            let n_s = rows.iter().map(|r| r.0).max().ok_or_else(|| Error::parse(OP, "empty field"))? + 1;
            let n_t = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
            let u0 = rows.iter().find(|r| r.0 == 0).map(|r| r.2).ok_or_else(|| Error::parse(OP, "no row j=0"))?;
            let u1 = rows.iter().find(|r| r.0 == n_s - 1).map(|r| r.2).unwrap_or(u0);
            (
                GridHeader { inner_radius: u0.exp(), outer_radius: u1.exp(), n_s, n_t },
                Orientation::SensePreserving,
            )
        }
    };
    let grid = grid_header.to_grid()?;
    if rows.len() != grid.len() {
        return Err(Error::parse(OP, format!("expected {} rows, found {}", grid.len(), rows.len())));
    }
    let mut values = vec![Complex64::new(f64::NAN, f64::NAN); grid.len()];
    let mut bands = cband.map(|_| vec![String::new(); grid.len()]);
    for (j, k, _, w, band) in rows {
        if j >= grid.n_s() || k >= grid.n_t() {
            return Err(Error::parse(OP, format!("node ({j},{k}) outside grid")));
        }
        let i = grid.index(j, k);
        values[i] = w;
        if let (Some(bs), Some(b)) = (bands.as_mut(), band) {
            bs[i] = b;
        }
    }
    let field = MappingField::new(grid, values)?.with_orientation(orientation);
    Ok((field, bands))
}

pub fn read_field_csv(path: &Path) -> Result<(MappingField, Option<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { op: "field_io::read_field_csv", source })?;
    field_from_csv(&text)
}

pub fn field_to_json(field: &MappingField, bands: Option<&[String]>) -> String {
    let doc = FieldDocument {
        grid: GridHeader::of(field.grid()),
        orientation: field.orientation(),
        values: field.values().iter().map(|w| [w.re, w.im]).collect(),
        bands: bands.map(|b| b.to_vec()),
    };
    serde_json::to_string(&doc).expect("field document serializes")
}

pub fn field_from_json(text: &str) -> Result<(MappingField, Option<Vec<String>>)> {
    let doc: FieldDocument =
        serde_json::from_str(text).map_err(|e| Error::parse("field_io::read_field_json", e.to_string()))?;
    let grid = doc.grid.to_grid()?;
    let values = doc.values.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    Ok((MappingField::new(grid, values)?.with_orientation(doc.orientation), doc.bands))
}

pub fn write_field_json(path: &Path, field: &MappingField, bands: Option<&[String]>) -> Result<()> {
    std::fs::write(path, field_to_json(field, bands)).map_err(|source| Error::Io { op: "field_io::write_field_json", source })
}

pub fn read_field_json(path: &Path) -> Result<(MappingField, Option<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { op: "field_io::read_field_json", source })?;
    field_from_json(&text)
}

/// Reads a field, choosing the format from the file extension (`.json` or CSV otherwise).
pub fn read_field(path: &Path) -> Result<MappingField> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let (field, _) = if is_json { read_field_json(path)? } else { read_field_csv(path)? };
    Ok(field)
}

/// Per-node CSV of named complex columns, e.g. a Hopf field dump.
pub fn node_columns_csv(grid: &LogPolarGrid, names: &[&str], columns: &[&[Complex64]]) -> String {
    let mut out = String::from("j,k,u,v,x,y");
    for n in names {
        let _ = write!(out, ",{n}_re,{n}_im");
    }
    out.push('\n');
    for j in 0..grid.n_s() {
        for k in 0..grid.n_t() {
            let z = grid.z(j, k);
            let _ = write!(out, "{j},{k},{},{},{},{}", grid.u(j), grid.v(k), z.re, z.im);
            for c in columns {
                let w = c[grid.index(j, k)];
                let _ = write!(out, ",{},{}", w.re, w.im);
            }
            out.push('\n');
        }
    }
    out
}
