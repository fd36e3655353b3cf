//! Text formats for conductivity fields and temperature fields.
//!
//! Both are line oriented: `#` header lines, then one row of whitespace
//! separated values per line. Values are written in shortest round-trip
//! decimal form, so reading a written file gives back identical bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{ConductivityField, FieldMeta, GridSpec, Layout, TemperatureField};

const FIELD_MAGIC: &str = "# sdm-field v1";
const TEMPS_MAGIC: &str = "# sdm-temps v1";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn write_rows(out: &mut String, n: usize, values: &[f64]) {
    for row in values.chunks(n) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
}

pub fn format_field(field: &ConductivityField) -> String {
    let meta = field.meta();
    let mut s = String::new();
    writeln!(s, "{FIELD_MAGIC}").unwrap();
    writeln!(s, "# ncells {}", field.n_cells()).unwrap();
    writeln!(s, "# kmin {} kmax {}", meta.k_min, meta.k_max).unwrap();
    if let Some(seed) = meta.seed {
        writeln!(s, "# seed {seed}").unwrap();
    }
    write_rows(&mut s, field.n_cells(), field.values());
    s
}

/// Header lines (with 1-based line numbers) and data lines, blank lines dropped.
fn split_lines(text: &str) -> (Vec<(usize, &str)>, Vec<(usize, &str)>) {
    let mut header = Vec::new();
    let mut data = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') && data.is_empty() {
            header.push((k + 1, line));
        } else {
            data.push((k + 1, line));
        }
    }
    (header, data)
}

fn header_value<'a>(header: &[(usize, &'a str)], key: &str) -> Option<(usize, Vec<&'a str>)> {
    header.iter().find_map(|&(ln, l)| {
        let words: Vec<&str> = l.trim_start_matches('#').split_whitespace().collect();
        (words.first() == Some(&key)).then(|| (ln, words[1..].to_vec()))
    })
}

fn parse_num<T: std::str::FromStr>(ln: usize, what: &str, s: Option<&&str>) -> Result<T> {
    let s = s.ok_or_else(|| parse_err(ln, format!("missing {what}")))?;
    s.parse().map_err(|_| parse_err(ln, format!("bad {what} '{s}'")))
}

fn parse_rows(data: &[(usize, &str)], rows: usize, cols: usize, first_line: usize) -> Result<Vec<f64>> {
    if data.len() != rows {
        let ln = data.get(rows).map_or(first_line, |d| d.0);
        return Err(parse_err(ln, format!("expected {rows} data rows, found {}", data.len())));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for &(ln, line) in data {
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| parse_err(ln, format!("bad value '{tok}'")))?);
        }
        if values.len() - before != cols {
            return Err(parse_err(ln, format!("expected {cols} values, found {}", values.len() - before)));
        }
    }
    Ok(values)
}

pub fn parse_field(text: &str) -> Result<ConductivityField> {
    let (header, data) = split_lines(text);
    if header.first().map(|h| h.1) != Some(FIELD_MAGIC) {
        return Err(parse_err(1, format!("missing '{FIELD_MAGIC}' header")));
    }
    let (ln, w) = header_value(&header, "ncells").ok_or_else(|| parse_err(1, "missing ncells header"))?;
    let n: usize = parse_num(ln, "ncells", w.first())?;
    if n == 0 {
        return Err(parse_err(ln, "ncells must be positive"));
    }
    let (ln, w) = header_value(&header, "kmin").ok_or_else(|| parse_err(1, "missing kmin/kmax header"))?;
    let k_min: f64 = parse_num(ln, "kmin", w.first())?;
    if w.get(1) != Some(&"kmax") {
        return Err(parse_err(ln, "expected 'kmax' after kmin value"));
    }
    let k_max: f64 = parse_num(ln, "kmax", w.get(2))?;
    let seed = match header_value(&header, "seed") {
        Some((ln, w)) => Some(parse_num::<u64>(ln, "seed", w.first())?),
        None => None,
    };
    let last_header = header.last().map_or(1, |h| h.0);
    let values = parse_rows(&data, n, n, last_header)?;
    let field = ConductivityField::new(n, values, seed)?;
    Ok(field.with_meta(FieldMeta { seed, k_min, k_max }))
}

pub fn write_field(path: &Path, field: &ConductivityField) -> Result<()> {
    fs::write(path, format_field(field))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ConductivityField> {
    parse_field(&fs::read_to_string(path)?)
}

pub fn format_temps(field: &TemperatureField) -> String {
    let g = field.grid();
    let mut s = String::new();
    writeln!(s, "{TEMPS_MAGIC}").unwrap();
    writeln!(s, "# layout {}", g.layout().as_str()).unwrap();
    writeln!(s, "# ngrid {}", g.n_grid()).unwrap();
    write_rows(&mut s, g.nodes_per_side(), field.nodes());
    s
}

pub fn parse_temps(text: &str) -> Result<TemperatureField> {
    let (header, data) = split_lines(text);
    if header.first().map(|h| h.1) != Some(TEMPS_MAGIC) {
        return Err(parse_err(1, format!("missing '{TEMPS_MAGIC}' header")));
    }
    let (ln, w) = header_value(&header, "layout").ok_or_else(|| parse_err(1, "missing layout header"))?;
    let layout: Layout = w.first().ok_or_else(|| parse_err(ln, "missing layout"))?.parse().map_err(|_| parse_err(ln, "bad layout"))?;
    let (ln, w) = header_value(&header, "ngrid").ok_or_else(|| parse_err(1, "missing ngrid header"))?;
    let n_grid: usize = parse_num(ln, "ngrid", w.first())?;
    let grid = GridSpec::new(layout, n_grid).map_err(|e| parse_err(ln, e.to_string()))?;
    let n = grid.nodes_per_side();
    let values = parse_rows(&data, n, n, header.last().map_or(1, |h| h.0))?;
    TemperatureField::new(grid, values)
}

pub fn write_temps(path: &Path, field: &TemperatureField) -> Result<()> {
    fs::write(path, format_temps(field))?;
    Ok(())
}

pub fn read_temps(path: &Path) -> Result<TemperatureField> {
    parse_temps(&fs::read_to_string(path)?)
}
