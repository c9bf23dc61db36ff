//! Text formats: registry CSV, labelled matrix CSV, reachability CSV, SSIM
//! listings and sectioned expert response files.
//!
//! Every parser takes a `source` name that is echoed in error messages with
//! the 1-based line number of the offending row.

use std::fmt::Write as _;

use csv::{ReaderBuilder, StringRecord};

use crate::error::{Error, Result};
use crate::model::{
    Barrier, BarrierRegistry, InfluenceMatrix, MatrixRole, Reach, ReachabilityMatrix,
    RelationSymbol, SsimMatrix,
};
use crate::survey::ExpertResponse;

/// How decimal scores are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// Shortest representation that parses back to the identical value.
    Exact,
    /// Fixed number of places, rounded half away from zero.
    Fixed(usize),
}

/// Rounds half away from zero to `places` decimals and formats the result.
pub fn format_fixed(value: f64, places: usize) -> String {
    let scale = 10f64.powi(places as i32);
    let scaled = (value.abs() * scale).round();
    if scaled == 0.0 {
        return format!("{:.*}", places, 0.0);
    }
    let sign = if value < 0.0 { "-" } else { "" };
    format!("{sign}{:.*}", places, scaled / scale)
}

pub fn format_score(value: f64, precision: Precision) -> String {
    match precision {
        Precision::Exact => format!("{value}"),
        Precision::Fixed(places) => format_fixed(value, places),
    }
}

struct Row {
    line: usize,
    fields: StringRecord,
}

fn read_rows(text: &str, source: &str, line_offset: usize) -> Result<Vec<Row>> {
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(source, line + line_offset, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize) + line_offset;
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push(Row {
            line,
            fields: record,
        });
    }
    Ok(rows)
}

pub(crate) fn write_csv_row(out: &mut String, fields: impl IntoIterator<Item = impl AsRef<str>>) {
    let mut first = true;
    for field in fields {
        if !first {
            out.push(',');
        }
        first = false;
        let f = field.as_ref();
        if f.contains([',', '"', '\n']) {
            let _ = write!(out, "\"{}\"", f.replace('"', "\"\""));
        } else {
            out.push_str(f);
        }
    }
    out.push('\n');
}

/// Parses a registry file with header `index,abbr,name`.
pub fn parse_registry(text: &str, source: &str) -> Result<BarrierRegistry> {
    let rows = read_rows(text, source, 0)?;
    let (header, body) = rows
        .split_first()
        .ok_or_else(|| Error::parse(source, 1, "empty registry file"))?;
    let names: Vec<&str> = header.fields.iter().collect();
    if names != ["index", "abbr", "name"] {
        return Err(Error::parse(
            source,
            header.line,
            format!("expected header `index,abbr,name`, found `{}`", names.join(",")),
        ));
    }
    let mut entries = Vec::with_capacity(body.len());
    for row in body {
        if row.fields.len() != 3 {
            return Err(Error::parse(
                source,
                row.line,
                format!("expected 3 fields, found {}", row.fields.len()),
            ));
        }
        let index = row.fields[0].parse::<usize>().map_err(|_| {
            Error::parse(source, row.line, format!("bad index `{}`", &row.fields[0]))
        })?;
        entries.push(Barrier {
            index,
            abbr: row.fields[1].to_owned(),
            name: row.fields[2].to_owned(),
        });
    }
    BarrierRegistry::new(entries)
}

pub fn registry_to_csv(registry: &BarrierRegistry) -> String {
    let mut out = String::from("index,abbr,name\n");
    for e in registry.entries() {
        write_csv_row(&mut out, [e.index.to_string(), e.abbr.clone(), e.name.clone()]);
    }
    out
}

/// Checks a header row `<corner>,ABBR1,...,ABBRn` against the registry.
fn check_header(row: &Row, registry: &BarrierRegistry, source: &str) -> Result<()> {
    let labels: Vec<&str> = row.fields.iter().skip(1).collect();
    let expected: Vec<&str> = registry.abbrs().collect();
    if labels != expected {
        return Err(Error::parse(
            source,
            row.line,
            format!(
                "column labels `{}` do not match registry order `{}`",
                labels.join(","),
                expected.join(",")
            ),
        ));
    }
    Ok(())
}

/// Parses labelled square-matrix rows and hands each cell to `cell`.
fn parse_labelled<T>(
    text: &str,
    source: &str,
    line_offset: usize,
    registry: &BarrierRegistry,
    mut cell: impl FnMut(&str) -> Option<T>,
) -> Result<Vec<T>> {
    let n = registry.len();
    let rows = read_rows(text, source, line_offset)?;
    let (header, body) = rows
        .split_first()
        .ok_or_else(|| Error::parse(source, line_offset + 1, "empty matrix"))?;
    check_header(header, registry, source)?;
    if body.len() != n {
        return Err(Error::parse(
            source,
            body.last().map_or(header.line, |r| r.line),
            format!("expected {n} matrix rows, found {}", body.len()),
        ));
    }
    let mut values = Vec::with_capacity(n * n);
    for (r, row) in body.iter().enumerate() {
        let expected = registry.abbr(r + 1);
        if &row.fields[0] != expected {
            return Err(Error::parse(
                source,
                row.line,
                format!("row label `{}` should be `{expected}`", &row.fields[0]),
            ));
        }
        if row.fields.len() != n + 1 {
            return Err(Error::parse(
                source,
                row.line,
                format!("expected {} cells, found {}", n, row.fields.len() - 1),
            ));
        }
        for field in row.fields.iter().skip(1) {
            let v = cell(field)
                .ok_or_else(|| Error::parse(source, row.line, format!("bad cell `{field}`")))?;
            values.push(v);
        }
    }
    Ok(values)
}

fn parse_score(field: &str) -> Option<f64> {
    let valid = !field.is_empty()
        && field
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == '-' || c == '+');
    if valid {
        field.parse::<f64>().ok()
    } else {
        None
    }
}

fn matrix_from_text(
    text: &str,
    source: &str,
    line_offset: usize,
    registry: &BarrierRegistry,
    role: MatrixRole,
) -> Result<InfluenceMatrix> {
    let values = parse_labelled(text, source, line_offset, registry, parse_score)?;
    InfluenceMatrix::new(registry.len(), values, role).map_err(|e| match e {
        Error::Invalid { reason, .. } => Error::parse(source, line_offset + 1, reason),
        other => other,
    })
}

/// Parses a labelled matrix CSV: first row and first column are abbreviations
/// in registry order.
pub fn parse_matrix(
    text: &str,
    source: &str,
    registry: &BarrierRegistry,
    role: MatrixRole,
) -> Result<InfluenceMatrix> {
    matrix_from_text(text, source, 0, registry, role)
}

pub fn matrix_to_csv(
    matrix: &InfluenceMatrix,
    registry: &BarrierRegistry,
    precision: Precision,
) -> String {
    let mut out = String::new();
    write_csv_row(&mut out, std::iter::once("").chain(registry.abbrs()));
    for (r, row) in matrix.rows().enumerate() {
        let cells = row.iter().map(|&v| format_score(v, precision));
        write_csv_row(
            &mut out,
            std::iter::once(registry.abbr(r + 1).to_owned()).chain(cells),
        );
    }
    out
}

/// Parses a reachability CSV with `1`, `1*` and `0` cells.
pub fn parse_reachability(
    text: &str,
    source: &str,
    registry: &BarrierRegistry,
) -> Result<ReachabilityMatrix> {
    let cells = parse_labelled(text, source, 0, registry, Reach::from_literal)?;
    ReachabilityMatrix::new(registry.len(), cells).map_err(|e| match e {
        Error::Invalid { reason, .. } => Error::parse(source, 1, reason),
        other => other,
    })
}

pub fn reachability_to_csv(matrix: &ReachabilityMatrix, registry: &BarrierRegistry) -> String {
    let mut out = String::new();
    write_csv_row(&mut out, std::iter::once("").chain(registry.abbrs()));
    for (r, row) in matrix.to_rows().into_iter().enumerate() {
        write_csv_row(
            &mut out,
            std::iter::once(registry.abbr(r + 1)).chain(row.iter().map(|c| c.literal())),
        );
    }
    out
}

fn parse_judgment_rows(rows: &[Row], source: &str, n: usize) -> Result<SsimMatrix> {
    let mut entries = Vec::with_capacity(rows.len());
    for row in rows {
        if row.fields.len() != 3 {
            return Err(Error::parse(
                source,
                row.line,
                format!("expected `i,j,SYMBOL`, found {} fields", row.fields.len()),
            ));
        }
        let index = |k: usize| {
            row.fields[k].parse::<usize>().map_err(|_| {
                Error::parse(source, row.line, format!("bad index `{}`", &row.fields[k]))
            })
        };
        let (i, j) = (index(0)?, index(1)?);
        if !(1 <= i && i < j && j <= n) {
            return Err(Error::parse(
                source,
                row.line,
                format!("pair ({i}, {j}) is not in the upper triangle of 1..={n}"),
            ));
        }
        let symbol = row.fields[2]
            .parse::<RelationSymbol>()
            .map_err(|e| Error::parse(source, row.line, e.to_string()))?;
        entries.push((i, j, symbol));
    }
    SsimMatrix::from_entries(n, entries).map_err(|e| match e {
        Error::Invalid { reason, .. } => {
            Error::parse(source, rows.last().map_or(1, |r| r.line), reason)
        }
        other => other,
    })
}

/// Parses an SSIM listing with header `i,j,symbol`.
pub fn parse_ssim(text: &str, source: &str, n: usize) -> Result<SsimMatrix> {
    let rows = read_rows(text, source, 0)?;
    let (header, body) = rows
        .split_first()
        .ok_or_else(|| Error::parse(source, 1, "empty SSIM file"))?;
    let names: Vec<&str> = header.fields.iter().collect();
    if names != ["i", "j", "symbol"] {
        return Err(Error::parse(source, header.line, "expected header `i,j,symbol`"));
    }
    parse_judgment_rows(body, source, n)
}

pub fn ssim_to_csv(ssim: &SsimMatrix) -> String {
    let mut out = String::from("i,j,symbol\n");
    for (i, j, s) in ssim.iter() {
        let _ = writeln!(out, "{i},{j},{s}");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Ssim,
    Scores,
}

/// Body of one section of a response file, with the number of lines
/// preceding it. The other section may be absent.
fn section_body(text: &str, source: &str, wanted: Section) -> Result<(usize, String)> {
    let mut bodies: [Option<(usize, String)>; 2] = [None, None];
    let mut current: Option<Section> = None;
    for (k, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        let header = match trimmed {
            "[SSIM]" => Some(Section::Ssim),
            "[SCORES]" => Some(Section::Scores),
            _ => None,
        };
        if let Some(section) = header {
            let slot = &mut bodies[section as usize];
            if slot.is_some() {
                return Err(Error::parse(source, k + 1, format!("duplicate section {trimmed}")));
            }
            *slot = Some((k + 1, String::new()));
            current = Some(section);
            continue;
        }
        match current {
            Some(section) => {
                let body = &mut bodies[section as usize].as_mut().expect("open section").1;
                body.push_str(line);
                body.push('\n');
            }
            None if trimmed.is_empty() || trimmed.starts_with('#') => {}
            None => {
                return Err(Error::parse(source, k + 1, "content before the first section"));
            }
        }
    }
    let name = match wanted {
        Section::Ssim => "[SSIM]",
        Section::Scores => "[SCORES]",
    };
    bodies[wanted as usize]
        .take()
        .ok_or_else(|| Error::parse(source, 1, format!("missing {name} section")))
}

/// Reads only the `[SSIM]` section of a response file.
pub fn parse_response_judgments(
    text: &str,
    source: &str,
    registry: &BarrierRegistry,
) -> Result<SsimMatrix> {
    let (offset, body) = section_body(text, source, Section::Ssim)?;
    let rows = read_rows(&body, source, offset)?;
    parse_judgment_rows(&rows, source, registry.len())
}

/// Reads only the `[SCORES]` section of a response file.
pub fn parse_response_scores(
    text: &str,
    source: &str,
    registry: &BarrierRegistry,
) -> Result<InfluenceMatrix> {
    let (offset, body) = section_body(text, source, Section::Scores)?;
    matrix_from_text(&body, source, offset, registry, MatrixRole::ExpertResponse)
}

pub fn parse_response(
    expert_id: &str,
    text: &str,
    source: &str,
    registry: &BarrierRegistry,
) -> Result<ExpertResponse> {
    let judgments = parse_response_judgments(text, source, registry)?;
    let scores = parse_response_scores(text, source, registry)?;
    ExpertResponse::new(expert_id, judgments, scores)
}

pub fn response_to_text(response: &ExpertResponse, registry: &BarrierRegistry) -> String {
    let mut out = String::from("[SSIM]\n");
    for (i, j, s) in response.judgments().iter() {
        let _ = writeln!(out, "{i},{j},{s}");
    }
    out.push_str("\n[SCORES]\n");
    out.push_str(&matrix_to_csv(response.scores(), registry, Precision::Exact));
    out
}
