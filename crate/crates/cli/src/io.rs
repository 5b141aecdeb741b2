//! CSV readers and writers. Numbers are written with 17 significant digits
//! so that doubles round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use grouplasso::model::{Coefficients, GroupedProblem};
use nalgebra::DMatrix;

use crate::CliError;

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn open(path: &Path) -> Result<String, CliError> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| CliError::Malformed(format!("cannot read {}: {e}", path.display())))?;
    Ok(s)
}

fn parse_field(field: &str, path: &Path, line: usize) -> Result<f64, CliError> {
    let v: f64 = field.trim().parse().map_err(|_| {
        CliError::Malformed(format!(
            "{}:{line}: not a number: '{}'",
            path.display(),
            field.trim()
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::Malformed(format!(
            "{}:{line}: non-finite value",
            path.display()
        )));
    }
    Ok(v)
}

/// Headerless numeric CSV; every row must have the same length.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .map(|f| parse_field(f, path, i + 1))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Malformed(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

/// Single-column CSV.
pub fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let rows = read_matrix(path)?;
    if rows.iter().any(|r| r.len() != 1) {
        return Err(CliError::Malformed(format!(
            "{}: expected a single column",
            path.display()
        )));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

/// One line of comma-separated positive group sizes.
pub fn read_groups(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = open(path)?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != 1 {
        return Err(CliError::Malformed(format!(
            "{}: expected exactly one line of group sizes",
            path.display()
        )));
    }
    lines[0]
        .split(',')
        .map(|f| match f.trim().parse::<usize>() {
            Ok(s) if s > 0 => Ok(s),
            _ => Err(CliError::Malformed(format!(
                "{}: bad group size '{}'",
                path.display(),
                f.trim()
            ))),
        })
        .collect()
}

pub fn read_problem(x: &Path, y: &Path, groups: &Path) -> Result<GroupedProblem, CliError> {
    let rows = read_matrix(x)?;
    let yv = read_vector(y)?;
    let sizes = read_groups(groups)?;
    Ok(GroupedProblem::from_rows(&rows, &yv, sizes)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Write `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Io(e.to_string());
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes()).map_err(io_err)?;
            w.flush().map_err(io_err)
        }
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io_err),
    }
}

/// Rows `group,index,value` (1-based group and within-group index).
pub fn coefficient_rows(beta: &Coefficients) -> Vec<(usize, usize, f64)> {
    (0..beta.num_groups())
        .flat_map(|k| {
            beta.group(k)
                .iter()
                .enumerate()
                .map(move |(j, &v)| (k + 1, j + 1, v))
        })
        .collect()
}

pub fn coefficients_csv(beta: &Coefficients) -> String {
    let mut s = String::from("group,index,value\n");
    for (g, i, v) in coefficient_rows(beta) {
        s.push_str(&format!("{g},{i},{}\n", fmt_num(v)));
    }
    s
}

/// Parse a `group,index,value` file back into values ordered by group then index.
pub fn read_coefficients(path: &Path) -> Result<(Vec<usize>, Vec<f64>), CliError> {
    let text = open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Malformed(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["group", "index", "value"] {
        return Err(CliError::Malformed(format!(
            "{}: expected header group,index,value",
            path.display()
        )));
    }
    let mut entries = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Malformed(e.to_string()))?;
        let bad = || CliError::Malformed(format!("{}:{}: bad row", path.display(), i + 2));
        let g: usize = rec[0].parse().map_err(|_| bad())?;
        let j: usize = rec[1].parse().map_err(|_| bad())?;
        let v = parse_field(&rec[2], path, i + 2)?;
        if g == 0 || j == 0 {
            return Err(bad());
        }
        entries.push((g, j, v));
    }
    entries.sort_by_key(|&(g, j, _)| (g, j));
    let mut sizes: Vec<usize> = Vec::new();
    for &(g, j, _) in &entries {
        if g > sizes.len() + 1
            || (g == sizes.len() + 1 && j != 1)
            || (g == sizes.len() && j != sizes[g - 1] + 1)
        {
            return Err(CliError::Malformed(format!(
                "{}: groups or indices are not contiguous",
                path.display()
            )));
        }
        if g == sizes.len() + 1 {
            sizes.push(1);
        } else {
            sizes[g - 1] += 1;
        }
    }
    Ok((sizes, entries.into_iter().map(|e| e.2).collect()))
}

pub fn matrix_csv(x: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| fmt_num(x[(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn vector_csv(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_num(x) + "\n").collect()
}

pub fn groups_csv(sizes: &[usize]) -> String {
    let parts: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
    parts.join(",") + "\n"
}
