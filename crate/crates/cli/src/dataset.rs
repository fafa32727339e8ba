//! Plain-text datasets.
//!
//! The first non-comment line is `x:<D> y:<D'>`. Every following line holds
//! `D + D'` whitespace-separated numbers. Text after `#` is ignored.

use std::fmt::Write as _;
use std::path::Path;

use rpreg::{Dataset, PointSet};

use crate::error::{CliError, Result};

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_dataset(&text, &path.display().to_string())
}

/// Parses dataset text; `origin` names the source in error messages.
pub fn parse_dataset(text: &str, origin: &str) -> Result<Dataset> {
    let err = |line: usize, message: String| CliError::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let Some((header_line, header)) = lines.next() else {
        return Err(err(1, "missing header 'x:<D> y:<D'>'".into()));
    };
    let (dx, dy) = parse_header(header).map_err(|m| err(header_line, m))?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, row) in lines {
        let values = row
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|_| format!("'{f}' is not a number")))
            .collect::<std::result::Result<Vec<f64>, String>>()
            .map_err(|m| err(line, m))?;
        if values.len() != dx + dy {
            return Err(err(
                line,
                format!("expected {} values, found {}", dx + dy, values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(err(line, format!("non-finite value {v}")));
        }
        xs.extend_from_slice(&values[..dx]);
        ys.extend_from_slice(&values[dx..]);
    }
    let x = PointSet::new(dx, xs).map_err(|e| err(header_line, e.to_string()))?;
    let y = PointSet::new(dy, ys).map_err(|e| err(header_line, e.to_string()))?;
    Dataset::new(x, y).map_err(|e| err(header_line, e.to_string()))
}

fn parse_header(header: &str) -> std::result::Result<(usize, usize), String> {
    let fields: Vec<&str> = header.split_whitespace().collect();
    let dim = |field: Option<&&str>, key: &str| -> std::result::Result<usize, String> {
        let value = field
            .and_then(|f| f.strip_prefix(key))
            .ok_or_else(|| format!("header must read 'x:<D> y:<D'>', got '{header}'"))?;
        match value.parse::<usize>() {
            Ok(d) if d > 0 => Ok(d),
            _ => Err(format!("bad dimension '{value}' in header")),
        }
    };
    if fields.len() != 2 {
        return Err(format!("header must read 'x:<D> y:<D'>', got '{header}'"));
    }
    Ok((dim(fields.first(), "x:")?, dim(fields.get(1), "y:")?))
}

/// Formats a dataset with 17 significant digits per value.
pub fn format_dataset(data: &Dataset) -> String {
    let mut out = format!("x:{} y:{}\n", data.input_dim(), data.output_dim());
    for i in 0..data.len() {
        let row = data.x.point(i).iter().chain(data.y.point(i));
        for (k, v) in row.enumerate() {
            if k > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, format_dataset(data)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row() {
        let d = parse_dataset("x:2 y:1\n0 0 1.5\n", "mem").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.x.point(0), &[0.0, 0.0]);
        assert_eq!(d.y.point(0), &[1.5]);
    }

    #[test]
    fn short_row_reports_its_line() {
        let e = parse_dataset("# data\nx:2 y:1\n0 0 1\n\n1 2\n", "mem").unwrap_err();
        match e {
            CliError::Parse { line, .. } => assert_eq!(line, 5),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn comments_and_bad_headers() {
        let d = parse_dataset("x:1 y:1 # header\n1 2 # trailing\n# full line\n3 4\n", "mem").unwrap();
        assert_eq!(d.len(), 2);
        assert!(parse_dataset("", "mem").is_err());
        assert!(parse_dataset("x:0 y:1\n", "mem").is_err());
        assert!(parse_dataset("y:1 x:1\n", "mem").is_err());
        assert!(parse_dataset("x:1 y:1\n1 nan\n", "mem").is_err());
        assert!(parse_dataset("x:1 y:1\n1 abc\n", "mem").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let x = PointSet::from_rows(2, &[[0.1, -1.0 / 3.0], [1e-300, 12345.678901234567]]).unwrap();
        let y = PointSet::from_rows(1, &[[std::f64::consts::PI], [-0.0]]).unwrap();
        let d = Dataset::new(x, y).unwrap();
        let back = parse_dataset(&format_dataset(&d), "mem").unwrap();
        assert_eq!(back, d);
    }
}
