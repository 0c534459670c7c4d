//! Rectangular result tables with a stable CSV form.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 6;
pub const NA: &str = "NA";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Na,
}

impl Cell {
    pub fn num(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_na(&self) -> bool {
        matches!(self, Cell::Na)
    }
}

impl From<f64> for Cell {
    /// Non-finite numbers become `Na`.
    fn from(x: f64) -> Self {
        if x.is_finite() {
            Cell::Num(x)
        } else {
            Cell::Na
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Na, Cell::from)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Num(x as f64)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(x) => f.write_str(&format_significant(*x, SIGNIFICANT_DIGITS)),
            Cell::Text(s) => f.write_str(s),
            Cell::Na => f.write_str(NA),
        }
    }
}

/// Rounds to `digits` significant digits and drops trailing zeros.
/// Very small or very large magnitudes use exponent notation.
pub fn format_significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return NA.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..15).contains(&exp) {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let shift = digits as i32 - 1 - exp;
    let decimals = shift.max(0) as usize;
    let x = if shift < 0 { (x / 10f64.powi(-shift)).round() * 10f64.powi(-shift) } else { x };
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        ResultTable { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.headers.len() {
            return Err(Error::InvalidParameter(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.headers.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Rows whose text columns equal the given values.
    pub fn select<'a>(&'a self, filters: &'a [(&'a str, &'a str)]) -> impl Iterator<Item = &'a [Cell]> + 'a {
        self.rows
            .iter()
            .filter(move |r| {
                filters.iter().all(|(c, v)| match self.column(c) {
                    Some(k) => r[k].to_string() == *v,
                    None => false,
                })
            })
            .map(|r| r.as_slice())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidParameter(format!("writing table: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.headers).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|c| c.to_string())).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidParameter(format!("writing table: {e}")))?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(114.19642857, 6), "114.196");
        assert_eq!(format_significant(0.98720000001, 6), "0.9872");
        assert_eq!(format_significant(1.0, 6), "1");
        assert_eq!(format_significant(-2.5, 6), "-2.5");
        assert_eq!(format_significant(1234567.0, 6), "1234570");
        assert_eq!(format_significant(1e-7, 6), "1.00000e-7");
        assert_eq!(format_significant(-1e-13, 6), "-1.00000e-13");
    }

    #[test]
    fn csv_has_header_and_na() {
        let mut t = ResultTable::new(["scheme", "value"]);
        t.push(vec!["nash".into(), Cell::Na]).unwrap();
        t.push(vec!["x".into(), f64::NAN.into()]).unwrap();
        assert_eq!(t.to_csv(), "scheme,value\nnash,NA\nx,NA\n");
        assert_eq!(ResultTable::new(["a"]).to_csv(), "a\n");
        assert!(t.push(vec![Cell::Na]).is_err());
    }
}
