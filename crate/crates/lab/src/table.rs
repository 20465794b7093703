//! CSV tables: UTF-8, one header row, `.` decimal point.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! [`Table::read`] recovers every value bit for bit.

use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

/// Space-separated vector, for cells holding a point or a normal.
pub fn format_vector(v: &[f64]) -> String {
    v.iter().map(|x| format_number(*x)).collect::<Vec<_>>().join(" ")
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    /// Appends a row; panics if its width differs from the header.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from the header");
        self.rows.push(row.iter().map(Cell::render).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric values of a column, skipping rows where it does not parse.
    pub fn numbers(&self, name: &str) -> Vec<f64> {
        let Some(j) = self.column_index(name) else { return Vec::new() };
        self.rows.iter().filter_map(|r| r[j].parse().ok()).collect()
    }

    pub fn write<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory cannot fail");
        buf
    }

    pub fn read<R: Read>(input: R) -> csv::Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input);
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r.records().map(|rec| rec.map(|r| r.iter().map(str::to_string).collect())).collect::<csv::Result<_>>()?;
        Ok(Self { header, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn text_cells_with_separators_are_quoted() {
        let mut t = Table::new(["name", "value"]);
        t.push(vec!["a, \"b\"".into(), 1.5.into()]);
        t.push(vec![Cell::Empty, Cell::Int(-3)]);
        let back = Table::read(t.to_bytes().as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.numbers("value"), vec![1.5, -3.0]);
    }

    #[test]
    fn special_values_round_trip() {
        let mut t = Table::new(["x"]);
        for v in [f64::INFINITY, f64::NEG_INFINITY, -0.0, 5e-324] {
            t.push(vec![v.into()]);
        }
        let back = Table::read(t.to_bytes().as_slice()).unwrap();
        let xs = back.numbers("x");
        assert_eq!(xs[0], f64::INFINITY);
        assert_eq!(xs[1], f64::NEG_INFINITY);
        assert!(xs[2] == 0.0 && xs[2].is_sign_negative());
        assert_eq!(xs[3], 5e-324);
    }

    proptest! {
        #[test]
        fn numbers_round_trip_bit_for_bit(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40)) {
            let mut t = Table::new(["v", "w"]);
            for v in &values {
                t.push(vec![(*v).into(), format_vector(&[*v, -*v]).into()]);
            }
            let back = Table::read(t.to_bytes().as_slice()).unwrap();
            prop_assert_eq!(&back, &t);
            let read: Vec<u64> = back.numbers("v").iter().map(|v| v.to_bits()).collect();
            let orig: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(read, orig);
        }
    }
}
