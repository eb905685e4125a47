//! Rendering of result tables as text, CSV or JSON.

use serde_json::{Map, Number, Value};

use crate::args::Format;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Num)
    }

    fn plain(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::Number((*v).into()),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
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

/// A named-column table. A record is a table meant to hold exactly one row.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    record: bool,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new(), record: false }
    }

    pub fn record(fields: Vec<(&str, Cell)>) -> Self {
        let (columns, row): (Vec<String>, Vec<Cell>) = fields.into_iter().map(|(k, v)| (k.to_string(), v)).unzip();
        Self { columns, rows: vec![row], record: true }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Text => Ok(self.text()),
            Format::Csv => self.csv(),
            Format::Json => Ok(self.json()),
        }
    }

    fn text(&self) -> String {
        let mut out = String::new();
        if self.record {
            let width = self.columns.iter().map(|c| c.len()).max().unwrap_or(0);
            for (name, cell) in self.columns.iter().zip(&self.rows[0]) {
                let v = cell.plain();
                out.push_str(&format!("{name:<width$}  {}\n", if v.is_empty() { "-" } else { &v }));
            }
            return out;
        }
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| {
                        let v = c.plain();
                        if v.is_empty() {
                            "-".to_string()
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|i| cells.iter().map(|r| r[i].len()).chain([self.columns[i].len()]).max().unwrap_or(0))
            .collect();
        let line = |fields: &[String]| {
            let parts: Vec<String> = fields.iter().zip(&widths).map(|(f, w)| format!("{f:<w$}")).collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        out.push_str(&line(&self.columns));
        for r in &cells {
            out.push_str(&line(r));
        }
        out
    }

    fn csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Numeric(format!("csv output failed: {e}"));
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::plain)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Numeric(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Numeric(e.to_string()))
    }

    fn json(&self) -> String {
        let objects: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                for (k, c) in self.columns.iter().zip(r) {
                    m.insert(k.clone(), c.json());
                }
                Value::Object(m)
            })
            .collect();
        let value = if self.record { objects.into_iter().next().unwrap_or(Value::Null) } else { Value::Array(objects) };
        serde_json::to_string_pretty(&value).expect("json values serialize") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_formats() {
        let t = Table::record(vec![("a", Cell::Num(0.5)), ("bb", Cell::Empty), ("c", "x".into())]);
        assert_eq!(t.render(Format::Text).unwrap(), "a   0.5\nbb  -\nc   x\n");
        assert_eq!(t.render(Format::Csv).unwrap(), "a,bb,c\n0.5,,x\n");
        let v: Value = serde_json::from_str(&t.render(Format::Json).unwrap()).unwrap();
        assert_eq!(v["a"], 0.5);
        assert!(v["bb"].is_null());
    }

    #[test]
    fn table_formats() {
        let mut t = Table::new(vec!["x".into(), "y".into()]);
        t.push(vec![Cell::Int(1), Cell::Num(1e-5)]);
        t.push(vec![Cell::Int(20), Cell::Num(f64::NAN)]);
        assert_eq!(t.render(Format::Csv).unwrap(), "x,y\n1,0.00001\n20,NaN\n");
        let v: Value = serde_json::from_str(&t.render(Format::Json).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
        assert!(v[1]["y"].is_null());
        assert_eq!(t.render(Format::Text).unwrap(), "x   y\n1   0.00001\n20  NaN\n");
    }
}
