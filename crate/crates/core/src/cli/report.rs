//! Tabular report rows and their CSV/JSON encodings.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    pub fn opt_num(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Num)
    }

    pub fn opt_bool(v: Option<bool>) -> Cell {
        v.map_or(Cell::Empty, Cell::Bool)
    }

    /// Serde tag of an enum value, e.g. `zero_investment`.
    pub fn tag<T: Serialize>(v: &T) -> Cell {
        match serde_json::to_value(v) {
            Ok(Value::String(s)) => Cell::Text(s),
            Ok(other) => Cell::Text(other.to_string()),
            Err(_) => Cell::Empty,
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(format!("{v}")),
            Cell::Int(v) => json!(v),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Cell::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn rows_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
                .collect(),
        )
    }

    /// Appends `summary_min` and `summary_max` rows over the boolean columns.
    /// The first column carries the row label; other non-boolean columns stay empty.
    pub fn push_bool_summary(&mut self) {
        let width = self.columns.len();
        let mut lo = vec![Cell::Empty; width];
        let mut hi = vec![Cell::Empty; width];
        lo[0] = Cell::text("summary_min");
        hi[0] = Cell::text("summary_max");
        for col in 1..width {
            let vals: Vec<bool> = self.rows.iter().filter_map(|r| r[col].as_bool()).collect();
            if vals.is_empty() {
                continue;
            }
            lo[col] = Cell::Bool(vals.iter().all(|&b| b));
            hi[col] = Cell::Bool(vals.iter().any(|&b| b));
        }
        self.rows.push(lo);
        self.rows.push(hi);
    }
}
