//! Bit-stable CSV and NDJSON writers and the run manifest.

use std::fmt::Write as _;

/// Shortest text that still carries 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// CSV table with a commented header naming columns and units.
#[derive(Debug, Clone)]
pub struct Csv {
    columns: Vec<(String, String)>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    /// `columns` are `(name, unit)`; an empty unit is omitted from the comment.
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Csv {
            columns: columns
                .iter()
                .map(|(n, u)| (n.to_string(), u.to_string()))
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let described: Vec<String> = self
            .columns
            .iter()
            .map(|(n, u)| if u.is_empty() { n.clone() } else { format!("{n} [{u}]") })
            .collect();
        let mut out = format!("# columns: {}\n", described.join(", "));
        let names: Vec<&str> = self.columns.iter().map(|(n, _)| n.as_str()).collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// A JSON scalar rendered with [`num`] for floats.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(i64),
    Bool(bool),
    Str(String),
    Null,
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Num(x)
    }
}

impl From<bool> for Field {
    fn from(b: bool) -> Self {
        Field::Bool(b)
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Str(s.to_string())
    }
}

impl From<usize> for Field {
    fn from(n: usize) -> Self {
        Field::Int(n as i64)
    }
}

impl From<Option<f64>> for Field {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Field::Null, Field::Num)
    }
}

fn render_field(f: &Field) -> String {
    match f {
        Field::Num(x) if x.is_finite() => num(*x),
        Field::Num(_) | Field::Null => "null".into(),
        Field::Int(n) => n.to_string(),
        Field::Bool(b) => b.to_string(),
        Field::Str(s) => serde_json::to_string(s).expect("string serializes"),
    }
}

/// Newline-delimited JSON with a fixed key order per record.
#[derive(Debug, Clone, Default)]
pub struct Ndjson {
    lines: Vec<String>,
}

impl Ndjson {
    pub fn push(&mut self, record: &[(&str, Field)]) {
        let mut line = String::from("{");
        for (i, (k, v)) in record.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            let _ = write!(line, "{}:{}", serde_json::to_string(k).expect("key"), render_field(v));
        }
        line.push('}');
        self.lines.push(line);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}
