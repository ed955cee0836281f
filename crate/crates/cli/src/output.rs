//! Output records and their CSV/JSON renderings.
//!
//! Numbers are rounded to 12 significant digits in both formats; CSV uses a
//! comma delimiter, `.` decimal point, LF line endings and always carries a
//! header row. Multi-row payloads (curves, chart data) render as plain
//! column tables in CSV and as a `rows` array in JSON.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Bool(bool),
    UInt(u64),
    Int(i64),
    Float(f64),
    Str(String),
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}
impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::UInt(v as u64)
    }
}
impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::UInt(v)
    }
}
impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}
impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}
impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}
impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

/// Round to 12 significant digits; the shortest round-trip representation of
/// the result is what gets printed.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("round-tripped float")
}

fn float_field(x: f64) -> String {
    let r = sig12(x);
    if r == 0.0 || (r.abs() >= 1e-5 && r.abs() < 1e15) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn csv_field(v: &Value) -> String {
    let s = match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::UInt(u) => u.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => float_field(*f),
        Value::Str(s) => s.clone(),
    };
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

fn json_value(v: &Value) -> serde_json::Value {
    match v {
        Value::Null => serde_json::Value::Null,
        Value::Bool(b) => (*b).into(),
        Value::UInt(u) => (*u).into(),
        Value::Int(i) => (*i).into(),
        Value::Float(f) => serde_json::Number::from_f64(sig12(*f))
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null),
        Value::Str(s) => s.clone().into(),
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

/// One command invocation's result: parsed inputs, computed outputs, and an
/// optional multi-row table.
#[derive(Debug, Clone)]
pub struct OutputRecord {
    pub command: &'static str,
    pub inputs: Vec<(String, Value)>,
    pub outputs: Vec<(String, Value)>,
    pub table: Option<Table>,
}

impl OutputRecord {
    pub fn new(command: &'static str) -> Self {
        OutputRecord {
            command,
            inputs: Vec::new(),
            outputs: Vec::new(),
            table: None,
        }
    }

    pub fn input(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.inputs.push((key.to_string(), value.into()));
        self
    }

    pub fn output(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.outputs.push((key.to_string(), value.into()));
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(table) = &self.table {
            writeln!(out, "{}", table.columns.join(",")).unwrap();
            for row in &table.rows {
                let fields: Vec<String> = row.iter().map(csv_field).collect();
                writeln!(out, "{}", fields.join(",")).unwrap();
            }
        } else {
            let mut keys = vec!["command".to_string()];
            let mut fields = vec![csv_field(&Value::Str(self.command.to_string()))];
            for (k, v) in self.inputs.iter().chain(self.outputs.iter()) {
                keys.push(k.clone());
                fields.push(csv_field(v));
            }
            writeln!(out, "{}", keys.join(",")).unwrap();
            writeln!(out, "{}", fields.join(",")).unwrap();
        }
        out
    }

    fn to_json(&self) -> String {
        let mut root = serde_json::Map::new();
        root.insert("command".into(), self.command.into());
        let mut inputs = serde_json::Map::new();
        for (k, v) in &self.inputs {
            inputs.insert(k.clone(), json_value(v));
        }
        root.insert("inputs".into(), inputs.into());
        let mut outputs = serde_json::Map::new();
        for (k, v) in &self.outputs {
            outputs.insert(k.clone(), json_value(v));
        }
        root.insert("outputs".into(), outputs.into());
        if let Some(table) = &self.table {
            let rows: Vec<serde_json::Value> = table
                .rows
                .iter()
                .map(|row| {
                    let mut obj = serde_json::Map::new();
                    for (col, v) in table.columns.iter().zip(row) {
                        obj.insert((*col).into(), json_value(v));
                    }
                    obj.into()
                })
                .collect();
            root.insert("rows".into(), rows.into());
        }
        let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(root))
            .expect("serializable record");
        s.push('\n');
        s
    }
}
