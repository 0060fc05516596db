//! Long-format result rows `(scenario_id, n, key, value)` and their CSV
//! and JSON-lines encodings.

use std::io::Write;

use serde_json::json;

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Value {
    /// Text form; reals use the shortest representation that round-trips.
    pub fn render(&self) -> String {
        match self {
            Value::Real(v) => format!("{v:?}"),
            Value::Int(v) => v.to_string(),
            Value::Bool(v) => v.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Real(v) if v.is_finite() => json!(v),
            Value::Real(v) => json!(format!("{v:?}")),
            Value::Int(v) => json!(v),
            Value::Bool(v) => json!(v),
            Value::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as u64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

/// One result; `n` is absent for scenario-level summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub n: Option<u64>,
    pub key: String,
    pub value: Value,
}

impl Row {
    pub fn at(n: u64, key: impl Into<String>, value: impl Into<Value>) -> Self {
        Row {
            n: Some(n),
            key: key.into(),
            value: value.into(),
        }
    }

    pub fn summary(key: impl Into<String>, value: impl Into<Value>) -> Self {
        Row {
            n: None,
            key: key.into(),
            value: value.into(),
        }
    }
}

/// `name[input=value]`, the key of an input-dependent quantity.
pub fn keyed(name: &str, input: &str, x: f64) -> String {
    format!("{name}[{input}={x:?}]")
}

pub const CSV_HEADER: [&str; 4] = ["scenario_id", "n", "key", "value"];

pub fn write_rows<W: Write>(out: W, format: Format, scenario_id: &str, rows: &[Row]) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in rows {
                let n = r.n.map(|n| n.to_string()).unwrap_or_default();
                w.write_record([scenario_id, n.as_str(), r.key.as_str(), r.value.render().as_str()])?;
            }
            w.flush()
        }
        Format::Jsonl => {
            let mut out = std::io::BufWriter::new(out);
            for r in rows {
                let line = json!({
                    "scenario_id": scenario_id,
                    "n": r.n,
                    "key": r.key,
                    "value": r.value.to_json(),
                });
                writeln!(out, "{line}")?;
            }
            out.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_rows(&mut buf, Format::Csv, "s", &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "scenario_id,n,key,value\n");
    }

    #[test]
    fn reals_round_trip() {
        for v in [0.1 + 0.2, 1e-300, -3.0, 123456.789, f64::MIN_POSITIVE] {
            let s = Value::Real(v).render();
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_and_jsonl_rows() {
        let rows = vec![Row::at(10, keyed("price", "q", 0.5), 0.75), Row::summary("verdict", "consistent_long")];
        let mut csv = Vec::new();
        write_rows(&mut csv, Format::Csv, "s", &rows).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "scenario_id,n,key,value\ns,10,price[q=0.5],0.75\ns,,verdict,consistent_long\n"
        );
        let mut jl = Vec::new();
        write_rows(&mut jl, Format::Jsonl, "s", &rows).unwrap();
        let text = String::from_utf8(jl).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["value"], json!(0.75));
        assert_eq!(first["n"], json!(10));
    }
}
