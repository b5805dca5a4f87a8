use std::io::Write;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Prints a report: pretty JSON, or `key,value` rows with nested keys joined by dots.
pub fn emit<T: Serialize>(report: &T, format: Format) -> anyhow::Result<()> {
    let v = serde_json::to_value(report)?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    match format {
        Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&v)?)?,
        Format::Csv => {
            let mut rows = Vec::new();
            flatten("", &v, &mut rows);
            writeln!(w, "key,value")?;
            for (k, x) in rows {
                writeln!(w, "{},{}", csv_field(&k), csv_field(&x))?;
            }
        }
    }
    Ok(())
}
