//! Report rendering: JSON with 17 significant digits, flat CSV, and a
//! human listing with bits alongside nats.

use std::io;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Human,
}

/// Compact JSON whose floats carry 17 significant digits, enough to parse
/// back to the identical `f64`. Non-finite values never reach the
/// formatter; serde_json writes them as `null`.
struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", float17(value))
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes any value as a single line of JSON followed by a newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Fields whose numbers are information quantities in nats.
const INFO_FIELDS: &[&str] = &[
    "value",
    "best_value",
    "ed",
    "ef_x",
    "ef_x_prime",
    "ef_sum",
    "margin",
    "worst_margin",
    "lhs",
    "rhs",
    "mi",
    "cmi",
    "difference",
    "source",
    "processed",
];

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, Value)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        leaf => out.push((prefix.to_string(), leaf.clone())),
    }
}

fn leaf_name(path: &str) -> &str {
    let last = path.rsplit('.').next().unwrap_or(path);
    last.split('[').next().unwrap_or(last)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn plain(v: &Value, float: impl Fn(f64) -> String) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => float(n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        _ => unreachable!("flatten yields leaves only"),
    }
}

pub fn render<T: Serialize + ?Sized>(value: &T, format: Format) -> serde_json::Result<String> {
    if format == Format::Json {
        return to_json(value);
    }
    let tree = serde_json::to_value(value)?;
    let mut rows = Vec::new();
    flatten("", &tree, &mut rows);
    let mut s = String::new();
    match format {
        Format::Csv => {
            s.push_str("field,value\n");
            for (k, v) in rows {
                s.push_str(&format!(
                    "{},{}\n",
                    csv_field(&k),
                    csv_field(&plain(&v, float17))
                ));
            }
        }
        Format::Human => {
            for (k, v) in rows {
                let text = match v.as_f64() {
                    Some(x) if v.is_f64() && INFO_FIELDS.contains(&leaf_name(&k)) => {
                        format!("{x:.6} nats ({:.6} bits)", x / std::f64::consts::LN_2)
                    }
                    _ => plain(&v, |x| format!("{x:.6e}")),
                };
                s.push_str(&format!("{k}: {text}\n"));
            }
        }
        Format::Json => unreachable!(),
    }
    Ok(s)
}
