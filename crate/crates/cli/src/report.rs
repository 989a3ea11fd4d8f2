use std::io;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// One-line JSON with a space after every `:` and `,`.
struct Spaced;

impl Formatter for Spaced {
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }
}

fn json_line(v: &Value) -> Result<String, String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Spaced);
    v.serialize(&mut ser).map_err(|e| e.to_string())?;
    String::from_utf8(buf).map_err(|e| e.to_string())
}

fn cell(v: &Value) -> Result<String, String> {
    match v {
        Value::Null => Ok(String::new()),
        Value::String(s) => Ok(s.clone()),
        Value::Bool(_) | Value::Number(_) => Ok(v.to_string()),
        _ => json_line(v),
    }
}

fn rows(v: &Value) -> Vec<&serde_json::Map<String, Value>> {
    match v {
        Value::Object(m) => vec![m],
        Value::Array(items) => items.iter().filter_map(Value::as_object).collect(),
        _ => Vec::new(),
    }
}

fn csv(v: &Value) -> Result<String, String> {
    let rows = rows(v);
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(first) = rows.first() {
        w.write_record(first.keys()).map_err(|e| e.to_string())?;
    }
    for row in &rows {
        let cells = row.values().map(cell).collect::<Result<Vec<_>, _>>()?;
        w.write_record(&cells).map_err(|e| e.to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

fn text(v: &Value) -> Result<String, String> {
    let mut blocks = Vec::new();
    for row in rows(v) {
        let lines = row
            .iter()
            .map(|(k, v)| Ok(format!("{k}: {}", cell(v)?)))
            .collect::<Result<Vec<_>, String>>()?;
        blocks.push(lines.join("\n"));
    }
    Ok(blocks.join("\n\n") + "\n")
}

pub fn render(v: &Value, format: Format) -> Result<String, String> {
    match format {
        Format::Json => Ok(json_line(v)? + "\n"),
        Format::Csv => csv(v),
        Format::Text => text(v),
    }
}
