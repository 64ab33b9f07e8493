use std::fs;
use std::path::Path;

use anyhow::Context;
use serde_json::{json, Map, Value};

use crate::cli::Format;

/// Six significant digits with trailing zeros removed, like C's `%g`.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').unwrap_or((&s, "0"));
        return format!("{}e{e}", trim_zeros(mantissa));
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("null".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.to_string(),
            (None, Some(i)) => i.to_string(),
            _ => fmt_g(n.as_f64().unwrap_or(f64::NAN)),
        }),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(items) => {
            if let Some(parts) = items.iter().map(scalar).collect::<Option<Vec<_>>>() {
                if parts.len() <= 16 {
                    out.push(format!("{prefix} {}", parts.join(",")));
                } else {
                    out.push(format!("{prefix} [{} values]", parts.len()));
                }
            } else if items.len() <= 16 {
                for (i, x) in items.iter().enumerate() {
                    flatten(&key(&i.to_string()), x, out);
                }
            } else {
                out.push(format!("{prefix} [{} entries]", items.len()));
            }
        }
        other => out.push(format!("{prefix} {}", scalar(other).unwrap_or_default())),
    }
}

pub fn document(echo: &Value, result: Value) -> Value {
    json!({ "config": echo, "result": result })
}

pub fn print(format: Format, echo: &Value, result: &Value) -> anyhow::Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&document(echo, result.clone()))?),
        Format::Text => {
            let mut lines = Vec::new();
            flatten("", result, &mut lines);
            for line in lines {
                println!("{line}");
            }
        }
    }
    Ok(())
}

pub fn write_json(path: &Path, echo: &Value, result: &Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(&document(echo, result.clone()))? + "\n";
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// The config echo that accompanies a CSV table, written next to it.
pub fn write_csv_echo(csv_path: &Path, echo: &Value) -> anyhow::Result<()> {
    let path = csv_path.with_extension("config.json");
    let text = serde_json::to_string_pretty(echo)? + "\n";
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn print_error(code: &str, kind: &str, message: &str) {
    let mut err = Map::new();
    err.insert("code".into(), code.into());
    err.insert("kind".into(), kind.into());
    err.insert("message".into(), message.into());
    eprintln!("{}", json!({ "error": err }));
}
