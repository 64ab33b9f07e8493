//! `--config FILE.json`: each key becomes the long flag of the same name
//! unless that flag is already on the command line.

use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context};
use serde_json::Value;

pub fn expand_config(mut argv: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.to_string_lossy().starts_with("--config=")) else {
        return Ok(argv);
    };
    let arg = argv.remove(pos).to_string_lossy().into_owned();
    let path = match arg.strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => {
            if pos >= argv.len() {
                bail!("--config needs a file path");
            }
            argv.remove(pos).to_string_lossy().into_owned()
        }
    };
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read config file {path}"))?;
    let Value::Object(map) = serde_json::from_str(&text).with_context(|| format!("config file {path} is not valid JSON"))? else {
        bail!("config file {path} must hold a JSON object");
    };

    let present = |flag: &str, argv: &[OsString]| {
        argv.iter().any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        })
    };
    let mut extra = Vec::new();
    for (key, value) in &map {
        if key == "command" {
            continue;
        }
        let flag = format!("--{key}");
        if present(&flag, &argv) {
            continue;
        }
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => extra.push(flag),
            Value::Number(n) => extra.extend([flag, n.to_string()]),
            Value::String(s) => extra.extend([flag, s.clone()]),
            Value::Array(items) => {
                let parts = items
                    .iter()
                    .map(|v| match v {
                        Value::Number(n) => Ok(n.to_string()),
                        Value::String(s) => Ok(s.clone()),
                        _ => bail!("config key {key:?}: list entries must be numbers or strings"),
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?;
                extra.extend([flag, parts.join(",")]);
            }
            Value::Object(_) => bail!("config key {key:?}: nested objects are not flags"),
        }
    }
    if let Some(command) = map.get("command") {
        let Value::String(command) = command else {
            bail!("config key \"command\" must be a string such as \"bounds sparsity\"");
        };
        let head = command.split_whitespace().next().unwrap_or_default();
        if !argv.iter().skip(1).any(|a| a == head) {
            for (i, word) in command.split_whitespace().enumerate() {
                argv.insert(1 + i, word.into());
            }
        }
    }
    argv.extend(extra.into_iter().map(OsString::from));
    Ok(argv)
}
