//! Numeric formatting, CSV/JSON documents and the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Value};

/// Significant digits of every number the tool prints.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` rounded to [`SIGNIFICANT_DIGITS`].
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("float round trip")
}

/// Shortest decimal form of [`round_sig`]`(x)`; independent of locale.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        // also folds -0
        return "0".into();
    }
    if r.abs() < 1e-4 || r.abs() >= 1e16 {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// Recursively rounds every number in a JSON value.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(0.0));
            serde_json::Number::from_f64(x)
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn to_json<T: Serialize>(x: &T) -> Value {
    round_json(serde_json::to_value(x).expect("serializable"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A table: header plus rows of already formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| csv_cell(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

/// Flattens a JSON object into `key,value` rows using dotted keys.
pub fn json_to_kv(v: &Value) -> Table {
    fn walk(prefix: &str, v: &Value, t: &mut Table) {
        match v {
            Value::Object(o) => {
                for (k, x) in o {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, x, t);
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, t);
                }
            }
            Value::Number(n) => t.push(vec![
                prefix.to_string(),
                n.as_f64().map(fmt_num).unwrap_or_else(|| n.to_string()),
            ]),
            Value::String(s) => t.push(vec![prefix.to_string(), s.clone()]),
            Value::Bool(b) => t.push(vec![prefix.to_string(), b.to_string()]),
            Value::Null => t.push(vec![prefix.to_string(), String::new()]),
        }
    }
    let mut t = Table::new(&["key", "value"]);
    walk("", v, &mut t);
    t
}

/// Who ran what, with which constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub params: Value,
    pub constants_fingerprint: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        params: Map<String, Value>,
        fingerprint: String,
        seed: Option<u64>,
    ) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            params: Value::Object(params),
            constants_fingerprint: fingerprint,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes `body` to `out` (or stdout) and the manifest next to it (or to
/// stderr as one JSON line).
pub fn emit(body: &str, out: Option<&Path>, manifest: &RunManifest) -> io::Result<()> {
    let m = serde_json::to_string(manifest).expect("manifest serialize");
    match out {
        Some(p) => {
            fs::write(p, body)?;
            fs::write(manifest_path(p), m + "\n")
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            stdout.flush()?;
            writeln!(io::stderr(), "{m}")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(2.0), "2");
        assert_eq!(fmt_num(1.0 / 7.0 * 1e-7), "1.42857142857e-8");
        assert_eq!(round_sig(123456789.1234567), 123456789.123);
    }

    #[test]
    fn csv_quotes_cells() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), "plain".into()]);
        assert_eq!(t.to_csv(), "a,b\n\"x,y\",plain\n");
    }

    #[test]
    fn json_rounding_and_flattening() {
        let v = round_json(json!({"p": 1.0 / 3.0, "n": [1, 2.5], "s": "x"}));
        assert_eq!(v["p"], json!(0.333333333333));
        let t = json_to_kv(&v);
        assert_eq!(t.rows.len(), 4);
        assert!(t.rows.contains(&vec!["n.1".to_string(), "2.5".to_string()]));
    }

    #[test]
    fn manifest_next_to_output() {
        assert_eq!(
            manifest_path(Path::new("a/b.csv")),
            PathBuf::from("a/b.csv.manifest.json")
        );
    }
}
