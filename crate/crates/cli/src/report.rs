use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde_json::json;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A finished command: machine-readable body plus a pass/fail verdict.
pub struct Report {
    pub json: serde_json::Value,
    pub csv: String,
    pub ok: bool,
    pub summary: String,
    pub default_csv: bool,
}

impl Report {
    pub fn scalar(kind: &str, value: f64) -> Self {
        Self {
            json: json!({ "kind": kind, "value": value }),
            csv: format!("kind,value\n{kind},{value:.17e}\n"),
            ok: true,
            summary: format!("{kind}: {value}"),
            default_csv: false,
        }
    }

    pub fn emit(&self, format: Option<Format>, out: Option<&Path>, quiet: bool) -> std::io::Result<()> {
        let csv = format.map_or(self.default_csv, |f| f == Format::Csv);
        let body = if csv {
            self.csv.clone()
        } else {
            let mut s = serde_json::to_string_pretty(&self.json).expect("serializable");
            s.push('\n');
            s
        };
        match out {
            Some(path) => std::fs::write(path, body)?,
            None => std::io::stdout().write_all(body.as_bytes())?,
        }
        if !quiet {
            eprintln!("{}", self.summary);
        }
        Ok(())
    }
}
