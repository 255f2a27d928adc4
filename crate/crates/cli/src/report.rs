use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use phaselab::synth::{GateFlags, Instance, Params, VERSION};
use phaselab::Error;

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Args)]
pub struct Output {
    /// Directory that receives the report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub params: &'a Params,
    pub gates: GateFlags,
    pub ok: bool,
    pub result: T,
}

impl<'a, T: Serialize> Report<'a, T> {
    pub fn new(command: &'static str, inst: &'a Instance, ok: bool, result: T) -> Self {
        Report {
            command,
            version: VERSION,
            seed: inst.seed,
            params: &inst.params,
            gates: inst.params.gates(),
            ok,
            result,
        }
    }

    fn csv(&self, rows: &[String]) -> anyhow::Result<String> {
        let mut out = format!(
            "# command: {}\n# version: {}\n# seed: {}\n# params: {}\n# gates: {}\n# ok: {}\n",
            self.command,
            self.version,
            self.seed,
            serde_json::to_string(self.params)?,
            serde_json::to_string(&self.gates)?,
            self.ok
        );
        for row in rows {
            out.push_str(row);
            out.push('\n');
        }
        Ok(out)
    }
}

impl Output {
    /// Print the report, or append it to `<out>/<command>.<ext>`.
    pub fn emit<T: Serialize>(&self, report: &Report<'_, T>, csv: Option<Vec<String>>) -> anyhow::Result<()> {
        let text = match (self.format, csv) {
            (Format::Csv, Some(rows)) => report.csv(&rows)?,
            (Format::Csv, None) => anyhow::bail!("{} has no CSV form", report.command),
            (Format::Json, _) => serde_json::to_string(report)? + "\n",
        };
        match &self.out {
            None => print(&text)?,
            Some(dir) => {
                fs::create_dir_all(dir)?;
                let path = dir.join(format!("{}.{}", report.command, self.format.ext()));
                OpenOptions::new().create(true).append(true).open(path)?.write_all(text.as_bytes())?;
            }
        }
        Ok(())
    }
}

/// Write to stdout, treating a closed pipe as success.
pub fn print(text: &str) -> std::io::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r,
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn error_json(command: &str, err: &anyhow::Error) -> String {
    let kind = match (err.downcast_ref::<Error>(), err.downcast_ref::<std::io::Error>()) {
        (Some(e), _) => e.kind(),
        (None, Some(_)) => "io",
        (None, None) => "error",
    };
    json!({
        "command": command,
        "version": VERSION,
        "ok": false,
        "error": { "kind": kind, "message": format!("{err:#}") },
    })
    .to_string()
}
