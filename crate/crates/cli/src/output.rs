use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use gmac_core::report;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, P: Serialize> {
    pub subcommand: &'a str,
    pub parameters: &'a P,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub wall_time_seconds: f64,
}

pub struct Run<'a, P: Serialize> {
    subcommand: &'a str,
    parameters: &'a P,
    seed: Option<u64>,
    started: Instant,
}

impl<'a, P: Serialize> Run<'a, P> {
    pub fn new(subcommand: &'a str, parameters: &'a P, seed: Option<u64>) -> Self {
        Self {
            subcommand,
            parameters,
            seed,
            started: Instant::now(),
        }
    }

    fn manifest_json(&self) -> io::Result<String> {
        let manifest = RunManifest {
            subcommand: self.subcommand,
            parameters: self.parameters,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        report::to_json_string(&manifest).map_err(io::Error::other)
    }

    /// `{"manifest":…,"result":…}` on one line; the result is serialized verbatim.
    pub fn emit_json<T: Serialize>(&self, result: &T, out: Option<&Path>) -> io::Result<()> {
        let body = report::to_json_string(result).map_err(io::Error::other)?;
        let doc = format!("{{\"manifest\":{},\"result\":{}}}\n", self.manifest_json()?, body);
        write_text(&doc, out)
    }

    /// CSV preceded by a `# manifest {…}` comment line.
    pub fn emit_csv(&self, csv: &str, out: Option<&Path>) -> io::Result<()> {
        let doc = format!("# manifest {}\n{}", self.manifest_json()?, csv);
        write_text(&doc, out)
    }
}

fn write_text(text: &str, out: Option<&Path>) -> io::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(text.as_bytes())?;
            w.flush()
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()
        }
    }
}
