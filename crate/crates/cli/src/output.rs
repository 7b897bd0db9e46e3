//! Report files. Every file opens with the config hash and the units of the
//! numbers in it; the generation time sits on a single header line so that
//! bodies of identical runs compare equal byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use surfspec::surgery::{write_atomic, write_csv_atomic};

use crate::config::Resolved;
use crate::CliError;

pub struct Reporter {
    pub dir: PathBuf,
    pub hash: String,
    command: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_hash: &'a str,
    units: BTreeMap<&'a str, &'a str>,
    config: &'a Resolved,
    result: &'a T,
}

impl Reporter {
    pub fn new(config: &Resolved) -> Result<Reporter, CliError> {
        std::fs::create_dir_all(&config.out).map_err(surfspec::Error::from)?;
        Ok(Reporter {
            dir: config.out.clone(),
            hash: config.hash(),
            command: config.command.clone(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Comment lines for tabular files.
    pub fn header(&self, units: &[(&str, &str)], extra: &[String]) -> Vec<String> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let mut lines = vec![
            format!("surfspec {} {}", self.command, env!("CARGO_PKG_VERSION")),
            format!("config_hash: {}", self.hash),
        ];
        let u: Vec<String> = units.iter().map(|(k, v)| format!("{k} [{v}]")).collect();
        lines.push(format!("units: {}", u.join(", ")));
        lines.extend(extra.iter().cloned());
        lines.push(format!("generated_unix: {stamp}"));
        lines
    }

    /// JSON wrapped with the hash, units and the resolved config. No
    /// timestamp, so reruns give identical bytes.
    pub fn json<T: Serialize>(
        &self,
        name: &str,
        config: &Resolved,
        units: &[(&str, &str)],
        result: &T,
    ) -> Result<PathBuf, CliError> {
        let env = Envelope {
            tool: "surfspec",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            config_hash: &self.hash,
            units: units.iter().copied().collect(),
            config,
            result,
        };
        let path = self.path(name);
        let mut bytes = serde_json::to_vec_pretty(&env).map_err(surfspec::Error::from)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
        log(&format!("wrote {}", path.display()));
        Ok(path)
    }

    /// Writes `<stem>.csv` and the whitespace-separated `<stem>.dat` for
    /// gnuplot from the same rows. Cells must not contain commas or blanks.
    pub fn table(
        &self,
        stem: &str,
        units: &[(&str, &str)],
        extra: &[String],
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let header = self.header(units, extra);
        let mut csv = String::new();
        let mut dat = String::new();
        writeln!(csv, "{}", columns.join(",")).unwrap();
        writeln!(dat, "# {}", columns.join(" ")).unwrap();
        for r in rows {
            writeln!(csv, "{}", r.join(",")).unwrap();
            writeln!(dat, "{}", r.join(" ")).unwrap();
        }
        for (ext, body) in [("csv", csv), ("dat", dat)] {
            let path = self.path(&format!("{stem}.{ext}"));
            write_csv_atomic(&path, &header, body.as_bytes())?;
            log(&format!("wrote {}", path.display()));
        }
        Ok(())
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn log(msg: &str) {
    eprintln!("surfspec: {msg}");
}
