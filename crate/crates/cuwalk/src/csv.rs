//! Versioned CSV output.
//!
//! Every file starts with comment lines
//!
//! ```text
//! # schema=v1
//! # command=walk simulate
//! # seed=1
//! # generated_unix=1760000000      (omitted with --no-timestamp)
//! ```
//!
//! followed by a header row and data rows. Reals are printed with ten
//! significant digits (`{:.9e}`). Relative output paths are resolved
//! against `$CUWALK_OUT_DIR` when it is set.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::CliError;

pub const SCHEMA: &str = "v1";
pub const OUT_DIR_ENV: &str = "CUWALK_OUT_DIR";

pub struct CsvTable {
    comments: Vec<String>,
    header: String,
    rows: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(command: &str, seed: u64, timestamp: bool, columns: &[&str]) -> Self {
        let mut comments = vec![format!("schema={SCHEMA}"), format!("command={command}"), format!("seed={seed}")];
        if timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            comments.push(format!("generated_unix={secs}"));
        }
        Self { comments, header: columns.join(","), rows: String::new(), columns: columns.len() }
    }

    /// Extra `# key=value` header line.
    pub fn comment(&mut self, key: &str, value: &str) {
        self.comments.push(format!("{key}={value}"));
    }

    pub fn row(&mut self, fields: &[Field]) {
        assert_eq!(fields.len(), self.columns, "row width");
        let line: Vec<String> = fields.iter().map(Field::render).collect();
        writeln!(self.rows, "{}", line.join(",")).unwrap();
    }

    pub fn render(&self) -> String {
        let mut text = String::new();
        for c in &self.comments {
            writeln!(text, "# {c}").unwrap();
        }
        writeln!(text, "{}", self.header).unwrap();
        text.push_str(&self.rows);
        text
    }

    /// Writes to `out` (resolved with [`resolve_out`]) or to stdout.
    pub fn write(&self, out: Option<&Path>) -> Result<Option<PathBuf>, CliError> {
        let text = self.render();
        match out {
            Some(p) => {
                let path = resolve_out(p);
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                fs::write(&path, text)?;
                Ok(Some(path))
            }
            None => {
                write_stdout(&text)?;
                Ok(None)
            }
        }
    }
}

pub enum Field {
    Int(u64),
    Real(f64),
    Text(String),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Int(i) => i.to_string(),
            Field::Real(x) => format_real(*x),
            Field::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Field::Text(s) => s.clone(),
        }
    }
}

/// Ten significant digits; `-0` is printed as `0`.
pub fn format_real(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.9e}")
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
pub fn write_stdout(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn resolve_out(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if p.is_relative() && !dir.is_empty() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut t = CsvTable::new("walk simulate", 7, false, &["a", "b", "c"]);
        t.comment("steps", "3");
        t.row(&[Field::Int(1), Field::Real(-0.0), Field::Text("x,y".into())]);
        assert_eq!(
            t.render(),
            "# schema=v1\n# command=walk simulate\n# seed=7\n# steps=3\na,b,c\n1,0.000000000e0,\"x,y\"\n"
        );
    }

    #[test]
    fn ten_significant_digits() {
        assert_eq!(format_real(1.0 / 3.0), "3.333333333e-1");
    }
}
