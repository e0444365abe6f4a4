use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use biasrank::analysis::csv_field;

use crate::commands::CliError;

/// Buffered writer to a file, or to stdout when no path is given.
pub struct Sink {
    inner: Box<dyn Write>,
    label: PathBuf,
}

impl Sink {
    pub fn create(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => {
                let file = File::create(p).map_err(|e| CliError::io(p, e))?;
                Ok(Self {
                    inner: Box::new(BufWriter::new(file)),
                    label: p.to_path_buf(),
                })
            }
            None => Ok(Self {
                inner: Box::new(BufWriter::new(io::stdout().lock())),
                label: PathBuf::from("<stdout>"),
            }),
        }
    }

    pub fn stderr() -> Self {
        Self {
            inner: Box::new(io::stderr()),
            label: PathBuf::from("<stderr>"),
        }
    }

    pub fn line(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.inner, "{text}").map_err(|e| CliError::io(&self.label, e))
    }

    /// Writes one CSV record, quoting fields as needed.
    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<(), CliError> {
        let line = fields.iter().map(|f| csv_field(f.as_ref())).collect::<Vec<_>>().join(",");
        self.line(&line)
    }

    pub fn with<F>(&mut self, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        f(&mut self.inner).map_err(|e| CliError::io(&self.label, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| CliError::io(&self.label, e))
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
