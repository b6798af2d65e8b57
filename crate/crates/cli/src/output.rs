//! Output files, number formatting and error classification.

use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use runoff_core::Error;

/// Exit status for rejected input.
pub const EXIT_VALIDATION: u8 = 2;
/// Exit status when a size cap or allocation limit stops the run.
pub const EXIT_RESOURCE: u8 = 3;

/// A failure carrying its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn validation(flag: &str, reason: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: format!("invalid --{flag}: {reason}"),
        }
    }

    pub fn other(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid { field, reason } => Failure::validation(&field.replace('_', "-"), reason),
            Error::Domain { .. } | Error::Unsupported(_) => Failure {
                code: EXIT_VALIDATION,
                message: e.to_string(),
            },
            Error::Resource(_) => Failure {
                code: EXIT_RESOURCE,
                message: e.to_string(),
            },
            Error::Inconsistent(_) | Error::Overflow => Failure::other(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::other(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::other(format!("json error: {e}"))
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Where an output goes: a file, or stdout for `-`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sink {
    Stdout,
    File(PathBuf),
}

impl Sink {
    pub fn parse(s: &str) -> Sink {
        if s == "-" {
            Sink::Stdout
        } else {
            Sink::File(PathBuf::from(s))
        }
    }

    /// Fail early, before any computation, if the file cannot be written.
    pub fn check(&self, flag: &str) -> CliResult<()> {
        let Sink::File(path) = self else {
            return Ok(());
        };
        let existed = path.exists();
        if path.is_dir() {
            return Err(Failure::validation(flag, format!("{} is a directory", path.display())));
        }
        OpenOptions::new()
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| Failure::validation(flag, format!("cannot write {}: {e}", path.display())))?;
        if !existed {
            let _ = std::fs::remove_file(path);
        }
        Ok(())
    }

    pub fn write_all(&self, bytes: &[u8]) -> CliResult<()> {
        match self {
            Sink::Stdout => {
                let mut out = io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
            }
            Sink::File(path) => std::fs::write(path, bytes)?,
        }
        Ok(())
    }

    pub fn writer(&self) -> CliResult<Box<dyn Write>> {
        Ok(match self {
            Sink::Stdout => Box::new(BufWriter::new(io::stdout())),
            Sink::File(path) => Box::new(BufWriter::new(File::create(path)?)),
        })
    }
}

pub fn check_dir(flag: &str, dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::validation(flag, format!("cannot create {}: {e}", dir.display())))?;
    Sink::File(dir.join(".runoff-write-check")).check(flag)
}

/// `x` with 10 significant digits, trailing zeros dropped.
pub fn csv_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.9e}");
        let (mantissa, exponent) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exponent}")
    }
}

pub fn write_json(sink: &Sink, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    sink.write_all(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_numbers() {
        assert_eq!(csv_num(0.0), "0");
        assert_eq!(csv_num(1.0), "1");
        assert_eq!(csv_num(0.25), "0.25");
        assert_eq!(csv_num(0.7320508075688772), "0.7320508076");
        assert_eq!(csv_num(123456.789012345), "123456.789");
        assert_eq!(csv_num(-2.5), "-2.5");
        assert_eq!(csv_num(1.5e-7), "1.5e-7");
        assert_eq!(csv_num(f64::INFINITY), "inf");
        assert_eq!(csv_num(3e12), "3e12");
    }

    #[test]
    fn errors_map_to_exit_codes() {
        let f: Failure = Error::Invalid {
            field: "alpha".into(),
            reason: "bad".into(),
        }
        .into();
        assert_eq!(f.code, EXIT_VALIDATION);
        assert!(f.message.contains("--alpha"));
        let f: Failure = Error::Resource("big".into()).into();
        assert_eq!(f.code, EXIT_RESOURCE);
    }
}
