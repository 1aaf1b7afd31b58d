use std::path::Path;

use hbkmr::EffectEstimate;

use crate::error::{CliError, CliResult};

/// Buffered CSV writer that reports failures with the file name.
pub struct CsvOut {
    path: std::path::PathBuf,
    inner: csv::Writer<std::fs::File>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> CliResult<Self> {
        let inner = csv::Writer::from_path(path).map_err(|e| CliError::user(format!("cannot write {}: {e}", path.display())))?;
        let mut out = CsvOut { path: path.to_path_buf(), inner };
        out.row(header.iter().map(|s| s.to_string()))?;
        Ok(out)
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> CliResult<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.inner.write_record(&fields).map_err(|e| CliError::user(format!("cannot write {}: {e}", self.path.display())))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.inner.flush().map_err(|e| CliError::user(format!("cannot write {}: {e}", self.path.display())))
    }
}

pub const ESTIMATE_HEADER: [&str; 5] = ["estimate", "sd", "lower95", "upper95", "width"];

pub fn estimate_fields(e: &EffectEstimate) -> [String; 5] {
    [e.estimate, e.sd, e.lower95, e.upper95, e.width()].map(|v| v.to_string())
}

/// Percentage change from `a` to `b`, rounded to 0.1 and free of negative zero.
pub fn percent_change(a: f64, b: f64) -> f64 {
    let pct = 100.0 * (b - a) / a;
    (pct * 10.0).round() / 10.0 + 0.0
}

/// File-name-safe version of a column name.
pub fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
