//! Minimal CSV tables for experiment output.
//!
//! Documented headers:
//!
//! | command              | columns                                     |
//! |----------------------|---------------------------------------------|
//! | `attack covariance`  | `n,m,gamma,beta,trial,label,score`          |
//! | `simulate detect-roc`| `noise_sd,trials,auc`                       |
//! | `rose`               | `bin,start,end,count`                       |
//! | `attack average`     | `file,statistic,p_value,label`              |

use std::fmt::Display;
use std::fs;
use std::path::Path;

use crate::error::Result;

pub const COVARIANCE_HEADER: [&str; 7] = ["n", "m", "gamma", "beta", "trial", "label", "score"];
pub const DETECT_ROC_HEADER: [&str; 3] = ["noise_sd", "trials", "auc"];
pub const ROSE_HEADER: [&str; 4] = ["bin", "start", "end", "count"];
pub const AVERAGE_HEADER: [&str; 4] = ["file", "statistic", "p_value", "label"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Append a row; panics if the width differs from the header.
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn push_display(&mut self, row: &[&dyn Display]) {
        self.push(row.iter().map(|v| v.to_string()).collect());
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>, force: bool) -> Result<()> {
        let path = path.as_ref();
        super::guard_overwrite(path, force)?;
        fs::write(path, self.render())?;
        Ok(())
    }
}
