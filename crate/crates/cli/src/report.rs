use serde::{Deserialize, Serialize};
use sphere_ot::fields::GridSpec;

use crate::config::Command;

/// Column order of the CSV projection.
pub const CSV_HEADER: &str = "name,value,tolerance,equation_tag,pass";

/// One computed quantity. Informational entries have no tolerance and
/// always pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub equation_tag: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: Command,
    pub dim: usize,
    pub seed: u64,
    pub grid: Option<GridSpec>,
    pub pass: bool,
    pub entries: Vec<Entry>,
}

impl Report {
    pub fn new(command: Command, dim: usize, seed: u64) -> Self {
        Self { command, dim, seed, grid: None, pass: true, entries: Vec::new() }
    }

    fn push(&mut self, name: impl Into<String>, value: f64, tolerance: Option<f64>, tag: &str, pass: bool) {
        self.pass &= pass;
        self.entries.push(Entry { name: name.into(), value, tolerance, equation_tag: tag.to_string(), pass });
    }

    pub fn info(&mut self, name: impl Into<String>, value: f64, tag: &str) {
        self.push(name, value, None, tag, true);
    }

    /// Passes when |value| ≤ tol.
    pub fn at_most(&mut self, name: impl Into<String>, value: f64, tol: f64, tag: &str) {
        self.push(name, value, Some(tol), tag, value.abs() <= tol);
    }

    /// Passes when value ≥ −tol.
    pub fn nonnegative(&mut self, name: impl Into<String>, value: f64, tol: f64, tag: &str) {
        self.push(name, value, Some(tol), tag, value >= -tol);
    }

    /// Passes when value ≥ bound; the bound goes in the tolerance column.
    pub fn at_least(&mut self, name: impl Into<String>, value: f64, bound: f64, tag: &str) {
        self.push(name, value, Some(bound), tag, value >= bound);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            let tol = e.tolerance.map(|t| format!("{t:e}")).unwrap_or_default();
            out.push_str(&format!("{},{:e},{},\"{}\",{}\n", e.name, e.value, tol, e.equation_tag, e.pass));
        }
        out
    }
}
