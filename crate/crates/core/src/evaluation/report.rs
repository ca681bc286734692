use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Tab-separated per-topic table followed by a summary block.
///
/// ```text
/// topic<TAB>col_1<TAB>…<TAB>col_m
/// 0<TAB>v<TAB>…
/// …
///
/// [summary]
/// key<TAB>value
/// …
/// ```
///
/// Numbers are printed with six decimals; a missing value is `-`. Every
/// line, including the last, ends with `\n`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub summary: Vec<(String, String)>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

impl Report {
    pub fn new(columns: &[&str]) -> Self {
        Report {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Report::default()
        }
    }

    /// Adds or fills a column; missing rows are extended with `None`.
    pub fn set_column(&mut self, name: &str, values: &[Option<f64>]) {
        let j = match self.columns.iter().position(|c| c == name) {
            Some(j) => j,
            None => {
                self.columns.push(name.to_string());
                for row in &mut self.rows {
                    row.push(None);
                }
                self.columns.len() - 1
            }
        };
        while self.rows.len() < values.len() {
            self.rows.push(vec![None; self.columns.len()]);
        }
        for (row, v) in self.rows.iter_mut().zip(values) {
            row[j] = *v;
        }
    }

    pub fn push_summary(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn push_summary_value(&mut self, key: &str, value: Option<f64>) {
        self.push_summary(key, cell(value));
    }

    pub fn render(&self) -> String {
        let mut s = String::from("topic");
        for c in &self.columns {
            write!(s, "\t{c}").unwrap();
        }
        s.push('\n');
        for (t, row) in self.rows.iter().enumerate() {
            write!(s, "{t}").unwrap();
            for v in row {
                write!(s, "\t{}", cell(*v)).unwrap();
            }
            s.push('\n');
        }
        s.push_str("\n[summary]\n");
        for (k, v) in &self.summary {
            writeln!(s, "{k}\t{v}").unwrap();
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}
