//! CSV output with a commented configuration header.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// A CSV table preceded by `# key = value` lines describing the run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            header: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.header.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    /// Writes to `path`, or stdout when `path` is `None` or `-`.
    pub fn emit(&self, path: Option<&Path>) -> io::Result<()> {
        match path {
            Some(p) if p != Path::new("-") => std::fs::write(p, self.render()),
            _ => {
                use io::Write;
                io::stdout().write_all(self.render().as_bytes())
            }
        }
    }
}
