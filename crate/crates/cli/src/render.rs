//! Report rendering: aligned tables for humans, CSV for plotting, JSON for
//! machines. All float formatting is fixed-precision so identical configs
//! produce byte-identical output.

use serde::Serialize;

use crate::config::{OutputFormat, RunConfig};

/// One renderable table: a title, a header row, and string cells.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: impl Into<String>, header: &[&str]) -> Self {
        Self {
            title: title.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i >= w.len() {
                    w.push(cell.len());
                } else if cell.len() > w[i] {
                    w[i] = cell.len();
                }
            }
        }
        w
    }

    fn render_text(&self, out: &mut String) {
        let w = self.widths();
        out.push_str(&format!("## {}\n", self.title));
        let fmt_row = |cells: &[String], out: &mut String| {
            let mut parts = Vec::with_capacity(cells.len());
            for (i, cell) in cells.iter().enumerate() {
                parts.push(format!("{:>width$}", cell, width = w[i]));
            }
            out.push_str("| ");
            out.push_str(&parts.join(" | "));
            out.push_str(" |\n");
        };
        fmt_row(&self.header, out);
        let mut sep = Vec::with_capacity(w.len());
        for width in &w {
            sep.push("-".repeat(*width));
        }
        out.push_str("| ");
        out.push_str(&sep.join(" | "));
        out.push_str(" |\n");
        for row in &self.rows {
            fmt_row(row, out);
        }
    }

    fn render_csv(&self, out: &mut String) {
        out.push_str(&format!("# {}\n", self.title));
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
}

/// A complete command report.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub config: RunConfig,
    pub data: serde_json::Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig, data: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            config: config.clone(),
            data,
            tables: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Table => {
                let mut out = String::new();
                out.push_str(&format!("# fleetwatt {}\n", self.command));
                for t in &self.tables {
                    out.push('\n');
                    t.render_text(&mut out);
                }
                for n in &self.notes {
                    out.push_str(&format!("\nnote: {n}\n"));
                }
                out
            }
            OutputFormat::Csv => {
                let mut out = String::new();
                for (i, t) in self.tables.iter().enumerate() {
                    if i > 0 {
                        out.push('\n');
                    }
                    t.render_csv(&mut out);
                }
                out
            }
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serialization");
                s.push('\n');
                s
            }
        }
    }
}

pub fn f1(v: f64) -> String {
    format!("{v:.1}")
}

pub fn f2(v: f64) -> String {
    format!("{v:.2}")
}

pub fn f3(v: f64) -> String {
    format!("{v:.3}")
}

pub fn f4(v: f64) -> String {
    format!("{v:.4}")
}
