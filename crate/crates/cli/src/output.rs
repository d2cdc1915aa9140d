//! CSV tables with `#` comment headers, written only once complete.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use walsh_core::counterexample::LemmaReport;

pub struct Table {
    comments: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            comments: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, key: impl Into<String>, value: impl ToString) {
        self.comments.push((key.into(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Keeps these comments first, then takes the other table's comments
    /// (except exact repeats), header and rows.
    pub fn absorb(&mut self, other: Table) {
        for c in other.comments {
            if !self.comments.contains(&c) {
                self.comments.push(c);
            }
        }
        self.header = other.header;
        self.rows = other.rows;
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// The standard report layout.
    pub fn from_report(report: &LemmaReport) -> Self {
        let mut t = Table::new(&["lemma", "assertion", "lhs_exact", "rhs_exact", "verdict", "witness"]);
        for (k, v) in report.params() {
            t.comment(k.clone(), v);
        }
        t.extend_report(report);
        t
    }

    pub fn extend_report(&mut self, report: &LemmaReport) {
        for r in report.rows() {
            self.push(vec![
                r.lemma.clone(),
                r.assertion.clone(),
                r.lhs.clone(),
                r.rhs.clone(),
                r.verdict.to_string(),
                r.witness.clone(),
            ]);
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for (k, v) in &self.comments {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().context("flushing csv")
    }

    /// Writes to `path`, or to stdout when no path is given.
    pub fn write(&self, path: Option<&Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        match path {
            Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
            None => {
                let mut stdout = io::stdout().lock();
                stdout.write_all(&bytes)?;
                Ok(stdout.flush()?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_then_quoted_rows() {
        let mut t = Table::new(&["a", "b"]);
        t.comment("n", 3);
        t.push(vec!["1/2".into(), "x, y".into()]);
        assert_eq!(String::from_utf8(t.to_bytes().unwrap()).unwrap(), "# n=3\na,b\n1/2,\"x, y\"\n");
    }
}
