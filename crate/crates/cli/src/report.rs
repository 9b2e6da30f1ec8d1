//! CSV output: comma separated, header row, LF endings, floats with 17
//! significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Text(s) => {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) => format_float(*v),
        Cell::Bool(v) => v.to_string(),
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(format_cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    AtMost,
    AtLeast,
}

/// One pass/fail check.
#[derive(Clone, Debug)]
pub struct Gate {
    pub case: String,
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
    pub note: String,
}

impl Gate {
    pub fn at_most(case: &str, name: &str, value: f64, threshold: f64) -> Self {
        Self::new(case, name, value, Comparison::AtMost, threshold)
    }

    pub fn at_least(case: &str, name: &str, value: f64, threshold: f64) -> Self {
        Self::new(case, name, value, Comparison::AtLeast, threshold)
    }

    fn new(case: &str, name: &str, value: f64, comparison: Comparison, threshold: f64) -> Self {
        let passed = match comparison {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
        };
        Self { case: case.into(), name: name.into(), value, comparison, threshold, passed, note: String::new() }
    }

    /// A gate that could not be evaluated.
    pub fn failed(case: &str, name: &str, note: impl Into<String>) -> Self {
        Self {
            case: case.into(),
            name: name.into(),
            value: f64::NAN,
            comparison: Comparison::AtMost,
            threshold: f64::NAN,
            passed: false,
            note: note.into(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn describe(&self) -> String {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        let mut s = format!("{}/{}: {:.3e} {op} {:.3e}", self.case, self.name, self.value, self.threshold);
        if !self.note.is_empty() {
            let _ = write!(s, " ({})", self.note);
        }
        s
    }
}

pub fn gates_table(experiment: &str, gates: &[Gate]) -> Table {
    let mut t = Table::new(&["experiment", "case", "gate", "value", "comparison", "threshold", "passed", "note"]);
    for g in gates {
        let op = match g.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        t.push(vec![
            experiment.into(),
            g.case.clone().into(),
            g.name.clone().into(),
            g.value.into(),
            op.into(),
            g.threshold.into(),
            g.passed.into(),
            g.note.clone().into(),
        ]);
    }
    t
}

/// Long-format time series: `experiment_id, t, node_index, value`.
#[derive(Clone, Debug, Default)]
pub struct Traces {
    rows: Vec<(String, f64, usize, f64)>,
}

impl Traces {
    pub fn push(&mut self, id: &str, t: f64, node: usize, value: f64) {
        self.rows.push((id.to_string(), t, node, value));
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: Traces) {
        self.rows.extend(other.rows);
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["experiment_id", "t", "node_index", "value"]);
        for (id, time, node, v) in &self.rows {
            t.push(vec![id.clone().into(), (*time).into(), (*node).into(), (*v).into()]);
        }
        t
    }
}

/// Everything one experiment run produces.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub experiment: String,
    pub results: Table,
    pub gates: Vec<Gate>,
    pub traces: Traces,
    pub plots: Vec<crate::plots::Plot>,
    /// Free-form notes written next to the tables (conventions, sign choices).
    pub notes: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        !self.gates.is_empty() && self.gates.iter().all(|g| g.passed)
    }

    pub fn failing(&self) -> Vec<&Gate> {
        self.gates.iter().filter(|g| !g.passed).collect()
    }

    /// Writes `<name>.csv`, `<name>-gates.csv` and, when present,
    /// `<name>-traces.csv` and `<name>-notes.txt`. Returns the paths written.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |file: String, body: String| -> std::io::Result<()> {
            let path = dir.join(file);
            std::fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };
        put(format!("{}.csv", self.experiment), self.results.to_csv())?;
        put(format!("{}-gates.csv", self.experiment), gates_table(&self.experiment, &self.gates).to_csv())?;
        if !self.traces.is_empty() {
            put(format!("{}-traces.csv", self.experiment), self.traces.to_table().to_csv())?;
        }
        if !self.notes.is_empty() {
            put(format!("{}-notes.txt", self.experiment), self.notes.iter().map(|n| format!("{n}\n")).collect())?;
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, -2.5e17, 0.0] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), 0.5.into()]);
        assert_eq!(t.to_csv(), "a,b\n\"x,y\",5.0000000000000000e-1\n");
    }

    #[test]
    fn gates_compare() {
        assert!(Gate::at_most("c", "g", 1.0, 1.0).passed);
        assert!(!Gate::at_least("c", "g", 0.5, 1.0).passed);
        assert!(!Gate::at_most("c", "g", f64::NAN, 1.0).passed);
    }
}
