//! Check records, run reports and the files written from them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use fracfp::evolution::MonitorRow;
use fracfp::rates::RateReport;
use fracfp::Field;

/// 17 significant digits.
pub fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug)]
pub struct Record {
    pub name: String,
    pub measured: f64,
    pub predicted: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub note: String,
}

impl Record {
    pub fn new(name: &str, measured: f64, predicted: Option<f64>, tolerance: Option<f64>, pass: bool) -> Record {
        Record { name: name.into(), measured, predicted, tolerance, pass, note: String::new() }
    }

    /// `measured <= limit`.
    pub fn at_most(name: &str, measured: f64, limit: f64) -> Record {
        Record::new(name, measured, None, Some(limit), measured <= limit)
    }

    pub fn failed(name: &str, err: impl std::fmt::Display) -> Record {
        Record { name: name.into(), measured: f64::NAN, predicted: None, tolerance: None, pass: false, note: err.to_string() }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Record {
        self.note = note.into();
        self
    }
}

/// What a suite leaves behind besides its records.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub monitors: Vec<MonitorRow>,
    /// Named steady-state columns on a common grid.
    pub steady: Vec<(String, Field)>,
    pub rates: Vec<RateReport>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub echo: Vec<(String, String)>,
    pub records: Vec<Record>,
    /// Wall-clock time per suite. Printed to the terminal only, so files stay reproducible.
    pub timings: Vec<(String, Duration)>,
    pub artifacts: Artifacts,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let name = self.echo.iter().find(|(k, _)| k == "name").map_or("", |(_, v)| v.as_str());
        let _ = writeln!(s, "scenario {name}");
        for (k, v) in &self.echo {
            let _ = writeln!(s, "  {k} = {v}");
        }
        let _ = writeln!(s);
        for r in &self.records {
            let _ = write!(s, "{} {} measured={}", if r.pass { "pass" } else { "FAIL" }, r.name, g17(r.measured));
            if let Some(p) = r.predicted {
                let _ = write!(s, " predicted={}", g17(p));
            }
            if let Some(t) = r.tolerance {
                let _ = write!(s, " tolerance={}", g17(t));
            }
            if !r.note.is_empty() {
                let _ = write!(s, " ({})", r.note);
            }
            let _ = writeln!(s);
        }
        let passed = self.records.iter().filter(|r| r.pass).count();
        let _ = writeln!(s, "\n{passed}/{} checks passed", self.records.len());
        let _ = writeln!(s, "{}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

pub fn monitors_csv(rows: &[MonitorRow]) -> String {
    let mut s = String::from("t,mass,min,L1m,L2m,Linfm,entropy\n");
    for r in rows {
        let e = r.entropy.map(g17).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{},{},{e}", g17(r.t), g17(r.mass), g17(r.min), g17(r.l1m), g17(r.l2m), g17(r.linfm));
    }
    s
}

pub fn steady_csv(cols: &[(String, Field)]) -> String {
    let Some((_, first)) = cols.first() else {
        return "x\n".into();
    };
    let g = first.grid;
    let mut s = String::from(if g.d == 1 { "x" } else { "x,y" });
    for (name, _) in cols {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for i in 0..g.len() {
        let x = g.node(i);
        s.push_str(&g17(x[0]));
        if g.d == 2 {
            let _ = write!(s, ",{}", g17(x[1]));
        }
        for (_, f) in cols {
            let _ = write!(s, ",{}", g17(f.values[i]));
        }
        s.push('\n');
    }
    s
}

pub fn rates_csv(rows: &[RateReport]) -> String {
    let mut s = format!("{}\n", RateReport::csv_header());
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

#[derive(Debug)]
pub struct IoError {
    pub path: PathBuf,
    pub source: std::io::Error,
}

impl std::fmt::Display for IoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for IoError {}

/// Write `monitors.csv`, `steady.csv`, `rates.csv` and `report.txt` into `dir`.
pub fn emit_outputs(report: &RunReport, dir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(|source| IoError { path: dir.to_path_buf(), source })?;
    let a = &report.artifacts;
    for (file, body) in [
        ("monitors.csv", monitors_csv(&a.monitors)),
        ("steady.csv", steady_csv(&a.steady)),
        ("rates.csv", rates_csv(&a.rates)),
        ("report.txt", report.text()),
    ] {
        let path = dir.join(file);
        fs::write(&path, body).map_err(|source| IoError { path, source })?;
    }
    Ok(())
}
