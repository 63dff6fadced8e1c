//! Report documents and their JSON / CSV emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, Tolerances};
use crate::CliError;

/// One tolerance check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub value: f64,
    /// `"<"`, `">"` or `">="` against `bound`.
    pub relation: &'static str,
    pub bound: f64,
    pub passed: bool,
}

impl Verdict {
    pub fn below(check: impl Into<String>, value: f64, bound: f64) -> Self {
        Verdict {
            check: check.into(),
            value,
            relation: "<",
            bound,
            passed: value < bound,
        }
    }

    pub fn above(check: impl Into<String>, value: f64, bound: f64) -> Self {
        Verdict {
            check: check.into(),
            value,
            relation: ">",
            bound,
            passed: value > bound,
        }
    }

    pub fn at_least(check: impl Into<String>, value: f64, bound: f64) -> Self {
        Verdict {
            check: check.into(),
            value,
            relation: ">=",
            bound,
            passed: value >= bound,
        }
    }
}

/// Per-point (or per-case) numeric table.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section {
    pub name: String,
    pub totals: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub table: Table,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Section {
            name: name.into(),
            totals: BTreeMap::new(),
            notes: Vec::new(),
            verdicts: Vec::new(),
            table: Table::default(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// Step sizes and sampling settings used by a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub tolerances: Tolerances,
    pub ambient_fd_step: f64,
    pub stencil_step: f64,
    pub deformation_step: f64,
    pub field_amplitude: f64,
    pub variations: usize,
    pub xi_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub manifold: String,
    pub params: BTreeMap<String, f64>,
    pub ambient: String,
    pub n: usize,
    pub m: usize,
    pub resolution: Vec<usize>,
    pub seed: u64,
    pub p: Vec<usize>,
    pub settings: Settings,
    pub sections: Vec<Section>,
    pub passed: bool,
}

impl Report {
    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.sections
            .iter()
            .flat_map(|s| {
                s.verdicts
                    .iter()
                    .filter(|v| !v.passed)
                    .map(move |v| format!("{}: {} = {:e} (need {} {:e})", s.name, v.check, v.value, v.relation, v.bound))
            })
            .collect()
    }
}

/// Summary document without the per-point tables.
#[derive(Serialize)]
struct Summary<'a> {
    #[serde(flatten)]
    report: SummaryHead<'a>,
    sections: Vec<SummarySection<'a>>,
}

#[derive(Serialize)]
struct SummaryHead<'a> {
    command: &'a str,
    manifold: &'a str,
    params: &'a BTreeMap<String, f64>,
    ambient: &'a str,
    n: usize,
    m: usize,
    resolution: &'a [usize],
    seed: u64,
    p: &'a [usize],
    settings: &'a Settings,
    passed: bool,
}

#[derive(Serialize)]
struct SummarySection<'a> {
    name: &'a str,
    totals: &'a BTreeMap<String, f64>,
    notes: &'a [String],
    verdicts: &'a [Verdict],
    table_file: Option<String>,
}

fn table_path(out: &Path, section: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.{section}.csv"))
}

fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Output(e.to_string()))?;
    w.write_record(&table.columns).map_err(|e| CliError::Output(e.to_string()))?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the report. JSON: one document with everything. CSV: one table
/// file per section next to `out`, and a JSON summary at `out`.
/// Without `out`, the document goes to stdout.
pub fn emit(report: &Report, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    match (format, out) {
        (Format::Json, None) => {
            println!("{}", report.to_json()?);
        }
        (Format::Json, Some(path)) => {
            std::fs::write(path, report.to_json()? + "\n")?;
        }
        (Format::Csv, out) => {
            let mut sections = Vec::new();
            for s in &report.sections {
                let file = match out {
                    Some(path) if !s.table.columns.is_empty() => {
                        let p = table_path(path, &s.name);
                        write_csv(&p, &s.table)?;
                        Some(p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
                    }
                    _ => None,
                };
                sections.push(SummarySection {
                    name: &s.name,
                    totals: &s.totals,
                    notes: &s.notes,
                    verdicts: &s.verdicts,
                    table_file: file,
                });
            }
            let summary = Summary {
                report: SummaryHead {
                    command: &report.command,
                    manifold: &report.manifold,
                    params: &report.params,
                    ambient: &report.ambient,
                    n: report.n,
                    m: report.m,
                    resolution: &report.resolution,
                    seed: report.seed,
                    p: &report.p,
                    settings: &report.settings,
                    passed: report.passed,
                },
                sections,
            };
            let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Output(e.to_string()))?;
            match out {
                Some(path) => std::fs::write(path, text + "\n")?,
                None => {
                    // tables straight to stdout, one block per section
                    println!("{text}");
                    for s in &report.sections {
                        if s.table.columns.is_empty() {
                            continue;
                        }
                        println!("# {}", s.name);
                        println!("{}", s.table.columns.join(","));
                        for row in &s.table.rows {
                            println!("{}", row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
