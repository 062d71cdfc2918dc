//! CSV tables for estimator reports.
//!
//! Files are UTF-8, comma separated, with `#`-prefixed comment lines
//! before the header row. Floats use the shortest round-trip decimal form,
//! so identical reports give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::estimators::{
    CorrelationCurve, CovarianceEstimate, CubeMixReport, DiscrepancyReport, EnergyPaths,
    EscapeReport, MlltReport,
};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable {
            comments: vec![],
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn comment(mut self, c: impl Into<String>) -> Self {
        self.comments.push(c.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        let _ = writeln!(
            out,
            "{}",
            self.columns
                .iter()
                .map(|c| quote(c))
                .collect::<Vec<_>>()
                .join(",")
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}",
                r.iter().map(|c| quote(c)).collect::<Vec<_>>().join(",")
            );
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }

    /// Parse a table written by [`CsvTable::render`].
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut t = CsvTable::default();
        let mut header = false;
        for (i, line) in text.lines().enumerate() {
            if let Some(c) = line.strip_prefix('#') {
                if header {
                    return Err(format!("line {}: comment after header", i + 1));
                }
                t.comments.push(c.trim_start().to_string());
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields = split_csv(line).map_err(|e| format!("line {}: {e}", i + 1))?;
            if !header {
                t.columns = fields;
                header = true;
            } else {
                if fields.len() != t.columns.len() {
                    return Err(format!(
                        "line {}: {} fields, header has {}",
                        i + 1,
                        fields.len(),
                        t.columns.len()
                    ));
                }
                t.rows.push(fields);
            }
        }
        if !header {
            return Err("no header row".into());
        }
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

fn split_csv(line: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        match (quoted, c) {
            (false, ',') => out.push(std::mem::take(&mut cur)),
            (false, '"') if cur.is_empty() => quoted = true,
            (true, '"') => {
                if chars.peek() == Some(&'"') {
                    cur.push('"');
                    chars.next();
                } else {
                    quoted = false;
                }
            }
            (_, c) => cur.push(c),
        }
    }
    if quoted {
        return Err("unterminated quote".into());
    }
    out.push(cur);
    Ok(out)
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

fn vec_str(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

pub fn mllt_table(r: &MlltReport) -> CsvTable {
    let d = r.shift.len();
    let mut cols: Vec<String> = (0..d).map(|i| format!("z{i}")).collect();
    cols.extend((0..d).map(|i| format!("u{i}")));
    for c in [
        "empirical",
        "se",
        "reference",
        "occupancy",
        "excluded",
        "resolved",
    ] {
        cols.push(c.into());
    }
    let mut t = CsvTable {
        columns: cols,
        ..Default::default()
    };
    t.comments.push("report: mllt".into());
    t.comments.push(format!(
        "n: {}; samples: {}; scale: {}",
        r.n,
        r.samples,
        f(r.scale)
    ));
    t.comments.push(format!(
        "shift: {}; drift: {}",
        vec_str(&r.shift),
        vec_str(&r.drift)
    ));
    t.comments.push(format!(
        "sigma: {}",
        r.sigma
            .iter()
            .map(|row| vec_str(row))
            .collect::<Vec<_>>()
            .join(" | ")
    ));
    t.comments.push(format!(
        "sup_deviation: {}; sup_cell_relative: {}; threshold: {}; apriori_statistic: {}; total_mass: {}; pass: {}",
        f(r.sup_deviation),
        f(r.sup_cell_relative),
        f(r.threshold),
        f(r.apriori_statistic),
        f(r.total_mass),
        r.pass
    ));
    for c in &r.cells {
        let mut row: Vec<String> = c.cell.coords().iter().map(|z| z.to_string()).collect();
        row.extend(c.rescaled.iter().map(|u| f(*u)));
        row.extend([
            f(c.empirical),
            f(c.se),
            f(c.reference),
            f(c.occupancy),
            c.excluded.to_string(),
            c.resolved.to_string(),
        ]);
        t.push(row);
    }
    t
}

pub fn correlation_table(r: &CorrelationCurve) -> CsvTable {
    let mut t = CsvTable::new(&["n", "estimate", "se", "target"]);
    t.comments.push("report: correlation".into());
    t.comments.push(format!(
        "observable: {}; mu_phi: {} (se {}); pass: {}",
        r.observable,
        f(r.mu_phi.value),
        f(r.mu_phi.se),
        r.pass.map_or("undetermined".to_string(), |p| p.to_string())
    ));
    let target = r.target.map_or("nan".to_string(), f);
    for row in &r.rows {
        t.push(vec![
            row.n.to_string(),
            f(row.estimate.value),
            f(row.estimate.se),
            target.clone(),
        ]);
    }
    t
}

pub fn cubemix_table(r: &CubeMixReport) -> CsvTable {
    let mut t = CsvTable::new(&["time", "size", "center", "estimate", "se", "target"]);
    t.comments.push("report: cubemix".into());
    t.comments.push(format!(
        "observables: {} x {}; deviation_origin: {}; deviation_uniform: {}",
        r.observables.0,
        r.observables.1,
        r.deviation_origin.map_or("nan".into(), f),
        r.deviation_uniform.map_or("nan".into(), f)
    ));
    let target = r.target.map_or("nan".to_string(), f);
    for row in &r.rows {
        t.push(vec![
            f(row.time),
            row.size.to_string(),
            row.center
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            f(row.estimate.value),
            f(row.estimate.se),
            target.clone(),
        ]);
    }
    t
}

pub fn discrepancy_table(r: &DiscrepancyReport) -> CsvTable {
    let mut t = CsvTable::new(&[
        "size",
        "perturbed",
        "perturbed_se",
        "reference",
        "reference_se",
        "deviation",
        "mean_abs_discrepancy",
        "discrepancy_se",
        "target",
    ]);
    t.comments.push("report: discrepancy".into());
    t.comments.push(format!(
        "observables: {} x {}; time: {}",
        r.observables.0,
        r.observables.1,
        f(r.time)
    ));
    let target = r.target.map_or("nan".to_string(), f);
    for row in &r.rows {
        t.push(vec![
            row.size.to_string(),
            f(row.perturbed.value),
            f(row.perturbed.se),
            f(row.reference.value),
            f(row.reference.se),
            row.deviation.map_or("nan".into(), f),
            f(row.mean_abs_discrepancy.value),
            f(row.mean_abs_discrepancy.se),
            target.clone(),
        ]);
    }
    t
}

pub fn escape_table(r: &EscapeReport) -> CsvTable {
    let mut t = CsvTable::new(&["n", "fraction", "se"]);
    t.comments.push("report: escape".into());
    t.comments.push(format!(
        "radius: {}; initial cells: {}",
        f(r.radius),
        r.initial_cells.join(" ")
    ));
    for row in &r.rows {
        t.push(vec![
            row.n.to_string(),
            f(row.fraction.value),
            f(row.fraction.se),
        ]);
    }
    t
}

pub fn covariance_table(r: &CovarianceEstimate) -> CsvTable {
    let mut t = CsvTable::new(&["quantity", "i", "j", "value", "se"]);
    t.comments.push("report: covariance".into());
    t.comments.push(format!(
        "n: {}; samples: {}; degenerate axes: {:?}",
        r.n, r.samples, r.degenerate_axes
    ));
    for (i, (m, s)) in r.drift.iter().zip(&r.drift_se).enumerate() {
        t.push(vec![
            "drift".into(),
            i.to_string(),
            String::new(),
            f(*m),
            f(*s),
        ]);
    }
    for i in 0..r.sigma.len() {
        for j in 0..r.sigma.len() {
            t.push(vec![
                "sigma".into(),
                i.to_string(),
                j.to_string(),
                f(r.sigma[i][j]),
                f(r.sigma_se[i][j]),
            ]);
        }
    }
    t
}

/// Marginals of energy paths, one column per grid time.
pub fn energy_table(r: &EnergyPaths) -> CsvTable {
    let mut cols = vec!["trajectory".to_string()];
    cols.extend(r.t_grid.iter().map(|t| format!("t={}", f(*t))));
    let mut t = CsvTable {
        columns: cols,
        ..Default::default()
    };
    t.comments.push("report: energy_paths".into());
    t.comments.push(format!(
        "n: {}; kept: {}; dropped: {}",
        r.n,
        r.paths.len(),
        r.dropped.total()
    ));
    for (i, p) in r.paths.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.iter().map(|v| f(*v)));
        t.push(row);
    }
    t
}
