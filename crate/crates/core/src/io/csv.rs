//! Plain CSV output with round-trip-safe numbers.

use std::path::Path;

use super::container::write_atomic;
use crate::error::Result;
use crate::integrators::FieldTrajectory;
use crate::pipeline::{ErrorReport, LooReport, ParamErrors, StudyReport};

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }
}

pub const STUDY_COLUMNS: [&str; 13] = [
    "level",
    "h",
    "H",
    "dtF",
    "dtG",
    "err_fine_h1",
    "err_coarse_h1",
    "err_nirb_h1",
    "err_rect_h1",
    "err_fine_l2",
    "err_coarse_l2",
    "err_nirb_l2",
    "err_rect_l2",
];

/// One row per level and a final `slopes` row (slopes against `h`).
pub fn study_table(report: &StudyReport) -> Table {
    let mut t = Table::new(&STUDY_COLUMNS);
    for (i, r) in report.rows.iter().enumerate() {
        let mut row = vec![i.to_string(), num(r.h), num(r.big_h), num(r.dt_f), num(r.dt_g)];
        row.extend(r.h1.iter().chain(&r.l2).map(|&v| num(v)));
        t.push(row);
    }
    let mut row = vec!["slopes".to_string(), String::new(), String::new(), String::new(), String::new()];
    row.extend(report.slopes.iter().map(|&v| num(v)));
    t.push(row);
    t
}

pub fn loo_table(report: &LooReport) -> Table {
    let mut t = Table::new(&["param", "err_rect_h1", "err_nirb_h1", "err_projection_h1", "err_coarse_h1"]);
    for r in &report.rows {
        let p = r.param.iter().map(|&v| num(v)).collect::<Vec<_>>().join(" ");
        t.push(vec![p, num(r.rectified), num(r.plain), num(r.projection), num(r.coarse)]);
    }
    t.push(vec![
        "max".into(),
        num(report.max_rectified()),
        num(report.max_plain()),
        num(report.max_projection()),
        num(report.max_coarse()),
    ]);
    t
}

/// One row per evaluated parameter.
pub fn param_error_table(rows: &[ParamErrors]) -> Table {
    let mut t = Table::new(&[
        "param",
        "reference",
        "err_coarse_h1",
        "err_nirb_h1",
        "err_rect_h1",
        "err_coarse_l2",
        "err_nirb_l2",
        "err_rect_l2",
    ]);
    for r in rows {
        let p = r.param.iter().map(|&v| num(v)).collect::<Vec<_>>().join(" ");
        t.push(vec![
            p,
            r.reference.to_string(),
            num(r.coarse.h1),
            num(r.plain.h1),
            num(r.rectified.h1),
            num(r.coarse.l2),
            num(r.plain.l2),
            num(r.rectified.l2),
        ]);
    }
    t
}

/// Per-step errors and reference norms.
pub fn error_table(report: &ErrorReport, times: &[f64]) -> Table {
    let mut t = Table::new(&["n", "t", "err_l2", "err_h1", "ref_l2", "ref_h1"]);
    for (n, &tn) in times.iter().enumerate() {
        t.push(vec![
            n.to_string(),
            num(tn),
            num(report.l2_curve[n]),
            num(report.h1_curve[n]),
            num(report.l2_ref[n]),
            num(report.h1_ref[n]),
        ]);
    }
    t
}

/// Long format: one line per component, time index and node.
pub fn trajectory_table(fields: &[FieldTrajectory]) -> Table {
    let mut t = Table::new(&["component", "n", "t", "node", "value"]);
    for (c, f) in fields.iter().enumerate() {
        for (n, row) in f.rows().iter().enumerate() {
            let tn = num(f.grid().time(n));
            for (i, v) in row.iter().enumerate() {
                t.push(vec![c.to_string(), n.to_string(), tn.clone(), i.to_string(), num(*v)]);
            }
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_roundtrip() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.to_text(), "a,b\n1,2\n");
    }
}
