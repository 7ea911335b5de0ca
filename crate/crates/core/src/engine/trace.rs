use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// One recorded iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    #[serde(rename = "iter")]
    pub k: usize,
    /// `‖x − x*‖`, present only when a reference solution was supplied.
    pub primal_error: Option<f64>,
    /// `‖z − T(z)‖`.
    pub fixed_point_residual: f64,
    pub max_violation: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// First recorded iteration whose primal error is at most `tol`.
    pub fn first_below(&self, tol: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.primal_error.is_some_and(|e| e <= tol))
            .map(|r| r.k)
    }

    /// CSV with header `iter,primal_error,fixed_point_residual,max_violation,objective`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record([
                "iter",
                "primal_error",
                "fixed_point_residual",
                "max_violation",
                "objective",
            ])?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
