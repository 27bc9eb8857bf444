//! Plain-text artifacts: sweep and ACE tables, saliency matrices, graymaps.

use std::io::Write;

use ndarray::Array2;

use crate::ace::{AceResult, InterventionSweep, Method};
use crate::error::Result;

const HEADER: [&str; 5] = ["alpha", "interventional_expectation", "ace", "predictive_variance", "method"];

/// One row per grid point; ACE is taken against the sweep's trapezoidal mean.
pub fn write_sweep_csv<W: Write>(w: W, sweep: &InterventionSweep) -> Result<()> {
    let baseline = sweep.trapezoid_mean();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HEADER)?;
    for (a, ie) in sweep.alphas().iter().zip(&sweep.ie) {
        out.write_record([a.to_string(), ie.to_string(), (ie - baseline).to_string(), String::new(), sweep.method.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// ACE rows preceded by a `# baseline=<value>` comment line.
pub fn write_ace_csv<W: Write>(mut w: W, rows: &[AceResult], method: Method) -> Result<()> {
    if let Some(first) = rows.first() {
        writeln!(w, "# baseline={}", first.baseline)?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HEADER)?;
    for r in rows {
        let var = r.predictive_variance.map(|v| v.to_string()).unwrap_or_default();
        out.write_record([r.alpha.to_string(), r.ie.to_string(), r.ace.to_string(), var, method.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Matrix with a header of column names and, when given, a leading label column.
pub fn write_matrix_csv<W: Write>(w: W, m: &Array2<f64>, columns: &[String], rows: Option<&[String]>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = Vec::with_capacity(columns.len() + 1);
    if rows.is_some() {
        header.push(String::new());
    }
    header.extend(columns.iter().cloned());
    out.write_record(&header)?;
    for (r, row) in m.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(row.len() + 1);
        if let Some(labels) = rows {
            rec.push(labels[r].clone());
        }
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Plain (P2) graymap, values min-max scaled to 0..=255. A constant matrix maps to 0.
pub fn write_pgm<W: Write>(mut w: W, m: &Array2<f64>) -> Result<()> {
    let (lo, hi) = m.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    writeln!(w, "P2\n{} {}\n255", m.ncols(), m.nrows())?;
    for row in m.rows() {
        let line: Vec<String> = row
            .iter()
            .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
            .map(|g| g.to_string())
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
