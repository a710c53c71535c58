//! CSV, JSON and plain-text renderings of a sweep table.

use std::io::{self, Write};

use lcc::sim::{RunRow, SweepTable};
use serde::Serialize;

/// One run as written to CSV and JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CsvRow {
    pub run_id: usize,
    pub seed: u64,
    pub success: bool,
    #[serde(rename = "M_used")]
    pub m_used: usize,
    #[serde(rename = "U_src")]
    pub u_src: usize,
    #[serde(rename = "U_user")]
    pub u_user: usize,
    #[serde(rename = "D_elements")]
    pub d_elements: usize,
    pub ticks: u64,
}

impl From<&RunRow> for CsvRow {
    fn from(r: &RunRow) -> Self {
        Self {
            run_id: r.run_id,
            seed: r.seed,
            success: r.success,
            m_used: r.m_used,
            u_src: r.u_src,
            u_user: r.u_user,
            d_elements: r.d_elements,
            ticks: r.ticks,
        }
    }
}

pub fn write_csv<W: Write>(table: &SweepTable, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &table.rows {
        w.serialize(CsvRow::from(row)).map_err(io::Error::other)?;
    }
    w.flush()
}

pub fn write_json(table: &SweepTable, out: &mut dyn Write) -> io::Result<()> {
    let rows: Vec<CsvRow> = table.rows.iter().map(CsvRow::from).collect();
    serde_json::to_writer_pretty(&mut *out, &rows).map_err(io::Error::other)?;
    writeln!(out)
}

pub fn print_table(table: &SweepTable, out: &mut dyn Write) -> io::Result<()> {
    writeln!(
        out,
        "{:>6} {:>20} {:>7} {:>6} {:>8} {:>8} {:>10} {:>6}  error",
        "run_id", "seed", "success", "M_used", "U_src", "U_user", "D_elements", "ticks"
    )?;
    for r in &table.rows {
        writeln!(
            out,
            "{:>6} {:>20} {:>7} {:>6} {:>8} {:>8} {:>10} {:>6}  {}",
            r.run_id,
            r.seed,
            r.success,
            r.m_used,
            r.u_src,
            r.u_user,
            r.d_elements,
            r.ticks,
            r.error.as_deref().unwrap_or("")
        )?;
    }
    let ok = table.rows.iter().filter(|r| r.success).count();
    writeln!(
        out,
        "{ok}/{} runs succeeded, {} silent wrong",
        table.rows.len(),
        table.silent_wrong()
    )
}
