use std::fmt::Write as _;
use std::path::Path;

use super::{ChainStore, SampleRecord};
use crate::nn::io::{fmt_f64, parse_floats};
use crate::{Error, Result};

/// Samples CSV: `z_1..z_n, iteration, accepted, surrogate_depth`, preceded
/// by a `# <provenance>` comment line.
pub fn write_samples(path: &Path, store: &ChainStore, provenance: &str) -> Result<()> {
    let dim = store.samples.first().map_or(0, |s| s.z.len());
    let mut out = String::with_capacity(store.len() * (dim + 3) * 24);
    writeln!(out, "# {provenance}").unwrap();
    for i in 1..=dim {
        write!(out, "z_{i},").unwrap();
    }
    out.push_str("iteration,accepted,surrogate_depth\n");
    for s in &store.samples {
        for z in &s.z {
            out.push_str(&fmt_f64(*z));
            out.push(',');
        }
        writeln!(out, "{},{},{}", s.iteration, s.accepted as u8, s.surrogate_depth).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Refinement log CSV: `outer_iter, err, triggered, evals_total`. A
/// degenerate indicator is written as `nan`.
pub fn write_refinements(path: &Path, store: &ChainStore, provenance: &str) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# {provenance}").unwrap();
    out.push_str("outer_iter,err,triggered,evals_total\n");
    for e in &store.refinements {
        let err = e.err.map_or_else(|| "nan".to_string(), fmt_f64);
        writeln!(out, "{},{},{},{}", e.outer_iter, err, e.triggered as u8, e.evals_total).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a samples CSV written by [`write_samples`]. Acceptance totals are
/// rebuilt from the `accepted` column; refinement events are not stored in
/// this file and come back empty.
pub fn read_samples(path: &Path) -> Result<ChainStore> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty samples file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 4 || cols[cols.len() - 3..] != ["iteration", "accepted", "surrogate_depth"] {
        return Err(Error::Parse(format!("unexpected samples header `{header}`")));
    }
    let dim = cols.len() - 3;
    let mut store = ChainStore::default();
    for (no, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != dim + 3 {
            return Err(Error::Parse(format!("samples row {} has {} columns", no + 1, cells.len())));
        }
        let z = parse_floats(&cells[..dim].join(" "))?;
        let int = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("samples row {}: {e}", no + 1)));
        let accepted = int(cells[dim + 1])? != 0;
        store.proposed += 1;
        store.accepted += accepted as usize;
        store.samples.push(SampleRecord {
            z,
            iteration: int(cells[dim])?,
            accepted,
            surrogate_depth: int(cells[dim + 2])?,
        });
    }
    Ok(store)
}
