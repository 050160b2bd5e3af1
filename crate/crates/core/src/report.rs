//! JSON and CSV artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::geometry::PatchLayout;
use crate::harness::LemmaCheckReport;

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// One header row from the field names of `R`, then one row per record.
pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `k, x1 .. xn, r`.
pub fn write_layout_csv(path: &Path, layout: &PatchLayout) -> Result<()> {
    let n = layout.dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["k".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("r".into());
    w.write_record(&header)?;
    for (k, c, r) in layout.rows() {
        let mut rec = vec![k.to_string()];
        rec.extend(c.iter().map(|v| v.to_string()));
        rec.push(r.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format, one row per check and ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaRow<'a> {
    pub name: &'a str,
    pub eps: f64,
    pub value: f64,
    pub reference: Option<f64>,
    pub gap: Option<f64>,
    pub lift: Option<f64>,
    pub limit: f64,
    pub target: f64,
    pub pass: bool,
}

pub fn lemma_rows(report: &LemmaCheckReport) -> Vec<LemmaRow<'_>> {
    let mut rows = Vec::new();
    for e in &report.entries {
        if e.values.is_empty() {
            rows.push(LemmaRow {
                name: &e.name,
                eps: f64::NAN,
                value: f64::NAN,
                reference: None,
                gap: None,
                lift: None,
                limit: e.limit,
                target: e.target,
                pass: e.pass,
            });
        }
        for (i, v) in e.values.iter().enumerate() {
            rows.push(LemmaRow {
                name: &e.name,
                eps: e.eps.get(i).copied().unwrap_or(f64::NAN),
                value: *v,
                reference: e.reference.get(i).copied(),
                gap: e.gaps.get(i).copied(),
                lift: e.lifts.get(i).copied(),
                limit: e.limit,
                target: e.target,
                pass: e.pass,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_layout, DomainSpec};
    use crate::harness::LemmaEntry;

    #[test]
    fn layout_columns() {
        let dir = tempfile::tempdir().unwrap();
        let layout = build_layout(&DomainSpec::unit(3).unwrap(), 0.25, 1.0).unwrap();
        let path = dir.path().join("layout.csv");
        write_layout_csv(&path, &layout).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,x1,x2,x3,r"));
        assert_eq!(lines.next(), Some("0,0.25,0.25,0,0.0625"));
        assert_eq!(text.lines().count(), 1 + layout.len());
    }

    #[test]
    fn lemma_rows_expand_values() {
        let mut r = LemmaCheckReport::default();
        r.push(LemmaEntry::new("a", &[0.5, 0.25], vec![1.0, 2.0], 3.0, 3.0, 0.05, true));
        r.push(LemmaEntry::failed("b", &[0.5], "boom".into()));
        let rows = lemma_rows(&r);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].value, 2.0);
        assert!(!rows[2].pass);
    }
}
