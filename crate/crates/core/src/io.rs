//! CSV and JSON persistence.
//!
//! Floats are written in shortest round-trip form (`{:?}`), so reading a file
//! back reproduces every value bit for bit. Missing values are empty fields.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::ExtrapolationReport;
use crate::doe::BiFidelityDoE;
use crate::error::{Error, Result};
use crate::errorgrid::{ErrorGrid, GridConfig, GridMeta, MedianGrid, Method, TestMode};

pub const GRID_HEADER: [&str; 8] = ["function", "A", "method", "seed", "n_high", "n_low", "rep", "mse"];
pub const MANIFEST_SCHEMA: u32 = 1;

/// Shortest representation that parses back to the same bits; NaN becomes empty.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_grid_to<W: Write>(out: W, grid: &ErrorGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRID_HEADER)?;
    let a = fmt_opt(grid.meta.param_a);
    let seed = grid.meta.seed.to_string();
    for (h, l, rep, mse) in grid.entries() {
        w.write_record([
            grid.meta.function.as_str(),
            &a,
            grid.meta.method.as_str(),
            &seed,
            &h.to_string(),
            &l.to_string(),
            &rep.to_string(),
            &fmt_f64(mse),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid(path: impl AsRef<Path>, grid: &ErrorGrid) -> Result<()> {
    write_grid_to(create(path.as_ref())?, grid)
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    rec.get(idx)
        .unwrap_or("")
        .trim()
        .parse::<T>()
        .map_err(|e| Error::Parse { line, msg: format!("column '{name}': {e}") })
}

fn parse_opt_f64(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<Option<f64>> {
    match rec.get(idx).map(str::trim) {
        None | Some("") => Ok(None),
        Some(_) => parse_field(rec, idx, name, line).map(Some),
    }
}

/// Reads a long-format grid file. All rows must share one set of metadata.
/// A file with only a header yields an empty grid with blank metadata.
pub fn read_grid_from<R: Read>(input: R) -> Result<ErrorGrid> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("missing column '{name}'") })
    };
    let idx: Vec<usize> = GRID_HEADER.iter().map(|c| col(c)).collect::<Result<_>>()?;

    let mut meta: Option<GridMeta> = None;
    let mut reps: BTreeMap<(usize, usize), BTreeMap<usize, f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != headers.len() {
            return Err(Error::Parse { line, msg: format!("expected {} fields, found {}", headers.len(), rec.len()) });
        }
        let row_meta = GridMeta {
            function: rec[idx[0]].trim().to_string(),
            param_a: parse_opt_f64(&rec, idx[1], "A", line)?,
            method: rec[idx[2]].trim().parse().map_err(|e: Error| Error::Parse { line, msg: e.to_string() })?,
            seed: parse_field(&rec, idx[3], "seed", line)?,
        };
        let h: usize = parse_field(&rec, idx[4], "n_high", line)?;
        let l: usize = parse_field(&rec, idx[5], "n_low", line)?;
        let rep: usize = parse_field(&rec, idx[6], "rep", line)?;
        let mse = parse_opt_f64(&rec, idx[7], "mse", line)?.unwrap_or(f64::NAN);
        match &meta {
            None => meta = Some(row_meta),
            Some(m) if !m.same_as(&row_meta) => {
                return Err(Error::Validation(format!("line {line}: metadata differs from the first row")));
            }
            _ => {}
        }
        if h < 2 || l <= h {
            return Err(Error::Validation(format!("line {line}: cell ({h}, {l}) is outside the grid triangle")));
        }
        if reps.entry((h, l)).or_default().insert(rep, mse).is_some() {
            return Err(Error::Validation(format!("line {line}: duplicate entry for ({h}, {l}, rep {rep})")));
        }
    }

    let meta = meta.unwrap_or(GridMeta { function: String::new(), param_a: None, method: Method::Enumeration, seed: 0 });
    let mut grid = ErrorGrid::new(meta);
    for (cell, by_rep) in reps {
        if by_rep.keys().copied().ne(0..by_rep.len()) {
            return Err(Error::Validation(format!("cell {cell:?}: repetitions are not numbered 0..{}", by_rep.len())));
        }
        grid.cells.insert(cell, by_rep.into_values().collect());
    }
    Ok(grid)
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<ErrorGrid> {
    read_grid_from(File::open(path)?)
}

/// Fails with a validation error if `grid` does not belong to `manifest`.
pub fn check_grid_against(grid: &ErrorGrid, manifest: &ExperimentManifest) -> Result<()> {
    if grid.is_empty() {
        return Ok(());
    }
    let expected = manifest.meta();
    if !grid.meta.same_as(&expected) {
        return Err(Error::Validation(format!("grid metadata {:?} does not match manifest {:?}", grid.meta, expected)));
    }
    Ok(())
}

pub fn write_median_to<W: Write>(out: W, median: &MedianGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n_high", "n_low", "log10_median_mse"])?;
    for (&(h, l), c) in &median.cells {
        w.write_record([h.to_string(), l.to_string(), fmt_f64(c.log10_median)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_median(path: impl AsRef<Path>, median: &MedianGrid) -> Result<()> {
    write_median_to(create(path.as_ref())?, median)
}

/// Dense matrix view of a median grid: rows by descending `n_high`, columns
/// by ascending `n_low`, `None` outside the grid or for invalid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub n_high: Vec<usize>,
    pub n_low: Vec<usize>,
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn heatmap(median: &MedianGrid) -> Heatmap {
    let mut n_high: Vec<usize> = median.cells.keys().map(|k| k.0).collect();
    let mut n_low: Vec<usize> = median.cells.keys().map(|k| k.1).collect();
    n_high.sort_unstable_by(|a, b| b.cmp(a));
    n_high.dedup();
    n_low.sort_unstable();
    n_low.dedup();
    let values = n_high
        .iter()
        .map(|&h| n_low.iter().map(|&l| median.get(h, l).filter(|v| v.is_finite())).collect())
        .collect();
    Heatmap { n_high, n_low, values }
}

pub fn write_heatmap_to<W: Write>(out: W, median: &MedianGrid) -> Result<()> {
    let hm = heatmap(median);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("n_high\\n_low".to_string()).chain(hm.n_low.iter().map(|l| l.to_string())))?;
    for (h, row) in hm.n_high.iter().zip(&hm.values) {
        w.write_record(std::iter::once(h.to_string()).chain(row.iter().map(|v| fmt_opt(*v))))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_heatmap(path: impl AsRef<Path>, median: &MedianGrid) -> Result<()> {
    write_heatmap_to(create(path.as_ref())?, median)
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Everything needed to regenerate a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub schema: u32,
    pub tool_version: String,
    pub function: String,
    pub param_a: Option<f64>,
    pub method: Method,
    pub n_high_max: usize,
    pub n_low_max: usize,
    pub iterations: usize,
    pub seed: u64,
    /// `cv` or `external`.
    pub test_mode: String,
    /// Independent test-set size is `test_size_factor * dim`; absent in cv mode.
    pub test_size_factor: Option<usize>,
    /// Seconds since the Unix epoch; only recorded on request so that
    /// repeated runs produce identical files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

impl ExperimentManifest {
    pub fn new(function: &str, param_a: Option<f64>, method: Method, cfg: &GridConfig, mode: Option<TestMode>) -> Self {
        let (test_mode, test_size_factor) = match (method, mode) {
            (Method::Enumeration, _) => ("external", Some(cfg.test_size_factor)),
            (_, Some(TestMode::External { test_size_factor })) => ("external", Some(test_size_factor)),
            _ => ("cv", None),
        };
        Self {
            schema: MANIFEST_SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            function: function.to_string(),
            param_a,
            method,
            n_high_max: cfg.n_high_max,
            n_low_max: cfg.n_low_max,
            iterations: cfg.iterations,
            seed: cfg.seed,
            test_mode: test_mode.to_string(),
            test_size_factor,
            created_unix: None,
        }
    }

    pub fn with_timestamp(mut self) -> Self {
        self.created_unix =
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).ok().map(|d| d.as_secs());
        self
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta { function: self.function.clone(), param_a: self.param_a, method: self.method, seed: self.seed }
    }
}

pub fn write_manifest(path: impl AsRef<Path>, m: &ExperimentManifest) -> Result<()> {
    write_json(path, m)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<ExperimentManifest> {
    let m: ExperimentManifest = read_json(path)?;
    if m.schema != MANIFEST_SCHEMA {
        return Err(Error::Validation(format!("unsupported manifest schema {}", m.schema)));
    }
    Ok(m)
}

pub fn write_extrapolation_to<W: Write>(out: W, report: &ExtrapolationReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["angle_deg", "median_log10_mse", "is_predicted"])?;
    for r in &report.rows {
        w.write_record([fmt_f64(r.angle_deg), fmt_f64(r.median_log10_mse), r.is_predicted.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_extrapolation(path: impl AsRef<Path>, report: &ExtrapolationReport) -> Result<()> {
    write_extrapolation_to(create(path.as_ref())?, report)
}

/// Design as rows `fidelity,x0..x{N-1},y`, high-fidelity points first.
pub fn write_doe_to<W: Write>(out: W, doe: &BiFidelityDoE) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = doe.low().dim();
    w.write_record(std::iter::once("fidelity".to_string()).chain((0..dim).map(|d| format!("x{d}"))).chain(["y".into()]))?;
    let sets = [("high", doe.high(), doe.responses_high()), ("low", doe.low(), doe.responses_low())];
    for (name, set, y) in sets {
        for (i, p) in set.points().iter().enumerate() {
            let yv = y.map(|v| fmt_f64(v[i])).unwrap_or_default();
            w.write_record(std::iter::once(name.to_string()).chain(p.iter().map(|v| fmt_f64(*v))).chain([yv]))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_doe(path: impl AsRef<Path>, doe: &BiFidelityDoE) -> Result<()> {
    write_doe_to(create(path.as_ref())?, doe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::errorgrid::median_grid;

    fn meta() -> GridMeta {
        GridMeta { function: "booth".into(), param_a: None, method: Method::Enumeration, seed: 7 }
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1e-300, 5e-324, 123456789.123456789, -0.0, f64::MAX, 1.0 / 3.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(fmt_f64(f64::NAN), "");
    }

    #[test]
    fn missing_column_is_named() {
        let text = "function,A,method,seed,n_high,n_low,mse\nbooth,,enumeration,1,2,3,0.5\n";
        match read_grid_from(text.as_bytes()) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("'rep'")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_row_reports_line() {
        let text = "function,A,method,seed,n_high,n_low,rep,mse\n\
                    booth,,enumeration,1,2,3,0,0.5\n\
                    booth,,enumeration,1,2,x,0,0.5\n";
        match read_grid_from(text.as_bytes()) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("n_low"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mixed_metadata_rejected() {
        let text = "function,A,method,seed,n_high,n_low,rep,mse\n\
                    booth,,enumeration,1,2,3,0,0.5\n\
                    booth,,enumeration,2,2,4,0,0.5\n";
        assert!(matches!(read_grid_from(text.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn heatmap_orientation() {
        let mut g = ErrorGrid::new(meta());
        g.cells.insert((2, 3), vec![10.0]);
        g.cells.insert((2, 4), vec![100.0]);
        g.cells.insert((3, 4), vec![1000.0]);
        let m = median_grid(&g);
        let hm = heatmap(&m);
        assert_eq!(hm.n_high, vec![3, 2]);
        assert_eq!(hm.n_low, vec![3, 4]);
        assert_eq!(hm.values, vec![vec![None, Some(3.0)], vec![Some(1.0), Some(2.0)]]);
        let mut buf = Vec::new();
        write_heatmap_to(&mut buf, &m).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n_high\\n_low,3,4\n3,,3.0\n2,1.0,2.0\n");
    }
}
