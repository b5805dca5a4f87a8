//! Time series of snapshot diagnostics, stored column-wise by name, with
//! CSV serialisation and a column manifest.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Schema version written into manifests and JSON reports.
pub const SCHEMA_VERSION: u32 = 1;

/// One named column and what it holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub description: String,
}

/// Column manifest written next to every record CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub nu: f64,
    pub columns: Vec<ColumnInfo>,
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    /// Non-finite values or growth past the blow-up factor.
    Diverged,
}

/// Snapshot series of a run. Every row holds one value per column; `times`
/// is strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub nu: f64,
    pub columns: Vec<ColumnInfo>,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub outcome: RunOutcome,
    /// Time at which divergence was detected, if it was.
    pub diverged_at: Option<f64>,
}

impl TrajectoryRecord {
    pub fn new(nu: f64, columns: Vec<ColumnInfo>) -> Self {
        TrajectoryRecord { nu, columns, times: Vec::new(), rows: Vec::new(), outcome: RunOutcome::Completed, diverged_at: None }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn has(&self, name: &str) -> bool {
        self.column_index(name).is_some()
    }

    /// Appends a snapshot. Times must increase strictly.
    pub fn push(&mut self, t: f64, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::InvalidInput(format!("snapshot time {t} not after {last}")));
            }
        }
        self.times.push(t);
        self.rows.push(row);
        Ok(())
    }

    /// The named series; fails with [`Error::MissingSeries`] when absent.
    pub fn series(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name).ok_or_else(|| Error::MissingSeries(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Last value of the named series.
    pub fn last(&self, name: &str) -> Result<f64> {
        self.series(name)?.last().copied().ok_or_else(|| Error::MissingSeries(name.to_string()))
    }

    pub fn manifest(&self) -> Manifest {
        let mut columns = vec![ColumnInfo { name: "t".into(), description: "snapshot time".into() }];
        columns.extend(self.columns.iter().cloned());
        Manifest { schema_version: SCHEMA_VERSION, nu: self.nu, columns }
    }

    /// Writes `t` followed by every column, one row per snapshot. Values use
    /// Rust's shortest round-trip formatting, so a read-back is exact.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        wr.write_record(&header).map_err(csv_err)?;
        for (t, row) in self.times.iter().zip(&self.rows) {
            let mut rec = vec![format!("{t:?}")];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            wr.write_record(&rec).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`write_csv`](Self::write_csv). Descriptions come
    /// from the manifest when given.
    pub fn read_csv<R: Read>(r: R, manifest: Option<&Manifest>, nu: f64) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(csv_err)?.clone();
        if header.get(0) != Some("t") {
            return Err(Error::InvalidInput("record CSV must start with a `t` column".into()));
        }
        let describe = |name: &str| {
            manifest
                .and_then(|m| m.columns.iter().find(|c| c.name == name))
                .map(|c| c.description.clone())
                .unwrap_or_default()
        };
        let columns = header.iter().skip(1).map(|n| ColumnInfo { name: n.to_string(), description: describe(n) }).collect();
        let mut rec = TrajectoryRecord::new(manifest.map_or(nu, |m| m.nu), columns);
        for row in rd.records() {
            let row = row.map_err(csv_err)?;
            let vals: Vec<f64> = row
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad number {s:?}: {e}"))))
                .collect::<Result<_>>()?;
            rec.push(vals[0], vals[1..].to_vec())?;
        }
        Ok(rec)
    }

    /// Writes `<path>` (CSV) and `<path>.manifest.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        let m = serde_json::to_string_pretty(&self.manifest())?;
        std::fs::write(manifest_path(path), m)?;
        Ok(())
    }

    /// Loads a record saved with [`save`](Self::save); the manifest is optional.
    pub fn load(path: &Path, nu_fallback: f64) -> Result<Self> {
        let mp = manifest_path(path);
        let manifest: Option<Manifest> = if mp.exists() {
            Some(serde_json::from_str(&std::fs::read_to_string(mp)?)?)
        } else {
            None
        };
        Self::read_csv(std::fs::File::open(path)?, manifest.as_ref(), nu_fallback)
    }

    /// Rows at or after `t0`, as a new record.
    pub fn since(&self, t0: f64) -> Self {
        let mut out = TrajectoryRecord::new(self.nu, self.columns.clone());
        for (t, r) in self.times.iter().zip(&self.rows) {
            if *t >= t0 {
                out.times.push(*t);
                out.rows.push(r.clone());
            }
        }
        out.outcome = self.outcome;
        out.diverged_at = self.diverged_at;
        out
    }
}

/// `<path>.manifest.json`.
pub fn manifest_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrajectoryRecord {
        let cols = vec![
            ColumnInfo { name: "a".into(), description: "first".into() },
            ColumnInfo { name: "b".into(), description: "second".into() },
        ];
        let mut r = TrajectoryRecord::new(0.01, cols);
        r.push(1.0, vec![0.1, 1.0 / 3.0]).unwrap();
        r.push(1.5, vec![1e-300, -2.5e10]).unwrap();
        r
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let r = sample();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let back = TrajectoryRecord::read_csv(&buf[..], Some(&r.manifest()), 0.0).unwrap();
        assert_eq!(back.times, r.times);
        assert_eq!(back.rows, r.rows);
        assert_eq!(back.columns, r.columns);
        assert_eq!(back.nu, 0.01);
    }

    #[test]
    fn missing_series_is_named() {
        match sample().series("nope") {
            Err(Error::MissingSeries(n)) => assert_eq!(n, "nope"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unordered_times_and_short_rows() {
        let mut r = sample();
        assert!(r.push(1.5, vec![0.0, 0.0]).is_err());
        assert!(r.push(2.0, vec![0.0]).is_err());
    }

    #[test]
    fn save_and_load_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.csv");
        let r = sample();
        r.save(&p).unwrap();
        assert!(manifest_path(&p).exists());
        let back = TrajectoryRecord::load(&p, 0.0).unwrap();
        assert_eq!(back.columns[1].description, "second");
        assert_eq!(back.rows, r.rows);
    }
}
