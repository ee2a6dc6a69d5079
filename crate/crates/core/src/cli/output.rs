//! Deterministic CSV and report emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::signal::{Snapshot, WaveRecord};
use crate::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Ordered flat `key=value` report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.text(key, fmt_f64(value));
    }

    pub fn int(&mut self, key: impl Into<String>, value: usize) {
        self.text(key, value.to_string());
    }

    pub fn flag(&mut self, key: impl Into<String>, value: bool) {
        self.text(key, value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn parse(text: &str) -> Self {
        let mut r = Self::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                r.text(k.trim(), v.trim());
            }
        }
        r
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn series_csv(record: &WaveRecord, columns: &[Vec<f64>]) -> String {
    let mut s = String::from("time_s");
    for l in &record.labels {
        s.push(',');
        s.push_str(l);
    }
    s.push('\n');
    for k in 0..record.len() {
        s.push_str(&fmt_f64(record.time(k)));
        for c in columns {
            s.push(',');
            s.push_str(&fmt_f64(c[k]));
        }
        s.push('\n');
    }
    s
}

fn normalized(series: &[Vec<f64>]) -> Vec<Vec<f64>> {
    series
        .iter()
        .map(|c| {
            let m = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if m > 0.0 {
                c.iter().map(|v| v / m).collect()
            } else {
                c.clone()
            }
        })
        .collect()
}

fn snapshot_csv(snap: &Snapshot) -> String {
    let mut s = String::from("x_m,value\n");
    for (x, v) in snap.x.iter().zip(&snap.values) {
        let _ = writeln!(s, "{},{}", fmt_f64(*x), fmt_f64(*v));
    }
    s
}

/// Writes `sensors.csv`, `sensors_normalized.csv`, `excitation.csv`, one
/// `snapshot_<field>_<k>.csv` per snapshot and, if given, `report.txt`.
/// Returns the paths written, in order.
pub fn write_outputs(record: &WaveRecord, report: Option<&Report>, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &body)?;
        written.push(path);
        Ok(())
    };

    emit("sensors.csv".into(), series_csv(record, &record.series))?;
    emit(
        "sensors_normalized.csv".into(),
        series_csv(record, &normalized(&record.series)),
    )?;
    if !record.excitation.is_empty() {
        let mut s = String::from("time_s,force_n\n");
        for (k, f) in record.excitation.iter().enumerate() {
            let _ = writeln!(s, "{},{}", fmt_f64(record.time(k)), fmt_f64(*f));
        }
        emit("excitation.csv".into(), s)?;
    }
    let mut counters: Vec<(String, usize)> = Vec::new();
    for snap in &record.snapshots {
        let idx = match counters.iter_mut().find(|(f, _)| *f == snap.field) {
            Some((_, n)) => {
                *n += 1;
                *n
            }
            None => {
                counters.push((snap.field.clone(), 0));
                0
            }
        };
        emit(format!("snapshot_{}_{idx:03}.csv", snap.field), snapshot_csv(snap))?;
    }
    if let Some(r) = report {
        emit("report.txt".into(), r.render())?;
    }
    Ok(written)
}

/// Reads a sensor CSV (`time_s,<labels>`) back into a record.
pub fn read_sensor_csv(path: &Path) -> Result<WaveRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::config(path.display().to_string(), msg);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let mut cols = header.split(',').map(str::trim);
    if cols.next() != Some("time_s") {
        return Err(bad("first column must be `time_s`".into()));
    }
    let labels: Vec<String> = cols.map(String::from).collect();
    if labels.is_empty() {
        return Err(bad("no data columns".into()));
    }
    let mut times = Vec::new();
    let mut series = vec![Vec::new(); labels.len()];
    for (row, line) in lines.enumerate() {
        let values: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", row + 2)))?;
        if values.len() != labels.len() + 1 {
            return Err(bad(format!("row {} has {} columns", row + 2, values.len())));
        }
        times.push(values[0]);
        for (s, v) in series.iter_mut().zip(&values[1..]) {
            s.push(*v);
        }
    }
    if times.len() < 2 {
        return Err(bad("need at least two samples".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(bad("time column must increase".into()));
    }
    for (k, t) in times.iter().enumerate() {
        if (t - times[0] - k as f64 * dt).abs() > 1e-6 * dt {
            return Err(bad(format!("non-uniform sampling at row {}", k + 2)));
        }
    }
    if times[0].abs() > 1e-6 * dt {
        return Err(bad("time column must start at 0".into()));
    }
    Ok(WaveRecord {
        dt,
        labels,
        series,
        excitation: Vec::new(),
        snapshots: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> WaveRecord {
        WaveRecord {
            dt: 0.5,
            labels: vec!["u@1".into(), "u@2".into()],
            series: vec![vec![0.0, 1.0, -2.0], vec![0.1, 0.2, 0.3]],
            excitation: vec![0.0, 1.0, 0.0],
            snapshots: vec![Snapshot {
                time: 1.0,
                field: "u".into(),
                x: vec![0.0, 1.0],
                values: vec![3.0, 4.0],
            }],
        }
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = fmt_f64(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn report_keeps_order_and_overwrites() {
        let mut r = Report::new();
        r.int("dofs", 161);
        r.num("velocity_mps", 5063.0);
        r.int("dofs", 162);
        assert_eq!(r.render(), "dofs=162\nvelocity_mps=5.0630000000000000e3\n");
        assert_eq!(Report::parse(&r.render()), r);
        assert_eq!(r.get_f64("velocity_mps"), Some(5063.0));
    }

    #[test]
    fn csv_headers_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rep = Report::new();
        rep.text("crack_estimate_m", "none");
        let paths = write_outputs(&record(), Some(&rep), dir.path()).unwrap();
        assert_eq!(paths.len(), 5);
        let sensors = fs::read_to_string(dir.path().join("sensors.csv")).unwrap();
        assert!(sensors.starts_with("time_s,u@1,u@2\n"));
        let snap = fs::read_to_string(dir.path().join("snapshot_u_000.csv")).unwrap();
        assert!(snap.starts_with("x_m,value\n"));
        let norm = fs::read_to_string(dir.path().join("sensors_normalized.csv")).unwrap();
        assert!(norm.contains(&fmt_f64(-1.0)));
        let back = read_sensor_csv(&dir.path().join("sensors.csv")).unwrap();
        assert_eq!(back.series, record().series);
        assert_eq!(back.dt, 0.5);
    }

    #[test]
    fn identical_records_give_identical_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_outputs(&record(), None, a.path()).unwrap();
        write_outputs(&record(), None, b.path()).unwrap();
        for name in ["sensors.csv", "sensors_normalized.csv", "excitation.csv", "snapshot_u_000.csv"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap()
            );
        }
    }

    #[test]
    fn malformed_csv_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "t,u\n0,1\n1,2\n").unwrap();
        assert!(matches!(read_sensor_csv(&p), Err(Error::Config { .. })));
        fs::write(&p, "time_s,u\n0,1\n1,2\n3,4\n").unwrap();
        assert!(read_sensor_csv(&p).is_err());
    }
}
