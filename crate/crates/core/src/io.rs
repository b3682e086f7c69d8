//! Dataset directories: `manifest.toml`, `snapshots/t_<index>.csv`, `boundary/t_<index>.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::FieldSnapshot;
use crate::geometry::{BoundaryCurve, Topology};
use crate::sim::{Dataset, Manifest};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const BOUNDARY_DIR: &str = "boundary";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn frame_file(index: usize) -> String {
    format!("t_{index:05}.csv")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_toml<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::format(path, e))?;
    write_text(path, &text)
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    toml::from_str(&read_text(path)?).map_err(|e| Error::format(path, e))
}

/// CSV with a header row and one formatted row per record.
pub fn write_csv(path: &Path, preamble: Option<&str>, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = Vec::new();
    if let Some(p) = preamble {
        out.extend_from_slice(p.as_bytes());
        out.push(b'\n');
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header).map_err(|e| Error::format(path, e))?;
        for row in rows {
            w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(|e| Error::format(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Rows of a CSV whose header must equal `header`; `#` lines are skipped.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path)?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let found: Vec<String> = r.headers().map_err(|e| Error::format(path, e))?.iter().map(|s| s.trim().to_string()).collect();
    if found != header {
        return Err(Error::format(path, format!("expected header {header:?}, found {found:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("record {}: {e}", line + 1)))?;
        if row.len() != header.len() {
            return Err(Error::format(path, format!("record {} has {} fields", line + 1, row.len())));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn topology_line(t: &Topology) -> String {
    match t {
        Topology::ClosedLoop => "# topology=closed".into(),
        Topology::Open => "# topology=open".into(),
        Topology::Periodic { period } => format!("# topology=periodic period={},{}", fmt_f64(period[0]), fmt_f64(period[1])),
    }
}

fn parse_topology(path: &Path, text: &str) -> Result<Topology> {
    let line = text.lines().next().unwrap_or("");
    let body = line
        .strip_prefix("# topology=")
        .ok_or_else(|| Error::format(path, "first line must be `# topology=...`"))?;
    let mut parts = body.split_whitespace();
    match parts.next() {
        Some("closed") => Ok(Topology::ClosedLoop),
        Some("open") => Ok(Topology::Open),
        Some("periodic") => {
            let spec = parts
                .next()
                .and_then(|p| p.strip_prefix("period="))
                .ok_or_else(|| Error::format(path, "periodic topology needs period=px,py"))?;
            let v: Vec<f64> = spec
                .split(',')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, e))?;
            if v.len() != 2 {
                return Err(Error::format(path, "period needs two components"));
            }
            Ok(Topology::Periodic { period: [v[0], v[1]] })
        }
        other => Err(Error::format(path, format!("unknown topology {other:?}"))),
    }
}

pub fn write_snapshot(path: &Path, snap: &FieldSnapshot) -> Result<()> {
    write_csv(path, None, &["x", "y", "u"], snap.points.iter().zip(&snap.values).map(|(p, v)| vec![p[0], p[1], *v]))
}

pub fn read_snapshot(path: &Path, time: f64) -> Result<FieldSnapshot> {
    let rows = read_csv(path, &["x", "y", "u"])?;
    let (points, values) = rows.into_iter().map(|r| ([r[0], r[1]], r[2])).unzip();
    FieldSnapshot::new(time, points, values)
}

pub fn write_curve(path: &Path, curve: &BoundaryCurve) -> Result<()> {
    write_csv(path, Some(&topology_line(&curve.topology)), &["x", "y"], curve.points.iter().map(|p| vec![p[0], p[1]]))
}

pub fn read_curve(path: &Path, time: f64) -> Result<BoundaryCurve> {
    let topology = parse_topology(path, &read_text(path)?)?;
    let points = read_csv(path, &["x", "y"])?.into_iter().map(|r| [r[0], r[1]]).collect();
    BoundaryCurve::new(time, points, topology)
}

pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    if dataset.snapshots.len() != dataset.curves.len() {
        return Err(Error::Shape { expected: dataset.snapshots.len(), found: dataset.curves.len() });
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for sub in [SNAPSHOT_DIR, BOUNDARY_DIR] {
        let d = dir.join(sub);
        if d.exists() {
            fs::remove_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
    }
    let mut manifest = dataset.manifest.clone();
    manifest.times = dataset.times();
    write_toml(&dir.join(MANIFEST_FILE), &manifest)?;
    for (k, (s, c)) in dataset.snapshots.iter().zip(&dataset.curves).enumerate() {
        write_snapshot(&dir.join(SNAPSHOT_DIR).join(frame_file(k)), s)?;
        write_curve(&dir.join(BOUNDARY_DIR).join(frame_file(k)), c)?;
    }
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    read_toml(&dir.join(MANIFEST_FILE))
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found")));
    }
    let manifest = read_manifest(dir)?;
    let mut snapshots = Vec::with_capacity(manifest.times.len());
    let mut curves = Vec::with_capacity(manifest.times.len());
    for (k, &t) in manifest.times.iter().enumerate() {
        let sp: PathBuf = dir.join(SNAPSHOT_DIR).join(frame_file(k));
        let cp: PathBuf = dir.join(BOUNDARY_DIR).join(frame_file(k));
        if !sp.exists() || !cp.exists() {
            return Err(Error::MissingSnapshot(format!("index {k} (t = {t}) under {}", dir.display())));
        }
        snapshots.push(read_snapshot(&sp, t)?);
        curves.push(read_curve(&cp, t)?);
    }
    Ok(Dataset { manifest, snapshots, curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, SimParams};

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = SimParams { extent: [3.0, 2.0], front0: 1.2, t_end: 0.1, snapshot_stride: 25, ..SimParams::planar() };
        let d = simulate(&p, 11).unwrap();
        write_dataset(dir.path(), &d).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back, d);
        assert!(dir.path().join("snapshots/t_00002.csv").exists());
        let text = read_text(&dir.path().join("boundary/t_00000.csv")).unwrap();
        assert!(text.starts_with("# topology=periodic"));
        assert!(text.lines().nth(1) == Some("x,y"));
    }

    #[test]
    fn closed_curve_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let c = BoundaryCurve::new(0.5, vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], Topology::ClosedLoop).unwrap();
        let path = dir.path().join("c.csv");
        write_curve(&path, &c).unwrap();
        assert_eq!(read_curve(&path, 0.5).unwrap(), c);
        write_text(&path, "x,y\n1,2\n").unwrap();
        assert!(matches!(read_curve(&path, 0.0), Err(Error::Format { .. })));
        write_text(&path, "x,y,u\n1,2,oops\n").unwrap();
        assert!(matches!(read_snapshot(&path, 0.0), Err(Error::Format { .. })));
        assert!(matches!(read_dataset(&dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
