use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::run::RunOutput;
use super::Scenario;
use crate::error::{Error, Result};
use crate::solver::RecordSet;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Output(format!("{}: {e}", path.display())))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::Output(format!("{}: {e}", path.display())))
}

fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = fs::read_dir(dir)
            .map_err(|e| Error::Output(format!("{}: {e}", dir.display())))?
            .next()
            .is_some();
        if occupied && !force {
            return Err(Error::Output(format!(
                "{} already exists and is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::Output(format!("{}: {e}", dir.display())))
}

fn write_set(dir: &Path, rec: &RecordSet, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut put = |name: String, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut w = create(&path)?;
        f(&mut w).map_err(|e| Error::Output(format!("{}: {e}", path.display())))?;
        finish(w, &path)?;
        files.push(path);
        Ok(())
    };
    put("energy.csv".into(), &|w| rec.write_energy_csv(w))?;
    if !rec.probe_names.is_empty() {
        put("probes.csv".into(), &|w| rec.write_csv(w))?;
    }
    for line in &rec.lines {
        put(format!("line_{}.csv", line.name), &|w| rec.write_line_csv(line, w))?;
    }
    Ok(())
}

fn metadata(rec: &RecordSet, wall_time_s: f64, defaults: &[String]) -> String {
    let i = &rec.info;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| s.push_str(&format!("{k}={v}\n"));
    kv("version", env!("CARGO_PKG_VERSION").into());
    kv("dt_s", format!("{:e}", i.dt));
    kv("steps", i.steps.to_string());
    kv("record_stride", i.record_stride.to_string());
    kv("records", rec.steps.len().to_string());
    kv("n_e", i.n_e.to_string());
    kv("n_h", i.n_h.to_string());
    kv("n_active", i.n_active.to_string());
    kv("wall_time_s", format!("{wall_time_s:.3}"));
    for (k, d) in i.source_snap_m.iter().enumerate() {
        kv(&format!("source[{k}].snap_m"), format!("{d:e}"));
    }
    for (k, d) in i.probe_snap_m.iter().enumerate() {
        kv(&format!("probe[{k}].snap_m"), format!("{d:e}"));
    }
    for d in defaults {
        kv("default", d.clone());
    }
    s
}

/// Writes every output of a run into `dir`. Refuses a non-empty
/// directory unless `force` is set.
pub fn write_records(
    dir: &Path,
    scenario: &Scenario,
    out: &RunOutput,
    defaults: &[String],
    wall_time_s: f64,
    force: bool,
) -> Result<Vec<PathBuf>> {
    prepare_dir(dir, force)?;
    let mut files = Vec::new();
    write_set(dir, &out.records, &mut files)?;
    if let Some(r) = &out.reference {
        let sub = dir.join("reference");
        fs::create_dir_all(&sub).map_err(|e| Error::Output(format!("{}: {e}", sub.display())))?;
        write_set(&sub, r, &mut files)?;
    }
    if let Some(r) = &out.reflection {
        let path = dir.join("s11.csv");
        let mut w = create(&path)?;
        r.write_csv(&mut w).map_err(|e| Error::Output(e.to_string()))?;
        finish(w, &path)?;
        files.push(path);
    }
    let meta = dir.join("metadata.txt");
    fs::write(&meta, metadata(&out.records, wall_time_s, defaults))?;
    files.push(meta);
    let sc = dir.join("scenario.toml");
    fs::write(&sc, scenario.to_toml()?)?;
    files.push(sc);
    Ok(files)
}

/// A numeric CSV with a header row; the first column is the step index.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCsv {
    pub header: Vec<String>,
    pub steps: Vec<u64>,
    /// Every column after `step`, in header order.
    pub columns: Vec<Vec<f64>>,
}

impl ProbeCsv {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let k = self.header.iter().skip(1).position(|h| h == name)?;
        Some(&self.columns[k])
    }
}

pub fn read_probe_csv(path: &Path) -> Result<ProbeCsv> {
    let err = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(err)?;
    let header: Vec<String> = rdr.headers().map_err(err)?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("step") {
        return Err(Error::Parse(format!("{}: first column must be `step`", path.display())));
    }
    let mut steps = Vec::new();
    let mut columns = vec![Vec::new(); header.len() - 1];
    for (n, row) in rdr.records().enumerate() {
        let row = row.map_err(err)?;
        let bad = |c: &str| Error::Parse(format!("{}: row {}: bad number `{c}`", path.display(), n + 2));
        steps.push(row[0].parse().map_err(|_| bad(&row[0]))?);
        for (col, c) in columns.iter_mut().zip(row.iter().skip(1)) {
            col.push(c.parse().map_err(|_| bad(c))?);
        }
    }
    Ok(ProbeCsv { header, steps, columns })
}

/// A line-probe CSV split into its `Ez` and `H` records.
#[derive(Debug, Clone, PartialEq)]
pub struct LineCsv {
    pub dt: f64,
    pub s: Vec<f64>,
    pub ez: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

impl LineCsv {
    pub fn read(path: &Path) -> Result<Self> {
        let csv = read_probe_csv(path)?;
        let pick = |prefix: &str| -> Result<(Vec<f64>, Vec<usize>)> {
            let mut s = Vec::new();
            let mut idx = Vec::new();
            for (k, h) in csv.header.iter().skip(1).enumerate() {
                if let Some(v) = h.strip_prefix(prefix) {
                    s.push(v.parse().map_err(|_| Error::Parse(format!("bad column `{h}`")))?);
                    idx.push(k);
                }
            }
            Ok((s, idx))
        };
        let (s, ez_cols) = pick("Ez@")?;
        let (s_h, h_cols) = pick("H@")?;
        if s.is_empty() || s != s_h {
            return Err(Error::Parse(format!("{}: not a line-probe file", path.display())));
        }
        let time = csv.column("time_s").ok_or_else(|| Error::Parse("missing time_s column".into()))?;
        let dt = if time.len() >= 2 { time[1] - time[0] } else { 0.0 };
        let rows = |cols: &[usize]| -> Vec<Vec<f64>> {
            (0..csv.steps.len()).map(|n| cols.iter().map(|c| csv.columns[*c][n]).collect()).collect()
        };
        Ok(Self {
            dt,
            ez: rows(&ez_cols),
            h: rows(&h_cols),
            s,
        })
    }

    pub fn ds(&self) -> f64 {
        if self.s.len() >= 2 {
            self.s[1] - self.s[0]
        } else {
            1.0
        }
    }
}
