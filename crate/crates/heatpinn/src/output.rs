//! CSV and VTK writers. Every file starts with a provenance comment line
//! `# config_hash=<hex>, seed=<n>`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use heatpinn_core::training::LossRecord;

use crate::{Error, Result};

/// Provenance written at the top of every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn comment(&self) -> String {
        format!("# config_hash={}, seed={}", self.config_hash, self.seed)
    }
}

/// Shortest round-trip decimal form, so equal values give equal bytes.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn csv_file(path: &Path, prov: &Provenance, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", prov.comment()).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| num(v)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// `epoch,L_ic,L_bc,L_r,total`; epochs are numbered across windows.
pub fn write_losses(path: &Path, prov: &Provenance, histories: &[Vec<LossRecord>]) -> Result<()> {
    let mut offset = 0;
    let mut rows = Vec::new();
    for h in histories {
        for r in h {
            rows.push(vec![(offset + r.epoch) as f64, r.ic, r.bc, r.residual, r.total]);
        }
        offset += h.len();
    }
    csv_file(path, prov, &["epoch", "L_ic", "L_bc", "L_r", "total"], rows.into_iter())
}

/// `s_mm,temperature_K`.
pub fn write_profile(path: &Path, prov: &Provenance, samples: &[(f64, f64)]) -> Result<()> {
    csv_file(path, prov, &["s_mm", "temperature_K"], samples.iter().map(|&(s, u)| vec![s, u]))
}

/// A scalar field sampled on a regular grid at one time. Values are stored
/// x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub t: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: (f64, f64),
    pub spacing: (f64, f64),
    pub values: Vec<f64>,
}

impl GridField {
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.origin.0 + i as f64 * self.spacing.0, self.origin.1 + j as f64 * self.spacing.1)
    }
}

/// `x_mm,y_mm,t_s,u_K`.
pub fn write_field_csv(path: &Path, prov: &Provenance, f: &GridField) -> Result<()> {
    let rows = (0..f.ny).flat_map(|j| {
        (0..f.nx).map(move |i| {
            let (x, y) = f.point(i, j);
            vec![x, y, f.t, f.values[j * f.nx + i]]
        })
    });
    csv_file(path, prov, &["x_mm", "y_mm", "t_s", "u_K"], rows)
}

/// Legacy ASCII VTK, `STRUCTURED_POINTS`, one point-data scalar `temperature`.
pub fn write_vtk(path: &Path, prov: &Provenance, f: &GridField) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "temperature t={} config_hash={} seed={}", num(f.t), prov.config_hash, prov.seed);
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", f.nx, f.ny);
    let _ = writeln!(s, "ORIGIN {} {} 0", num(f.origin.0), num(f.origin.1));
    let _ = writeln!(s, "SPACING {} {} 1", num(f.spacing.0), num(f.spacing.1));
    let _ = writeln!(s, "POINT_DATA {}", f.values.len());
    let _ = writeln!(s, "SCALARS temperature double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for v in &f.values {
        let _ = writeln!(s, "{}", num(*v));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Minimal reader for files produced by [`write_vtk`].
pub fn read_vtk(path: &Path) -> Result<GridField> {
    let bad = |reason: &str| Error::Invalid(format!("{}: {reason}", path.display()));
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    if lines.len() < 10 || !lines[0].starts_with("# vtk DataFile") || lines[2] != "ASCII" {
        return Err(bad("not a legacy ASCII VTK file"));
    }
    if lines[3] != "DATASET STRUCTURED_POINTS" {
        return Err(bad("expected STRUCTURED_POINTS"));
    }
    let fields = |line: &str, key: &str| -> Result<Vec<f64>> {
        let rest = line.strip_prefix(key).ok_or_else(|| bad(&format!("expected {key}")))?;
        rest.split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| bad(&format!("bad number in {key}"))))
            .collect()
    };
    let dims = fields(&lines[4], "DIMENSIONS")?;
    let origin = fields(&lines[5], "ORIGIN")?;
    let spacing = fields(&lines[6], "SPACING")?;
    let count = fields(&lines[7], "POINT_DATA")?;
    let (nx, ny) = (dims[0] as usize, dims[1] as usize);
    if count.first().copied() != Some((nx * ny) as f64) {
        return Err(bad("POINT_DATA does not match DIMENSIONS"));
    }
    let t = lines[1]
        .split_whitespace()
        .find_map(|w| w.strip_prefix("t="))
        .and_then(|v| v.parse().ok())
        .unwrap_or(f64::NAN);
    let values: Vec<f64> = lines[10..]
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|_| bad("bad scalar value")))
        .collect::<Result<_>>()?;
    if values.len() != nx * ny {
        return Err(bad("scalar count does not match DIMENSIONS"));
    }
    Ok(GridField {
        t,
        nx,
        ny,
        origin: (origin[0], origin[1]),
        spacing: (spacing[0], spacing[1]),
        values,
    })
}

/// Read a CSV written by this module: skips the provenance line, returns
/// the header and rows.
pub fn read_csv(path: &Path) -> Result<(Provenance, Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    let prov = parse_comment(first).ok_or_else(|| Error::Invalid(format!("{}: missing provenance line", path.display())))?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .map(|v| v.parse::<f64>().map_err(|_| Error::Invalid(format!("{}: bad number `{v}`", path.display()))))
                .collect::<Result<_>>()?,
        );
    }
    Ok((prov, header, rows))
}

fn parse_comment(line: &str) -> Option<Provenance> {
    let rest = line.strip_prefix("# config_hash=")?;
    let (hash, seed) = rest.split_once(", seed=")?;
    Some(Provenance {
        config_hash: hash.to_string(),
        seed: seed.trim().parse().ok()?,
    })
}
