//! Binary window snapshots and the run manifest.
//!
//! Layout (little endian):
//!
//! ```text
//! magic      8 bytes   "HPSNAP01"
//! version    u32
//! index      u32
//! t_start    f64
//! t_end      f64
//! layers     u32       hidden layers
//! width      u32       hidden width
//! norm       8 × f64   t, x, y (offset, scale) pairs, output offset, output scale
//! losses     4 × f64   ic dirichlet neumann residual
//! seed       u64
//! hash       32 bytes  config SHA-256
//! count      u64       parameter count
//! params     count × f64, layer-major, weights row-major then bias
//! ```

use std::fs;
use std::path::Path;

use heatpinn_core::network::{AffineMap, Architecture, NetworkParams, Normalization, PinnModel};
use heatpinn_core::physics::LossComponents;
use heatpinn_core::WindowSnapshot;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HPSNAP01";
pub const VERSION: u32 = 1;

/// Snapshot plus the provenance stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSnapshot {
    pub snapshot: WindowSnapshot,
    pub seed: u64,
    pub config_hash: [u8; 32],
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode(s: &StoredSnapshot) -> Vec<u8> {
    let snap = &s.snapshot;
    let arch = snap.model.params.arch();
    let n = &snap.model.norm;
    let mut out = Vec::with_capacity(200 + 8 * snap.model.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(snap.index as u32).to_le_bytes());
    put_f64(&mut out, snap.t_start);
    put_f64(&mut out, snap.t_end);
    out.extend_from_slice(&(arch.hidden_layers as u32).to_le_bytes());
    out.extend_from_slice(&(arch.hidden_width as u32).to_le_bytes());
    for v in [
        n.t.offset,
        n.t.scale,
        n.x.offset,
        n.x.scale,
        n.y.offset,
        n.y.scale,
        n.output_offset,
        n.output_scale,
    ] {
        put_f64(&mut out, v);
    }
    let l = &snap.final_loss;
    for v in [l.ic, l.dirichlet, l.neumann, l.residual] {
        put_f64(&mut out, v);
    }
    out.extend_from_slice(&s.seed.to_le_bytes());
    out.extend_from_slice(&s.config_hash);
    out.extend_from_slice(&(snap.model.params.len() as u64).to_le_bytes());
    for &v in snap.model.params.as_slice() {
        put_f64(&mut out, v);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<StoredSnapshot, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let index = r.u32()? as usize;
    let (t_start, t_end) = (r.f64()?, r.f64()?);
    let arch = Architecture::new(r.u32()? as usize, r.u32()? as usize).map_err(|e| e.to_string())?;
    let mut nv = [0.0; 8];
    for v in &mut nv {
        *v = r.f64()?;
    }
    let map = |o: f64, s: f64| AffineMap { offset: o, scale: s };
    let norm = Normalization {
        t: map(nv[0], nv[1]),
        x: map(nv[2], nv[3]),
        y: map(nv[4], nv[5]),
        output_offset: nv[6],
        output_scale: nv[7],
    };
    let final_loss = LossComponents {
        ic: r.f64()?,
        dirichlet: r.f64()?,
        neumann: r.f64()?,
        residual: r.f64()?,
    };
    let seed = r.u64()?;
    let config_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let count = r.u64()? as usize;
    if count != arch.param_count() {
        return Err(format!("parameter count {count} does not match architecture ({})", arch.param_count()));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(r.f64()?);
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    let params = NetworkParams::from_flat(arch, values).map_err(|e| e.to_string())?;
    Ok(StoredSnapshot {
        snapshot: WindowSnapshot {
            index,
            t_start,
            t_end,
            model: PinnModel::new(params, norm),
            final_loss,
        },
        seed,
        config_hash,
    })
}

pub fn write(path: &Path, s: &StoredSnapshot) -> Result<()> {
    fs::write(path, encode(s)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<StoredSnapshot> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Snapshot {
        path: path.to_path_buf(),
        reason,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub layer: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    /// Offset of the weight block in the flat payload; the bias follows it.
    pub weights_offset: usize,
    pub bias_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEntry {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub file: String,
    pub final_loss_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub parameter_count: usize,
    pub layers: Vec<LayerEntry>,
    pub windows: Vec<WindowEntry>,
}

pub fn layer_manifest(arch: Architecture) -> Vec<LayerEntry> {
    (0..arch.num_layers())
        .map(|l| {
            let (fan_in, fan_out) = arch.layer_dims(l);
            let off = arch.layer_offset(l);
            LayerEntry {
                layer: l,
                fan_in,
                fan_out,
                weights_offset: off,
                bias_offset: off + fan_in * fan_out,
            }
        })
        .collect()
}

pub fn snapshot_file_name(index: usize) -> String {
    format!("window_{index:03}.snap")
}

/// Load every snapshot listed in `dir/manifest.json`, in window order.
pub fn load_run(dir: &Path) -> Result<(RunManifest, Vec<WindowSnapshot>)> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let mut snaps = Vec::with_capacity(manifest.windows.len());
    for w in &manifest.windows {
        let stored = read(&dir.join(&w.file))?;
        if hex::encode(stored.config_hash) != manifest.config_hash {
            return Err(Error::Snapshot {
                path: dir.join(&w.file),
                reason: "config hash differs from manifest".into(),
            });
        }
        snaps.push(stored.snapshot);
    }
    Ok((manifest, snaps))
}
