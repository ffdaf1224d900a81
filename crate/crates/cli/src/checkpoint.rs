//! Versioned checkpoints: self-describing JSON, optionally with a little-endian f64 payload.

use crate::error::CliError;
use capeuler::geometry::{AnnulusShape, BoundaryScalar, BoundaryTag, StarCurve};
use capeuler::spectral::fourier;
use capeuler::{Shape, WaveState};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundaryRecord {
    /// "single", "outer" or "inner".
    pub tag: String,
    /// Collocation values; empty when they live in the binary payload.
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default)]
    pub phi: Vec<f64>,
    /// Fourier coefficients c_k, k = 0..=n/2, as [re, im].
    pub rho_spectrum: Vec<[f64; 2]>,
    pub phi_spectrum: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Payload {
    pub file: String,
    /// Number of f64 values: for each boundary ρ then φ.
    pub count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckpointFile {
    pub format_version: u32,
    pub t: f64,
    pub eps: f64,
    pub n_theta: usize,
    pub center: [f64; 2],
    pub flux: f64,
    pub boundaries: Vec<BoundaryRecord>,
    #[serde(default)]
    pub payload: Option<Payload>,
}

fn tag_name(t: BoundaryTag) -> &'static str {
    match t {
        BoundaryTag::Single => "single",
        BoundaryTag::Outer => "outer",
        BoundaryTag::Inner => "inner",
    }
}

fn spectrum(x: &[f64]) -> Vec<[f64; 2]> {
    let c = fourier(x.len()).forward(x);
    c[..=x.len() / 2].iter().map(|z| [z.re, z.im]).collect()
}

impl CheckpointFile {
    pub fn from_state(s: &WaveState) -> Self {
        let boundaries = s
            .shape
            .curves()
            .into_iter()
            .zip(&s.phi)
            .map(|((tag, curve), phi)| BoundaryRecord {
                tag: tag_name(tag).into(),
                rho: curve.rho().to_vec(),
                phi: phi.values.clone(),
                rho_spectrum: spectrum(curve.rho()),
                phi_spectrum: spectrum(&phi.values),
            })
            .collect();
        CheckpointFile {
            format_version: FORMAT_VERSION,
            t: s.t,
            eps: s.eps,
            n_theta: s.n_theta(),
            center: s.shape.center(),
            flux: s.flux,
            boundaries,
            payload: None,
        }
    }

    pub fn to_state(&self) -> Result<WaveState, CliError> {
        let bad = |m: String| CliError::Checkpoint(m);
        for b in &self.boundaries {
            if b.rho.len() != self.n_theta || b.phi.len() != self.n_theta {
                return Err(bad(format!("boundary `{}` holds {} values, expected {}", b.tag, b.rho.len(), self.n_theta)));
            }
        }
        let curve = |b: &BoundaryRecord| StarCurve::from_rho(self.center, b.rho.clone());
        let (shape, tags) = match self.boundaries.as_slice() {
            [one] if one.tag == "single" => (Shape::Disk(curve(one)?), vec![BoundaryTag::Single]),
            [o, i] if o.tag == "outer" && i.tag == "inner" => {
                (Shape::Annulus(AnnulusShape::new(curve(i)?, curve(o)?)?), vec![BoundaryTag::Outer, BoundaryTag::Inner])
            }
            _ => return Err(bad("boundaries must be [single] or [outer, inner]".into())),
        };
        let phi = self.boundaries.iter().zip(tags).map(|(b, t)| BoundaryScalar::new(t, b.phi.clone())).collect();
        Ok(WaveState { shape, phi, flux: self.flux, t: self.t, eps: self.eps })
    }
}

/// Write `state` to `path` (JSON). With `binary`, ρ and φ go to a sibling `.bin` file.
pub fn write_checkpoint(path: &Path, state: &WaveState, binary: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut file = CheckpointFile::from_state(state);
    let mut written = vec![path.to_path_buf()];
    if binary {
        let bin = path.with_extension("bin");
        let mut bytes = Vec::new();
        let mut count = 0;
        for b in file.boundaries.iter_mut() {
            for v in std::mem::take(&mut b.rho).into_iter().chain(std::mem::take(&mut b.phi)) {
                bytes.extend_from_slice(&v.to_le_bytes());
                count += 1;
            }
        }
        std::fs::write(&bin, bytes)?;
        let name = bin.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        file.payload = Some(Payload { file: name, count });
        written.push(bin);
    }
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(written)
}

/// Read a checkpoint, checking the format version before anything else.
pub fn read_checkpoint_file(path: &Path) -> Result<CheckpointFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let found = raw.get("format_version").and_then(|v| v.as_u64());
    match found {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(CliError::Checkpoint(format!(
                "checkpoint {} has format version {v}, this build reads version {FORMAT_VERSION}",
                path.display()
            )))
        }
        None => return Err(CliError::Checkpoint(format!("checkpoint {} has no format_version", path.display()))),
    }
    let mut file: CheckpointFile = serde_json::from_value(raw)?;
    if let Some(p) = &file.payload {
        let bin = path.with_file_name(&p.file);
        let bytes = std::fs::read(&bin).map_err(|e| CliError::Checkpoint(format!("cannot read payload {}: {e}", bin.display())))?;
        if bytes.len() != 8 * p.count || p.count != 2 * file.n_theta * file.boundaries.len() {
            return Err(CliError::Checkpoint(format!("payload {} has {} bytes, expected {}", bin.display(), bytes.len(), 8 * p.count)));
        }
        let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let n = file.n_theta;
        for (i, b) in file.boundaries.iter_mut().enumerate() {
            b.rho = vals[2 * i * n..(2 * i + 1) * n].to_vec();
            b.phi = vals[(2 * i + 1) * n..(2 * i + 2) * n].to_vec();
        }
    }
    Ok(file)
}

pub fn read_checkpoint(path: &Path) -> Result<WaveState, CliError> {
    read_checkpoint_file(path)?.to_state()
}

#[cfg(test)]
mod tests {
    use super::*;
    use capeuler::wave::{init_state, GeometrySpec, ModeSpec, SimConfig};

    fn state(annulus: bool) -> WaveState {
        let g = if annulus { GeometrySpec::annulus(1.0, 2.0, 0.3) } else { GeometrySpec::circle(1.0) };
        let mut c = SimConfig::new(g, 0.4);
        c.n_theta = 32;
        c.n_r = 8;
        c.modes.push(ModeSpec { k: 3, amp: 0.0123456789, phi: 1.0 / 3.0, travelling: false, boundary: None });
        init_state(&c).unwrap()
    }

    #[test]
    fn round_trips_are_exact() {
        let dir = tempfile::tempdir().unwrap();
        for annulus in [false, true] {
            for binary in [false, true] {
                let s = state(annulus);
                let p = dir.path().join(format!("c_{annulus}_{binary}.json"));
                write_checkpoint(&p, &s, binary).unwrap();
                let r = read_checkpoint(&p).unwrap();
                assert_eq!(r, s);
            }
        }
    }

    #[test]
    fn legacy_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("old.json");
        write_checkpoint(&p, &state(false), false).unwrap();
        let text = std::fs::read_to_string(&p).unwrap().replace("\"format_version\": 1", "\"format_version\": 0");
        std::fs::write(&p, text).unwrap();
        let e = read_checkpoint(&p).unwrap_err().to_string();
        assert!(e.contains("version 0") && e.contains("version 1"), "{e}");
    }
}
