//! On-disk cache of fiber grids, keyed by a hash of the grid spec.
//!
//! A cache file stores the node parameters and quadrature weights as raw
//! `f64` bit patterns plus a SHA-256 digest of that payload, so a reload is
//! bit-identical to the build and any corruption is detected.

use std::fs;
use std::path::{Path, PathBuf};

use rstab_core::grid::{FiberGrid, GridKind, GridSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Created,
    Reused,
    /// The file existed but failed verification and was replaced.
    Rebuilt,
}

#[derive(Debug, Clone, Serialize)]
pub struct CacheEntry {
    pub key: String,
    pub path: PathBuf,
    pub status: CacheStatus,
    pub nodes: usize,
    /// SHA-256 of the stored node and weight bits.
    pub digest: String,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    spec: GridSpec,
    /// `θ/x, φ/y` pairs as `f64::to_bits`.
    params: Vec<[u64; 2]>,
    weights: Vec<u64>,
    digest: String,
}

/// `sphere:64x128` or `torus:64x64`.
pub fn parse_grid_spec(text: &str) -> Result<GridSpec, String> {
    let (kind, dims) = text
        .split_once(':')
        .ok_or_else(|| format!("grid spec \"{text}\" should look like sphere:64x128"))?;
    let kind = match kind {
        "sphere" => GridKind::Sphere,
        "torus" => GridKind::Torus,
        other => return Err(crate::catalog::unknown("grid kind", other, &["sphere", "torus"])),
    };
    let (a, b) = dims
        .split_once('x')
        .ok_or_else(|| format!("grid size \"{dims}\" should look like 64x128"))?;
    let n1 = a.trim().parse().map_err(|_| format!("bad node count \"{a}\""))?;
    let n2 = b.trim().parse().map_err(|_| format!("bad node count \"{b}\""))?;
    let spec = GridSpec { kind, n1, n2 };
    FiberGrid::new(spec).map_err(|e| e.to_string())?;
    Ok(spec)
}

pub fn grid_key(spec: &GridSpec) -> String {
    let kind = match spec.kind {
        GridKind::Sphere => "sphere",
        GridKind::Torus => "torus",
    };
    let canonical = format!("rstab-grid-v1:{kind}:{}x{}", spec.n1, spec.n2);
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn payload_digest(params: &[[u64; 2]], weights: &[u64]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p[0].to_le_bytes());
        h.update(p[1].to_le_bytes());
    }
    for w in weights {
        h.update(w.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn cache_path(dir: &Path, spec: &GridSpec) -> PathBuf {
    dir.join(format!("grid-{}.json", grid_key(spec)))
}

fn encode(grid: &FiberGrid) -> CacheFile {
    let params: Vec<[u64; 2]> = grid.params().iter().map(|p| [p[0].to_bits(), p[1].to_bits()]).collect();
    let weights: Vec<u64> = grid.fiber_weights().iter().map(|w| w.to_bits()).collect();
    CacheFile {
        spec: grid.spec,
        digest: payload_digest(&params, &weights),
        params,
        weights,
    }
}

fn decode(text: &str, spec: &GridSpec) -> Result<FiberGrid, String> {
    let file: CacheFile = serde_json::from_str(text).map_err(|e| format!("unreadable: {e}"))?;
    if file.spec != *spec {
        return Err("spec mismatch".into());
    }
    if payload_digest(&file.params, &file.weights) != file.digest {
        return Err("digest mismatch".into());
    }
    let params = file.params.iter().map(|p| [f64::from_bits(p[0]), f64::from_bits(p[1])]).collect();
    let weights = file.weights.iter().map(|w| f64::from_bits(*w)).collect();
    FiberGrid::from_parts(*spec, params, weights).map_err(|e| e.to_string())
}

/// Loads the grid from `dir`, building and writing it when missing or
/// corrupt.
pub fn load_or_build(dir: &Path, spec: GridSpec) -> std::io::Result<(FiberGrid, CacheEntry)> {
    let path = cache_path(dir, &spec);
    let mut status = CacheStatus::Created;
    if path.exists() {
        match fs::read_to_string(&path).map_err(|e| e.to_string()).and_then(|t| decode(&t, &spec)) {
            Ok(grid) => {
                let entry = CacheEntry {
                    key: grid_key(&spec),
                    path,
                    status: CacheStatus::Reused,
                    nodes: grid.len(),
                    digest: encode(&grid).digest,
                };
                return Ok((grid, entry));
            }
            Err(why) => {
                log::warn!("grid cache {} is corrupt ({why}); rebuilding", path.display());
                status = CacheStatus::Rebuilt;
            }
        }
    }
    let grid = FiberGrid::new(spec).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
    fs::create_dir_all(dir)?;
    let file = encode(&grid);
    let text = serde_json::to_string(&file).map_err(std::io::Error::other)?;
    // Write then rename so a crash never leaves a half-written entry.
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, &path)?;
    let entry = CacheEntry {
        key: grid_key(&spec),
        path,
        status,
        nodes: grid.len(),
        digest: file.digest,
    };
    Ok((grid, entry))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse() {
        assert_eq!(parse_grid_spec("sphere:16x32").unwrap(), GridSpec::sphere(16, 32));
        assert_eq!(parse_grid_spec("torus:8x8").unwrap(), GridSpec::torus(8, 8));
        assert!(parse_grid_spec("sphere:4x8").is_err());
        assert!(parse_grid_spec("sphre:16x32").unwrap_err().contains("sphere"));
        assert!(parse_grid_spec("sphere16x32").is_err());
    }

    #[test]
    fn keys_are_stable_and_distinct() {
        let a = grid_key(&GridSpec::sphere(16, 32));
        assert_eq!(a, grid_key(&GridSpec::sphere(16, 32)));
        assert_ne!(a, grid_key(&GridSpec::torus(16, 32)));
        assert_eq!(a.len(), 64);
    }
}
