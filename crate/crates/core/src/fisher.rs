//! Fisher-vector encoding of a descriptor set under a diagonal GMM.
//!
//! The vector holds the mean-gradient block followed by the
//! variance-gradient block, each laid out component-major, so its length
//! is `2·K·D`. For component k and dimension j, with γ the posterior and
//! z = (x − μ)/σ:
//!
//! ```text
//! mean     = 1/(n·√π_k)  · Σ_i γ_k(x_i) · z_ij
//! variance = 1/(n·√2π_k) · Σ_i γ_k(x_i) · (z_ij² − 1)
//! ```
//!
//! Row contributions are summed pairwise (split at the midpoint), which
//! makes encoding a set concatenated with itself reproduce the encoding of
//! the set bit-for-bit.

use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::DescriptorSet;
use crate::gmm::{GmmError, GmmModel};
use crate::io::write_atomic;
use crate::linalg::norm;

const LEAF_ROWS: usize = 1;
const FV_MAGIC: &[u8; 4] = b"TFFV";
const FV_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FisherError {
    #[error("descriptor set is empty")]
    Empty,
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error("{path}: {msg}")]
    File { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    Ssqrt,
    L2,
    #[default]
    SsqrtL2,
}

impl std::str::FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Normalization::None),
            "ssqrt" => Ok(Normalization::Ssqrt),
            "l2" => Ok(Normalization::L2),
            "ssqrt_l2" => Ok(Normalization::SsqrtL2),
            other => Err(format!("unknown normalization '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherVector {
    pub video_id: String,
    pub values: Vec<f64>,
    /// All-zero encoding; L2 normalization was skipped.
    pub degenerate: bool,
}

/// Adds the unscaled gradient sums of `rows[lo..hi]` into `out`.
fn accumulate(gmm: &GmmModel, ds: &DescriptorSet, lo: usize, hi: usize, out: &mut [f64], scratch: &mut Scratch) {
    if hi - lo <= LEAF_ROWS {
        let (k, d) = (gmm.k, gmm.d);
        let var_off = k * d;
        for i in lo..hi {
            let x = ds.row(i);
            let gamma = gmm.responsibilities(x).expect("dimensions checked by caller");
            for c in 0..k {
                let g = gamma[c];
                if g == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let z = (x[j] - gmm.means[c][j]) / gmm.variances[c][j].sqrt();
                    out[c * d + j] += g * z;
                    out[var_off + c * d + j] += g * (z * z - 1.0);
                }
            }
        }
        return;
    }
    let mid = lo + (hi - lo) / 2;
    accumulate(gmm, ds, lo, mid, out, scratch);
    let mut right = scratch.take(out.len());
    accumulate(gmm, ds, mid, hi, &mut right, scratch);
    for (o, r) in out.iter_mut().zip(&right) {
        *o += r;
    }
    scratch.give(right);
}

/// Reuses zeroed buffers across the recursion.
struct Scratch(Vec<Vec<f64>>);

impl Scratch {
    fn take(&mut self, len: usize) -> Vec<f64> {
        match self.0.pop() {
            Some(mut v) => {
                v.iter_mut().for_each(|x| *x = 0.0);
                v
            }
            None => vec![0.0; len],
        }
    }

    fn give(&mut self, v: Vec<f64>) {
        self.0.push(v);
    }
}

/// Encodes one descriptor set.
pub fn encode_fisher(gmm: &GmmModel, ds: &DescriptorSet, normalize: Normalization) -> Result<FisherVector, FisherError> {
    if ds.dim() != gmm.d {
        return Err(GmmError::DimensionMismatch { expected: gmm.d, found: ds.dim() }.into());
    }
    let n = ds.len();
    if n == 0 {
        return Err(FisherError::Empty);
    }
    if !ds.all_finite() {
        return Err(GmmError::NonFinite.into());
    }
    let (k, d) = (gmm.k, gmm.d);
    let mut values = vec![0.0; 2 * k * d];
    accumulate(gmm, ds, 0, n, &mut values, &mut Scratch(Vec::new()));

    let nf = n as f64;
    for c in 0..k {
        let mean_scale = 1.0 / (nf * gmm.weights[c].sqrt());
        let var_scale = 1.0 / (nf * (2.0 * gmm.weights[c]).sqrt());
        for j in 0..d {
            values[c * d + j] *= mean_scale;
            values[k * d + c * d + j] *= var_scale;
        }
    }

    if matches!(normalize, Normalization::Ssqrt | Normalization::SsqrtL2) {
        for v in values.iter_mut() {
            *v = v.signum() * v.abs().sqrt();
        }
    }
    let mut degenerate = false;
    if matches!(normalize, Normalization::L2 | Normalization::SsqrtL2) {
        let nrm = norm(&values);
        if nrm > 0.0 {
            values.iter_mut().for_each(|v| *v /= nrm);
        } else {
            degenerate = true;
        }
    }
    Ok(FisherVector { video_id: ds.video_id.clone(), values, degenerate })
}

impl FisherVector {
    /// `TFFV` magic, u32 version, u32 length, u8 degenerate flag, then the
    /// values as little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + 8 * self.values.len());
        out.extend_from_slice(FV_MAGIC);
        out.write_u32::<LittleEndian>(FV_VERSION).unwrap();
        out.write_u32::<LittleEndian>(self.values.len() as u32).unwrap();
        out.push(u8::from(self.degenerate));
        for v in &self.values {
            out.write_f64::<LittleEndian>(*v).unwrap();
        }
        out
    }

    pub fn from_bytes(video_id: &str, bytes: &[u8]) -> Result<Self, String> {
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(|_| "file too short for header".to_string())?;
        if &magic != FV_MAGIC {
            return Err("bad magic, expected TFFV".into());
        }
        let version = cur.read_u32::<LittleEndian>().map_err(|_| "truncated header")?;
        if version != FV_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let len = cur.read_u32::<LittleEndian>().map_err(|_| "truncated header")? as usize;
        let degenerate = cur.read_u8().map_err(|_| "truncated header")? != 0;
        let remaining = bytes.len() - cur.position() as usize;
        if remaining != len * 8 {
            return Err(format!("expected {} payload bytes, found {remaining}", len * 8));
        }
        let mut values = vec![0.0; len];
        cur.read_f64_into::<LittleEndian>(&mut values).map_err(|e| e.to_string())?;
        Ok(FisherVector { video_id: video_id.to_string(), values, degenerate })
    }

    pub fn save(&self, path: &Path) -> Result<(), FisherError> {
        write_atomic(path, &self.to_bytes())
            .map_err(|e| FisherError::File { path: path.to_path_buf(), msg: e.to_string() })
    }

    /// Loads `<video_id>.fv`; the id is taken from the file stem.
    pub fn load(path: &Path) -> Result<Self, FisherError> {
        let file_err = |msg: String| FisherError::File { path: path.to_path_buf(), msg };
        let bytes = fs::read(path).map_err(|e| file_err(e.to_string()))?;
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        Self::from_bytes(id, &bytes).map_err(file_err)
    }
}

/// Loads every `*.fv` file in `dir`, sorted by video id.
pub fn load_fisher_dir(dir: &Path) -> Result<Vec<FisherVector>, FisherError> {
    let file_err = |msg: String| FisherError::File { path: dir.to_path_buf(), msg };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| file_err(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "fv"))
        .collect();
    paths.sort();
    paths.iter().map(|p| FisherVector::load(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn unit_model(d: usize) -> GmmModel {
        GmmModel { k: 1, d, weights: vec![1.0], means: vec![vec![0.5; d]], variances: vec![vec![2.0; d]] }
    }

    #[test]
    fn descriptors_at_mean() {
        let gmm = unit_model(3);
        let ds = DescriptorSet::new("v", Matrix::from_rows(&[vec![0.5; 3], vec![0.5; 3]]).unwrap()).unwrap();
        let fv = encode_fisher(&gmm, &ds, Normalization::None).unwrap();
        assert_eq!(fv.values.len(), 6);
        assert!(fv.values[..3].iter().all(|v| *v == 0.0));
        for v in &fv.values[3..] {
            assert!((v + 1.0 / 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn ssqrt_l2_has_unit_norm() {
        let gmm = unit_model(2);
        let ds = DescriptorSet::new("v", Matrix::from_rows(&[vec![1.0, -3.0], vec![0.2, 2.0]]).unwrap()).unwrap();
        let fv = encode_fisher(&gmm, &ds, Normalization::SsqrtL2).unwrap();
        assert!((norm(&fv.values) - 1.0).abs() < 1e-12);
        assert!(!fv.degenerate);
    }

    #[test]
    fn dimension_mismatch() {
        let gmm = unit_model(2);
        let ds = DescriptorSet::new("v", Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap()).unwrap();
        assert!(matches!(
            encode_fisher(&gmm, &ds, Normalization::None),
            Err(FisherError::Gmm(GmmError::DimensionMismatch { expected: 2, found: 3 }))
        ));
    }

    #[test]
    fn bytes_round_trip() {
        let fv = FisherVector { video_id: "v".into(), values: vec![0.1, -2.5, f64::MIN_POSITIVE], degenerate: false };
        let back = FisherVector::from_bytes("v", &fv.to_bytes()).unwrap();
        assert_eq!(back, fv);
        assert!(FisherVector::from_bytes("v", &fv.to_bytes()[..20]).is_err());
    }
}
