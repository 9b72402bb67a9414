//! Per-video low-level descriptor matrices and the `.tfds` file format:
//! magic `TFDS`, u32 version (1), u32 rows, u32 dims, then rows·dims f32
//! values row-major, all little-endian.

use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::io::write_atomic;
use crate::linalg::Matrix;

const MAGIC: &[u8; 4] = b"TFDS";
const VERSION: u32 = 1;
pub const EXTENSION: &str = "tfds";

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("descriptor set '{0}' has no rows")]
    Empty(String),
    #[error("descriptor set '{0}' contains non-finite values")]
    NonFinite(String),
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: expected {expected} dims, found {found}")]
    InconsistentDims { path: PathBuf, expected: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub video_id: String,
    matrix: Matrix,
}

impl DescriptorSet {
    pub fn new(video_id: impl Into<String>, matrix: Matrix) -> Result<Self, DescriptorError> {
        let video_id = video_id.into();
        if matrix.rows() == 0 {
            return Err(DescriptorError::Empty(video_id));
        }
        if !matrix.all_finite() {
            return Err(DescriptorError::NonFinite(video_id));
        }
        Ok(DescriptorSet { video_id, matrix })
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn all_finite(&self) -> bool {
        self.matrix.all_finite()
    }

    /// Values are stored as f32; callers wanting an exact round trip should
    /// build sets from f32-representable data.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.matrix.as_slice().len());
        out.extend_from_slice(MAGIC);
        out.write_u32::<LittleEndian>(VERSION).unwrap();
        out.write_u32::<LittleEndian>(self.len() as u32).unwrap();
        out.write_u32::<LittleEndian>(self.dim() as u32).unwrap();
        for v in self.matrix.as_slice() {
            out.write_f32::<LittleEndian>(*v as f32).unwrap();
        }
        out
    }

    pub fn from_bytes(video_id: &str, bytes: &[u8], path: &Path) -> Result<Self, DescriptorError> {
        let fmt = |msg: String| DescriptorError::Format { path: path.to_path_buf(), msg };
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(|_| fmt("file too short for header".into()))?;
        if &magic != MAGIC {
            return Err(fmt("bad magic, expected TFDS".into()));
        }
        let mut header = [0u32; 3];
        cur.read_u32_into::<LittleEndian>(&mut header)
            .map_err(|_| fmt("truncated header".into()))?;
        let [version, rows, dims] = header;
        if version != VERSION {
            return Err(fmt(format!("unsupported version {version}")));
        }
        let count = rows as usize * dims as usize;
        let remaining = bytes.len() - cur.position() as usize;
        if remaining != count * 4 {
            return Err(fmt(format!("expected {} payload bytes, found {remaining}", count * 4)));
        }
        let mut vals = vec![0f32; count];
        cur.read_f32_into::<LittleEndian>(&mut vals).map_err(|e| fmt(e.to_string()))?;
        let matrix = Matrix::from_vec(rows as usize, dims as usize, vals.into_iter().map(f64::from).collect());
        DescriptorSet::new(video_id, matrix).map_err(|e| fmt(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), DescriptorError> {
        write_atomic(path, &self.to_bytes())
            .map_err(|source| DescriptorError::Io { path: path.to_path_buf(), source })
    }

    /// Loads `<video_id>.tfds`; the id is the file stem.
    pub fn load(path: &Path) -> Result<Self, DescriptorError> {
        let bytes = fs::read(path).map_err(|source| DescriptorError::Io { path: path.to_path_buf(), source })?;
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        Self::from_bytes(id, &bytes, path)
    }
}

/// Loads every `.tfds` file in `dir`, sorted by file name. All sets must
/// share one dimensionality.
pub fn load_descriptor_dir(dir: &Path) -> Result<Vec<DescriptorSet>, DescriptorError> {
    let io_err = |source| DescriptorError::Io { path: dir.to_path_buf(), source };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == EXTENSION))
        .collect();
    paths.sort();
    let mut sets = Vec::with_capacity(paths.len());
    for p in &paths {
        let ds = DescriptorSet::load(p)?;
        if let Some(first) = sets.first().map(DescriptorSet::dim) {
            if ds.dim() != first {
                return Err(DescriptorError::InconsistentDims { path: p.clone(), expected: first, found: ds.dim() });
            }
        }
        sets.push(ds);
    }
    Ok(sets)
}

/// Stacks the rows of several sets into one matrix for GMM fitting.
pub fn pool_descriptors<'a, I>(sets: I) -> Matrix
where
    I: IntoIterator<Item = &'a DescriptorSet>,
{
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = 0;
    for s in sets {
        cols = s.dim();
        rows += s.len();
        data.extend_from_slice(s.matrix.as_slice());
    }
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_f32_data() {
        let m = Matrix::from_rows(&[vec![0.5, -1.25], vec![3.0, 1e-3f32 as f64]]).unwrap();
        let ds = DescriptorSet::new("vid", m).unwrap();
        let back = DescriptorSet::from_bytes("vid", &ds.to_bytes(), Path::new("vid.tfds")).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn header_layout() {
        let ds = DescriptorSet::new("v", Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap()).unwrap();
        let b = ds.to_bytes();
        assert_eq!(&b[..4], b"TFDS");
        assert_eq!(&b[4..16], &[1, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&b[16..20], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 16 + 12);
    }

    #[test]
    fn rejects_bad_files() {
        let p = Path::new("x.tfds");
        assert!(DescriptorSet::from_bytes("x", b"TFD", p).is_err());
        assert!(DescriptorSet::from_bytes("x", b"XXXX\x01\0\0\0\x01\0\0\0\x01\0\0\0\0\0\0\0", p).is_err());
        // zero rows
        assert!(DescriptorSet::from_bytes("x", b"TFDS\x01\0\0\0\0\0\0\0\x01\0\0\0", p).is_err());
        // payload one value short
        assert!(DescriptorSet::from_bytes("x", b"TFDS\x01\0\0\0\x01\0\0\0\x02\0\0\0\0\0\0\0", p).is_err());
    }

    #[test]
    fn empty_and_non_finite_rejected() {
        assert!(DescriptorSet::new("e", Matrix::zeros(0, 3)).is_err());
        assert!(DescriptorSet::new("n", Matrix::from_rows(&[vec![f64::INFINITY]]).unwrap()).is_err());
    }
}
