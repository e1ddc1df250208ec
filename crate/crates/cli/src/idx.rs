//! IDX binary files as used by the MNIST distribution.
//!
//! Layout: a big-endian `u32` magic (`0x00000803` for rank-3 unsigned-byte
//! image stacks, `0x00000801` for label vectors), one big-endian `u32` per
//! dimension, then the raw bytes in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use htsne_core::DataMatrix;

use crate::error::DataError;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Option<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn header(bytes: &[u8], magic: u32, rank: usize, path: &Path) -> Result<Vec<usize>, DataError> {
    let found = be_u32(bytes, 0)
        .ok_or_else(|| DataError::format(path, "file too short for an IDX header"))?;
    if found != magic {
        return Err(DataError::format(
            path,
            format!("bad magic number {found:#010x}, expected {magic:#010x}"),
        ));
    }
    (0..rank)
        .map(|d| {
            be_u32(bytes, 4 + 4 * d)
                .map(|v| v as usize)
                .ok_or_else(|| DataError::format(path, "truncated IDX header"))
        })
        .collect()
}

fn payload<'a>(
    bytes: &'a [u8],
    offset: usize,
    len: usize,
    path: &Path,
) -> Result<&'a [u8], DataError> {
    let available = bytes.len().saturating_sub(offset);
    if available < len {
        return Err(DataError::format(
            path,
            format!("truncated payload: expected {len} bytes, found {available}"),
        ));
    }
    if available > len {
        return Err(DataError::format(
            path,
            format!("{} trailing bytes after the payload", available - len),
        ));
    }
    Ok(&bytes[offset..])
}

pub fn parse_images(bytes: &[u8], path: &Path) -> Result<IdxImages, DataError> {
    let dims = header(bytes, IMAGES_MAGIC, 3, path)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| DataError::format(path, "image dimensions overflow"))?;
    let pixels = payload(bytes, 16, len, path)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>, DataError> {
    let count = header(bytes, LABELS_MAGIC, 1, path)?[0];
    Ok(payload(bytes, 8, count, path)?.to_vec())
}

pub fn read_images(path: &Path) -> Result<IdxImages, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    parse_images(&bytes, path)
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    parse_labels(&bytes, path)
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    assert_eq!(
        images.pixels.len(),
        images.count * images.pixels_per_image()
    );
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGES_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn to_matrix(images: &IdxImages, path: &Path) -> Result<DataMatrix, DataError> {
    let values = images.pixels.iter().map(|&b| f64::from(b)).collect();
    DataMatrix::new(images.count, images.pixels_per_image(), values)
        .map_err(|e| DataError::format(path, e.to_string()))
}

/// Images as an `n × (rows·cols)` matrix of grey values in `[0, 255]`.
pub fn load_idx(
    images_path: &Path,
    labels_path: Option<&Path>,
) -> Result<(DataMatrix, Option<Vec<i64>>), DataError> {
    let images = read_images(images_path)?;
    let labels = match labels_path {
        Some(lp) => {
            let labels = read_labels(lp)?;
            if labels.len() != images.count {
                return Err(DataError::format(
                    lp,
                    format!(
                        "{} labels for {} images in {}",
                        labels.len(),
                        images.count,
                        images_path.display()
                    ),
                ));
            }
            Some(labels.into_iter().map(i64::from).collect())
        }
        None => None,
    };
    Ok((to_matrix(&images, images_path)?, labels))
}

/// File names of the four MNIST files, with both common spellings.
const MNIST_PARTS: [[&str; 2]; 2] = [
    ["train-images-idx3-ubyte", "train-labels-idx1-ubyte"],
    ["t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"],
];

fn locate(dir: &Path, name: &str) -> Option<PathBuf> {
    [name.to_owned(), name.replacen("-idx", ".idx", 1)]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

/// Whether `dir` holds the training and test files of MNIST.
pub fn is_mnist_dir(dir: &Path) -> bool {
    MNIST_PARTS
        .iter()
        .flatten()
        .all(|n| locate(dir, n).is_some())
}

/// Training and test sets concatenated, 70 000 images for the full data.
pub fn load_mnist_dir(dir: &Path) -> Result<(DataMatrix, Vec<i64>), DataError> {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for [img_name, lbl_name] in MNIST_PARTS {
        let missing = |n: &str| DataError::io(&dir.join(n), std::io::ErrorKind::NotFound.into());
        let img = locate(dir, img_name).ok_or_else(|| missing(img_name))?;
        let lbl = locate(dir, lbl_name).ok_or_else(|| missing(lbl_name))?;
        let (data, l) = load_idx(&img, Some(&lbl))?;
        if *width.get_or_insert(data.n_cols()) != data.n_cols() {
            return Err(DataError::format(
                &img,
                "image size differs between training and test files",
            ));
        }
        values.extend(data.into_values());
        labels.extend(l.unwrap_or_default());
    }
    let n = labels.len();
    let data = DataMatrix::new(n, width.unwrap_or(0), values)
        .map_err(|e| DataError::format(dir, e.to_string()))?;
    Ok((data, labels))
}
