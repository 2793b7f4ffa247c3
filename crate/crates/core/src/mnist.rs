//! IDX files and 28x28 to 16x16 resampling.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::normalize;

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

#[derive(Debug, Clone, PartialEq)]
pub struct MnistSet {
    /// Row-major `rows * cols` images with pixels in `[0, 1]`.
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
    pub images_path: PathBuf,
    pub labels_path: PathBuf,
}

fn truncated(what: &str) -> Error {
    Error::Io(std::io::Error::new(
        std::io::ErrorKind::UnexpectedEof,
        format!("{what} file is truncated"),
    ))
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| truncated(what))
}

/// Parses an IDX3 image file: returns `(rows, cols, images)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    let magic = read_u32(bytes, 0, "image")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "image magic {magic}, expected {IMAGE_MAGIC}"
        )));
    }
    let count = read_u32(bytes, 4, "image")? as usize;
    let rows = read_u32(bytes, 8, "image")? as usize;
    let cols = read_u32(bytes, 12, "image")? as usize;
    let size = rows * cols;
    let body = bytes
        .get(16..16 + count * size)
        .ok_or_else(|| truncated("image"))?;
    let images = body
        .chunks_exact(size.max(1))
        .take(count)
        .map(|img| img.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    Ok((rows, cols, images))
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, "label")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "label magic {magic}, expected {LABEL_MAGIC}"
        )));
    }
    let count = read_u32(bytes, 4, "label")? as usize;
    let body = bytes.get(8..8 + count).ok_or_else(|| truncated("label"))?;
    Ok(body.to_vec())
}

/// Encodes images (pixels in `[0, 1]`, rounded to bytes) as IDX3.
pub fn encode_idx_images(rows: usize, cols: usize, images: &[Vec<f64>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend(v.to_be_bytes());
    }
    for img in images {
        out.extend(
            img.iter()
                .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend(LABEL_MAGIC.to_be_bytes());
    out.extend((labels.len() as u32).to_be_bytes());
    out.extend(labels);
    out
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<MnistSet> {
    let (rows, cols, images) = parse_idx_images(&fs::read(images_path)?)?;
    let labels = parse_idx_labels(&fs::read(labels_path)?)?;
    if images.len() != labels.len() {
        return Err(Error::Consistency(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::Format(format!("label {l} is not a digit")));
    }
    Ok(MnistSet {
        images,
        labels,
        rows,
        cols,
        images_path: images_path.to_path_buf(),
        labels_path: labels_path.to_path_buf(),
    })
}

/// Bilinear resampling of a 28x28 image to 16x16 (pixel centers aligned,
/// edges clamped), without normalization.
pub fn resample_28_to_16(image: &[f64]) -> Vec<f64> {
    assert_eq!(image.len(), 784, "expected a 28x28 image");
    const SRC: usize = 28;
    const DST: usize = 16;
    let scale = SRC as f64 / DST as f64;
    let coord = |o: usize| -> (usize, usize, f64) {
        let x = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (SRC - 1) as f64);
        let x0 = x.floor() as usize;
        let x1 = (x0 + 1).min(SRC - 1);
        (x0, x1, x - x0 as f64)
    };
    let mut out = Vec::with_capacity(DST * DST);
    for r in 0..DST {
        let (r0, r1, fr) = coord(r);
        for c in 0..DST {
            let (c0, c1, fc) = coord(c);
            let p = |rr: usize, cc: usize| image[rr * SRC + cc];
            let top = p(r0, c0) * (1.0 - fc) + p(r0, c1) * fc;
            let bottom = p(r1, c0) * (1.0 - fc) + p(r1, c1) * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}

/// [`resample_28_to_16`] followed by ℓ2 normalization; a zero image stays zero.
pub fn downsample_28_to_16(image: &[f64]) -> Vec<f64> {
    let mut out = resample_28_to_16(image);
    normalize(&mut out);
    out
}
