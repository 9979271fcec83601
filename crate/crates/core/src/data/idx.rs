//! IDX reader/writer (the MNIST distribution format).
//!
//! Layout: a big-endian `u32` magic (`0x00000803` for u8 rank-3 image
//! tensors, `0x00000801` for u8 rank-1 label vectors), one big-endian `u32`
//! per dimension, then the raw bytes in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, offset: usize, message: String) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message,
        }
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        let end = self.pos + 4;
        if end > self.bytes.len() {
            return Err(self.fail(
                self.pos,
                format!("truncated header reading {field}: expected {end} bytes, file has {}", self.bytes.len()),
            ));
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..end].try_into().unwrap());
        self.pos = end;
        Ok(v)
    }

    fn body(&self, len: usize) -> Result<&'a [u8]> {
        let expected = self.pos + len;
        if self.bytes.len() < expected {
            return Err(self.fail(
                self.bytes.len(),
                format!("truncated body: expected length {expected} bytes, actual length {}", self.bytes.len()),
            ));
        }
        if self.bytes.len() > expected {
            return Err(self.fail(
                expected,
                format!("trailing data: expected length {expected} bytes, actual length {}", self.bytes.len()),
            ));
        }
        Ok(&self.bytes[self.pos..])
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads a u8 image tensor, returning `(rows, cols, pixels)`.
pub fn read_images(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = read_file(path)?;
    let mut r = Reader {
        path,
        bytes: &bytes,
        pos: 0,
    };
    let magic = r.u32("magic")?;
    if magic != IMAGES_MAGIC {
        return Err(r.fail(0, format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let n = r.u32("item count")? as usize;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let body = r.body(n * rows * cols)?;
    Ok((rows, cols, body.to_vec()))
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_file(path)?;
    let mut r = Reader {
        path,
        bytes: &bytes,
        pos: 0,
    };
    let magic = r.u32("magic")?;
    if magic != LABELS_MAGIC {
        return Err(r.fail(0, format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")));
    }
    let n = r.u32("item count")? as usize;
    Ok(r.body(n)?.to_vec())
}

/// Loads an image/label file pair, flattening each image and scaling
/// pixels by 1/255.
pub fn load_mnist_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let (rows, cols, pixels) = read_images(images)?;
    let raw_labels = read_labels(labels)?;
    let width = rows * cols;
    let n = pixels.len().checked_div(width).unwrap_or(0);
    if n != raw_labels.len() {
        return Err(Error::Consistency(format!(
            "{} holds {n} images but {} holds {} labels",
            images.display(),
            labels.display(),
            raw_labels.len()
        )));
    }
    if let Some(bad) = raw_labels.iter().find(|&&l| l > 9) {
        return Err(Error::Consistency(format!("label {bad} outside 0..10")));
    }
    let inputs = Array2::from_shape_vec((n, width), pixels.iter().map(|&p| p as f64 / 255.0).collect())
        .expect("shape computed from buffer length");
    Dataset::new(
        inputs,
        raw_labels.into_iter().map(usize::from).collect(),
        10,
        format!("mnist:{}", images.display()),
    )
}

/// Writes the dataset back as an IDX pair. Inputs must be multiples of
/// 1/255 in [0,1] (anything a loader produced) and `rows * cols` must equal
/// the feature width.
pub fn write_mnist_idx(ds: &Dataset, rows: usize, cols: usize, images: &Path, labels: &Path) -> Result<()> {
    if rows * cols != ds.n_features() {
        return Err(Error::Dimension {
            what: "IDX image shape".into(),
            expected: ds.n_features(),
            actual: rows * cols,
        });
    }
    let mut img = Vec::with_capacity(16 + ds.len() * rows * cols);
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [ds.len(), rows, cols] {
        img.extend_from_slice(&(d as u32).to_be_bytes());
    }
    for &v in ds.inputs().iter() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Validation(format!("pixel value {v} outside [0,1]")));
        }
        img.push((v * 255.0).round() as u8);
    }
    let mut lab = Vec::with_capacity(8 + ds.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    for &l in ds.labels() {
        lab.push(u8::try_from(l).map_err(|_| Error::Validation(format!("label {l} does not fit a byte")))?);
    }
    write_all(images, &img)?;
    write_all(labels, &lab)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
