use std::fs;
use std::path::Path;

use super::{Layout, SampleSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(offset as u64, "truncated header"))
}

/// Parses an IDX image file: `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(0, format!("image magic {magic}, expected {IMAGE_MAGIC}")));
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let needed = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < needed {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated image data: {needed} pixel bytes declared, {} present", body.len()),
        ));
    }
    Ok((count, rows, cols, &body[..needed]))
}

/// Parses an IDX label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(0, format!("label magic {magic}, expected {LABEL_MAGIC}")));
    }
    let count = read_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated label data: {count} labels declared, {} present", body.len()),
        ));
    }
    Ok(&body[..count])
}

/// Loads an IDX image/label pair. Pixels keep their 0-255 values; the class
/// count is one more than the largest label.
pub fn load_idx<T: Scalar>(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<SampleSet<T>> {
    let images_path = images_path.as_ref();
    let image_bytes = fs::read(images_path)?;
    let label_bytes = fs::read(labels_path.as_ref())?;
    let (count, rows, cols, pixels) = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    if labels.len() != count {
        return Err(Error::format(4, format!("{count} images but {} labels", labels.len())));
    }
    let layout = Layout { channels: 1, height: rows, width: cols };
    let features = Matrix::new(count, rows * cols, pixels.iter().map(|&p| T::from_u8(p).unwrap()).collect())?;
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let class_count = labels.iter().max().map_or(1, |m| m + 1);
    let name = images_path.file_stem().map_or_else(|| "idx".into(), |s| s.to_string_lossy().into_owned());
    SampleSet::new(name, features, layout, Some(labels), class_count)
}

/// Writes a single-channel labeled set as an IDX pair. Every feature must be
/// an integer in 0..=255.
pub fn write_idx<T: Scalar>(
    set: &SampleSet<T>,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let layout = set.layout();
    if layout.channels != 1 {
        return Err(Error::input("IDX export supports single-channel images only"));
    }
    let labels = set.labels().ok_or_else(|| Error::input("IDX export needs labels"))?;
    let mut images = Vec::with_capacity(16 + set.features().values().len());
    images.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for dim in [set.len(), layout.height, layout.width] {
        images.extend_from_slice(&u32::try_from(dim).map_err(|_| Error::input("dimension exceeds u32"))?.to_be_bytes());
    }
    for &v in set.features().values() {
        let byte = v
            .to_u8()
            .filter(|&b| T::from_u8(b) == Some(v))
            .ok_or_else(|| Error::input(format!("pixel value {v} is not a byte")))?;
        images.push(byte);
    }
    let mut label_bytes = Vec::with_capacity(8 + labels.len());
    label_bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    label_bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        label_bytes.push(u8::try_from(l).map_err(|_| Error::input("label exceeds 255"))?);
    }
    fs::write(images_path, images)?;
    fs::write(labels_path, label_bytes)?;
    Ok(())
}
