use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            offset,
            message: format!("truncated header (file is {} bytes)", bytes.len()),
        })
}

/// Parses an IDX image file into `(count, height, width, pixels in [0, 1])`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        });
    }
    let n = read_u32(bytes, 4)? as usize;
    let h = read_u32(bytes, 8)? as usize;
    let w = read_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    let needed = n * h * w;
    if body.len() < needed {
        return Err(Error::Format {
            offset: 16 + body.len(),
            message: format!("pixel data truncated: need {needed} bytes, have {}", body.len()),
        });
    }
    let pixels = body[..needed].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((n, h, w, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        });
    }
    let n = read_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::Format {
            offset: 8 + body.len(),
            message: format!("label data truncated: need {n} bytes, have {}", body.len()),
        });
    }
    Ok(body[..n].iter().map(|&b| usize::from(b)).collect())
}

/// Loads an IDX image/label file pair. Images become `[1, h, w]` tensors
/// scaled to `[0, 1]`; `num_classes` is one past the largest label.
pub fn load_idx(images: &Path, labels: &Path) -> Result<LabeledDataset> {
    let (n, h, w, pixels) = parse_idx_images(&std::fs::read(images)?)?;
    let ys = parse_idx_labels(&std::fs::read(labels)?)?;
    if ys.len() != n {
        return Err(Error::Format {
            offset: 4,
            message: format!("{n} images but {} labels", ys.len()),
        });
    }
    if n == 0 {
        return Err(Error::Format {
            offset: 4,
            message: "IDX file holds zero images".into(),
        });
    }
    let num_classes = ys.iter().max().map_or(0, |m| m + 1);
    let plane = h * w;
    let items = ys
        .into_iter()
        .enumerate()
        .map(|(i, y)| {
            let t = Tensor::from_parts(vec![1, h, w], pixels[i * plane..(i + 1) * plane].to_vec());
            (t, y)
        })
        .collect();
    let name = images
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    LabeledDataset::new(name, num_classes, items)
}

/// Loads a CSV with header `label,f0,f1,...` into rank-1 inputs.
pub fn load_csv(path: &Path) -> Result<LabeledDataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("label") || headers.len() < 2 {
        return Err(Error::Format {
            offset: 0,
            message: "CSV header must be `label,f0,f1,...`".into(),
        });
    }
    let mut items = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let offset = record.position().map_or(0, |p| p.byte() as usize);
        let parse_err = |msg: String| Error::Format { offset, message: msg };
        let label: usize = record[0]
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("row {row}: label: {e}")))?;
        let features = record
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(format!("row {row}: feature: {e}")))?;
        items.push((Tensor::new(vec![features.len()], features)?, label));
    }
    let num_classes = items.iter().map(|(_, y)| y + 1).max().unwrap_or(0);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    LabeledDataset::new(name, num_classes, items)
}
