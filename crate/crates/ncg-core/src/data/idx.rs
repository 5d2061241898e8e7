//! IDX container parsing (the MNIST on-disk format, big-endian).

use std::path::Path;

use byteorder::{BigEndian, ByteOrder};

use super::DenseSample;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(data: &[u8], offset: usize, what: &str) -> Result<u32> {
    data.get(offset..offset + 4)
        .map(BigEndian::read_u32)
        .ok_or_else(|| Error::format(format!("truncated file: missing {what}")))
}

/// Parse an IDX image file (`magic 0x00000803`) into per-image byte rows.
pub fn parse_idx_images(data: &[u8]) -> Result<Vec<Vec<u8>>> {
    let magic = read_u32(data, 0, "image magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(format!(
            "bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let n = read_u32(data, 4, "image count")? as usize;
    let rows = read_u32(data, 8, "row count")? as usize;
    let cols = read_u32(data, 12, "column count")? as usize;
    let per_image = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format("image dimensions overflow"))?;
    if n > 0 && per_image == 0 {
        return Err(Error::format("zero-sized image dimensions"));
    }
    let pixels = per_image
        .checked_mul(n)
        .ok_or_else(|| Error::format("image dimensions overflow"))?;
    let body = &data[16.min(data.len())..];
    if data.len() < 16 || body.len() != pixels {
        return Err(Error::format(format!(
            "image payload is {} bytes, header declares {pixels}",
            data.len().saturating_sub(16)
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    Ok(body.chunks_exact(per_image).map(|c| c.to_vec()).collect())
}

/// Parse an IDX label file (`magic 0x00000801`).
pub fn parse_idx_labels(data: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(data, 0, "label magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(format!(
            "bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let n = read_u32(data, 4, "label count")? as usize;
    let body = &data[8.min(data.len())..];
    if data.len() < 8 || body.len() != n {
        return Err(Error::format(format!(
            "label payload is {} bytes, header declares {n}",
            data.len().saturating_sub(8)
        )));
    }
    Ok(body.to_vec())
}

/// Load a paired IDX image/label file set into dense samples.
///
/// Byte intensities are preserved exactly (0..=255); sample order matches
/// file order.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<DenseSample>> {
    let images = parse_idx_images(&std::fs::read(images_path)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels_path)?)?;
    if images.len() != labels.len() {
        return Err(Error::consistency(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    Ok(images
        .into_iter()
        .zip(labels)
        .map(|(img, label)| DenseSample {
            values: img.into_iter().map(f32::from).collect(),
            label: label as usize,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn build_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(pixels);
        out
    }

    pub(crate) fn build_labels(labels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    #[test]
    fn parses_images_and_preserves_bytes() {
        let data = build_images(2, 2, 2, &[0, 1, 2, 3, 250, 251, 252, 253]);
        let imgs = parse_idx_images(&data).unwrap();
        assert_eq!(imgs, vec![vec![0, 1, 2, 3], vec![250, 251, 252, 253]]);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut data = build_images(1, 1, 1, &[7]);
        data[3] = 0x99;
        assert!(matches!(parse_idx_images(&data), Err(Error::Format(_))));
        let mut lab = build_labels(&[1]);
        lab[3] = 0x00;
        assert!(matches!(parse_idx_labels(&lab), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_truncation_and_trailing_bytes() {
        let data = build_images(2, 2, 2, &[0; 8]);
        assert!(matches!(parse_idx_images(&data[..10]), Err(Error::Format(_))));
        assert!(matches!(parse_idx_images(&data[..19]), Err(Error::Format(_))));
        let mut extended = data.clone();
        extended.push(0);
        assert!(matches!(parse_idx_images(&extended), Err(Error::Format(_))));
    }

    #[test]
    fn count_mismatch_is_a_consistency_error() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lab");
        std::fs::write(&ip, build_images(2, 1, 1, &[9, 8])).unwrap();
        std::fs::write(&lp, build_labels(&[1, 2, 3])).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Consistency(_))));
    }

    #[test]
    fn loads_matched_pair() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lab");
        std::fs::write(&ip, build_images(2, 1, 2, &[9, 8, 7, 6])).unwrap();
        std::fs::write(&lp, build_labels(&[1, 3])).unwrap();
        let samples = load_idx(&ip, &lp).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].values, vec![9.0, 8.0]);
        assert_eq!(samples[1].label, 3);
    }
}
