//! Reader for the big-endian IDX image and label files.

use std::fs;
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};

use super::data::DataError;
use crate::perception::Instance;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn err(m: impl Into<String>) -> DataError {
    DataError::Idx(m.into())
}

/// Images as pixel vectors scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Instance>, DataError> {
    let mut r = bytes;
    let magic = r
        .read_u32::<BigEndian>()
        .map_err(|_| err("truncated header"))?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(err(format!("bad image magic {magic:#010x}")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = r
            .read_u32::<BigEndian>()
            .map_err(|_| err("truncated header"))? as usize;
    }
    let [n, rows, cols] = dims;
    let size = rows * cols;
    if r.len() < n * size {
        return Err(err(format!(
            "truncated payload: {} bytes for {n} images of {size}",
            r.len()
        )));
    }
    Ok(r[..n * size]
        .chunks(size.max(1))
        .take(n)
        .map(|c| c.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect())
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>, DataError> {
    let mut r = bytes;
    let magic = r
        .read_u32::<BigEndian>()
        .map_err(|_| err("truncated header"))?;
    if magic != IDX_LABELS_MAGIC {
        return Err(err(format!("bad label magic {magic:#010x}")));
    }
    let n = r
        .read_u32::<BigEndian>()
        .map_err(|_| err("truncated header"))? as usize;
    if r.len() < n {
        return Err(err(format!(
            "truncated payload: {} labels for {n}",
            r.len()
        )));
    }
    r[..n]
        .iter()
        .map(|&b| {
            if b <= 9 {
                Ok(b as usize)
            } else {
                Err(err(format!("label {b} outside 0..9")))
            }
        })
        .collect()
}

/// Paired images and labels.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Vec<(Instance, usize)>, DataError> {
    let xs = parse_idx_images(&fs::read(images)?)?;
    let ys = parse_idx_labels(&fs::read(labels)?)?;
    if xs.len() != ys.len() {
        return Err(err(format!("{} images but {} labels", xs.len(), ys.len())));
    }
    Ok(xs.into_iter().zip(ys).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images(n: u32, payload: &[u8]) -> Vec<u8> {
        let mut v = IDX_IMAGES_MAGIC.to_be_bytes().to_vec();
        for d in [n, 2, 2] {
            v.extend(d.to_be_bytes());
        }
        v.extend(payload);
        v
    }

    fn labels(ls: &[u8]) -> Vec<u8> {
        let mut v = IDX_LABELS_MAGIC.to_be_bytes().to_vec();
        v.extend((ls.len() as u32).to_be_bytes());
        v.extend(ls);
        v
    }

    #[test]
    fn parses_and_scales() {
        let xs = parse_idx_images(&images(2, &[0, 255, 51, 102, 1, 2, 3, 4])).unwrap();
        assert_eq!(xs.len(), 2);
        assert_eq!(xs[0], vec![0.0, 1.0, 0.2, 0.4]);
        assert_eq!(parse_idx_labels(&labels(&[3, 9])).unwrap(), vec![3, 9]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_idx_images(&labels(&[1])).is_err());
        assert!(parse_idx_images(&images(3, &[0; 8])).is_err());
        assert!(parse_idx_labels(&labels(&[10])).is_err());
    }

    #[test]
    fn count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (pi, pl) = (dir.path().join("i"), dir.path().join("l"));
        fs::write(&pi, images(2, &[0; 8])).unwrap();
        fs::write(&pl, labels(&[1])).unwrap();
        assert!(load_idx(&pi, &pl).is_err());
        fs::write(&pl, labels(&[1, 2])).unwrap();
        assert_eq!(load_idx(&pi, &pl).unwrap().len(), 2);
    }
}
