//! Binary model checkpoints: magic, format version, layer dimensions, then
//! every parameter as a little-endian `f64`, weights row-major.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Mlp, PerceptionError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ABILMLP\0";
const VERSION: u32 = 1;

pub fn save_mlp(model: &Mlp, mut w: impl Write) -> Result<(), PerceptionError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(model.dims().len() as u32)?;
    for d in model.dims() {
        w.write_u32::<LittleEndian>(*d as u32)?;
    }
    for p in model.params() {
        w.write_f64::<LittleEndian>(*p)?;
    }
    Ok(())
}

/// Load a checkpoint; `expect_dims` rejects a model of another shape.
pub fn load_mlp(mut r: impl Read, expect_dims: Option<&[usize]>) -> Result<Mlp, PerceptionError> {
    let bad = |m: String| PerceptionError::Checkpoint(m);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n = r.read_u32::<LittleEndian>()? as usize;
    if !(2..=16).contains(&n) {
        return Err(bad(format!("implausible layer count {n}")));
    }
    let dims: Vec<usize> = (0..n)
        .map(|_| r.read_u32::<LittleEndian>().map(|d| d as usize))
        .collect::<Result<_, _>>()?;
    if dims.contains(&0) {
        return Err(bad("zero-width layer".into()));
    }
    if let Some(want) = expect_dims {
        if want != dims.as_slice() {
            return Err(bad(format!("layer dimensions {dims:?}, expected {want:?}")));
        }
    }
    let count: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let mut params = vec![0.0; count];
    r.read_f64_into::<LittleEndian>(&mut params)?;
    if params.iter().any(|p| !p.is_finite()) {
        return Err(bad("non-finite parameter".into()));
    }
    Ok(Mlp::from_params(dims, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_shape_check() {
        let m = Mlp::new(&[4, 6, 3], 9);
        let mut buf = Vec::new();
        save_mlp(&m, &mut buf).unwrap();
        let back = load_mlp(buf.as_slice(), Some(&[4, 6, 3])).unwrap();
        assert_eq!(back.params(), m.params());
        assert!(load_mlp(buf.as_slice(), Some(&[4, 5, 3])).is_err());
        assert!(load_mlp(&buf[..buf.len() - 3], None).is_err());
        buf[0] = b'X';
        assert!(load_mlp(buf.as_slice(), None).is_err());
    }
}
