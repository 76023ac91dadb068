//! Weight checkpoint.
//!
//! ```text
//! magic   b"FGWEIGHT"   8 bytes
//! version u32           (= 1)
//! layers  u32
//! per layer: rows u64, cols u64
//! data    f64[Σ rows·cols]   row-major, layer by layer, raw IEEE-754 bits
//! ```
//! All integers little-endian.

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::gcn::GcnWeights;
use crate::numkit::Matrix;

pub const WEIGHTS_MAGIC: &[u8; 8] = b"FGWEIGHT";
pub const WEIGHTS_VERSION: u32 = 1;

pub fn write_weights(w: &GcnWeights, out: &mut impl Write) -> Result<()> {
    out.write_all(WEIGHTS_MAGIC)?;
    out.write_u32::<LE>(WEIGHTS_VERSION)?;
    out.write_u32::<LE>(w.layers.len() as u32)?;
    for m in &w.layers {
        out.write_u64::<LE>(m.rows() as u64)?;
        out.write_u64::<LE>(m.cols() as u64)?;
    }
    for m in &w.layers {
        for &v in m.data() {
            out.write_u64::<LE>(v.to_bits())?;
        }
    }
    Ok(())
}

pub fn read_weights(input: &mut impl Read) -> Result<GcnWeights> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != WEIGHTS_MAGIC {
        return Err(Error::Format("not a weight checkpoint (bad magic)".into()));
    }
    let version = input.read_u32::<LE>()?;
    if version != WEIGHTS_VERSION {
        return Err(Error::Format(format!("unsupported weight checkpoint version {version}")));
    }
    let n = input.read_u32::<LE>()? as usize;
    let mut shapes = Vec::with_capacity(n);
    for _ in 0..n {
        let r = input.read_u64::<LE>()? as usize;
        let c = input.read_u64::<LE>()? as usize;
        if r.checked_mul(c).is_none_or(|len| len > 1 << 32) {
            return Err(Error::Format(format!("implausible layer shape {r}×{c}")));
        }
        shapes.push((r, c));
    }
    let mut layers = Vec::with_capacity(n);
    for (r, c) in shapes {
        let data = (0..r * c)
            .map(|_| Ok(f64::from_bits(input.read_u64::<LE>()?)))
            .collect::<Result<Vec<_>>>()?;
        layers.push(Matrix::from_vec(r, c, data)?);
    }
    GcnWeights::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;

    #[test]
    fn bit_exact_round_trip() {
        let mut w = GcnWeights::glorot(&[5, 4, 3], &mut RngStream::new(8));
        w.layers[0].set(0, 0, -0.0);
        w.layers[1].set(2, 1, f64::MIN_POSITIVE / 3.0);
        let mut bytes = Vec::new();
        write_weights(&w, &mut bytes).unwrap();
        let back = read_weights(&mut bytes.as_slice()).unwrap();
        let bits = |w: &GcnWeights| w.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&w));
        assert_eq!(back.dims(), w.dims());
    }

    #[test]
    fn truncated_and_bad_magic() {
        let w = GcnWeights::zeros(&[2, 2]);
        let mut bytes = Vec::new();
        write_weights(&w, &mut bytes).unwrap();
        assert!(read_weights(&mut &bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(matches!(read_weights(&mut bytes.as_slice()), Err(Error::Format(_))));
    }
}
