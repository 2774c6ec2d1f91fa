//! Feature cache files: a sequence of records, each a 16-byte header
//! (`rows: u32`, `cols: u32`, `layout tag: u32`, `reserved: u32`, all
//! little-endian) followed by `rows * cols` little-endian `f32` values.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{DspError, FeatureTensor, Layout};
use crate::scalar::Scalar;

pub const TENSOR_HEADER_LEN: usize = 16;

pub fn write_tensor<T: Scalar, W: Write>(w: &mut W, t: &FeatureTensor<T>) -> io::Result<()> {
    w.write_u32::<LittleEndian>(t.rows() as u32)?;
    w.write_u32::<LittleEndian>(t.cols() as u32)?;
    w.write_u32::<LittleEndian>(t.layout().tag())?;
    w.write_u32::<LittleEndian>(0)?;
    for v in t.values() {
        w.write_f32::<LittleEndian>(v.as_f32())?;
    }
    Ok(())
}

/// Reads one record; `Ok(None)` at a clean end of stream.
pub fn read_tensor<T: Scalar, R: Read>(r: &mut R) -> Result<Option<FeatureTensor<T>>, DspError> {
    let mut header = [0u8; TENSOR_HEADER_LEN];
    let mut filled = 0;
    while filled < TENSOR_HEADER_LEN {
        let n = r.read(&mut header[filled..])?;
        if n == 0 {
            return if filled == 0 {
                Ok(None)
            } else {
                Err(DspError::Io("truncated tensor header".into()))
            };
        }
        filled += n;
    }
    let mut h = &header[..];
    let rows = h.read_u32::<LittleEndian>()? as usize;
    let cols = h.read_u32::<LittleEndian>()? as usize;
    let tag = h.read_u32::<LittleEndian>()?;
    let layout = Layout::from_tag(tag).ok_or_else(|| DspError::Io(format!("unknown layout tag {tag}")))?;
    let mut raw = vec![0f32; rows * cols];
    r.read_f32_into::<LittleEndian>(&mut raw)?;
    let values = raw.into_iter().map(|v| T::lit(v as f64)).collect();
    FeatureTensor::new(values, rows, cols, layout).map(Some)
}

pub fn read_tensors<T: Scalar, R: Read>(r: &mut R) -> Result<Vec<FeatureTensor<T>>, DspError> {
    let mut out = Vec::new();
    while let Some(t) = read_tensor(r)? {
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = FeatureTensor::new(vec![1.5f32; 64 * 41], 64, 41, Layout::AccMel64x41).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(buf.len(), 16 + 64 * 41 * 4);
        assert_eq!(&buf[..16], &[64, 0, 0, 0, 41, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&buf[16..20], &1.5f32.to_le_bytes());
    }

    #[test]
    fn truncated_stream() {
        let t = FeatureTensor::new(vec![0.0f32; 3200], 1, 3200, Layout::Tko).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        buf.truncate(100);
        assert!(read_tensors::<f32, _>(&mut buf.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(seed in proptest::collection::vec(-1e6f32..1e6, 1..8)) {
            let vals: Vec<f32> = (0..64 * 61).map(|i| seed[i % seed.len()] * (i as f32)).collect();
            let t = FeatureTensor::new(vals, 64, 61, Layout::MicMel64x61).unwrap();
            let mut buf = Vec::new();
            write_tensor(&mut buf, &t).unwrap();
            write_tensor(&mut buf, &t).unwrap();
            let back = read_tensors::<f32, _>(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), 2);
            prop_assert_eq!(&back[1], &t);
        }
    }
}
