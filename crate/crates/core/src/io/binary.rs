use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// File signature of the dense tensor format.
pub const MAGIC: [u8; 8] = *b"TPCA3\0\0\x01";

const HEADER_LEN: usize = 8 + 3 * 8;

fn payload_len(dims: [u64; 3]) -> Result<usize> {
    if dims.contains(&0) {
        return Err(Error::Format(format!(
            "zero dimension in {}x{}x{}",
            dims[0], dims[1], dims[2]
        )));
    }
    dims.iter()
        .try_fold(8usize, |acc, &d| {
            usize::try_from(d).ok().and_then(|d| acc.checked_mul(d))
        })
        .ok_or_else(|| {
            Error::Format(format!(
                "dimensions {}x{}x{} overflow",
                dims[0], dims[1], dims[2]
            ))
        })
}

/// Serializes `t` as magic, three little-endian `u64` dims, then the entries
/// as little-endian `f64` in storage order.
pub fn encode_tensor(t: &Tensor3) -> Vec<u8> {
    let (a, b, c) = t.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.data().len());
    out.extend_from_slice(&MAGIC);
    for d in [a, b, c] {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for x in t.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn decode_from(mut r: impl Read) -> std::io::Result<Result<Tensor3>> {
    let mut magic = [0u8; 8];
    if let Err(e) = r.read_exact(&mut magic) {
        return truncated(e, "header");
    }
    if magic != MAGIC {
        return Ok(Err(Error::Format("bad magic".into())));
    }
    let mut dims = [0u64; 3];
    for d in &mut dims {
        let mut buf = [0u8; 8];
        if let Err(e) = r.read_exact(&mut buf) {
            return truncated(e, "header");
        }
        *d = u64::from_le_bytes(buf);
    }
    let len = match payload_len(dims) {
        Ok(len) => len,
        Err(e) => return Ok(Err(e)),
    };
    let mut data = Vec::with_capacity(len / 8);
    let mut buf = [0u8; 8];
    for _ in 0..len / 8 {
        if let Err(e) = r.read_exact(&mut buf) {
            return truncated(e, "payload");
        }
        data.push(f64::from_le_bytes(buf));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Ok(Err(Error::Format("trailing bytes after payload".into())));
    }
    let [a, b, c] = dims.map(|d| d as usize);
    Ok(Tensor3::new(a, b, c, data))
}

fn truncated<T>(e: std::io::Error, part: &str) -> std::io::Result<Result<T>> {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Ok(Err(Error::Format(format!("truncated {part}"))))
    } else {
        Err(e)
    }
}

/// Inverse of [`encode_tensor`].
pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor3> {
    decode_from(bytes).expect("reading from a slice cannot fail")
}

pub fn write_tensor(path: &Path, t: &Tensor3) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_tensor(t))
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a tensor file; the signature is checked before any payload is read.
pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode_from(BufReader::new(file)).map_err(|e| Error::io(path, e))?
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sample_gaussian_tensor, SeededRng};
    use proptest::prelude::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let t = sample_gaussian_tensor(3, 4, 5, 1.0, &mut SeededRng::new(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.bin");
        write_tensor(&p, &t).unwrap();
        let back = read_tensor(&p).unwrap();
        assert_eq!(back.dims(), (3, 4, 5));
        let bits = |t: &Tensor3| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&t));
        assert_eq!(std::fs::read(&p).unwrap().len(), HEADER_LEN + 60 * 8);
    }

    #[test]
    fn rejects_malformed_files() {
        let t = Tensor3::from_fn(2, 2, 2, |i, j, k| (i + j + k) as f64);
        let good = encode_tensor(&t);

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_tensor(&bad_magic), Err(Error::Format(m)) if m.contains("magic")));
        // the magic is checked before anything else is read
        assert!(
            matches!(decode_tensor(b"NOTATENSOR"), Err(Error::Format(m)) if m.contains("magic"))
        );

        assert!(
            matches!(decode_tensor(&good[..good.len() - 3]), Err(Error::Format(m)) if m.contains("truncated"))
        );
        assert!(
            matches!(decode_tensor(&good[..12]), Err(Error::Format(m)) if m.contains("truncated"))
        );

        let mut extra = good.clone();
        extra.push(0);
        assert!(decode_tensor(&extra).is_err());

        let mut zero = good.clone();
        zero[8..16].copy_from_slice(&0u64.to_le_bytes());
        assert!(matches!(decode_tensor(&zero), Err(Error::Format(m)) if m.contains("zero")));

        let mut huge = good.clone();
        for d in 0..3 {
            huge[8 + 8 * d..16 + 8 * d].copy_from_slice(&u64::MAX.to_le_bytes());
        }
        assert!(matches!(decode_tensor(&huge), Err(Error::Format(m)) if m.contains("overflow")));
    }

    proptest! {
        #[test]
        fn encode_decode_identity(
            d in (1usize..5, 1usize..5, 1usize..5),
            seed in any::<u64>(),
        ) {
            let t = sample_gaussian_tensor(d.0, d.1, d.2, 3.0, &mut SeededRng::new(seed)).unwrap();
            let back = decode_tensor(&encode_tensor(&t)).unwrap();
            prop_assert_eq!(back.dims(), t.dims());
            for (a, b) in back.data().iter().zip(t.data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
