//! FMT1 tensor files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "FMT1" | version: u16 = 1 | rows: u32 | cols: u32 | channels: u32 | payload
//! ```
//!
//! The payload holds `rows * cols * channels` binary32 values, channel-major
//! and row-major within each channel.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scoring::FeatureMapSet;

pub const MAGIC: &[u8; 4] = b"FMT1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;

pub fn encode(features: &FeatureMapSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + features.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for dim in [features.rows(), features.cols(), features.channels()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in features.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<FeatureMapSet> {
    if bytes.len() < 4 {
        return Err(Error::format(bytes.len() as u64, "file too short for magic"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(0, format!("bad magic {:?}", &bytes[..4])));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let rows = read_u32(bytes, 6) as usize;
    let cols = read_u32(bytes, 10) as usize;
    let channels = read_u32(bytes, 14) as usize;
    if rows == 0 || cols == 0 || channels == 0 {
        return Err(Error::format(6, format!("zero dimension {rows}x{cols}x{channels}")));
    }
    let payload_len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(channels))
        .and_then(|n| n.checked_mul(4))
        .filter(|n| n.checked_add(HEADER_LEN).is_some())
        .ok_or_else(|| Error::format(6, format!("dimensions {rows}x{cols}x{channels} overflow")))?;
    let end = HEADER_LEN + payload_len;
    if bytes.len() < end {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated payload: expected {payload_len} bytes"),
        ));
    }
    if bytes.len() > end {
        return Err(Error::format(end as u64, "trailing bytes after payload"));
    }
    let data: Vec<f32> = bytes[HEADER_LEN..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::format((HEADER_LEN + 4 * i) as u64, "non-finite activation"));
    }
    FeatureMapSet::new(rows, cols, channels, data)
}

pub fn store_tensor(path: impl AsRef<Path>, features: &FeatureMapSet) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(features))?;
    f.flush()?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<FeatureMapSet> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::tests::random_features;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_full_size_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_features(&mut rng, 14, 14, 672);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t/00000001.fmt1");
        store_tensor(&path, &f).unwrap();
        let back = load_tensor(&path).unwrap();
        assert_eq!(f.data().len(), back.data().len());
        assert!(f.data().iter().zip(back.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!((back.rows(), back.cols(), back.channels()), (14, 14, 672));
    }

    #[test]
    fn header_bytes_are_exact() {
        let f = FeatureMapSet::new(1, 2, 1, vec![1.0, -2.5]).unwrap();
        let bytes = encode(&f);
        assert_eq!(
            bytes,
            [
                b'F', b'M', b'T', b'1', 1, 0, //
                1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, //
                0, 0, 0x80, 0x3f, 0, 0, 0x20, 0xc0,
            ]
        );
    }

    #[test]
    fn malformed_files_are_rejected_with_offsets() {
        let good = encode(&FeatureMapSet::new(2, 2, 2, vec![0.5; 8]).unwrap());

        assert!(matches!(decode(&[]), Err(Error::Format { offset: 0, .. })));

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode(&bad_magic), Err(Error::Format { offset: 0, .. })));

        let truncated = &good[..good.len() - 3];
        assert!(matches!(decode(truncated), Err(Error::Format { offset, .. }) if offset == truncated.len() as u64));

        let mut huge = good.clone();
        huge[6..10].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[10..14].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[14..18].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode(&huge), Err(Error::Format { offset: 6, .. })));

        let mut version = good.clone();
        version[4] = 9;
        assert!(matches!(decode(&version), Err(Error::Format { offset: 4, .. })));

        let mut trailing = good;
        trailing.push(0);
        assert!(matches!(decode(&trailing), Err(Error::Format { .. })));
    }

    #[test]
    fn empty_file_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.fmt1");
        std::fs::write(&path, b"").unwrap();
        assert!(matches!(load_tensor(&path), Err(Error::Format { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip_is_bit_exact(rows in 1usize..64, cols in 1usize..64, channels in 1usize..4096, seed in any::<u64>()) {
            // Keep the payload bounded; the largest shapes are covered by the sampled range.
            let channels = channels.min(1 + 2_000_000 / (rows * cols));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_features(&mut rng, rows, cols, channels);
            let back = decode(&encode(&f)).unwrap();
            prop_assert_eq!(f, back);
        }
    }
}
