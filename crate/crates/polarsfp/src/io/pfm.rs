//! Portable Float Map reader and writer.
//!
//! Layout: ASCII header of three lines - `Pf` (grayscale) or `PF`
//! (3-channel), `width height`, then a scale factor whose sign gives byte
//! order (negative = little-endian) - followed by rows of 32-bit IEEE
//! floats stored bottom-to-top. We always write `-1.0` (little-endian,
//! unit scale). Subnormal values are flushed to same-signed zero on write;
//! everything else round-trips bit-exactly.

use std::fs;
use std::path::Path;

use super::IoFormatError;

/// Decoded PFM contents; `samples` is row-major, top row first, channels
/// interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmData {
    pub width: usize,
    pub height: usize,
    /// 1 (`Pf`) or 3 (`PF`).
    pub channels: usize,
    pub samples: Vec<f32>,
}

impl PfmData {
    /// Validates dimensions and finiteness; flushes subnormals to +/-0.
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        mut samples: Vec<f32>,
    ) -> Result<Self, IoFormatError> {
        if width == 0 || height == 0 {
            return Err(IoFormatError::MalformedHeader(format!(
                "zero dimension {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(IoFormatError::MalformedHeader(format!(
                "unsupported channel count {channels}"
            )));
        }
        if samples.len() != width * height * channels {
            return Err(IoFormatError::TruncatedData {
                expected: width * height * channels,
                got: samples.len(),
            });
        }
        for (i, v) in samples.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(IoFormatError::NonFiniteSample(i));
            }
            if *v != 0.0 && v.abs() < f32::MIN_POSITIVE {
                *v = if v.is_sign_negative() { -0.0 } else { 0.0 };
            }
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }
}

/// Writes a PFM file (little-endian, scale -1.0).
pub fn write_pfm(path: impl AsRef<Path>, data: &PfmData) -> Result<(), IoFormatError> {
    let magic = if data.channels == 1 { "Pf" } else { "PF" };
    let mut bytes = format!("{magic}\n{} {}\n-1.0\n", data.width, data.height).into_bytes();
    bytes.reserve(data.samples.len() * 4);
    let row_len = data.width * data.channels;
    for row in (0..data.height).rev() {
        let start = row * row_len;
        for &v in &data.samples[start..start + row_len] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads a PFM file, accepting either byte order.
pub fn read_pfm(path: impl AsRef<Path>) -> Result<PfmData, IoFormatError> {
    let bytes = fs::read(path)?;
    parse_pfm(&bytes)
}

fn parse_pfm(bytes: &[u8]) -> Result<PfmData, IoFormatError> {
    let mut pos = 0usize;
    let mut line = |what: &str| -> Result<String, IoFormatError> {
        let start = pos;
        while pos < bytes.len() && bytes[pos] != b'\n' {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(IoFormatError::MalformedHeader(format!(
                "missing {what} line"
            )));
        }
        let s = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| IoFormatError::MalformedHeader(format!("non-ASCII {what} line")))?;
        pos += 1;
        Ok(s.trim().to_string())
    };

    let magic = line("magic")?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => {
            return Err(IoFormatError::MalformedHeader(format!(
                "bad magic {other:?}, expected \"Pf\" or \"PF\""
            )))
        }
    };
    let dims = line("dimensions")?;
    let mut it = dims.split_whitespace();
    let parse_dim = |tok: Option<&str>| -> Result<usize, IoFormatError> {
        let tok = tok.ok_or_else(|| {
            IoFormatError::MalformedHeader("dimension line needs width and height".into())
        })?;
        let v: usize = tok
            .parse()
            .map_err(|_| IoFormatError::MalformedHeader(format!("bad dimension {tok:?}")))?;
        if v == 0 {
            return Err(IoFormatError::MalformedHeader("zero dimension".into()));
        }
        Ok(v)
    };
    let width = parse_dim(it.next())?;
    let height = parse_dim(it.next())?;
    if it.next().is_some() {
        return Err(IoFormatError::MalformedHeader(
            "trailing tokens on dimension line".into(),
        ));
    }
    let scale_str = line("scale")?;
    let scale: f64 = scale_str
        .parse()
        .map_err(|_| IoFormatError::MalformedHeader(format!("bad scale {scale_str:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(IoFormatError::MalformedHeader(format!(
            "scale must be finite and nonzero, got {scale_str}"
        )));
    }
    let little_endian = scale < 0.0;

    let count = width * height * channels;
    let payload = &bytes[pos..];
    if payload.len() < count * 4 {
        return Err(IoFormatError::TruncatedData {
            expected: count * 4,
            got: payload.len(),
        });
    }
    let row_len = width * channels;
    let mut samples = vec![0f32; count];
    for (file_row, chunk_row) in payload[..count * 4].chunks_exact(row_len * 4).enumerate() {
        // Rows are stored bottom-to-top.
        let row = height - 1 - file_row;
        for (i, chunk) in chunk_row.chunks_exact(4).enumerate() {
            let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
            samples[row * row_len + i] = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
        }
    }
    Ok(PfmData {
        width,
        height,
        channels,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn golden_one_pixel_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("half.pfm");
        let data = PfmData::new(1, 1, 1, vec![0.5]).unwrap();
        write_pfm(&path, &data).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let mut expected = b"Pf\n1 1\n-1.0\n".to_vec();
        expected.extend_from_slice(&[0x00, 0x00, 0x00, 0x3F]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn zero_dimension_is_malformed() {
        let bytes = b"Pf\n0 5\n-1.0\n".to_vec();
        assert!(matches!(
            parse_pfm(&bytes),
            Err(IoFormatError::MalformedHeader(_))
        ));
    }

    #[test]
    fn truncated_payload_detected() {
        let mut bytes = b"Pf\n2 1\n-1.0\n".to_vec();
        bytes.extend_from_slice(&[0u8; 4]); // one float short
        assert!(matches!(
            parse_pfm(&bytes),
            Err(IoFormatError::TruncatedData { expected: 8, got: 4 })
        ));
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(matches!(
            parse_pfm(b"P6\n1 1\n-1.0\n\0\0\0\0"),
            Err(IoFormatError::MalformedHeader(_))
        ));
    }

    #[test]
    fn big_endian_read() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&0.5f32.to_be_bytes());
        let data = parse_pfm(&bytes).unwrap();
        assert_eq!(data.samples, vec![0.5]);
    }

    #[test]
    fn row_order_bottom_to_top() {
        // 1x2 image: top pixel 1.0, bottom pixel 2.0; file stores bottom first.
        let dir = tempdir().unwrap();
        let path = dir.path().join("rows.pfm");
        let data = PfmData::new(1, 2, 1, vec![1.0, 2.0]).unwrap();
        write_pfm(&path, &data).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let payload = &bytes[bytes.len() - 8..];
        assert_eq!(&payload[..4], &2.0f32.to_le_bytes());
        assert_eq!(&payload[4..], &1.0f32.to_le_bytes());
        assert_eq!(read_pfm(&path).unwrap(), data);
    }

    #[test]
    fn subnormals_flushed_nonfinite_rejected() {
        let tiny = f32::MIN_POSITIVE / 2.0;
        let data = PfmData::new(2, 1, 1, vec![tiny, -tiny]).unwrap();
        assert_eq!(data.samples[0].to_bits(), 0.0f32.to_bits());
        assert_eq!(data.samples[1].to_bits(), (-0.0f32).to_bits());
        assert!(matches!(
            PfmData::new(1, 1, 1, vec![f32::NAN]),
            Err(IoFormatError::NonFiniteSample(0))
        ));
    }

    #[test]
    fn rgb_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rgb.pfm");
        let data = PfmData::new(2, 2, 3, (0..12).map(|i| i as f32 * 0.25 - 1.0).collect()).unwrap();
        write_pfm(&path, &data).unwrap();
        assert_eq!(read_pfm(&path).unwrap(), data);
    }
}
