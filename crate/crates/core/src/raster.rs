//! Raster types and the `MMC1` binary container.
//!
//! Layout (all integers little-endian):
//!
//! | bytes  | field                                   |
//! |--------|-----------------------------------------|
//! | 0..4   | magic `b"MMC1"`                         |
//! | 4      | dtype (`0x01` u16 labels, `0x02` f32)   |
//! | 5..8   | reserved, must be zero                  |
//! | 8..12  | width, u32                              |
//! | 12..16 | height, u32                             |
//! | 16..   | row-major payload, top-left origin      |
//!
//! The payload is uncompressed and must be exactly `width * height` elements
//! long. Trailing bytes are rejected.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"MMC1";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("bad magic {0:?}, expected \"MMC1\"")]
    BadMagic([u8; 4]),
    #[error("unknown dtype code 0x{0:02x}")]
    UnknownDtype(u8),
    #[error("reserved header bytes are not zero")]
    NonZeroReserved,
    #[error("file holds {0} bytes, shorter than the 16-byte header")]
    TruncatedHeader(usize),
    #[error("raster has a zero dimension ({width}x{height})")]
    ZeroDimension { width: u32, height: u32 },
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("payload oversized: expected {expected} bytes, found {found}")]
    OversizedPayload { expected: usize, found: usize },
    #[error("expected {expected:?} payload, file holds {found:?}")]
    DtypeMismatch { expected: Dtype, found: Dtype },
    #[error("non-finite value at pixel {index}")]
    NonFiniteValue { index: usize },
    #[error("confidence {value} at pixel {index} is outside [0, 1]")]
    OutOfRangeConfidence { index: usize, value: f32 },
    #[error("buffer holds {found} values, {width}x{height} requires {expected}")]
    LengthMismatch {
        width: u32,
        height: u32,
        expected: usize,
        found: usize,
    },
    #[error("io failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = RasterError> = std::result::Result<T, E>;

/// Payload element type code stored in byte 4 of the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U16 = 0x01,
    F32 = 0x02,
}

impl Dtype {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0x01 => Ok(Dtype::U16),
            0x02 => Ok(Dtype::F32),
            other => Err(RasterError::UnknownDtype(other)),
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn element_size(self) -> usize {
        match self {
            Dtype::U16 => 2,
            Dtype::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RasterHeader {
    pub dtype: Dtype,
    pub width: u32,
    pub height: u32,
}

impl RasterHeader {
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn payload_len(&self) -> usize {
        self.pixel_count() * self.dtype.element_size()
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4] = self.dtype.code();
        out[8..12].copy_from_slice(&self.width.to_le_bytes());
        out[12..16].copy_from_slice(&self.height.to_le_bytes());
        out
    }

    /// Parses and checks the fixed header. Payload length is not examined.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(RasterError::TruncatedHeader(bytes.len()));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(RasterError::BadMagic(magic));
        }
        let dtype = Dtype::from_code(bytes[4])?;
        if bytes[5..8] != [0, 0, 0] {
            return Err(RasterError::NonZeroReserved);
        }
        let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension { width, height });
        }
        Ok(RasterHeader {
            dtype,
            width,
            height,
        })
    }

    fn check_payload(&self, found: usize) -> Result<()> {
        let expected = self.payload_len();
        match found.cmp(&expected) {
            std::cmp::Ordering::Less => Err(RasterError::TruncatedPayload { expected, found }),
            std::cmp::Ordering::Greater => Err(RasterError::OversizedPayload { expected, found }),
            std::cmp::Ordering::Equal => Ok(()),
        }
    }
}

fn check_len(width: u32, height: u32, found: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(RasterError::ZeroDimension { width, height });
    }
    let expected = width as usize * height as usize;
    if expected != found {
        return Err(RasterError::LengthMismatch {
            width,
            height,
            expected,
            found,
        });
    }
    Ok(())
}

/// Per-pixel class ids from one segmentation model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, labels: Vec<u16>) -> Result<Self> {
        check_len(width, height, labels.len())?;
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u16> {
        self.labels
    }
}

/// Per-pixel probability a model assigns to its predicted class.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl ConfidenceMap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self> {
        check_len(width, height, values.len())?;
        check_confidence(&values)?;
        Ok(ConfidenceMap {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Per-pixel scalar depth in whatever units the producer used.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self> {
        check_len(width, height, values.len())?;
        check_finite(&values)?;
        Ok(DepthMap {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn transpose(&self) -> DepthMap {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut values = Vec::with_capacity(w * h);
        for x in 0..w {
            for y in 0..h {
                values.push(self.values[y * w + x]);
            }
        }
        DepthMap {
            width: self.height,
            height: self.width,
            values,
        }
    }
}

fn check_finite(values: &[f32]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(RasterError::NonFiniteValue { index }),
        None => Ok(()),
    }
}

fn check_confidence(values: &[f32]) -> Result<()> {
    check_finite(values)?;
    match values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(index) => Err(RasterError::OutOfRangeConfidence {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// How a file's payload is to be interpreted. `F32` payloads are shared by
/// confidence and depth, so the caller states which one it expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterKind {
    Labels,
    Confidence,
    Depth,
}

impl RasterKind {
    pub fn dtype(self) -> Dtype {
        match self {
            RasterKind::Labels => Dtype::U16,
            RasterKind::Confidence | RasterKind::Depth => Dtype::F32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Raster {
    Labels(LabelMap),
    Confidence(ConfidenceMap),
    Depth(DepthMap),
}

impl Raster {
    pub fn kind(&self) -> RasterKind {
        match self {
            Raster::Labels(_) => RasterKind::Labels,
            Raster::Confidence(_) => RasterKind::Confidence,
            Raster::Depth(_) => RasterKind::Depth,
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        match self {
            Raster::Labels(m) => (m.width, m.height),
            Raster::Confidence(m) => (m.width, m.height),
            Raster::Depth(m) => (m.width, m.height),
        }
    }

    pub fn header(&self) -> RasterHeader {
        let (width, height) = self.dims();
        RasterHeader {
            dtype: self.kind().dtype(),
            width,
            height,
        }
    }
}

impl From<LabelMap> for Raster {
    fn from(m: LabelMap) -> Self {
        Raster::Labels(m)
    }
}

impl From<ConfidenceMap> for Raster {
    fn from(m: ConfidenceMap) -> Self {
        Raster::Confidence(m)
    }
}

impl From<DepthMap> for Raster {
    fn from(m: DepthMap) -> Self {
        Raster::Depth(m)
    }
}

/// Serializes a raster into a complete `MMC1` byte image.
///
/// Confidence rasters are re-checked here because the constructors are the
/// only other gate and the bytes may leave the process.
pub fn encode(raster: &Raster) -> Result<Vec<u8>> {
    let header = raster.header();
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len());
    out.extend_from_slice(&header.to_bytes());
    match raster {
        Raster::Labels(m) => {
            for v in &m.labels {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Raster::Confidence(m) => {
            check_confidence(&m.values)?;
            for v in &m.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Raster::Depth(m) => {
            check_finite(&m.values)?;
            for v in &m.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parses a complete `MMC1` byte image as the given kind.
pub fn decode(bytes: &[u8], kind: RasterKind) -> Result<Raster> {
    let header = RasterHeader::parse(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    if header.dtype != kind.dtype() {
        return Err(RasterError::DtypeMismatch {
            expected: kind.dtype(),
            found: header.dtype,
        });
    }
    header.check_payload(payload.len())?;
    let (width, height) = (header.width, header.height);
    Ok(match kind {
        RasterKind::Labels => {
            let labels = payload
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect();
            Raster::Labels(LabelMap {
                width,
                height,
                labels,
            })
        }
        RasterKind::Confidence => {
            let values = decode_f32(payload);
            check_confidence(&values)?;
            Raster::Confidence(ConfidenceMap {
                width,
                height,
                values,
            })
        }
        RasterKind::Depth => {
            let values = decode_f32(payload);
            check_finite(&values)?;
            Raster::Depth(DepthMap {
                width,
                height,
                values,
            })
        }
    })
}

fn decode_f32(payload: &[u8]) -> Vec<f32> {
    payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn io_err(path: &Path, source: std::io::Error) -> RasterError {
    RasterError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_raster(path: impl AsRef<Path>, kind: RasterKind) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode(&bytes, kind)
}

/// Reads only the 16-byte header.
pub fn read_header(path: impl AsRef<Path>) -> Result<RasterHeader> {
    use std::io::Read;
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(HEADER_LEN);
    fs::File::open(path)
        .and_then(|f| f.take(HEADER_LEN as u64).read_to_end(&mut buf))
        .map_err(|e| io_err(path, e))?;
    RasterHeader::parse(&buf)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    match read_raster(path, RasterKind::Labels)? {
        Raster::Labels(m) => Ok(m),
        _ => unreachable!(),
    }
}

pub fn read_confidence(path: impl AsRef<Path>) -> Result<ConfidenceMap> {
    match read_raster(path, RasterKind::Confidence)? {
        Raster::Confidence(m) => Ok(m),
        _ => unreachable!(),
    }
}

pub fn read_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    match read_raster(path, RasterKind::Depth)? {
        Raster::Depth(m) => Ok(m),
        _ => unreachable!(),
    }
}

pub fn write_raster(raster: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(raster)?;
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(dtype: u8, w: u32, h: u32) -> Vec<u8> {
        let mut b = b"MMC1".to_vec();
        b.push(dtype);
        b.extend_from_slice(&[0, 0, 0]);
        b.extend_from_slice(&w.to_le_bytes());
        b.extend_from_slice(&h.to_le_bytes());
        b
    }

    #[test]
    fn minimal_label_file() {
        let mut bytes = header(0x01, 2, 2);
        for v in [1u16, 2, 3, 500] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes.len(), 24);
        let r = decode(&bytes, RasterKind::Labels).unwrap();
        match r {
            Raster::Labels(m) => {
                assert_eq!((m.width(), m.height()), (2, 2));
                assert_eq!(m.labels(), &[1, 2, 3, 500]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_magic() {
        let mut bytes = header(0x01, 1, 1);
        bytes[0..4].copy_from_slice(b"XXXX");
        bytes.extend_from_slice(&[0, 0]);
        assert!(matches!(
            decode(&bytes, RasterKind::Labels),
            Err(RasterError::BadMagic(m)) if &m == b"XXXX"
        ));
    }

    #[test]
    fn truncated_f32_payload() {
        let mut bytes = header(0x02, 3, 3);
        bytes.extend(std::iter::repeat(0u8).take(35));
        assert!(matches!(
            decode(&bytes, RasterKind::Depth),
            Err(RasterError::TruncatedPayload {
                expected: 36,
                found: 35
            })
        ));
    }

    #[test]
    fn oversized_payload() {
        let mut bytes = header(0x01, 1, 1);
        bytes.extend_from_slice(&[0, 0, 0]);
        assert!(matches!(
            decode(&bytes, RasterKind::Labels),
            Err(RasterError::OversizedPayload {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            decode(&header(0x07, 1, 1), RasterKind::Labels),
            Err(RasterError::UnknownDtype(7))
        ));
        assert!(matches!(
            decode(&header(0x01, 0, 4), RasterKind::Labels),
            Err(RasterError::ZeroDimension { .. })
        ));
        assert!(matches!(
            decode(b"MMC1\x01", RasterKind::Labels),
            Err(RasterError::TruncatedHeader(5))
        ));
        let mut b = header(0x01, 1, 1);
        b[6] = 1;
        b.extend_from_slice(&[0, 0]);
        assert!(matches!(
            decode(&b, RasterKind::Labels),
            Err(RasterError::NonZeroReserved)
        ));
    }

    #[test]
    fn dtype_must_match_requested_kind() {
        let mut b = header(0x01, 1, 2);
        b.extend_from_slice(&[0; 4]);
        assert!(matches!(
            decode(&b, RasterKind::Confidence),
            Err(RasterError::DtypeMismatch { .. })
        ));
    }

    #[test]
    fn confidence_value_checks_on_read() {
        let mut b = header(0x02, 2, 1);
        b.extend_from_slice(&0.5f32.to_le_bytes());
        b.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode(&b, RasterKind::Confidence),
            Err(RasterError::NonFiniteValue { index: 1 })
        ));

        let mut b = header(0x02, 2, 1);
        b.extend_from_slice(&1.5f32.to_le_bytes());
        b.extend_from_slice(&0.5f32.to_le_bytes());
        assert!(matches!(
            decode(&b, RasterKind::Confidence),
            Err(RasterError::OutOfRangeConfidence { index: 0, .. })
        ));
        // The same bytes are a perfectly good depth map.
        assert!(decode(&b, RasterKind::Depth).is_ok());
    }

    #[test]
    fn out_of_range_confidence_rejected_before_write() {
        assert!(matches!(
            ConfidenceMap::new(1, 1, vec![1.5]),
            Err(RasterError::OutOfRangeConfidence { .. })
        ));
    }

    #[test]
    fn header_is_little_endian() {
        let h = RasterHeader {
            dtype: Dtype::F32,
            width: 0x0102_0304,
            height: 7,
        };
        let b = h.to_bytes();
        assert_eq!(&b[8..12], &[4, 3, 2, 1]);
        assert_eq!(&b[12..16], &[7, 0, 0, 0]);
        assert_eq!(b[4], 2);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.labels.mmc1");
        let r = Raster::Labels(LabelMap::new(1, 1, vec![42]).unwrap());
        write_raster(&r, &path).unwrap();
        assert_eq!(read_raster(&path, RasterKind::Labels).unwrap(), r);
        assert_eq!(read_header(&path).unwrap(), r.header());

        let values: Vec<f32> = (0..35).map(|i| (i as f32).sin() * 1e3 - 0.125).collect();
        let depth = Raster::Depth(DepthMap::new(7, 5, values.clone()).unwrap());
        let path = dir.path().join("d.depth.mmc1");
        write_raster(&depth, &path).unwrap();
        let back = read_depth(&path).unwrap();
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.values()), bits(&values));
    }

    #[test]
    fn missing_file_is_io_failure() {
        assert!(matches!(
            read_labels("/nonexistent/x.mmc1"),
            Err(RasterError::IoFailure { .. })
        ));
    }

    #[test]
    fn transpose_swaps_dims() {
        let d = DepthMap::new(3, 2, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let t = d.transpose();
        assert_eq!((t.width(), t.height()), (2, 3));
        assert_eq!(t.values(), &[1., 4., 2., 5., 3., 6.]);
        assert_eq!(t.transpose(), d);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scalar_round_trip_is_bit_exact(
                (w, h, bits) in (1u32..9, 1u32..9).prop_flat_map(|(w, h)| {
                    (Just(w), Just(h), proptest::collection::vec(any::<u32>(), (w * h) as usize))
                })
            ) {
                let values: Vec<f32> = bits
                    .iter()
                    .map(|b| f32::from_bits(*b))
                    .map(|v| if v.is_finite() { v } else { 0.0 })
                    .collect();
                let r = Raster::Depth(DepthMap::new(w, h, values).unwrap());
                let bytes = encode(&r).unwrap();
                prop_assert_eq!(bytes.len(), HEADER_LEN + (w * h * 4) as usize);
                let back = decode(&bytes, RasterKind::Depth).unwrap();
                prop_assert_eq!(encode(&back).unwrap(), bytes);
            }

            #[test]
            fn label_round_trip(
                (w, h, labels) in (1u32..9, 1u32..9).prop_flat_map(|(w, h)| {
                    (Just(w), Just(h), proptest::collection::vec(any::<u16>(), (w * h) as usize))
                })
            ) {
                let r = Raster::Labels(LabelMap::new(w, h, labels).unwrap());
                let back = decode(&encode(&r).unwrap(), RasterKind::Labels).unwrap();
                prop_assert_eq!(back, r);
            }
        }
    }
}
