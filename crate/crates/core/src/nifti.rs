//! Single-file NIfTI-1 (`.nii`, `.nii.gz`) codec for label volumes.
//!
//! Reading accepts any integer datatype and float datatypes whose values are
//! whole numbers. Writing always picks the smallest unsigned width that holds
//! both the labels and the ignore value.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::volume::{default_ignore_label, LabelVolume, SpatialHeader};
use crate::{Error, Result};

pub const HEADER_SIZE: usize = 348;
pub const MAGIC: [u8; 4] = *b"n+1\0";
/// Header plus the four-byte extension flag.
pub const VOX_OFFSET: usize = 352;

/// Tolerance for accepting float-stored labels as integers.
pub const FLOAT_LABEL_TOLERANCE: f64 = 1e-3;

const IGNORE_TAG: &str = "ignore_label=";

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const REGULAR: usize = 38;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

/// On-disk element types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    UInt8,
    Int8,
    Int16,
    UInt16,
    Int32,
    UInt32,
    Int64,
    UInt64,
    Float32,
    Float64,
}

impl DataType {
    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Self::UInt8,
            4 => Self::Int16,
            8 => Self::Int32,
            16 => Self::Float32,
            64 => Self::Float64,
            256 => Self::Int8,
            512 => Self::UInt16,
            768 => Self::UInt32,
            1024 => Self::Int64,
            1280 => Self::UInt64,
            _ => return Err(Error::UnsupportedDataType(code)),
        })
    }

    pub fn code(self) -> i16 {
        match self {
            Self::UInt8 => 2,
            Self::Int16 => 4,
            Self::Int32 => 8,
            Self::Float32 => 16,
            Self::Float64 => 64,
            Self::Int8 => 256,
            Self::UInt16 => 512,
            Self::UInt32 => 768,
            Self::Int64 => 1024,
            Self::UInt64 => 1280,
        }
    }

    pub fn byte_size(self) -> usize {
        match self {
            Self::UInt8 | Self::Int8 => 1,
            Self::Int16 | Self::UInt16 => 2,
            Self::Int32 | Self::UInt32 | Self::Float32 => 4,
            Self::Int64 | Self::UInt64 | Self::Float64 => 8,
        }
    }

    /// Smallest unsigned type holding `max`.
    pub fn for_max_label(max: u32) -> Self {
        if max <= u32::from(u8::MAX) {
            Self::UInt8
        } else if max <= u32::from(u16::MAX) {
            Self::UInt16
        } else {
            Self::UInt32
        }
    }
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn i16(self, b: &[u8]) -> i16 {
        match self {
            Endian::Little => LittleEndian::read_i16(b),
            Endian::Big => BigEndian::read_i16(b),
        }
    }

    fn i32(self, b: &[u8]) -> i32 {
        match self {
            Endian::Little => LittleEndian::read_i32(b),
            Endian::Big => BigEndian::read_i32(b),
        }
    }

    fn f32(self, b: &[u8]) -> f32 {
        match self {
            Endian::Little => LittleEndian::read_f32(b),
            Endian::Big => BigEndian::read_f32(b),
        }
    }

    /// Decodes one element as f64; all supported types but 64-bit integers
    /// convert exactly, and those are range-checked afterwards anyway.
    fn element(self, dt: DataType, b: &[u8]) -> f64 {
        match (dt, self) {
            (DataType::UInt8, _) => f64::from(b[0]),
            (DataType::Int8, _) => f64::from(b[0] as i8),
            (DataType::Int16, e) => f64::from(e.i16(b)),
            (DataType::UInt16, Endian::Little) => f64::from(LittleEndian::read_u16(b)),
            (DataType::UInt16, Endian::Big) => f64::from(BigEndian::read_u16(b)),
            (DataType::Int32, e) => f64::from(e.i32(b)),
            (DataType::UInt32, Endian::Little) => f64::from(LittleEndian::read_u32(b)),
            (DataType::UInt32, Endian::Big) => f64::from(BigEndian::read_u32(b)),
            (DataType::Int64, Endian::Little) => LittleEndian::read_i64(b) as f64,
            (DataType::Int64, Endian::Big) => BigEndian::read_i64(b) as f64,
            (DataType::UInt64, Endian::Little) => LittleEndian::read_u64(b) as f64,
            (DataType::UInt64, Endian::Big) => BigEndian::read_u64(b) as f64,
            (DataType::Float32, e) => f64::from(e.f32(b)),
            (DataType::Float64, Endian::Little) => LittleEndian::read_f64(b),
            (DataType::Float64, Endian::Big) => BigEndian::read_f64(b),
        }
    }
}

/// Reads a `.nii` or `.nii.gz` label volume. Gzip is detected from the
/// stream, not the file name.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let path = path.as_ref();
    let inner = || -> Result<LabelVolume> {
        let mut raw = Vec::new();
        File::open(path)?.read_to_end(&mut raw)?;
        decode(&maybe_gunzip(raw)?)
    };
    inner().map_err(|e| e.at(path))
}

/// Writes a single-file NIfTI-1; gzip-compressed when the path ends in `.gz`.
pub fn write_nifti(volume: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let inner = || -> Result<()> {
        let bytes = encode(volume);
        let file = BufWriter::new(File::create(path)?);
        if path.extension().is_some_and(|e| e == "gz") {
            let mut gz = GzEncoder::new(file, Compression::default());
            gz.write_all(&bytes)?;
            gz.finish()?.flush()?;
        } else {
            let mut file = file;
            file.write_all(&bytes)?;
            file.flush()?;
        }
        Ok(())
    };
    inner().map_err(|e| e.at(path))
}

fn maybe_gunzip(raw: Vec<u8>) -> Result<Vec<u8>> {
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Parses an uncompressed single-file NIfTI-1 image.
pub fn decode(bytes: &[u8]) -> Result<LabelVolume> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Truncated {
            expected: HEADER_SIZE,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[offsets::MAGIC..offsets::MAGIC + 4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }

    // dim[0] must be 1..=7; if not, the file was written with the other
    // byte order.
    let dim0 = LittleEndian::read_i16(&bytes[offsets::DIM..]);
    let endian = if (1..=7).contains(&dim0) {
        Endian::Little
    } else {
        Endian::Big
    };
    let sizeof_hdr = endian.i32(&bytes[offsets::SIZEOF_HDR..]);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(Error::BadHeaderSize(sizeof_hdr));
    }

    let mut dim = [0i16; 8];
    for (k, d) in dim.iter_mut().enumerate() {
        *d = endian.i16(&bytes[offsets::DIM + 2 * k..]);
    }
    let ndim = dim[0];
    if !(1..=7).contains(&ndim)
        || dim[1..=ndim as usize].iter().any(|&d| d < 1)
        || dim[4..=ndim.max(3) as usize].iter().any(|&d| d != 1)
    {
        return Err(Error::NotThreeDimensional(dim));
    }
    let dims = [1, 2, 3].map(|k| if k <= ndim as usize { dim[k] as usize } else { 1 });

    let datatype = DataType::from_code(endian.i16(&bytes[offsets::DATATYPE..]))?;

    let mut pixdim = [0f32; 4];
    for (k, p) in pixdim.iter_mut().enumerate() {
        *p = endian.f32(&bytes[offsets::PIXDIM + 4 * k..]);
    }
    let mut srow = [[0f32; 4]; 3];
    for (r, row) in srow.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = endian.f32(&bytes[offsets::SROW_X + 16 * r + 4 * c..]);
        }
    }
    let header = SpatialHeader {
        pixdim: [pixdim[1], pixdim[2], pixdim[3]],
        qfac: pixdim[0],
        qform_code: endian.i16(&bytes[offsets::QFORM_CODE..]),
        sform_code: endian.i16(&bytes[offsets::SFORM_CODE..]),
        quatern: [0, 1, 2].map(|k| endian.f32(&bytes[offsets::QUATERN_B + 4 * k..])),
        qoffset: [0, 1, 2].map(|k| endian.f32(&bytes[offsets::QOFFSET_X + 4 * k..])),
        srow,
        xyzt_units: bytes[offsets::XYZT_UNITS],
    };

    let vox_offset = endian.f32(&bytes[offsets::VOX_OFFSET..]);
    let vox_offset = if vox_offset.is_finite() && vox_offset >= HEADER_SIZE as f32 {
        vox_offset as usize
    } else {
        VOX_OFFSET
    };
    let n: usize = dims.iter().product();
    let width = datatype.byte_size();
    let expected = vox_offset + n * width;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }

    let slope = endian.f32(&bytes[offsets::SCL_SLOPE..]);
    let inter = endian.f32(&bytes[offsets::SCL_INTER..]);
    let scaling = (slope.is_finite() && slope != 0.0 && (slope != 1.0 || inter != 0.0))
        .then(|| (f64::from(slope), f64::from(inter)));
    let float_like = matches!(datatype, DataType::Float32 | DataType::Float64) || scaling.is_some();

    let payload = &bytes[vox_offset..expected];
    let mut data = Vec::with_capacity(n);
    for (index, chunk) in payload.chunks_exact(width).enumerate() {
        let mut value = endian.element(datatype, chunk);
        if let Some((s, i)) = scaling {
            value = value * s + i;
        }
        let rounded = value.round();
        if float_like && !((value - rounded).abs() <= FLOAT_LABEL_TOLERANCE) {
            return Err(Error::NonIntegerLabel { index, value });
        }
        if !(0.0..=f64::from(u32::MAX)).contains(&rounded) {
            return Err(Error::LabelOutOfRange { index, value });
        }
        data.push(rounded as u32);
    }

    let ignore = parse_ignore_tag(&bytes[offsets::DESCRIP..offsets::DESCRIP + 80]);
    let volume = LabelVolume::new(dims, data)?.with_header(header);
    let ignore = ignore.unwrap_or_else(|| volume.ignore_label());
    Ok(volume.with_ignore_label(ignore))
}

/// Serialises `volume` as an uncompressed single-file NIfTI-1 image.
pub fn encode(volume: &LabelVolume) -> Vec<u8> {
    let datatype = DataType::for_max_label(volume.max_label().max(volume.ignore_label()));
    let width = datatype.byte_size();
    let h = volume.header();
    let dims = volume.dims();

    let mut out = vec![0u8; VOX_OFFSET + volume.len() * width];
    let hdr = &mut out[..HEADER_SIZE];
    LittleEndian::write_i32(&mut hdr[offsets::SIZEOF_HDR..], HEADER_SIZE as i32);
    hdr[offsets::REGULAR] = b'r';
    let dim: [i16; 8] = [3, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
    for (k, d) in dim.iter().enumerate() {
        LittleEndian::write_i16(&mut hdr[offsets::DIM + 2 * k..], *d);
    }
    LittleEndian::write_i16(&mut hdr[offsets::DATATYPE..], datatype.code());
    LittleEndian::write_i16(&mut hdr[offsets::BITPIX..], (8 * width) as i16);
    let pixdim = [h.qfac, h.pixdim[0], h.pixdim[1], h.pixdim[2], 1.0, 1.0, 1.0, 1.0];
    for (k, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut hdr[offsets::PIXDIM + 4 * k..], *p);
    }
    LittleEndian::write_f32(&mut hdr[offsets::VOX_OFFSET..], VOX_OFFSET as f32);
    LittleEndian::write_f32(&mut hdr[offsets::SCL_SLOPE..], 1.0);
    LittleEndian::write_f32(&mut hdr[offsets::SCL_INTER..], 0.0);
    hdr[offsets::XYZT_UNITS] = h.xyzt_units;

    let descrip = format!("{IGNORE_TAG}{}", volume.ignore_label());
    hdr[offsets::DESCRIP..offsets::DESCRIP + descrip.len()].copy_from_slice(descrip.as_bytes());

    LittleEndian::write_i16(&mut hdr[offsets::QFORM_CODE..], h.qform_code);
    LittleEndian::write_i16(&mut hdr[offsets::SFORM_CODE..], h.sform_code);
    for k in 0..3 {
        LittleEndian::write_f32(&mut hdr[offsets::QUATERN_B + 4 * k..], h.quatern[k]);
        LittleEndian::write_f32(&mut hdr[offsets::QOFFSET_X + 4 * k..], h.qoffset[k]);
    }
    for (r, row) in h.srow.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            LittleEndian::write_f32(&mut hdr[offsets::SROW_X + 16 * r + 4 * c..], *v);
        }
    }
    hdr[offsets::MAGIC..].copy_from_slice(&MAGIC);

    let payload = &mut out[VOX_OFFSET..];
    match datatype {
        DataType::UInt8 => {
            for (dst, &v) in payload.iter_mut().zip(volume.data()) {
                *dst = v as u8;
            }
        }
        DataType::UInt16 => {
            for (dst, &v) in payload.chunks_exact_mut(2).zip(volume.data()) {
                LittleEndian::write_u16(dst, v as u16);
            }
        }
        _ => {
            for (dst, &v) in payload.chunks_exact_mut(4).zip(volume.data()) {
                LittleEndian::write_u32(dst, v);
            }
        }
    }
    out
}

fn parse_ignore_tag(descrip: &[u8]) -> Option<u32> {
    let end = descrip.iter().position(|&b| b == 0).unwrap_or(descrip.len());
    let text = std::str::from_utf8(&descrip[..end]).ok()?;
    let rest = &text[text.find(IGNORE_TAG)? + IGNORE_TAG.len()..];
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

/// Default ignore value for a volume whose class labels are all `< classes`.
pub fn ignore_for_class_count(classes: u32) -> u32 {
    default_ignore_label(classes.saturating_sub(1))
}
