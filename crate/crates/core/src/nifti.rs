//! A NIfTI-1 subset reader/writer and the RV1 raw fixture format.
//!
//! Supported: 3D single-file volumes (`.nii`, gzip-compressed `.nii.gz`) with
//! datatypes uint8, int16, int32, float32 and float64. Extension bytes between
//! the header and `vox_offset` are skipped; orientation fields are ignored.
//! Big-endian files are read; files are always written little-endian.
//!
//! RV1 is a one-line ASCII header followed by a raw little-endian payload:
//!
//! ```text
//! RV1 <nx> <ny> <nz> <dx> <dy> <dz> <dtype>\n<payload>
//! ```
//!
//! where `dtype` is one of `uint8`, `int16`, `int32`, `float32`, `float64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{Grid, LabelCoding, LabelVolume, ProbMap, Shape, Spacing};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const RV1_MAGIC: &[u8; 4] = b"RV1 ";
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const MAGIC: usize = 344;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    UInt8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl DataType {
    pub fn code(self) -> i16 {
        match self {
            DataType::UInt8 => 2,
            DataType::Int16 => 4,
            DataType::Int32 => 8,
            DataType::Float32 => 16,
            DataType::Float64 => 64,
        }
    }

    pub fn from_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(DataType::UInt8),
            4 => Ok(DataType::Int16),
            8 => Ok(DataType::Int32),
            16 => Ok(DataType::Float32),
            64 => Ok(DataType::Float64),
            other => Err(Error::UnsupportedDatatype(other)),
        }
    }

    pub fn size(self) -> usize {
        match self {
            DataType::UInt8 => 1,
            DataType::Int16 => 2,
            DataType::Int32 | DataType::Float32 => 4,
            DataType::Float64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DataType::UInt8 => "uint8",
            DataType::Int16 => "int16",
            DataType::Int32 => "int32",
            DataType::Float32 => "float32",
            DataType::Float64 => "float64",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            DataType::UInt8,
            DataType::Int16,
            DataType::Int32,
            DataType::Float32,
            DataType::Float64,
        ]
        .into_iter()
        .find(|d| d.name() == name)
    }

    /// Whether `v` survives a store/load cycle in this type unchanged.
    fn holds(self, v: f64) -> bool {
        let int_in = |lo: f64, hi: f64| v.fract() == 0.0 && v >= lo && v <= hi;
        match self {
            DataType::UInt8 => int_in(0.0, u8::MAX as f64),
            DataType::Int16 => int_in(i16::MIN as f64, i16::MAX as f64),
            DataType::Int32 => int_in(i32::MIN as f64, i32::MAX as f64),
            // float32 rounds to nearest; only overflow and NaN are rejected
            DataType::Float32 => !v.is_nan() && (v as f32).is_finite() == v.is_finite(),
            DataType::Float64 => !v.is_nan(),
        }
    }
}

/// The header fields this crate reads and writes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeHeader {
    pub dims: Shape,
    pub datatype: DataType,
    pub spacing: Spacing,
    pub scl_slope: f64,
    pub scl_inter: f64,
}

impl VolumeHeader {
    /// Unscaled header.
    pub fn new(dims: Shape, datatype: DataType, spacing: Spacing) -> Self {
        Self {
            dims,
            datatype,
            spacing,
            scl_slope: 0.0,
            scl_inter: 0.0,
        }
    }

    fn scaling(&self) -> Option<(f64, f64)> {
        let slope = self.scl_slope as f32 as f64;
        let inter = self.scl_inter as f32 as f64;
        if slope == 0.0 || !slope.is_finite() || (slope == 1.0 && inter == 0.0) {
            None
        } else {
            Some((slope, inter))
        }
    }

    fn voxel_count(&self) -> u64 {
        self.dims.iter().map(|&d| d as u64).product()
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Reads a NIfTI-1 or RV1 volume, applying slope/intercept scaling.
pub fn read_volume(path: impl AsRef<Path>) -> Result<(VolumeHeader, Grid<f64>)> {
    decode(&read_bytes(path.as_ref())?)
}

/// Decodes an in-memory (decompressed) NIfTI-1 or RV1 file.
pub fn decode(bytes: &[u8]) -> Result<(VolumeHeader, Grid<f64>)> {
    if bytes.starts_with(RV1_MAGIC) {
        decode_rv1(bytes)
    } else {
        decode_nifti(bytes)
    }
}

fn decode_nifti(bytes: &[u8]) -> Result<(VolumeHeader, Grid<f64>)> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Truncated {
            expected: HEADER_SIZE as u64,
            actual: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[offsets::MAGIC..offsets::MAGIC + 4]
        .try_into()
        .unwrap();
    match &magic {
        b"n+1\0" => {}
        b"ni1\0" => {
            return Err(Error::UnsupportedFormat(
                "two-file NIfTI (.hdr/.img) is not supported".into(),
            ))
        }
        b"n+2\0" | b"ni2\0" => return Err(Error::UnsupportedFormat("NIfTI-2".into())),
        _ => return Err(Error::BadMagic(magic)),
    }
    if LittleEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]) == HEADER_SIZE as i32 {
        parse_nifti::<LittleEndian>(bytes)
    } else if BigEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]) == HEADER_SIZE as i32 {
        parse_nifti::<BigEndian>(bytes)
    } else {
        Err(Error::InvalidHeader("sizeof_hdr is not 348".into()))
    }
}

fn parse_nifti<E: ByteOrder>(bytes: &[u8]) -> Result<(VolumeHeader, Grid<f64>)> {
    let dim = |i: usize| E::read_i16(&bytes[offsets::DIM + 2 * i..]);
    if dim(0) != 3 {
        return Err(Error::NotThreeDimensional(dim(0)));
    }
    let mut dims = [0usize; 3];
    for (k, d) in dims.iter_mut().enumerate() {
        let v = dim(k + 1);
        if v <= 0 {
            return Err(Error::InvalidHeader(format!("dim[{}] = {v}", k + 1)));
        }
        *d = v as usize;
    }
    let datatype = DataType::from_code(E::read_i16(&bytes[offsets::DATATYPE..]))?;
    let bitpix = E::read_i16(&bytes[offsets::BITPIX..]);
    if bitpix as usize != 8 * datatype.size() {
        return Err(Error::InvalidHeader(format!(
            "bitpix {bitpix} does not match {}",
            datatype.name()
        )));
    }
    let pix = |i: usize| (E::read_f32(&bytes[offsets::PIXDIM + 4 * i..]) as f64).abs();
    let spacing = Spacing::new(pix(1), pix(2), pix(3))?;
    let vox_offset = E::read_f32(&bytes[offsets::VOX_OFFSET..]);
    if vox_offset.is_nan() || vox_offset < VOX_OFFSET as f32 || vox_offset.fract() != 0.0 {
        return Err(Error::InvalidHeader(format!("vox_offset {vox_offset}")));
    }
    let header = VolumeHeader {
        dims,
        datatype,
        spacing,
        scl_slope: E::read_f32(&bytes[offsets::SCL_SLOPE..]) as f64,
        scl_inter: E::read_f32(&bytes[offsets::SCL_INTER..]) as f64,
    };
    let data = decode_payload::<E>(&header, bytes, vox_offset as usize)?;
    Ok((header, data))
}

fn decode_payload<E: ByteOrder>(
    header: &VolumeHeader,
    bytes: &[u8],
    offset: usize,
) -> Result<Grid<f64>> {
    let expected = offset as u64 + header.voxel_count() * header.datatype.size() as u64;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(Error::PayloadSize { expected, actual });
    }
    let payload = &bytes[offset..];
    let size = header.datatype.size();
    let raw = payload.chunks_exact(size).map(|c| match header.datatype {
        DataType::UInt8 => c[0] as f64,
        DataType::Int16 => E::read_i16(c) as f64,
        DataType::Int32 => E::read_i32(c) as f64,
        DataType::Float32 => E::read_f32(c) as f64,
        DataType::Float64 => E::read_f64(c),
    });
    let data: Vec<f64> = match header.scaling() {
        Some((slope, inter)) => raw.map(|v| v * slope + inter).collect(),
        None => raw.collect(),
    };
    Grid::from_vec(header.dims, data)
}

fn decode_rv1(bytes: &[u8]) -> Result<(VolumeHeader, Grid<f64>)> {
    let end = bytes
        .iter()
        .take(512)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::InvalidHeader("RV1 header line not terminated".into()))?;
    let line = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::InvalidHeader("RV1 header is not ASCII".into()))?;
    let fields: Vec<&str> = line.split_ascii_whitespace().collect();
    if fields.len() != 8 {
        return Err(Error::InvalidHeader(format!(
            "RV1 header needs 8 fields, got {}",
            fields.len()
        )));
    }
    let bad = |what: &str, s: &str| Error::InvalidHeader(format!("RV1 {what} {s:?}"));
    let mut dims = [0usize; 3];
    for k in 0..3 {
        dims[k] = fields[1 + k]
            .parse()
            .map_err(|_| bad("dimension", fields[1 + k]))?;
        if dims[k] == 0 {
            return Err(bad("dimension", fields[1 + k]));
        }
    }
    let mut sp = [0f64; 3];
    for k in 0..3 {
        sp[k] = fields[4 + k]
            .parse()
            .map_err(|_| bad("spacing", fields[4 + k]))?;
    }
    let datatype = DataType::from_name(fields[7])
        .ok_or_else(|| Error::UnsupportedFormat(format!("RV1 dtype {:?}", fields[7])))?;
    let header = VolumeHeader::new(dims, datatype, Spacing::new(sp[0], sp[1], sp[2])?);
    let data = decode_payload::<LittleEndian>(&header, bytes, end + 1)?;
    Ok((header, data))
}

fn check_header(header: &VolumeHeader, data: &Grid<f64>) -> Result<()> {
    if header.dims != data.shape() {
        return Err(Error::ShapeMismatch {
            left: header.dims,
            right: data.shape(),
        });
    }
    Ok(())
}

/// Raw values to store, after inverse scaling and exactness checks.
fn stored_values(header: &VolumeHeader, data: &Grid<f64>) -> Result<Vec<f64>> {
    let dt = header.datatype;
    data.as_slice()
        .iter()
        .map(|&v| {
            let raw = match header.scaling() {
                Some((slope, inter)) => {
                    let raw = (v - inter) / slope;
                    let raw = if dt == DataType::Float32 {
                        raw as f32 as f64
                    } else {
                        raw
                    };
                    if raw * slope + inter != v {
                        return Err(Error::Unrepresentable {
                            value: v,
                            datatype: dt.name(),
                        });
                    }
                    raw
                }
                None => v,
            };
            if dt.holds(raw) {
                Ok(raw)
            } else {
                Err(Error::Unrepresentable {
                    value: v,
                    datatype: dt.name(),
                })
            }
        })
        .collect()
}

fn encode_payload(dt: DataType, values: &[f64], out: &mut Vec<u8>) {
    let start = out.len();
    out.resize(start + values.len() * dt.size(), 0);
    for (c, &v) in out[start..].chunks_exact_mut(dt.size()).zip(values) {
        match dt {
            DataType::UInt8 => c[0] = v as u8,
            DataType::Int16 => LittleEndian::write_i16(c, v as i16),
            DataType::Int32 => LittleEndian::write_i32(c, v as i32),
            DataType::Float32 => LittleEndian::write_f32(c, v as f32),
            DataType::Float64 => LittleEndian::write_f64(c, v),
        }
    }
}

/// Encodes a little-endian single-file NIfTI-1 image (uncompressed).
pub fn encode_nifti(header: &VolumeHeader, data: &Grid<f64>) -> Result<Vec<u8>> {
    check_header(header, data)?;
    for &d in &header.dims {
        if d > i16::MAX as usize {
            return Err(Error::InvalidHeader(format!(
                "dimension {d} exceeds the NIfTI-1 limit"
            )));
        }
    }
    let values = stored_values(header, data)?;
    let mut out = vec![0u8; VOX_OFFSET];
    let h = &mut out[..HEADER_SIZE];
    LittleEndian::write_i32(&mut h[offsets::SIZEOF_HDR..], HEADER_SIZE as i32);
    let dim = [
        3,
        header.dims[0] as i16,
        header.dims[1] as i16,
        header.dims[2] as i16,
        1,
        1,
        1,
        1,
    ];
    for (i, d) in dim.iter().enumerate() {
        LittleEndian::write_i16(&mut h[offsets::DIM + 2 * i..], *d);
    }
    LittleEndian::write_i16(&mut h[offsets::DATATYPE..], header.datatype.code());
    LittleEndian::write_i16(&mut h[offsets::BITPIX..], 8 * header.datatype.size() as i16);
    let sp = header.spacing.as_array();
    let pixdim = [1.0, sp[0], sp[1], sp[2], 0.0, 0.0, 0.0, 0.0];
    for (i, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut h[offsets::PIXDIM + 4 * i..], *p as f32);
    }
    LittleEndian::write_f32(&mut h[offsets::VOX_OFFSET..], VOX_OFFSET as f32);
    LittleEndian::write_f32(&mut h[offsets::SCL_SLOPE..], header.scl_slope as f32);
    LittleEndian::write_f32(&mut h[offsets::SCL_INTER..], header.scl_inter as f32);
    // millimeters
    h[offsets::XYZT_UNITS] = 2;
    h[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(b"n+1\0");
    encode_payload(header.datatype, &values, &mut out);
    Ok(out)
}

/// Encodes an RV1 file. Scaling fields of the header are not representable and must be unset.
pub fn encode_rv1(header: &VolumeHeader, data: &Grid<f64>) -> Result<Vec<u8>> {
    check_header(header, data)?;
    if header.scaling().is_some() {
        return Err(Error::UnsupportedFormat("RV1 has no scaling fields".into()));
    }
    let values = stored_values(header, data)?;
    let [nx, ny, nz] = header.dims;
    let sp = header.spacing;
    let mut out = format!(
        "RV1 {nx} {ny} {nz} {} {} {} {}\n",
        sp.dx(),
        sp.dy(),
        sp.dz(),
        header.datatype.name()
    )
    .into_bytes();
    encode_payload(header.datatype, &values, &mut out);
    Ok(out)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let gz = path.to_string_lossy().ends_with(".gz");
    let io = |e| Error::io(path, e);
    if gz {
        let file = fs::File::create(path).map_err(io)?;
        let mut enc = GzEncoder::new(std::io::BufWriter::new(file), Compression::fast());
        enc.write_all(bytes).map_err(io)?;
        enc.finish().map_err(io)?.flush().map_err(io)?;
        Ok(())
    } else {
        fs::write(path, bytes).map_err(io)
    }
}

/// Writes NIfTI-1, or RV1 when the path ends in `.rv1`; gzip iff the path ends in `.gz`.
pub fn write_volume(path: impl AsRef<Path>, header: &VolumeHeader, data: &Grid<f64>) -> Result<()> {
    let path = path.as_ref();
    let name = path.to_string_lossy();
    let bytes = if name.ends_with(".rv1") || name.ends_with(".rv1.gz") {
        encode_rv1(header, data)?
    } else {
        encode_nifti(header, data)?
    };
    write_bytes(path, &bytes)
}

/// Reads a label map and validates it against `coding`.
pub fn read_label_volume(path: impl AsRef<Path>, coding: LabelCoding) -> Result<LabelVolume> {
    let (header, data) = read_volume(path)?;
    label_volume_from_values(&data, header.spacing, coding)
}

pub fn label_volume_from_values(
    data: &Grid<f64>,
    spacing: Spacing,
    coding: LabelCoding,
) -> Result<LabelVolume> {
    let mut labels = Vec::with_capacity(data.len());
    for (i, &v) in data.as_slice().iter().enumerate() {
        if v.fract() != 0.0 || !v.is_finite() {
            return Err(Error::NonIntegralLabel {
                value: v,
                index: data.coords(i),
            });
        }
        if v < 0.0 || v > u8::MAX as f64 || !coding.contains(v as u8) {
            return Err(Error::UnknownLabel {
                code: v as i64,
                index: data.coords(i),
            });
        }
        labels.push(v as u8);
    }
    LabelVolume::new(Grid::from_vec(data.shape(), labels)?, spacing, coding)
}

/// Writes a label map as uint8.
pub fn write_label_volume(path: impl AsRef<Path>, volume: &LabelVolume) -> Result<()> {
    let header = VolumeHeader::new(volume.shape(), DataType::UInt8, volume.spacing());
    write_volume(path, &header, &volume.labels().map(|&v| v as f64))
}

/// Reads one probability map; range checks happen in [`crate::RegionProbSet::new`].
pub fn read_prob_map(path: impl AsRef<Path>) -> Result<(ProbMap, Spacing)> {
    let (header, data) = read_volume(path)?;
    Ok((data, header.spacing))
}
