//! NIfTI-1 reading and writing.
//!
//! Single-file volumes (`n+1`) and header/image pairs (`ni1`) are read,
//! optionally gzip-compressed. Byte order is detected from `sizeof_hdr`.
//! Only `n+1` single files are written, always with `vox_offset = 352`,
//! `sform_code = 1` and the affine stored in the `srow_*` rows.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::mask::MaskVolume;

pub const HEADER_SIZE: usize = 348;
/// Header plus the four-byte extension flag.
pub const SINGLE_FILE_OFFSET: usize = 352;
pub const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
pub const MAGIC_PAIR: &[u8; 4] = b"ni1\0";
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Supported voxel storage types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Datatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl Datatype {
    pub const ALL: [Datatype; 5] = [
        Datatype::Uint8,
        Datatype::Int16,
        Datatype::Int32,
        Datatype::Float32,
        Datatype::Float64,
    ];

    pub fn from_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(Datatype::Uint8),
            4 => Ok(Datatype::Int16),
            8 => Ok(Datatype::Int32),
            16 => Ok(Datatype::Float32),
            64 => Ok(Datatype::Float64),
            other => Err(Error::UnsupportedDatatype(other)),
        }
    }

    pub fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Int32 => 8,
            Datatype::Float32 => 16,
            Datatype::Float64 => 64,
        }
    }

    pub fn size_bytes(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Int32 | Datatype::Float32 => 4,
            Datatype::Float64 => 8,
        }
    }

    pub fn bitpix(self) -> i16 {
        (self.size_bytes() * 8) as i16
    }

    pub fn name(self) -> &'static str {
        match self {
            Datatype::Uint8 => "uint8",
            Datatype::Int16 => "int16",
            Datatype::Int32 => "int32",
            Datatype::Float32 => "float32",
            Datatype::Float64 => "float64",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, Datatype::Uint8 | Datatype::Int16 | Datatype::Int32)
    }

    fn integer_range(self) -> (f64, f64) {
        match self {
            Datatype::Uint8 => (0.0, u8::MAX as f64),
            Datatype::Int16 => (i16::MIN as f64, i16::MAX as f64),
            Datatype::Int32 => (i32::MIN as f64, i32::MAX as f64),
            Datatype::Float32 => (-(f32::MAX as f64), f32::MAX as f64),
            Datatype::Float64 => (f64::MIN, f64::MAX),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ByteOrder {
    #[default]
    Little,
    Big,
}

pub type Affine = [[f64; 4]; 4];

/// Grid geometry and storage metadata of a volume.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub voxel_size: [f64; 3],
    /// Voxel index to world millimetres.
    pub affine: Affine,
    pub datatype: Datatype,
    pub scale_slope: f64,
    pub scale_intercept: f64,
}

impl VolumeHeader {
    /// Header with a diagonal affine built from the voxel sizes.
    pub fn new(dims: [usize; 3], voxel_size: [f64; 3]) -> Result<Self> {
        let header = VolumeHeader {
            dims,
            voxel_size,
            affine: diagonal_affine(voxel_size),
            datatype: Datatype::Uint8,
            scale_slope: 1.0,
            scale_intercept: 0.0,
        };
        header.validate()?;
        Ok(header)
    }

    pub fn with_affine(mut self, affine: Affine) -> Result<Self> {
        self.affine = affine;
        self.validate()?;
        Ok(self)
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Linear index of `(x, y, z)`, x fastest.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// World coordinates (mm) of a voxel centre.
    pub fn world(&self, voxel: [f64; 3]) -> [f64; 3] {
        let a = &self.affine;
        let mut out = [0.0; 3];
        for (r, o) in out.iter_mut().enumerate() {
            *o = a[r][0] * voxel[0] + a[r][1] * voxel[1] + a[r][2] * voxel[2] + a[r][3];
        }
        out
    }

    pub fn voxel_volume_ml(&self) -> f64 {
        self.voxel_size.iter().product::<f64>() / 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0 || d > i16::MAX as usize) {
            return Err(Error::MalformedHeader(format!(
                "dimensions {:?} must be within 1..=32767",
                self.dims
            )));
        }
        if self.voxel_size.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::MalformedHeader(format!(
                "voxel sizes {:?} must be positive",
                self.voxel_size
            )));
        }
        if self.affine.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::MalformedHeader(
                "affine has non-finite entries".into(),
            ));
        }
        if self.affine[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::MalformedHeader(
                "affine bottom row must be (0, 0, 0, 1)".into(),
            ));
        }
        let a = &self.affine;
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        if det == 0.0 || !det.is_finite() {
            return Err(Error::MalformedHeader("affine is singular".into()));
        }
        if !self.scale_slope.is_finite() || !self.scale_intercept.is_finite() {
            return Err(Error::MalformedHeader("non-finite scaling".into()));
        }
        Ok(())
    }
}

pub fn diagonal_affine(voxel_size: [f64; 3]) -> Affine {
    [
        [voxel_size[0], 0.0, 0.0, 0.0],
        [0.0, voxel_size[1], 0.0, 0.0],
        [0.0, 0.0, voxel_size[2], 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// A volume of real values, with scaling already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    pub header: VolumeHeader,
    pub voxels: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(header: VolumeHeader, voxels: Vec<f64>) -> Result<Self> {
        header.validate()?;
        if voxels.len() != header.voxel_count() {
            return Err(Error::GridMismatch(format!(
                "{} voxels supplied for dims {:?}",
                voxels.len(),
                header.dims
            )));
        }
        if let Some(index) = voxels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteVoxel { index });
        }
        Ok(ScalarVolume { header, voxels })
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.voxels[self.header.index(x, y, z)]
    }
}

struct FieldReader<'a> {
    bytes: &'a [u8],
    big: bool,
}

impl FieldReader<'_> {
    fn arr<const N: usize>(&self, off: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.bytes[off..off + N]);
        b
    }
    fn i16(&self, off: usize) -> i16 {
        let b = self.arr::<2>(off);
        if self.big {
            i16::from_be_bytes(b)
        } else {
            i16::from_le_bytes(b)
        }
    }
    fn i32(&self, off: usize) -> i32 {
        let b = self.arr::<4>(off);
        if self.big {
            i32::from_be_bytes(b)
        } else {
            i32::from_le_bytes(b)
        }
    }
    fn f32(&self, off: usize) -> f32 {
        let b = self.arr::<4>(off);
        if self.big {
            f32::from_be_bytes(b)
        } else {
            f32::from_le_bytes(b)
        }
    }
}

/// Header fields as stored, before interpretation.
struct RawHeader {
    big: bool,
    pair: bool,
    dims: [usize; 3],
    datatype: Datatype,
    voxel_size: [f64; 3],
    affine: Affine,
    vox_offset: usize,
    slope: f64,
    intercept: f64,
}

fn parse_header(bytes: &[u8]) -> Result<RawHeader> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "header is {} bytes, expected {HEADER_SIZE}",
            bytes.len()
        )));
    }
    let mut r = FieldReader { bytes, big: false };
    if r.i32(0) != HEADER_SIZE as i32 {
        r.big = true;
        if r.i32(0) != HEADER_SIZE as i32 {
            return Err(Error::MalformedHeader(
                "sizeof_hdr is not 348 in either byte order".into(),
            ));
        }
    }
    let magic = &bytes[344..348];
    let pair = if magic == MAGIC_SINGLE {
        false
    } else if magic == MAGIC_PAIR {
        true
    } else if &magic[..3] == b"n+2" || &magic[..3] == b"ni2" {
        return Err(Error::MalformedHeader("NIfTI-2 is not supported".into()));
    } else {
        return Err(Error::MalformedHeader(format!("bad magic {magic:?}")));
    };

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = r.i16(40 + 2 * i);
    }
    match dim[0] {
        3 => {}
        4 if dim[4] == 1 => {}
        4 => {
            return Err(Error::UnsupportedDimensionality(format!(
                "4-D volume with {} time points",
                dim[4]
            )))
        }
        n if (1..=7).contains(&n) => {
            return Err(Error::UnsupportedDimensionality(format!("{n}-D volume")))
        }
        n => return Err(Error::MalformedHeader(format!("dim[0] = {n}"))),
    }
    if dim[1..4].iter().any(|&d| d < 1) {
        return Err(Error::MalformedHeader(format!(
            "non-positive dimensions {:?}",
            &dim[1..4]
        )));
    }
    let dims = [dim[1] as usize, dim[2] as usize, dim[3] as usize];

    let datatype = Datatype::from_code(r.i16(70))?;
    let bitpix = r.i16(72);
    if bitpix != datatype.bitpix() {
        return Err(Error::MalformedHeader(format!(
            "bitpix {bitpix} inconsistent with {}",
            datatype.name()
        )));
    }

    let mut pixdim = [0f64; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = r.f32(76 + 4 * i) as f64;
    }
    let voxel_size = [pixdim[1].abs(), pixdim[2].abs(), pixdim[3].abs()];
    if voxel_size.iter().any(|v| !v.is_finite() || *v == 0.0) {
        return Err(Error::MalformedHeader(format!(
            "invalid voxel sizes {voxel_size:?}"
        )));
    }

    let vox_offset_raw = r.f32(108);
    if !vox_offset_raw.is_finite() || vox_offset_raw < 0.0 || vox_offset_raw.fract() != 0.0 {
        return Err(Error::MalformedHeader(format!(
            "invalid vox_offset {vox_offset_raw}"
        )));
    }
    let vox_offset = vox_offset_raw as usize;
    if !pair && vox_offset < HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "vox_offset {vox_offset} overlaps the header"
        )));
    }

    let mut slope = r.f32(112) as f64;
    let mut intercept = r.f32(116) as f64;
    if slope == 0.0 || !slope.is_finite() {
        slope = 1.0;
    }
    if !intercept.is_finite() {
        intercept = 0.0;
    }

    let qform_code = r.i16(252);
    let sform_code = r.i16(254);
    let affine = if sform_code > 0 {
        let mut a = [[0.0; 4]; 4];
        for (row, base) in [280usize, 296, 312].iter().enumerate() {
            for col in 0..4 {
                a[row][col] = r.f32(base + 4 * col) as f64;
            }
        }
        a[3] = [0.0, 0.0, 0.0, 1.0];
        a
    } else if qform_code > 0 {
        let quat = [r.f32(256) as f64, r.f32(260) as f64, r.f32(264) as f64];
        let offset = [r.f32(268) as f64, r.f32(272) as f64, r.f32(276) as f64];
        qform_affine(quat, offset, [pixdim[0], pixdim[1], pixdim[2], pixdim[3]])
    } else {
        diagonal_affine(voxel_size)
    };

    Ok(RawHeader {
        big: r.big,
        pair,
        dims,
        datatype,
        voxel_size,
        affine,
        vox_offset,
        slope,
        intercept,
    })
}

/// Rotation from the quaternion parameters, scaled by pixdim with qfac on z.
fn qform_affine(quat: [f64; 3], offset: [f64; 3], pixdim: [f64; 4]) -> Affine {
    let [mut b, mut c, mut d] = quat;
    let mut a = 1.0 - (b * b + c * c + d * d);
    if a < 1e-7 {
        let norm = (b * b + c * c + d * d).sqrt();
        b /= norm;
        c /= norm;
        d /= norm;
        a = 0.0;
    } else {
        a = a.sqrt();
    }
    let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
    let (dx, dy, dz) = (pixdim[1].abs(), pixdim[2].abs(), pixdim[3].abs() * qfac);
    let rot = [
        [
            a * a + b * b - c * c - d * d,
            2.0 * (b * c - a * d),
            2.0 * (b * d + a * c),
        ],
        [
            2.0 * (b * c + a * d),
            a * a + c * c - b * b - d * d,
            2.0 * (c * d - a * b),
        ],
        [
            2.0 * (b * d - a * c),
            2.0 * (c * d + a * b),
            a * a + d * d - c * c - b * b,
        ],
    ];
    let scale = [dx, dy, dz];
    let mut out = [[0.0; 4]; 4];
    for row in 0..3 {
        for col in 0..3 {
            out[row][col] = rot[row][col] * scale[col];
        }
        out[row][3] = offset[row];
    }
    out[3] = [0.0, 0.0, 0.0, 1.0];
    out
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        MultiGzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn image_path_for(header_path: &Path) -> PathBuf {
    let name = header_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let img = if let Some(stem) = name.strip_suffix(".hdr.gz") {
        format!("{stem}.img.gz")
    } else if let Some(stem) = name.strip_suffix(".hdr") {
        format!("{stem}.img")
    } else {
        format!("{name}.img")
    };
    header_path.with_file_name(img)
}

/// Reads a `.nii`, `.nii.gz`, `.hdr` or `.hdr.gz` volume.
pub fn read_volume(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    let path = path.as_ref();
    let bytes = read_maybe_gz(path)?;
    let raw = parse_header(&bytes)?;
    if raw.pair {
        let img_path = image_path_for(path);
        let data = read_maybe_gz(&img_path)?;
        decode_payload(&raw, &data, raw.vox_offset)
    } else {
        decode_payload(&raw, &bytes, raw.vox_offset)
    }
}

/// Decodes an uncompressed single-file (`n+1`) NIfTI-1 image held in memory.
pub fn decode_volume(bytes: &[u8]) -> Result<ScalarVolume> {
    let raw = parse_header(bytes)?;
    if raw.pair {
        return Err(Error::MalformedHeader(
            "header/image pair cannot be decoded from a single buffer".into(),
        ));
    }
    decode_payload(&raw, bytes, raw.vox_offset)
}

fn decode_payload(raw: &RawHeader, data: &[u8], offset: usize) -> Result<ScalarVolume> {
    let count = raw.dims.iter().product::<usize>();
    let width = raw.datatype.size_bytes();
    let expected = offset + count * width;
    if data.len() < expected {
        return Err(Error::TruncatedData {
            expected: count * width,
            found: data.len().saturating_sub(offset),
        });
    }
    let payload = &data[offset..expected];
    let big = raw.big;
    let mut voxels = Vec::with_capacity(count);
    for (index, chunk) in payload.chunks_exact(width).enumerate() {
        let rawv = match raw.datatype {
            Datatype::Uint8 => chunk[0] as f64,
            Datatype::Int16 => {
                let b = [chunk[0], chunk[1]];
                (if big {
                    i16::from_be_bytes(b)
                } else {
                    i16::from_le_bytes(b)
                }) as f64
            }
            Datatype::Int32 => {
                let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
                (if big {
                    i32::from_be_bytes(b)
                } else {
                    i32::from_le_bytes(b)
                }) as f64
            }
            Datatype::Float32 => {
                let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
                (if big {
                    f32::from_be_bytes(b)
                } else {
                    f32::from_le_bytes(b)
                }) as f64
            }
            Datatype::Float64 => {
                let mut b = [0u8; 8];
                b.copy_from_slice(chunk);
                if big {
                    f64::from_be_bytes(b)
                } else {
                    f64::from_le_bytes(b)
                }
            }
        };
        let v = rawv * raw.slope + raw.intercept;
        if !v.is_finite() {
            return Err(Error::NonFiniteVoxel { index });
        }
        voxels.push(v);
    }
    let header = VolumeHeader {
        dims: raw.dims,
        voxel_size: raw.voxel_size,
        affine: raw.affine,
        datatype: raw.datatype,
        scale_slope: raw.slope,
        scale_intercept: raw.intercept,
    };
    header.validate()?;
    Ok(ScalarVolume { header, voxels })
}

#[derive(Debug, Clone, Copy)]
pub struct WriteOptions {
    pub datatype: Datatype,
    pub byte_order: ByteOrder,
}

impl WriteOptions {
    pub fn new(datatype: Datatype) -> Self {
        WriteOptions {
            datatype,
            byte_order: ByteOrder::Little,
        }
    }
}

struct FieldWriter {
    buf: Vec<u8>,
    big: bool,
}

impl FieldWriter {
    fn put(&mut self, off: usize, bytes: &[u8]) {
        self.buf[off..off + bytes.len()].copy_from_slice(bytes);
    }
    fn i16(&mut self, off: usize, v: i16) {
        let b = if self.big {
            v.to_be_bytes()
        } else {
            v.to_le_bytes()
        };
        self.put(off, &b);
    }
    fn i32(&mut self, off: usize, v: i32) {
        let b = if self.big {
            v.to_be_bytes()
        } else {
            v.to_le_bytes()
        };
        self.put(off, &b);
    }
    fn f32(&mut self, off: usize, v: f32) {
        let b = if self.big {
            v.to_be_bytes()
        } else {
            v.to_le_bytes()
        };
        self.put(off, &b);
    }
}

fn f32_field(v: f64, what: &str) -> Result<f32> {
    let f = v as f32;
    if !f.is_finite() {
        return Err(Error::MalformedHeader(format!(
            "{what} = {v} does not fit in float32"
        )));
    }
    Ok(f)
}

/// Serializes a volume to uncompressed single-file NIfTI-1 bytes.
pub fn encode_volume(vol: &ScalarVolume, opts: &WriteOptions) -> Result<Vec<u8>> {
    let h = &vol.header;
    h.validate()?;
    if vol.voxels.len() != h.voxel_count() {
        return Err(Error::GridMismatch(format!(
            "{} voxels for dims {:?}",
            vol.voxels.len(),
            h.dims
        )));
    }
    let dt = opts.datatype;
    let big = opts.byte_order == ByteOrder::Big;
    let mut w = FieldWriter {
        buf: vec![0u8; SINGLE_FILE_OFFSET + vol.voxels.len() * dt.size_bytes()],
        big,
    };

    w.i32(0, HEADER_SIZE as i32);
    w.put(38, b"r");
    let dim: [i16; 8] = [
        3,
        h.dims[0] as i16,
        h.dims[1] as i16,
        h.dims[2] as i16,
        1,
        1,
        1,
        1,
    ];
    for (i, d) in dim.iter().enumerate() {
        w.i16(40 + 2 * i, *d);
    }
    w.i16(70, dt.code());
    w.i16(72, dt.bitpix());
    let pixdim = [
        1.0,
        h.voxel_size[0],
        h.voxel_size[1],
        h.voxel_size[2],
        1.0,
        1.0,
        1.0,
        1.0,
    ];
    for (i, p) in pixdim.iter().enumerate() {
        w.f32(76 + 4 * i, f32_field(*p, "pixdim")?);
    }
    w.f32(108, SINGLE_FILE_OFFSET as f32);
    w.f32(112, f32_field(h.scale_slope, "scl_slope")?);
    w.f32(116, f32_field(h.scale_intercept, "scl_inter")?);
    // xyzt_units: millimetres
    w.put(123, &[2]);
    w.put(148, b"cstkit");
    w.i16(252, 0);
    w.i16(254, 1);
    for (row, base) in [280usize, 296, 312].iter().enumerate() {
        for col in 0..4 {
            w.f32(base + 4 * col, f32_field(h.affine[row][col], "srow")?);
        }
    }
    w.put(344, MAGIC_SINGLE);

    let slope = if h.scale_slope == 0.0 {
        1.0
    } else {
        h.scale_slope
    };
    let identity = slope == 1.0 && h.scale_intercept == 0.0;
    let (lo, hi) = dt.integer_range();
    let width = dt.size_bytes();
    for (index, &v) in vol.voxels.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteVoxel { index });
        }
        let mut raw = if identity {
            v
        } else {
            (v - h.scale_intercept) / slope
        };
        let out_of_range = || Error::ValueOutOfRange {
            value: v,
            index,
            datatype: dt.name(),
        };
        if dt.is_integer() {
            let rounded = raw.round();
            if (raw - rounded).abs() > 1e-9 * raw.abs().max(1.0) {
                return Err(out_of_range());
            }
            raw = rounded;
        }
        if raw < lo || raw > hi {
            return Err(out_of_range());
        }
        let off = SINGLE_FILE_OFFSET + index * width;
        match dt {
            Datatype::Uint8 => w.buf[off] = raw as u8,
            Datatype::Int16 => w.i16(off, raw as i16),
            Datatype::Int32 => w.i32(off, raw as i32),
            Datatype::Float32 => w.f32(off, raw as f32),
            Datatype::Float64 => {
                let b = if big {
                    raw.to_be_bytes()
                } else {
                    raw.to_le_bytes()
                };
                w.put(off, &b);
            }
        }
    }
    Ok(w.buf)
}

/// Writes `vol` as a little-endian single-file NIfTI-1; gzip when the path ends in `.gz`.
pub fn write_volume(vol: &ScalarVolume, path: impl AsRef<Path>, datatype: Datatype) -> Result<()> {
    write_volume_with(vol, path, &WriteOptions::new(datatype))
}

pub fn write_volume_with(
    vol: &ScalarVolume,
    path: impl AsRef<Path>,
    opts: &WriteOptions,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_volume(vol, opts)?;
    let gz = path
        .file_name()
        .map(|n| n.to_string_lossy().ends_with(".gz"))
        .unwrap_or(false);
    let out = if gz {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes
    };
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Voxels strictly above `threshold` become mask voxels.
pub fn binarize(vol: &ScalarVolume, threshold: f64) -> MaskVolume {
    let bits = vol.voxels.iter().map(|&v| v > threshold).collect();
    MaskVolume::from_parts(vol.header.clone(), bits)
}

/// Binarizes at `min + fraction * (max - min)` of the volume's value range.
pub fn binarize_relative(vol: &ScalarVolume, fraction: f64) -> MaskVolume {
    let (lo, hi) = vol
        .voxels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return binarize(vol, fraction);
    }
    binarize(vol, lo + fraction * (hi - lo))
}
