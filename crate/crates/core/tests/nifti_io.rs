mod common;

use std::io::Read;

use flate2::read::GzDecoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cst_core::nifti::{
    decode_volume, encode_volume, read_volume, write_volume, write_volume_with, ByteOrder,
    Datatype, ScalarVolume, VolumeHeader, WriteOptions, SINGLE_FILE_OFFSET,
};
use cst_core::Error;

fn random_volume(rng: &mut ChaCha8Rng, dt: Datatype) -> ScalarVolume {
    let dims = [
        rng.random_range(1..9),
        rng.random_range(1..9),
        rng.random_range(1..9),
    ];
    let vs = [
        rng.random_range(0.5..3.0),
        rng.random_range(0.5..3.0),
        rng.random_range(0.5..3.0),
    ];
    let header = VolumeHeader::new(dims, vs).unwrap();
    let n = header.voxel_count();
    let voxels = (0..n)
        .map(|_| match dt {
            Datatype::Uint8 => rng.random_range(0..=255) as f64,
            Datatype::Int16 => rng.random_range(-32768..=32767) as f64,
            Datatype::Int32 => rng.random_range(i32::MIN..=i32::MAX) as f64,
            Datatype::Float32 => rng.random_range(-1e6f32..1e6) as f64,
            Datatype::Float64 => rng.random_range(-1e12..1e12),
        })
        .collect();
    ScalarVolume::new(header, voxels).unwrap()
}

fn swap_check(le: &[u8], be: &[u8], dt: Datatype) {
    assert_eq!(le.len(), be.len());
    let w = dt.size_bytes();
    for (a, b) in le[SINGLE_FILE_OFFSET..]
        .chunks(w)
        .zip(be[SINGLE_FILE_OFFSET..].chunks(w))
    {
        let mut r = b.to_vec();
        r.reverse();
        assert_eq!(a, &r[..]);
    }
    // sizeof_hdr, dim[0..8], datatype and bitpix are swapped field by field
    let mut s = be[0..4].to_vec();
    s.reverse();
    assert_eq!(&le[0..4], &s[..]);
    for off in (40..74).step_by(2) {
        assert_eq!(le[off], be[off + 1]);
        assert_eq!(le[off + 1], be[off]);
    }
}

#[test]
fn big_endian_is_the_byte_swap_of_little_endian() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dt in Datatype::ALL {
        let v = random_volume(&mut rng, dt);
        let le = encode_volume(
            &v,
            &WriteOptions {
                datatype: dt,
                byte_order: ByteOrder::Little,
            },
        )
        .unwrap();
        let be = encode_volume(
            &v,
            &WriteOptions {
                datatype: dt,
                byte_order: ByteOrder::Big,
            },
        )
        .unwrap();
        swap_check(&le, &be, dt);
        assert_eq!(decode_volume(&le).unwrap().voxels, v.voxels);
        assert_eq!(decode_volume(&be).unwrap().voxels, v.voxels);
    }
}

#[test]
fn gzip_file_holds_the_plain_encoding() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let v = random_volume(&mut rng, Datatype::Int16);
    let path = dir.path().join("v.nii.gz");
    write_volume(&v, &path, Datatype::Int16).unwrap();
    let raw = std::fs::read(&path).unwrap();
    assert_eq!(&raw[..2], &[0x1f, 0x8b]);
    let mut plain = Vec::new();
    GzDecoder::new(&raw[..]).read_to_end(&mut plain).unwrap();
    assert_eq!(
        plain,
        encode_volume(&v, &WriteOptions::new(Datatype::Int16)).unwrap()
    );
    assert_eq!(read_volume(&path).unwrap().voxels, v.voxels);
}

/// Hand-assembled big-endian int16 file with scaling and a qform only.
#[test]
fn decodes_hand_built_header() {
    let mut b = vec![0u8; 352 + 2 * 2 * 3];
    b[0..4].copy_from_slice(&348i32.to_be_bytes());
    for (i, d) in [3i16, 2, 1, 3, 1, 1, 1, 1].iter().enumerate() {
        b[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_be_bytes());
    }
    b[70..72].copy_from_slice(&4i16.to_be_bytes());
    b[72..74].copy_from_slice(&16i16.to_be_bytes());
    for (i, p) in [1.0f32, 2.0, 3.0, 4.0, 1.0, 1.0, 1.0, 1.0]
        .iter()
        .enumerate()
    {
        b[76 + 4 * i..80 + 4 * i].copy_from_slice(&p.to_be_bytes());
    }
    b[108..112].copy_from_slice(&352f32.to_be_bytes());
    b[112..116].copy_from_slice(&2f32.to_be_bytes());
    b[116..120].copy_from_slice(&1f32.to_be_bytes());
    b[252..254].copy_from_slice(&1i16.to_be_bytes()); // qform_code
                                                      // identity rotation, offsets 10, 20, 30
    for (i, q) in [0f32, 0.0, 0.0, 10.0, 20.0, 30.0].iter().enumerate() {
        b[256 + 4 * i..260 + 4 * i].copy_from_slice(&q.to_be_bytes());
    }
    b[344..348].copy_from_slice(b"n+1\0");
    for (i, raw) in [-3i16, 0, 5, 100, -32768, 32767].iter().enumerate() {
        b[352 + 2 * i..354 + 2 * i].copy_from_slice(&raw.to_be_bytes());
    }
    let v = decode_volume(&b).unwrap();
    assert_eq!(v.header.dims, [2, 1, 3]);
    assert_eq!(v.header.voxel_size, [2.0, 3.0, 4.0]);
    assert_eq!(v.voxels, vec![-5.0, 1.0, 11.0, 201.0, -65535.0, 65535.0]);
    assert_eq!(v.header.world([1.0, 0.0, 2.0]), [12.0, 20.0, 38.0]);
}

#[test]
fn header_image_pair_is_read_from_hdr() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let v = random_volume(&mut rng, Datatype::Float32);
    let single = encode_volume(&v, &WriteOptions::new(Datatype::Float32)).unwrap();
    let mut hdr = single[..348].to_vec();
    hdr[108..112].copy_from_slice(&0f32.to_le_bytes());
    hdr[344..348].copy_from_slice(b"ni1\0");
    std::fs::write(dir.path().join("s.hdr"), &hdr).unwrap();
    std::fs::write(dir.path().join("s.img"), &single[352..]).unwrap();
    assert_eq!(
        read_volume(dir.path().join("s.hdr")).unwrap().voxels,
        v.voxels
    );
}

#[test]
fn truncated_and_missing_files_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let v = random_volume(&mut rng, Datatype::Int32);
    let path = dir.path().join("t.nii");
    write_volume_with(&v, &path, &WriteOptions::new(Datatype::Int32)).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(matches!(
        read_volume(&path),
        Err(Error::TruncatedData { .. })
    ));
    assert!(matches!(
        read_volume(dir.path().join("none.nii")),
        Err(Error::Io { .. })
    ));
}
