mod common;

use brats_core::nifti::{
    read_label_volume, read_volume, write_label_volume, write_volume, DataType, VolumeHeader,
};
use brats_core::volume::{Grid, LabelCoding, Spacing};
use brats_core::Error;
use common::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn sample(rng: &mut StdRng, dt: DataType) -> f64 {
    match dt {
        DataType::UInt8 => rng.gen_range(0..=255) as f64,
        DataType::Int16 => rng.gen_range(i16::MIN..=i16::MAX) as f64,
        DataType::Int32 => rng.gen_range(i32::MIN..=i32::MAX) as f64,
        DataType::Float32 => (rng.gen_range(-1e3..1e3) as f32) as f64,
        DataType::Float64 => rng.gen_range(-1e6..1e6),
    }
}

#[test]
fn every_datatype_roundtrips_in_both_containers() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(31);
    for dt in [
        DataType::UInt8,
        DataType::Int16,
        DataType::Int32,
        DataType::Float32,
        DataType::Float64,
    ] {
        for ext in ["nii", "nii.gz", "rv1"] {
            let shape = random_shape(&mut rng, 9);
            let n = shape.iter().product();
            let data =
                Grid::from_vec(shape, (0..n).map(|_| sample(&mut rng, dt)).collect()).unwrap();
            let spacing = Spacing::new(0.5, 1.25, 3.0).unwrap();
            let header = VolumeHeader::new(shape, dt, spacing);
            let path = dir.path().join(format!("v_{}.{ext}", dt.name()));
            write_volume(&path, &header, &data).unwrap();
            let (back_header, back) = read_volume(&path).unwrap();
            assert_eq!(back, data, "{} {ext}", dt.name());
            assert_eq!(back_header.spacing, spacing);
            assert_eq!(back_header.datatype, dt);
        }
    }
}

#[test]
fn gzip_output_is_compressed() {
    let dir = tempfile::tempdir().unwrap();
    let data = Grid::filled([20, 20, 20], 0.0).unwrap();
    let h = VolumeHeader::new([20, 20, 20], DataType::UInt8, Spacing::default());
    write_volume(dir.path().join("a.nii.gz"), &h, &data).unwrap();
    write_volume(dir.path().join("a.nii"), &h, &data).unwrap();
    let gz = std::fs::read(dir.path().join("a.nii.gz")).unwrap();
    assert_eq!(&gz[..2], &[0x1f, 0x8b]);
    assert!(gz.len() < std::fs::metadata(dir.path().join("a.nii")).unwrap().len() as usize);
}

#[test]
fn probabilities_survive_float32() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(32);
    let data = Grid::from_vec(
        [5, 4, 3],
        (0..60).map(|_| rng.gen_range(0.0..=1.0)).collect(),
    )
    .unwrap();
    let h = VolumeHeader::new([5, 4, 3], DataType::Float32, Spacing::default());
    let path = dir.path().join("p.nii.gz");
    write_volume(&path, &h, &data).unwrap();
    let (_, back) = read_volume(&path).unwrap();
    for (a, b) in back.as_slice().iter().zip(data.as_slice()) {
        assert_eq!(*a, *b as f32 as f64);
    }
}

#[test]
fn label_volumes_roundtrip_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(33);
    let v = random_label_volume(&mut rng, [9, 8, 7], Spacing::new(1.0, 1.0, 2.5).unwrap());
    let path = dir.path().join("labels.nii.gz");
    write_label_volume(&path, &v).unwrap();
    assert_eq!(read_label_volume(&path, LabelCoding::default()).unwrap(), v);

    let zeros = Grid::filled([3, 3, 3], 0.0).unwrap();
    let h = VolumeHeader::new([3, 3, 3], DataType::UInt8, Spacing::default());
    let zpath = dir.path().join("zeros.nii");
    write_volume(&zpath, &h, &zeros).unwrap();
    let bg = read_label_volume(&zpath, LabelCoding::default()).unwrap();
    assert!(!bg.regions().get(brats_core::Region::Wt).any());

    let mut three = zeros.clone();
    three.set(2, 1, 0, 3.0);
    let tpath = dir.path().join("three.nii");
    write_volume(&tpath, &h, &three).unwrap();
    assert!(matches!(
        read_label_volume(&tpath, LabelCoding::default()),
        Err(Error::UnknownLabel {
            code: 3,
            index: [2, 1, 0]
        })
    ));
}

#[test]
fn missing_file_is_io_error() {
    let err = read_volume("/nonexistent/volume.nii").unwrap_err();
    assert_eq!(err.category(), "io");
}
