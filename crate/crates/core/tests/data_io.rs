//! Image ingestion, amplitude encoding and synthetic targets.

use std::path::Path;

use d2nn::data::pgm::Pgm;
use d2nn::data::{
    encode_amplitude, encode_with, load_image_dir, load_images, load_mnist, parse_idx_images,
    parse_idx_labels, synth_pinhole, Encoding, LabeledImage, LoadPolicy,
};
use d2nn::optics::GridSpec;
use d2nn::D2nnError;
use ndarray::Array2;

const LAMBDA: f64 = 0.75e-3;

fn idx_header(magic: u32, dims: &[u32]) -> Vec<u8> {
    let mut b = magic.to_be_bytes().to_vec();
    for d in dims {
        b.extend(d.to_be_bytes());
    }
    b
}

/// Linear interpolation between pixel centers in physical units, held flat
/// beyond the outermost centers.
fn reference_resample(src: &Array2<f64>, out: usize) -> Array2<f64> {
    let axis = |n_src: usize, j: usize| -> (usize, usize, f64) {
        let src_pitch = 1.0 / n_src as f64;
        let x = (j as f64 + 0.5) / out as f64;
        let first = 0.5 * src_pitch;
        let last = 1.0 - 0.5 * src_pitch;
        if x <= first {
            return (0, 0, 0.0);
        }
        if x >= last {
            return (n_src - 1, n_src - 1, 0.0);
        }
        let mut k = 0;
        while (k as f64 + 1.5) * src_pitch < x {
            k += 1;
        }
        let w = (x - (k as f64 + 0.5) * src_pitch) / src_pitch;
        (k, k + 1, w)
    };
    let (h, w) = src.dim();
    Array2::from_shape_fn((out, out), |(y, x)| {
        let (y0, y1, wy) = axis(h, y);
        let (x0, x1, wx) = axis(w, x);
        let top = src[[y0, x0]] * (1.0 - wx) + src[[y0, x1]] * wx;
        let bottom = src[[y1, x0]] * (1.0 - wx) + src[[y1, x1]] * wx;
        top * (1.0 - wy) + bottom * wy
    })
}

#[test]
fn checkerboard_upsampling_matches_reference_resampler() {
    let board = Array2::from_shape_fn((28, 28), |(y, x)| ((x + y) % 2) as f32);
    let image = LabeledImage::new(board.clone(), None).unwrap();
    let g = GridSpec::square(120, 0.4e-3, LAMBDA).unwrap();
    let field = encode_amplitude(&image, g, 100.0 * g.pitch).unwrap();
    let expected = reference_resample(&board.mapv(f64::from), 100);
    for ((y, x), v) in field.values().indexed_iter() {
        assert_eq!(v.im, 0.0);
        let inside = (10..110).contains(&y) && (10..110).contains(&x);
        let want = if inside { expected[[y - 10, x - 10]] } else { 0.0 };
        assert!((v.re - want).abs() < 1e-6, "({y},{x}): {} vs {want}", v.re);
    }
}

#[test]
fn constant_images_encode_to_constant_regions() {
    let g = GridSpec::square(40, 0.5e-3, LAMBDA).unwrap();
    let zeros = LabeledImage::new(Array2::zeros((28, 28)), None).unwrap();
    assert!(encode_amplitude(&zeros, g, 10e-3).unwrap().values().iter().all(|v| v.norm() == 0.0));
    let ones = LabeledImage::new(Array2::ones((28, 28)), None).unwrap();
    let full = encode_amplitude(&ones, g, g.extent_x()).unwrap();
    assert!(full.values().iter().all(|v| v.re == 1.0 && v.im == 0.0));
    assert!(encode_amplitude(&ones, g, 1.01 * g.extent_x()).is_err());
}

#[test]
fn matching_dimensions_reproduce_pixels_exactly() {
    let g = GridSpec::square(36, 0.5e-3, LAMBDA).unwrap();
    let pixels = Array2::from_shape_fn((28, 28), |(y, x)| ((y * 28 + x) % 256) as f32 / 255.0);
    let field = encode_with(
        &LabeledImage::new(pixels.clone(), None).unwrap(),
        g,
        &Encoding {
            object_extent: 28.0 * g.pitch,
            binarize: false,
        },
    )
    .unwrap();
    for ((y, x), &p) in pixels.indexed_iter() {
        assert_eq!(field.values()[[y + 4, x + 4]].re, f64::from(p));
    }
}

#[test]
fn idx_examples() {
    let mut bytes = idx_header(0x0803, &[1, 2, 2]);
    bytes.extend([0xFF, 0, 0, 0xFF]);
    let images = parse_idx_images(&bytes).unwrap();
    assert_eq!(images.len(), 1);
    assert_eq!(images[0].pixels(), &ndarray::array![[1.0f32, 0.0], [0.0, 1.0]]);

    bytes.push(0);
    assert!(matches!(parse_idx_images(&bytes), Err(D2nnError::TrailingBytes(1))));
    let mut wrong = idx_header(0x0801, &[1, 2, 2]);
    wrong.extend([0; 4]);
    assert!(matches!(parse_idx_images(&wrong), Err(D2nnError::WrongMagic { .. })));
    let mut short = idx_header(0x0803, &[2, 2, 2]);
    short.extend([0; 5]);
    assert!(matches!(parse_idx_images(&short), Err(D2nnError::Truncated { .. })));
    let huge = idx_header(0x0803, &[u32::MAX, u32::MAX, u32::MAX]);
    assert!(parse_idx_images(&huge).is_err());

    let mut labels = idx_header(0x0801, &[3]);
    labels.extend([5, 0, 9]);
    assert_eq!(parse_idx_labels(&labels).unwrap(), vec![5, 0, 9]);
    assert!(parse_idx_labels(&idx_header(0x0801, &[0])).unwrap().is_empty());
    let mut bad = idx_header(0x0801, &[1]);
    bad.push(10);
    assert!(matches!(parse_idx_labels(&bad), Err(D2nnError::LabelOutOfRange(10))));
}

#[test]
fn official_mnist_dimensions_when_present() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    if !dir.join("train-images-idx3-ubyte").exists() {
        eprintln!("MNIST not found under {}; skipping", dir.display());
        return;
    }
    let mnist = load_mnist(&dir).unwrap();
    assert_eq!(mnist.train.len(), 60_000);
    assert_eq!(mnist.test.len(), 10_000);
    assert!(mnist.train.iter().all(|i| i.width() == 28 && i.height() == 28 && i.label().unwrap() <= 9));
}

fn write_pgm(path: &Path, width: usize, height: usize, fill: u16) {
    Pgm {
        width,
        height,
        maxval: 255,
        samples: vec![fill; width * height],
    }
    .write(path)
    .unwrap();
}

#[test]
fn image_directory_ordering_and_policies() {
    let g = GridSpec::square(20, 0.5e-3, LAMBDA).unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert!(load_image_dir(dir.path(), g, 5e-3, LoadPolicy::Abort).unwrap().is_empty());

    for i in (0..100).rev() {
        write_pgm(&dir.path().join(format!("img_{i:03}.pgm")), 4 + i % 3, 5, (i * 2) as u16);
    }
    let loaded = load_images(dir.path(), LoadPolicy::Abort).unwrap();
    assert_eq!(loaded.len(), 100);
    for (i, (path, img)) in loaded.iter().enumerate() {
        assert_eq!(path.file_name().unwrap().to_str().unwrap(), format!("img_{i:03}.pgm"));
        assert_eq!(img.width(), 4 + i % 3);
        assert!((img.pixels()[[0, 0]] - (i * 2) as f32 / 255.0).abs() < 1e-7);
    }

    std::fs::write(dir.path().join("img_050b.pgm"), b"not an image").unwrap();
    assert!(matches!(
        load_images(dir.path(), LoadPolicy::Abort),
        Err(D2nnError::MalformedPgm(_))
    ));
    assert_eq!(load_images(dir.path(), LoadPolicy::SkipWithWarning).unwrap().len(), 100);
}

#[test]
fn white_pgm_gives_unit_object_region() {
    let g = GridSpec::square(20, 0.5e-3, LAMBDA).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_pgm(&dir.path().join("white.pgm"), 7, 7, 255);
    let fields = load_image_dir(dir.path(), g, 5e-3, LoadPolicy::Abort).unwrap();
    let lit: Vec<(usize, usize)> = fields[0]
        .values()
        .indexed_iter()
        .filter(|(_, v)| v.re == 1.0)
        .map(|(i, _)| i)
        .collect();
    assert_eq!(lit.len(), 100);
    assert!(lit.iter().all(|&(y, x)| (5..15).contains(&y) && (5..15).contains(&x)));
    assert_eq!(fields[0].energy(), 100.0 * g.pixel_area());
}

#[test]
fn pinhole_counts_follow_disk_area() {
    let g = GridSpec::square(100, 0.3e-3, LAMBDA).unwrap();
    for d in [1e-3, 2e-3, 3e-3] {
        let n = synth_pinhole(g, d).unwrap().values().iter().filter(|v| v.re > 0.0).count() as f64;
        let r = d / 2.0 / g.pitch;
        let area = std::f64::consts::PI * r * r;
        assert!((n - area).abs() <= 2.0 * std::f64::consts::PI * r, "{d}: {n} vs {area}");
    }
}
