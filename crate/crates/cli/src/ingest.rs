//! Images and volumes to kernel fields: one Gaussian kernel per pixel or
//! voxel with positive intensity.

use std::path::Path;

use image::{DynamicImage, ImageReader};
use serde::{Deserialize, Serialize};
use tcf_core::{GridSpec, IntensityField, TcfError, Vector};

use crate::error::{CliError, Result};

/// Kernel variance for 2-D images.
pub const IMAGE_SCALE: f64 = 0.5;
/// Nearest kernels per evaluation for 2-D images.
pub const IMAGE_K: usize = 440;
pub const VOLUME_SCALE: f64 = 1.0;
pub const VOLUME_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IngestOptions {
    /// Kernel variance; `None` takes the per-format default.
    pub scale: Option<f64>,
    /// k-nearest truncation; `None` takes the per-format default, capped at
    /// the number of kernels.
    pub k: Option<usize>,
    /// Dark tubes on a light background: intensities become `max − v`.
    pub negate: bool,
}

fn resolve_k(k: Option<usize>, default: usize, n: usize) -> usize {
    k.unwrap_or(default.min(n))
}

fn checked_scale(scale: f64) -> Result<f64> {
    if scale.is_finite() && scale > 0.0 {
        Ok(scale)
    } else {
        Err(CliError::Usage(format!("scale {scale} must be positive")))
    }
}

/// An image-backed field and its raster size.
#[derive(Debug, Clone)]
pub struct ImageField {
    pub field: IntensityField<2>,
    pub width: usize,
    pub height: usize,
}

impl ImageField {
    /// One sample per pixel center.
    pub fn native_grid(&self) -> Result<GridSpec<2>> {
        native_grid([self.width, self.height], [1.0, 1.0])
    }
}

fn native_grid<const N: usize>(dims: [usize; N], spacing: [f64; N]) -> Result<GridSpec<N>> {
    let upper: [f64; N] = std::array::from_fn(|a| (dims[a].max(1) - 1) as f64 * spacing[a]);
    Ok(GridSpec::new(dims, [0.0; N], upper)?)
}

/// Builds kernels from `(position, raw value)` pairs; `max` is the value of
/// full intensity.
fn kernels<const N: usize>(
    samples: impl Iterator<Item = (Vector<N>, f64)>,
    max: f64,
    negate: bool,
) -> (Vec<Vector<N>>, Vec<f64>) {
    let mut centers = Vec::new();
    let mut weights = Vec::new();
    for (x, v) in samples {
        let v = if negate { max - v } else { v };
        if v > 0.0 {
            centers.push(x);
            weights.push(v / max);
        }
    }
    (centers, weights)
}

fn is_sixteen_bit(img: &DynamicImage) -> bool {
    !matches!(
        img,
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_)
    )
}

/// Reads a grayscale (or luma-converted color) PNG or PGM.
///
/// Pixel `(row, col)` becomes the kernel center `(x, y) = (col, row)`; the
/// weight is the intensity divided by the type maximum.
pub fn load_image_field(path: &Path, opts: &IngestOptions) -> Result<ImageField> {
    let img = ImageReader::open(path)
        .map_err(|e| CliError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| CliError::io(path, e))?
        .decode()
        .map_err(|e| CliError::io(path, e))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let (values, max): (Vec<f64>, f64) = if is_sixteen_bit(&img) {
        (img.into_luma16().into_raw().into_iter().map(f64::from).collect(), 65535.0)
    } else {
        (img.into_luma8().into_raw().into_iter().map(f64::from).collect(), 255.0)
    };
    let samples = values.into_iter().enumerate().map(|(i, v)| {
        let (row, col) = (i / width, i % width);
        (Vector::<2>::new(col as f64, row as f64), v)
    });
    let (centers, weights) = kernels(samples, max, opts.negate);
    if centers.is_empty() {
        return Err(TcfError::EmptyField.into());
    }
    let n = centers.len();
    let field = IntensityField::isotropic(centers, weights, checked_scale(opts.scale.unwrap_or(IMAGE_SCALE))?)?
        .with_knn(resolve_k(opts.k, IMAGE_K, n))?;
    Ok(ImageField { field, width, height })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Uint8,
    Uint16,
    Float32,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::Uint8 => 1,
            Dtype::Uint16 => 2,
            Dtype::Float32 => 4,
        }
    }
}

fn default_spacing() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

fn default_order() -> String {
    "x-fastest".into()
}

/// Description of a raw little-endian volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSidecar {
    pub dims: [usize; 3],
    pub dtype: Dtype,
    #[serde(default = "default_spacing")]
    pub spacing: [f64; 3],
    #[serde(default = "default_order")]
    pub order: String,
}

impl VolumeSidecar {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(path, format!("bad volume sidecar: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct VolumeField {
    pub field: IntensityField<3>,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
}

impl VolumeField {
    /// One sample per voxel center.
    pub fn native_grid(&self) -> Result<GridSpec<3>> {
        native_grid(self.dims, self.spacing)
    }
}

/// Decodes a raw volume; element `i` sits at voxel `(i mod nx, ⌊i/nx⌋ mod ny, ⌊i/(nx·ny)⌋)`.
pub fn decode_volume(bytes: &[u8], sidecar: &VolumeSidecar) -> std::result::Result<Vec<f64>, String> {
    if sidecar.order != "x-fastest" {
        return Err(format!("unsupported voxel order '{}'", sidecar.order));
    }
    let count = sidecar
        .dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or("dimensions overflow")?;
    let expected = count * sidecar.dtype.size();
    if bytes.len() != expected {
        return Err(format!(
            "payload is {} bytes but dims {:?} of {:?} need {expected}",
            bytes.len(),
            sidecar.dims,
            sidecar.dtype
        ));
    }
    let values: Vec<f64> = match sidecar.dtype {
        Dtype::Uint8 => bytes.iter().map(|&b| f64::from(b)).collect(),
        Dtype::Uint16 => bytes
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_le_bytes([c[0], c[1]])))
            .collect(),
        Dtype::Float32 => bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err("volume holds non-finite samples".into());
    }
    Ok(values)
}

/// Reads a raw volume described by `sidecar`. Voxel `(i, j, k)` becomes the
/// center `(i·sx, j·sy, k·sz)`. Integer types are normalized by their type
/// maximum, float volumes by their largest sample.
pub fn load_volume_field(path: &Path, sidecar_path: &Path, opts: &IngestOptions) -> Result<VolumeField> {
    let sidecar = VolumeSidecar::read(sidecar_path)?;
    if sidecar.spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(CliError::io(sidecar_path, "spacing must be positive"));
    }
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let values = decode_volume(&bytes, &sidecar).map_err(|e| CliError::io(path, e))?;
    let max = match sidecar.dtype {
        Dtype::Uint8 => 255.0,
        Dtype::Uint16 => 65535.0,
        Dtype::Float32 => values.iter().copied().fold(0.0, f64::max),
    };
    if max <= 0.0 {
        return Err(TcfError::EmptyField.into());
    }
    let [nx, ny, _] = sidecar.dims;
    let s = sidecar.spacing;
    let samples = values.into_iter().enumerate().map(|(i, v)| {
        let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
        (Vector::<3>::new(x as f64 * s[0], y as f64 * s[1], z as f64 * s[2]), v)
    });
    let (centers, weights) = kernels(samples, max, opts.negate);
    if centers.is_empty() {
        return Err(TcfError::EmptyField.into());
    }
    let n = centers.len();
    let field = IntensityField::isotropic(centers, weights, checked_scale(opts.scale.unwrap_or(VOLUME_SCALE))?)?
        .with_knn(resolve_k(opts.k, VOLUME_K, n))?;
    Ok(VolumeField {
        field,
        dims: sidecar.dims,
        spacing: sidecar.spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, ImageBuffer, Luma};
    use tcf_core::JetOrder;

    fn write_gray(dir: &Path, name: &str, w: u32, h: u32, f: impl Fn(u32, u32) -> u8) -> std::path::PathBuf {
        let img = GrayImage::from_fn(w, h, |x, y| Luma([f(x, y)]));
        let path = dir.join(name);
        img.save(&path).unwrap();
        path
    }

    #[test]
    fn single_white_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_gray(dir.path(), "dot.png", 3, 3, |x, y| if (x, y) == (1, 1) { 255 } else { 0 });
        let f = load_image_field(&path, &IngestOptions::default()).unwrap();
        assert_eq!(f.field.centers(), &[Vector::<2>::new(1.0, 1.0)]);
        assert_eq!(f.field.weights(), &[1.0]);
        assert_eq!(f.field.knn_k(), Some(1));

        let neg = load_image_field(
            &path,
            &IngestOptions {
                negate: true,
                ..IngestOptions::default()
            },
        )
        .unwrap();
        assert_eq!(neg.field.centers().len(), 8);
        assert!(!neg.field.centers().contains(&Vector::<2>::new(1.0, 1.0)));
        assert!(neg.field.weights().iter().all(|w| *w == 1.0));
    }

    #[test]
    fn pgm_and_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_gray(dir.path(), "bar.pgm", 4, 2, |x, y| if y == 1 && x >= 2 { 51 } else { 0 });
        let f = load_image_field(&path, &IngestOptions::default()).unwrap();
        assert_eq!(f.field.centers(), &[Vector::<2>::new(2.0, 1.0), Vector::<2>::new(3.0, 1.0)]);
        assert_eq!(f.field.weights(), &[0.2, 0.2]);
        assert_eq!((f.width, f.height), (4, 2));
        let g = f.native_grid().unwrap();
        assert_eq!(g.counts, [4, 2]);
        assert_eq!(g.point(5), Vector::<2>::new(1.0, 1.0));
    }

    #[test]
    fn sixteen_bit_png() {
        let dir = tempfile::tempdir().unwrap();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(2, 2, |x, _| Luma([if x == 0 { 65535 } else { 13107 }]));
        let path = dir.path().join("deep.png");
        img.save(&path).unwrap();
        let f = load_image_field(&path, &IngestOptions::default()).unwrap();
        assert_eq!(f.field.weights(), &[1.0, 0.2, 1.0, 0.2]);
    }

    #[test]
    fn bright_pixel_value_bounds_own_kernel() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_gray(dir.path(), "grad.png", 8, 8, |x, y| ((x * 30 + y * 3) % 256) as u8);
        let f = load_image_field(&path, &IngestOptions::default()).unwrap();
        for (c, w) in f.field.centers().iter().zip(f.field.weights()) {
            assert!(f.field.jet(c, JetOrder::Value).unwrap().value >= *w);
        }
    }

    #[test]
    fn negation_twice_restores_weights() {
        let dir = tempfile::tempdir().unwrap();
        let original = GrayImage::from_fn(5, 4, |x, y| Luma([((x * 40 + y * 17) % 256) as u8]));
        let negated = GrayImage::from_fn(5, 4, |x, y| Luma([255 - original.get_pixel(x, y)[0]]));
        let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
        original.save(&a).unwrap();
        negated.save(&b).unwrap();
        let neg = IngestOptions {
            negate: true,
            ..IngestOptions::default()
        };
        let plain = load_image_field(&a, &IngestOptions::default()).unwrap();
        let twice = load_image_field(&b, &neg).unwrap();
        assert_eq!(plain.field.centers(), twice.field.centers());
        assert_eq!(plain.field.weights(), twice.field.weights());
    }

    #[test]
    fn empty_and_unreadable_images() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_gray(dir.path(), "black.png", 3, 3, |_, _| 0);
        assert!(matches!(
            load_image_field(&path, &IngestOptions::default()),
            Err(CliError::Core(TcfError::EmptyField))
        ));
        let junk = dir.path().join("junk.png");
        std::fs::write(&junk, b"not an image").unwrap();
        assert!(matches!(load_image_field(&junk, &IngestOptions::default()), Err(CliError::Io { .. })));
    }

    fn write_volume(dir: &Path, bytes: &[u8], sidecar: &str) -> (std::path::PathBuf, std::path::PathBuf) {
        let raw = dir.join("vol.raw");
        let side = dir.join("vol.raw.json");
        std::fs::write(&raw, bytes).unwrap();
        std::fs::write(&side, sidecar).unwrap();
        (raw, side)
    }

    #[test]
    fn volume_single_voxel() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = vec![0u8; 8];
        bytes[4] = 200;
        let (raw, side) = write_volume(dir.path(), &bytes, r#"{"dims":[2,2,2],"dtype":"uint8","spacing":[1,1,2],"order":"x-fastest"}"#);
        let v = load_volume_field(&raw, &side, &IngestOptions::default()).unwrap();
        assert_eq!(v.field.centers(), &[Vector::<3>::new(0.0, 0.0, 2.0)]);
        assert_eq!(v.field.knn_k(), Some(1));
        assert_eq!(v.native_grid().unwrap().upper, [1.0, 1.0, 2.0]);
    }

    #[test]
    fn volume_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (raw, side) = write_volume(dir.path(), &[1u8; 7], r#"{"dims":[2,2,2],"dtype":"uint8"}"#);
        assert!(matches!(load_volume_field(&raw, &side, &IngestOptions::default()), Err(CliError::Io { .. })));
        let (raw, side) = write_volume(dir.path(), &[1u8; 8], r#"{"dims":[2,2,2],"dtype":"uint16"}"#);
        assert!(matches!(load_volume_field(&raw, &side, &IngestOptions::default()), Err(CliError::Io { .. })));
    }

    #[test]
    fn volume_dtypes() {
        let dir = tempfile::tempdir().unwrap();
        let vals: Vec<u8> = [0.0f32, 2.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0].iter().flat_map(|v| v.to_le_bytes()).collect();
        let (raw, side) = write_volume(dir.path(), &vals, r#"{"dims":[2,2,2],"dtype":"float32"}"#);
        let v = load_volume_field(&raw, &side, &IngestOptions::default()).unwrap();
        assert_eq!(v.field.weights(), &[1.0, 0.25, 0.5]);
        assert_eq!(v.field.centers()[2], Vector::<3>::new(1.0, 1.0, 1.0));

        let vals: Vec<u8> = [0u16, 65535].iter().flat_map(|v| v.to_le_bytes()).collect();
        let (raw, side) = write_volume(dir.path(), &vals, r#"{"dims":[2,1,1],"dtype":"uint16"}"#);
        let v = load_volume_field(&raw, &side, &IngestOptions::default()).unwrap();
        assert_eq!(v.field.weights(), &[1.0]);
    }
}
