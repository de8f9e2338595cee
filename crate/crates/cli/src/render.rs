//! 8-bit grayscale renders of curvature fields.

use std::path::Path;

use image::GrayImage;
use tcf_core::{CurvatureField, Status};

use crate::error::{CliError, Result};
use crate::store::AnyCurvature;

/// How a volume is flattened to an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// The plane `axis = index`.
    Slice { axis: usize, index: usize },
    /// Maximum over `axis`, taken over `Ok` points only.
    Mip { axis: usize },
}

impl Default for Projection {
    fn default() -> Self {
        Projection::Mip { axis: 2 }
    }
}

pub fn parse_axis(s: &str) -> Result<usize> {
    match s.trim().to_ascii_lowercase().as_str() {
        "x" | "0" => Ok(0),
        "y" | "1" => Ok(1),
        "z" | "2" => Ok(2),
        _ => Err(CliError::Usage(format!("unknown axis '{s}'"))),
    }
}

impl Projection {
    /// `axis=idx`, e.g. `z=40`.
    pub fn parse_slice(s: &str) -> Result<Self> {
        let (axis, index) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("slice '{s}' is not 'axis=index'")))?;
        let index = index
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad slice index in '{s}'")))?;
        Ok(Projection::Slice {
            axis: parse_axis(axis)?,
            index,
        })
    }
}

/// A 2-D raster of optional values, row `r` at image row `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub values: Vec<Option<f64>>,
}

fn ok_value(v: f64, s: Status) -> Option<f64> {
    (s.is_ok() && v.is_finite()).then_some(v)
}

pub fn plane_2d(field: &CurvatureField<2>) -> Plane {
    let [width, height] = field.grid.counts;
    Plane {
        width,
        height,
        values: field.values.iter().zip(&field.status).map(|(v, s)| ok_value(*v, *s)).collect(),
    }
}

pub fn plane_3d(field: &CurvatureField<3>, projection: Projection) -> Result<Plane> {
    let counts = field.grid.counts;
    let axis = match projection {
        Projection::Slice { axis, .. } | Projection::Mip { axis } => axis,
    };
    if axis > 2 {
        return Err(CliError::Usage(format!("axis {axis} out of range")));
    }
    if let Projection::Slice { index, .. } = projection {
        if index >= counts[axis] {
            return Err(CliError::Usage(format!(
                "slice index {index} outside 0..{} along axis {axis}",
                counts[axis]
            )));
        }
    }
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (width, height) = (counts[u], counts[v]);
    let at = |a: usize, b: usize, w: usize| {
        let mut idx = [0usize; 3];
        idx[u] = a;
        idx[v] = b;
        idx[axis] = w;
        let i = field.grid.ravel(idx);
        ok_value(field.values[i], field.status[i])
    };
    let mut values = Vec::with_capacity(width * height);
    for b in 0..height {
        for a in 0..width {
            values.push(match projection {
                Projection::Slice { index, .. } => at(a, b, index),
                Projection::Mip { .. } => (0..counts[axis]).filter_map(|w| at(a, b, w)).reduce(f64::max),
            });
        }
    }
    Ok(Plane { width, height, values })
}

fn min_max_levels(values: &[Option<f64>]) -> Vec<u8> {
    let (lo, hi) = values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    values
        .iter()
        .map(|v| match v {
            None => 0,
            Some(_) if hi <= lo => 128,
            Some(v) => ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8,
        })
        .collect()
}

/// Rank-based equalization: a value below `m` of the `n` rendered values
/// gets level `⌊256·m/n⌋`. Equal values share a level.
fn equalized_levels(values: &[Option<f64>]) -> Vec<u8> {
    let mut sorted: Vec<f64> = values.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    values
        .iter()
        .map(|v| match v {
            None => 0,
            Some(v) => {
                let below = sorted.partition_point(|s| s < v);
                (256 * below / n).min(255) as u8
            }
        })
        .collect()
}

/// Gray levels of a plane.
pub fn levels(plane: &Plane, equalize: bool) -> Result<Vec<u8>> {
    if plane.values.iter().all(Option::is_none) {
        return Err(CliError::EmptyRender);
    }
    Ok(if equalize {
        equalized_levels(&plane.values)
    } else {
        min_max_levels(&plane.values)
    })
}

/// The image of a plane; grid row `r` is image row `r`.
pub fn render_plane(plane: &Plane, equalize: bool) -> Result<GrayImage> {
    let px = levels(plane, equalize)?;
    GrayImage::from_raw(plane.width as u32, plane.height as u32, px)
        .ok_or_else(|| CliError::Usage("plane too large to render".into()))
}

pub fn render_png(field: &AnyCurvature, path: &Path, equalize: bool, projection: Projection) -> Result<()> {
    let plane = match field {
        AnyCurvature::D2(f) => plane_2d(f),
        AnyCurvature::D3(f) => plane_3d(f, projection)?,
    };
    render_plane(&plane, equalize)?
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::io(path, e))
}
