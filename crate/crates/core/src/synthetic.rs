//! Artificial tube fields: kernels placed along parametric curves, and the
//! closed-form blurry ring.

use std::f64::consts::{PI, TAU};

use crate::error::{Result, TcfError};
use crate::grid::sample;
use crate::kernel::{DynField, IntensityField};
use crate::Vector;

/// `l` evenly spaced values on `[a, b]`, both endpoints included.
pub fn make_grid(l: usize, a: f64, b: f64) -> Result<Vec<f64>> {
    if l < 2 {
        return Err(TcfError::InvalidGrid(format!("need at least 2 samples, got {l}")));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(TcfError::InvalidGrid(format!("interval [{a}, {b}] is empty")));
    }
    Ok((0..l).map(|i| sample(a, b, l, i)).collect())
}

/// Sampling of the curve parameter: `samples` points on `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub samples: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const fn new(samples: usize, lower: f64, upper: f64) -> Self {
        Self { samples, lower, upper }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        make_grid(self.samples, self.lower, self.upper)
    }
}

/// A run of consecutive samples of the amplitude/frequency sine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineSegment {
    pub amplitude: f64,
    pub frequency: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `exp(−(‖x‖ − r)²/m)`.
    Ring2D { radius: f64, thickness: f64 },
    /// Kernels at `(m, m²)`.
    Quad2D { param: Interval },
    /// Kernels at `(m, sin(f m))`.
    Sine2D { frequency: f64, param: Interval },
    /// Kernels at `(m, A sin(f m))` on one grid over `[lower, upper]`; the
    /// segments take consecutive samples in order and their counts add up to
    /// the total.
    SineAF2D {
        segments: Vec<SineSegment>,
        lower: f64,
        upper: f64,
    },
    /// Kernels at `(r sin θ, r cos θ, sin r)`.
    Ring3D { radius: f64, theta: Interval },
    /// Kernels at `(m, m, m²)`.
    Quad3D { param: Interval },
    /// Kernels at `(m, m, sin m)`.
    Sine3D { param: Interval },
    /// Kernels at `(m, m, |m|)`.
    VShape3D { param: Interval },
}

pub const SHAPE_NAMES: [&str; 8] = ["ring2d", "quad2d", "sine2d", "sineaf2d", "ring3d", "quad3d", "sine3d", "vshape3d"];

impl Shape {
    pub fn ring2d() -> Self {
        Shape::Ring2D {
            radius: 1.0,
            thickness: 0.1,
        }
    }

    pub fn quad2d() -> Self {
        Shape::Quad2D {
            param: Interval::new(20, -1.5, 1.5),
        }
    }

    pub fn sine2d(frequency: f64) -> Self {
        Shape::Sine2D {
            frequency,
            param: Interval::new(50, -PI, PI),
        }
    }

    pub fn sineaf2d() -> Self {
        Shape::SineAF2D {
            segments: vec![
                SineSegment {
                    amplitude: 1.0,
                    frequency: 2.0,
                    samples: 25,
                },
                SineSegment {
                    amplitude: 3.0,
                    frequency: 1.0,
                    samples: 25,
                },
            ],
            lower: -TAU,
            upper: TAU,
        }
    }

    pub fn ring3d() -> Self {
        Shape::Ring3D {
            radius: 2.0,
            theta: Interval::new(40, 0.0, TAU),
        }
    }

    pub fn quad3d() -> Self {
        Shape::Quad3D {
            param: Interval::new(30, -1.25, 1.25),
        }
    }

    pub fn sine3d() -> Self {
        Shape::Sine3D {
            param: Interval::new(40, -PI, PI),
        }
    }

    pub fn vshape3d() -> Self {
        Shape::VShape3D {
            param: Interval::new(20, -1.0, 1.0),
        }
    }

    /// Shape with default parameters from its lowercase name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "ring2d" => Self::ring2d(),
            "quad2d" => Self::quad2d(),
            "sine2d" => Self::sine2d(1.0),
            "sineaf2d" => Self::sineaf2d(),
            "ring3d" => Self::ring3d(),
            "quad3d" => Self::quad3d(),
            "sine3d" => Self::sine3d(),
            "vshape3d" => Self::vshape3d(),
            other => return Err(TcfError::InvalidShape(format!("unknown shape '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Ring2D { .. } => "ring2d",
            Shape::Quad2D { .. } => "quad2d",
            Shape::Sine2D { .. } => "sine2d",
            Shape::SineAF2D { .. } => "sineaf2d",
            Shape::Ring3D { .. } => "ring3d",
            Shape::Quad3D { .. } => "quad3d",
            Shape::Sine3D { .. } => "sine3d",
            Shape::VShape3D { .. } => "vshape3d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::Ring2D { .. } | Shape::Quad2D { .. } | Shape::Sine2D { .. } | Shape::SineAF2D { .. } => 2,
            _ => 3,
        }
    }

    /// Default isotropic kernel variance `σ²`.
    pub fn default_scale(&self) -> f64 {
        if self.dim() == 2 {
            2.0
        } else {
            1.0
        }
    }

    /// Default samples per axis of the evaluation grid.
    pub fn default_grid_count(&self) -> usize {
        if self.dim() == 2 {
            256
        } else {
            96
        }
    }

    /// Kernel centers of a 2-D mixture shape.
    pub fn centers_2d(&self) -> Result<Vec<Vector<2>>> {
        let v = |x: f64, y: f64| Vector::<2>::new(x, y);
        match self {
            Shape::Quad2D { param } => Ok(param.values()?.into_iter().map(|m| v(m, m * m)).collect()),
            Shape::Sine2D { frequency, param } => {
                finite("frequency", *frequency)?;
                Ok(param.values()?.into_iter().map(|m| v(m, (frequency * m).sin())).collect())
            }
            Shape::SineAF2D { segments, lower, upper } => {
                let total: usize = segments.iter().map(|s| s.samples).sum();
                let ms = make_grid(total, *lower, *upper)?;
                let mut out = Vec::with_capacity(total);
                let mut start = 0;
                for s in segments {
                    finite("amplitude", s.amplitude)?;
                    finite("frequency", s.frequency)?;
                    for &m in &ms[start..start + s.samples] {
                        out.push(v(m, s.amplitude * (s.frequency * m).sin()));
                    }
                    start += s.samples;
                }
                Ok(out)
            }
            other => Err(TcfError::InvalidShape(format!("{} has no 2-D kernel centers", other.name()))),
        }
    }

    /// Kernel centers of a 3-D mixture shape.
    pub fn centers_3d(&self) -> Result<Vec<Vector<3>>> {
        let v = |x: f64, y: f64, z: f64| Vector::<3>::new(x, y, z);
        match self {
            Shape::Ring3D { radius, theta } => {
                positive("radius", *radius)?;
                let r = *radius;
                Ok(theta.values()?.into_iter().map(|t| v(r * t.sin(), r * t.cos(), r.sin())).collect())
            }
            Shape::Quad3D { param } => Ok(param.values()?.into_iter().map(|m| v(m, m, m * m)).collect()),
            Shape::Sine3D { param } => Ok(param.values()?.into_iter().map(|m| v(m, m, m.sin())).collect()),
            Shape::VShape3D { param } => Ok(param.values()?.into_iter().map(|m| v(m, m, m.abs())).collect()),
            other => Err(TcfError::InvalidShape(format!("{} has no 3-D kernel centers", other.name()))),
        }
    }
}

fn finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(TcfError::InvalidShape(format!("{what} must be finite, got {v}")))
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(TcfError::InvalidShape(format!("{what} must be positive, got {v}")))
    }
}

/// A shape and its kernel variance (`S = σ²·I`); `None` takes the default.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub shape: Shape,
    pub scale: Option<f64>,
}

impl ShapeSpec {
    pub fn new(shape: Shape) -> Self {
        Self { shape, scale: None }
    }

    pub fn with_scale(shape: Shape, scale: f64) -> Self {
        Self {
            shape,
            scale: Some(scale),
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale.unwrap_or_else(|| self.shape.default_scale())
    }

    fn checked_scale(&self) -> Result<f64> {
        positive("scale", self.scale())?;
        Ok(self.scale())
    }
}

/// Builds a 2-D shape field.
pub fn synth_field_2d(spec: &ShapeSpec) -> Result<IntensityField<2>> {
    match &spec.shape {
        Shape::Ring2D { radius, thickness } => IntensityField::ring(*radius, *thickness),
        shape => {
            let centers = shape.centers_2d()?;
            let n = centers.len();
            IntensityField::isotropic(centers, vec![1.0; n], spec.checked_scale()?)
        }
    }
}

/// Builds a 3-D shape field.
pub fn synth_field_3d(spec: &ShapeSpec) -> Result<IntensityField<3>> {
    let centers = spec.shape.centers_3d()?;
    let n = centers.len();
    IntensityField::isotropic(centers, vec![1.0; n], spec.checked_scale()?)
}

pub fn synth_field(spec: &ShapeSpec) -> Result<DynField> {
    match spec.shape.dim() {
        2 => synth_field_2d(spec).map(DynField::D2),
        _ => synth_field_3d(spec).map(DynField::D3),
    }
}
