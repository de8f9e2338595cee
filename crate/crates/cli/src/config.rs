//! JSON documents: synthetic field descriptions and compute configuration.
//! Both are flat key-value objects.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tcf_core::synthetic::{Interval, SineSegment};
use tcf_core::{Shape, ShapeSpec, TcfError};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDoc {
    pub amplitude: f64,
    pub frequency: f64,
    pub samples: usize,
}

/// A synthetic field as written by `synth` and read by `compute`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDoc {
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<SegmentDoc>>,
    /// Kernel variance `σ²` (`S = σ²·I`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

fn not_applicable(shape: &Shape, key: &str) -> CliError {
    CliError::Core(TcfError::InvalidShape(format!("'{key}' does not apply to {}", shape.name())))
}

fn override_interval(iv: &mut Interval, doc: &FieldDoc) {
    if let Some(n) = doc.samples {
        iv.samples = n;
    }
    if let Some(a) = doc.lower {
        iv.lower = a;
    }
    if let Some(b) = doc.upper {
        iv.upper = b;
    }
}

impl FieldDoc {
    /// Shape defaults overridden by every key present in the document.
    pub fn to_spec(&self) -> Result<ShapeSpec> {
        let mut shape = Shape::from_name(&self.shape)?;
        let kind = shape.clone();
        let check = |allowed: &[&str]| -> Result<()> {
            let present = [
                ("radius", self.radius.is_some()),
                ("thickness", self.thickness.is_some()),
                ("frequency", self.frequency.is_some()),
                ("samples", self.samples.is_some()),
                ("lower", self.lower.is_some()),
                ("upper", self.upper.is_some()),
                ("segments", self.segments.is_some()),
            ];
            match present.iter().find(|(k, set)| *set && !allowed.contains(k)) {
                Some((k, _)) => Err(not_applicable(&kind, k)),
                None => Ok(()),
            }
        };
        match &mut shape {
            Shape::Ring2D { radius, thickness } => {
                check(&["radius", "thickness"])?;
                *radius = self.radius.unwrap_or(*radius);
                *thickness = self.thickness.unwrap_or(*thickness);
            }
            Shape::Sine2D { frequency, param } => {
                check(&["frequency", "samples", "lower", "upper"])?;
                *frequency = self.frequency.unwrap_or(*frequency);
                override_interval(param, self);
            }
            Shape::SineAF2D { segments, lower, upper } => {
                check(&["segments", "lower", "upper"])?;
                if let Some(segs) = &self.segments {
                    *segments = segs
                        .iter()
                        .map(|s| SineSegment {
                            amplitude: s.amplitude,
                            frequency: s.frequency,
                            samples: s.samples,
                        })
                        .collect();
                }
                *lower = self.lower.unwrap_or(*lower);
                *upper = self.upper.unwrap_or(*upper);
            }
            Shape::Ring3D { radius, theta } => {
                check(&["radius", "samples", "lower", "upper"])?;
                *radius = self.radius.unwrap_or(*radius);
                override_interval(theta, self);
            }
            Shape::Quad2D { param } | Shape::Quad3D { param } | Shape::Sine3D { param } | Shape::VShape3D { param } => {
                check(&["samples", "lower", "upper"])?;
                override_interval(param, self);
            }
        }
        Ok(ShapeSpec {
            shape,
            scale: self.scale,
        })
    }

    /// Document naming every parameter of `spec` explicitly.
    pub fn from_spec(spec: &ShapeSpec) -> Self {
        let mut doc = FieldDoc {
            shape: spec.shape.name().to_string(),
            scale: Some(spec.scale()),
            ..FieldDoc::default()
        };
        let interval = |doc: &mut FieldDoc, iv: &Interval| {
            doc.samples = Some(iv.samples);
            doc.lower = Some(iv.lower);
            doc.upper = Some(iv.upper);
        };
        match &spec.shape {
            Shape::Ring2D { radius, thickness } => {
                doc.radius = Some(*radius);
                doc.thickness = Some(*thickness);
                doc.scale = None;
            }
            Shape::Sine2D { frequency, param } => {
                doc.frequency = Some(*frequency);
                interval(&mut doc, param);
            }
            Shape::SineAF2D { segments, lower, upper } => {
                doc.segments = Some(
                    segments
                        .iter()
                        .map(|s| SegmentDoc {
                            amplitude: s.amplitude,
                            frequency: s.frequency,
                            samples: s.samples,
                        })
                        .collect(),
                );
                doc.lower = Some(*lower);
                doc.upper = Some(*upper);
            }
            Shape::Ring3D { radius, theta } => {
                doc.radius = Some(*radius);
                interval(&mut doc, theta);
            }
            Shape::Quad2D { param } | Shape::Quad3D { param } | Shape::Sine3D { param } | Shape::VShape3D { param } => {
                interval(&mut doc, param)
            }
        }
        doc
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(path, format!("bad field document: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::io(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }
}

/// Requested evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridRequest {
    /// One sample per pixel or voxel center.
    Native,
    Counts2([usize; 2]),
    Counts3([usize; 3]),
}

impl std::str::FromStr for GridRequest {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("native") {
            return Ok(GridRequest::Native);
        }
        let parts = s
            .split(':')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| CliError::Usage(format!("grid '{s}' is not 'native', 'lx:ly' or 'lx:ly:lz'")))?;
        match parts[..] {
            [x, y] => Ok(GridRequest::Counts2([x, y])),
            [x, y, z] => Ok(GridRequest::Counts3([x, y, z])),
            _ => Err(CliError::Usage(format!("grid '{s}' needs 2 or 3 sample counts"))),
        }
    }
}

/// Settings of `compute`. Every field may come from a JSON config file;
/// command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Sidecar of a raw volume; defaults to `<input>.json`.
    #[serde(default)]
    pub sidecar: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub negate: Option<bool>,
    #[serde(default, alias = "mask-threshold")]
    pub mask_threshold: Option<f64>,
    #[serde(default)]
    pub grid: Option<String>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub verify: Option<usize>,
    #[serde(default, alias = "store-accel")]
    pub store_accel: Option<bool>,
}

impl ComputeConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(path, format!("bad config: {e}")))
    }

    /// `self` with every unset field taken from `base`.
    pub fn or(self, base: ComputeConfig) -> ComputeConfig {
        ComputeConfig {
            input: self.input.or(base.input),
            sidecar: self.sidecar.or(base.sidecar),
            out: self.out.or(base.out),
            scale: self.scale.or(base.scale),
            k: self.k.or(base.k),
            negate: self.negate.or(base.negate),
            mask_threshold: self.mask_threshold.or(base.mask_threshold),
            grid: self.grid.or(base.grid),
            workers: self.workers.or(base.workers),
            verify: self.verify.or(base.verify),
            store_accel: self.store_accel.or(base.store_accel),
        }
    }

    pub fn mask_threshold(&self) -> Result<f64> {
        let t = self.mask_threshold.unwrap_or(1e-3);
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::Usage(format!("mask threshold {t} is outside (0, 1)")));
        }
        Ok(t)
    }

    /// Kernel variance, or `default` when unset.
    pub fn scale_or(&self, default: f64) -> Result<f64> {
        let s = self.scale.unwrap_or(default);
        if !(s.is_finite() && s > 0.0) {
            return Err(CliError::Usage(format!("scale {s} must be positive")));
        }
        Ok(s)
    }

    pub fn grid(&self) -> Result<Option<GridRequest>> {
        self.grid.as_deref().map(str::parse).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_doc_round_trip_for_every_shape() {
        for name in tcf_core::synthetic::SHAPE_NAMES {
            let spec = ShapeSpec::new(Shape::from_name(name).unwrap());
            let doc = FieldDoc::from_spec(&spec);
            let text = serde_json::to_string(&doc).unwrap();
            let back: FieldDoc = serde_json::from_str(&text).unwrap();
            assert_eq!(back, doc);
            let spec2 = back.to_spec().unwrap();
            assert_eq!(spec2.shape, spec.shape);
            assert_eq!(spec2.scale(), spec.scale());
        }
    }

    #[test]
    fn overrides_and_rejections() {
        let doc: FieldDoc = serde_json::from_str(r#"{"shape": "sine2d", "frequency": 1.5}"#).unwrap();
        assert_eq!(doc.to_spec().unwrap().shape, Shape::sine2d(1.5));
        let doc: FieldDoc = serde_json::from_str(r#"{"shape": "quad2d", "frequency": 1.5}"#).unwrap();
        assert!(doc.to_spec().is_err());
        assert!(serde_json::from_str::<FieldDoc>(r#"{"shape": "quad2d", "colour": 1}"#).is_err());
        let doc: FieldDoc = serde_json::from_str(r#"{"shape": "ring2d", "radius": 2.0}"#).unwrap();
        assert_eq!(
            doc.to_spec().unwrap().shape,
            Shape::Ring2D {
                radius: 2.0,
                thickness: 0.1
            }
        );
    }

    #[test]
    fn grid_requests() {
        assert_eq!("native".parse::<GridRequest>().unwrap(), GridRequest::Native);
        assert_eq!("64:32".parse::<GridRequest>().unwrap(), GridRequest::Counts2([64, 32]));
        assert_eq!("8:8:4".parse::<GridRequest>().unwrap(), GridRequest::Counts3([8, 8, 4]));
        assert!("8".parse::<GridRequest>().is_err());
        assert!("a:b".parse::<GridRequest>().is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let file: ComputeConfig = serde_json::from_str(r#"{"scale": 0.5, "k": 10, "mask_threshold": 0.01}"#).unwrap();
        let flags = ComputeConfig {
            k: Some(3),
            ..ComputeConfig::default()
        };
        let merged = flags.or(file);
        assert_eq!(merged.k, Some(3));
        assert_eq!(merged.scale, Some(0.5));
        assert_eq!(merged.mask_threshold().unwrap(), 0.01);
        let bad = ComputeConfig {
            mask_threshold: Some(1.5),
            ..ComputeConfig::default()
        };
        assert!(bad.mask_threshold().is_err());
    }
}
