//! The `tcf` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use tcf_core::oracle::{check_point, interior_points};
use tcf_core::synthetic::{synth_field, SHAPE_NAMES};
use tcf_core::{curvature_field, DynField, FieldOptions, GridSpec, IntensityField, ShapeSpec};

use crate::config::{ComputeConfig, FieldDoc, GridRequest, SegmentDoc};
use crate::error::{CliError, Result};
use crate::ingest::{load_image_field, load_volume_field, IngestOptions};
use crate::render::{parse_axis, render_png, Projection};
use crate::store::{read_curvature, write_curvature, AnyCurvature};

#[derive(Debug, Parser)]
#[command(name = "tcf", about = "Curvature of tubular structures in images and volumes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic field description.
    Synth(SynthArgs),
    /// Compute a curvature raster.
    Compute(ComputeArgs),
    /// Render a curvature raster to PNG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// One of ring2d, quad2d, sine2d, sineaf2d, ring3d, quad3d, sine3d, vshape3d.
    #[arg(long)]
    shape: String,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    thickness: Option<f64>,
    #[arg(long)]
    frequency: Option<f64>,
    /// Number of kernel centers along the skeleton parameter.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<f64>,
    /// `amplitude:frequency:samples`, repeated once per sineaf2d segment.
    #[arg(long = "segment")]
    segments: Vec<String>,
    /// Kernel variance σ².
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ComputeArgs {
    /// PNG or PGM image, raw volume, or field JSON from `synth`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON file with any of these settings; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Volume sidecar, default `<input>.json`.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    negate: bool,
    #[arg(long)]
    mask_threshold: Option<f64>,
    /// `native`, `lx:ly` or `lx:ly:lz`.
    #[arg(long)]
    grid: Option<String>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Spot-check this many random interior points against the oracles.
    #[arg(long)]
    verify: Option<usize>,
    /// Also write acceleration vectors to `<out>.accel`.
    #[arg(long)]
    store_accel: bool,
    /// `.pfm` for 2-D fields, raw `f32` for 3-D.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    equalize: bool,
    /// Volume slice `axis=index`.
    #[arg(long, conflicts_with = "mip")]
    slice: Option<String>,
    /// Volume maximum projection axis (default z).
    #[arg(long)]
    mip: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Runs the command line and returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Compute(a) => compute(a),
        Command::Render(a) => render(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("tcf: {e}");
            if matches!(e, CliError::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

fn parse_segment(s: &str) -> Result<SegmentDoc> {
    let bad = || CliError::Usage(format!("segment '{s}' is not 'amplitude:frequency:samples'"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a, f, n] = parts[..] else {
        return Err(bad());
    };
    Ok(SegmentDoc {
        amplitude: a.trim().parse().map_err(|_| bad())?,
        frequency: f.trim().parse().map_err(|_| bad())?,
        samples: n.trim().parse().map_err(|_| bad())?,
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    let shape = a.shape.to_ascii_lowercase();
    if !SHAPE_NAMES.contains(&shape.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown shape '{}', expected one of {}",
            a.shape,
            SHAPE_NAMES.join(", ")
        )));
    }
    let segments = if a.segments.is_empty() {
        None
    } else {
        Some(a.segments.iter().map(|s| parse_segment(s)).collect::<Result<_>>()?)
    };
    let doc = FieldDoc {
        shape,
        radius: a.radius,
        thickness: a.thickness,
        frequency: a.frequency,
        samples: a.samples,
        lower: a.lower,
        upper: a.upper,
        segments,
        scale: a.scale,
    };
    let spec = doc.to_spec()?;
    // Building the field validates every parameter.
    synth_field(&spec)?;
    FieldDoc::from_spec(&spec).write(&a.out)
}

fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// A field with the grid it is evaluated on.
enum Prepared {
    D2(IntensityField<2>, GridSpec<2>),
    D3(IntensityField<3>, GridSpec<3>),
}

/// The evaluation grid: requested counts span the native grid, or the
/// padded kernel bounding box of a synthetic field.
fn pick_grid<const N: usize>(
    request: Option<GridRequest>,
    field: &IntensityField<N>,
    native: Option<GridSpec<N>>,
    default: usize,
) -> Result<GridSpec<N>> {
    let counts: Option<[usize; N]> = match request {
        Some(GridRequest::Counts2(c)) => Some(c[..].try_into().map_err(|_| wrong_grid(N))?),
        Some(GridRequest::Counts3(c)) => Some(c[..].try_into().map_err(|_| wrong_grid(N))?),
        Some(GridRequest::Native) if native.is_none() => {
            return Err(CliError::Usage("synthetic fields have no native grid".into()))
        }
        _ => None,
    };
    let base = match native {
        Some(n) => n,
        None => field.default_grid(default.max(2))?,
    };
    match counts {
        Some(c) => Ok(GridSpec::new(c, base.lower, base.upper)?),
        None => Ok(base),
    }
}

fn wrong_grid(n: usize) -> CliError {
    CliError::Usage(format!("a {n}-D field needs a {n}-D grid"))
}

fn prepare(cfg: &ComputeConfig, input: &Path) -> Result<Prepared> {
    let request = cfg.grid()?;
    let ingest = IngestOptions {
        scale: cfg.scale,
        k: cfg.k,
        negate: cfg.negate.unwrap_or(false),
    };
    if has_ext(input, &["png", "pgm"]) {
        let img = load_image_field(input, &ingest)?;
        let native = img.native_grid()?;
        let grid = pick_grid(request, &img.field, Some(native), 0)?;
        Ok(Prepared::D2(img.field, grid))
    } else if has_ext(input, &["raw"]) {
        let sidecar = cfg.sidecar.clone().unwrap_or_else(|| crate::store::sidecar_path(input));
        let vol = load_volume_field(input, &sidecar, &ingest)?;
        let native = vol.native_grid()?;
        let grid = pick_grid(request, &vol.field, Some(native), 0)?;
        Ok(Prepared::D3(vol.field, grid))
    } else if has_ext(input, &["json"]) {
        if ingest.negate {
            return Err(CliError::Usage("--negate applies to images and volumes".into()));
        }
        let mut spec: ShapeSpec = FieldDoc::read(input)?.to_spec()?;
        if let Some(s) = cfg.scale {
            if matches!(spec.shape, tcf_core::Shape::Ring2D { .. }) {
                return Err(CliError::Usage("the analytic ring has no kernel scale".into()));
            }
            spec.scale = Some(cfg.scale_or(s)?);
        }
        let count = spec.shape.default_grid_count();
        match synth_field(&spec)? {
            DynField::D2(f) => {
                let f = match cfg.k {
                    Some(k) => f.with_knn(k)?,
                    None => f,
                };
                let grid = pick_grid(request, &f, None, count)?;
                Ok(Prepared::D2(f, grid))
            }
            DynField::D3(f) => {
                let f = match cfg.k {
                    Some(k) => f.with_knn(k)?,
                    None => f,
                };
                let grid = pick_grid(request, &f, None, count)?;
                Ok(Prepared::D3(f, grid))
            }
        }
    } else {
        Err(CliError::Usage(format!(
            "cannot tell the input type of {}; use .png, .pgm, .raw or .json",
            input.display()
        )))
    }
}

fn write_accel<const N: usize>(accel: &[tcf_core::Vector<N>], path: &Path) -> Result<()> {
    let bytes: Vec<u8> = accel
        .iter()
        .flat_map(|a| a.iter().map(|&x| x as f32).collect::<Vec<_>>())
        .flat_map(f32::to_le_bytes)
        .collect();
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn verify<const N: usize>(field: &IntensityField<N>, grid: &GridSpec<N>, n: usize) -> Result<()> {
    let diameter = (0..N)
        .map(|a| (grid.upper[a] - grid.lower[a]).powi(2))
        .sum::<f64>()
        .sqrt();
    let points = interior_points(field, grid, n, 0)?;
    let (mut worst_j, mut worst_c, mut failed) = (0.0f64, 0.0f64, 0usize);
    for x in &points {
        match check_point(field, x, 1e-5 * diameter, 1e-3) {
            Ok(c) => {
                worst_j = worst_j.max(c.jacobian_error);
                worst_c = worst_c.max(c.curvature_error);
            }
            Err(_) => failed += 1,
        }
    }
    eprintln!(
        "verify: {} points, worst jacobian error {worst_j:.3e}, worst curvature error {worst_c:.3e}, {failed} oracle failures",
        points.len()
    );
    Ok(())
}

fn summarize(out: &Path, field: &AnyCurvature) {
    let status = field.status();
    let ok = status.iter().filter(|s| s.is_ok()).count();
    let _ = writeln!(
        std::io::stdout(),
        "{}: {} points, {ok} ok, {} not ok",
        out.display(),
        status.len(),
        status.len() - ok
    );
}

fn compute(a: ComputeArgs) -> Result<()> {
    let flags = ComputeConfig {
        input: a.input,
        sidecar: a.sidecar,
        out: a.out,
        scale: a.scale,
        k: a.k,
        negate: a.negate.then_some(true),
        mask_threshold: a.mask_threshold,
        grid: a.grid,
        workers: a.workers,
        verify: a.verify,
        store_accel: a.store_accel.then_some(true),
    };
    let cfg = match &a.config {
        Some(path) => flags.or(ComputeConfig::read(path)?),
        None => flags,
    };
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| CliError::Usage("compute needs --input".into()))?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("compute needs --out".into()))?;
    if let Some(s) = cfg.scale {
        cfg.scale_or(s)?;
    }
    let opts = FieldOptions {
        mask_threshold: cfg.mask_threshold()?,
        store_accel: cfg.store_accel.unwrap_or(false),
        workers: cfg.workers.unwrap_or(0),
    };
    let prepared = prepare(&cfg, &input)?;
    let pfm_out = has_ext(&out, &["pfm"]);
    let mut accel_path = out.clone().into_os_string();
    accel_path.push(".accel");
    let accel_path = PathBuf::from(accel_path);
    let result = match prepared {
        Prepared::D2(field, grid) => {
            if !pfm_out {
                return Err(CliError::Usage("2-D curvature is written as .pfm".into()));
            }
            let c = curvature_field(&field, &grid, &opts)?;
            if let Some(acc) = &c.accel {
                write_accel(acc, &accel_path)?;
            }
            if let Some(n) = cfg.verify {
                verify(&field, &grid, n)?;
            }
            AnyCurvature::D2(c)
        }
        Prepared::D3(field, grid) => {
            if pfm_out {
                return Err(CliError::Usage("3-D curvature is written as raw f32, not .pfm".into()));
            }
            let c = curvature_field(&field, &grid, &opts)?;
            if let Some(acc) = &c.accel {
                write_accel(acc, &accel_path)?;
            }
            if let Some(n) = cfg.verify {
                verify(&field, &grid, n)?;
            }
            AnyCurvature::D3(c)
        }
    };
    write_curvature(&result, &out)?;
    summarize(&out, &result);
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let field = read_curvature(&a.input)?;
    let projection = match (&a.slice, &a.mip) {
        (Some(s), _) => Projection::parse_slice(s)?,
        (None, Some(axis)) => Projection::Mip { axis: parse_axis(axis)? },
        (None, None) => Projection::default(),
    };
    if field.dim() == 2 && (a.slice.is_some() || a.mip.is_some()) {
        return Err(CliError::Usage("--slice and --mip apply to 3-D fields".into()));
    }
    render_png(&field, &a.out, a.equalize, projection)
}
