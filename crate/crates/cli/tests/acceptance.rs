//! Acceptance criteria. Each one prints a single pass/fail line to stderr;
//! the test fails if any criterion fails.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use nalgebra::{Rotation2, Rotation3, Unit};
use tcf_cli::cli_main;
use tcf_cli::config::FieldDoc;
use tcf_cli::store::{read_curvature, AnyCurvature};
use tcf_core::curvature::{analyze_frame, analyze_point, grid_max_intensity};
use tcf_core::oracle::{check_point, interior_points, traced_curvature, TUBE_INTERIOR_FRACTION};
use tcf_core::synthetic::{synth_field, synth_field_2d, synth_field_3d, SHAPE_NAMES};
use tcf_core::{
    curvature_at, curvature_field, eig_sym_sorted, log_jet, CurvatureField, DynField, FieldOptions, GridSpec,
    IntensityField, JetOrder, Matrix, Shape, ShapeSpec, Status, Vector,
};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

/// Runs one criterion, prints its line and returns whether it passed.
fn criterion(id: u32, name: &str, budget_secs: Option<f64>, body: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let secs = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(v) => (v.passed, v.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panicked: {msg}"))
        }
    };
    let timing = match budget_secs {
        Some(b) => {
            if secs >= b {
                passed = false;
                detail.push_str("; over time budget");
            }
            format!("{secs:.2}s of {b:.0}s")
        }
        None => format!("{secs:.2}s"),
    };
    let line = format!(
        "criterion {id} {}: {name}: {detail} ({timing})\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    passed
}

fn shape_field_2d(shape: Shape) -> IntensityField<2> {
    synth_field_2d(&ShapeSpec::new(shape)).unwrap()
}

fn shape_field_3d(shape: Shape) -> IntensityField<3> {
    synth_field_3d(&ShapeSpec::new(shape)).unwrap()
}

fn diameter<const N: usize>(grid: &GridSpec<N>) -> f64 {
    (0..N).map(|a| (grid.upper[a] - grid.lower[a]).powi(2)).sum::<f64>().sqrt()
}

fn ring_law() -> Verdict {
    let ring = IntensityField::ring(1.0, 0.1).unwrap();
    let mut worst = 0.0f64;
    let mut worst_trace = 0.0f64;
    for rho in [0.7, 0.8, 1.0, 1.2, 1.3] {
        let x = Vector::<2>::new(rho, 0.0);
        let r = curvature_at(&ring, &x, 0.0);
        if !r.status.is_ok() {
            return verdict(false, format!("status {:?} at rho {rho}", r.status));
        }
        worst = worst.max((r.c - 1.0 / rho).abs() * rho);
        let traced = traced_curvature(&ring, &x, 1e-3, 0.0).unwrap();
        worst_trace = worst_trace.max((r.c - traced).abs() / traced);
    }
    verdict(
        worst < 0.02 && worst_trace < 0.02,
        format!("max relative error vs 1/rho {worst:.2e}, vs traced {worst_trace:.2e} (tol 2e-2)"),
    )
}

fn inner_outer_asymmetry() -> Verdict {
    let f = shape_field_2d(Shape::quad2d());
    let grid = f.default_grid(128).unwrap();
    let cf = curvature_field(&f, &grid, &FieldOptions::default()).unwrap();
    let (mut inner, mut outer) = ((0.0, 0usize), (0.0, 0usize));
    for i in 0..cf.len() {
        if !cf.status[i].is_ok() {
            continue;
        }
        let p = grid.point(i);
        let offset = p[1] - p[0] * p[0];
        if p[0].abs() > 0.5 || offset.abs() > 1.0 {
            continue;
        }
        let side = if offset > 0.0 { &mut inner } else { &mut outer };
        side.0 += cf.values[i];
        side.1 += 1;
    }
    if inner.1 == 0 || outer.1 == 0 {
        return verdict(false, "no unmasked points on one side");
    }
    let (mi, mo) = (inner.0 / inner.1 as f64, outer.0 / outer.1 as f64);
    verdict(
        mi > mo,
        format!("concave mean {mi:.4} ({} pts) vs convex mean {mo:.4} ({} pts)", inner.1, outer.1),
    )
}

fn frequency_ordering() -> Verdict {
    let max_c = |freq: f64| {
        let shape = Shape::sine2d(freq);
        let count = shape.default_grid_count();
        let f = shape_field_2d(shape);
        let grid = f.default_grid(count).unwrap();
        curvature_field(&f, &grid, &FieldOptions::default())
            .unwrap()
            .max_ok()
            .map(|(_, v)| v)
            .unwrap_or(f64::NAN)
    };
    let (hi, lo) = (max_c(1.5), max_c(1.0));
    let ratio = hi / lo;
    verdict(
        ratio >= 1.5,
        format!("max c {hi:.4} (f=1.5) / {lo:.4} (f=1.0) = {ratio:.3} (need >= 1.5)"),
    )
}

#[derive(Default)]
struct OracleTally {
    points: usize,
    worst_j: f64,
    worst_c: f64,
    failures: Vec<String>,
}

impl OracleTally {
    fn check<const N: usize>(&mut self, name: &str, field: &IntensityField<N>, grid: &GridSpec<N>) {
        let eps = 1e-5 * diameter(grid);
        let points = match interior_points(field, grid, 100, 2024) {
            Ok(p) => p,
            Err(e) => {
                self.failures.push(format!("{name}: {e}"));
                return;
            }
        };
        for x in &points {
            self.points += 1;
            match check_point(field, x, eps, 1e-3) {
                Ok(c) => {
                    self.worst_j = self.worst_j.max(c.jacobian_error);
                    self.worst_c = self.worst_c.max(c.curvature_error);
                    if c.jacobian_error >= 1e-4 || c.curvature_error >= 0.02 {
                        self.failures.push(format!("{name} at {:?}", x.as_slice()));
                    }
                }
                Err(e) => self.failures.push(format!("{name}: {e}")),
            }
        }
    }
}

fn oracle_equivalence() -> Verdict {
    let mut tally = OracleTally::default();
    for name in SHAPE_NAMES {
        let shape = Shape::from_name(name).unwrap();
        if shape.dim() == 2 {
            let f = shape_field_2d(shape);
            tally.check(name, &f, &f.default_grid(128).unwrap());
        } else {
            let f = shape_field_3d(shape);
            tally.check(name, &f, &f.default_grid(48).unwrap());
        }
    }
    verdict(
        tally.failures.is_empty() && tally.points >= 800,
        format!(
            "{} points, worst jacobian error {:.2e} (tol 1e-4), worst curvature error {:.2e} (tol 2e-2), {} failures{}",
            tally.points,
            tally.worst_j,
            tally.worst_c,
            tally.failures.len(),
            tally.failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

fn residuals_on_grid<const N: usize>(field: &IntensityField<N>, grid: &GridSpec<N>, solved: &mut usize) -> f64 {
    let floor = 1e-3 * grid_max_intensity(field, grid, 0).unwrap();
    let mut worst = 0.0f64;
    for i in 0..grid.len() {
        let Ok(p) = analyze_point(field, &grid.point(i), floor) else {
            continue;
        };
        *solved += 1;
        for (d, t) in p.directions.iter().zip(&p.log_jet.t) {
            worst = worst.max(d.reconstruction_residual(&p.frame, t) / (1.0 + t.norm()));
        }
    }
    worst
}

fn reconstruction_residual() -> Verdict {
    let (mut solved, mut worst) = (0usize, 0.0f64);
    for name in SHAPE_NAMES {
        let shape = Shape::from_name(name).unwrap();
        let w = if shape.dim() == 2 {
            let f = shape_field_2d(shape);
            residuals_on_grid(&f, &f.default_grid(64).unwrap(), &mut solved)
        } else {
            let f = shape_field_3d(shape);
            residuals_on_grid(&f, &f.default_grid(20).unwrap(), &mut solved)
        };
        worst = worst.max(w);
    }
    verdict(
        worst < 1e-8 && solved > 0,
        format!("{solved} solved points, worst relative residual {worst:.2e} (tol 1e-8)"),
    )
}

fn moved<const N: usize>(field: &IntensityField<N>, r: &Matrix<N>, s: f64) -> IntensityField<N> {
    let centers = field.centers().iter().map(|c| r * c * s).collect();
    let scale = field.scale(0).unwrap() * (s * s);
    IntensityField::gaussian_mixture(centers, field.weights().to_vec(), scale).unwrap()
}

fn weight_rescaling_error<const N: usize>(field: &IntensityField<N>, grid: &GridSpec<N>) -> Option<f64> {
    let opts = FieldOptions::default();
    let base = curvature_field(field, grid, &opts).unwrap();
    let mut worst = 0.0f64;
    for c in [1e-3, 0.37, 3.0, 250.0] {
        let other = curvature_field(&field.with_scaled_weights(c).unwrap(), grid, &opts).unwrap();
        if other.status != base.status {
            return None;
        }
        for (a, b) in other.values.iter().zip(&base.values) {
            if !(a.is_nan() && b.is_nan()) {
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
    }
    Some(worst)
}

/// Worst curvature and acceleration deviation under `x → s·R·x`.
fn motion_error<const N: usize>(field: &IntensityField<N>, points: &[Vector<N>], r: &Matrix<N>, s: f64) -> f64 {
    let g = moved(field, r, s);
    let mut worst = 0.0f64;
    for x in points {
        let base = curvature_at(field, x, 0.0);
        let after = curvature_at(&g, &(r * x * s), 0.0);
        if !after.status.is_ok() {
            return f64::INFINITY;
        }
        worst = worst
            .max((after.c - base.c / s).abs())
            .max((after.a - r * base.a / s).norm());
    }
    worst
}

fn sign_flips_exact<const N: usize>(field: &IntensityField<N>, points: &[Vector<N>]) -> bool {
    points.iter().all(|x| {
        let lj = log_jet(&field.jet(x, JetOrder::Third).unwrap(), 0.0).unwrap();
        let frame = eig_sym_sorted(&lj.h).unwrap();
        let base = analyze_frame(&lj, frame).unwrap();
        (0..N).all(|i| {
            let flipped = analyze_frame(&lj, frame.with_flipped(i)).unwrap();
            flipped.c.to_bits() == base.c.to_bits() && flipped.a == base.a
        })
    })
}

fn invariance_suite() -> Verdict {
    let f2 = shape_field_2d(Shape::quad2d());
    let g2 = f2.default_grid(64).unwrap();
    let f3 = shape_field_3d(Shape::sine3d());
    let g3 = f3.default_grid(24).unwrap();

    let weights = [
        weight_rescaling_error(&f2, &g2),
        weight_rescaling_error(&f3, &f3.default_grid(16).unwrap()),
    ];
    let weight_err = weights.iter().try_fold(0.0f64, |m, w| w.map(|w| m.max(w)));

    let p2 = interior_points(&f2, &g2, 40, 5).unwrap();
    let p3 = interior_points(&f3, &g3, 25, 5).unwrap();
    let mut rotation_err = 0.0f64;
    for angle in [0.3, 1.7, 4.0] {
        rotation_err = rotation_err.max(motion_error(&f2, &p2, Rotation2::new(angle).matrix(), 1.0));
    }
    for (axis, angle) in [([1.0, 0.0, 0.0], 0.9), ([0.3, -1.0, 0.4], 2.2), ([1.0, 1.0, 1.0], 5.1)] {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vector::<3>::from(axis)), angle);
        rotation_err = rotation_err.max(motion_error(&f3, &p3, r.matrix(), 1.0));
    }
    let mut scaling_err = 0.0f64;
    for s in [0.25, 0.5, 2.0, 3.7] {
        scaling_err = scaling_err
            .max(motion_error(&f2, &p2, &Matrix::<2>::identity(), s))
            .max(motion_error(&f3, &p3, &Matrix::<3>::identity(), s));
    }
    let flips = sign_flips_exact(&f2, &p2) && sign_flips_exact(&f3, &p3);

    let passed = weight_err.is_some_and(|w| w <= 1e-12) && rotation_err < 1e-6 && scaling_err < 1e-6 && flips;
    verdict(
        passed,
        format!(
            "weights {} (tol 1e-12), rotation {rotation_err:.2e} (tol 1e-6), scaling {scaling_err:.2e} (tol 1e-6), sign flips {}",
            weight_err.map_or("status mismatch".to_string(), |w| format!("{w:.2e}")),
            if flips { "exact" } else { "changed c" }
        ),
    )
}

fn parity_3d() -> Verdict {
    let ring = shape_field_3d(Shape::ring3d());
    let ring_grid = ring.default_grid(48).unwrap();
    let mut worst = 0.0f64;
    let points = interior_points(&ring, &ring_grid, 100, 7).unwrap();
    for x in &points {
        let c = curvature_at(&ring, x, 0.0).c;
        let traced = traced_curvature(&ring, x, 1e-3, 0.0).unwrap();
        worst = worst.max((c - traced).abs() / traced);
    }

    let vshape = shape_field_3d(Shape::vshape3d());
    let grid = vshape.default_grid(48).unwrap();
    let cf = curvature_field(&vshape, &grid, &FieldOptions::default()).unwrap();
    let intensity: Vec<f64> = (0..grid.len()).map(|i| vshape.value(&grid.point(i)).unwrap_or(0.0)).collect();
    let p_max = intensity.iter().copied().fold(0.0, f64::max);
    let argmax = (0..grid.len())
        .filter(|&i| cf.status[i].is_ok() && intensity[i] >= TUBE_INTERIOR_FRACTION * p_max)
        .max_by(|&a, &b| cf.values[a].total_cmp(&cf.values[b]));
    let Some(i) = argmax else {
        return verdict(false, "no interior V-shape points");
    };
    // The apex region is the ball of one kernel standard deviation around
    // the vertex; the maximum may sit up to two voxels outside it.
    let voxel = (0..3).map(|a| grid.spacing(a)).fold(0.0, f64::max);
    let distance = grid.point(i).norm();
    let limit = vshape.blur_sigma() + 2.0 * voxel;
    verdict(
        worst < 0.05 && distance <= limit,
        format!(
            "ring3d {} points worst traced error {worst:.2e} (tol 5e-2); vshape max c {:.3} at distance {distance:.3} from apex (limit {limit:.3})",
            points.len(),
            cf.values[i]
        ),
    )
}

fn determinism() -> Verdict {
    let ring = IntensityField::ring(1.0, 0.1).unwrap();
    let grid = ring.default_grid(128).unwrap();
    let run = |workers| {
        let opts = FieldOptions {
            workers,
            ..FieldOptions::default()
        };
        let f: CurvatureField<2> = curvature_field(&ring, &grid, &opts).unwrap();
        (f.value_bytes(), f.status)
    };
    let one = run(1);
    let identical = [2, 0].into_iter().all(|w| run(w) == one);
    verdict(identical, format!("workers 1, 2, max: {}", if identical { "identical bytes" } else { "differ" }))
}

fn run_cli(args: &[&str]) -> i32 {
    let mut argv = vec!["tcf"];
    argv.extend_from_slice(args);
    cli_main(argv)
}

fn interior_stats<const N: usize>(field: &IntensityField<N>, c: &CurvatureField<N>) -> (usize, usize, usize) {
    let p: Vec<f64> = (0..c.grid.len()).map(|i| field.value(&c.grid.point(i)).unwrap_or(0.0)).collect();
    let p_max = p.iter().copied().fold(0.0, f64::max);
    let interior: Vec<usize> = (0..p.len()).filter(|&i| p[i] >= TUBE_INTERIOR_FRACTION * p_max).collect();
    let ok = interior.iter().filter(|&&i| c.status[i].is_ok()).count();
    (interior.len(), ok, c.count(Status::NonFinite))
}

fn pipeline_shape(dir: &Path, name: &str) -> Result<(f64, usize), String> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let doc = dir.join(format!("{name}.json"));
    let out = dir.join(if name.ends_with("3d") { format!("{name}.raw") } else { format!("{name}.pfm") });
    let png = dir.join(format!("{name}.png"));
    if run_cli(&["synth", "--shape", name, "--out", &s(&doc)]) != 0 {
        return Err("synth failed".into());
    }
    if run_cli(&["compute", "--input", &s(&doc), "--out", &s(&out)]) != 0 {
        return Err("compute failed".into());
    }
    if run_cli(&["render", "--input", &s(&out), "--equalize", "--out", &s(&png)]) != 0 {
        return Err("render failed".into());
    }
    image::open(&png).map_err(|e| format!("unreadable png: {e}"))?;
    let field = synth_field(&FieldDoc::read(&doc).unwrap().to_spec().unwrap()).unwrap();
    let (interior, ok, non_finite) = match (field, read_curvature(&out).map_err(|e| e.to_string())?) {
        (DynField::D2(f), AnyCurvature::D2(c)) => interior_stats(&f, &c),
        (DynField::D3(f), AnyCurvature::D3(c)) => interior_stats(&f, &c),
        _ => return Err("dimension mismatch".into()),
    };
    if interior == 0 {
        return Err("empty tube interior".into());
    }
    Ok((ok as f64 / interior as f64, non_finite))
}

fn pipeline_smoke() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut passed = true;
    let mut parts = Vec::new();
    for name in SHAPE_NAMES {
        match pipeline_shape(dir.path(), name) {
            Ok((fraction, non_finite)) => {
                passed &= fraction > 0.3 && non_finite == 0;
                parts.push(format!("{name} {:.0}% ok/{non_finite} nonfinite", 100.0 * fraction));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("{name} {e}"));
            }
        }
    }
    verdict(passed, format!("{} (need > 30% ok, 0 nonfinite)", parts.join(", ")))
}

#[test]
fn acceptance_criteria() {
    let results = [
        criterion(1, "ring law", Some(1.0), ring_law),
        criterion(2, "inner/outer asymmetry", Some(5.0), inner_outer_asymmetry),
        criterion(3, "frequency ordering", Some(10.0), frequency_ordering),
        criterion(4, "oracle equivalence", Some(60.0), oracle_equivalence),
        criterion(5, "reconstruction residual", None, reconstruction_residual),
        criterion(6, "invariance suite", None, invariance_suite),
        criterion(7, "3-D parity", Some(15.0), parity_3d),
        criterion(8, "determinism", None, determinism),
        criterion(9, "figure pipeline", None, pipeline_smoke),
    ];
    let failed: Vec<usize> = (0..results.len()).filter(|&i| !results[i]).map(|i| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
