//! Brute-force checks that share nothing with the linear-system path except
//! the Hessian: finite differences of the tangent eigenvector, and curvature
//! of parallel curves traced by numerical integration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curvature::{analyze_point, grid_max_intensity};
use crate::eigen::eig_sym_sorted;
use crate::error::{Result, TcfError};
use crate::grid::GridSpec;
use crate::kernel::{IntensityField, JetOrder};
use crate::logjet::log_jet;
use crate::{Matrix, Vector};

/// Smallest alignment between neighbouring tangents before the oracle gives up.
pub const ALIGNMENT_LIMIT: f64 = 0.5;

/// Tangent eigenvector `q₁` of the log-Hessian at `x`, from second
/// derivatives only.
pub fn tangent_at<const N: usize>(field: &IntensityField<N>, x: &Vector<N>, mask_floor: f64) -> Result<Vector<N>> {
    let jet = field.jet(x, JetOrder::Hessian)?;
    let frame = eig_sym_sorted(&log_jet(&jet, mask_floor)?.h)?;
    if frame.is_degenerate() {
        return Err(TcfError::DegenerateFrame { gap: frame.gap });
    }
    Ok(frame.tangent())
}

fn aligned<const N: usize>(v: Vector<N>, reference: &Vector<N>) -> Result<Vector<N>> {
    let d = v.dot(reference);
    if d.abs() < ALIGNMENT_LIMIT {
        return Err(TcfError::OracleUnstable(format!(
            "tangent turned by more than 60 degrees (|dot| = {:.3})",
            d.abs()
        )));
    }
    Ok(if d < 0.0 { -v } else { v })
}

/// Central differences of the sign-aligned tangent: column `i` approximates
/// `∂q₁/∂xᵢ`.
pub fn fd_eigvec_jacobian<const N: usize>(field: &IntensityField<N>, x: &Vector<N>, eps: f64) -> Result<Matrix<N>> {
    let q0 = tangent_at(field, x, 0.0).map_err(unstable)?;
    let mut j = Matrix::<N>::zeros();
    for i in 0..N {
        let mut e = Vector::<N>::zeros();
        e[i] = eps;
        let plus = aligned(tangent_at(field, &(x + e), 0.0).map_err(unstable)?, &q0)?;
        let minus = aligned(tangent_at(field, &(x - e), 0.0).map_err(unstable)?, &q0)?;
        j.set_column(i, &((plus - minus) / (2.0 * eps)));
    }
    Ok(j)
}

fn unstable(e: TcfError) -> TcfError {
    match e {
        TcfError::OracleUnstable(_) => e,
        other => TcfError::OracleUnstable(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Arc-length step.
    pub step: f64,
    pub steps: usize,
    pub mask_floor: f64,
    /// Start against the tangent's sign convention instead of along it.
    pub reverse: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            steps: 100,
            mask_floor: 0.0,
            reverse: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracedCurve<const N: usize> {
    pub points: Vec<Vector<N>>,
    pub step: f64,
    /// The trajectory left the computable region before `steps` were taken.
    pub truncated: bool,
}

/// Integrates `x' = q₁(x)` with classical Runge–Kutta, keeping the tangent's
/// sign continuous from stage to stage.
pub fn trace_parallel_curve<const N: usize>(
    field: &IntensityField<N>,
    x0: &Vector<N>,
    opts: &TraceOptions,
) -> Result<TracedCurve<N>> {
    let h = opts.step;
    if !(h.is_finite() && h > 0.0) {
        return Err(TcfError::OracleUnstable(format!("step {h} is not positive")));
    }
    let q = |x: &Vector<N>| tangent_at(field, x, opts.mask_floor);
    let mut dir = q(x0).map_err(unstable)?;
    if opts.reverse {
        dir = -dir;
    }
    let mut points = vec![*x0];
    let mut x = *x0;
    let mut truncated = false;
    for _ in 0..opts.steps {
        let step = || -> Result<(Vector<N>, Vector<N>)> {
            let k1 = aligned(q(&x)?, &dir)?;
            let k2 = aligned(q(&(x + k1 * (h / 2.0)))?, &k1)?;
            let k3 = aligned(q(&(x + k2 * (h / 2.0)))?, &k2)?;
            let k4 = aligned(q(&(x + k3 * h))?, &k3)?;
            let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let next_dir = aligned(q(&next)?, &k4)?;
            Ok((next, next_dir))
        };
        match step() {
            Ok((next, next_dir)) => {
                x = next;
                dir = next_dir;
                points.push(x);
            }
            Err(_) => {
                truncated = true;
                break;
            }
        }
    }
    Ok(TracedCurve {
        points,
        step: h,
        truncated,
    })
}

/// Reciprocal circumradius of points `i − 1`, `i`, `i + 1`.
pub fn polyline_curvature<const N: usize>(curve: &TracedCurve<N>, i: usize) -> Result<f64> {
    let p = &curve.points;
    if i == 0 || i + 1 >= p.len() {
        return Err(TcfError::OracleUnstable(format!(
            "index {i} needs neighbours in a polyline of {} points",
            p.len()
        )));
    }
    circumcurvature(&p[i - 1], &p[i], &p[i + 1])
}

/// `1/R` of the circle through three points; 0 for collinear points.
pub fn circumcurvature<const N: usize>(a: &Vector<N>, b: &Vector<N>, c: &Vector<N>) -> Result<f64> {
    let u = b - a;
    let v = c - b;
    let w = c - a;
    let (lu, lv, lw) = (u.norm(), v.norm(), w.norm());
    if lu == 0.0 || lv == 0.0 || lw == 0.0 {
        return Err(TcfError::OracleUnstable("repeated polyline point".into()));
    }
    // |u ∧ v| through the Lagrange identity, term by term.
    let mut wedge2 = 0.0;
    for i in 0..N {
        for j in i + 1..N {
            let t = u[i] * v[j] - u[j] * v[i];
            wedge2 += t * t;
        }
    }
    Ok(2.0 * wedge2.sqrt() / (lu * lv * lw))
}

/// Curvature at `x0` from one traced step in each direction.
pub fn traced_curvature<const N: usize>(field: &IntensityField<N>, x0: &Vector<N>, step: f64, mask_floor: f64) -> Result<f64> {
    let opts = TraceOptions {
        step,
        steps: 1,
        mask_floor,
        reverse: false,
    };
    let ahead = trace_parallel_curve(field, x0, &opts)?;
    let behind = trace_parallel_curve(field, x0, &TraceOptions { reverse: true, ..opts })?;
    if ahead.truncated || behind.truncated {
        return Err(TcfError::OracleUnstable("trace left the computable region".into()));
    }
    circumcurvature(&behind.points[1], x0, &ahead.points[1])
}

/// Agreement of the linear-system path with both oracles at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCheck {
    /// `‖J − J_fd‖_F / (1 + ‖J_fd‖_F)`.
    pub jacobian_error: f64,
    pub curvature: f64,
    pub traced_curvature: f64,
    /// `|c − c_trace| / c_trace`.
    pub curvature_error: f64,
}

/// Compares the analytic Jacobian and curvature with the oracles at `x`.
pub fn check_point<const N: usize>(field: &IntensityField<N>, x: &Vector<N>, eps: f64, step: f64) -> Result<PointCheck> {
    let analysis = analyze_point(field, x, 0.0)?;
    let fd = fd_eigvec_jacobian(field, x, eps)?;
    let traced = traced_curvature(field, x, step, 0.0)?;
    let jacobian_error = (analysis.jacobian - fd).norm() / (1.0 + fd.norm());
    Ok(PointCheck {
        jacobian_error,
        curvature: analysis.c,
        traced_curvature: traced,
        curvature_error: (analysis.c - traced).abs() / traced,
    })
}

/// Points with intensity at least this fraction of the grid peak are inside
/// a tube (the half-maximum region).
pub const TUBE_INTERIOR_FRACTION: f64 = 0.5;

/// Draws `count` uniform random points of the grid box that lie inside a
/// tube and have a non-degenerate eigenframe. Deterministic for a seed.
pub fn interior_points<const N: usize>(
    field: &IntensityField<N>,
    grid: &GridSpec<N>,
    count: usize,
    seed: u64,
) -> Result<Vec<Vector<N>>> {
    let floor = TUBE_INTERIOR_FRACTION * grid_max_intensity(field, grid, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let budget = 10_000 * count.max(1);
    for _ in 0..budget {
        if out.len() == count {
            break;
        }
        let x = Vector::<N>::from_fn(|a, _| rng.gen_range(grid.lower[a]..=grid.upper[a]));
        if !field.value(&x).is_ok_and(|p| p >= floor) {
            continue;
        }
        if analyze_point(field, &x, 0.0).is_ok() {
            out.push(x);
        }
    }
    if out.len() < count {
        return Err(TcfError::OracleUnstable(format!(
            "found {} of {count} interior points",
            out.len()
        )));
    }
    Ok(out)
}
