//! Pointwise and gridded tubular curvature.

use rayon::prelude::*;

use crate::eigen::{eig_sym_sorted, EigenFrame};
use crate::error::{Result, TcfError};
use crate::grid::GridSpec;
use crate::kernel::{IntensityField, JetOrder};
use crate::logjet::{log_jet, LogJet};
use crate::system::{assemble_system, solve_direction, DirectionSolution};
use crate::{Matrix, Vector};

/// Outcome of the curvature computation at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Status {
    Ok = 0,
    /// Repeated eigenvalue magnitudes or an ill-conditioned direction system.
    Degenerate = 1,
    /// Intensity at or below the mask floor.
    MaskedLowIntensity = 2,
    NonFinite = 3,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Status::Ok),
            1 => Some(Status::Degenerate),
            2 => Some(Status::MaskedLowIntensity),
            3 => Some(Status::NonFinite),
            _ => None,
        }
    }

    pub fn is_ok(self) -> bool {
        self == Status::Ok
    }

    fn of_error(err: &TcfError) -> Self {
        match err {
            TcfError::MaskedLowIntensity { .. } => Status::MaskedLowIntensity,
            TcfError::DegenerateFrame { .. } | TcfError::IllConditionedSystem { .. } | TcfError::SingularPoint => {
                Status::Degenerate
            }
            _ => Status::NonFinite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureResult<const N: usize> {
    /// Acceleration `a = J q₁`; NaN unless `status` is `Ok`.
    pub a: Vector<N>,
    /// `‖a‖`; NaN unless `status` is `Ok`.
    pub c: f64,
    pub status: Status,
    /// Tangent eigenvector when the frame could be computed, NaN otherwise.
    pub q1: Vector<N>,
}

impl<const N: usize> CurvatureResult<N> {
    fn failed(status: Status, q1: Option<Vector<N>>) -> Self {
        Self {
            a: Vector::<N>::repeat(f64::NAN),
            c: f64::NAN,
            status,
            q1: q1.unwrap_or_else(|| Vector::<N>::repeat(f64::NAN)),
        }
    }
}

/// Every intermediate quantity of the pipeline at one point.
#[derive(Debug, Clone, Copy)]
pub struct PointAnalysis<const N: usize> {
    pub log_jet: LogJet<N>,
    pub frame: EigenFrame<N>,
    pub directions: [DirectionSolution<N>; N],
    /// Column `i` is `∂q₁/∂xᵢ`.
    pub jacobian: Matrix<N>,
    pub a: Vector<N>,
    pub c: f64,
}

/// Solves the direction systems for every axis with one factorization.
pub fn solve_all_directions<const N: usize>(
    log_jet: &LogJet<N>,
    frame: &EigenFrame<N>,
) -> Result<[DirectionSolution<N>; N]> {
    let system = assemble_system(frame)?.factor()?;
    Ok(std::array::from_fn(|i| solve_direction(&system, &log_jet.t[i])))
}

fn jacobian_of<const N: usize>(directions: &[DirectionSolution<N>; N]) -> Matrix<N> {
    let mut j = Matrix::<N>::zeros();
    for (i, d) in directions.iter().enumerate() {
        j.set_column(i, &d.v.column(0));
    }
    j
}

/// `J` with column `i` equal to `∂q₁/∂xᵢ`.
pub fn eigvec_jacobian<const N: usize>(log_jet: &LogJet<N>, frame: &EigenFrame<N>) -> Result<Matrix<N>> {
    Ok(jacobian_of(&solve_all_directions(log_jet, frame)?))
}

/// `a = Σᵢ (q₁)ᵢ ∂q₁/∂xᵢ`.
pub fn acceleration<const N: usize>(jacobian: &Matrix<N>, q1: &Vector<N>) -> Vector<N> {
    let mut a = Vector::<N>::zeros();
    for i in 0..N {
        a += jacobian.column(i) * q1[i];
    }
    a
}

/// Curvature pipeline from a log-jet onwards.
pub fn analyze_log_jet<const N: usize>(log_jet: &LogJet<N>) -> Result<PointAnalysis<N>> {
    let frame = eig_sym_sorted(&log_jet.h)?;
    analyze_frame(log_jet, frame)
}

/// Same as [`analyze_log_jet`] with a caller-supplied frame.
pub fn analyze_frame<const N: usize>(log_jet: &LogJet<N>, frame: EigenFrame<N>) -> Result<PointAnalysis<N>> {
    let directions = solve_all_directions(log_jet, &frame)?;
    let jacobian = jacobian_of(&directions);
    let a = acceleration(&jacobian, &frame.tangent());
    let c = a.norm();
    Ok(PointAnalysis {
        log_jet: *log_jet,
        frame,
        directions,
        jacobian,
        a,
        c,
    })
}

/// Full pipeline at `x`. Points with `p ≤ mask_floor` are masked.
pub fn analyze_point<const N: usize>(
    field: &IntensityField<N>,
    x: &Vector<N>,
    mask_floor: f64,
) -> Result<PointAnalysis<N>> {
    let jet = match field.jet(x, JetOrder::Third) {
        Err(TcfError::SingularPoint) => {
            let value = field.value(x)?;
            if !(value > mask_floor) {
                return Err(TcfError::MaskedLowIntensity {
                    value,
                    floor: mask_floor,
                });
            }
            return Err(TcfError::SingularPoint);
        }
        other => other?,
    };
    analyze_log_jet(&log_jet(&jet, mask_floor)?)
}

fn result_of<const N: usize>(analysis: Result<PointAnalysis<N>>) -> CurvatureResult<N> {
    match analysis {
        Ok(p) => {
            let q1 = p.frame.tangent();
            if p.c.is_finite() && p.a.iter().all(|v| v.is_finite()) {
                CurvatureResult {
                    a: p.a,
                    c: p.c,
                    status: Status::Ok,
                    q1,
                }
            } else {
                CurvatureResult::failed(Status::NonFinite, Some(q1))
            }
        }
        Err(e) => CurvatureResult::failed(Status::of_error(&e), None),
    }
}

/// Curvature at `x`; failures are reported through the status.
pub fn curvature_at<const N: usize>(field: &IntensityField<N>, x: &Vector<N>, mask_floor: f64) -> CurvatureResult<N> {
    result_of(analyze_point(field, x, mask_floor))
}

/// Curvature from an already evaluated log-jet.
pub fn curvature_of_log_jet<const N: usize>(log_jet: &LogJet<N>) -> CurvatureResult<N> {
    result_of(analyze_log_jet(log_jet))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOptions {
    /// Mask floor as a fraction of the largest intensity on the grid.
    pub mask_threshold: f64,
    pub store_accel: bool,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self {
            mask_threshold: 1e-3,
            store_accel: false,
            workers: 0,
        }
    }
}

/// Curvature sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField<const N: usize> {
    pub grid: GridSpec<N>,
    /// Curvature per grid point, x fastest; NaN where the status is not `Ok`.
    pub values: Vec<f64>,
    pub accel: Option<Vec<Vector<N>>>,
    pub status: Vec<Status>,
}

impl<const N: usize> CurvatureField<N> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn count(&self, status: Status) -> usize {
        self.status.iter().filter(|s| **s == status).count()
    }

    /// Values at `Ok` points.
    pub fn ok_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.status)
            .filter(|(_, s)| s.is_ok())
            .map(|(v, _)| *v)
    }

    /// Largest curvature over `Ok` points with its flat index.
    pub fn max_ok(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .zip(&self.status)
            .enumerate()
            .filter(|(_, (_, s))| s.is_ok())
            .map(|(i, (v, _))| (i, *v))
            .fold(None, |best, (i, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
    }

    /// Little-endian bytes of the values, for byte-level comparisons.
    pub fn value_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Runs `job` on a private pool; rayon reads 0 threads as "all cores".
fn run_in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

/// Maximum intensity of `field` over the grid points (singular points skipped).
pub fn grid_max_intensity<const N: usize>(field: &IntensityField<N>, grid: &GridSpec<N>, workers: usize) -> Result<f64> {
    grid.validate()?;
    let max = run_in_pool(workers, || {
        (0..grid.len())
            .into_par_iter()
            .map(|i| field.value(&grid.point(i)).unwrap_or(0.0))
            .reduce(|| 0.0, f64::max)
    });
    Ok(max)
}

/// Evaluates the curvature at every grid point.
///
/// The mask floor is `mask_threshold` times the largest intensity found on
/// the grid. Results are placed by index, so the output does not depend on
/// the number of workers.
pub fn curvature_field<const N: usize>(
    field: &IntensityField<N>,
    grid: &GridSpec<N>,
    opts: &FieldOptions,
) -> Result<CurvatureField<N>> {
    if !(opts.mask_threshold > 0.0 && opts.mask_threshold < 1.0) {
        return Err(TcfError::InvalidGrid(format!(
            "mask threshold {} is outside (0, 1)",
            opts.mask_threshold
        )));
    }
    let floor = opts.mask_threshold * grid_max_intensity(field, grid, opts.workers)?;
    let results: Vec<CurvatureResult<N>> = run_in_pool(opts.workers, || {
        (0..grid.len())
            .into_par_iter()
            .map(|i| curvature_at(field, &grid.point(i), floor))
            .collect()
    });
    Ok(CurvatureField {
        grid: *grid,
        values: results.iter().map(|r| r.c).collect(),
        accel: opts.store_accel.then(|| results.iter().map(|r| r.a).collect()),
        status: results.iter().map(|r| r.status).collect(),
    })
}
