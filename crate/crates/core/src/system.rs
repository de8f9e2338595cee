//! The direction systems relating `Tᵢ = ∂H/∂xᵢ` to the derivatives of the
//! eigenvectors (`Vᵢ = ∂Q/∂xᵢ`) and eigenvalues (`Lᵢ`).
//!
//! Differentiating `H = QΛQᵀ` gives `Tᵢ = VᵢΛQᵀ + Q diag(Lᵢ) Qᵀ + QΛVᵢᵀ`.
//! Its `N(N+1)/2` independent entries, together with `N` unit-length
//! constraints `qⱼᵀ ∂qⱼ = 0` and `N(N−1)/2` orthogonality constraints
//! `qⱼᵀ ∂qₖ + ∂qⱼᵀ qₖ = 0`, form a square system in the `N² + N` unknowns.
//! The matrix depends only on the frame, so one factorization serves every
//! direction `i`.
//!
//! Unknown order: row 1 of `Vᵢ`, then `Lᵢ`, then rows 2..N of `Vᵢ`
//! (`[v₁₁ v₁₂ l₁ l₂ v₂₁ v₂₂]` in 2-D). Equation order: upper triangle of `Tᵢ`
//! row by row, unit-length rows, then orthogonality rows for pairs
//! (1,2), (1,3), (2,3).

use crate::eigen::EigenFrame;
use crate::error::{Result, TcfError};
use crate::linalg::{Lu, SquareMatrix};
use crate::{Matrix, Vector};

/// Reciprocal condition number below which a system is refused.
pub const RCOND_TOLERANCE: f64 = 1e-12;

pub const fn system_size(n: usize) -> usize {
    n * n + n
}

/// Position of `v_{row,col}` (entry of `Vᵢ`) in the unknown vector.
pub const fn v_index(n: usize, row: usize, col: usize) -> usize {
    if row == 0 {
        col
    } else {
        2 * n + (row - 1) * n + col
    }
}

/// Position of `l_k` in the unknown vector.
pub const fn l_index(n: usize, k: usize) -> usize {
    n + k
}

/// The square matrix `M` for one eigenframe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemMatrix<const N: usize> {
    pub m: SquareMatrix,
}

impl<const N: usize> SystemMatrix<N> {
    pub fn size(&self) -> usize {
        self.m.n
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.m.get(r, c)
    }

    /// LU factors, refused when the reciprocal condition estimate is below
    /// [`RCOND_TOLERANCE`].
    pub fn factor(&self) -> Result<FactoredSystem<N>> {
        let lu = Lu::factor(&self.m);
        let rcond = lu.rcond();
        if !(rcond >= RCOND_TOLERANCE) {
            return Err(TcfError::IllConditionedSystem { rcond });
        }
        Ok(FactoredSystem { lu, rcond })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FactoredSystem<const N: usize> {
    lu: Lu,
    pub rcond: f64,
}

/// Builds `M` from `(Q, Λ)`. Degenerate frames are refused.
pub fn assemble_system<const N: usize>(frame: &EigenFrame<N>) -> Result<SystemMatrix<N>> {
    if frame.is_degenerate() {
        return Err(TcfError::DegenerateFrame { gap: frame.gap });
    }
    Ok(assemble_unchecked(frame))
}

/// Builds `M` without the degeneracy check.
pub fn assemble_unchecked<const N: usize>(frame: &EigenFrame<N>) -> SystemMatrix<N> {
    let mut m = SquareMatrix::zeros(system_size(N));
    // Q[(a, k)] is component a of eigenvector q_k.
    let q = &frame.q;
    let lam = &frame.lambdas;
    let mut row = 0;
    for a in 0..N {
        for b in a..N {
            for k in 0..N {
                m.a[row][v_index(N, a, k)] += lam[k] * q[(b, k)];
                m.a[row][v_index(N, b, k)] += lam[k] * q[(a, k)];
                m.a[row][l_index(N, k)] += q[(a, k)] * q[(b, k)];
            }
            row += 1;
        }
    }
    for k in 0..N {
        for r in 0..N {
            m.a[row][v_index(N, r, k)] = q[(r, k)];
        }
        row += 1;
    }
    for j in 0..N {
        for k in j + 1..N {
            for r in 0..N {
                m.a[row][v_index(N, r, j)] += q[(r, k)];
                m.a[row][v_index(N, r, k)] += q[(r, j)];
            }
            row += 1;
        }
    }
    debug_assert_eq!(row, system_size(N));
    SystemMatrix { m }
}

/// Right-hand side: upper triangle of `Tᵢ` row by row, then zeros for the
/// eigenvector-property rows.
pub fn flatten_t<const N: usize>(t: &Matrix<N>) -> Vec<f64> {
    let mut out = Vec::with_capacity(system_size(N));
    for a in 0..N {
        for b in a..N {
            out.push(t[(a, b)]);
        }
    }
    out.resize(system_size(N), 0.0);
    out
}

/// Derivatives of the eigenvectors and eigenvalues along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionSolution<const N: usize> {
    /// Column `j` is `∂qⱼ/∂xᵢ`.
    pub v: Matrix<N>,
    /// Entry `j` is `∂λⱼ/∂xᵢ`.
    pub l: Vector<N>,
}

impl<const N: usize> DirectionSolution<N> {
    /// `‖Tᵢ − (VᵢΛQᵀ + Q diag(Lᵢ) Qᵀ + QΛVᵢᵀ)‖_F`.
    pub fn reconstruction_residual(&self, frame: &EigenFrame<N>, t: &Matrix<N>) -> f64 {
        let lam = Matrix::<N>::from_diagonal(&frame.lambdas);
        let q = &frame.q;
        let rebuilt = self.v * lam * q.transpose()
            + q * Matrix::<N>::from_diagonal(&self.l) * q.transpose()
            + q * lam * self.v.transpose();
        (t - rebuilt).norm()
    }

    /// Largest `|qⱼᵀ ∂qⱼ/∂xᵢ|`.
    pub fn unit_length_defect(&self, frame: &EigenFrame<N>) -> f64 {
        (0..N)
            .map(|j| frame.q.column(j).dot(&self.v.column(j)).abs())
            .fold(0.0, f64::max)
    }
}

/// Solves `M [v; l] = flatten(Tᵢ)` with the shared factorization.
pub fn solve_direction<const N: usize>(system: &FactoredSystem<N>, t: &Matrix<N>) -> DirectionSolution<N> {
    let x = system.lu.solve(&flatten_t(t));
    let mut v = Matrix::<N>::zeros();
    let mut l = Vector::<N>::zeros();
    for r in 0..N {
        for c in 0..N {
            v[(r, c)] = x[v_index(N, r, c)];
        }
    }
    for k in 0..N {
        l[k] = x[l_index(N, k)];
    }
    DirectionSolution { v, l }
}
