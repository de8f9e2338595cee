//! Sorted, sign-deterministic eigen-decomposition of small symmetric matrices.

use crate::error::{Result, TcfError};
use crate::{Matrix, Vector};

/// Relative eigenvalue-magnitude gap below which a frame is degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

/// Eigenpairs of a symmetric Hessian, sorted by ascending `|λ|`.
///
/// Column `i` of `q` is the unit eigenvector for `lambdas[i]`; column 0 is the
/// tangent of the parallel curves. The entry of largest magnitude in every
/// column is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenFrame<const N: usize> {
    pub lambdas: Vector<N>,
    pub q: Matrix<N>,
    /// Smallest difference of adjacent sorted eigenvalue magnitudes.
    pub gap: f64,
}

impl<const N: usize> EigenFrame<N> {
    pub fn tangent(&self) -> Vector<N> {
        self.q.column(0).into_owned()
    }

    pub fn is_degenerate(&self) -> bool {
        let scale = self.lambdas.iter().fold(1.0f64, |m, l| m.max(l.abs()));
        !(self.gap >= DEGENERACY_TOLERANCE * scale)
    }

    /// `Q Λ Qᵀ`.
    pub fn reconstruct(&self) -> Matrix<N> {
        self.q * Matrix::<N>::from_diagonal(&self.lambdas) * self.q.transpose()
    }

    /// Same frame with eigenvector `i` negated.
    pub fn with_flipped(&self, i: usize) -> Self {
        let mut out = *self;
        out.q.column_mut(i).neg_mut();
        out
    }
}

/// Eigen-decomposition of a symmetric `N×N` matrix (`N` ∈ {2, 3}).
pub fn eig_sym_sorted<const N: usize>(h: &Matrix<N>) -> Result<EigenFrame<N>> {
    if !h.iter().all(|v| v.is_finite()) {
        return Err(TcfError::InvalidHessian);
    }
    let (values, vectors): (Vec<f64>, Vec<Vec<f64>>) = match N {
        2 => {
            let (l, q) = eigen2([[h[(0, 0)], h[(0, 1)]], [h[(1, 0)], h[(1, 1)]]]);
            (l.to_vec(), (0..2).map(|c| vec![q[0][c], q[1][c]]).collect())
        }
        3 => {
            let mut a = [[0.0; 3]; 3];
            for (i, row) in a.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = h[(i, j)];
                }
            }
            let (l, q) = eigen3(a);
            (l.to_vec(), (0..3).map(|c| vec![q[0][c], q[1][c], q[2][c]]).collect())
        }
        n => return Err(TcfError::UnsupportedDimension(n)),
    };

    let mut order: Vec<usize> = (0..N).collect();
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));

    let mut lambdas = Vector::<N>::zeros();
    let mut q = Matrix::<N>::zeros();
    for (dst, &src) in order.iter().enumerate() {
        lambdas[dst] = values[src];
        let mut col = vectors[src].clone();
        let lead = col
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > col[best].abs() { i } else { best });
        if col[lead] < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for (r, v) in col.into_iter().enumerate() {
            q[(r, dst)] = v;
        }
    }
    let gap = (0..N - 1)
        .map(|i| (lambdas[i + 1].abs() - lambdas[i].abs()).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(EigenFrame { lambdas, q, gap })
}

/// One Jacobi rotation diagonalizes a symmetric 2×2 matrix.
fn eigen2(a: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (p, r, s) = (a[0][0], 0.5 * (a[0][1] + a[1][0]), a[1][1]);
    if r == 0.0 {
        return ([p, s], [[1.0, 0.0], [0.0, 1.0]]);
    }
    let zeta = (s - p) / (2.0 * r);
    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
    let c = 1.0 / (1.0 + t * t).sqrt();
    let sn = t * c;
    ([p - t * r, s + t * r], [[c, sn], [-sn, c]])
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn mat_vec3(a: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [dot3(a[0], v), dot3(a[1], v), dot3(a[2], v)]
}

/// Unit vector spanning the null space of `A − λI` for a simple eigenvalue:
/// the largest cross product of two of its rows.
fn null_vector(a: &[[f64; 3]; 3], lambda: f64) -> [f64; 3] {
    let r0 = [a[0][0] - lambda, a[0][1], a[0][2]];
    let r1 = [a[1][0], a[1][1] - lambda, a[1][2]];
    let r2 = [a[2][0], a[2][1], a[2][2] - lambda];
    let candidates = [cross3(r0, r1), cross3(r0, r2), cross3(r1, r2)];
    let (best, norm2) = candidates
        .iter()
        .map(|c| (*c, dot3(*c, *c)))
        .fold(([1.0, 0.0, 0.0], 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
    if norm2 > 0.0 {
        scale3(best, 1.0 / norm2.sqrt())
    } else {
        [1.0, 0.0, 0.0]
    }
}

/// Orthonormal pair completing `w` to a basis.
fn complement(w: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let u = if w[0].abs() > w[1].abs() {
        let inv = 1.0 / (w[0] * w[0] + w[2] * w[2]).sqrt();
        [-w[2] * inv, 0.0, w[0] * inv]
    } else {
        let inv = 1.0 / (w[1] * w[1] + w[2] * w[2]).sqrt();
        [0.0, w[2] * inv, -w[1] * inv]
    };
    (u, cross3(w, u))
}

/// Eigenvector for `lambda` inside the plane orthogonal to `w`.
fn vector_in_plane(a: &[[f64; 3]; 3], w: [f64; 3], lambda: f64) -> [f64; 3] {
    let (u, v) = complement(w);
    let au = mat_vec3(a, u);
    let av = mat_vec3(a, v);
    let mut m00 = dot3(u, au) - lambda;
    let mut m01 = dot3(u, av);
    let mut m11 = dot3(v, av) - lambda;
    let (a00, a01, a11) = (m00.abs(), m01.abs(), m11.abs());
    let (cu, cv) = if a00.max(a01).max(a11) == 0.0 {
        (1.0, 0.0)
    } else if a00 >= a11 {
        if a00 >= a01 {
            m01 /= m00;
            m00 = 1.0 / (1.0 + m01 * m01).sqrt();
            m01 *= m00;
        } else {
            m00 /= m01;
            m01 = 1.0 / (1.0 + m00 * m00).sqrt();
            m00 *= m01;
        }
        (m01, -m00)
    } else {
        if a11 >= a01 {
            m01 /= m11;
            m11 = 1.0 / (1.0 + m01 * m01).sqrt();
            m01 *= m11;
        } else {
            m11 /= m01;
            m01 = 1.0 / (1.0 + m11 * m11).sqrt();
            m11 *= m01;
        }
        (m11, -m01)
    };
    [
        cu * u[0] + cv * v[0],
        cu * u[1] + cv * v[1],
        cu * u[2] + cv * v[2],
    ]
}

/// Closed-form symmetric 3×3 eigensolver.
///
/// Eigenvalues come from the trigonometric solution of the characteristic
/// cubic of the shifted, normalized matrix. The eigenvector of the most
/// isolated eigenvalue is taken from row cross products, the second from a
/// 2×2 problem in the orthogonal plane, the third by a cross product. A final
/// Jacobi pass on `QᵀAQ` polishes both to working precision.
fn eigen3(input: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut a = input;
    for i in 0..3 {
        for j in i + 1..3 {
            let m = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = m;
            a[j][i] = m;
        }
    }
    let max_abs = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return ([0.0; 3], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }
    let inv = 1.0 / max_abs;
    let b: [[f64; 3]; 3] = a.map(|row| row.map(|v| v * inv));

    let off = b[0][1] * b[0][1] + b[0][2] * b[0][2] + b[1][2] * b[1][2];
    let mut vecs: [[f64; 3]; 3];
    if off == 0.0 {
        vecs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    } else {
        let mean = (b[0][0] + b[1][1] + b[2][2]) / 3.0;
        let c: [[f64; 3]; 3] = {
            let mut c = b;
            for (i, row) in c.iter_mut().enumerate() {
                row[i] -= mean;
            }
            c
        };
        let p2 = c[0][0] * c[0][0] + c[1][1] * c[1][1] + c[2][2] * c[2][2] + 2.0 * off;
        let p = (p2 / 6.0).sqrt();
        let det = c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[1][2])
            - c[0][1] * (c[0][1] * c[2][2] - c[1][2] * c[0][2])
            + c[0][2] * (c[0][1] * c[1][2] - c[1][1] * c[0][2]);
        let half_det = (0.5 * det / (p * p * p)).clamp(-1.0, 1.0);
        let angle = half_det.acos() / 3.0;
        let two_thirds_pi = 2.0 * std::f64::consts::FRAC_PI_3;
        let beta2 = 2.0 * angle.cos();
        let beta0 = 2.0 * (angle + two_thirds_pi).cos();
        let beta1 = -(beta0 + beta2);
        let eval = [mean + p * beta0, mean + p * beta1, mean + p * beta2];

        // Solve the most isolated eigenvalue first.
        let (first, second, third) = if half_det >= 0.0 { (2, 1, 0) } else { (0, 1, 2) };
        let v_first = null_vector(&b, eval[first]);
        let v_second = vector_in_plane(&b, v_first, eval[second]);
        let v_third = cross3(v_first, v_second);
        vecs = [[0.0; 3]; 3];
        vecs[first] = v_first;
        vecs[second] = v_second;
        vecs[third] = v_third;
    }

    // Columns of `q` are the eigenvectors.
    let mut q = [[0.0; 3]; 3];
    for (c, v) in vecs.iter().enumerate() {
        for r in 0..3 {
            q[r][c] = v[r];
        }
    }
    let mut d = rotate_into(&b, &q);
    jacobi_polish(&mut d, &mut q);
    let values = [d[0][0] * max_abs, d[1][1] * max_abs, d[2][2] * max_abs];
    (values, q)
}

/// `QᵀBQ`.
fn rotate_into(b: &[[f64; 3]; 3], q: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut bq = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            bq[i][j] = (0..3).map(|k| b[i][k] * q[k][j]).sum();
        }
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| q[k][i] * bq[k][j]).sum();
        }
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let m = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = m;
            out[j][i] = m;
        }
    }
    out
}

/// Cyclic Jacobi sweeps on a nearly diagonal `d`, accumulating into `q`.
fn jacobi_polish(d: &mut [[f64; 3]; 3], q: &mut [[f64; 3]; 3]) {
    for _sweep in 0..4 {
        let off = d[0][1].abs() + d[0][2].abs() + d[1][2].abs();
        let diag = d[0][0].abs() + d[1][1].abs() + d[2][2].abs();
        if off <= f64::EPSILON * 1e-3 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for (p, r) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apr = d[p][r];
            if apr == 0.0 {
                continue;
            }
            let zeta = (d[r][r] - d[p][p]) / (2.0 * apr);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            // d ← Jᵀ d J with J the rotation in the (p, r) plane.
            for k in 0..3 {
                let dkp = d[k][p];
                let dkr = d[k][r];
                d[k][p] = c * dkp - s * dkr;
                d[k][r] = s * dkp + c * dkr;
            }
            for k in 0..3 {
                let dpk = d[p][k];
                let drk = d[r][k];
                d[p][k] = c * dpk - s * drk;
                d[r][k] = s * dpk + c * drk;
            }
            d[p][r] = 0.0;
            d[r][p] = 0.0;
            for row in q.iter_mut() {
                let qp = row[p];
                let qr = row[r];
                row[p] = c * qp - s * qr;
                row[r] = s * qp + c * qr;
            }
        }
    }
}
