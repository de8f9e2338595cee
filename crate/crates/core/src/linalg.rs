//! Dense LU factorization with partial pivoting for the small square
//! systems of the curvature filter (at most 12×12).

pub const MAX_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareMatrix {
    pub n: usize,
    pub a: [[f64; MAX_SIZE]; MAX_SIZE],
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_SIZE, "system of size {n} exceeds {MAX_SIZE}");
        Self {
            n,
            a: [[0.0; MAX_SIZE]; MAX_SIZE],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.a[r][c]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self.a[r][c] * x[c]).sum())
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|c| (0..self.n).map(|r| self.a[r][c].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `PA = LU`, unit lower `L` and upper `U` packed into one array.
#[derive(Debug, Clone, Copy)]
pub struct Lu {
    n: usize,
    lu: [[f64; MAX_SIZE]; MAX_SIZE],
    perm: [usize; MAX_SIZE],
    singular: bool,
    norm1: f64,
}

impl Lu {
    pub fn factor(m: &SquareMatrix) -> Self {
        let n = m.n;
        let mut lu = m.a;
        let mut perm = [0usize; MAX_SIZE];
        for (i, p) in perm.iter_mut().enumerate().take(n) {
            *p = i;
        }
        let mut singular = false;
        for k in 0..n {
            // First row with the largest magnitude wins ties.
            let mut piv = k;
            for r in k + 1..n {
                if lu[r][k].abs() > lu[piv][k].abs() {
                    piv = r;
                }
            }
            if lu[piv][k] == 0.0 || !lu[piv][k].is_finite() {
                singular = true;
                continue;
            }
            if piv != k {
                lu.swap(piv, k);
                perm.swap(piv, k);
            }
            let d = lu[k][k];
            for r in k + 1..n {
                let f = lu[r][k] / d;
                lu[r][k] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        lu[r][c] -= f * lu[k][c];
                    }
                }
            }
        }
        Self {
            n,
            lu,
            perm,
            singular,
            norm1: m.norm1(),
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }

    /// Reciprocal 1-norm condition number, `1 / (‖A‖₁ ‖A⁻¹‖₁)`, with the
    /// inverse formed column by column. Zero for singular matrices.
    pub fn rcond(&self) -> f64 {
        if self.singular || self.norm1 == 0.0 {
            return 0.0;
        }
        let mut inv_norm = 0.0f64;
        let mut e = vec![0.0; self.n];
        for c in 0..self.n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.solve(&e);
            let s: f64 = col.iter().map(|v| v.abs()).sum();
            if !s.is_finite() {
                return 0.0;
            }
            inv_norm = inv_norm.max(s);
        }
        1.0 / (self.norm1 * inv_norm)
    }
}
