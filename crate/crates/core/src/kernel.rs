//! Continuous intensity fields and their analytic derivatives up to third
//! order.
//!
//! A Gaussian-mixture field is `p(x) = Σⱼ wⱼ exp(−½ (x−x̃ⱼ)ᵀ Sⱼ⁻¹ (x−x̃ⱼ))`,
//! optionally truncated to the `k` centers nearest to `x`. The kernel is left
//! unnormalized: curvature only sees `log p` up to an additive constant.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Result, TcfError};
use crate::grid::GridSpec;
use crate::{Matrix, Vector};

/// Below this many centers the k-nearest search is brute force.
const BRUTE_FORCE_LIMIT: usize = 10_000;

/// Highest derivative order a jet carries; lower orders leave the rest zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JetOrder {
    Value = 0,
    Gradient = 1,
    Hessian = 2,
    Third = 3,
}

/// Value, gradient, Hessian and third derivative tensor of a scalar field.
///
/// `third[i]` is `∂(∇∇ᵀp)/∂xᵢ`, so `third[i][(j, k)] = ∂³p/∂xᵢ∂xⱼ∂xₖ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffJet<const N: usize> {
    pub value: f64,
    pub grad: Vector<N>,
    pub hess: Matrix<N>,
    pub third: [Matrix<N>; N],
}

impl<const N: usize> DiffJet<N> {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            grad: Vector::zeros(),
            hess: Matrix::zeros(),
            third: [Matrix::zeros(); N],
        }
    }

    /// Every component multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            value: self.value * c,
            grad: self.grad * c,
            hess: self.hess * c,
            third: self.third.map(|t| t * c),
        }
    }

    /// Largest absolute difference between entries that must agree by
    /// symmetry of mixed partials.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = (self.hess - self.hess.transpose()).amax();
        for i in 0..N {
            for j in 0..N {
                for k in 0..N {
                    let v = self.third[i][(j, k)];
                    for other in [
                        self.third[i][(k, j)],
                        self.third[j][(i, k)],
                        self.third[j][(k, i)],
                        self.third[k][(i, j)],
                        self.third[k][(j, i)],
                    ] {
                        worst = worst.max((v - other).abs());
                    }
                }
            }
        }
        worst
    }

    /// Copies the canonical entries (`i ≤ j` for the Hessian, `i ≤ j ≤ k` for
    /// the third tensor) onto their mirror positions.
    fn mirror(&mut self) {
        for i in 0..N {
            for j in i + 1..N {
                self.hess[(j, i)] = self.hess[(i, j)];
            }
        }
        for i in 0..N {
            for j in i..N {
                for k in j..N {
                    let v = self.third[i][(j, k)];
                    set_sym3(&mut self.third, i, j, k, v);
                }
            }
        }
    }
}

pub(crate) fn set_sym3<const N: usize>(t: &mut [Matrix<N>; N], i: usize, j: usize, k: usize, v: f64) {
    t[i][(j, k)] = v;
    t[i][(k, j)] = v;
    t[j][(i, k)] = v;
    t[j][(k, i)] = v;
    t[k][(i, j)] = v;
    t[k][(j, i)] = v;
}

/// Inverse of a symmetric positive definite scale matrix, symmetrized.
fn precision_of<const N: usize>(scale: &Matrix<N>) -> Result<Matrix<N>> {
    if !scale.iter().all(|v| v.is_finite()) {
        return Err(TcfError::InvalidScale);
    }
    let tol = 1e-12 * scale.amax().max(f64::MIN_POSITIVE);
    if (scale - scale.transpose()).amax() > tol {
        return Err(TcfError::InvalidScale);
    }
    let chol = scale.cholesky().ok_or(TcfError::InvalidScale)?;
    if (0..N).any(|i| !(chol.l_dirty()[(i, i)] > 0.0)) {
        return Err(TcfError::InvalidScale);
    }
    let inv = chol.inverse();
    let sym = (inv + inv.transpose()) * 0.5;
    if !sym.iter().all(|v| v.is_finite()) {
        return Err(TcfError::InvalidScale);
    }
    Ok(sym)
}

/// Adds `weight · K(u)` and its derivatives up to `order` into the canonical
/// entries of `jet`. Callers mirror once after the last kernel.
fn accumulate_kernel<const N: usize>(
    jet: &mut DiffJet<N>,
    u: &Vector<N>,
    precision: &Matrix<N>,
    weight: f64,
    order: JetOrder,
) {
    let z = precision * u;
    let k = (-0.5 * u.dot(&z)).exp();
    let wk = weight * k;
    jet.value += wk;
    if order < JetOrder::Gradient {
        return;
    }
    for i in 0..N {
        jet.grad[i] -= wk * z[i];
    }
    if order < JetOrder::Hessian {
        return;
    }
    for i in 0..N {
        for j in i..N {
            jet.hess[(i, j)] += wk * (z[i] * z[j] - precision[(i, j)]);
        }
    }
    if order < JetOrder::Third {
        return;
    }
    for i in 0..N {
        for j in i..N {
            for l in j..N {
                let term = -z[i] * z[j] * z[l]
                    + precision[(i, j)] * z[l]
                    + precision[(i, l)] * z[j]
                    + precision[(j, l)] * z[i];
                jet.third[i][(j, l)] += wk * term;
            }
        }
    }
}

/// Jet of the unnormalized Gaussian `exp(−½ uᵀS⁻¹u)` with respect to `u`.
pub fn gaussian_kernel_jet<const N: usize>(
    u: &Vector<N>,
    scale: &Matrix<N>,
    order: JetOrder,
) -> Result<DiffJet<N>> {
    let precision = precision_of(scale)?;
    let mut jet = DiffJet::zero();
    accumulate_kernel(&mut jet, u, &precision, 1.0, order);
    jet.mirror();
    Ok(jet)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    GaussianMixture,
    /// `p(x) = exp(−((‖(x₁,x₂)‖ − r)² + Σ_{a≥3} x_a² · m/m_axial) / m)`.
    ///
    /// In 2-D this is the blurry ring; in 3-D a torus around the z axis whose
    /// cross-section is stretched along z by `axial_thickness / thickness`.
    AnalyticRing {
        radius: f64,
        thickness: f64,
        axial_thickness: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Scales<const N: usize> {
    Shared {
        scale: Matrix<N>,
        precision: Matrix<N>,
    },
    PerKernel {
        scales: Vec<Matrix<N>>,
        precisions: Vec<Matrix<N>>,
    },
}

impl<const N: usize> Scales<N> {
    fn precision(&self, j: usize) -> &Matrix<N> {
        match self {
            Scales::Shared { precision, .. } => precision,
            Scales::PerKernel { precisions, .. } => &precisions[j],
        }
    }

    fn scale(&self, j: usize) -> &Matrix<N> {
        match self {
            Scales::Shared { scale, .. } => scale,
            Scales::PerKernel { scales, .. } => &scales[j],
        }
    }
}

/// Evaluable, thrice differentiable, strictly positive scalar field.
///
/// Immutable after construction and `Sync`; evaluation is a pure function of
/// the query point.
#[derive(Debug, Clone)]
pub struct IntensityField<const N: usize> {
    backend: Backend,
    centers: Vec<Vector<N>>,
    weights: Vec<f64>,
    scales: Option<Scales<N>>,
    knn_k: Option<usize>,
    index: Option<BucketIndex<N>>,
}

impl<const N: usize> IntensityField<N> {
    /// Gaussian mixture with one scale matrix shared by every kernel.
    pub fn gaussian_mixture(
        centers: Vec<Vector<N>>,
        weights: Vec<f64>,
        scale: Matrix<N>,
    ) -> Result<Self> {
        let precision = precision_of(&scale)?;
        Self::mixture(centers, weights, Scales::Shared { scale, precision })
    }

    /// Gaussian mixture with `S = σ²·I`.
    pub fn isotropic(centers: Vec<Vector<N>>, weights: Vec<f64>, sigma2: f64) -> Result<Self> {
        Self::gaussian_mixture(centers, weights, Matrix::<N>::identity() * sigma2)
    }

    /// Gaussian mixture with one scale matrix per kernel.
    pub fn gaussian_mixture_per_kernel(
        centers: Vec<Vector<N>>,
        weights: Vec<f64>,
        scales: Vec<Matrix<N>>,
    ) -> Result<Self> {
        if scales.len() != centers.len() {
            return Err(TcfError::InvalidShape(format!(
                "{} scale matrices for {} centers",
                scales.len(),
                centers.len()
            )));
        }
        let precisions = scales.iter().map(precision_of).collect::<Result<Vec<_>>>()?;
        Self::mixture(centers, weights, Scales::PerKernel { scales, precisions })
    }

    fn mixture(centers: Vec<Vector<N>>, weights: Vec<f64>, scales: Scales<N>) -> Result<Self> {
        if !(2..=3).contains(&N) {
            return Err(TcfError::UnsupportedDimension(N));
        }
        if centers.is_empty() {
            return Err(TcfError::EmptyField);
        }
        if weights.len() != centers.len() {
            return Err(TcfError::InvalidShape(format!(
                "{} weights for {} centers",
                weights.len(),
                centers.len()
            )));
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(TcfError::InvalidWeight(w));
        }
        if centers.iter().any(|c| !c.iter().all(|v| v.is_finite())) {
            return Err(TcfError::InvalidShape("non-finite center".into()));
        }
        Ok(Self {
            backend: Backend::GaussianMixture,
            centers,
            weights,
            scales: Some(scales),
            knn_k: None,
            index: None,
        })
    }

    fn analytic(radius: f64, thickness: f64, axial_thickness: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(radius) && ok(thickness) && ok(axial_thickness)) {
            return Err(TcfError::InvalidShape(format!(
                "ring needs positive radius and thickness, got r={radius}, m={thickness}, m_axial={axial_thickness}"
            )));
        }
        Ok(Self {
            backend: Backend::AnalyticRing {
                radius,
                thickness,
                axial_thickness,
            },
            centers: Vec::new(),
            weights: Vec::new(),
            scales: None,
            knn_k: None,
            index: None,
        })
    }

    /// Restricts every evaluation to the `k` nearest centers.
    pub fn with_knn(mut self, k: usize) -> Result<Self> {
        if self.backend != Backend::GaussianMixture {
            return Err(TcfError::InvalidShape("k-nearest truncation needs a kernel mixture".into()));
        }
        let n = self.centers.len();
        if k == 0 || k > n {
            return Err(TcfError::InvalidK { k, n });
        }
        self.knn_k = Some(k);
        if n >= BRUTE_FORCE_LIMIT && self.index.is_none() {
            self.index = Some(BucketIndex::build(&self.centers));
        }
        Ok(self)
    }

    /// Same field with every weight multiplied by `c`.
    pub fn with_scaled_weights(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(TcfError::InvalidWeight(c));
        }
        let mut out = self.clone();
        for w in &mut out.weights {
            *w *= c;
        }
        Ok(out)
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn centers(&self) -> &[Vector<N>] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn knn_k(&self) -> Option<usize> {
        self.knn_k
    }

    pub fn dim(&self) -> usize {
        N
    }

    /// Scale matrix of kernel `j` (mixtures only).
    pub fn scale(&self, j: usize) -> Option<&Matrix<N>> {
        self.scales.as_ref().map(|s| s.scale(j))
    }

    /// Indices of the `k` centers nearest to `x`, ordered by distance and
    /// then by index.
    pub fn knn_select(&self, x: &Vector<N>, k: usize) -> Result<Vec<usize>> {
        let n = self.centers.len();
        if k == 0 || k > n {
            return Err(TcfError::InvalidK { k, n });
        }
        Ok(match &self.index {
            Some(index) => index.nearest(&self.centers, x, k),
            None => brute_force_nearest(&self.centers, x, k),
        })
    }

    /// Value and derivatives of `p` at `x` up to `order`.
    pub fn jet(&self, x: &Vector<N>, order: JetOrder) -> Result<DiffJet<N>> {
        match self.backend {
            Backend::GaussianMixture => Ok(self.mixture_jet(x, order)),
            Backend::AnalyticRing {
                radius,
                thickness,
                axial_thickness,
            } => ring_jet(x, radius, thickness, axial_thickness, order),
        }
    }

    pub fn value(&self, x: &Vector<N>) -> Result<f64> {
        self.jet(x, JetOrder::Value).map(|j| j.value)
    }

    fn mixture_jet(&self, x: &Vector<N>, order: JetOrder) -> DiffJet<N> {
        let scales = self.scales.as_ref().expect("mixture has scales");
        let mut jet = DiffJet::zero();
        let mut add = |j: usize| {
            let u = x - self.centers[j];
            accumulate_kernel(&mut jet, &u, scales.precision(j), self.weights[j], order);
        };
        match self.knn_k {
            Some(k) => {
                let nearest = match &self.index {
                    Some(index) => index.nearest(&self.centers, x, k),
                    None => brute_force_nearest(&self.centers, x, k),
                };
                nearest.into_iter().for_each(&mut add);
            }
            None => (0..self.centers.len()).for_each(&mut add),
        }
        jet.mirror();
        jet
    }

    /// Axis-aligned box holding the field's support skeleton: kernel centers,
    /// or the ring itself.
    pub fn skeleton_bounds(&self) -> ([f64; N], [f64; N]) {
        match self.backend {
            Backend::GaussianMixture => {
                let mut lo = [f64::INFINITY; N];
                let mut hi = [f64::NEG_INFINITY; N];
                for c in &self.centers {
                    for a in 0..N {
                        lo[a] = lo[a].min(c[a]);
                        hi[a] = hi[a].max(c[a]);
                    }
                }
                (lo, hi)
            }
            Backend::AnalyticRing { radius, .. } => {
                let mut lo = [0.0; N];
                let mut hi = [0.0; N];
                for a in 0..2 {
                    lo[a] = -radius;
                    hi[a] = radius;
                }
                (lo, hi)
            }
        }
    }

    /// Largest per-axis standard deviation of the blur.
    pub fn blur_sigma(&self) -> f64 {
        match (&self.backend, &self.scales) {
            (Backend::GaussianMixture, Some(scales)) => {
                let count = match scales {
                    Scales::Shared { .. } => 1,
                    Scales::PerKernel { scales, .. } => scales.len(),
                };
                (0..count)
                    .flat_map(|j| (0..N).map(move |a| (j, a)))
                    .map(|(j, a)| scales.scale(j)[(a, a)].sqrt())
                    .fold(0.0, f64::max)
            }
            (
                Backend::AnalyticRing {
                    thickness,
                    axial_thickness,
                    ..
                },
                _,
            ) => {
                let m = if N > 2 { thickness.max(*axial_thickness) } else { *thickness };
                (m / 2.0).sqrt()
            }
            _ => 0.0,
        }
    }

    /// `count` samples per axis over the skeleton box padded by three blur
    /// standard deviations.
    pub fn default_grid(&self, count: usize) -> Result<GridSpec<N>> {
        let (mut lo, mut hi) = self.skeleton_bounds();
        let pad = 3.0 * self.blur_sigma();
        for a in 0..N {
            lo[a] -= pad;
            hi[a] += pad;
            if hi[a] - lo[a] <= 0.0 {
                lo[a] -= 1.0;
                hi[a] += 1.0;
            }
        }
        GridSpec::cube(count, lo, hi)
    }
}

impl IntensityField<2> {
    /// Blurry ring `exp(−(‖x‖ − r)²/m)`.
    pub fn ring(radius: f64, thickness: f64) -> Result<Self> {
        Self::analytic(radius, thickness, thickness)
    }
}

impl IntensityField<3> {
    /// Torus around the z axis; `axial_thickness` must differ from
    /// `thickness` or the two normal directions are degenerate everywhere.
    pub fn torus(radius: f64, thickness: f64, axial_thickness: f64) -> Result<Self> {
        Self::analytic(radius, thickness, axial_thickness)
    }
}

/// Closed-form jet of the analytic ring, assembled from the jet of
/// `f = log p` and exponentiated.
fn ring_jet<const N: usize>(
    x: &Vector<N>,
    radius: f64,
    thickness: f64,
    axial: f64,
    order: JetOrder,
) -> Result<DiffJet<N>> {
    let rho = x[0].hypot(x[1]);
    let e = rho - radius;
    let axial_sq: f64 = (2..N).map(|a| x[a] * x[a]).sum();
    let f = -e * e / thickness - axial_sq / axial;
    let p = f.exp();
    let mut jet = DiffJet::zero();
    jet.value = p;
    if order == JetOrder::Value {
        return Ok(jet);
    }
    if rho <= 0.0 {
        return Err(TcfError::SingularPoint);
    }
    let n = [x[0] / rho, x[1] / rho];
    // Derivatives of the in-plane profile φ(ρ) = −(ρ−r)²/m.
    let d1 = -2.0 * e / thickness;
    let d2 = -2.0 / thickness;

    let mut g = Vector::<N>::zeros();
    g[0] = d1 * n[0];
    g[1] = d1 * n[1];
    for a in 2..N {
        g[a] = -2.0 * x[a] / axial;
    }
    let mut h = Matrix::<N>::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let proj = if i == j { 1.0 } else { 0.0 } - n[i] * n[j];
            h[(i, j)] = d2 * n[i] * n[j] + d1 / rho * proj;
        }
    }
    for a in 2..N {
        h[(a, a)] = -2.0 / axial;
    }
    // Third derivatives of f are in-plane only: κ·(P_ik n_j + P_jk n_i + P_ij n_k)
    // with κ = φ''/ρ − φ'/ρ² = −2r/(mρ²).
    let kappa = -2.0 * radius / (thickness * rho * rho);
    let proj = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 } - n[i] * n[j];
    let t = |i: usize, j: usize, k: usize| -> f64 {
        if i >= 2 || j >= 2 || k >= 2 {
            return 0.0;
        }
        kappa * (proj(i, k) * n[j] + proj(j, k) * n[i] + proj(i, j) * n[k])
    };

    jet.grad = g * p;
    for i in 0..N {
        for j in i..N {
            jet.hess[(i, j)] = p * (h[(i, j)] + g[i] * g[j]);
        }
    }
    if order == JetOrder::Third {
        for i in 0..N {
            for j in i..N {
                for k in j..N {
                    jet.third[i][(j, k)] = p
                        * (t(i, j, k)
                            + h[(i, j)] * g[k]
                            + h[(i, k)] * g[j]
                            + h[(j, k)] * g[i]
                            + g[i] * g[j] * g[k]);
                }
            }
        }
    }
    if order < JetOrder::Hessian {
        jet.hess = Matrix::zeros();
    }
    jet.mirror();
    Ok(jet)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

fn brute_force_nearest<const N: usize>(centers: &[Vector<N>], x: &Vector<N>, k: usize) -> Vec<usize> {
    let mut all: Vec<Candidate> = centers
        .iter()
        .enumerate()
        .map(|(index, c)| Candidate {
            dist2: (x - c).norm_squared(),
            index,
        })
        .collect();
    if k < all.len() {
        all.select_nth_unstable(k - 1);
        all.truncate(k);
    }
    all.sort_unstable();
    all.into_iter().map(|c| c.index).collect()
}

/// Uniform bucket grid over the centers for exact k-nearest queries.
#[derive(Debug, Clone)]
struct BucketIndex<const N: usize> {
    origin: [f64; N],
    cell: f64,
    dims: [usize; N],
    /// Center indices grouped by cell, ascending within each cell.
    items: Vec<usize>,
    /// `starts[c]..starts[c + 1]` slices `items` for cell `c`.
    starts: Vec<usize>,
}

impl<const N: usize> BucketIndex<N> {
    fn build(centers: &[Vector<N>]) -> Self {
        let mut lo = [f64::INFINITY; N];
        let mut hi = [f64::NEG_INFINITY; N];
        for c in centers {
            for a in 0..N {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        let mut volume = 1.0;
        for a in 0..N {
            volume *= (hi[a] - lo[a]).max(1.0);
        }
        // About two centers per occupied cell for a dense image.
        let cell = (2.0 * volume / centers.len() as f64).powf(1.0 / N as f64).max(1e-9);
        let mut dims = [1usize; N];
        for a in 0..N {
            dims[a] = (((hi[a] - lo[a]) / cell).floor() as usize + 1).max(1);
        }
        let mut index = Self {
            origin: lo,
            cell,
            dims,
            items: Vec::new(),
            starts: Vec::new(),
        };
        let ncells: usize = dims.iter().product();
        let cell_of: Vec<usize> = centers.iter().map(|c| index.flat(index.cell_coords(c))).collect();
        let mut counts = vec![0usize; ncells + 1];
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; centers.len()];
        for (j, &c) in cell_of.iter().enumerate() {
            items[fill[c]] = j;
            fill[c] += 1;
        }
        index.items = items;
        index.starts = counts;
        index
    }

    fn cell_coords(&self, x: &Vector<N>) -> [usize; N] {
        let mut out = [0; N];
        for a in 0..N {
            let t = ((x[a] - self.origin[a]) / self.cell).floor();
            out[a] = if t.is_nan() || t < 0.0 {
                0
            } else {
                (t as usize).min(self.dims[a] - 1)
            };
        }
        out
    }

    fn flat(&self, c: [usize; N]) -> usize {
        let mut flat = 0;
        for a in (0..N).rev() {
            flat = flat * self.dims[a] + c[a];
        }
        flat
    }

    fn nearest(&self, centers: &[Vector<N>], x: &Vector<N>, k: usize) -> Vec<usize> {
        let home = self.cell_coords(x);
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut radius = 0usize;
        loop {
            let mut lo = [0usize; N];
            let mut hi = [0usize; N];
            let mut covers_all = true;
            for a in 0..N {
                lo[a] = home[a].saturating_sub(radius);
                hi[a] = (home[a] + radius).min(self.dims[a] - 1);
                covers_all &= lo[a] == 0 && hi[a] == self.dims[a] - 1;
            }
            self.visit_shell(centers, x, k, home, radius, lo, hi, &mut heap);

            if covers_all {
                break;
            }
            if heap.len() == k {
                // Any unvisited center lies outside the visited block.
                let mut bound = f64::INFINITY;
                for a in 0..N {
                    if lo[a] > 0 {
                        let face = self.origin[a] + lo[a] as f64 * self.cell;
                        bound = bound.min(x[a] - face);
                    }
                    if hi[a] < self.dims[a] - 1 {
                        let face = self.origin[a] + (hi[a] + 1) as f64 * self.cell;
                        bound = bound.min(face - x[a]);
                    }
                }
                let bound = (bound * (1.0 - 1e-12) - 1e-12 * self.cell).max(0.0);
                let worst = heap.peek().expect("heap is full").dist2;
                if worst < bound * bound {
                    break;
                }
            }
            radius += 1;
        }
        let mut out = heap.into_vec();
        out.sort_unstable();
        out.into_iter().map(|c| c.index).collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn visit_shell(
        &self,
        centers: &[Vector<N>],
        x: &Vector<N>,
        k: usize,
        home: [usize; N],
        radius: usize,
        lo: [usize; N],
        hi: [usize; N],
        heap: &mut BinaryHeap<Candidate>,
    ) {
        let mut cur = lo;
        loop {
            let on_shell = (0..N).any(|a| home[a].abs_diff(cur[a]) == radius);
            if on_shell {
                let c = self.flat(cur);
                for &j in &self.items[self.starts[c]..self.starts[c + 1]] {
                    let cand = Candidate {
                        dist2: (x - centers[j]).norm_squared(),
                        index: j,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            // Odometer over the block.
            let mut a = 0;
            loop {
                if a == N {
                    return;
                }
                if cur[a] < hi[a] {
                    cur[a] += 1;
                    break;
                }
                cur[a] = lo[a];
                a += 1;
            }
        }
    }
}

/// A field of either supported dimension.
#[derive(Debug, Clone)]
pub enum DynField {
    D2(IntensityField<2>),
    D3(IntensityField<3>),
}

impl DynField {
    pub fn dim(&self) -> usize {
        match self {
            DynField::D2(_) => 2,
            DynField::D3(_) => 3,
        }
    }
}
