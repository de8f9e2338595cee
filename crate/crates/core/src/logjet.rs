//! Derivatives of the log-intensity `f = log p`.

use crate::error::{Result, TcfError};
use crate::kernel::{set_sym3, DiffJet};
use crate::{Matrix, Vector};

/// Gradient, Hessian and directional Hessian derivatives of `f = log p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogJet<const N: usize> {
    /// `∇f = ∇p / p`.
    pub g: Vector<N>,
    /// `∇∇ᵀf = ∇∇ᵀp / p − g gᵀ`.
    pub h: Matrix<N>,
    /// `t[i] = ∂H/∂xᵢ`.
    pub t: [Matrix<N>; N],
}

/// Converts a jet of `p` into the jet of `log p`.
///
/// Points with `p ≤ floor` (or non-finite `p`) are reported as
/// [`TcfError::MaskedLowIntensity`]; the caller decides whether to mask them.
pub fn log_jet<const N: usize>(jet: &DiffJet<N>, floor: f64) -> Result<LogJet<N>> {
    let p = jet.value;
    if !(p.is_finite() && p > floor && p > 0.0) {
        return Err(TcfError::MaskedLowIntensity { value: p, floor });
    }
    let g = jet.grad / p;
    let hp = jet.hess / p;
    let mut h = Matrix::<N>::zeros();
    for i in 0..N {
        for j in i..N {
            let v = hp[(i, j)] - g[i] * g[j];
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    // ∂H/∂xᵢ = (1/p)∂(∇∇ᵀp)/∂xᵢ − (1/p²)[∇∇ᵀp ∂ᵢp + ∂ᵢ∇p ∇ᵀp + ∇p ∂ᵢ∇ᵀp] + (2/p³)∇p∇ᵀp ∂ᵢp,
    // written with the normalized quantities g = ∇p/p and ∇∇ᵀp/p.
    let mut t = [Matrix::<N>::zeros(); N];
    for i in 0..N {
        for j in i..N {
            for k in j..N {
                let tp = jet.third[i][(j, k)] / p;
                let v = tp - (hp[(j, k)] * g[i] + hp[(i, j)] * g[k] + hp[(i, k)] * g[j])
                    + 2.0 * g[i] * g[j] * g[k];
                set_sym3(&mut t, i, j, k, v);
            }
        }
    }
    Ok(LogJet { g, h, t })
}
