use std::f64::consts::TAU;

use faer::Mat;

use super::{max_abs, Backend, DiscretizedSystem, Layout, MeanZeroBasis};
use crate::error::{Error, Result};
use crate::model::{DriftField, Potential, SpaceKind};

/// Dense matrices beyond this many states are refused.
pub const MAX_STATES: usize = 20_000;

/// Periodic grid discretization on `[0, 2π)^dim`, `dim ∈ {1, 2}`.
///
/// `L` is the weighted graph Laplacian with conductance
/// `exp(−(Uᵢ + Uⱼ)/2)` between axis neighbours, scaled by `h⁻²` and divided
/// by the node weight, which makes it `π`-self-adjoint exactly. `C·∇` is
/// discretized by centered differences, then replaced by
/// `P (A − A*)/2 P`, with `A*` the `π`-adjoint and `P` the `π`-orthogonal
/// projector onto mean-zero functions, so it is exactly skew-adjoint and
/// annihilates constants.
pub fn discretize_torus(
    u: &dyn Potential,
    c: &DriftField,
    points_per_axis: usize,
) -> Result<DiscretizedSystem> {
    let dim = u.dim();
    if u.space() != SpaceKind::FlatTorus {
        return Err(Error::config("torus backend needs a potential on the flat torus"));
    }
    if !(1..=2).contains(&dim) {
        return Err(Error::config(format!("torus backend supports dim 1 or 2, got {dim}")));
    }
    if c.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: c.dim(),
        });
    }
    if points_per_axis < 8 {
        return Err(Error::config("torus backend needs at least 8 points per axis"));
    }
    let m = points_per_axis;
    let n = m.checked_pow(dim as u32).unwrap_or(usize::MAX);
    if n > MAX_STATES {
        return Err(Error::TooLarge { n, limit: MAX_STATES });
    }
    let h = TAU / m as f64;

    // State i has axis-0 index i % m and axis-1 index i / m.
    let nodes: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..dim).map(|a| ((i / m.pow(a as u32)) % m) as f64 * h).collect())
        .collect();
    let neighbour = |i: usize, axis: usize, forward: bool| -> usize {
        let stride = m.pow(axis as u32);
        let k = (i / stride) % m;
        let k2 = if forward { (k + 1) % m } else { (k + m - 1) % m };
        i - k * stride + k2 * stride
    };

    let energies: Vec<f64> = nodes.iter().map(|x| u.value(x)).collect();
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = energies.iter().map(|e| (-(e - e_min)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);

    let inv_h2 = 1.0 / (h * h);
    let mut l = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for axis in 0..dim {
            let j = neighbour(i, axis, true);
            let cond = (w[i] * w[j]).sqrt() * inv_h2;
            l[(i, i)] += cond / w[i];
            l[(j, j)] += cond / w[j];
            l[(i, j)] -= cond / w[i];
            l[(j, i)] -= cond / w[j];
        }
    }

    // Centered differences as triplets (row, col, value).
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * dim * n);
    let mut cx = vec![0.0; dim];
    for (i, x) in nodes.iter().enumerate() {
        c.eval_into(x, &mut cx);
        for axis in 0..dim {
            let v = cx[axis] / (2.0 * h);
            if v != 0.0 {
                raw.push((i, neighbour(i, axis, true), v));
                raw.push((i, neighbour(i, axis, false), -v));
            }
        }
    }

    let mut a = Mat::<f64>::zeros(n, n);
    let mut raw_dense_max: f64 = 0.0;
    for &(i, j, v) in &raw {
        // (A − D⁻¹AᵀD)/2
        a[(i, j)] += 0.5 * v;
        a[(j, i)] -= 0.5 * v * w[i] / w[j];
        raw_dense_max = raw_dense_max.max(v.abs());
    }
    project_mean_zero(&mut a, &w);

    let defect = if raw.is_empty() {
        0.0
    } else {
        let mut dense = Mat::<f64>::zeros(n, n);
        for &(i, j, v) in &raw {
            dense[(i, j)] += v;
        }
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((dense[(i, j)] - a[(i, j)]).abs());
            }
        }
        worst / raw_dense_max.max(max_abs(&a))
    };

    let constant_iso: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    Ok(DiscretizedSystem {
        unit: vec![1.0; n],
        basis: MeanZeroBasis::new(&constant_iso),
        weights: w,
        l_matrix: l,
        a_matrix: a,
        backend: Backend::TorusGrid {
            dim,
            points_per_axis: m,
            spacing: h,
        },
        antisymmetrization_defect: defect,
        layout: Layout::Grid { nodes },
    })
}

/// `A ← P A P` with `P f = f − (πᵀf) 1`.
fn project_mean_zero(a: &mut Mat<f64>, w: &[f64]) {
    let n = w.len();
    // A P = A − (A 1) πᵀ
    let row_sums: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).sum()).collect();
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] -= row_sums[i] * w[j];
        }
    }
    // P X = X − 1 (πᵀ X)
    for j in 0..n {
        let s: f64 = (0..n).map(|i| w[i] * a[(i, j)]).sum();
        for i in 0..n {
            a[(i, j)] -= s;
        }
    }
}
