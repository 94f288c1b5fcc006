use faer::{Mat, Side};

use super::{Backend, DiscretizedSystem, Layout, MeanZeroBasis};
use crate::error::{Error, Result};
use crate::model::AntisymmetricMatrix;

const MAX_QUADRATURE_POINTS: usize = 2_000_000;

/// Galerkin representation of the Ornstein-Uhlenbeck generator for
/// `U = |x|²/2` and of `(Qx)·∇` on tensorized normalized Hermite
/// polynomials of total degree `≤ degree`.
///
/// `L` is diagonal with the total degree as eigenvalue, and `(Qx)·∇` maps
/// each homogeneous-degree block to itself, so the truncation is exact for
/// every observable inside the span.
pub fn discretize_gaussian_linear(
    q: &AntisymmetricMatrix,
    dim: usize,
    degree: usize,
) -> Result<DiscretizedSystem> {
    if q.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: q.dim(),
        });
    }
    if dim == 0 || degree == 0 {
        return Err(Error::config("hermite backend needs dim ≥ 1 and degree ≥ 1"));
    }
    let indices = multi_indices(dim, degree);
    let n = indices.len();
    if n > super::MAX_STATES {
        return Err(Error::TooLarge {
            n,
            limit: super::MAX_STATES,
        });
    }
    let position = |alpha: &[usize]| indices.binary_search_by(|b| graded_cmp(b, alpha)).ok();

    let mut l = Mat::<f64>::zeros(n, n);
    let mut a = Mat::<f64>::zeros(n, n);
    for (col, alpha) in indices.iter().enumerate() {
        l[(col, col)] = alpha.iter().sum::<usize>() as f64;
        // (Qx)·∇ = Σᵢⱼ Qᵢⱼ xⱼ ∂ᵢ. ∂ᵢ lowers αᵢ with factor √αᵢ; xⱼ raises αⱼ
        // with factor √(αⱼ+1). The doubly-lowering terms cancel in pairs.
        for i in 0..dim {
            if alpha[i] == 0 {
                continue;
            }
            for j in 0..dim {
                let qij = q.get(i, j);
                if i == j || qij == 0.0 {
                    continue;
                }
                let mut beta = alpha.clone();
                beta[i] -= 1;
                beta[j] += 1;
                let row = position(&beta).expect("degree-preserving index is in the basis");
                a[(row, col)] += qij * ((alpha[i] * (alpha[j] + 1)) as f64).sqrt();
            }
        }
    }

    let mut unit = vec![0.0; n];
    unit[0] = 1.0;
    Ok(DiscretizedSystem {
        weights: vec![1.0; n],
        basis: MeanZeroBasis::new(&unit),
        unit,
        l_matrix: l,
        a_matrix: a,
        backend: Backend::GaussianLinear {
            dim,
            degree,
            q: q.clone(),
        },
        antisymmetrization_defect: 0.0,
        layout: Layout::Hermite { indices },
    })
}

fn graded_cmp(a: &[usize], b: &[usize]) -> std::cmp::Ordering {
    let da: usize = a.iter().sum();
    let db: usize = b.iter().sum();
    da.cmp(&db).then_with(|| b.cmp(a))
}

/// All multi-indices with `|α| ≤ degree`, by total degree then
/// reverse-lexicographic, so index 0 is the constant and indices `1..=dim`
/// are `x₁, …, x_dim`.
fn multi_indices(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, dim: usize, remaining: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=remaining {
            prefix.push(k);
            rec(prefix, dim, remaining - k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), dim, degree, &mut out);
    out.sort_by(|a, b| graded_cmp(a, b));
    out
}

/// Probabilists' Hermite polynomials normalized in `N(0, 1)`:
/// `hₙ = Heₙ/√n!`, for `n = 0..=max_degree`.
pub fn hermite_normalized(x: f64, max_degree: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(max_degree + 1);
    h.push(1.0);
    if max_degree >= 1 {
        h.push(x);
    }
    for k in 1..max_degree {
        let next = (x * h[k] - (k as f64).sqrt() * h[k - 1]) / ((k + 1) as f64).sqrt();
        h.push(next);
    }
    h
}

/// Gauss-Hermite rule for the standard normal weight (Golub-Welsch):
/// exact for polynomials of degree `≤ 2·points − 1`.
pub fn gauss_hermite(points: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = Mat::<f64>::from_fn(points, points, |i, j| {
        if i == j + 1 || j == i + 1 {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric tridiagonal eigenproblem converges");
    let nodes: Vec<f64> = eig.S().column_vector().iter().copied().collect();
    let weights = (0..points).map(|k| eig.U()[(0, k)].powi(2)).collect();
    (nodes, weights)
}

/// Coefficients `E_π[f φ_α]` by tensor Gauss-Hermite quadrature.
pub(super) fn project(indices: &[Vec<usize>], f: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let dim = indices[0].len();
    let degree = indices.iter().map(|a| a.iter().sum::<usize>()).max().unwrap_or(0);
    let mut points = degree + 24;
    while points > degree + 1 && points.saturating_pow(dim as u32) > MAX_QUADRATURE_POINTS {
        points -= 1;
    }
    let (nodes, weights) = gauss_hermite(points);
    let table: Vec<Vec<f64>> = nodes.iter().map(|&x| hermite_normalized(x, degree)).collect();

    let mut coeffs = vec![0.0; indices.len()];
    let total = points.pow(dim as u32);
    let mut x = vec![0.0; dim];
    let mut idx = vec![0usize; dim];
    for flat in 0..total {
        let mut rem = flat;
        let mut wt = 1.0;
        for a in 0..dim {
            idx[a] = rem % points;
            rem /= points;
            x[a] = nodes[idx[a]];
            wt *= weights[idx[a]];
        }
        let fx = f(&x) * wt;
        if fx == 0.0 {
            continue;
        }
        for (c, alpha) in coeffs.iter_mut().zip(indices) {
            let mut phi = 1.0;
            for a in 0..dim {
                phi *= table[idx[a]][alpha[a]];
            }
            *c += fx * phi;
        }
    }
    coeffs
}
