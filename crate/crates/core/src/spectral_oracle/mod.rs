//! Exact finite-dimensional asymptotic variances.
//!
//! A [`DiscretizedSystem`] holds matrix versions of the reversible generator
//! `L = −Δ + ∇U·∇` and of the transport operator `A = C·∇`, with `L`
//! self-adjoint and `A` skew-adjoint in the `π`-weighted inner product. On the
//! mean-zero subspace `L` is invertible, so
//!
//! * `σ²₀(f) = 2⟨L⁻¹f, f⟩_π`,
//! * `σ²_C(f) = 2⟨(L − A)⁻¹f, f⟩_π = 2∫(1 + y²)⁻¹ μ_g(dy)`,
//!
//! where `μ_g` is the spectral measure of the Hermitian matrix
//! `B = i L^{-1/2} A L^{-1/2}` at `g = L^{-1/2} f`. [`SpectralOracle`] computes
//! the second quantity both ways and reports the discrepancy.
//!
//! Two backends build systems: a periodic grid on the flat torus
//! ([`discretize_torus`]) and an exact Hermite-Galerkin representation of
//! the Ornstein-Uhlenbeck generator with linear drift `Qx`
//! ([`discretize_gaussian_linear`]).

mod hermite;
mod operator;
mod torus;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::model::AntisymmetricMatrix;

pub use hermite::{discretize_gaussian_linear, gauss_hermite, hermite_normalized};
pub use operator::{
    build_b_operator, resolvent_variances, spectral_measure, variance_report, BEigen, BOperator,
    SpectralMeasure, SpectralOracle, VarianceReport, KERNEL_TOLERANCE, MERGE_TOLERANCE,
};
pub use torus::{discretize_torus, MAX_STATES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    TorusGrid {
        dim: usize,
        points_per_axis: usize,
        spacing: f64,
    },
    GaussianLinear {
        dim: usize,
        degree: usize,
        q: AntisymmetricMatrix,
    },
}

/// Matrix representation of `L` and `C·∇` on a finite-dimensional space of
/// functions.
///
/// Functions are coefficient vectors. The inner product is diagonal,
/// `⟨f, g⟩_π = Σᵢ wᵢ fᵢ gᵢ`; on the grid backend `w` is the discrete `π`
/// (summing to one) and the constant function is the all-ones vector, while
/// on the Hermite backend the basis is already `π`-orthonormal (`w ≡ 1`) and
/// the constant function is the first basis vector.
#[derive(Clone, Debug)]
pub struct DiscretizedSystem {
    pub(crate) weights: Vec<f64>,
    pub(crate) unit: Vec<f64>,
    pub(crate) l_matrix: Mat<f64>,
    pub(crate) a_matrix: Mat<f64>,
    pub(crate) basis: MeanZeroBasis,
    pub(crate) backend: Backend,
    pub(crate) antisymmetrization_defect: f64,
    pub(crate) layout: Layout,
}

#[derive(Clone, Debug)]
pub(crate) enum Layout {
    Grid { nodes: Vec<Vec<f64>> },
    Hermite { indices: Vec<Vec<usize>> },
}

impl DiscretizedSystem {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn pi_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Representation of the constant function `1`.
    pub fn unit(&self) -> &[f64] {
        &self.unit
    }

    pub fn l_matrix(&self) -> &Mat<f64> {
        &self.l_matrix
    }

    pub fn a_matrix(&self) -> &Mat<f64> {
        &self.a_matrix
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn mean_zero_basis(&self) -> &MeanZeroBasis {
        &self.basis
    }

    /// Relative size of the correction that made the transport matrix
    /// exactly `π`-skew-adjoint and constant-preserving (zero on the Hermite
    /// backend).
    pub fn antisymmetrization_defect(&self) -> f64 {
        self.antisymmetrization_defect
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f)
            .zip(g)
            .map(|((w, a), b)| w * a * b)
            .sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// `⟨f, 1⟩_π`.
    pub fn mean(&self, f: &[f64]) -> f64 {
        self.inner(f, &self.unit)
    }

    /// `f − ⟨f, 1⟩_π` together with the removed mean.
    pub fn center(&self, f: &[f64]) -> (Vec<f64>, f64) {
        let m = self.mean(f);
        (f.iter().zip(&self.unit).map(|(v, u)| v - m * u).collect(), m)
    }

    pub fn apply_l(&self, f: &[f64]) -> Vec<f64> {
        mat_vec(&self.l_matrix, f)
    }

    pub fn apply_a(&self, f: &[f64]) -> Vec<f64> {
        mat_vec(&self.a_matrix, f)
    }

    /// Represent a function of the state: node values on the grid, a
    /// Gauss-Hermite projection on the Hermite backend.
    pub fn represent(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        match &self.layout {
            Layout::Grid { nodes } => nodes.iter().map(|x| f(x)).collect(),
            Layout::Hermite { indices } => hermite::project(indices, &f),
        }
    }

    /// Grid nodes, row `i` being the position of state `i` (grid backend only).
    pub fn nodes(&self) -> Option<&[Vec<f64>]> {
        match &self.layout {
            Layout::Grid { nodes } => Some(nodes),
            Layout::Hermite { .. } => None,
        }
    }

    /// Multi-indices of the Hermite basis (Hermite backend only).
    pub fn hermite_indices(&self) -> Option<&[Vec<usize>]> {
        match &self.layout {
            Layout::Hermite { indices } => Some(indices),
            Layout::Grid { .. } => None,
        }
    }

    /// Coordinates of `f` in the orthonormal mean-zero basis. The constant
    /// component of `f` is dropped.
    pub fn to_mean_zero(&self, f: &[f64]) -> Vec<f64> {
        let mut iso: Vec<f64> = self.sqrt_w().zip(f).map(|(s, v)| s * v).collect();
        self.basis.reflect(&mut iso);
        iso.remove(0);
        iso
    }

    pub fn from_mean_zero(&self, coords: &[f64]) -> Vec<f64> {
        let mut iso = Vec::with_capacity(coords.len() + 1);
        iso.push(0.0);
        iso.extend_from_slice(coords);
        self.basis.reflect(&mut iso);
        self.sqrt_w().zip(iso).map(|(s, v)| v / s).collect()
    }

    /// `Eᵀ D M E` for an operator `M` that maps the mean-zero subspace to
    /// itself, where `E` is the mean-zero basis and `D = diag(w)`.
    pub fn restrict(&self, m: &Mat<f64>) -> Mat<f64> {
        let n = self.n();
        let sw: Vec<f64> = self.sqrt_w().collect();
        let mut s = Mat::<f64>::from_fn(n, n, |i, j| sw[i] * m[(i, j)] / sw[j]);
        self.basis.reflect_both_sides(&mut s);
        s.subrows(1, n - 1).subcols(1, n - 1).to_owned()
    }

    fn sqrt_w(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.iter().map(|w| w.sqrt())
    }

    /// Matrix-level structure defects, each relative to the scale of the
    /// matrix involved.
    pub fn structure_defects(&self) -> StructureDefects {
        let n = self.n();
        let w = &self.weights;
        let l_scale = max_abs(&self.l_matrix).max(1e-300);
        let a_scale = max_abs(&self.a_matrix).max(1e-300);
        let mut l_sym: f64 = 0.0;
        let mut a_skew: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let dl = w[i] * self.l_matrix[(i, j)] - w[j] * self.l_matrix[(j, i)];
                let da = w[i] * self.a_matrix[(i, j)] + w[j] * self.a_matrix[(j, i)];
                let wij = (w[i] * w[j]).sqrt();
                l_sym = l_sym.max(dl.abs() / wij);
                a_skew = a_skew.max(da.abs() / wij);
            }
        }
        let l1 = self.apply_l(&self.unit);
        let a1 = self.apply_a(&self.unit);
        let l_range = (0..n)
            .map(|j| self.inner(&self.unit, &col(&self.l_matrix, j)).abs() * w[j].sqrt().recip())
            .fold(0.0, f64::max);
        let a_range = (0..n)
            .map(|j| self.inner(&self.unit, &col(&self.a_matrix, j)).abs() * w[j].sqrt().recip())
            .fold(0.0, f64::max);
        StructureDefects {
            l_self_adjoint: l_sym / l_scale,
            a_skew_adjoint: if self.a_matrix_is_zero() { 0.0 } else { a_skew / a_scale },
            l_kills_constants: self.norm(&l1) / l_scale,
            a_kills_constants: self.norm(&a1) / a_scale,
            l_range_mean_zero: l_range / l_scale,
            a_range_mean_zero: if self.a_matrix_is_zero() { 0.0 } else { a_range / a_scale },
        }
    }

    fn a_matrix_is_zero(&self) -> bool {
        max_abs(&self.a_matrix) == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureDefects {
    pub l_self_adjoint: f64,
    pub a_skew_adjoint: f64,
    pub l_kills_constants: f64,
    pub a_kills_constants: f64,
    pub l_range_mean_zero: f64,
    pub a_range_mean_zero: f64,
}

impl StructureDefects {
    pub fn max(&self) -> f64 {
        [
            self.l_self_adjoint,
            self.a_skew_adjoint,
            self.l_kills_constants,
            self.a_kills_constants,
            self.l_range_mean_zero,
            self.a_range_mean_zero,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Orthonormal basis of the mean-zero subspace, stored as a Householder
/// reflector.
///
/// In isometric coordinates `u = √w ⊙ f` the constant function becomes the
/// unit vector `c = √w ⊙ 1`. The reflector `H` sends `c` to `±e₀`, so
/// columns `1..n` of `H` span `c^⊥` orthonormally.
#[derive(Clone, Debug)]
pub struct MeanZeroBasis {
    v: Vec<f64>,
    scale: f64,
}

impl MeanZeroBasis {
    pub(crate) fn new(constant_iso: &[f64]) -> Self {
        let mut v = constant_iso.to_vec();
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        let nrm = crate::model::norm(&v);
        v[0] += sign * nrm;
        let vv: f64 = v.iter().map(|a| a * a).sum();
        Self { v, scale: 2.0 / vv }
    }

    pub fn dim(&self) -> usize {
        self.v.len() - 1
    }

    fn reflect(&self, x: &mut [f64]) {
        let dot: f64 = self.v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        let s = self.scale * dot;
        for (xi, vi) in x.iter_mut().zip(&self.v) {
            *xi -= s * vi;
        }
    }

    fn reflect_both_sides(&self, m: &mut Mat<f64>) {
        let n = self.v.len();
        // rows: M ← H M
        let mut vt_m = vec![0.0; n];
        for j in 0..n {
            vt_m[j] = (0..n).map(|i| self.v[i] * m[(i, j)]).sum();
        }
        for j in 0..n {
            let s = self.scale * vt_m[j];
            for i in 0..n {
                m[(i, j)] -= self.v[i] * s;
            }
        }
        // columns: M ← M H
        let mut m_v = vec![0.0; n];
        for j in 0..n {
            let vj = self.v[j];
            for i in 0..n {
                m_v[i] += m[(i, j)] * vj;
            }
        }
        for j in 0..n {
            let s = self.scale * self.v[j];
            for i in 0..n {
                m[(i, j)] -= m_v[i] * s;
            }
        }
    }

    /// Explicit `n × (n−1)` basis in isometric coordinates (columns
    /// orthonormal and orthogonal to the constant direction).
    pub fn to_matrix(&self) -> Mat<f64> {
        let n = self.v.len();
        Mat::from_fn(n, n - 1, |i, j| {
            let delta = if i == j + 1 { 1.0 } else { 0.0 };
            delta - self.scale * self.v[i] * self.v[j + 1]
        })
    }
}

pub(crate) fn mat_vec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let c = m.col(j);
        for (o, v) in out.iter_mut().zip(c.iter()) {
            *o += v * xj;
        }
    }
    out
}

fn col(m: &Mat<f64>, j: usize) -> Vec<f64> {
    m.col(j).iter().copied().collect()
}

pub(crate) fn max_abs(m: &Mat<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for v in m.col(j).iter() {
            worst = worst.max(v.abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn householder_basis_is_orthonormal_complement() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let c: Vec<f64> = w.iter().map(|x: &f64| x.sqrt()).collect();
        for sign in [1.0, -1.0] {
            let cs: Vec<f64> = c.iter().map(|x| x * sign).collect();
            let b = MeanZeroBasis::new(&cs);
            let e = b.to_matrix();
            for j in 0..3 {
                let dot: f64 = (0..4).map(|i| e[(i, j)] * c[i]).sum();
                assert!(dot.abs() < 1e-15);
                for k in 0..3 {
                    let g: f64 = (0..4).map(|i| e[(i, j)] * e[(i, k)]).sum();
                    let expect = if j == k { 1.0 } else { 0.0 };
                    assert!((g - expect).abs() < 1e-15);
                }
            }
        }
    }
}
