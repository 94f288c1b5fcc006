use faer::linalg::solvers::{DenseSolveCore, PartialPivLu, Solve};
use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};

use super::DiscretizedSystem;
use crate::error::{Error, Result};

/// Eigenvalues of `B` closer than this are pooled into one atom.
pub const MERGE_TOLERANCE: f64 = 1e-9;

/// `L⁻¹f` counts as lying in `Ker(C·∇)` when `‖A L⁻¹ f‖_π ≤ KERNEL_TOLERANCE·‖f‖_π`.
pub const KERNEL_TOLERANCE: f64 = 1e-9;

/// The Hermitian operator `B = i V A V` on the mean-zero subspace, with
/// `V = L^{-1/2}`, in orthonormal mean-zero coordinates.
#[derive(Clone, Debug)]
pub struct BOperator {
    pub matrix: Mat<c64>,
}

impl BOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |Bᵢⱼ − conj(Bⱼᵢ)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigen(&self) -> Result<BEigen> {
        let eig = self
            .matrix
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::Eigen)?;
        Ok(BEigen {
            values: eig.S().column_vector().iter().map(|z| z.re).collect(),
            vectors: eig.U().to_owned(),
        })
    }
}

/// Eigendecomposition `B = Σ yⱼ uⱼ uⱼᴴ`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct BEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

impl BEigen {
    /// Spectral measure of `B` at the real vector `g` (mean-zero coordinates).
    pub fn measure(&self, g: &[f64]) -> SpectralMeasure {
        let n = self.values.len();
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(n);
        for j in 0..n {
            let u = self.vectors.col(j);
            let mut proj = c64::new(0.0, 0.0);
            for (ui, gi) in u.iter().zip(g) {
                proj += ui.conj() * *gi;
            }
            atoms.push((self.values[j], proj.norm_sqr()));
        }
        SpectralMeasure::from_atoms(atoms)
    }
}

/// Discrete spectral measure: atoms at eigenvalues of `B`, weights equal to
/// the squared norms of the eigenprojections of `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    pub locations: Vec<f64>,
    pub weights: Vec<f64>,
    pub total_mass: f64,
}

impl SpectralMeasure {
    /// Sort atoms by location and pool runs of eigenvalues within
    /// [`MERGE_TOLERANCE`] of their neighbour.
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut locations = Vec::new();
        let mut weights = Vec::new();
        let mut i = 0;
        while i < atoms.len() {
            let mut j = i + 1;
            while j < atoms.len() && atoms[j].0 - atoms[j - 1].0 <= MERGE_TOLERANCE {
                j += 1;
            }
            let group = &atoms[i..j];
            let loc = group.iter().map(|a| a.0).sum::<f64>() / group.len() as f64;
            locations.push(loc);
            weights.push(group.iter().map(|a| a.1).sum());
            i = j;
        }
        let total_mass = weights.iter().sum();
        Self {
            locations,
            weights,
            total_mass,
        }
    }

    /// `∫ φ dμ`.
    pub fn integrate(&self, phi: impl Fn(f64) -> f64) -> f64 {
        self.locations
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * phi(y))
            .sum()
    }

    /// Mass of the atom at the origin.
    pub fn mass_at_zero(&self) -> f64 {
        self.locations
            .iter()
            .zip(&self.weights)
            .filter(|(y, _)| y.abs() <= MERGE_TOLERANCE)
            .map(|(_, w)| w)
            .sum()
    }

    /// `max_y |μ({y}) − μ({−y})|`.
    pub fn asymmetry(&self) -> f64 {
        let mirrored = SpectralMeasure::from_atoms(
            self.locations
                .iter()
                .zip(&self.weights)
                .map(|(&y, &w)| (-y, w))
                .collect(),
        );
        self.locations
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| {
                let other: f64 = mirrored
                    .locations
                    .iter()
                    .zip(&mirrored.weights)
                    .filter(|(m, _)| (**m - y).abs() <= 10.0 * MERGE_TOLERANCE)
                    .map(|(_, w)| *w)
                    .sum();
                (w - other).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Restricted generators and the factorizations shared by every query
/// against one [`DiscretizedSystem`].
#[derive(Debug)]
pub struct SpectralOracle<'a> {
    sys: &'a DiscretizedSystem,
    l_r: Mat<f64>,
    a_r: Mat<f64>,
    l_values: Vec<f64>,
    l_vectors: Mat<f64>,
    v: Mat<f64>,
    lc_lu: PartialPivLu<f64>,
    b: BOperator,
    b_eig: BEigen,
}

impl<'a> SpectralOracle<'a> {
    pub fn new(sys: &'a DiscretizedSystem) -> Result<Self> {
        let l_r = sys.restrict(sys.l_matrix());
        let a_r = sys.restrict(sys.a_matrix());
        let (l_values, l_vectors) = positive_eigen(&l_r)?;
        let v = inverse_sqrt(&l_values, &l_vectors);
        let lc_lu = lu_checked(&(&l_r - &a_r))?;
        let b = b_from_parts(&v, &a_r);
        let b_eig = b.eigen()?;
        Ok(Self {
            sys,
            l_r,
            a_r,
            l_values,
            l_vectors,
            v,
            lc_lu,
            b,
            b_eig,
        })
    }

    pub fn system(&self) -> &DiscretizedSystem {
        self.sys
    }

    /// Restricted `L` in orthonormal mean-zero coordinates.
    pub fn l_restricted(&self) -> &Mat<f64> {
        &self.l_r
    }

    /// Restricted `C·∇` in orthonormal mean-zero coordinates.
    pub fn a_restricted(&self) -> &Mat<f64> {
        &self.a_r
    }

    /// Eigenvalues of restricted `L`, ascending, with orthonormal eigenvectors.
    pub fn l_eigen(&self) -> (&[f64], &Mat<f64>) {
        (&self.l_values, &self.l_vectors)
    }

    /// `V = L^{-1/2}` on the mean-zero subspace.
    pub fn v(&self) -> &Mat<f64> {
        &self.v
    }

    pub fn b(&self) -> &BOperator {
        &self.b
    }

    pub fn b_eigen(&self) -> &BEigen {
        &self.b_eig
    }

    /// Smallest eigenvalue of `L` on the mean-zero subspace.
    pub fn gap_l(&self) -> f64 {
        self.l_values[0]
    }

    /// `min Re σ(L − A)` on the mean-zero subspace.
    pub fn min_real_spectrum_lc(&self) -> Result<f64> {
        let lc = &self.l_r - &self.a_r;
        let ev = lc.eigenvalues().map_err(|_| Error::Eigen)?;
        Ok(ev.iter().map(|z| z.re).fold(f64::INFINITY, f64::min))
    }

    /// `‖V L V − I‖_max`.
    pub fn vsv_defect(&self) -> f64 {
        let vlv = &self.v * &self.l_r * &self.v;
        let n = vlv.nrows();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((vlv[(i, j)] - id).abs());
            }
        }
        worst
    }

    /// Solve `(L − A) h = r` in mean-zero coordinates.
    pub fn solve_lc(&self, r: &[f64]) -> Vec<f64> {
        solve(&self.lc_lu, r)
    }

    /// `(L − A)⁻¹` in mean-zero coordinates.
    pub fn lc_inverse(&self) -> Mat<f64> {
        self.lc_lu.inverse()
    }

    /// `L⁻¹ r` in mean-zero coordinates.
    pub fn solve_l(&self, r: &[f64]) -> Vec<f64> {
        let g = super::mat_vec(&self.v, r);
        super::mat_vec(&self.v, &g)
    }

    /// `g = V r` for mean-zero coordinates `r`.
    pub fn g_vector(&self, r: &[f64]) -> Vec<f64> {
        super::mat_vec(&self.v, r)
    }

    pub fn measure(&self, f: &[f64]) -> SpectralMeasure {
        let (centered, _) = self.sys.center(f);
        let r = self.sys.to_mean_zero(&centered);
        self.b_eig.measure(&self.g_vector(&r))
    }

    pub fn report(&self, f: &[f64]) -> VarianceReport {
        let (centered, shift) = self.sys.center(f);
        let r = self.sys.to_mean_zero(&centered);
        let f_norm = dot(&r, &r).sqrt();

        let h = self.solve_lc(&r);
        let route_resolvent = 2.0 * dot(&r, &h);

        let g = self.g_vector(&r);
        let sigma2_rev = 2.0 * dot(&g, &g);
        let mu = self.b_eig.measure(&g);
        let route_spectral = 2.0 * mu.integrate(|y| 1.0 / (1.0 + y * y));

        let l_inv_f = super::mat_vec(&self.v, &g);
        let a_l_inv_f = super::mat_vec(&self.a_r, &l_inv_f);
        let kernel_residual = dot(&a_l_inv_f, &a_l_inv_f).sqrt();
        let kernel_flag = kernel_residual <= KERNEL_TOLERANCE * f_norm;

        let scale = route_resolvent.abs().max(route_spectral.abs());
        let route_discrepancy = if scale == 0.0 {
            0.0
        } else {
            (route_resolvent - route_spectral).abs() / scale
        };
        VarianceReport {
            sigma2_rev,
            sigma2_irr: route_resolvent,
            route_resolvent,
            route_spectral,
            equality_gap: sigma2_rev - route_resolvent,
            kernel_flag,
            kernel_residual,
            route_discrepancy,
            centering: shift,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// `σ²₀(f) = 2⟨f, L⁻¹f⟩_π`.
    pub sigma2_rev: f64,
    /// `σ²_C(f)`, taken from the resolvent route.
    pub sigma2_irr: f64,
    /// `2⟨(L − A)⁻¹f, f⟩_π` by dense factorization.
    pub route_resolvent: f64,
    /// `2∫(1 + y²)⁻¹ μ_g(dy)`.
    pub route_spectral: f64,
    pub equality_gap: f64,
    /// Whether `L⁻¹f ∈ Ker(C·∇)` numerically.
    pub kernel_flag: bool,
    /// `‖A L⁻¹ f‖_π`.
    pub kernel_residual: f64,
    /// Relative difference of the two routes.
    pub route_discrepancy: f64,
    /// The mean `⟨f, 1⟩_π` removed before solving.
    pub centering: f64,
}

/// `B = i V A V` built from a [`DiscretizedSystem`].
pub fn build_b_operator(sys: &DiscretizedSystem) -> Result<BOperator> {
    let l_r = sys.restrict(sys.l_matrix());
    let a_r = sys.restrict(sys.a_matrix());
    let (vals, vecs) = positive_eigen(&l_r)?;
    Ok(b_from_parts(&inverse_sqrt(&vals, &vecs), &a_r))
}

pub fn spectral_measure(b: &BOperator, g: &[f64]) -> Result<SpectralMeasure> {
    Ok(b.eigen()?.measure(g))
}

pub fn variance_report(sys: &DiscretizedSystem, f: &[f64]) -> Result<VarianceReport> {
    Ok(SpectralOracle::new(sys)?.report(f))
}

/// `(σ²₀(f), σ²_C(f))` by dense Cholesky and LU solves only, for systems too
/// large for the eigendecompositions behind [`SpectralOracle`].
pub fn resolvent_variances(sys: &DiscretizedSystem, f: &[f64]) -> Result<(f64, f64)> {
    let (centered, _) = sys.center(f);
    let r = sys.to_mean_zero(&centered);
    let l_r = sys.restrict(sys.l_matrix());
    let a_r = sys.restrict(sys.a_matrix());
    let llt = l_r.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite {
        smallest: f64::NAN,
    })?;
    let rev = 2.0 * dot(&r, &solve(&llt, &r));
    let lu = lu_checked(&(&l_r - &a_r))?;
    let irr = 2.0 * dot(&r, &solve(&lu, &r));
    Ok((rev, irr))
}

fn b_from_parts(v: &Mat<f64>, a_r: &Mat<f64>) -> BOperator {
    let k = v * a_r * v;
    let n = k.nrows();
    // k is exactly antisymmetric in exact arithmetic; enforce it so that B
    // is Hermitian to rounding.
    let matrix = Mat::<c64>::from_fn(n, n, |i, j| c64::new(0.0, 0.5 * (k[(i, j)] - k[(j, i)])));
    BOperator { matrix }
}

fn positive_eigen(l_r: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let eig = l_r.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
    let values: Vec<f64> = eig.S().column_vector().iter().copied().collect();
    let smallest = values.first().copied().unwrap_or(0.0);
    let largest = values.last().copied().unwrap_or(0.0);
    if smallest <= 1e-13 * largest.abs().max(1.0) {
        return Err(Error::NotPositiveDefinite { smallest });
    }
    Ok((values, eig.U().to_owned()))
}

fn inverse_sqrt(values: &[f64], vectors: &Mat<f64>) -> Mat<f64> {
    let n = values.len();
    let scaled = Mat::<f64>::from_fn(n, n, |i, j| vectors[(i, j)] / values[j].sqrt());
    let v = &scaled * vectors.transpose();
    // Symmetrize away rounding.
    Mat::from_fn(n, n, |i, j| 0.5 * (v[(i, j)] + v[(j, i)]))
}

fn lu_checked(m: &Mat<f64>) -> Result<PartialPivLu<f64>> {
    let lu = m.partial_piv_lu();
    let u = lu.U();
    let n = u.nrows();
    let scale = super::max_abs(m).max(1e-300);
    let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-14 * scale) {
        return Err(Error::SingularGenerator);
    }
    Ok(lu)
}

fn solve(lu: &impl Solve<f64>, r: &[f64]) -> Vec<f64> {
    let rhs = Mat::<f64>::from_fn(r.len(), 1, |i, _| r[i]);
    let x = lu.solve(&rhs);
    (0..r.len()).map(|i| x[(i, 0)]).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
