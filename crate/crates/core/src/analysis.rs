//! Equality detection, worst-case comparison and the growing-perturbation
//! sweep `k ↦ σ²_{kC}(f)`.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral_oracle::{mat_vec, DiscretizedSystem, SpectralMeasure, SpectralOracle};

/// Singular values at or below this count toward a numerical kernel.
pub const KERNEL_DIM_TOLERANCE: f64 = 1e-8;
/// Relative residual threshold of [`equality_certificate`].
pub const EQUALITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSweepResult {
    pub k_values: Vec<f64>,
    pub sigma2_values: Vec<f64>,
    /// `2‖P L^{-1/2} f‖²_π`, with `P` the projector onto `Ker B`.
    pub limit_prediction: f64,
    /// Distance from 0 to the nearest nonzero atom of `μ_g`.
    pub b_gap: Option<f64>,
    pub total_mass: f64,
    pub max_weight: f64,
}

impl KSweepResult {
    /// The quantitative bound `2·mass/(1 + k²·b_gap²)` on
    /// `σ²_{kC} − limit_prediction`, or `None` without a gap.
    pub fn limit_bound(&self, k: f64, mass: f64) -> Option<f64> {
        self.b_gap.map(|g| 2.0 * mass / (1.0 + k * k * g * g))
    }

    /// Largest decrease violation `max(σ²_{k+1} − σ²_k, 0)`.
    pub fn monotonicity_violation(&self) -> f64 {
        self.sigma2_values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// `σ²_{kC}(f) = 2Σⱼ wⱼ/(1 + k²yⱼ²)` for every `k`, from the spectral
/// measure of `B` computed once at `k = 1`.
///
/// `builder(k)` must return the system for the drift `kC`; only `k = 1` is
/// requested.
pub fn sweep_k(
    builder: impl Fn(f64) -> Result<DiscretizedSystem>,
    f: &[f64],
    k_values: &[f64],
) -> Result<KSweepResult> {
    validate_k(k_values)?;
    let sys = builder(1.0)?;
    let oracle = SpectralOracle::new(&sys)?;
    Ok(sweep_from_measure(&oracle.measure(f), k_values))
}

pub fn validate_k(k_values: &[f64]) -> Result<()> {
    if k_values.first() != Some(&0.0) {
        return Err(Error::config("k values must start at 0"));
    }
    if k_values.iter().any(|k| !k.is_finite()) || k_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("k values must be finite and strictly increasing"));
    }
    Ok(())
}

/// The sweep from a spectral measure taken at `k = 1`.
pub fn sweep_from_measure(mu: &SpectralMeasure, k_values: &[f64]) -> KSweepResult {
    let sigma2_values = k_values
        .iter()
        .map(|&k| 2.0 * mu.integrate(|y| 1.0 / (1.0 + k * k * y * y)))
        .collect();
    let negligible = 1e-12 * mu.total_mass;
    let b_gap = mu
        .locations
        .iter()
        .zip(&mu.weights)
        .filter(|&(y, &w)| y.abs() > crate::spectral_oracle::MERGE_TOLERANCE && w > negligible)
        .map(|(y, _)| y.abs())
        .reduce(f64::min);
    KSweepResult {
        k_values: k_values.to_vec(),
        sigma2_values,
        limit_prediction: 2.0 * mu.mass_at_zero(),
        b_gap,
        total_mass: mu.total_mass,
        max_weight: mu.weights.iter().copied().fold(0.0, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseResult {
    /// Smallest mean-zero eigenvalue of `L`.
    pub lambda: f64,
    pub lambda_multiplicity: usize,
    pub sup_rev: f64,
    pub sup_irr: f64,
    pub strict: bool,
    /// Numerical dimension of `Ker(L − λ) ∩ Ker(C·∇)`.
    pub kernel_intersection_dim: usize,
    /// Singular values of `C·∇` restricted to `Ker(L − λ)`, ascending.
    pub singular_values: Vec<f64>,
    /// A unit function attaining `sup_irr`.
    pub maximizer: Vec<f64>,
}

/// `sup_{‖f‖_π = 1} σ²₀(f) = 2/λ` against `sup_{‖f‖_π = 1} σ²_C(f)`.
///
/// For real `f`, `σ²_C(f) = 2⟨Mf, f⟩_π = ⟨(M + M*)f, f⟩_π` with
/// `M = (L − A)⁻¹`, so the second supremum is twice the top eigenvalue of
/// the symmetric part of `M`.
pub fn worst_case(sys: &DiscretizedSystem) -> Result<WorstCaseResult> {
    let oracle = SpectralOracle::new(sys)?;
    let m = oracle.lc_inverse();
    let n = m.nrows();
    let sym = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let eig = sym.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
    let top = n - 1;
    let sup_irr = 2.0 * eig.S().column_vector()[top];
    let top_vec: Vec<f64> = (0..n).map(|i| eig.U()[(i, top)]).collect();

    let (values, vectors) = oracle.l_eigen();
    let lambda = values[0];
    let cluster = KERNEL_DIM_TOLERANCE * lambda.max(1.0);
    let multiplicity = values.iter().take_while(|&&v| v - lambda <= cluster).count();
    let w1 = vectors.subcols(0, multiplicity).to_owned();
    let aw = oracle.a_restricted() * &w1;
    let mut singular_values: Vec<f64> = aw.singular_values().map_err(|_| Error::Eigen)?;
    singular_values.sort_by(f64::total_cmp);
    let kernel_intersection_dim = singular_values
        .iter()
        .filter(|&&s| s <= KERNEL_DIM_TOLERANCE)
        .count();

    let sup_rev = 2.0 / lambda;
    Ok(WorstCaseResult {
        lambda,
        lambda_multiplicity: multiplicity,
        sup_rev,
        sup_irr,
        strict: sup_rev - sup_irr > 1e-9,
        kernel_intersection_dim,
        singular_values,
        maximizer: sys.from_mean_zero(&top_vec),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualityCertificate {
    /// `σ²_C(f) = σ²₀(f)`, i.e. `L⁻¹f ∈ Ker(C·∇)`.
    pub holds: bool,
    /// `h = L⁻¹f` when `holds`.
    pub witness: Option<Vec<f64>>,
    /// `‖A L⁻¹f‖_π`.
    pub residual: f64,
    pub f_norm: f64,
}

/// Decide whether `f ∈ L(Ker(C·∇))`. `f` is centered first.
pub fn equality_certificate(sys: &DiscretizedSystem, f: &[f64]) -> Result<EqualityCertificate> {
    let (centered, _) = sys.center(f);
    let r = sys.to_mean_zero(&centered);
    let f_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let l_r = sys.restrict(sys.l_matrix());
    let llt = l_r.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite {
        smallest: f64::NAN,
    })?;
    let rhs = Mat::<f64>::from_fn(r.len(), 1, |i, _| r[i]);
    let h = llt.solve(&rhs);
    let h: Vec<f64> = (0..r.len()).map(|i| h[(i, 0)]).collect();
    let ah = mat_vec(&sys.restrict(sys.a_matrix()), &h);
    let residual = ah.iter().map(|v| v * v).sum::<f64>().sqrt();
    let holds = residual <= EQUALITY_TOLERANCE * f_norm;
    Ok(EqualityCertificate {
        holds,
        witness: holds.then(|| sys.from_mean_zero(&h)),
        residual,
        f_norm,
    })
}
