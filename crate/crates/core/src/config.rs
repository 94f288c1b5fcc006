//! Serializable experiment descriptions and the built-in potential catalog.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AntisymmetricMatrix, DoubleWell2d, DriftField, Gaussian, Potential, TorusCosine};
use crate::observable::Observable;
use crate::sde_sim::SimConfig;
use crate::spectral_oracle::{discretize_gaussian_linear, discretize_torus, DiscretizedSystem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PotentialSpec {
    Gaussian {
        dim: usize,
        /// Row-major covariance; identity when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cov: Option<Vec<f64>>,
    },
    DoubleWell2d {
        barrier: f64,
    },
    TorusCosine {
        dim: usize,
        amplitude: f64,
    },
}

impl PotentialSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { dim, .. } | Self::TorusCosine { dim, .. } => *dim,
            Self::DoubleWell2d { .. } => 2,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Potential>> {
        Ok(match self {
            Self::Gaussian { dim, cov: None } => Arc::new(Gaussian::standard(*dim)),
            Self::Gaussian { dim, cov: Some(c) } => Arc::new(Gaussian::with_covariance(*dim, c.clone())?),
            Self::DoubleWell2d { barrier } => {
                if !(*barrier > 0.0) {
                    return Err(Error::config("barrier must be positive"));
                }
                Arc::new(DoubleWell2d { barrier: *barrier })
            }
            Self::TorusCosine { dim, amplitude } => Arc::new(TorusCosine::uniform(*dim, *amplitude)),
        })
    }

    /// `U = |x|²/2`, the only potential the Hermite backend represents.
    pub fn is_standard_gaussian(&self) -> bool {
        match self {
            Self::Gaussian { cov: None, .. } => true,
            Self::Gaussian { dim, cov: Some(c) } => c
                .iter()
                .enumerate()
                .all(|(i, &v)| v == if i / dim == i % dim { 1.0 } else { 0.0 }),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftSpec {
    None,
    /// `C = Q∇U` with `Q` given row-major.
    Qgradu { q: Vec<f64> },
}

impl DriftSpec {
    pub fn matrix(&self, dim: usize) -> Result<AntisymmetricMatrix> {
        match self {
            Self::None => Ok(AntisymmetricMatrix::zeros(dim)),
            Self::Qgradu { q } => {
                let m = AntisymmetricMatrix::from_row_major(q.clone())?;
                if m.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: m.dim(),
                    });
                }
                Ok(m)
            }
        }
    }

    pub fn build(&self, u: Arc<dyn Potential>) -> Result<DriftField> {
        match self {
            Self::None => Ok(DriftField::zero(u.dim())),
            Self::Qgradu { .. } => DriftField::q_grad_u(self.matrix(u.dim())?, u),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Torus { points_per_axis: usize },
    Hermite { degree: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub potential: PotentialSpec,
    pub drift: DriftSpec,
    /// Perturbation scale `k` multiplying `C`.
    pub k: f64,
    pub observable: Observable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(potential: PotentialSpec, drift: DriftSpec, observable: Observable) -> Self {
        Self {
            potential,
            drift,
            k: 1.0,
            observable,
            backend: None,
            sim: None,
            output_path: None,
        }
    }

    pub fn potential(&self) -> Result<Arc<dyn Potential>> {
        self.potential.build()
    }

    /// The unscaled field `C`.
    pub fn drift(&self, u: Arc<dyn Potential>) -> Result<DriftField> {
        self.drift.build(u)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.potential.dim();
        self.observable.check_dim(dim)?;
        self.drift.matrix(dim)?;
        if !(self.k >= 0.0) || !self.k.is_finite() {
            return Err(Error::config("k must be finite and nonnegative"));
        }
        if let Some(sim) = &self.sim {
            sim.validate(dim)?;
        }
        Ok(())
    }

    /// Discretize with drift `k·C` on the configured backend.
    pub fn system(&self, k: f64) -> Result<DiscretizedSystem> {
        let dim = self.potential.dim();
        match &self.backend {
            None => Err(Error::config("no backend configured")),
            Some(BackendSpec::Hermite { degree }) => {
                if !self.potential.is_standard_gaussian() {
                    return Err(Error::config(
                        "hermite backend needs the standard gaussian potential",
                    ));
                }
                discretize_gaussian_linear(&self.drift.matrix(dim)?.scaled(k), dim, *degree)
            }
            Some(BackendSpec::Torus { points_per_axis }) => {
                let u = self.potential()?;
                let c = self.drift(u.clone())?.scaled(k);
                discretize_torus(u.as_ref(), &c, *points_per_axis)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
