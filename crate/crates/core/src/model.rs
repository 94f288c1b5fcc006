//! Target potentials, perturbation drifts and runtime assumption checks.
//!
//! A [`Potential`] `U` defines the target `pi ∝ exp(-U)`. A [`DriftField`] `C`
//! perturbs the reversible Langevin dynamics; it preserves `pi` when it is
//! weighted-divergence-free, `div(C exp(-U)) = 0`, which pointwise reads
//! `div C = C·∇U`. The canonical construction is `C = Q∇U` for an
//! antisymmetric matrix `Q`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Euclidean,
    /// `[0, 2π)^dim` with periodic identification.
    FlatTorus,
}

/// An energy function with analytic first and second derivatives.
///
/// Implementations must be re-entrant: the samplers call them from several
/// threads at once.
pub trait Potential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn space(&self) -> SpaceKind;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    /// Row-major `dim × dim` Hessian.
    fn hessian_into(&self, x: &[f64], out: &mut [f64]);

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut h = vec![0.0; d * d];
        self.hessian_into(x, &mut h);
        h
    }
}

/// `U(x) = ½ xᵀ Σ⁻¹ x`.
#[derive(Clone, Debug)]
pub struct Gaussian {
    dim: usize,
    covariance: Vec<f64>,
    precision: Vec<f64>,
}

impl Gaussian {
    pub fn standard(dim: usize) -> Self {
        let mut eye = vec![0.0; dim * dim];
        for i in 0..dim {
            eye[i * dim + i] = 1.0;
        }
        Self {
            dim,
            covariance: eye.clone(),
            precision: eye,
        }
    }

    /// Build from a row-major symmetric positive definite covariance.
    pub fn with_covariance(dim: usize, covariance: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("gaussian dimension must be positive"));
        }
        if covariance.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: covariance.len(),
            });
        }
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (covariance[i * dim + j], covariance[j * dim + i]);
                if (a - b).abs() > 1e-12 * (a.abs() + b.abs()).max(1.0) {
                    return Err(Error::config("covariance must be symmetric"));
                }
            }
        }
        let cov = Mat::<f64>::from_fn(dim, dim, |i, j| covariance[i * dim + j]);
        let llt = cov
            .llt(Side::Lower)
            .map_err(|_| Error::config("covariance must be positive definite"))?;
        let inv = llt.inverse();
        let precision = (0..dim * dim).map(|k| inv[(k / dim, k % dim)]).collect();
        Ok(Self {
            dim,
            covariance,
            precision,
        })
    }

    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn precision(&self) -> &[f64] {
        &self.precision
    }
}

impl Potential for Gaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn space(&self) -> SpaceKind {
        SpaceKind::Euclidean
    }

    fn value(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            let row = &self.precision[i * d..(i + 1) * d];
            acc += x[i] * row.iter().zip(x).map(|(p, xj)| p * xj).sum::<f64>();
        }
        0.5 * acc
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let row = &self.precision[i * d..(i + 1) * d];
            *o = row.iter().zip(x).map(|(p, xj)| p * xj).sum();
        }
    }

    fn hessian_into(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.precision);
    }
}

/// `U(x) = barrier·(x₁² − 1)² + x₂²/2`.
#[derive(Clone, Debug)]
pub struct DoubleWell2d {
    pub barrier: f64,
}

impl Potential for DoubleWell2d {
    fn dim(&self) -> usize {
        2
    }

    fn space(&self) -> SpaceKind {
        SpaceKind::Euclidean
    }

    fn value(&self, x: &[f64]) -> f64 {
        let w = x[0] * x[0] - 1.0;
        self.barrier * w * w + 0.5 * x[1] * x[1]
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 4.0 * self.barrier * x[0] * (x[0] * x[0] - 1.0);
        out[1] = x[1];
    }

    fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.barrier * (12.0 * x[0] * x[0] - 4.0);
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = 1.0;
    }
}

/// `U(x) = Σᵢ aᵢ cos xᵢ` on the flat torus.
#[derive(Clone, Debug)]
pub struct TorusCosine {
    amplitudes: Vec<f64>,
}

impl TorusCosine {
    /// Same amplitude on every axis.
    pub fn uniform(dim: usize, amplitude: f64) -> Self {
        Self {
            amplitudes: vec![amplitude; dim],
        }
    }

    /// One amplitude per axis; a zero amplitude leaves that axis flat.
    pub fn per_axis(amplitudes: Vec<f64>) -> Self {
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }
}

impl Potential for TorusCosine {
    fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    fn space(&self) -> SpaceKind {
        SpaceKind::FlatTorus
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.amplitudes.iter().zip(x).map(|(a, xi)| a * xi.cos()).sum()
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, a), xi) in out.iter_mut().zip(&self.amplitudes).zip(x) {
            *o = -a * xi.sin();
        }
    }

    fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.fill(0.0);
        for i in 0..d {
            out[i * d + i] = -self.amplitudes[i] * x[i].cos();
        }
    }
}

/// Unnormalized stationary density `exp(-U(x))`.
pub fn stationary_density_unnorm(u: &dyn Potential, x: &[f64]) -> f64 {
    (-u.value(x)).exp()
}

/// A square matrix `q` with `q + qᵀ = 0` exactly, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AntisymmetricMatrixRepr", into = "AntisymmetricMatrixRepr")]
pub struct AntisymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AntisymmetricMatrixRepr {
    dim: usize,
    entries: Vec<f64>,
}

impl TryFrom<AntisymmetricMatrixRepr> for AntisymmetricMatrix {
    type Error = Error;

    fn try_from(r: AntisymmetricMatrixRepr) -> Result<Self> {
        Self::new(r.dim, r.entries)
    }
}

impl From<AntisymmetricMatrix> for AntisymmetricMatrixRepr {
    fn from(q: AntisymmetricMatrix) -> Self {
        Self {
            dim: q.dim,
            entries: q.entries,
        }
    }
}

impl AntisymmetricMatrix {
    /// Rejects (never repairs) matrices that are not exactly antisymmetric.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let mut defect: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                defect = defect.max((entries[i * dim + j] + entries[j * dim + i]).abs());
            }
        }
        if defect != 0.0 || entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotAntisymmetric { defect });
        }
        Ok(Self { dim, entries })
    }

    /// Infer the dimension from a row-major entry list of square length.
    pub fn from_row_major(entries: Vec<f64>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() {
            return Err(Error::config(format!(
                "{} entries do not form a square matrix",
                entries.len()
            )));
        }
        Self::new(dim, entries)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    /// `[[0, a], [-a, 0]]`.
    pub fn rotation(a: f64) -> Self {
        Self {
            dim: 2,
            entries: vec![0.0, a, -a, 0.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * k).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(d) {
            *o = self.entries[i * d..(i + 1) * d]
                .iter()
                .zip(v)
                .map(|(q, x)| q * x)
                .sum();
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Operator 2-norm (largest singular value).
    pub fn spectral_norm(&self) -> f64 {
        let d = self.dim;
        if d == 0 || self.is_zero() {
            return 0.0;
        }
        let m = Mat::<f64>::from_fn(d, d, |i, j| self.get(i, j));
        m.singular_values()
            .ok()
            .and_then(|s| s.first().copied())
            .unwrap_or_else(|| self.frobenius_norm())
    }
}

type FieldFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A user-supplied vector field with its analytic divergence.
#[derive(Clone)]
pub struct CustomField {
    pub label: String,
    eval: Arc<FieldFn>,
    divergence: Arc<ScalarFn>,
}

impl fmt::Debug for CustomField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomField")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum DriftKind {
    Zero,
    QGradU {
        q: AntisymmetricMatrix,
        base: Arc<dyn Potential>,
    },
    Custom(CustomField),
}

/// The perturbation `C` added to the reversible drift.
#[derive(Clone, Debug)]
pub struct DriftField {
    dim: usize,
    kind: DriftKind,
}

impl DriftField {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            kind: DriftKind::Zero,
        }
    }

    /// `C = Q∇U`. Its divergence `tr(Q D²U)` vanishes identically and is
    /// returned as exactly zero.
    pub fn q_grad_u(q: AntisymmetricMatrix, u: Arc<dyn Potential>) -> Result<Self> {
        if q.dim() != u.dim() {
            return Err(Error::DimensionMismatch {
                expected: u.dim(),
                got: q.dim(),
            });
        }
        Ok(Self {
            dim: q.dim(),
            kind: DriftKind::QGradU { q, base: u },
        })
    }

    pub fn custom<F, D>(dim: usize, label: impl Into<String>, eval: F, divergence: D) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        D: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            dim,
            kind: DriftKind::Custom(CustomField {
                label: label.into(),
                eval: Arc::new(eval),
                divergence: Arc::new(divergence),
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `k·C`.
    pub fn scaled(&self, k: f64) -> Self {
        let kind = match &self.kind {
            DriftKind::Zero => DriftKind::Zero,
            DriftKind::QGradU { q, base } => DriftKind::QGradU {
                q: q.scaled(k),
                base: base.clone(),
            },
            DriftKind::Custom(c) => {
                let (eval, div) = (c.eval.clone(), c.divergence.clone());
                DriftKind::Custom(CustomField {
                    label: format!("{}*{k}", c.label),
                    eval: Arc::new(move |x: &[f64], out: &mut [f64]| {
                        eval(x, out);
                        out.iter_mut().for_each(|v| *v *= k);
                    }),
                    divergence: Arc::new(move |x: &[f64]| k * div(x)),
                })
            }
        };
        Self { dim: self.dim, kind }
    }

    pub fn kind(&self) -> &DriftKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            DriftKind::Zero => true,
            DriftKind::QGradU { q, .. } => q.is_zero(),
            DriftKind::Custom(_) => false,
        }
    }

    /// The antisymmetric matrix behind a `Q∇U` field.
    pub fn q_matrix(&self) -> Option<&AntisymmetricMatrix> {
        match &self.kind {
            DriftKind::QGradU { q, .. } => Some(q),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            DriftKind::Zero => "none".into(),
            DriftKind::QGradU { q, .. } => format!("qgradu{:?}", q.entries()),
            DriftKind::Custom(c) => c.label.clone(),
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            DriftKind::Zero => out.fill(0.0),
            DriftKind::QGradU { q, base } => {
                let g = base.gradient(x);
                q.apply_into(&g, out);
            }
            DriftKind::Custom(c) => (c.eval)(x, out),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    pub fn divergence(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DriftKind::Zero | DriftKind::QGradU { .. } => 0.0,
            DriftKind::Custom(c) => (c.divergence)(x),
        }
    }
}

/// Central-difference gradient of `u`.
pub fn finite_difference_gradient(u: &dyn Potential, x: &[f64], step: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + step;
            let up = u.value(&y);
            y[i] = x[i] - step;
            let down = u.value(&y);
            y[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Central-difference divergence of `c`.
pub fn finite_difference_divergence(c: &DriftField, x: &[f64], step: f64) -> f64 {
    let mut y = x.to_vec();
    let mut acc = 0.0;
    for i in 0..x.len() {
        y[i] = x[i] + step;
        let up = c.eval(&y)[i];
        y[i] = x[i] - step;
        let down = c.eval(&y)[i];
        y[i] = x[i];
        acc += (up - down) / (2.0 * step);
    }
    acc
}

/// Largest `|hᵢⱼ − hⱼᵢ|` relative to the Hessian's largest entry.
pub fn hessian_asymmetry(u: &dyn Potential, x: &[f64]) -> f64 {
    let d = u.dim();
    let h = u.hessian(x);
    let scale = h.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..i {
            worst = worst.max((h[i * d + j] - h[j * d + i]).abs());
        }
    }
    worst / scale
}

/// Probe points for [`check_assumptions`]: uniform on the torus, a scaled
/// standard normal cloud in Euclidean space.
pub fn default_probes(u: &dyn Potential, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = u.dim();
    (0..count)
        .map(|_| match u.space() {
            SpaceKind::FlatTorus => (0..d).map(|_| rng.random::<f64>() * TAU).collect(),
            SpaceKind::Euclidean => (0..d)
                .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthMargin {
    pub epsilon: f64,
    /// Smallest `c_ε` making `|C·∇U| + ‖D²U‖ ≤ ε|∇U|² + c_ε` hold on the probes.
    pub c_epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialTrend {
    pub rays: usize,
    pub monotone_rays: usize,
    pub radii: Vec<f64>,
    /// Smallest `|∇U|` at the outermost radius over all rays.
    pub min_outer_gradient: f64,
}

/// Diagnostic evaluation of the sampler assumptions on a finite probe set.
///
/// Every quantity is "probe-verified": it holds on the listed points and
/// rays, nothing more.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `max |div C − C·∇U|`, i.e. `exp(U)|div(C exp(-U))|`.
    pub a3_residual: f64,
    pub a4_margin: Vec<GrowthMargin>,
    /// `sup |C| / (|∇U| + 1)`.
    pub a5_ratio: f64,
    /// Growth of `|∇U|` along rays. `None` on the torus where it is vacuous.
    pub a6_trend: Option<RadialTrend>,
    pub probe_points: Vec<Vec<f64>>,
    pub verification: String,
}

pub const DEFAULT_EPSILONS: [f64; 3] = [1.0, 0.5, 0.1];

pub fn check_assumptions(
    u: &dyn Potential,
    c: &DriftField,
    probes: &[Vec<f64>],
) -> Result<AssumptionReport> {
    let d = u.dim();
    if c.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: c.dim(),
        });
    }
    if probes.is_empty() {
        return Err(Error::config("probe set is empty"));
    }
    if let Some(p) = probes.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.len(),
        });
    }

    let mut a3: f64 = 0.0;
    let mut a5: f64 = 0.0;
    let mut worst_c = vec![f64::NEG_INFINITY; DEFAULT_EPSILONS.len()];
    let mut cx = vec![0.0; d];
    let mut gx = vec![0.0; d];
    let mut hx = vec![0.0; d * d];
    for x in probes {
        u.gradient_into(x, &mut gx);
        u.hessian_into(x, &mut hx);
        c.eval_into(x, &mut cx);
        let c_dot_grad: f64 = cx.iter().zip(&gx).map(|(a, b)| a * b).sum();
        a3 = a3.max((c.divergence(x) - c_dot_grad).abs());

        let grad_norm = norm(&gx);
        a5 = a5.max(norm(&cx) / (grad_norm + 1.0));

        let hess_norm = norm(&hx);
        for (w, eps) in worst_c.iter_mut().zip(DEFAULT_EPSILONS) {
            *w = w.max(c_dot_grad.abs() + hess_norm - eps * grad_norm * grad_norm);
        }
    }

    let a6_trend = match u.space() {
        SpaceKind::FlatTorus => None,
        SpaceKind::Euclidean => Some(radial_trend(u, probes)),
    };

    Ok(AssumptionReport {
        a3_residual: a3,
        a4_margin: DEFAULT_EPSILONS
            .iter()
            .zip(worst_c)
            .map(|(&epsilon, c_epsilon)| GrowthMargin {
                epsilon,
                c_epsilon: c_epsilon.max(0.0),
            })
            .collect(),
        a5_ratio: a5,
        a6_trend,
        probe_points: probes.to_vec(),
        verification: "probe-verified".into(),
    })
}

fn radial_trend(u: &dyn Potential, probes: &[Vec<f64>]) -> RadialTrend {
    let radii: Vec<f64> = (0..8).map(|j| f64::powi(2.0, j)).collect();
    let mut monotone = 0;
    let mut rays = 0;
    let mut min_outer = f64::INFINITY;
    for p in probes {
        let r = norm(p);
        if r == 0.0 {
            continue;
        }
        rays += 1;
        let mut prev = f64::NEG_INFINITY;
        let mut ok = true;
        let mut last = 0.0;
        for &rad in &radii {
            let y: Vec<f64> = p.iter().map(|v| v / r * rad).collect();
            let g = norm(&u.gradient(&y));
            if g < prev {
                ok = false;
            }
            prev = g;
            last = g;
        }
        if ok {
            monotone += 1;
        }
        min_outer = min_outer.min(last);
    }
    RadialTrend {
        rays,
        monotone_rays: monotone,
        radii,
        min_outer_gradient: if rays == 0 { 0.0 } else { min_outer },
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}
