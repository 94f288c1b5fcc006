//! Monte Carlo estimates of the asymptotic variance
//! `σ²(f) = lim_t t·Var(t⁻¹∫₀ᵗ f(X_s) ds)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DriftField, Potential};
use crate::sde_sim::{time_average, SimConfig, Trajectory, RNG_NAME};

/// Batch-means estimators need at least this many batches.
pub const MIN_BATCHES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BatchMeans,
    OverlappingBatchMeans,
    ReplicatedClt,
}

/// Standardized third and fourth moments of the scaled chain averages
/// `√T (āᵢ − ā)`; both near zero for a Gaussian limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityDiagnostic {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Set when all averages coincide and the moments are undefined.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub point_estimate: f64,
    pub stderr: f64,
    pub method: Method,
    pub batch_length: f64,
    pub total_time: f64,
    pub n_chains: usize,
    /// The empirical mean of `f` used for centering.
    pub centering: f64,
    pub step_size: f64,
    pub rng: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normality: Option<NormalityDiagnostic>,
    /// Set by [`bias_check`] when halving `dt` moves the estimate by more
    /// than one standard error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias_flag: Option<bool>,
}

/// Mean and centered second moment with an associative merge (Chan et al.).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn from_value(x: f64) -> Self {
        Self {
            count: 1,
            mean: x,
            m2: 0.0,
        }
    }

    pub fn merge(self, other: Self) -> Self {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / n;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64) * (other.count as f64) / n;
        Self {
            count: self.count + other.count,
            mean,
            m2,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        iter.into_iter()
            .map(Moments::from_value)
            .fold(Moments::default(), Moments::merge)
    }
}

/// Default batch length `√T`.
pub fn default_batch_length(total_time: f64) -> f64 {
    total_time.sqrt()
}

fn batch_setup(traj: &Trajectory, batch_length: f64) -> Result<(usize, usize)> {
    let total = traj.total_time();
    if !(batch_length > 0.0) {
        return Err(Error::config("batch length must be positive"));
    }
    let per_batch = (batch_length / traj.step_size).round().max(1.0) as usize;
    let n_batches = traj.observable_values.len() / per_batch;
    if n_batches < MIN_BATCHES {
        return Err(Error::HorizonTooShort {
            min_time: MIN_BATCHES as f64 * batch_length,
            total_time: total,
        });
    }
    Ok((per_batch, n_batches))
}

/// Non-overlapping batch means over the trajectory's recorded `f` values.
///
/// The estimate is `B·s²` where `s²` is the sample variance of the batch
/// means; the standard error uses the chi-square approximation with
/// `n_batches − 1` degrees of freedom.
pub fn batch_means(traj: &Trajectory, batch_length: f64) -> Result<VarianceEstimate> {
    let (per_batch, n_batches) = batch_setup(traj, batch_length)?;
    let b = per_batch as f64 * traj.step_size;
    let values = &traj.observable_values[..per_batch * n_batches];
    let moments: Moments = values
        .chunks_exact(per_batch)
        .map(|c| c.iter().sum::<f64>() / per_batch as f64)
        .collect();
    let estimate = b * moments.variance();
    Ok(VarianceEstimate {
        point_estimate: estimate,
        stderr: estimate * (2.0 / (n_batches - 1) as f64).sqrt(),
        method: Method::BatchMeans,
        batch_length: b,
        total_time: values.len() as f64 * traj.step_size,
        n_chains: 1,
        centering: moments.mean,
        step_size: traj.step_size,
        rng: RNG_NAME.into(),
        normality: None,
        bias_flag: None,
    })
}

/// Overlapping batch means: every window of length `B` contributes.
pub fn overlapping_batch_means(traj: &Trajectory, batch_length: f64) -> Result<VarianceEstimate> {
    let (per_batch, n_batches) = batch_setup(traj, batch_length)?;
    let values = &traj.observable_values;
    let n = values.len();
    let b = per_batch as f64 * traj.step_size;
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut window: f64 = values[..per_batch].iter().sum();
    let mut acc = 0.0;
    let windows = n - per_batch + 1;
    for start in 0..windows {
        if start > 0 {
            window += values[start + per_batch - 1] - values[start - 1];
        }
        let d = window / per_batch as f64 - mean;
        acc += d * d;
    }
    let nf = n as f64;
    let bf = per_batch as f64;
    let estimate = (b * nf * acc / ((nf - bf + 1.0) * (nf - bf))).max(0.0);
    // OBM has variance about 4/3 of the non-overlapping estimator's.
    let stderr = estimate * (4.0 / 3.0 * 2.0 / (n_batches - 1) as f64).sqrt();
    Ok(VarianceEstimate {
        point_estimate: estimate,
        stderr,
        method: Method::OverlappingBatchMeans,
        batch_length: b,
        total_time: nf * traj.step_size,
        n_chains: 1,
        centering: mean,
        step_size: traj.step_size,
        rng: RNG_NAME.into(),
        normality: None,
        bias_flag: None,
    })
}

/// Seeds `cfg.seed, cfg.seed + 1, …` for the independent chains.
pub fn chain_seeds(base: u64, n_chains: usize) -> Vec<u64> {
    (0..n_chains as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Time averages of independent chains, one per seed, in seed order.
pub fn chain_averages(
    u: &dyn Potential,
    c: &DriftField,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    cfg: &SimConfig,
    n_chains: usize,
) -> Result<Vec<f64>> {
    chain_seeds(cfg.seed, n_chains)
        .into_par_iter()
        .map(|seed| time_average(u, c, f, &cfg.clone().with_seed(seed)))
        .collect()
}

/// Variance of the time average across independent chains, scaled by `T`.
pub fn replicated_clt(
    u: &dyn Potential,
    c: &DriftField,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    cfg: &SimConfig,
    n_chains: usize,
) -> Result<VarianceEstimate> {
    if n_chains < 2 {
        return Err(Error::config("replicated CLT needs at least two chains"));
    }
    let averages = chain_averages(u, c, f, cfg, n_chains)?;
    Ok(replicated_from_averages(&averages, cfg.horizon(), cfg.step_size))
}

/// The replicated-CLT estimate from precomputed chain averages.
pub fn replicated_from_averages(averages: &[f64], horizon: f64, step_size: f64) -> VarianceEstimate {
    let moments: Moments = averages.iter().copied().collect();
    let estimate = horizon * moments.variance();
    let n = averages.len();
    VarianceEstimate {
        point_estimate: estimate,
        stderr: estimate * (2.0 / (n.max(2) - 1) as f64).sqrt(),
        method: Method::ReplicatedClt,
        batch_length: horizon,
        total_time: horizon * n as f64,
        n_chains: n,
        centering: moments.mean,
        step_size,
        rng: RNG_NAME.into(),
        normality: Some(normality(averages, moments)),
        bias_flag: None,
    }
}

fn normality(values: &[f64], m: Moments) -> NormalityDiagnostic {
    let n = values.len() as f64;
    let var = m.m2 / n;
    if !(var > 0.0) {
        return NormalityDiagnostic {
            skewness: 0.0,
            excess_kurtosis: 0.0,
            degenerate: true,
        };
    }
    let m3 = values.iter().map(|v| (v - m.mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - m.mean).powi(4)).sum::<f64>() / n;
    NormalityDiagnostic {
        skewness: m3 / var.powf(1.5),
        excess_kurtosis: m4 / (var * var) - 3.0,
        degenerate: false,
    }
}

/// Rerun `estimate` at half the step size (same horizon) and flag the
/// original when the two differ by more than its standard error.
pub fn bias_check(
    cfg: &SimConfig,
    estimate: impl Fn(&SimConfig) -> Result<VarianceEstimate>,
) -> Result<(VarianceEstimate, VarianceEstimate)> {
    let mut base = estimate(cfg)?;
    let halved = SimConfig {
        step_size: cfg.step_size / 2.0,
        n_steps: cfg.n_steps * 2,
        burn_in_steps: cfg.burn_in_steps * 2,
        ..cfg.clone()
    };
    let fine = estimate(&halved)?;
    base.bias_flag = Some((base.point_estimate - fine.point_estimate).abs() > base.stderr);
    Ok((base, fine))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn traj_from(values: Vec<f64>, dt: f64) -> Trajectory {
        Trajectory {
            times: vec![],
            states: vec![],
            observable_running_mean: vec![],
            observable_values: values,
            step_size: dt,
        }
    }

    #[test]
    fn constant_observable_gives_zero() {
        let t = traj_from(vec![3.5; 4000], 0.01);
        assert_eq!(batch_means(&t, 1.0).unwrap().point_estimate, 0.0);
        assert_eq!(overlapping_batch_means(&t, 1.0).unwrap().point_estimate, 0.0);
        let r = replicated_from_averages(&[2.0; 40], 100.0, 0.01);
        assert_eq!(r.point_estimate, 0.0);
        assert!(r.normality.unwrap().degenerate);
    }

    #[test]
    fn two_batch_definition() {
        // Bypass the batch-count guard by checking the formula on Moments.
        let (m1, m2, b) = (0.3, -0.1, 5.0);
        let m: Moments = [m1, m2].into_iter().collect();
        assert!((b * m.variance() - b * (m1 - m2) * (m1 - m2) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_chain_definition() {
        let (a1, a2, t) = (0.25, -0.5, 1000.0);
        let r = replicated_from_averages(&[a1, a2], t, 0.01);
        assert!((r.point_estimate - t * (a1 - a2) * (a1 - a2) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn too_short_horizon_is_rejected() {
        let t = traj_from(vec![0.0; 100], 0.1);
        match batch_means(&t, 1.0).unwrap_err() {
            Error::HorizonTooShort { min_time, .. } => assert_eq!(min_time, 20.0),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn batch_means_on_alternating_batches() {
        // Batch means alternate ±1 with batch length 1: s² = n/(n−1).
        let per = 10;
        let n = 40;
        let values: Vec<f64> = (0..per * n)
            .map(|i| if (i / per) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let e = batch_means(&traj_from(values, 0.1), 1.0).unwrap();
        assert!((e.point_estimate - n as f64 / (n - 1) as f64).abs() < 1e-12);
        assert!(e.centering.abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn moments_merge_is_order_insensitive(xs in prop::collection::vec(-1e3f64..1e3, 2..60), split in 0usize..60) {
            let split = split.min(xs.len());
            let whole: Moments = xs.iter().copied().collect();
            let left: Moments = xs[..split].iter().copied().collect();
            let right: Moments = xs[split..].iter().copied().collect();
            let merged = right.merge(left);
            let scale = whole.m2.abs().max(1.0);
            prop_assert!((merged.mean - whole.mean).abs() <= 1e-12 * whole.mean.abs().max(1.0));
            prop_assert!((merged.m2 - whole.m2).abs() <= 1e-12 * scale * xs.len() as f64);
        }

        #[test]
        fn batch_means_shift_invariant(xs in prop::collection::vec(-5f64..5.0, 400..800), shift in -100f64..100.0) {
            let a = batch_means(&traj_from(xs.clone(), 0.05), 1.0).unwrap();
            let b = batch_means(&traj_from(xs.iter().map(|x| x + shift).collect(), 0.05), 1.0).unwrap();
            prop_assert!((a.point_estimate - b.point_estimate).abs() <= 1e-9 * (1.0 + a.point_estimate));
        }
    }
}
