//! Euler-Maruyama integration of
//! `dX = √2 dW − ∇U(X) dt + k·C(X) dt` and time averages of observables
//! along the path.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DriftField, Potential, SpaceKind};

/// Generator behind every simulated chain; recorded in reports.
pub const RNG_NAME: &str = "ChaCha8Rng::seed_from_u64";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub step_size: f64,
    /// Total number of steps, burn-in included.
    pub n_steps: usize,
    pub burn_in_steps: usize,
    pub seed: u64,
    pub initial_point: Vec<f64>,
    /// Multiplier `k` on the drift `C`.
    pub perturbation_scale: f64,
    /// Keep every `thin`-th post-burn-in state in the trajectory.
    #[serde(default = "one")]
    pub thin: usize,
}

fn one() -> usize {
    1
}

impl SimConfig {
    /// Config covering `horizon` time units after `burn_in_time` time units.
    pub fn with_horizon(step_size: f64, horizon: f64, burn_in_time: f64, seed: u64, x0: Vec<f64>) -> Self {
        let burn = (burn_in_time / step_size).round() as usize;
        let keep = (horizon / step_size).round() as usize;
        Self {
            step_size,
            n_steps: burn + keep,
            burn_in_steps: burn,
            seed,
            initial_point: x0,
            perturbation_scale: 0.0,
            thin: 1,
        }
    }

    pub fn with_scale(mut self, k: f64) -> Self {
        self.perturbation_scale = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_thin(mut self, thin: usize) -> Self {
        self.thin = thin;
        self
    }

    /// Simulated time after burn-in.
    pub fn horizon(&self) -> f64 {
        (self.n_steps - self.burn_in_steps) as f64 * self.step_size
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::config("step size must be positive"));
        }
        if self.n_steps == 0 {
            return Err(Error::config("n_steps must be positive"));
        }
        if self.burn_in_steps >= self.n_steps {
            return Err(Error::config("burn-in must be shorter than the run"));
        }
        if !(self.perturbation_scale >= 0.0 && self.perturbation_scale.is_finite()) {
            return Err(Error::config("perturbation scale must be nonnegative"));
        }
        if self.thin == 0 {
            return Err(Error::config("thinning factor must be positive"));
        }
        if self.initial_point.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.initial_point.len(),
            });
        }
        Ok(())
    }
}

/// Post-burn-in path. Record `j` sits at time `(j+1)·thin·dt` and carries
/// the left-endpoint running mean of `f` over `[0, t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub observable_running_mean: Vec<f64>,
    /// `f` at the left endpoint of every post-burn-in step (unthinned).
    pub observable_values: Vec<f64>,
    pub step_size: f64,
}

impl Trajectory {
    pub fn total_time(&self) -> f64 {
        self.observable_values.len() as f64 * self.step_size
    }

    pub fn time_average(&self) -> f64 {
        self.observable_running_mean.last().copied().unwrap_or(0.0)
    }

    /// CSV with columns `t, x1..xd, running_mean`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x{i}")));
        header.push("running_mean".into());
        w.write_record(&header)?;
        for ((t, x), m) in self.times.iter().zip(&self.states).zip(&self.observable_running_mean) {
            let mut row = vec![format!("{t:?}")];
            row.extend(x.iter().map(|v| format!("{v:?}")));
            row.push(format!("{m:?}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One Euler-Maruyama step. On the torus the result is wrapped into
/// `[0, 2π)`.
pub fn step_em(
    x: &[f64],
    u: &dyn Potential,
    c: &DriftField,
    k: f64,
    dt: f64,
    noise: &[f64],
) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    let mut scratch = Scratch::new(x.len());
    advance(&mut out, u, c, k, dt, noise, &mut scratch);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Divergence {
            step: 0,
            state: out,
            seed: None,
        })
    }
}

struct Scratch {
    grad: Vec<f64>,
    drift: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Self {
            grad: vec![0.0; d],
            drift: vec![0.0; d],
        }
    }
}

fn advance(
    x: &mut [f64],
    u: &dyn Potential,
    c: &DriftField,
    k: f64,
    dt: f64,
    noise: &[f64],
    s: &mut Scratch,
) {
    u.gradient_into(x, &mut s.grad);
    let use_c = k != 0.0 && !c.is_zero();
    if use_c {
        c.eval_into(x, &mut s.drift);
    }
    let amp = (2.0 * dt).sqrt();
    for i in 0..x.len() {
        let mut b = -s.grad[i];
        if use_c {
            b += k * s.drift[i];
        }
        x[i] += dt * b + amp * noise[i];
    }
    if u.space() == SpaceKind::FlatTorus {
        for v in x.iter_mut() {
            *v = wrap(*v);
        }
    }
}

fn wrap(v: f64) -> f64 {
    let r = v.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Run one chain, calling `visit(step_index, state_before_step)` for every
/// post-burn-in step. Shared by [`simulate`] and [`time_average`].
fn run_chain(
    u: &dyn Potential,
    c: &DriftField,
    cfg: &SimConfig,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<Vec<f64>> {
    let d = u.dim();
    cfg.validate(d)?;
    if c.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: c.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = cfg.initial_point.clone();
    if u.space() == SpaceKind::FlatTorus {
        x.iter_mut().for_each(|v| *v = wrap(*v));
    }
    let mut noise = vec![0.0; d];
    let mut scratch = Scratch::new(d);
    for step in 0..cfg.n_steps {
        if step >= cfg.burn_in_steps {
            visit(step - cfg.burn_in_steps, &x);
        }
        for z in noise.iter_mut() {
            *z = StandardNormal.sample(&mut rng);
        }
        advance(&mut x, u, c, cfg.perturbation_scale, cfg.step_size, &noise, &mut scratch);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                step,
                state: x,
                seed: Some(cfg.seed),
            });
        }
    }
    Ok(x)
}

/// Simulate one chain and record its trajectory.
pub fn simulate(
    u: &dyn Potential,
    c: &DriftField,
    f: impl Fn(&[f64]) -> f64,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    let kept = cfg.n_steps.saturating_sub(cfg.burn_in_steps);
    let records = kept / cfg.thin.max(1);
    let mut traj = Trajectory {
        times: Vec::with_capacity(records),
        states: Vec::with_capacity(records),
        observable_running_mean: Vec::with_capacity(records),
        observable_values: Vec::with_capacity(kept),
        step_size: cfg.step_size,
    };
    let mut sum = 0.0;
    let mut pending = false;
    let last = run_chain(u, c, cfg, |j, x| {
        // The state reached by step j-1 is recorded once step j starts.
        if pending {
            traj.states.push(x.to_vec());
            pending = false;
        }
        let fx = f(x);
        sum += fx;
        traj.observable_values.push(fx);
        if (j + 1) % cfg.thin == 0 {
            traj.times.push((j + 1) as f64 * cfg.step_size);
            traj.observable_running_mean.push(sum / (j + 1) as f64);
            pending = true;
        }
    })?;
    if pending {
        traj.states.push(last);
    }
    Ok(traj)
}

/// `t⁻¹∫₀ᵗ f(X_s) ds` (left-endpoint) without storing the path.
pub fn time_average(
    u: &dyn Potential,
    c: &DriftField,
    f: impl Fn(&[f64]) -> f64,
    cfg: &SimConfig,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    run_chain(u, c, cfg, |_, x| {
        sum += f(x);
        count += 1;
    })?;
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{AntisymmetricMatrix, Gaussian, TorusCosine};

    #[derive(Debug)]
    struct Flat(usize);

    impl Potential for Flat {
        fn dim(&self) -> usize {
            self.0
        }
        fn space(&self) -> SpaceKind {
            SpaceKind::Euclidean
        }
        fn value(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn gradient_into(&self, _: &[f64], out: &mut [f64]) {
            out.fill(0.0)
        }
        fn hessian_into(&self, _: &[f64], out: &mut [f64]) {
            out.fill(0.0)
        }
    }

    #[test]
    fn fixed_point_without_drift_or_noise() {
        let x = step_em(&[0.3, -0.4], &Flat(2), &DriftField::zero(2), 1.0, 0.1, &[0.0, 0.0]).unwrap();
        assert_eq!(x, vec![0.3, -0.4]);
    }

    #[test]
    fn deterministic_euler_step() {
        let u = Gaussian::standard(1);
        let x = step_em(&[1.0], &u, &DriftField::zero(1), 0.0, 0.1, &[0.0]).unwrap();
        assert!((x[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn rotational_drift_step() {
        let u: Arc<dyn Potential> = Arc::new(Gaussian::standard(2));
        let c = DriftField::q_grad_u(AntisymmetricMatrix::rotation(1.0), u.clone()).unwrap();
        let x = step_em(&[1.0, 0.0], u.as_ref(), &c, 1.0, 0.1, &[0.0, 0.0]).unwrap();
        assert!((x[0] - 0.9).abs() < 1e-15);
        assert!((x[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn steep_potential_diverges() {
        let u = crate::model::DoubleWell2d { barrier: 50.0 };
        let cfg = SimConfig {
            step_size: 0.5,
            n_steps: 50,
            burn_in_steps: 0,
            seed: 1,
            initial_point: vec![3.0, 0.0],
            perturbation_scale: 0.0,
            thin: 1,
        };
        let err = simulate(&u, &DriftField::zero(2), |_| 0.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { seed: Some(1), .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn single_step_matches_step_em() {
        let u = Gaussian::standard(2);
        let cfg = SimConfig {
            step_size: 0.01,
            n_steps: 1,
            burn_in_steps: 0,
            seed: 42,
            initial_point: vec![0.5, -0.5],
            perturbation_scale: 0.0,
            thin: 1,
        };
        let traj = simulate(&u, &DriftField::zero(2), |x| x[0], &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let noise: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
        let expect = step_em(&[0.5, -0.5], &u, &DriftField::zero(2), 0.0, 0.01, &noise).unwrap();
        assert_eq!(traj.states, vec![expect]);
        assert_eq!(traj.times, vec![0.01]);
        assert_eq!(traj.observable_running_mean, vec![0.5]);
    }

    #[test]
    fn zero_observable_has_zero_running_mean() {
        let u = Gaussian::standard(2);
        let cfg = SimConfig::with_horizon(0.01, 5.0, 1.0, 3, vec![0.0, 0.0]);
        let traj = simulate(&u, &DriftField::zero(2), |_| 0.0, &cfg).unwrap();
        assert!(traj.observable_running_mean.iter().all(|&m| m == 0.0));
        assert_eq!(traj.times.len(), traj.states.len());
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn deterministic_given_seed() {
        let u = Gaussian::standard(2);
        let cfg = SimConfig::with_horizon(0.01, 2.0, 0.5, 9, vec![1.0, 1.0]);
        let a = simulate(&u, &DriftField::zero(2), |x| x[0], &cfg).unwrap();
        let b = simulate(&u, &DriftField::zero(2), |x| x[0], &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&u, &DriftField::zero(2), |x| x[0], &cfg.clone().with_seed(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_drift_ignores_scale() {
        let u = Gaussian::standard(2);
        let cfg = SimConfig::with_horizon(0.01, 2.0, 0.0, 5, vec![1.0, 1.0]);
        let a = simulate(&u, &DriftField::zero(2), |x| x[1], &cfg).unwrap();
        let b = simulate(&u, &DriftField::zero(2), |x| x[1], &cfg.clone().with_scale(3.5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn torus_states_are_wrapped() {
        let u: Arc<dyn Potential> = Arc::new(TorusCosine::uniform(2, 1.0));
        let c = DriftField::q_grad_u(AntisymmetricMatrix::rotation(2.0), u.clone()).unwrap();
        let cfg = SimConfig::with_horizon(0.05, 50.0, 0.0, 11, vec![-1.0, 7.0]).with_scale(1.0);
        let traj = simulate(u.as_ref(), &c, |x| x[0], &cfg).unwrap();
        assert!(traj
            .states
            .iter()
            .flatten()
            .all(|&v| (0.0..TAU).contains(&v)));
    }

    #[test]
    fn thinning_keeps_quadrature_on_full_grid() {
        let u = Gaussian::standard(1);
        let cfg = SimConfig::with_horizon(0.01, 1.0, 0.0, 2, vec![0.2]);
        let full = simulate(&u, &DriftField::zero(1), |x| x[0], &cfg).unwrap();
        let thin = simulate(&u, &DriftField::zero(1), |x| x[0], &cfg.clone().with_thin(10)).unwrap();
        assert_eq!(thin.states.len(), 10);
        assert_eq!(thin.states[0], full.states[9]);
        assert_eq!(thin.time_average(), full.time_average());
        assert_eq!(
            time_average(&u, &DriftField::zero(1), |x| x[0], &cfg).unwrap(),
            full.time_average()
        );
    }

    #[test]
    fn config_validation() {
        let u = Gaussian::standard(2);
        let mut cfg = SimConfig::with_horizon(0.01, 1.0, 0.0, 0, vec![0.0, 0.0]);
        cfg.burn_in_steps = cfg.n_steps;
        assert!(simulate(&u, &DriftField::zero(2), |_| 0.0, &cfg).is_err());
        let cfg = SimConfig::with_horizon(0.01, 1.0, 0.0, 0, vec![0.0]);
        assert!(simulate(&u, &DriftField::zero(2), |_| 0.0, &cfg).is_err());
        let mut cfg = SimConfig::with_horizon(0.01, 1.0, 0.0, 0, vec![0.0, 0.0]);
        cfg.step_size = -1.0;
        assert!(simulate(&u, &DriftField::zero(2), |_| 0.0, &cfg).is_err());
    }

    #[test]
    fn csv_export_has_expected_columns() {
        let u = Gaussian::standard(2);
        let cfg = SimConfig::with_horizon(0.1, 0.3, 0.0, 0, vec![0.0, 0.0]);
        let traj = simulate(&u, &DriftField::zero(2), |x| x[0], &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x1,x2,running_mean"));
        assert_eq!(lines.count(), 3);
    }
}
