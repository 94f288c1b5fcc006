//! Monte Carlo checks against the two-dimensional Ornstein–Uhlenbeck process
//! `dX = -(I + kQ)X dt + √2 dW`, `Q` the unit rotation. For `f = x₁` the
//! asymptotic variance is `2/(1 + k²)`.

use std::sync::Arc;

use langevin_core::mc_variance::{batch_means, replicated_clt};
use langevin_core::model::{AntisymmetricMatrix, DriftField, Gaussian, Potential};
use langevin_core::sde_sim::{simulate, SimConfig};

fn ou() -> (Arc<dyn Potential>, DriftField) {
    let u: Arc<dyn Potential> = Arc::new(Gaussian::standard(2));
    let c = DriftField::q_grad_u(AntisymmetricMatrix::rotation(1.0), u.clone()).unwrap();
    (u, c)
}

fn truth(k: f64) -> f64 {
    2.0 / (1.0 + k * k)
}

fn x1(x: &[f64]) -> f64 {
    x[0]
}

#[test]
fn running_mean_converges() {
    let (u, c) = ou();
    let k = 1.0;
    let horizon = 1e4;
    let cfg = SimConfig::with_horizon(0.01, horizon, 10.0, 3, vec![2.0, -2.0]).with_scale(k).with_thin(100);
    let traj = simulate(u.as_ref(), &c, x1, &cfg).unwrap();
    let mean = *traj.observable_running_mean.last().unwrap();
    assert!(mean.abs() <= 3.0 * (truth(k) / horizon).sqrt(), "{mean}");
}

#[test]
fn second_moments_are_stationary() {
    let (u, c) = ou();
    let k = 1.0;
    let cfg = SimConfig::with_horizon(0.01, 1e4, 10.0, 4, vec![0.0, 0.0]).with_scale(k).with_thin(10);
    let traj = simulate(u.as_ref(), &c, x1, &cfg).unwrap();
    let n = traj.states.len() as f64;
    for axis in 0..2 {
        let m2 = traj.states.iter().map(|x| x[axis] * x[axis]).sum::<f64>() / n;
        assert!((m2 - 1.0).abs() < 0.05, "axis {axis}: {m2}");
    }
    let cross = traj.states.iter().map(|x| x[0] * x[1]).sum::<f64>() / n;
    assert!(cross.abs() < 0.05, "{cross}");
}

#[test]
fn batch_means_recovers_reversible_variance() {
    let (u, c) = ou();
    let k = 0.0;
    let cfg = SimConfig::with_horizon(0.005, 1e4, 10.0, 5, vec![0.0, 0.0]).with_scale(k).with_thin(1000);
    let traj = simulate(u.as_ref(), &c, x1, &cfg).unwrap();
    let est = batch_means(&traj, 50.0).unwrap();
    assert!((est.point_estimate / truth(k) - 1.0).abs() < 0.2, "{est:?}");
}

#[test]
fn replicated_clt_recovers_irreversible_variance() {
    let (u, c) = ou();
    let k = 1.0;
    let cfg = SimConfig::with_horizon(0.01, 200.0, 5.0, 600, vec![0.0, 0.0]).with_scale(k);
    let est = replicated_clt(u.as_ref(), &c, &x1, &cfg, 200).unwrap();
    assert!((est.point_estimate / truth(k) - 1.0).abs() < 0.25, "{est:?}");
    let normality = est.normality.unwrap();
    assert!(normality.skewness.abs() < 1.0 && normality.excess_kurtosis.abs() < 2.0);
}

#[test]
fn batch_means_intervals_cover_the_truth() {
    let (u, c) = ou();
    let k = 1.0;
    let covered = (0..10u64)
        .filter(|&seed| {
            let cfg = SimConfig::with_horizon(0.01, 4000.0, 5.0, 100 + seed, vec![0.0, 0.0]).with_scale(k).with_thin(1000);
            let traj = simulate(u.as_ref(), &c, x1, &cfg).unwrap();
            let est = batch_means(&traj, 20.0).unwrap();
            (est.point_estimate - truth(k)).abs() <= 2.0 * est.stderr
        })
        .count();
    assert!(covered >= 8, "{covered}/10");
}

#[test]
fn variance_decreases_with_k() {
    let estimates: Vec<(f64, f64)> = [0.0, 1.0, 2.0]
        .iter()
        .map(|&k| {
            let (u, c) = ou();
            let cfg = SimConfig::with_horizon(0.01, 100.0, 5.0, 900, vec![0.0, 0.0]).with_scale(k);
            let e = replicated_clt(u.as_ref(), &c, &x1, &cfg, 200).unwrap();
            (e.point_estimate, e.stderr)
        })
        .collect();
    for w in estimates.windows(2) {
        let combined = w[0].1.hypot(w[1].1);
        assert!(w[0].0 - w[1].0 > combined, "{estimates:?}");
    }
}
