//! Monte Carlo estimates of the asymptotic variance of `x1` under a
//! rotated Ornstein-Uhlenbeck process, where the exact answer is `2/(1+k²)`.

use std::sync::Arc;

use langevin_core::mc_variance::{batch_means, bias_check, overlapping_batch_means, replicated_clt};
use langevin_core::model::{AntisymmetricMatrix, DriftField, Gaussian, Potential};
use langevin_core::sde_sim::{simulate, SimConfig};

fn main() -> langevin_core::Result<()> {
    let u: Arc<dyn Potential> = Arc::new(Gaussian::standard(2));
    let c = DriftField::q_grad_u(AntisymmetricMatrix::rotation(1.0), u.clone())?;
    let f = |x: &[f64]| x[0];

    for k in [0.0, 1.0, 3.0] {
        let cfg = SimConfig::with_horizon(0.01, 4000.0, 10.0, 17, vec![0.0, 0.0])
            .with_scale(k)
            .with_thin(1000);
        let traj = simulate(u.as_ref(), &c, f, &cfg)?;
        let bm = batch_means(&traj, 40.0)?;
        let obm = overlapping_batch_means(&traj, 40.0)?;
        let short = SimConfig::with_horizon(0.01, 100.0, 10.0, 17, vec![0.0, 0.0]).with_scale(k);
        let rep = replicated_clt(u.as_ref(), &c, &f, &short, 100)?;
        println!(
            "k = {k}: exact {:.3}  bm {:.3}±{:.3}  obm {:.3}±{:.3}  replicated {:.3}±{:.3}",
            2.0 / (1.0 + k * k),
            bm.point_estimate,
            bm.stderr,
            obm.point_estimate,
            obm.stderr,
            rep.point_estimate,
            rep.stderr,
        );
    }

    let cfg = SimConfig::with_horizon(0.05, 2000.0, 10.0, 3, vec![0.0, 0.0]).with_scale(1.0);
    let (coarse, fine) = bias_check(&cfg, |cfg| batch_means(&simulate(u.as_ref(), &c, f, cfg)?, 40.0))?;
    println!(
        "dt {} vs {}: {:.3} vs {:.3}, flagged: {:?}",
        coarse.step_size,
        fine.step_size,
        coarse.point_estimate,
        fine.point_estimate,
        coarse.bias_flag
    );
    Ok(())
}
