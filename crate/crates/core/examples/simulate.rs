//! Euler-Maruyama on a double well, with and without a rotational drift.

use std::sync::Arc;

use langevin_core::model::{AntisymmetricMatrix, DoubleWell2d, DriftField, Potential};
use langevin_core::sde_sim::{simulate, SimConfig};

fn main() -> langevin_core::Result<()> {
    let u: Arc<dyn Potential> = Arc::new(DoubleWell2d { barrier: 2.0 });
    let c = DriftField::q_grad_u(AntisymmetricMatrix::rotation(1.0), u.clone())?;

    for k in [0.0, 2.0] {
        let cfg = SimConfig::with_horizon(0.005, 500.0, 10.0, 1, vec![1.0, 0.0])
            .with_scale(k)
            .with_thin(200);
        let traj = simulate(u.as_ref(), &c, |x| x[0], &cfg)?;
        let crossings = traj.states.windows(2).filter(|w| w[0][0] * w[1][0] < 0.0).count();
        println!(
            "k = {k}: mean x1 = {:+.4}, sign changes in the thinned path = {crossings}",
            traj.time_average()
        );
    }

    let cfg = SimConfig::with_horizon(0.005, 5.0, 0.0, 1, vec![1.0, 0.0]).with_thin(100);
    simulate(u.as_ref(), &c, |x| x[0], &cfg)?.write_csv(std::io::stdout())
}
