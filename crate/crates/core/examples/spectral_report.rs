//! Exact variances from a discretized generator on the torus, and the
//! spectral measure behind the irreversible one.

use std::sync::Arc;

use langevin_core::model::{AntisymmetricMatrix, DriftField, Potential, TorusCosine};
use langevin_core::spectral_oracle::{discretize_torus, SpectralOracle};

fn main() -> langevin_core::Result<()> {
    let u: Arc<dyn Potential> = Arc::new(TorusCosine::uniform(2, 1.0));
    let c = DriftField::q_grad_u(AntisymmetricMatrix::rotation(2.0), u.clone())?;
    let sys = discretize_torus(u.as_ref(), &c, 24)?;
    let oracle = SpectralOracle::new(&sys)?;

    for (name, f) in [
        ("sin x1", sys.represent(|x| x[0].sin())),
        ("cos x1 + cos x2", sys.represent(|x| x[0].cos() + x[1].cos())),
        ("sin(x1 - x2)", sys.represent(|x| (x[0] - x[1]).sin())),
    ] {
        let r = oracle.report(&f);
        println!(
            "{name:>16}: rev {:.5}  irr {:.5}  routes differ by {:.1e}  in kernel: {}",
            r.sigma2_rev, r.sigma2_irr, r.route_discrepancy, r.kernel_flag
        );
    }

    let mu = oracle.measure(&sys.represent(|x| x[0].sin()));
    println!("gap of L {:.4}, {} atoms, mass {:.5}", oracle.gap_l(), mu.locations.len(), mu.total_mass);
    for (y, w) in mu.locations.iter().zip(&mu.weights).filter(|(_, w)| **w > 1e-2 * mu.total_mass) {
        println!("  y = {y:+.5}  weight {w:.5}");
    }
    Ok(())
}
