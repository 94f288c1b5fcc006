//! How the variance decays as the irreversible drift is scaled up, compared
//! with the large-k limit read off the spectral measure.

use langevin_core::analysis::sweep_k;
use langevin_core::benchmark::{shear_instance, torus_instance};

fn main() -> langevin_core::Result<()> {
    let ks = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0];

    let sys = torus_instance(24, 1.0)?;
    let f = sys.represent(|x| x[0].sin() + 0.5 * x[1].cos());
    let res = sweep_k(|k| torus_instance(24, k), &f, &ks)?;
    println!("rotation, limit {:.5}, B gap {:?}", res.limit_prediction, res.b_gap);
    for (k, s) in res.k_values.iter().zip(&res.sigma2_values) {
        println!("  k = {k:>4}: {s:.6}");
    }

    // A shear flow that leaves functions of x1 alone: nothing improves.
    let shear = shear_instance(24)?;
    let f = shear.represent(|x| x[0].cos());
    let res = sweep_k(|_| Ok(shear.clone()), &f, &ks)?;
    println!("shear, first {:.6}, last {:.6}", res.sigma2_values[0], res.sigma2_values[ks.len() - 1]);
    Ok(())
}
