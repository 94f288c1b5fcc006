//! Worst-case variance over unit observables, and equality certificates.

use langevin_core::analysis::{equality_certificate, worst_case};
use langevin_core::benchmark::{ou_instance, shear_instance, torus_instance};

fn main() -> langevin_core::Result<()> {
    for (name, sys) in [
        ("rotated OU", ou_instance(1.0, 4)?),
        ("torus rotation", torus_instance(16, 1.0)?),
        ("torus shear", shear_instance(16)?),
    ] {
        let w = worst_case(&sys)?;
        println!(
            "{name:>14}: sup rev {:.5}  sup irr {:.5}  strict {}  shared kernel dim {}",
            w.sup_rev, w.sup_irr, w.strict, w.kernel_intersection_dim
        );
    }

    let shear = shear_instance(16)?;
    for (name, f) in [
        ("cos x1", shear.represent(|x| x[0].cos())),
        ("sin x2", shear.represent(|x| x[1].sin())),
    ] {
        let cert = equality_certificate(&shear, &f)?;
        println!("{name}: equality {} (residual {:.1e})", cert.holds, cert.residual);
    }
    Ok(())
}
