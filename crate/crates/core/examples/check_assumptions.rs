//! Probe the structural and growth conditions for a Gaussian with a
//! rotational drift, and for a constant drift that breaks them.

use std::sync::Arc;

use langevin_core::model::{check_assumptions, default_probes, AntisymmetricMatrix, DriftField, Gaussian, Potential};

fn main() -> langevin_core::Result<()> {
    let u: Arc<dyn Potential> = Arc::new(Gaussian::with_covariance(2, vec![2.0, 0.5, 0.5, 1.0])?);
    let probes = default_probes(u.as_ref(), 64, 0);

    let good = DriftField::q_grad_u(AntisymmetricMatrix::rotation(1.5), u.clone())?;
    let report = check_assumptions(u.as_ref(), &good, &probes)?;
    println!("Q∇U:      residual {:.2e}, |C|/(|∇U|+1) ≤ {:.3}", report.a3_residual, report.a5_ratio);
    for m in &report.a4_margin {
        println!("  eps {:>4}: c_eps {:.3}", m.epsilon, m.c_epsilon);
    }

    let constant = DriftField::custom(2, "(1, 0)", |_, out| out.copy_from_slice(&[1.0, 0.0]), |_| 0.0);
    let report = check_assumptions(u.as_ref(), &constant, &probes)?;
    println!("constant: residual {:.2e}", report.a3_residual);
    Ok(())
}
