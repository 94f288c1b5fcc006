//! The reference benchmark matrix behind `langevin reproduce-benchmark`.
//!
//! Each criterion compares the library against a closed form or a structural
//! identity on a fixed set of instances and yields one [`CriterionRow`].

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::{sweep_from_measure, worst_case};
use crate::error::Result;
use crate::mc_variance::replicated_clt;
use crate::model::{AntisymmetricMatrix, DriftField, Gaussian, Potential, TorusCosine};
use crate::sde_sim::SimConfig;
use crate::spectral_oracle::{
    discretize_gaussian_linear, discretize_torus, resolvent_variances, DiscretizedSystem, SpectralMeasure,
    SpectralOracle,
};

/// Default seed bank for the Monte Carlo criterion.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub criterion: u8,
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct BenchmarkOptions {
    pub seed: u64,
    /// Multiplies every tolerance. Values ≤ 0 make the harness fail; used
    /// to test that failures propagate.
    pub tolerance_scale: f64,
    pub torus_points: usize,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            tolerance_scale: 1.0,
            torus_points: 32,
        }
    }
}

/// `U = cos x₁ + cos x₂` on the 2-torus with `C = k·Q∇U`, `Q` the unit
/// rotation.
pub fn torus_instance(points: usize, k: f64) -> Result<DiscretizedSystem> {
    let u: Arc<dyn Potential> = Arc::new(TorusCosine::uniform(2, 1.0));
    let c = DriftField::q_grad_u(AntisymmetricMatrix::rotation(k), u.clone())?;
    discretize_torus(u.as_ref(), &c, points)
}

/// `U = cos x₁` on the 2-torus with `C = Q∇U = (0, sin x₁)`. Functions of
/// `x₁` are exactly in the kernel of the discrete transport.
pub fn shear_instance(points: usize) -> Result<DiscretizedSystem> {
    let u: Arc<dyn Potential> = Arc::new(TorusCosine::per_axis(vec![1.0, 0.0]));
    let c = DriftField::q_grad_u(AntisymmetricMatrix::rotation(1.0), u.clone())?;
    discretize_torus(u.as_ref(), &c, points)
}

/// Two-dimensional Ornstein-Uhlenbeck process with drift `−x + kQx`.
pub fn ou_instance(k: f64, degree: usize) -> Result<DiscretizedSystem> {
    discretize_gaussian_linear(&AntisymmetricMatrix::rotation(k), 2, degree)
}

/// Random trigonometric polynomials with frequencies `|mᵢ| ≤ 3`.
pub fn random_trig_observables(sys: &DiscretizedSystem, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let terms: Vec<(f64, f64, f64, f64)> = (0..6)
                .map(|_| {
                    (
                        rng.random_range(-3..=3) as f64,
                        rng.random_range(-3..=3) as f64,
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                    )
                })
                .collect();
            sys.represent(|x| {
                terms
                    .iter()
                    .map(|(m1, m2, a, b)| {
                        let t = m1 * x[0] + m2 * x[1];
                        a * t.cos() + b * t.sin()
                    })
                    .sum()
            })
        })
        .collect()
}

/// Random coefficient vectors in the system's basis.
pub fn random_coefficients(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

fn row(criterion: u8, name: &str, expected: String, observed: String, tolerance: f64, pass: bool) -> CriterionRow {
    CriterionRow {
        criterion,
        name: name.into(),
        expected,
        observed,
        tolerance,
        pass,
    }
}

struct Instances {
    torus: DiscretizedSystem,
    ou: DiscretizedSystem,
    torus_f: Vec<Vec<f64>>,
    ou_f: Vec<Vec<f64>>,
}

/// Run the whole matrix in order.
pub fn run_all(opts: &BenchmarkOptions) -> Result<Vec<CriterionRow>> {
    let s = opts.tolerance_scale;
    let torus = torus_instance(opts.torus_points, 1.0)?;
    let ou = ou_instance(1.0, 6)?;
    let inst = Instances {
        torus_f: random_trig_observables(&torus, 200, opts.seed),
        ou_f: random_coefficients(ou.n(), 200, opts.seed),
        torus,
        ou,
    };
    let torus_oracle = SpectralOracle::new(&inst.torus)?;
    let ou_oracle = SpectralOracle::new(&inst.ou)?;
    let pairs = [(&torus_oracle, &inst.torus_f), (&ou_oracle, &inst.ou_f)];

    let mut rows = Vec::with_capacity(10);
    let reports: Vec<_> = pairs
        .iter()
        .flat_map(|(o, fs)| fs.iter().map(|f| o.report(f)))
        .collect();

    let excess = reports
        .iter()
        .map(|r| r.sigma2_irr - r.sigma2_rev)
        .fold(f64::NEG_INFINITY, f64::max);
    rows.push(row(
        1,
        "main inequality",
        "max(σ²_C − σ²_0) ≤ 0".into(),
        sci(excess),
        1e-10,
        excess <= 1e-10 * s,
    ));

    rows.push(ou_closed_form(s)?);

    let discrepancy = reports.iter().map(|r| r.route_discrepancy).fold(0.0, f64::max);
    rows.push(row(
        3,
        "route agreement",
        "resolvent = spectral".into(),
        sci(discrepancy),
        1e-8,
        discrepancy <= 1e-8 * s,
    ));

    let structure = [&torus_oracle, &ou_oracle]
        .iter()
        .map(|o| {
            o.system()
                .structure_defects()
                .max()
                .max(o.vsv_defect())
                .max(o.b().hermitian_defect())
        })
        .fold(0.0, f64::max);
    let positive = torus_oracle.gap_l() > 0.0 && ou_oracle.gap_l() > 0.0;
    rows.push(row(
        4,
        "operator structure",
        "all defects 0, Ker L = constants".into(),
        sci(structure),
        1e-10,
        positive && structure <= 1e-10 * s,
    ));

    rows.push(equality(opts.torus_points, &ou_oracle, s)?);
    rows.push(growing(&inst, &torus_oracle, s)?);
    rows.push(worst(&inst.torus, s)?);

    let mut spectral_slack = f64::INFINITY;
    for o in [&torus_oracle, &ou_oracle] {
        spectral_slack = spectral_slack.min(o.min_real_spectrum_lc()? - o.gap_l());
    }
    rows.push(row(
        8,
        "spectral gap",
        "min Re σ(L_C) ≥ min σ(L)".into(),
        sci(spectral_slack),
        1e-10,
        spectral_slack >= -1e-10 * s,
    ));

    rows.push(monte_carlo(opts.seed, s)?);
    rows.push(mesh(s)?);
    if !(s > 0.0) {
        rows.iter_mut().for_each(|r| r.pass = false);
    }
    Ok(rows)
}

fn ou_closed_form(s: f64) -> Result<CriterionRow> {
    let mut err: f64 = 0.0;
    for k in [0.0, 1.0, 2.0, 4.0] {
        let sys = ou_instance(k, 4)?;
        let r = SpectralOracle::new(&sys)?.report(&sys.represent(|x| x[0]));
        err = err
            .max((r.sigma2_rev - 2.0).abs())
            .max((r.route_resolvent - 2.0 / (1.0 + k * k)).abs())
            .max((r.route_spectral - 2.0 / (1.0 + k * k)).abs());
    }
    Ok(row(
        2,
        "OU closed form",
        "σ²_0 = 2, σ²_kC = 2/(1+k²)".into(),
        sci(err),
        1e-9,
        err <= 1e-9 * s,
    ))
}

fn equality(points: usize, ou: &SpectralOracle<'_>, s: f64) -> Result<CriterionRow> {
    let sys = shear_instance(points)?;
    let oracle = SpectralOracle::new(&sys)?;
    let gs: [fn(f64) -> f64; 3] = [|u| u * u, |u| u.exp(), |u| (2.0 * u).sin() + u];
    let mut gap: f64 = 0.0;
    let mut flags = true;
    for g in gs {
        // U = cos x₁ on this instance.
        let f = sys.apply_l(&sys.represent(|x| g(x[0].cos())));
        let r = oracle.report(&f);
        gap = gap.max(r.equality_gap.abs());
        flags &= r.kernel_flag;
    }
    let sys_ou = ou.system();
    let r = ou.report(&sys_ou.represent(|x| x[0]));
    let pass = gap <= 1e-9 * s && flags && r.equality_gap >= 0.5 && !r.kernel_flag;
    Ok(row(
        5,
        "equality characterization",
        "gap 0 on L(g∘U), ≥ 0.5 on OU x₁".into(),
        format!("{} / {:.6}", sci(gap), r.equality_gap),
        1e-9,
        pass,
    ))
}

const SWEEP: [f64; 8] = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

fn growing(inst: &Instances, torus: &SpectralOracle<'_>, s: f64) -> Result<CriterionRow> {
    let mut monotone: f64 = 0.0;
    let mut limit_excess = f64::NEG_INFINITY;
    let mut check = |mu: &SpectralMeasure| {
        let res = sweep_from_measure(mu, &SWEEP);
        monotone = monotone.max(res.monotonicity_violation());
        if let Some(bound) = res.limit_bound(64.0, res.total_mass) {
            let last = *res.sigma2_values.last().unwrap();
            limit_excess = limit_excess.max((last - res.limit_prediction).abs() - bound.max(1e-6));
        }
        res
    };
    for f in inst.torus_f.iter().take(20) {
        check(&torus.measure(f));
    }
    let sys = ou_instance(1.0, 4)?;
    let ou = check(&SpectralOracle::new(&sys)?.measure(&sys.represent(|x| x[0])));
    let pass = monotone <= 1e-10 * s && limit_excess <= 0.0 && ou.limit_prediction.abs() <= 1e-9 * s;
    Ok(row(
        6,
        "growing perturbation",
        "monotone, k=64 within bound, OU limit 0".into(),
        format!("{} / {} / {}", sci(monotone), sci(limit_excess), sci(ou.limit_prediction)),
        1e-10,
        pass,
    ))
}

fn worst(torus: &DiscretizedSystem, s: f64) -> Result<CriterionRow> {
    let mut strict_margin = f64::INFINITY;
    let mut pass = true;
    for sys in [torus, &ou_instance(1.0, 4)?] {
        let w = worst_case(sys)?;
        if w.kernel_intersection_dim == 0 {
            let margin = w.sup_rev - w.sup_irr;
            strict_margin = strict_margin.min(margin);
            pass &= margin > 1e-9;
        }
    }
    let w = worst_case(&ou_instance(1.0, 1)?)?;
    let err = (w.sup_rev - 2.0).abs().max((w.sup_irr - 1.0).abs());
    pass &= err <= 1e-9 * s;
    Ok(row(
        7,
        "worst case",
        "sup_irr < 2/λ; OU sup_rev 2, sup_irr 1".into(),
        format!("margin {} / OU err {}", sci(strict_margin), sci(err)),
        1e-9,
        pass,
    ))
}

fn monte_carlo(seed: u64, s: f64) -> Result<CriterionRow> {
    let u = Gaussian::standard(2);
    let c = DriftField::q_grad_u(AntisymmetricMatrix::rotation(1.0), Arc::new(Gaussian::standard(2)))?;
    let f = |x: &[f64]| x[0];
    let mut est = Vec::new();
    for (i, k) in [0.0, 1.0].into_iter().enumerate() {
        let cfg = SimConfig::with_horizon(0.005, 1000.0, 5.0, seed + 1000 * i as u64, vec![0.0, 0.0]).with_scale(k);
        est.push(replicated_clt(&u, &c, &f, &cfg, 100)?);
    }
    let rel0 = (est[0].point_estimate - 2.0).abs() / 2.0;
    let rel1 = (est[1].point_estimate - 1.0).abs();
    let combined = est[0].stderr.hypot(est[1].stderr);
    let separated = est[0].point_estimate - est[1].point_estimate > combined;
    let pass = rel0 <= 0.25 * s && rel1 <= 0.25 * s && separated;
    Ok(row(
        9,
        "Monte Carlo consistency",
        "2 and 1 within 25%, ordered".into(),
        format!(
            "{:.4}±{:.4} / {:.4}±{:.4}",
            est[0].point_estimate, est[0].stderr, est[1].point_estimate, est[1].stderr
        ),
        0.25,
        pass,
    ))
}

/// `(σ²_16 − σ²_32)/(σ²_32 − σ²_64)` for `σ²₀` and `σ²_C`.
pub fn mesh_ratios() -> Result<(f64, f64)> {
    let mut rev = Vec::new();
    let mut irr = Vec::new();
    for m in [16, 32, 64] {
        let sys = torus_instance(m, 1.0)?;
        let f = sys.represent(|x| x[0].sin() + x[1].cos() * x[0].cos());
        let (r, i) = resolvent_variances(&sys, &f)?;
        rev.push(r);
        irr.push(i);
    }
    let ratio = |v: &[f64]| (v[0] - v[1]) / (v[1] - v[2]);
    Ok((ratio(&rev), ratio(&irr)))
}

fn mesh(s: f64) -> Result<CriterionRow> {
    let (a, b) = mesh_ratios()?;
    let pass = (a - 4.0).abs() <= 1.0 * s && (b - 4.0).abs() <= 1.0 * s;
    Ok(row(
        10,
        "mesh convergence",
        "ratios in [3, 5]".into(),
        format!("{a:.4} / {b:.4}"),
        1.0,
        pass,
    ))
}

/// Summary table as CSV.
pub fn write_table<W: Write>(rows: &[CriterionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["criterion", "name", "expected", "observed", "tolerance", "pass"])?;
    for r in rows {
        w.write_record([
            r.criterion.to_string(),
            r.name.clone(),
            r.expected.clone(),
            r.observed.clone(),
            format!("{:?}", r.tolerance),
            if r.pass { "pass" } else { "fail" }.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
