//! The `langevin` command-line front end.
//!
//! Every subcommand writes one machine-readable report (JSON for scalars,
//! CSV for sequences) and embeds the resolved [`ExperimentConfig`] so the
//! run can be repeated with `--config`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{sweep_k, worst_case};
use crate::benchmark::{self, BenchmarkOptions};
use crate::config::{BackendSpec, DriftSpec, ExperimentConfig, PotentialSpec};
use crate::error::{Error, Result};
use crate::mc_variance::{
    batch_means, bias_check, default_batch_length, overlapping_batch_means, replicated_clt, VarianceEstimate,
};
use crate::model::{check_assumptions, default_probes};
use crate::observable::Observable;
use crate::sde_sim::{simulate, SimConfig, RNG_NAME};
use crate::spectral_oracle::SpectralOracle;

/// Default output directory when `--output` is absent.
pub const OUTPUT_DIR_ENV: &str = "LANGEVIN_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "langevin", version, about = "Reversible vs. irreversible Langevin sampling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probe the structural and growth assumptions on U and C.
    CheckAssumptions(CheckArgs),
    /// Simulate one chain and report its time average.
    Sample(SampleArgs),
    /// Monte Carlo estimate of the asymptotic variance.
    EstimateVariance(EstimateArgs),
    /// Exact asymptotic variances from a discretized generator.
    SpectralReport(SpectralArgs),
    /// σ²_{kC}(f) along a list of k values (CSV).
    SweepK(SweepArgs),
    /// Worst-case variance over unit observables.
    WorstCase(WorstArgs),
    /// Run the reference acceptance matrix.
    ReproduceBenchmark(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum PotentialName {
    Gaussian,
    #[value(name = "double_well_2d")]
    DoubleWell2d,
    TorusCosine,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DriftName {
    None,
    Qgradu,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendName {
    Torus,
    Hermite,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodName {
    BatchMeans,
    Obm,
    Replicated,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Read the experiment from a JSON config, or from a report embedding
    /// one; model flags are then ignored.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub potential: PotentialName,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Gaussian covariance, row-major.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub cov: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub barrier: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub amplitude: f64,
    #[arg(long, value_enum, default_value = "none")]
    pub drift: DriftName,
    /// Antisymmetric Q, row-major. Non-antisymmetric input is rejected.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Option<Vec<f64>>,
    /// Perturbation scale multiplying C.
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Observable: x1, x2^3, cos(2x1), sin(x2), const:1.5, zero.
    #[arg(long, default_value = "x1")]
    pub observable: Observable,
    /// Report path; defaults to $LANGEVIN_OUTPUT_DIR/<command>.<ext>.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Defaults to torus for torus_cosine, hermite otherwise.
    #[arg(long, value_enum)]
    pub backend: Option<BackendName>,
    #[arg(long, default_value_t = 32)]
    pub points: usize,
    #[arg(long, default_value_t = 6)]
    pub degree: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 0.005)]
    pub dt: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10.0)]
    pub burn_in: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial point; the origin when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 64)]
    pub probes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Write the trajectory as CSV (t, x1..xd, running_mean).
    #[arg(long)]
    pub dump_trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, value_enum, default_value = "batch-means")]
    pub method: MethodName,
    /// Batch length in time units; √T when absent.
    #[arg(long)]
    pub batch_length: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub chains: usize,
    /// Rerun at dt/2 and flag discretization bias.
    #[arg(long)]
    pub bias_check: bool,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Write the spectral measure μ_g as CSV (location, weight).
    #[arg(long)]
    pub dump_measure: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,4,8,16,32,64")]
    pub k_values: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct WorstArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory for benchmark.csv and benchmark.json.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = benchmark::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, hide = true, default_value_t = 1.0, allow_hyphen_values = true)]
    pub tolerance_scale: f64,
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Csv(_) => EXIT_FAILURE,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

pub fn execute(command: Command) -> Result<i32> {
    match command {
        Command::CheckAssumptions(a) => check(a),
        Command::Sample(a) => sample(a),
        Command::EstimateVariance(a) => estimate(a),
        Command::SpectralReport(a) => spectral(a),
        Command::SweepK(a) => sweep(a),
        Command::WorstCase(a) => worst(a),
        Command::ReproduceBenchmark(a) => {
            return Ok(if reproduce(a)? { EXIT_OK } else { EXIT_FAILURE });
        }
    }?;
    Ok(EXIT_OK)
}

impl ModelArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            // Either a bare config or any report embedding one.
            let mut value: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
            let mut cfg: ExperimentConfig = serde_json::from_value(value)?;
            if self.output.is_some() {
                cfg.output_path = self.output.clone();
            }
            cfg.validate()?;
            return Ok(cfg);
        }
        let potential = match self.potential {
            PotentialName::Gaussian => PotentialSpec::Gaussian {
                dim: self.dim,
                cov: self.cov.clone(),
            },
            PotentialName::DoubleWell2d => PotentialSpec::DoubleWell2d { barrier: self.barrier },
            PotentialName::TorusCosine => PotentialSpec::TorusCosine {
                dim: self.dim,
                amplitude: self.amplitude,
            },
        };
        let drift = match (self.drift, &self.q) {
            (DriftName::None, _) => DriftSpec::None,
            (DriftName::Qgradu, Some(q)) => DriftSpec::Qgradu { q: q.clone() },
            (DriftName::Qgradu, None) => return Err(Error::config("--drift qgradu needs --q")),
        };
        let mut cfg = ExperimentConfig::new(potential, drift, self.observable);
        cfg.k = self.k;
        cfg.output_path = self.output.clone();
        cfg.validate()?;
        Ok(cfg)
    }
}

impl BackendArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if cfg.backend.is_some() && self.backend.is_none() {
            return;
        }
        let torus = matches!(cfg.potential, PotentialSpec::TorusCosine { .. });
        cfg.backend = Some(match self.backend {
            Some(BackendName::Torus) => BackendSpec::Torus {
                points_per_axis: self.points,
            },
            Some(BackendName::Hermite) => BackendSpec::Hermite { degree: self.degree },
            None if torus => BackendSpec::Torus {
                points_per_axis: self.points,
            },
            None => BackendSpec::Hermite { degree: self.degree },
        });
    }
}

impl SimArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if cfg.sim.is_some() {
            return Ok(());
        }
        let dim = cfg.potential.dim();
        let x0 = self.x0.clone().unwrap_or_else(|| vec![0.0; dim]);
        let sim = SimConfig::with_horizon(self.dt, self.horizon, self.burn_in, self.seed, x0)
            .with_scale(cfg.k)
            .with_thin(self.thin);
        sim.validate(dim)?;
        cfg.sim = Some(sim);
        Ok(())
    }
}

fn output_path(cfg_path: &Option<PathBuf>, default_name: &str) -> PathBuf {
    cfg_path.clone().unwrap_or_else(|| {
        let dir = std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
        dir.join(default_name)
    })
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn check(a: CheckArgs) -> Result<()> {
    let cfg = a.model.resolve()?;
    let u = cfg.potential()?;
    let c = cfg.drift(u.clone())?.scaled(cfg.k);
    let probes = default_probes(u.as_ref(), a.probes, a.seed);
    let report = check_assumptions(u.as_ref(), &c, &probes)?;
    let path = output_path(&cfg.output_path, "check-assumptions.json");
    write_json(&path, &json!({ "config": cfg, "seed": a.seed, "report": report }))
}

fn sample(a: SampleArgs) -> Result<()> {
    let mut cfg = a.model.resolve()?;
    a.sim.apply(&mut cfg)?;
    let sim = cfg.sim.clone().expect("sim config resolved");
    let u = cfg.potential()?;
    let c = cfg.drift(u.clone())?;
    let obs = cfg.observable;
    let traj = simulate(u.as_ref(), &c, |x| obs.eval(x), &sim)?;
    if let Some(p) = &a.dump_trajectory {
        write_atomic(p, |w| traj.write_csv(w))?;
    }
    let path = output_path(&cfg.output_path, "sample.json");
    write_json(
        &path,
        &json!({
            "config": cfg,
            "seed": sim.seed,
            "rng": RNG_NAME,
            "f": obs.to_string(),
            "time_average": traj.time_average(),
            "T": traj.total_time(),
            "dt": sim.step_size,
            "final_state": traj.states.last(),
        }),
    )
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let mut cfg = a.model.resolve()?;
    a.sim.apply(&mut cfg)?;
    let sim = cfg.sim.clone().expect("sim config resolved");
    let u = cfg.potential()?;
    let c = cfg.drift(u.clone())?;
    let obs = cfg.observable;
    let f = move |x: &[f64]| obs.eval(x);
    let run = |s: &SimConfig| -> Result<VarianceEstimate> {
        match a.method {
            MethodName::Replicated => replicated_clt(u.as_ref(), &c, &f, s, a.chains),
            MethodName::BatchMeans | MethodName::Obm => {
                let traj = simulate(u.as_ref(), &c, &f, s)?;
                let b = a.batch_length.unwrap_or_else(|| default_batch_length(traj.total_time()));
                if matches!(a.method, MethodName::Obm) {
                    overlapping_batch_means(&traj, b)
                } else {
                    batch_means(&traj, b)
                }
            }
        }
    };
    let (est, halved) = if a.bias_check {
        let (e, h) = bias_check(&sim, run)?;
        (e, Some(h))
    } else {
        (run(&sim)?, None)
    };
    let path = output_path(&cfg.output_path, "estimate-variance.json");
    write_json(
        &path,
        &json!({
            "potential": cfg.potential,
            "drift": cfg.drift,
            "k": cfg.k,
            "f": obs.to_string(),
            "method": est.method,
            "estimate": est.point_estimate,
            "stderr": est.stderr,
            "T": sim.horizon(),
            "dt": sim.step_size,
            "n_chains": est.n_chains,
            "seed": sim.seed,
            "details": est,
            "halved_dt": halved,
            "config": cfg,
        }),
    )
}

fn spectral(a: SpectralArgs) -> Result<()> {
    let mut cfg = a.model.resolve()?;
    a.backend.apply(&mut cfg);
    let sys = cfg.system(cfg.k)?;
    let oracle = SpectralOracle::new(&sys)?;
    let obs = cfg.observable;
    let f = sys.represent(|x| obs.eval(x));
    let r = oracle.report(&f);
    if let Some(p) = &a.dump_measure {
        let mu = oracle.measure(&f);
        write_atomic(p, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["location", "weight"])?;
            for (y, m) in mu.locations.iter().zip(&mu.weights) {
                out.write_record([format!("{y:?}"), format!("{m:?}")])?;
            }
            out.flush()?;
            Ok(())
        })?;
    }
    let path = output_path(&cfg.output_path, "spectral-report.json");
    write_json(
        &path,
        &json!({
            "backend": sys.backend(),
            "n": sys.n(),
            "f": obs.to_string(),
            "sigma2_rev": r.sigma2_rev,
            "sigma2_irr": r.sigma2_irr,
            "route_spectral": r.route_spectral,
            "equality_gap": r.equality_gap,
            "kernel_flag": r.kernel_flag,
            "route_discrepancy": r.route_discrepancy,
            "gap_L": oracle.gap_l(),
            "min_real_spectrum_LC": oracle.min_real_spectrum_lc()?,
            "antisymmetrization_defect": sys.antisymmetrization_defect(),
            "centering": r.centering,
            "config": cfg,
        }),
    )
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = a.model.resolve()?;
    a.backend.apply(&mut cfg);
    let obs = cfg.observable;
    let base = cfg.system(0.0)?;
    let f = base.represent(|x| obs.eval(x));
    let res = sweep_k(|k| cfg.system(k), &f, &a.k_values)?;
    let path = output_path(&cfg.output_path, "sweep-k.csv");
    write_atomic(&path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "sigma2", "limit_prediction"])?;
        for (k, s) in res.k_values.iter().zip(&res.sigma2_values) {
            out.write_record([format!("{k:?}"), format!("{s:?}"), format!("{:?}", res.limit_prediction)])?;
        }
        out.flush()?;
        Ok(())
    })?;
    let mut meta = path.clone().into_os_string();
    meta.push(".json");
    write_json(
        Path::new(&meta),
        &json!({ "f": obs.to_string(), "result": res, "config": cfg }),
    )
}

fn worst(a: WorstArgs) -> Result<()> {
    let mut cfg = a.model.resolve()?;
    a.backend.apply(&mut cfg);
    let sys = cfg.system(cfg.k)?;
    let w = worst_case(&sys)?;
    let mut value = serde_json::to_value(&w)?;
    if let Value::Object(map) = &mut value {
        map.insert("backend".into(), serde_json::to_value(sys.backend())?);
        map.insert("config".into(), serde_json::to_value(&cfg)?);
    }
    let path = output_path(&cfg.output_path, "worst-case.json");
    write_json(&path, &value)
}

fn reproduce(a: BenchArgs) -> Result<bool> {
    let opts = BenchmarkOptions {
        seed: a.seed,
        tolerance_scale: a.tolerance_scale,
        ..BenchmarkOptions::default()
    };
    let rows = benchmark::run_all(&opts)?;
    let dir = a.output.unwrap_or_else(|| {
        std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
    });
    write_atomic(&dir.join("benchmark.csv"), |w| benchmark::write_table(&rows, w))?;
    write_json(
        &dir.join("benchmark.json"),
        &json!({ "seed": opts.seed, "rng": RNG_NAME, "rows": rows }),
    )?;
    for r in &rows {
        println!(
            "{:>2} {:<26} {:<4} observed {} (tolerance {:e})",
            r.criterion,
            r.name,
            if r.pass { "pass" } else { "FAIL" },
            r.observed,
            r.tolerance
        );
    }
    Ok(rows.iter().all(|r| r.pass))
}
