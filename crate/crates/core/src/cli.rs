//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error, 3 verification failure.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::{parse_config, Overrides, RunConfig, StudyConfig};
use crate::diagnostics::{holder_table_of, sphere_deviation_study, weak_residual, Snapshot};
use crate::ensemble::{
    ito_strat_agreement, n_uniformity_study, order_study, run_ensemble, EnsembleSummary, Stat,
    FUNCTIONALS,
};
use crate::error::{Result, SllgError};
use crate::integrators::{integrate, Scheme};
use crate::output::{
    encode_snapshots, fmt_f64, thread_count, timeseries_csv, OutputDir, RunManifest,
};
use crate::spectral::SpectralBasis;
use crate::verify::{run_suite, Samples, Tolerances};
use crate::wiener::{WienerPath, GENERATOR_ID};

#[derive(Debug, Parser)]
#[command(
    name = "sllg",
    version,
    about = "Stochastic LLG spectral Galerkin simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One trajectory with time series, snapshots and weak residuals.
    Simulate(CommonArgs),
    /// Monte Carlo ensemble with per-replica series and a summary.
    Ensemble(CommonArgs),
    /// The study selected by the config's `study` section.
    Study(CommonArgs),
    /// Operator identity suite; exits 3 if any check fails.
    Verify(CommonArgs),
}

#[derive(Debug, clap::Args)]
struct CommonArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "n-modes")]
    n_modes: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            scheme: self.scheme,
            dt: self.dt,
            n_modes: self.n_modes,
        }
    }
}

/// Built-in configuration used by `verify` when no file is given.
pub const DEFAULT_CONFIG: &str = r#"{
  "model": {
    "lambda1": 1.0,
    "lambda2": 1.0,
    "anisotropy": {"kind": "uniaxial", "axis": [0.0, 0.0, 1.0], "strength": 0.5},
    "noise": [
      {"kind": "cosine", "vector": [0.3, 0.0, 0.4], "mode": 1},
      {"kind": "cosine", "vector": [0.0, 0.5, 0.0], "mode": 2}
    ],
    "initial": {"kind": "twist", "amplitude": 1.0, "mode": 1}
  },
  "domain": {"n_modes": 16},
  "stepper": {"dt": 0.001, "t_final": 1.0}
}"#;

fn exit_code(e: &SllgError) -> i32 {
    match e {
        SllgError::Config { .. } | SllgError::Io { .. } => 2,
        _ => 1,
    }
}

fn report_error(e: &SllgError) {
    let kind = match e {
        SllgError::Config { .. } => "config",
        SllgError::Io { .. } => "io",
        SllgError::Step { .. } => "step",
        SllgError::AllReplicasFailed(_) => "all_replicas_failed",
        _ => "runtime",
    };
    let json = serde_json::json!({
        "error": {"kind": kind, "message": e.to_string(), "step": e.step_index()}
    });
    eprintln!("{json}");
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            report_error(&e);
            exit_code(&e)
        }
    }
}

fn load(args: &CommonArgs, allow_default: bool) -> Result<RunConfig> {
    let mut cfg = match (&args.config, allow_default) {
        (Some(p), _) => parse_config(p)?,
        (None, true) => RunConfig::from_json(DEFAULT_CONFIG)?,
        (None, false) => return Err(SllgError::config("--config", "a config file is required")),
    };
    cfg.apply(&args.overrides())?;
    cfg.ensemble.threads = thread_count(cfg.ensemble.threads);
    Ok(cfg)
}

fn dispatch(cmd: Command) -> Result<i32> {
    let start = Instant::now();
    match cmd {
        Command::Simulate(a) => simulate(&load(&a, false)?, start).map(|_| 0),
        Command::Ensemble(a) => {
            let cfg = load(&a, false)?;
            ensemble(&cfg, "ensemble", start).map(|_| 0)
        }
        Command::Study(a) => study(&load(&a, false)?, start).map(|_| 0),
        Command::Verify(a) => verify(&load(&a, true)?),
    }
}

fn manifest(
    command: &str,
    cfg: &RunConfig,
    seeds: Vec<crate::wiener::SeedDescriptor>,
    start: Instant,
) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        config: cfg.clone(),
        generator: GENERATOR_ID.to_string(),
        version: format!("sllg {}", env!("CARGO_PKG_VERSION")),
        seeds,
        threads: cfg
            .ensemble
            .threads
            .unwrap_or_else(rayon::current_num_threads),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        files: Vec::new(),
    }
}

fn stat_cells(s: &Stat) -> Vec<String> {
    vec![
        fmt_f64(s.mean),
        fmt_f64(s.std_error),
        fmt_f64(s.min),
        fmt_f64(s.max),
        s.count.to_string(),
    ]
}

const STAT_HEADER: [&str; 5] = ["mean", "std_error", "min", "max", "count"];

fn with_stat_header(first: &[&'static str]) -> Vec<&'static str> {
    first.iter().chain(STAT_HEADER.iter()).copied().collect()
}

fn simulate(cfg: &RunConfig, start: Instant) -> Result<PathBuf> {
    let basis =
        SpectralBasis::shared(cfg.domain.length, cfg.domain.n_modes, cfg.domain.oversample)?;
    let m = cfg.model.bind(&basis)?;
    let stepper = cfg.stepper_config();
    let path = WienerPath::generate(
        cfg.ensemble.seed,
        0,
        m.n_channels(),
        stepper.dt,
        stepper.steps()?,
    );
    let mut observer = cfg.observer_config();
    if !cfg.test_functions.is_empty() {
        observer.snapshot_stride = Some(1);
    }
    let rec = integrate(m.initial(), &m, &stepper, &path, Some(&observer))?;

    let mut out = OutputDir::create(&cfg.output.dir)?;
    out.write("timeseries.csv", timeseries_csv(rec.rows()).as_bytes())?;
    if let Some(stride) = cfg.output.snapshot_stride {
        let snaps: Vec<Snapshot> = rec
            .snapshots()
            .iter()
            .filter(|s| s.step % stride == 0)
            .cloned()
            .collect();
        out.write("snapshots.bin", &encode_snapshots(basis.n_modes(), &snaps))?;
        if snaps.len() >= 2 {
            let rows: Vec<Vec<String>> = holder_table_of(&snaps, cfg.alpha)?
                .iter()
                .map(|e| vec![fmt_f64(e.lag), fmt_f64(e.quotient)])
                .collect();
            out.write_table("holder.csv", &["lag", "quotient"], &rows)?;
        }
    }
    if !cfg.test_functions.is_empty() {
        let states = rec.all_states()?;
        let mut rows = Vec::new();
        for tf in &cfg.test_functions {
            let r = weak_residual(&states, &path, tf, &m)?;
            rows.push(vec![
                tf.mode.to_string(),
                fmt_f64(tf.vector.0[0]),
                fmt_f64(tf.vector.0[1]),
                fmt_f64(tf.vector.0[2]),
                fmt_f64(r.residual()),
                fmt_f64(r.stratonovich),
                fmt_f64(r.left_point),
                fmt_f64(r.ito_correction),
            ]);
        }
        out.write_table(
            "weak_residual.csv",
            &[
                "mode",
                "vx",
                "vy",
                "vz",
                "residual",
                "stratonovich",
                "left_point",
                "ito_correction",
            ],
            &rows,
        )?;
    }
    manifest("simulate", cfg, vec![path.seed()], start).write(&out)?;
    Ok(out.root().to_path_buf())
}

fn summary_rows(sum: &EnsembleSummary) -> Vec<Vec<String>> {
    FUNCTIONALS
        .iter()
        .filter_map(|name| sum.stat(name).map(|s| (name, s)))
        .map(|(name, s)| {
            let mut r = vec![name.to_string()];
            r.extend(stat_cells(&s));
            r
        })
        .collect()
}

fn ensemble(cfg: &RunConfig, command: &str, start: Instant) -> Result<PathBuf> {
    let sum = run_ensemble(&cfg.ensemble_spec())?;
    let mut out = OutputDir::create(&cfg.output.dir)?;
    for run in &sum.runs {
        out.write(
            &format!("replica_{:04}.csv", run.replica),
            timeseries_csv(run.record.rows()).as_bytes(),
        )?;
        if cfg.output.snapshot_stride.is_some() {
            out.write(
                &format!("replica_{:04}.bin", run.replica),
                &encode_snapshots(cfg.domain.n_modes, run.record.snapshots()),
            )?;
        }
    }
    out.write_table(
        "summary.csv",
        &with_stat_header(&["functional"]),
        &summary_rows(&sum),
    )?;
    let fails: Vec<Vec<String>> = sum
        .failures
        .iter()
        .map(|f| {
            vec![
                f.replica.to_string(),
                f.seed.base_seed.to_string(),
                f.seed.level.to_string(),
                format!("\"{}\"", f.message.replace('"', "'")),
            ]
        })
        .collect();
    out.write_table(
        "failures.csv",
        &["replica", "base_seed", "level", "message"],
        &fails,
    )?;
    let refine: Vec<Vec<String>> = sum
        .runs
        .iter()
        .map(|r| {
            vec![
                r.replica.to_string(),
                r.refinements.to_string(),
                fmt_f64(r.dt),
            ]
        })
        .collect();
    out.write_table("replicas.csv", &["replica", "refinements", "dt"], &refine)?;
    let mut seeds: Vec<_> = sum
        .runs
        .iter()
        .map(|r| r.seed)
        .chain(sum.failures.iter().map(|f| f.seed))
        .collect();
    seeds.sort_by_key(|s| s.replica);
    manifest(command, cfg, seeds, start).write(&out)?;
    for f in &sum.failures {
        eprintln!(
            "replica {} failed (seed {:?}): {}",
            f.replica, f.seed, f.message
        );
    }
    Ok(out.root().to_path_buf())
}

fn replica_seeds(cfg: &RunConfig) -> Vec<crate::wiener::SeedDescriptor> {
    (0..cfg.ensemble.replicas as u64)
        .map(|r| crate::wiener::SeedDescriptor {
            base_seed: cfg.ensemble.seed,
            replica: r,
            level: 0,
        })
        .collect()
}

fn study(cfg: &RunConfig, start: Instant) -> Result<PathBuf> {
    let spec = cfg.ensemble_spec();
    let mut out = match &cfg.study {
        StudyConfig::Plain => return ensemble(cfg, "study", start),
        _ => OutputDir::create(&cfg.output.dir)?,
    };
    match &cfg.study {
        StudyConfig::Plain => unreachable!(),
        StudyConfig::NUniformity { n_list } => {
            let table = n_uniformity_study(&spec, n_list)?;
            let mut rows = Vec::new();
            for sm in &table.summaries {
                for mut r in summary_rows(sm) {
                    r.insert(0, sm.n_modes.to_string());
                    rows.push(r);
                }
            }
            out.write_table(
                "uniformity.csv",
                &with_stat_header(&["n_modes", "functional"]),
                &rows,
            )?;
            let mut trend = Vec::new();
            for name in FUNCTIONALS {
                for i in 1..table.summaries.len() {
                    if let Some(z) = table.shift_in_se(name, i - 1, i) {
                        trend.push(vec![
                            name.to_string(),
                            n_list[i - 1].to_string(),
                            n_list[i].to_string(),
                            fmt_f64(z),
                        ]);
                    }
                }
            }
            out.write_table(
                "trend.csv",
                &["functional", "n_from", "n_to", "shift_in_se"],
                &trend,
            )?;
        }
        StudyConfig::OrderStudy { dt_list, schemes } => {
            let st = order_study(&spec, dt_list, schemes)?;
            let rows: Vec<Vec<String>> = st
                .levels
                .iter()
                .map(|l| {
                    let mut r = vec![l.scheme.name().to_string(), fmt_f64(l.dt)];
                    r.extend(stat_cells(&l.error));
                    r
                })
                .collect();
            out.write_table("order.csv", &with_stat_header(&["scheme", "dt"]), &rows)?;
            let reference = if st.exact_reference {
                "exact"
            } else {
                "fine_midpoint"
            };
            let slopes: Vec<Vec<String>> = st
                .slopes
                .iter()
                .map(|(s, v)| vec![s.name().to_string(), fmt_f64(*v), reference.to_string()])
                .collect();
            out.write_table("slopes.csv", &["scheme", "slope", "reference"], &slopes)?;
        }
        StudyConfig::ItoStrat { dt_list } => {
            let rows: Vec<Vec<String>> = ito_strat_agreement(&spec, dt_list)?
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.dt),
                        fmt_f64(r.euler_energy.mean),
                        fmt_f64(r.euler_energy.std_error),
                        fmt_f64(r.heun_energy.mean),
                        fmt_f64(r.heun_energy.std_error),
                        fmt_f64(r.gap.mean),
                        fmt_f64(r.gap.std_error),
                        fmt_f64(r.gap_in_se()),
                    ]
                })
                .collect();
            out.write_table(
                "ito_strat.csv",
                &[
                    "dt",
                    "euler_mean",
                    "euler_se",
                    "heun_mean",
                    "heun_se",
                    "gap_mean",
                    "gap_se",
                    "gap_in_se",
                ],
                &rows,
            )?;
        }
        StudyConfig::SphereDeviation { n_list } => {
            let stepper = cfg.stepper_config();
            let path = WienerPath::generate(
                cfg.ensemble.seed,
                0,
                cfg.model.noise.len(),
                stepper.dt,
                stepper.steps()?,
            );
            let rows: Vec<Vec<String>> = sphere_deviation_study(
                &cfg.model,
                cfg.domain.length,
                cfg.domain.oversample,
                n_list,
                &stepper,
                &path,
            )?
            .iter()
            .map(|r| vec![r.n_modes.to_string(), fmt_f64(r.max_deviation)])
            .collect();
            out.write_table("sphere_deviation.csv", &["n_modes", "max_deviation"], &rows)?;
        }
    }
    manifest("study", cfg, replica_seeds(cfg), start).write(&out)?;
    Ok(out.root().to_path_buf())
}

fn verify(cfg: &RunConfig) -> Result<i32> {
    let basis =
        SpectralBasis::shared(cfg.domain.length, cfg.domain.n_modes, cfg.domain.oversample)?;
    let m = cfg.model.bind(&basis)?;
    let report = run_suite(
        &m,
        cfg.ensemble.seed,
        Samples::default(),
        Tolerances::default(),
    )?;
    for c in &report.checks {
        println!(
            "{} {:<32} worst {:.3e} tol {:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.tolerance
        );
    }
    Ok(if report.passed() { 0 } else { 3 })
}

/// Runs a command on an already-parsed config; used by tests.
pub fn run_config(command: &str, cfg: &RunConfig) -> Result<PathBuf> {
    let start = Instant::now();
    match command {
        "simulate" => simulate(cfg, start),
        "ensemble" => ensemble(cfg, "ensemble", start),
        "study" => study(cfg, start),
        other => Err(SllgError::config(
            "command",
            format!("unknown command `{other}`"),
        )),
    }
}
