use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uibo::artifacts::write_benchmark;
use uibo::config::RunConfig;
use uibo::driver::run_benchmark;
use uibo::replay::{
    bounding_region, read_observations, read_validation, run_replay, write_observations, write_replay,
    write_validation, SyntheticReplay,
};
use uibo::selftest::{run_selftest, SelftestHooks};
use uibo::Error;

#[derive(Parser)]
#[command(name = "uibo", version, about = "Bayesian optimisation with uncertain inputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides `experiment.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulated exploration benchmark.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Number of trials (overrides `experiment.trials`).
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Fit surrogates to a logged run and score them on validation data.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Observation CSV: x_mean,y_mean,cov_xx,cov_xy,cov_yy,vibration.
        #[arg(long)]
        observations: PathBuf,
        /// Validation CSV: x,y,vibration.
        #[arg(long)]
        validation: PathBuf,
    },
    /// Write a synthetic replay log with matching validation data and config.
    GenReplay {
        /// Directory for observations.csv, validation.csv and config.toml
        #[arg(long)]
        out: PathBuf,
        /// Terrain and noise seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the built-in invariant checks.
    Selftest {
        /// Scale applied to library kernel values before checking.
        #[arg(long, hide = true, default_value_t = 1.0)]
        perturb_kernel: f64,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.experiment.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &RunConfig, fallback: &str) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn write_file(path: &Path, body: &str) -> Result<(), Error> {
    std::fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("--jobs: {e}")))?;
    Ok(pool.install(f))
}

fn benchmark(common: &Common, trials: Option<usize>) -> Result<(), Error> {
    let mut cfg = load_config(common)?;
    if let Some(t) = trials {
        cfg.experiment.trials = t;
    }
    cfg.validate()?;
    let dir = out_dir(common, &cfg, "out/benchmark");
    create_dir(&dir)?;
    write_file(&dir.join("config.toml"), &cfg.to_toml_string())?;

    let setup = cfg.benchmark_setup();
    let result = with_jobs(common.jobs, || run_benchmark(&setup))??;
    write_benchmark(&dir, &result, cfg.terrain.dump_grid)?;

    println!(
        "{:<12} {:>17} {:>17} {:>17} {:>17} {:>8}",
        "method", "rmse", "wrmse", "distance", "relvib", "failures"
    );
    for s in &result.summary {
        println!(
            "{:<12} {:>8.4} ± {:<6.4} {:>8.4} ± {:<6.4} {:>8.3} ± {:<6.3} {:>8.4} ± {:<6.4} {:>8}",
            s.method,
            s.rmse.mean,
            s.rmse.sd,
            s.wrmse.mean,
            s.wrmse.sd,
            s.distance.mean,
            s.distance.sd,
            s.relative_vibration.mean,
            s.relative_vibration.sd,
            s.failures
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn replay(common: &Common, observations: &Path, validation: &Path) -> Result<(), Error> {
    let cfg = load_config(common)?;
    cfg.validate()?;
    let obs = read_observations(observations)?;
    let val = read_validation(validation)?;
    let dir = out_dir(common, &cfg, "out/replay");
    create_dir(&dir)?;
    write_file(&dir.join("config.toml"), &cfg.to_toml_string())?;

    let settings = cfg.replay_settings(&obs);
    let fits = with_jobs(common.jobs, || run_replay(&obs, &val, &settings))??;
    write_replay(&dir, &fits, &bounding_region(&obs, &val), cfg.terrain.dump_grid)?;
    for f in &fits {
        println!("{:<14} wrmse {:.6} rmse {:.6} lml {:.4}", f.mode.label(), f.wrmse, f.rmse, f.lml);
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn gen_replay(out: &Path, seed: u64) -> Result<(), Error> {
    let synth = SyntheticReplay::default();
    let (_terrain, obs, val) = synth.generate(seed)?;
    create_dir(out)?;
    write_observations(&out.join("observations.csv"), &obs)?;
    write_validation(&out.join("validation.csv"), &val)?;
    let cfg = RunConfig::for_synthetic_replay(&synth, &obs);
    write_file(&out.join("config.toml"), &cfg.to_toml_string())?;
    println!("wrote {} observations and {} validation rows to {}", obs.len(), val.len(), out.display());
    Ok(())
}

fn selftest(scale: f64) -> ExitCode {
    let results = run_selftest(&SelftestHooks { kernel_scale: scale });
    let mut ok = true;
    for c in &results {
        println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Benchmark { common, trials } => benchmark(common, *trials),
        Command::Replay {
            common,
            observations,
            validation,
        } => replay(common, observations, validation),
        Command::GenReplay { out, seed } => gen_replay(out, *seed),
        Command::Selftest { perturb_kernel } => return selftest(*perturb_kernel),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
