//! CSV artifacts written by the benchmark and replay commands.
//!
//! Floats are printed with 17 significant digits so every value
//! round-trips exactly; re-running with the same configuration reproduces
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::driver::{BenchmarkResult, TrialRecord};
use crate::error::{Error, Result};
use crate::sim::Terrain;

/// Round-trip safe float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "method",
    "rmse_mean",
    "rmse_sd",
    "wrmse_mean",
    "wrmse_sd",
    "distance_mean",
    "distance_sd",
    "relvib_mean",
    "relvib_sd",
    "failures",
];

pub const ITERATION_HEADER: [&str; 11] = [
    "iteration",
    "target_x",
    "target_y",
    "true_x",
    "true_y",
    "est_x",
    "est_y",
    "est_cov",
    "observation",
    "path_length",
    "path_vibration",
];

pub fn write_summary(path: &Path, result: &BenchmarkResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for s in &result.summary {
        w.write_record([
            s.method.clone(),
            fmt_f64(s.rmse.mean),
            fmt_f64(s.rmse.sd),
            fmt_f64(s.wrmse.mean),
            fmt_f64(s.wrmse.sd),
            fmt_f64(s.distance.mean),
            fmt_f64(s.distance.sd),
            fmt_f64(s.relative_vibration.mean),
            fmt_f64(s.relative_vibration.sd),
            s.failures.to_string(),
        ])?;
    }
    finish(w, path)
}

/// One row per (trial, method) with every metric, or the failure message.
pub fn write_trial_metrics(path: &Path, result: &BenchmarkResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "trial",
        "method",
        "terrain_seed",
        "rmse",
        "wrmse",
        "distance",
        "mean_vibration",
        "relvib",
        "status",
    ])?;
    for t in &result.trials {
        for (name, rec) in result.methods.iter().zip(&t.records) {
            let mut row = vec![t.trial.to_string(), name.clone(), t.terrain_seed.to_string()];
            match rec.as_ref().ok().and_then(|r| r.metrics) {
                Some(m) => {
                    row.extend(
                        [m.rmse, m.wrmse, m.distance, m.mean_vibration, m.relative_vibration]
                            .into_iter()
                            .map(fmt_f64),
                    );
                    row.push("ok".into());
                }
                None => {
                    row.extend(std::iter::repeat_n("NaN".to_string(), 5));
                    row.push(match rec {
                        Err(e) => format!("failed: {e}"),
                        Ok(_) => "failed: unscored".into(),
                    });
                }
            }
            w.write_record(&row)?;
        }
    }
    finish(w, path)
}

pub fn write_iterations(path: &Path, record: &TrialRecord) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(ITERATION_HEADER)?;
    for (i, it) in record.iterations.iter().enumerate() {
        let est = it.est_input.mean();
        w.write_record([
            i.to_string(),
            fmt_f64(it.target[0]),
            fmt_f64(it.target[1]),
            fmt_f64(it.true_loc[0]),
            fmt_f64(it.true_loc[1]),
            fmt_f64(est[0]),
            fmt_f64(est[1]),
            fmt_f64(it.est_input.cov()[(0, 0)]),
            fmt_f64(it.observation),
            fmt_f64(it.path_length),
            fmt_f64(it.path_vibration),
        ])?;
    }
    finish(w, path)
}

/// `x, y, f` on an `n`-per-axis lattice.
pub fn write_terrain(path: &Path, terrain: &Terrain, n: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "y", "f"])?;
    for (p, v) in terrain.grid(n) {
        w.write_record([fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(v)])?;
    }
    finish(w, path)
}

/// Wide format: `iteration, <method>_mean, <method>_sd, ...`.
pub fn write_curves(path: &Path, result: &BenchmarkResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["iteration".to_string()];
    for m in &result.methods {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_sd"));
    }
    w.write_record(&header)?;
    let len = result.curves.iter().map(|c| c.len()).max().unwrap_or(0);
    for t in 0..len {
        let mut row = vec![t.to_string()];
        for c in &result.curves {
            match c.get(t) {
                Some(s) => {
                    row.push(fmt_f64(s.mean));
                    row.push(fmt_f64(s.sd));
                }
                None => row.extend(["NaN".to_string(), "NaN".to_string()]),
            }
        }
        w.write_record(&row)?;
    }
    finish(w, path)
}

/// Start location and terrain seed of a trial, for plotting.
pub fn write_trial_meta(path: &Path, terrain_seed: u64, start: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["terrain_seed", "start_x", "start_y"])?;
    w.write_record([terrain_seed.to_string(), fmt_f64(start[0]), fmt_f64(start[1])])?;
    finish(w, path)
}

/// Writes the whole benchmark directory and returns the files written.
pub fn write_benchmark(dir: &Path, result: &BenchmarkResult, terrain_grid: usize) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let p = dir.join("summary.csv");
    write_summary(&p, result)?;
    written.push(p);
    let p = dir.join("trials.csv");
    write_trial_metrics(&p, result)?;
    written.push(p);
    let p = dir.join("curves.csv");
    write_curves(&p, result)?;
    written.push(p);
    for t in &result.trials {
        let p = dir.join("terrain").join(format!("{}.csv", t.trial));
        write_terrain(&p, &t.terrain, terrain_grid)?;
        written.push(p);
        let tdir = dir.join("trials").join(t.trial.to_string());
        let p = tdir.join("meta.csv");
        write_trial_meta(&p, t.terrain_seed, &t.start)?;
        written.push(p);
        for rec in t.records.iter().flatten() {
            let p = tdir.join(format!("{}.csv", rec.method));
            write_iterations(&p, rec)?;
            written.push(p);
        }
    }
    Ok(written)
}
