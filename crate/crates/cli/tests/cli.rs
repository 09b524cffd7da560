use std::path::Path;
use std::process::{Command, Output};

fn uibo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uibo")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "
[experiment]
trials = 2
budget = 4
eval_grid = 20

[acquisition]
grid = 15

[terrain]
dump_grid = 10
";

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn selftest_passes_and_hook_fails_named_checks() {
    let ok = uibo(&["selftest"]);
    assert!(ok.status.success(), "{}", stdout(&ok));
    assert!(stdout(&ok).lines().all(|l| l.starts_with("PASS")));

    let bad = uibo(&["selftest", "--perturb-kernel", "1.01"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL kernel_reduction"));
    assert!(stdout(&bad).contains("PASS wrmse_hand_case"));
}

#[test]
fn benchmark_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let out = dir.path().join("out");
    let o = uibo(&["benchmark", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let (header, rows) = read_csv(&out.join("summary.csv"));
    assert_eq!(
        header,
        ["method", "rmse_mean", "rmse_sd", "wrmse_mean", "wrmse_sd", "distance_mean", "distance_sd", "relvib_mean", "relvib_sd", "failures"]
    );
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["BO-DUCB", "UBO-DUCB", "UIBO-DUCB", "BO-ES", "UBO-ES", "UIBO-ES"]);

    let (header, rows) = read_csv(&out.join("trials/1/UIBO-DUCB.csv"));
    assert_eq!(
        header,
        ["iteration", "target_x", "target_y", "true_x", "true_y", "est_x", "est_y", "est_cov", "observation", "path_length", "path_vibration"]
    );
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][7].parse::<f64>().unwrap(), 0.07 * 0.07);

    let (header, rows) = read_csv(&out.join("terrain/0.csv"));
    assert_eq!(header, ["x", "y", "f"]);
    assert_eq!(rows.len(), 100);

    let (header, rows) = read_csv(&out.join("curves.csv"));
    assert_eq!(header.len(), 13);
    assert_eq!(rows.len(), 4);

    let (_, meta) = read_csv(&out.join("trials/0/meta.csv"));
    assert_eq!(meta.len(), 1);

    let dumped = uibo::config::RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(dumped, uibo::config::RunConfig::from_toml_str(SMALL).unwrap());
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(uibo(&["benchmark", "--config", &cfg, "--out", a.to_str().unwrap(), "--jobs", "1"]).status.success());
    assert!(uibo(&["benchmark", "--config", &cfg, "--out", b.to_str().unwrap(), "--jobs", "2"]).status.success());
    for f in ["summary.csv", "trials.csv", "curves.csv", "trials/0/BO-ES.csv", "terrain/1.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn trials_and_seed_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let out = dir.path().join("out");
    let o = uibo(&["benchmark", "--config", &cfg, "--out", out.to_str().unwrap(), "--trials", "1", "--seed", "77"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("terrain/0.csv").exists());
    assert!(!out.join("terrain/1.csv").exists());
    let dumped = uibo::config::RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!((dumped.experiment.trials, dumped.experiment.seed), (1, 77));
}

#[test]
fn baseline_only_run_has_unit_relative_vibration() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[[method]]\nplanner = \"standard\"\nacquisition = \"entropy\"\n");
    let cfg = write(dir.path(), "run.toml", &body);
    let out = dir.path().join("out");
    let o = uibo(&["benchmark", "--config", &cfg, "--out", out.to_str().unwrap(), "--trials", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read_csv(&out.join("summary.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "BO-ES");
    assert_eq!(rows[0][7].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn config_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let bad_field = write(dir.path(), "a.toml", "[noise]\nexec_sd = -1.0\n");
    let o = uibo(&["benchmark", "--config", &bad_field]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("noise.exec_sd"), "{}", stderr(&o));

    let garbled = write(dir.path(), "b.toml", "[noise\nexec_sd = ");
    let o = uibo(&["benchmark", "--config", &garbled]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("could not parse config"), "{}", stderr(&o));

    let o = uibo(&["benchmark", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing.toml"), "{}", stderr(&o));

    let blocker = write(dir.path(), "file", "");
    let cfg = write(dir.path(), "ok.toml", SMALL);
    let o = uibo(&["benchmark", "--config", &cfg, "--out", &format!("{blocker}/sub")]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("file/sub"), "{}", stderr(&o));
}

#[test]
fn replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let o = uibo(&["gen-replay", "--out", gen.to_str().unwrap(), "--seed", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let rep = dir.path().join("rep");
    let args = |obs: &str, val: &str, out: &Path| {
        vec![
            "replay".to_string(),
            "--config".into(),
            gen.join("config.toml").to_str().unwrap().into(),
            "--observations".into(),
            obs.into(),
            "--validation".into(),
            val.into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let obs = gen.join("observations.csv");
    let a = args(obs.to_str().unwrap(), gen.join("validation.csv").to_str().unwrap(), &rep);
    let o = uibo(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success(), "{}", stderr(&o));

    let (header, rows) = read_csv(&rep.join("validation.csv"));
    assert_eq!(header, ["mode", "wrmse", "rmse"]);
    assert_eq!(rows.len(), 2);
    let (header, _) = read_csv(&rep.join("hyperparams.csv"));
    assert_eq!(header[0], "mode");

    // Scoring the fitted mean against its own grid dump gives zero error.
    let (_, grid) = read_csv(&rep.join("posterior_uncertain.csv"));
    let mut body = String::from("x,y,vibration\n");
    for r in &grid {
        body.push_str(&format!("{},{},{}\n", r[0], r[1], r[2]));
    }
    let own = write(dir.path(), "own.csv", &body);
    let rep2 = dir.path().join("rep2");
    let a = args(obs.to_str().unwrap(), &own, &rep2);
    assert!(uibo(&a.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
    let (_, rows) = read_csv(&rep2.join("validation.csv"));
    assert_eq!(rows[0][0], "uncertain");
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn replay_reports_malformed_line() {
    let dir = tempfile::tempdir().unwrap();
    let obs = write(
        dir.path(),
        "obs.csv",
        "x_mean,y_mean,cov_xx,cov_xy,cov_yy,vibration\n1,1,0.1,0,0.1,2\n2,2,0.1,0.5,0.1,2\n",
    );
    let val = write(dir.path(), "val.csv", "x,y,vibration\n1,1,2\n2,2,3\n");
    let o = uibo(&["replay", "--observations", &obs, "--validation", &val, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}
