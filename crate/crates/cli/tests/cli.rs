use std::path::{Path, PathBuf};
use std::process::Command;

use evsi_cli::config::Config;
use evsi_cli::{check_solution, cmd_solve, cmd_toy, SolutionFile, SolveArgs};
use rideshare_evsi::Mode;

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn evsi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evsi"))
}

#[test]
fn missing_file_exits_with_two() {
    let dir = scratch("missing");
    let out = evsi()
        .args(["solve", "--config", "no/such/config.json", "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));

    let out = evsi()
        .args(["solve", "--instance", "no/such/instance.json"])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_version_is_an_input_error() {
    let dir = scratch("version");
    let path = dir.join("config.json");
    std::fs::write(&path, r#"{"version": 7}"#).unwrap();
    let out = evsi().args(["toy"]).output().unwrap();
    assert!(out.status.success());
    let out = evsi()
        .arg("sweep")
        .arg("--config")
        .arg(&path)
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_paths_resolve_relative_to_the_file() {
    let dir = scratch("relative");
    let cfg = Config::default();
    std::fs::write(dir.join("inst.json"), serde_json::to_string(cfg.instance()).unwrap()).unwrap();
    std::fs::write(
        dir.join("real.json"),
        serde_json::to_string(cfg.realization().unwrap()).unwrap(),
    )
    .unwrap();
    std::fs::write(
        dir.join("config.json"),
        r#"{"version": 1, "instance": "inst.json", "realization": "real.json"}"#,
    )
    .unwrap();
    let loaded = Config::load(Some(&dir.join("config.json"))).unwrap();
    assert_eq!(loaded, cfg);
    assert_eq!(loaded.hash(), cfg.hash());
}

#[test]
fn export_problem_round_trips() {
    let dir = scratch("export");
    let file = dir.join("problem.txt");
    let args = SolveArgs {
        mode: Some(Mode::Sws),
        export_problem: Some(file.clone()),
        out_dir: dir.clone(),
        ..SolveArgs::default()
    };
    let outcome = cmd_solve(&args).unwrap();
    let text = std::fs::read_to_string(&file).unwrap();
    let problem = mibp::format::read_problem(&text).unwrap();
    assert_eq!(mibp::format::write_problem(&problem).unwrap(), text);

    // The solution file on disk matches what was returned and re-evaluates.
    let saved: SolutionFile =
        serde_json::from_str(&std::fs::read_to_string(dir.join("solution_sws.json")).unwrap()).unwrap();
    assert_eq!(saved, outcome.solution);
    let cfg = Config::default();
    let revenue = check_solution(&cfg, &saved).unwrap();
    assert!((revenue - saved.value.unwrap()).abs() <= 1e-6 * revenue);
    assert!(outcome.report.contains("prices"));
}

#[test]
fn toy_writes_csv() {
    let dir = scratch("toy");
    let text = cmd_toy(100, Some(&dir)).unwrap();
    assert!(text.contains("DIFFERS"));
    let csv = std::fs::read_to_string(dir.join("toy.csv")).unwrap();
    assert!(csv.starts_with("case,sto,ws,sws"));
    assert!(!csv.contains('\r'));
    assert!(dir.join("manifest.json").exists());
}
