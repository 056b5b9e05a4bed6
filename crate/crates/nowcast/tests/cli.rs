use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn demo_config() -> PathBuf {
    demo_dir().join("demo.toml")
}

fn nowcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nowcast")).args(args).env_remove("NOWCAST_OUT").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn demo_copy(dir: &Path, edits: &[(&str, &str)]) -> PathBuf {
    fs::create_dir_all(dir.join("regimes")).unwrap();
    for f in ["index_tables.csv", "regimes/baseline.toml", "regimes/covid.toml"] {
        fs::copy(demo_dir().join(f), dir.join(f)).unwrap();
    }
    let mut text = fs::read_to_string(demo_config()).unwrap();
    for (from, to) in edits {
        assert!(text.contains(from));
        text = text.replace(from, to);
    }
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn demo_run_succeeds_with_passing_checks() {
    let out = tempfile::tempdir().unwrap();
    let o = nowcast(&["run", "--config", demo_config().to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let months = ["2020-03", "2020-04", "2020-05", "2020-06"];
    for m in months {
        let checks = fs::read_to_string(out.path().join(format!("months/{m}/checks.csv"))).unwrap();
        for line in checks.lines().skip(1) {
            assert!(line.ends_with(",true"), "{m}: {line}");
        }
        for t in [
            "table01_demographics.csv",
            "table02_unemployment.csv",
            "table04_market_income_quintiles.csv",
            "table05_market_income_effects.csv",
            "table06_disposable_quintiles.csv",
            "table07_disposable_effects.csv",
            "table08_breakdown.csv",
            "table09_market_gini.csv",
            "table10_disposable_gini.csv",
            "table11_poverty.csv",
        ] {
            assert!(out.path().join(format!("months/{m}/{t}")).is_file(), "{m}/{t}");
        }
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 20200401);
    assert_eq!(manifest["engine"]["name"], "nowcast");
    let listed = manifest["files"].as_array().unwrap();
    assert_eq!(listed.len() + 1, files_under(out.path()).len());
    for f in listed {
        let bytes = fs::read(out.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), nowcast::report::sha256_hex(&bytes));
    }
    let gini = fs::read_to_string(out.path().join("gini_series.csv")).unwrap();
    assert_eq!(gini.lines().count(), 1 + 2 * months.len());
}

#[test]
fn dropping_a_month_leaves_the_others_unchanged() {
    let (full, part) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = demo_config();
    let cfg = cfg.to_str().unwrap();
    assert!(nowcast(&["run", "--config", cfg, "--out", full.path().to_str().unwrap()]).status.success());
    let o = nowcast(&["run", "--config", cfg, "--out", part.path().to_str().unwrap(), "--months", "2020-04,2020-06"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!part.path().join("months/2020-05").exists());
    for m in ["2020-04", "2020-06"] {
        let dir = Path::new("months").join(m);
        let names = files_under(&part.path().join(&dir));
        assert_eq!(names, files_under(&full.path().join(&dir)));
        for n in names {
            assert_eq!(fs::read(part.path().join(&dir).join(&n)).unwrap(), fs::read(full.path().join(&dir).join(&n)).unwrap());
        }
    }
}

#[test]
fn output_directory_precedence() {
    let root = tempfile::tempdir().unwrap();
    let config = demo_copy(root.path(), &[("analysis_months = [\"2020-03\", \"2020-04\", \"2020-05\", \"2020-06\"]", "analysis_months = [\"2020-04\"]")]);
    let config = config.to_str().unwrap();
    let (env_dir, flag_dir) = (root.path().join("from_env"), root.path().join("from_flag"));
    let run = |args: &[&str], env: Option<&Path>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_nowcast"));
        c.args(args).env_remove("NOWCAST_OUT");
        if let Some(e) = env {
            c.env("NOWCAST_OUT", e);
        }
        c.output().unwrap()
    };
    assert!(run(&["run", "--config", config], Some(&env_dir)).status.success());
    assert!(env_dir.join("manifest.json").is_file());
    assert!(!root.path().join("out").exists());
    assert!(run(&["run", "--config", config, "--out", flag_dir.to_str().unwrap()], Some(&root.path().join("unused"))).status.success());
    assert!(flag_dir.join("manifest.json").is_file());
    assert!(!root.path().join("unused").exists());
    assert!(run(&["run", "--config", config], None).status.success());
    assert!(root.path().join("out/manifest.json").is_file());
}

#[test]
fn seed_flag_changes_the_run() {
    let root = tempfile::tempdir().unwrap();
    let config = demo_copy(root.path(), &[("analysis_months = [\"2020-03\", \"2020-04\", \"2020-05\", \"2020-06\"]", "analysis_months = [\"2020-04\"]")]);
    let config = config.to_str().unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    assert!(nowcast(&["run", "--config", config, "--out", a.to_str().unwrap()]).status.success());
    assert!(nowcast(&["run", "--config", config, "--out", b.to_str().unwrap(), "--seed", "7"]).status.success());
    let read = |d: &Path| fs::read(d.join("months/2020-04/table10_disposable_gini.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn missing_regime_file_exits_with_config_error() {
    let root = tempfile::tempdir().unwrap();
    let config = demo_copy(root.path(), &[("regimes/covid.toml", "regimes/absent.toml")]);
    let o = nowcast(&["run", "--config", config.to_str().unwrap(), "--out", root.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[config]:") && err.contains("absent.toml"), "{err}");
    assert!(!root.path().join("o").exists());
}

#[test]
fn infeasible_alignment_is_a_runtime_error() {
    let root = tempfile::tempdir().unwrap();
    let config = demo_copy(root.path(), &[("count = 3500000.0", "count = 3500000000.0")]);
    let o = nowcast(&["run", "--config", config.to_str().unwrap(), "--out", root.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[alignment]:"), "{err}");
}

#[test]
fn validate_reports_and_exits() {
    let o = nowcast(&["validate", "--config", demo_config().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let root = tempfile::tempdir().unwrap();
    let config = demo_copy(root.path(), &[("baseline_month = \"2020-02\"\nanalysis", "baseline_month = \"2020-02\"\nanalysis_months_unused = 0\nanalysis")]);
    let o = nowcast(&["validate", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[config]:"));
    let config = demo_copy(root.path(), &[(r#"["2020-03", "2020-04""#, r#"["2020-03", "2020-02""#)]);
    let o = nowcast(&["validate", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("2020-02"));
}

#[test]
fn bad_arguments_exit_with_config_error() {
    let o = nowcast(&["run", "--config", demo_config().to_str().unwrap(), "--months", "2020-13"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().count(), 1);
    let o = nowcast(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn generated_files_reproduce_the_synthetic_run() {
    let root = tempfile::tempdir().unwrap();
    let config = demo_copy(root.path(), &[("analysis_months = [\"2020-03\", \"2020-04\", \"2020-05\", \"2020-06\"]", "analysis_months = [\"2020-05\"]")]);
    let data = root.path().join("data");
    let o = nowcast(&["gen-synth", "--config", config.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["survey_persons.csv", "survey_households.csv", "panel_persons.csv", "panel_households.csv", "payroll.csv"] {
        assert!(data.join(f).is_file(), "{f}");
    }
    let text = fs::read_to_string(&config).unwrap();
    let start = text.find("[data.synth]").unwrap();
    let end = text.find("[regimes]").unwrap();
    let files = "[data.files]\nsurvey_persons = \"data/survey_persons.csv\"\nsurvey_households = \"data/survey_households.csv\"\npanel_persons = \"data/panel_persons.csv\"\npanel_households = \"data/panel_households.csv\"\npayroll = \"data/payroll.csv\"\n\n";
    let from_files = root.path().join("files.toml");
    fs::write(&from_files, format!("{}{files}{}", &text[..start], &text[end..])).unwrap();

    let (a, b) = (root.path().join("a"), root.path().join("b"));
    assert!(nowcast(&["run", "--config", config.to_str().unwrap(), "--out", a.to_str().unwrap()]).status.success());
    let o = nowcast(&["run", "--config", from_files.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = Path::new("months/2020-05");
    for n in files_under(&a.join(dir)) {
        assert_eq!(fs::read(a.join(dir).join(&n)).unwrap(), fs::read(b.join(dir).join(&n)).unwrap(), "{}", n.display());
    }
}
