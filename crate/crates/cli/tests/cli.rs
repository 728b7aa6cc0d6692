use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tangent_eq::problems::ProblemConfig;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "cfg"))
        .collect();
    v.sort();
    v
}

fn bin(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tangent-eq"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove(tangent_eq_cli::OUT_ENV)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// `(command, exit code)` pairs from a config's `# verdicts:` block.
fn verdicts(path: &Path) -> Vec<(String, i32)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| {
            let rest = l.strip_prefix("#   ")?;
            let (cmd, verdict) = rest.split_once(": exit ")?;
            let code = verdict.split(|c: char| !c.is_ascii_digit()).next()?.parse().ok()?;
            Some((cmd.to_string(), code))
        })
        .collect()
}

#[test]
fn shipped_configs_match_their_recorded_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    for cfg in shipped() {
        let recorded = verdicts(&cfg);
        assert!(!recorded.is_empty(), "{} records no verdicts", cfg.display());
        for (cmd, expected) in recorded {
            let o = bin(&[&cmd, cfg.to_str().unwrap()], tmp.path());
            assert_eq!(code(&o), expected, "{} {cmd}: stderr {}", cfg.display(), String::from_utf8_lossy(&o.stderr));
        }
    }
}

#[test]
fn shipped_configs_round_trip() {
    for cfg in shipped() {
        let parsed = ProblemConfig::load(&cfg).unwrap();
        let again = ProblemConfig::parse(&parsed.to_ini_string()).unwrap();
        assert_eq!(parsed, again, "{}", cfg.display());
    }
}

#[test]
fn outputs_are_byte_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for name in ["drift.cfg", "filippov.cfg", "moving_rectangles.cfg"] {
        let cfg = configs_dir().join(name);
        for cmd in ["solve", "check-conditions", "simulate"] {
            assert_eq!(code(&bin(&["--seed", "5", cmd, cfg.to_str().unwrap()], a.path())), 0);
            assert_eq!(code(&bin(&["--seed", "5", cmd, cfg.to_str().unwrap()], b.path())), 0);
            for file in ["report.json", "u_star.csv", "residuals.csv"] {
                let (pa, pb) = (a.path().join(file), b.path().join(file));
                if pa.exists() {
                    assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap(), "{name} {cmd} {file}");
                }
            }
        }
    }
}

#[test]
fn seed_flag_changes_random_start() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("drift.cfg");
    let run = |seed: &str| {
        bin(&["--seed", seed, "check-conditions", cfg.to_str().unwrap()], tmp.path());
        fs::read_to_string(tmp.path().join("report.json")).unwrap()
    };
    assert_ne!(run("1"), run("2"));
    assert_eq!(run("3"), run("3"));
}

#[test]
fn solve_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("neumann_logistic.cfg");
    assert_eq!(code(&bin(&["solve", cfg.to_str().unwrap()], tmp.path())), 0);
    let csv = fs::read_to_string(tmp.path().join("u_star.csv")).unwrap();
    assert!(csv.starts_with("x,u_1\n"));
    assert_eq!(csv.lines().count(), 102);
    for line in csv.lines().skip(1) {
        let u: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((u - 1.0).abs() < 1e-6, "{line}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "Converged");
    for key in ["residual_history", "tangency_residual", "constraint_violation", "condition_report"] {
        assert!(!report[key].is_null(), "missing {key}");
    }
    assert!(fs::read_to_string(tmp.path().join("residuals.csv")).unwrap().starts_with("iter,residual\n1,"));
}

#[test]
fn forced_solve_reports_tangency_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("outward.cfg");
    let o = bin(&["--force", "solve", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 2);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "TangencyFailure");
    assert!((report["tangency_failure"]["u"][0].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn miranda_reports_the_affine_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("affine.cfg");
    assert_eq!(code(&bin(&["miranda", cfg.to_str().unwrap()], tmp.path())), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    let zero: Vec<f64> = report["zero"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((zero[0] - 0.25).abs() < 1e-9 && (zero[1] + 0.5).abs() < 1e-9);
}

#[test]
fn invariance_witness_lands_in_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("dirichlet_box.cfg");
    assert_eq!(code(&bin(&["check-invariance", cfg.to_str().unwrap()], tmp.path())), 2);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert!(report["audit"]["witness"]["overshoot"].as_f64().unwrap() > 0.4);
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin(&["solve", "/nonexistent.cfg"], tmp.path())), 1);
    assert_eq!(code(&bin(&["frobnicate"], tmp.path())), 1);
    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "[problem]\nkind = neumann_rd\ncolour = blue\n").unwrap();
    let o = bin(&["solve", bad.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_dir = tmp.path().join("cfgs");
    fs::create_dir_all(&cfg_dir).unwrap();
    let text = fs::read_to_string(configs_dir().join("affine.cfg")).unwrap() + "\n[output]\ndir = results\n";
    let cfg = cfg_dir.join("affine.cfg");
    fs::write(&cfg, text).unwrap();
    let run = |env: Option<&Path>, out: Option<&Path>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_tangent-eq"));
        c.current_dir(tmp.path()).env_remove(tangent_eq_cli::OUT_ENV);
        if let Some(e) = env {
            c.env(tangent_eq_cli::OUT_ENV, e);
        }
        if let Some(o) = out {
            c.arg("--out").arg(o);
        }
        assert!(c.arg("miranda").arg(&cfg).status().unwrap().success());
    };
    run(None, None);
    assert!(cfg_dir.join("results/report.json").exists());
    let env_dir = tmp.path().join("from_env");
    run(Some(&env_dir), None);
    assert!(env_dir.join("report.json").exists());
    let flag_dir = tmp.path().join("from_flag");
    run(Some(&env_dir), Some(&flag_dir));
    assert!(flag_dir.join("report.json").exists());
}
