use std::path::Path;
use std::process::Command;

use paraburgers_cli::config::parse_config;
use paraburgers_cli::output::config_hash;
use paraburgers_cli::snapshot::load_field;

const MINIMAL: &str = "\
n_points = 128
alpha = 1.5
equation = full
init = cos1
amplitude = 0.01
t_end = 1.0
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_paraburgers"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_writes_csv_snapshot_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("out");
    let st = bin().args(["simulate"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(st.success());
    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,mass,hamiltonian,H2,lipschitz,weak_criterion,sup"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert!(rows.len() >= 2);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows.last().unwrap()[0] - 1.0).abs() < 1e-12);
    // ‖0.01 cos x‖²_{L²(𝕋)} = π·10⁻⁴.
    assert!((rows[0][1] - std::f64::consts::PI * 1e-4).abs() < 1e-15);
    let (h, u) = load_field(&out.join("final.pbrg")).unwrap();
    assert_eq!(h.n_points, 128);
    assert!((h.t - 1.0).abs() < 1e-12);
    assert!(u.is_real());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let canonical = parse_config(&cfg).unwrap().canonical;
    assert_eq!(manifest["config_hash"], format!("{:016x}", config_hash(&canonical)));
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["tool_version"], env!("CARGO_PKG_VERSION"));
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|o| o.as_str().unwrap().ends_with("diagnostics.csv")));
    assert!(outputs.iter().all(|o| Path::new(o.as_str().unwrap()).exists()));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace("init = cos1", "init = random") + "seed = 11\n";
    let cfg = write_config(dir.path(), &text);
    let run = |name: &str| {
        let out = dir.path().join(name);
        assert!(bin().arg("simulate").arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
        (
            std::fs::read(out.join("diagnostics.csv")).unwrap(),
            std::fs::read(out.join("final.pbrg")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_2() {
    let o = bin().arg("transmogrify").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Usage"));
}

#[test]
fn bad_config_yields_a_json_failure_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{MINIMAL}colour = blue\n"));
    let o = bin().arg("simulate").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let rec: serde_json::Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(rec["name"], "config");
    assert!(rec["expected"].as_str().unwrap().contains("colour"));
    for key in ["name", "expected", "actual", "tolerance"] {
        assert!(rec.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn verify_gauge_passes_on_the_default_aperture() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace("n_points = 128", "n_points = 64") + "B = 8\n";
    let cfg = write_config(dir.path(), &text);
    let o = bin().arg("verify-gauge").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    let err = String::from_utf8_lossy(&o.stderr);
    println!("{err}");
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(err.contains("pass gauge residual alpha=1.5"));
    assert!(err.contains("note gauge seminorm bound alpha=1.5"));
}

#[test]
fn failed_study_reports_the_error() {
    // The energy study is defined for 1 < alpha < 2 only.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &MINIMAL.replace("alpha = 1.5", "alpha = 2.5"));
    let o = bin().arg("estimate").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let rec: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stdout).trim()).unwrap();
    assert_eq!(rec["name"], "estimate");
}

#[test]
fn estimate_is_observational() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace("n_points = 128", "n_points = 64") + "B = 4\nb = 1\nstride = 8\n";
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("o");
    let o = bin().arg("estimate").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    assert!(csv.starts_with("t,w_norm,v_norm,dw_dt,forcing,ratio\n"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["study"], "energy");
}

#[test]
fn scan_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace("t_end = 1.0", "t_end = 0.5")
        + "scan_alphas = 1.5, 2\nscan_amplitudes = 0.001\nscan_resolutions = 32, 64\n";
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("o");
    let o = bin().arg("scan").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "alpha,amplitude,outcome,t,outcome_32,t_32,outcome_64,t_64,agree");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1.5,0.001,none,"), "{}", lines[1]);
}
