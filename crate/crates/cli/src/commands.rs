//! Subcommand implementations. Each writes its outputs and a manifest into the
//! output directory and returns the checks it asserted.

use std::fs;
use std::path::{Path, PathBuf};

use paraburgers::experiments::{blowup_scan, conjugation_study, energy_estimate_study, Outcome, ScanConfig};
use paraburgers::gauge::{ConjugatingConfig, SeriesConfig};
use paraburgers::solver::{run, Equation, SimConfig, Trajectory};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{diagnostics_row, write_csv, Check, RunManifest, DIAGNOSTICS_COLUMNS};
use crate::snapshot::{save_field, save_trajectory, write_atomic};
use crate::suites;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    VerifyCalculus,
    VerifyFlow,
    VerifyGauge,
    Estimate,
    Conjugate,
    Scan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::VerifyCalculus => "verify-calculus",
            Command::VerifyFlow => "verify-flow",
            Command::VerifyGauge => "verify-gauge",
            Command::Estimate => "estimate",
            Command::Conjugate => "conjugate",
            Command::Scan => "scan",
        }
    }
}

/// What a subcommand produced: the checks it asserted and the files it wrote.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub checks: Vec<Check>,
    pub outputs: Vec<PathBuf>,
    /// One-line human summary for observation-only studies.
    pub summary: Option<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

type CmdResult = Result<RunOutcome, Box<dyn std::error::Error>>;

pub fn dispatch(cmd: Command, cfg: &RunConfig, out: &Path) -> CmdResult {
    fs::create_dir_all(out)?;
    let mut outcome = match cmd {
        Command::Simulate => simulate(cfg, out)?,
        Command::VerifyCalculus => checks_only(suites::calculus_suite()?),
        Command::VerifyFlow => {
            let mut c = suites::flow_suite()?;
            c.extend(suites::bch_suite()?);
            checks_only(c)
        }
        Command::VerifyGauge => {
            let (n, alpha, cut) = (cfg.sim.n_points, cfg.sim.alpha, cfg.sim.cutoff);
            let mut c = suites::gauge_suite(n, &[alpha], &cut, 3)?;
            c.extend(suites::nonlinear_gauge_suite(n, &[alpha], &cut)?);
            c.extend(suites::resonance_suite());
            checks_only(c)
        }
        Command::Estimate => estimate(cfg, out)?,
        Command::Conjugate => conjugate(cfg, out)?,
        Command::Scan => scan(cfg, out)?,
    };
    if !outcome.checks.is_empty() {
        let path = out.join("checks.csv");
        let rows: Vec<(String, String, f64, f64, bool)> = outcome
            .checks
            .iter()
            .map(|c| (c.name.clone(), c.expected.clone(), c.actual, c.tolerance, c.passed))
            .collect();
        write_csv(&path, &["name", "expected", "actual", "tolerance", "passed"], &rows)?;
        outcome.outputs.push(path);
    }
    let manifest = RunManifest::new(&cfg.canonical, cfg.sim.seed, &outcome.outputs).write(out)?;
    outcome.outputs.push(manifest);
    Ok(outcome)
}

fn checks_only(checks: Vec<Check>) -> RunOutcome {
    RunOutcome {
        checks,
        ..Default::default()
    }
}

fn simulate(cfg: &RunConfig, out: &Path) -> CmdResult {
    let traj = run(&cfg.sim)?;
    let csv = out.join("diagnostics.csv");
    let rows: Vec<[f64; 7]> = traj.diagnostics.iter().map(|d| diagnostics_row(d, cfg.s)).collect();
    write_csv(&csv, &DIAGNOSTICS_COLUMNS, &rows)?;
    let mut outputs = vec![csv];
    let last = out.join("final.pbrg");
    let (u, t) = (traj.states.last().unwrap(), *traj.times.last().unwrap());
    save_field(&last, u, cfg.sim.alpha, t)?;
    outputs.push(last);
    outputs.extend(save_trajectory(&out.join("trajectory.pbrg"), &traj, cfg.sim.alpha)?);
    let summary = match traj.blowup {
        Some(b) => format!("stopped at t = {} ({:?})", b.t, b.trigger),
        None => format!("reached t = {t} in {} steps", traj.steps),
    };
    Ok(RunOutcome {
        checks: Vec::new(),
        outputs,
        summary: Some(summary),
    })
}

#[derive(Serialize)]
struct Report<'a> {
    study: &'a str,
    verdict: String,
    fitted_constant: f64,
    max_ratio: f64,
    #[serde(flatten)]
    extra: serde_json::Value,
}

fn write_report(out: &Path, report: &Report) -> std::io::Result<PathBuf> {
    let path = out.join("report.json");
    let mut text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// The energy and conjugation studies are defined on the paralinear flow, so the
/// configured `equation` is overridden for them.
fn paralinear_run(cfg: &RunConfig) -> paraburgers::Result<Trajectory> {
    run(&SimConfig {
        equation: Equation::Paralinear,
        ..cfg.sim.clone()
    })
}

fn estimate(cfg: &RunConfig, out: &Path) -> CmdResult {
    let traj = paralinear_run(cfg)?;
    let study = energy_estimate_study(&traj, cfg.s, cfg.sim.alpha, &cfg.sim.cutoff)?;
    let csv = out.join("energy.csv");
    let rows: Vec<[f64; 6]> = study
        .samples
        .iter()
        .map(|e| [e.t, e.w_norm, e.v_norm, e.dw_dt, e.forcing, e.ratio])
        .collect();
    write_csv(&csv, &["t", "w_norm", "v_norm", "dw_dt", "forcing", "ratio"], &rows)?;
    let report = write_report(
        out,
        &Report {
            study: "energy",
            verdict: format!("{:?}", study.report.verdict),
            fitted_constant: study.report.fitted_constant,
            max_ratio: study.report.max_ratio,
            extra: serde_json::json!({
                "hermitian_residual": study.hermitian_residual,
                "bracket_skew_residual": study.bracket_skew_residual,
                "equivalence": study.equivalence,
                "growth_constant": study.growth_constant,
            }),
        },
    )?;
    Ok(RunOutcome {
        checks: Vec::new(),
        outputs: vec![csv, report],
        summary: Some(format!(
            "energy ratio: max {:.4e}, fitted {:.4e}, verdict {:?}",
            study.report.max_ratio, study.report.fitted_constant, study.report.verdict
        )),
    })
}

fn conjugate(cfg: &RunConfig, out: &Path) -> CmdResult {
    let traj = paralinear_run(cfg)?;
    let gauge = ConjugatingConfig {
        series: SeriesConfig {
            j_max: cfg.j_max,
            ..SeriesConfig::default()
        },
        ..ConjugatingConfig::default()
    };
    let study = conjugation_study(&traj, cfg.sim.alpha, &cfg.sim.cutoff, &cfg.s_probes, gauge)?;
    let csv = out.join("conjugation.csv");
    let rows: Vec<(f64, Option<f64>)> = traj.times.iter().copied().zip(study.orders.iter().copied()).collect();
    write_csv(&csv, &["t", "order"], &rows)?;
    let report = write_report(
        out,
        &Report {
            study: "conjugation",
            verdict: format!("{:?}", study.report.verdict),
            fitted_constant: study.report.fitted_constant,
            max_ratio: study.report.max_ratio,
            extra: serde_json::json!({
                "order": study.order,
                "operator_norm": study.operator_norm,
                "ellipticity": study.ellipticity,
                "consistency": study.consistency,
                "gauge_iterations": study.gauge_iterations,
                "gauge_residual": study.gauge_residual,
            }),
        },
    )?;
    Ok(RunOutcome {
        checks: Vec::new(),
        outputs: vec![csv, report],
        summary: Some(format!("residual order {:?}, verdict {:?}", study.order, study.report.verdict)),
    })
}

fn outcome_cell(o: &Outcome) -> (String, Option<f64>) {
    (o.name().to_string(), o.time())
}

fn scan(cfg: &RunConfig, out: &Path) -> CmdResult {
    let scan_cfg = ScanConfig {
        resolutions: cfg.scan_resolutions.clone(),
        t_end: cfg.sim.t_end,
        sample_interval: cfg.scan_interval,
        seed: cfg.sim.seed,
        ..ScanConfig::new(cfg.sim.initial_condition, cfg.scan_alphas.clone(), cfg.scan_amplitudes.clone())
    };
    let table = blowup_scan(&scan_cfg)?;
    let mut header = vec!["alpha".to_string(), "amplitude".to_string(), "outcome".to_string(), "t".to_string()];
    for n in &cfg.scan_resolutions {
        header.push(format!("outcome_{n}"));
        header.push(format!("t_{n}"));
    }
    header.push("agree".into());
    let rows: Vec<Vec<String>> = table
        .cells
        .iter()
        .map(|c| {
            let (name, t) = outcome_cell(&c.outcome);
            let mut row = vec![c.alpha.to_string(), c.amplitude.to_string(), name, fmt_opt(t)];
            for (_, o) in &c.per_resolution {
                let (name, t) = outcome_cell(o);
                row.push(name);
                row.push(fmt_opt(t));
            }
            row.push(c.agree.to_string());
            row
        })
        .collect();
    let csv = out.join("scan.csv");
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&csv, &header, &rows)?;
    let checks = vec![Check::holds(
        "disagreeing cells are inconclusive",
        table.cells.iter().all(|c| c.agree || c.outcome == Outcome::Inconclusive),
    )];
    Ok(RunOutcome {
        checks,
        outputs: vec![csv],
        summary: Some(format!(
            "{} cells, agreement {:.0}%, {} monotonicity violations",
            table.cells.len(),
            100.0 * table.agreement_fraction(),
            table.monotonicity_violations.len()
        )),
    })
}

fn fmt_opt(t: Option<f64>) -> String {
    t.map(|x| x.to_string()).unwrap_or_default()
}
