//! Commands behind the `rodflow` binary.

pub mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::RodError;
use crate::integrator::{HierarchyFlow, Trajectory};
use crate::lax::{lax_hamiltonian, lax_rhs, residue_invariants, LaxFlow, LaxOperator, MU_SAMPLES};
use crate::model::{hamiltonian, rhs, strains};
use crate::integrator::hierarchy::relative_drift;
use crate::integrator::simulate;
use crate::poincare::{scan, seed_on_level_set, write_sections_csv, ScanManifest};
use crate::reduction::{
    integral_i, reduced_hamiltonian_isotropic, to_canonical, to_canonical_on, CanonicalState, CasimirTriple,
    ReducedFlow,
};
use crate::state::{FieldState, HierarchyLevel};
use crate::verify::{Suite, SuiteReport};

pub use config::{Command, ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(RodError),
    #[error("invalid input: {0}")]
    Input(RodError),
}

impl From<RodError> for CliError {
    fn from(e: RodError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Input(e)
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn write_file<F>(path: &Path, body: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut out = BufWriter::new(file);
    body(&mut out).and_then(|_| out.flush()).map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_file(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value).map_err(std::io::Error::other)?;
        writeln!(out)
    })
}

/// What a command wrote and printed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

#[derive(Debug, Serialize)]
struct SimulateLedger<'a> {
    level: HierarchyLevel,
    config: &'a RunConfig,
    steps: usize,
    s_end: f64,
    final_state: Vec<f64>,
    drift: Vec<(String, f64)>,
    max_drift: f64,
}

pub fn cmd_simulate(config: &RunConfig) -> CliResult<Outcome> {
    config.validate_for(Command::Simulate)?;
    let x0 = config.body_state()?;
    let traj = simulate(&x0, &config.params, config.span()?, &config.integrator.options())?;
    let csv = config.output.path("trajectory.csv");
    write_file(&csv, |out| traj.write_csv(out))?;
    let drift = traj.drift();
    let ledger = SimulateLedger {
        level: x0.level(),
        config,
        steps: traj.trajectory.len() - 1,
        s_end: traj.trajectory.s_end(),
        final_state: traj.final_state().as_vec(),
        drift: drift.columns.clone(),
        max_drift: drift.max(),
    };
    let json = config.output.path("ledger.json");
    write_json(&json, &ledger)?;
    let mut summary: Vec<String> = drift.columns.iter().map(|(n, d)| format!("drift {n:<8} {d:.3e}")).collect();
    summary.push(format!("max drift {:.3e}", drift.max()));
    Ok(Outcome {
        files: vec![csv, json],
        summary,
    })
}

#[derive(Debug, Serialize)]
struct ReduceReport {
    casimirs: CasimirTriple,
    initial: CanonicalState,
    steps: usize,
    hamiltonian_drift: f64,
    integral_drift: f64,
    /// Largest difference between the reduced flow and the projected body flow.
    body_deviation: f64,
}

/// Largest componentwise gap between the reduced trajectory and the body
/// trajectory mapped to canonical variables, angles compared mod 2π.
pub fn reduction_deviation(reduced: &Trajectory, body: &Trajectory, cas: &CasimirTriple) -> Result<f64, RodError> {
    let mut worst: f64 = 0.0;
    for (s, y) in reduced.grid().iter().zip(reduced.states()) {
        let Some(x) = body.interpolate(*s) else {
            continue;
        };
        let c = to_canonical_on(&FieldState::from_slice(HierarchyLevel::Magnetic, &x)?, cas)?.to_array();
        for i in 0..6 {
            let mut d = c[i] - y[i];
            if i == 1 || i == 2 {
                d = (d + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
            }
            worst = worst.max(d.abs());
        }
    }
    Ok(worst)
}

pub fn cmd_reduce(config: &RunConfig) -> CliResult<Outcome> {
    config.validate_for(Command::Reduce)?;
    let x0 = config.body_state()?;
    let (c0, cas) = match &config.initial {
        Some(config::InitialState::Canonical { state, casimirs }) => (*state, *casimirs),
        _ => to_canonical(&x0)?,
    };
    let opts = config.integrator.options();
    let span = config.span()?;
    let flow = ReducedFlow::new(cas, config.params)?;
    let reduced = Trajectory::integrate(&flow, &c0.to_array(), span, &opts)?;
    let body = Trajectory::integrate(&HierarchyFlow::new(HierarchyLevel::Magnetic, config.params), &x0.as_vec(), span, &opts)?;
    let energies: Vec<(f64, f64)> = reduced
        .states()
        .iter()
        .map(|y| {
            let c = CanonicalState::from_array(y);
            Ok((reduced_hamiltonian_isotropic(&c, &cas, &config.params)?, integral_i(&c, &cas, &config.params)?))
        })
        .collect::<Result<_, RodError>>()?;
    let report = ReduceReport {
        casimirs: cas,
        initial: c0,
        steps: reduced.len() - 1,
        hamiltonian_drift: relative_drift(energies.iter().map(|e| e.0)),
        integral_drift: relative_drift(energies.iter().map(|e| e.1)),
        body_deviation: reduction_deviation(&reduced, &body, &cas)?,
    };
    let csv = config.output.path("reduced.csv");
    let names: Vec<String> = ["theta", "psi", "phi", "p_theta", "p_psi", "p_phi"].map(String::from).to_vec();
    let params = config.params;
    write_file(&csv, |out| {
        reduced.write_csv(out, &names, &["H".to_string(), "I".to_string()], |y| {
            let c = CanonicalState::from_array(y);
            vec![
                reduced_hamiltonian_isotropic(&c, &cas, &params).unwrap_or(f64::NAN),
                integral_i(&c, &cas, &params).unwrap_or(f64::NAN),
            ]
        })
    })?;
    let json = config.output.path("reduce.json");
    write_json(&json, &report)?;
    Ok(Outcome {
        files: vec![csv, json],
        summary: vec![
            format!("drift H        {:.3e}", report.hamiltonian_drift),
            format!("drift I        {:.3e}", report.integral_drift),
            format!("body deviation {:.3e}", report.body_deviation),
        ],
    })
}

pub fn cmd_poincare(config: &RunConfig) -> CliResult<Outcome> {
    config.validate_for(Command::Poincare)?;
    let spec = config.section.expect("validated");
    let ls = config.level_set.expect("validated");
    let targets = ls.targets(config.params);
    let seeds = seed_on_level_set(&targets, ls.n_seeds, config.rng_seed)?;
    let opts = config.integrator.options();
    let orbits = scan(&spec, &targets, &seeds, ls.system, &opts)?;
    let csv = config.output.path("sections.csv");
    write_file(&csv, |out| write_sections_csv(&orbits, out))?;
    let manifest = ScanManifest {
        targets,
        section: spec,
        system: ls.system,
        tol: opts.tol,
        rng_seed: config.rng_seed,
        seeds: seeds.clone(),
        crossings: orbits.iter().map(|o| o.points.len()).collect(),
    };
    let json = config.output.path("manifest.json");
    write_json(&json, &manifest)?;
    let summary = orbits
        .iter()
        .map(|o| {
            format!(
                "orbit {:>3}: {:>5} crossings, max residual {:.2e}, max invariant error {:.2e}",
                o.orbit_id,
                o.points.len(),
                o.points.max_residual(),
                o.points.max_invariant_error(targets.hamiltonian, targets.integral)
            )
        })
        .collect();
    Ok(Outcome {
        files: vec![csv, json],
        summary,
    })
}

#[derive(Debug, Serialize)]
struct LaxReport {
    level: HierarchyLevel,
    coefficient_defect: f64,
    mu_coefficient: f64,
    invariant_drift: f64,
    hamiltonian_offset: f64,
    isospectral_drift: f64,
    steps: usize,
}

pub fn cmd_lax_check(config: &RunConfig) -> CliResult<Outcome> {
    config.validate_for(Command::LaxCheck)?;
    let x0 = config.body_state()?;
    let params = config.params;
    let level = x0.level();
    let k = params.bending()?;
    let gamma0 = LaxOperator::from_state(&x0, k);
    let d = lax_rhs(&gamma0, &strains(&x0.m(), &params));
    let coefficient_defect = d
        .coeffs
        .iter()
        .zip(rhs(&x0, &params).fields())
        .map(|(c, f)| (c.vee() - f).amax())
        .fold(0.0, f64::max);
    let flow = LaxFlow::new(level, params)?;
    let traj = Trajectory::integrate(&flow, &x0.as_vec(), config.span()?, &config.integrator.options())?;
    let gammas: Vec<LaxOperator> = traj
        .states()
        .iter()
        .map(|y| FieldState::from_slice(level, y).map(|s| LaxOperator::from_state(&s, k)))
        .collect::<Result<_, _>>()?;
    let invariants: Vec<_> = gammas.iter().map(residue_invariants).collect();
    let width = invariants[0].values().len();
    let invariant_drift = (0..width)
        .map(|i| relative_drift(invariants.iter().map(|inv| inv.values()[i])))
        .fold(0.0, f64::max);
    let hamiltonian_offset = (lax_hamiltonian(&invariants[0], &params)? - hamiltonian(&x0, &params)).abs();
    let (first, last) = (&gammas[0], &gammas[gammas.len() - 1]);
    let isospectral_drift = MU_SAMPLES
        .iter()
        .map(|&mu| {
            let (a, b) = (first.spectrum(mu), last.spectrum(mu));
            (0..3).map(|i| (a[i] - b[i]).abs() / a[i].abs().max(1.0)).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let report = LaxReport {
        level,
        coefficient_defect,
        mu_coefficient: d.mu1.vee().amax().max(d.mu2.vee().amax()),
        invariant_drift,
        hamiltonian_offset,
        isospectral_drift,
        steps: traj.len() - 1,
    };
    let json = config.output.path("lax.json");
    write_json(&json, &report)?;
    Ok(Outcome {
        files: vec![json],
        summary: vec![
            format!("coefficient defect {:.3e}", report.coefficient_defect),
            format!("invariant drift    {:.3e}", report.invariant_drift),
            format!("H offset           {:.3e}", report.hamiltonian_offset),
            format!("isospectral drift  {:.3e}", report.isospectral_drift),
        ],
    })
}

/// Runs one suite, or all with `"all"`, and writes the report array.
pub fn cmd_verify(suite: &str, out: Option<&Path>) -> CliResult<(Vec<SuiteReport>, Outcome)> {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![suite
            .parse::<Suite>()
            .map_err(|e| ConfigError::new("suite", e.to_string()))?]
    };
    let reports: Vec<SuiteReport> = suites.iter().map(|s| s.run()).collect::<Result<_, _>>()?;
    let mut outcome = Outcome::default();
    for r in &reports {
        for c in &r.checks {
            outcome.summary.push(format!(
                "{:<9} {:<4} {:<62} {:.3e} (< {:.0e})",
                r.suite.name(),
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.measured,
                c.threshold
            ));
        }
    }
    if let Some(path) = out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| ConfigError::new("--out", format!("{}: {e}", parent.display())))?;
        }
        write_json(path, &reports)?;
        outcome.files.push(path.to_path_buf());
    }
    Ok((reports, outcome))
}

/// Loads a config and runs `command`, mapping failures to exit codes.
pub fn run_config_command(command: Command, path: &Path) -> (i32, CliResult<Outcome>) {
    let result = RunConfig::from_file(path).map_err(CliError::from).and_then(|config| match command {
        Command::Simulate => cmd_simulate(&config),
        Command::Reduce => cmd_reduce(&config),
        Command::Poincare => cmd_poincare(&config),
        Command::LaxCheck => cmd_lax_check(&config),
    });
    let code = match &result {
        Ok(_) => EXIT_OK,
        Err(e) => e.exit_code(),
    };
    (code, result)
}
