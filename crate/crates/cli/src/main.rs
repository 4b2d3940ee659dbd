use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hybrid_avoid::config::{ConfigError, ScenarioConfig};
use hybrid_avoid::output::{write_point_cloud_csv, write_trajectory_csv, RunSummary, Summary};
use hybrid_avoid::params::{check_constraints, CheckStatus, ParamError, RawParams};
use hybrid_avoid::verify::sampling::{sample_set, SetLabel};
use hybrid_avoid::verify::suites::{
    boundary_reports, dimension_sweep, lemma_reports, ring_starts, trajectory_reports, Suite,
};
use hybrid_avoid::verify::{AuditConfig, PropertyReport};
use hybrid_avoid::{batch_simulate, validate, ControlLaw, ValidatedParams};

/// Minimum acceptance rate below which a sampled set is treated as empty.
const MIN_ACCEPTANCE: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "hybrid-avoid", version, about = "Hybrid obstacle-avoidance feedback: validate, simulate, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario's parameters and print the derived quantities.
    Validate {
        config: PathBuf,
    },
    /// Simulate every run in a scenario and write trajectories and a summary.
    Simulate {
        config: PathBuf,
        /// Recorded in the summary; runs themselves are deterministic.
        #[arg(long, env = "NAV_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        parallel: bool,
    },
    /// Run property suites and write a JSON report.
    Verify(VerifyArgs),
    /// Write point clouds of the flow, jump and obstacle sets.
    SampleSets(SampleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Lemmas,
    Boundary,
    Trajectory,
    All,
}

impl SuiteArg {
    fn suites(self) -> Vec<Suite> {
        match self {
            SuiteArg::Lemmas => vec![Suite::Lemmas],
            SuiteArg::Boundary => vec![Suite::Boundary],
            SuiteArg::Trajectory => vec![Suite::Trajectory],
            SuiteArg::All => Suite::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    config: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    suite: SuiteArg,
    /// Extra random scenes per dimension, e.g. `2..6` or `2,3,5`.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<Dims>,
    #[arg(long, env = "NAV_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Use the scenario's parameters without checking feasibility.
    #[arg(long)]
    skip_validation: bool,
    /// Report path; defaults to outputs.report_path from the scenario.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct SampleArgs {
    config: PathBuf,
    /// Set to sample; repeatable. Defaults to outputs.pointcloud.sets.
    #[arg(long = "set")]
    sets: Vec<SetLabel>,
    /// Points per set. Defaults to outputs.pointcloud.samples_per_set, else 2000.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, env = "NAV_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory. Defaults to outputs.pointcloud.dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone)]
struct Dims(Vec<usize>);

fn parse_dims(s: &str) -> Result<Dims, String> {
    let bad = || format!("invalid dimension list {s:?}; use e.g. 2..6 or 2,3,5");
    let dims: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let lo: usize = a.trim().parse().map_err(|_| bad())?;
        let hi: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        s.split(',').map(|d| d.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if dims.is_empty() || dims.iter().any(|&d| d < 2) {
        return Err(format!("dimensions must be at least 2 (got {s:?})"));
    }
    Ok(Dims(dims))
}

/// Failures that map to exit code 1. Anything else is a usage or
/// configuration error (exit code 2).
#[derive(Debug)]
struct PropertyFailure(String);

impl std::fmt::Display for PropertyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for PropertyFailure {}

fn fail(msg: impl Into<String>) -> anyhow::Error {
    PropertyFailure(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => cmd_validate(&config),
        Command::Simulate { config, seed, parallel } => cmd_simulate(&config, seed, parallel),
        Command::Verify(args) => cmd_verify(&args),
        Command::SampleSets(args) => cmd_sample_sets(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<PropertyFailure>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> Result<(ScenarioConfig, RawParams)> {
    let cfg = ScenarioConfig::load(path)?;
    let raw = match cfg.raw_params() {
        Ok(raw) => raw,
        Err(ConfigError::Param(e)) => return Err(fail(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    Ok((cfg, raw))
}

fn validated(raw: RawParams) -> Result<ValidatedParams> {
    validate(raw).map_err(|e| fail(e.to_string()))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<()> {
    let (_, raw) = load(path)?;
    println!("{:<10} {:>12}  {:<36} status", "constraint", "value", "interval");
    for c in check_constraints(&raw).map_err(|e| fail(e.to_string()))? {
        let interval = match (c.lower, c.upper) {
            (Some(lo), Some(hi)) => format!("({lo}, {hi})"),
            _ => "-".to_string(),
        };
        let status = match c.status {
            CheckStatus::Pass => "ok",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "skipped",
        };
        println!("{:<10} {:>12}  {:<36} {status}", c.constraint, c.actual, interval);
    }
    let p = match validate(raw) {
        Ok(p) => p,
        Err(ParamError::ValidationFailure(v)) => {
            for violation in &v {
                println!("violated: {violation}");
            }
            return Err(fail(format!("{} constraint(s) violated", v.len())));
        }
        Err(e) => return Err(fail(e.to_string())),
    };
    println!("mu_min    = {}", p.mu_min());
    println!("theta_max = {}", p.theta_max());
    println!("psi_max   = {}", p.psi_max());
    println!("p_1       = {:.3}  {}", p.p1(), p.p1());
    println!("p_-1      = {:.3}  {}", p.p_minus1(), p.p_minus1());
    println!("valid");
    Ok(())
}

fn cmd_simulate(path: &Path, seed: u64, parallel: bool) -> Result<()> {
    let (cfg, raw) = load(path)?;
    let law = ControlLaw::new(validated(raw)?);
    let inits = cfg.initial_conditions()?;
    cfg.sim.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    let results = batch_simulate(&law, &inits, &cfg.sim, parallel);

    let dir = &cfg.outputs.trajectory_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut runs = Vec::with_capacity(results.len());
    for (i, (result, (x0, m0))) in results.iter().zip(&inits).enumerate() {
        let csv = match result {
            Ok(traj) => {
                let file = dir.join(format!("run_{i:03}.csv"));
                let mut w = BufWriter::new(File::create(&file).with_context(|| format!("creating {}", file.display()))?);
                write_trajectory_csv(&mut w, traj, &law)?;
                w.flush()?;
                Some(file.display().to_string())
            }
            Err(_) => None,
        };
        runs.push(RunSummary::new(i, x0, *m0, result, &law, csv));
    }

    let eps = law.params().epsilon();
    let mut bad = Vec::new();
    for r in &runs {
        let safe = r.min_dist.is_some_and(|d| d >= eps * (1.0 - 1e-6));
        let line = match &r.error {
            Some(e) => format!("run {:>3}: error: {e}", r.index),
            None => format!(
                "run {:>3}: jumps={} min_dist={:.6} t_converge={} end={:?}",
                r.index,
                r.jumps.unwrap_or(0),
                r.min_dist.unwrap_or(f64::NAN),
                r.t_converge.map_or("-".to_string(), |t| format!("{t:.3}")),
                r.terminal_reason,
            ),
        };
        println!("{line}");
        if !(safe && r.converged()) {
            bad.push(r.index);
        }
    }
    let summary = Summary { params: law.params(), sim: cfg.sim, seed, runs };
    write_json(&cfg.outputs.summary_path, &summary)?;
    println!("summary written to {}", cfg.outputs.summary_path.display());
    if !bad.is_empty() {
        return Err(fail(format!("runs {bad:?} were unsafe or did not converge")));
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    config: String,
    seeds: Vec<u64>,
    samples: usize,
    suites: Vec<Suite>,
    dims: Vec<usize>,
    skip_validation: bool,
    passed: bool,
    reports: &'a [PropertyReport],
}

fn cmd_verify(args: &VerifyArgs) -> Result<()> {
    let (cfg, raw) = load(&args.config)?;
    let params = if args.skip_validation {
        ValidatedParams::new_unchecked(raw).map_err(|e| fail(e.to_string()))?
    } else {
        validated(raw)?
    };
    let law = ControlLaw::new(params);
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let seeds: Vec<u64> = (0..args.seeds).map(|k| args.seed.wrapping_add(k)).collect();
    let suites = args.suite.suites();

    let mut reports = Vec::new();
    for &seed in &seeds {
        if suites.contains(&Suite::Lemmas) {
            reports.extend(lemma_reports(&law, args.samples, seed));
        }
        if suites.contains(&Suite::Boundary) {
            reports.extend(boundary_reports(&law, args.samples, seed));
        }
    }
    if suites.contains(&Suite::Trajectory) {
        let mut inits = cfg.initial_conditions()?;
        if inits.is_empty() {
            let p = law.params();
            inits = ring_starts(&law, 20, 4f64.max(2.0 * (p.center().norm() + p.eps_h())), args.seed);
        }
        reports.extend(trajectory_reports(&law, &inits, &cfg.sim, &AuditConfig::default(), args.parallel));
    }
    let dims = args.dims.clone().map(|d| d.0).unwrap_or_default();
    if !dims.is_empty() {
        reports.extend(dimension_sweep(&dims, &seeds, &suites, args.samples));
    }

    for r in &reports {
        println!(
            "{} {:<32} n={} seed={} samples={} worst_margin={:e}{}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.dim,
            r.seed.map_or("-".to_string(), |s| s.to_string()),
            r.samples_tested,
            r.worst_margin,
            if r.notes.is_empty() { String::new() } else { format!(" notes={:?}", r.notes) },
        );
        if let Some(w) = r.failures.first() {
            println!("     first witness: x={} margin={:e} {}", w.x, w.margin, w.note);
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    let report_path = args.report.clone().unwrap_or_else(|| cfg.outputs.report_path.clone());
    let report = VerifyReport {
        config: args.config.display().to_string(),
        seeds,
        samples: args.samples,
        suites,
        dims,
        skip_validation: args.skip_validation,
        passed: failed == 0,
        reports: &reports,
    };
    write_json(&report_path, &report)?;
    println!("{}/{} reports passed; report written to {}", reports.len() - failed, reports.len(), report_path.display());
    if failed > 0 {
        return Err(fail(format!("{failed} report(s) failed")));
    }
    Ok(())
}

fn cmd_sample_sets(args: &SampleArgs) -> Result<()> {
    let (cfg, raw) = load(&args.config)?;
    let law = ControlLaw::new(validated(raw)?);
    let pc = cfg.outputs.pointcloud.as_ref();
    let sets = if args.sets.is_empty() { pc.map(|p| p.sets.clone()).unwrap_or_default() } else { args.sets.clone() };
    if sets.is_empty() {
        bail!("no sets requested: pass --set or configure outputs.pointcloud.sets");
    }
    let samples = args.samples.or(pc.map(|p| p.samples_per_set)).unwrap_or(2000);
    let dir = args.out_dir.clone().or(pc.map(|p| p.dir.clone())).unwrap_or_else(|| PathBuf::from("pointclouds"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let budget = (samples as u64).saturating_mul(200_000).clamp(1_000_000, 50_000_000);

    let mut sparse = Vec::new();
    for (k, label) in sets.into_iter().enumerate() {
        let cloud = sample_set(&law, label, samples, budget, args.seed.wrapping_add(k as u64));
        let file = dir.join(format!("{label}.csv"));
        let mut w = BufWriter::new(File::create(&file).with_context(|| format!("creating {}", file.display()))?);
        write_point_cloud_csv(&mut w, law.dim(), &cloud)?;
        w.flush()?;
        let rate = cloud.acceptance_rate();
        println!(
            "{label}: {} points from {} draws (acceptance {rate:e}) -> {}",
            cloud.points.len(),
            cloud.attempts,
            file.display()
        );
        if rate < MIN_ACCEPTANCE {
            sparse.push(label);
        }
    }
    if !sparse.is_empty() {
        return Err(fail(format!("acceptance rate below {MIN_ACCEPTANCE:e} for {sparse:?}; set likely empty")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_forms() {
        assert_eq!(parse_dims("2..6").unwrap().0, vec![2, 3, 4, 5, 6]);
        assert_eq!(parse_dims("2..=4").unwrap().0, vec![2, 3, 4]);
        assert_eq!(parse_dims("3").unwrap().0, vec![3]);
        assert_eq!(parse_dims("2, 5").unwrap().0, vec![2, 5]);
        assert!(parse_dims("1..3").is_err());
        assert!(parse_dims("5..2").is_err());
        assert!(parse_dims("x").is_err());
    }
}
