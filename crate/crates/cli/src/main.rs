//! `nlbranch`: runs bundled or user-defined scenarios and writes reports,
//! tables and ensembles under `--out/<scenario>/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlbranch::scenario::{self, Config, Overrides, Scenario};
use nlbranch::simulate::{write_ensemble_binary, write_single_csv};
use nlbranch::Error;

#[derive(Parser)]
#[command(name = "nlbranch", version, about = "Coupling and ergodicity experiments for nonlinear branching processes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Drift and noise conditions, contraction constants and Lyapunov grid checks.
    Check(Common),
    /// Coupled ensemble from (x0, y0) with the W1/TV decay curve and rate fits.
    Couple(Common),
    /// Tabulates the test function and reports the contraction constants.
    Testfn(Common),
    /// Single-process ensemble from x0.
    Simulate(Common),
    /// Long-run moments and histogram from each configured starting point.
    Invariant(Common),
    /// Lists the available scenarios.
    List {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML file layered over the bundled presets.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: String,
    /// Output directory; files go to `<out>/<scenario>/`.
    #[arg(long, env = "NLBRANCH_OUT", default_value = "nlbranch-out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

/// Exit 1: a verdict failed. Exit 2: bad usage or configuration.
enum Failure {
    Verdict(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Precondition(_) | Error::Validation(_) | Error::Quadrature { .. } | Error::EmptyEnsemble => {
                Failure::Verdict(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        Some(p) => Ok(Config::load(p)?.over_presets()?),
        None => Ok(Config::presets()),
    }
}

impl Common {
    fn scenario(&self) -> Result<Scenario, Failure> {
        let mut s = load_config(self.config.as_deref())?.scenario(&self.scenario)?;
        s.apply(&Overrides { seed: self.seed, paths: self.paths, step: self.step, threads: self.threads })?;
        Ok(s)
    }

    fn out_dir(&self) -> Result<PathBuf, Failure> {
        let dir = self.out.join(&self.scenario);
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

/// More than 1% of the paths failing makes the run a verdict failure.
fn check_failures(failed: usize, requested: usize) -> Result<(), Failure> {
    if failed * 100 > requested {
        return Err(Failure::Verdict(format!("{failed} of {requested} paths failed (more than 1%)")));
    }
    if failed > 0 {
        eprintln!("warning: {failed} of {requested} paths failed and were excluded");
    }
    Ok(())
}

fn cmd_check(c: &Common) -> Result<(), Failure> {
    let s = c.scenario()?;
    let outcome = scenario::run_check(&s);
    let text = outcome.to_text();
    fs::write(c.out_dir()?.join("check.txt"), &text)?;
    print!("{text}");
    if outcome.passed() {
        Ok(())
    } else {
        Err(Failure::Verdict(format!("scenario `{}`: some conditions fail", s.name)))
    }
}

fn cmd_couple(c: &Common) -> Result<(), Failure> {
    let s = c.scenario()?;
    let (ens, curve) = scenario::run_couple(&s)?;
    let dir = c.out_dir()?;
    write_ensemble_binary(&dir.join("ensemble.bin"), &ens)?;
    fs::write(dir.join("decay.csv"), curve.to_csv())?;
    let mut summary = format!(
        "scenario = {}\nx0 = {:?}\ny0 = {:?}\npaths = {}\nfailed = {}\nviolations = {}\nrepairs = {}\n",
        s.name,
        s.spec.x0,
        s.spec.y0,
        ens.paths.len(),
        ens.failed.len(),
        ens.total_violations(),
        ens.total_repairs()
    );
    summary.push_str(&curve.summary_kv());
    fs::write(dir.join("fit.txt"), &summary)?;
    print!("{}{summary}", curve.to_csv());
    check_failures(ens.failed.len(), s.sim().paths)
}

fn cmd_testfn(c: &Common) -> Result<(), Failure> {
    let s = c.scenario()?;
    let t = scenario::run_testfn(&s)?;
    let dir = c.out_dir()?;
    fs::write(dir.join("psi.csv"), &t.table)?;
    if let Some(table) = &t.strong_table {
        fs::write(dir.join("psi_strong.csv"), table)?;
    }
    let text = t.to_text();
    fs::write(dir.join("constants.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_simulate(c: &Common) -> Result<(), Failure> {
    let s = c.scenario()?;
    let ens = scenario::run_simulate(&s)?;
    let dir = c.out_dir()?;
    write_single_csv(&dir.join("paths.csv"), &ens)?;
    println!("{} paths written to {}", ens.paths.len(), dir.join("paths.csv").display());
    check_failures(ens.failed.len(), s.sim().paths)
}

fn cmd_invariant(c: &Common) -> Result<(), Failure> {
    let s = c.scenario()?;
    let (runs, dist) = scenario::run_invariant(&s)?;
    let dir = c.out_dir()?;
    let mut text = format!("scenario = {}\n", s.name);
    let mut failed = 0;
    for (i, (x, summary, f)) in runs.iter().enumerate() {
        text.push_str(&format!("start{i} = {x:?}\n"));
        text.push_str(&summary.to_kv().replace("invariant.", &format!("start{i}.")));
        fs::write(dir.join(format!("histogram_{i}.csv")), summary.histogram.to_csv())?;
        failed = failed.max(*f);
    }
    if let Some(d) = dist {
        text.push_str(&format!("terminal_w1_first_last = {d:?}\n"));
    }
    fs::write(dir.join("invariant.txt"), &text)?;
    print!("{text}");
    check_failures(failed, s.sim().paths)
}

fn cmd_list(config: Option<&Path>) -> Result<(), Failure> {
    let c = load_config(config)?;
    for (name, s) in &c.scenarios {
        println!("{name:20} {}", s.description);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Check(c) => cmd_check(c),
        Cmd::Couple(c) => cmd_couple(c),
        Cmd::Testfn(c) => cmd_testfn(c),
        Cmd::Simulate(c) => cmd_simulate(c),
        Cmd::Invariant(c) => cmd_invariant(c),
        Cmd::List { config } => cmd_list(config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
