//! `qss` — simulator and analytics front end.
//!
//! Exit codes: 0 success, 1 any failing comparison under `validate`,
//! 2 usage or configuration errors.

mod scenario;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qss_core::adversary::AdversaryModel;
use qss_core::analytics;
use qss_core::harness::{comparison_csv, run_trials, ComparisonReport};
use qss_core::protocol::run_session;
use qss_core::validation;

use scenario::{parse_scenario, ScenarioArgs};

#[derive(Parser)]
#[command(
    name = "qss",
    about = "Simulator and analytics for quantum secret sharing over modulated high-dimensional time-bin entanglement",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form security-threshold report over sequence lengths (JSON).
    Thresholds(ThresholdsArgs),
    /// Threshold-curve table (CSV: n, alpha_min, alpha_min_db, alpha_thn, alpha_thn_db).
    Fig3(Fig3Args),
    /// Monte Carlo protocol sessions; emits the aggregate report as JSON.
    Simulate(SimulateArgs),
    /// Attack Monte Carlo with the matching closed forms side by side.
    Attack(AttackArgs),
    /// Estimator-vs-closed-form validation suite; exits 1 on any failure.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct AnalyticArgs {
    /// Mean photon pairs per occupied pulse.
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    /// Dark-click probability per slot per party.
    #[arg(long, default_value_t = 1e-5)]
    dark: f64,
    /// Signal-slot probability; overrides --packet-dim.
    #[arg(long = "S", value_name = "S")]
    s: Option<f64>,
    /// Fixed packet dimension N; S = (N-1)/(N+2).
    #[arg(long = "packet-dim", value_name = "N", default_value_t = 4)]
    packet_dim: usize,
}

impl AnalyticArgs {
    fn signal_fraction(&self) -> Result<f64> {
        if let Some(s) = self.s {
            return Ok(s);
        }
        let n = self.packet_dim as f64;
        if self.packet_dim < 2 {
            bail!("packet dimension must be at least 2");
        }
        Ok((n - 1.0) / (n + 2.0))
    }
}

#[derive(Args)]
struct ThresholdsArgs {
    #[command(flatten)]
    analytic: AnalyticArgs,
    /// Largest sequence length to scan.
    #[arg(long = "n-max", default_value_t = 8)]
    n_max: u32,
    /// Detector loss for the link-budget block (positive dB).
    #[arg(long = "detector-loss-db", default_value_t = 10.0)]
    detector_loss_db: f64,
    /// Source coupling loss for the link-budget block (positive dB).
    #[arg(long = "coupling-loss-db", default_value_t = 4.0)]
    coupling_loss_db: f64,
    /// Fiber attenuation for the link-budget block.
    #[arg(long = "fiber-loss-db-per-km", default_value_t = 0.2)]
    fiber_loss_db_per_km: f64,
    /// Output path; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Fig3Args {
    #[command(flatten)]
    analytic: AnalyticArgs,
    /// Sequence lengths: a single n or an inclusive range `a..b`.
    #[arg(long, default_value = "1..6")]
    n: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Also write key bit files `<prefix>.charlie.bits` and
    /// `<prefix>.reconstructed.bits`.
    #[arg(long, value_name = "PREFIX")]
    keys_out: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Adversary strategy.
    #[arg(long, value_enum)]
    kind: AttackKind,
    /// Sequence length for bob-ir-sequential.
    #[arg(long, default_value_t = 2)]
    n: u32,
    /// Pass threshold in standard errors.
    #[arg(long, default_value_t = 3.0)]
    sigma: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AttackKind {
    EveIrEntangled,
    EveIrClassical,
    EveBs,
    BobIrSingle,
    BobIrSequential,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Pass threshold in standard errors.
    #[arg(long, default_value_t = 3.0)]
    sigma: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => {
            if let Err(e) = std::io::stdout().write_all(content.as_bytes()) {
                // a closed pipe (e.g. `qss ... | head`) is a normal way to
                // stop reading, not an error
                if e.kind() == std::io::ErrorKind::BrokenPipe {
                    std::process::exit(0);
                }
                return Err(e).context("cannot write to stdout");
            }
        }
    }
    Ok(())
}

/// Writes a comparison report as JSON (for `.json` paths) or CSV.
fn write_comparison(path: &Path, report: &ComparisonReport) -> Result<()> {
    let content = if path.extension().is_some_and(|e| e == "json") {
        let mut json = serde_json::to_string_pretty(report).context("serialize comparisons")?;
        json.push('\n');
        json
    } else {
        comparison_csv(report)
    };
    write_output(Some(path), &content)
}

fn print_comparison(report: &ComparisonReport) -> Result<()> {
    use std::fmt::Write as _;
    let mut table = String::new();
    let _ = writeln!(
        table,
        "{:<58} {:>13} {:>13} {:>9} {:>6}",
        "quantity", "analytic", "estimate", "z", "pass"
    );
    for entry in &report.entries {
        let analytic = entry
            .analytic
            .map_or_else(|| String::from("-"), |v| format!("{v:.6e}"));
        let z = entry.z.map_or_else(|| String::from("-"), |v| format!("{v:+.2}"));
        let _ = writeln!(
            table,
            "{:<58} {:>13} {:>13.6e} {:>9} {:>6}",
            entry.name,
            analytic,
            entry.estimate.mean,
            z,
            if entry.pass { "yes" } else { "NO" }
        );
    }
    let _ = writeln!(
        table,
        "{} checks, {}",
        report.entries.len(),
        if report.all_pass { "all pass" } else { "FAILURES present" }
    );
    write_output(None, &table)
}

fn cmd_thresholds(args: &ThresholdsArgs) -> Result<ExitCode> {
    let s = args.analytic.signal_fraction()?;
    let report = analytics::security_threshold(args.analytic.mu, s, args.analytic.dark, args.n_max)?;
    let loss_budget = analytics::loss_budget(
        report.security_threshold_db,
        args.detector_loss_db,
        args.coupling_loss_db,
        args.fiber_loss_db_per_km,
    )?;
    #[derive(serde::Serialize)]
    struct ThresholdsOutput {
        #[serde(flatten)]
        report: analytics::ThresholdReport,
        loss_budget: analytics::LossBudget,
    }
    let json = serde_json::to_string_pretty(&ThresholdsOutput {
        report,
        loss_budget,
    })
    .context("serialize report")?;
    write_output(args.output.as_deref(), &format!("{json}\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn parse_n_range(text: &str) -> Result<std::ops::RangeInclusive<u32>> {
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u32 = lo.trim().parse().context("range start")?;
        let hi: u32 = hi.trim().parse().context("range end")?;
        if lo < 1 || hi < lo {
            bail!("invalid n range {text}");
        }
        Ok(lo..=hi)
    } else {
        let n: u32 = text.trim().parse().context("sequence length")?;
        if n < 1 {
            bail!("n must be at least 1");
        }
        Ok(n..=n)
    }
}

fn cmd_fig3(args: &Fig3Args) -> Result<ExitCode> {
    let s = args.analytic.signal_fraction()?;
    let range = parse_n_range(&args.n)?;
    let rows = analytics::fig3_table(args.analytic.mu, s, args.analytic.dark, range)?;
    write_output(args.output.as_deref(), &analytics::fig3_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let scenario = parse_scenario(&args.scenario)?;
    if let Some(prefix) = &args.keys_out {
        export_keys(&scenario, prefix)?;
    }
    let outcome = run_trials(&scenario)?;
    #[derive(serde::Serialize)]
    struct SimulateOutput<'a> {
        scenario: &'a qss_core::harness::Scenario,
        aggregate: &'a qss_core::harness::Aggregate,
        sessions: &'a [qss_core::protocol::SessionReport],
    }
    let json = serde_json::to_string_pretty(&SimulateOutput {
        scenario: &scenario,
        aggregate: &outcome.aggregate,
        sessions: &outcome.sessions,
    })
    .context("serialize simulation output")?;
    write_output(args.output.as_deref(), &format!("{json}\n"))?;
    Ok(ExitCode::SUCCESS)
}

/// Writes the concatenated key streams of all trials as ASCII bit files.
fn export_keys(scenario: &qss_core::harness::Scenario, prefix: &Path) -> Result<()> {
    use rand::SeedableRng;
    let params = scenario.session_params();
    let mut charlie = String::new();
    let mut reconstructed = String::new();
    for trial in 0..scenario.trials {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(scenario.trial_seed(trial));
        let result = run_session(&params, &mut rng)?;
        for &bit in &result.charlie_key.bits {
            charlie.push(if bit == 0 { '0' } else { '1' });
        }
        for &bit in &result.reconstructed_key.bits {
            reconstructed.push(if bit == 0 { '0' } else { '1' });
        }
    }
    charlie.push('\n');
    reconstructed.push('\n');
    let write = |suffix: &str, data: &str| -> Result<()> {
        let path = PathBuf::from(format!("{}.{suffix}.bits", prefix.display()));
        std::fs::write(&path, data).with_context(|| format!("cannot write {}", path.display()))
    };
    write("charlie", &charlie)?;
    write("reconstructed", &reconstructed)
}

fn cmd_attack(args: &AttackArgs) -> Result<ExitCode> {
    let mut scenario = parse_scenario(&args.scenario)?;
    scenario.adversary = Some(match args.kind {
        AttackKind::EveIrEntangled => AdversaryModel::EveIrEntangled,
        AttackKind::EveIrClassical => AdversaryModel::EveIrClassical,
        AttackKind::EveBs => AdversaryModel::EveBs,
        AttackKind::BobIrSingle => AdversaryModel::BobIrSingle { target_rate: None },
        AttackKind::BobIrSequential => AdversaryModel::BobIrSequential {
            n: args.n,
            target_rate: None,
        },
    });
    scenario.validate()?;
    let report = validation::attack_comparison(&scenario, args.sigma)?;
    print_comparison(&report)?;
    if let Some(path) = &args.output {
        write_comparison(path, &report)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: &ValidateArgs) -> Result<ExitCode> {
    let scenario = parse_scenario(&args.scenario)?;
    let report = validation::validation_suite(&scenario, args.sigma)?;
    print_comparison(&report)?;
    if let Some(path) = &args.output {
        write_comparison(path, &report)?;
    }
    Ok(if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Thresholds(args) => cmd_thresholds(args),
        Command::Fig3(args) => cmd_fig3(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(2)
        }
    }
}
