//! Scenario-file parsing and flag overrides.
//!
//! A scenario file is a flat JSON object; every field is optional and CLI
//! flags take precedence over file values. Unknown keys are rejected.
//!
//! ```json
//! {
//!   "mu": 0.1,
//!   "alpha_db": -10,
//!   "dark": 1e-5,
//!   "N": 4,
//!   "session_slots": 1000000,
//!   "trials": 1,
//!   "seed": 1,
//!   "adversary": { "kind": "bob_ir_sequential", "n": 2 }
//! }
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use qss_core::adversary::AdversaryModel;
use qss_core::channel::ChannelConfig;
use qss_core::harness::Scenario;
use qss_core::protocol::MonitorConfig;
use qss_core::source::{DimensionDistribution, Scheme, SourceConfig};

/// Flag overrides shared by the simulation commands.
#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,

    /// Mean photon pairs per occupied pulse.
    #[arg(long)]
    pub mu: Option<f64>,

    /// Transmittance per arm (linear).
    #[arg(long, conflicts_with = "alpha_db")]
    pub alpha: Option<f64>,

    /// Transmittance per arm in dB: alpha = 10^(dB/10).
    #[arg(long = "alpha-db", allow_hyphen_values = true)]
    pub alpha_db: Option<f64>,

    /// Dark-click probability per slot per party.
    #[arg(long)]
    pub dark: Option<f64>,

    /// Fixed packet dimension N.
    #[arg(long = "packet-dim", value_name = "N")]
    pub packet_dim: Option<usize>,

    /// Packet scheme: randomized_dimension | fixed_dimension_random_gap.
    #[arg(long)]
    pub scheme: Option<String>,

    /// Session length in slots.
    #[arg(long)]
    pub slots: Option<u64>,

    /// Independent sessions to run.
    #[arg(long)]
    pub trials: Option<u64>,

    /// Master seed; per-trial streams derive from it.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Strict scenario-file schema.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    mu: Option<f64>,
    alpha: Option<f64>,
    alpha_db: Option<f64>,
    dark: Option<f64>,
    #[serde(rename = "N")]
    dim: Option<usize>,
    dim_min: Option<usize>,
    dim_max: Option<usize>,
    scheme: Option<String>,
    gap_p: Option<f64>,
    session_slots: Option<u64>,
    trials: Option<u64>,
    seed: Option<u64>,
    test_fraction: Option<f64>,
    significance: Option<f64>,
    adversary: Option<AdversaryModel>,
}

fn parse_scheme(name: &str) -> Result<Scheme> {
    match name {
        "randomized_dimension" => Ok(Scheme::RandomizedDimension),
        "fixed_dimension_random_gap" => Ok(Scheme::FixedDimensionRandomGap),
        other => bail!(
            "unknown scheme `{other}` (expected randomized_dimension or fixed_dimension_random_gap)"
        ),
    }
}

fn load_file(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read scenario file {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("invalid scenario file {}", path.display()))
}

/// Resolves defaults, file values and flag overrides into a full scenario.
pub fn parse_scenario(args: &ScenarioArgs) -> Result<Scenario> {
    let file = match &args.scenario {
        Some(path) => load_file(path)?,
        None => ScenarioFile::default(),
    };

    if file.alpha.is_some() && file.alpha_db.is_some() {
        bail!("scenario file sets both alpha and alpha_db");
    }

    let mu = args.mu.or(file.mu).unwrap_or(0.1);
    let alpha = match (args.alpha, args.alpha_db) {
        (Some(a), _) => a,
        (None, Some(db)) => ChannelConfig::alpha_from_db(db),
        (None, None) => file
            .alpha
            .or(file.alpha_db.map(ChannelConfig::alpha_from_db))
            .unwrap_or(0.1),
    };
    let dark = args.dark.or(file.dark).unwrap_or(1e-5);

    let dims = match (args.packet_dim.or(file.dim), file.dim_min, file.dim_max) {
        (Some(n), None, None) => DimensionDistribution::Fixed(n),
        (None, Some(min), Some(max)) => DimensionDistribution::Uniform { min, max },
        (None, None, None) => DimensionDistribution::Fixed(4),
        (Some(_), _, _) => bail!("give either N or dim_min/dim_max, not both"),
        _ => bail!("dim_min and dim_max must be given together"),
    };
    let scheme = match args.scheme.as_deref().or(file.scheme.as_deref()) {
        Some(name) => parse_scheme(name)?,
        None => Scheme::RandomizedDimension,
    };
    if scheme == Scheme::FixedDimensionRandomGap
        && !matches!(dims, DimensionDistribution::Fixed(_))
    {
        bail!("fixed_dimension_random_gap requires a fixed N");
    }

    let source = SourceConfig {
        mu,
        scheme,
        dims,
        gap_p: file.gap_p.unwrap_or(if scheme == Scheme::RandomizedDimension {
            1.0
        } else {
            0.5
        }),
    };

    let scenario = Scenario {
        source,
        channel: ChannelConfig { alpha, dark },
        adversary: file.adversary,
        session_slots: args.slots.or(file.session_slots).unwrap_or(1_000_000),
        trials: args.trials.or(file.trials).unwrap_or(1),
        seed: args.seed.or(file.seed).unwrap_or(1),
        test_fraction: file.test_fraction.unwrap_or(0.1),
        monitor: MonitorConfig {
            significance: file.significance.unwrap_or(1e-6),
        },
    };
    scenario.validate()?;
    Ok(scenario)
}
