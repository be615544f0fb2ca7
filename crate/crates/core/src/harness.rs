//! Monte Carlo experiment runner: many independent sessions with derived
//! per-trial seeds, order-independent aggregation, and comparison of
//! estimates against closed forms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryModel;
use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::protocol::{run_session, MonitorConfig, SessionParams, SessionReport};
use crate::source::SourceConfig;

/// A reproducible experiment: session parameters plus trial count and the
/// master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub source: SourceConfig,
    pub channel: ChannelConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversaryModel>,
    pub session_slots: u64,
    pub trials: u64,
    pub seed: u64,
    pub test_fraction: f64,
    pub monitor: MonitorConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        self.session_params().validate()
    }

    pub fn session_params(&self) -> SessionParams {
        SessionParams {
            source: self.source,
            channel: self.channel,
            adversary: self.adversary,
            session_slots: self.session_slots,
            test_fraction: self.test_fraction,
            monitor: self.monitor,
        }
    }

    /// Stable per-trial seed: a splitmix64 chain over (master seed, index),
    /// so any subset of trials reproduces its streams independently of
    /// scheduling.
    pub fn trial_seed(&self, index: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(index.wrapping_add(1)))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Summed counts over all trials; every field is a commutative merge of the
/// per-session reports, so aggregation is schedule-invariant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: u64,
    pub covered_slots: u64,
    pub packets: u64,
    pub signal_slots: u64,
    pub error_slots: u64,
    pub detection_slots: u64,
    pub alice_clicks: u64,
    pub bob_clicks: u64,
    pub alice_detection_clicks: u64,
    pub alice_detection_photon_clicks: u64,
    pub sifted_slots: u64,
    pub sifted_signal: u64,
    pub sifted_error: u64,
    pub sifted_detection: u64,
    pub sifted_clean_signal: u64,
    pub clean_key_mismatches: u64,
    pub key_mismatches: u64,
    pub qber_errors: u64,
    pub qber_tested: u64,
    pub key_bits: u64,
    pub count_rate_aborts: u64,
    pub detection_aborts: u64,
    pub attack_resends: u64,
    pub attack_error_slot_resends: u64,
    pub attack_candidates: u64,
    pub attack_intercepted: u64,
    pub attack_rate_match_feasible: u64,
    pub bs_disclosed_signal: u64,
    pub bs_eve_hits: u64,
}

impl Aggregate {
    fn absorb(&mut self, report: &SessionReport) {
        self.trials += 1;
        self.covered_slots += report.covered_slots;
        self.packets += report.packets;
        self.signal_slots += report.signal_slots;
        self.error_slots += report.error_slots;
        self.detection_slots += report.detection_slots;
        self.alice_clicks += report.alice_clicks;
        self.bob_clicks += report.bob_clicks;
        self.alice_detection_clicks += report.alice_detection_clicks;
        self.alice_detection_photon_clicks += report.alice_detection_photon_clicks;
        self.sifted_slots += report.sifted_slots;
        self.sifted_signal += report.sifted_signal;
        self.sifted_error += report.sifted_error;
        self.sifted_detection += report.sifted_detection;
        self.sifted_clean_signal += report.sifted_clean_signal;
        self.clean_key_mismatches += report.clean_key_mismatches;
        self.key_mismatches += report.key_mismatches;
        if let Some(q) = &report.qber {
            self.qber_errors += q.errors;
            self.qber_tested += q.tested;
        }
        self.key_bits += report.key_bits;
        if report.abort.count_rate {
            self.count_rate_aborts += 1;
        }
        if report.abort.detection_slot {
            self.detection_aborts += 1;
        }
        if let Some(a) = &report.attack {
            self.attack_resends += a.resends.unwrap_or(0);
            self.attack_error_slot_resends += a.error_slot_resends.unwrap_or(0);
            self.attack_candidates += a.candidates.unwrap_or(0);
            self.attack_intercepted += a.intercepted_coincidences.unwrap_or(0);
            if a.rate_match_feasible == Some(true) {
                self.attack_rate_match_feasible += 1;
            }
            self.bs_disclosed_signal += a.bs_disclosed_signal.unwrap_or(0);
            self.bs_eve_hits += a.bs_eve_hits.unwrap_or(0);
        }
    }

    pub fn key_rate(&self) -> Estimate {
        estimate_rate(self.sifted_signal, self.covered_slots)
    }

    /// Sifted signal coincidences with single-pair provenance per slot — the
    /// quantity the closed-form coincidence rate describes (accidental
    /// multi-pair coincidences are excluded from analytic comparisons).
    pub fn clean_key_rate(&self) -> Estimate {
        estimate_rate(self.sifted_clean_signal, self.covered_slots)
    }

    pub fn click_rate(&self) -> Estimate {
        estimate_rate(self.alice_clicks, self.covered_slots)
    }

    /// Photon-caused detection-slot clicks per covered slot.
    pub fn detection_photon_rate(&self) -> Estimate {
        estimate_rate(self.alice_detection_photon_clicks, self.covered_slots)
    }

    pub fn qber(&self) -> Option<Estimate> {
        (self.qber_tested > 0).then(|| estimate_rate(self.qber_errors, self.qber_tested))
    }

    /// Fraction of resends built on an error-slot coincidence.
    pub fn error_resend_fraction(&self) -> Option<Estimate> {
        (self.attack_resends > 0)
            .then(|| estimate_rate(self.attack_error_slot_resends, self.attack_resends))
    }

    /// Eve's storage-coincidence success rate per disclosed signal instance.
    pub fn bs_success(&self) -> Option<Estimate> {
        (self.bs_disclosed_signal > 0)
            .then(|| estimate_rate(self.bs_eve_hits, self.bs_disclosed_signal))
    }
}

/// Outcome of `run_trials`: the merged counters and the per-trial reports in
/// trial order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialsOutcome {
    pub aggregate: Aggregate,
    pub sessions: Vec<SessionReport>,
}

/// Installs the global worker pool honoring `QSS_WORKERS`, once.
pub fn init_workers() {
    use std::sync::Once;
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        if let Ok(value) = std::env::var("QSS_WORKERS") {
            if let Ok(n) = value.parse::<usize>() {
                if n >= 1 {
                    // ignore failure: a pool may already exist in embedders
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    });
}

/// Runs all trials on the worker pool. Identical scenarios (including the
/// seed) produce bit-identical outcomes regardless of scheduling.
pub fn run_trials(scenario: &Scenario) -> Result<TrialsOutcome> {
    scenario.validate()?;
    init_workers();
    let params = scenario.session_params();
    let sessions: Vec<SessionReport> = (0..scenario.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.trial_seed(i));
            run_session(&params, &mut rng).map(|r| r.report)
        })
        .collect::<Result<_>>()?;
    let mut aggregate = Aggregate::default();
    for report in &sessions {
        aggregate.absorb(report);
    }
    Ok(TrialsOutcome {
        aggregate,
        sessions,
    })
}

/// A binomial rate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Point estimate `count / exposure` with standard error
/// `sqrt(p (1-p) / exposure)`.
pub fn estimate_rate(count: u64, exposure: u64) -> Estimate {
    assert!(exposure > 0, "estimate_rate needs positive exposure");
    let p = count as f64 / exposure as f64;
    Estimate {
        mean: p,
        stderr: (p * (1.0 - p) / exposure as f64).sqrt(),
        samples: exposure,
    }
}

/// One line of a validation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<f64>,
    pub estimate: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    pub pass: bool,
    /// Set when no analytic counterpart was supplied for the estimate.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub sigma: f64,
    pub entries: Vec<Comparison>,
    pub all_pass: bool,
}

impl ComparisonReport {
    pub fn new(sigma: f64) -> Self {
        ComparisonReport {
            sigma,
            entries: Vec::new(),
            all_pass: true,
        }
    }

    /// Adds a z-test of `estimate` against `analytic`. The spread is taken
    /// under the null hypothesis when the analytic value is a proportion, so
    /// zero observed counts with a small expectation do not blow up.
    pub fn check(&mut self, name: impl Into<String>, estimate: Estimate, analytic: f64) {
        let null_stderr = if analytic > 0.0 && analytic < 1.0 && estimate.samples > 0 {
            (analytic * (1.0 - analytic) / estimate.samples as f64).sqrt()
        } else {
            0.0
        };
        let spread = estimate.stderr.max(null_stderr);
        let z = if spread > 0.0 {
            (estimate.mean - analytic) / spread
        } else if estimate.mean == analytic {
            0.0
        } else {
            f64::INFINITY
        };
        let pass = z.abs() <= self.sigma;
        self.all_pass &= pass;
        self.entries.push(Comparison {
            name: name.into(),
            analytic: Some(analytic),
            estimate,
            z: Some(z),
            pass,
            flagged: false,
        });
    }

    /// Adds an exact boolean expectation (no statistics).
    pub fn check_exact(&mut self, name: impl Into<String>, pass: bool, observed: f64, want: f64) {
        self.all_pass &= pass;
        self.entries.push(Comparison {
            name: name.into(),
            analytic: Some(want),
            estimate: Estimate {
                mean: observed,
                stderr: 0.0,
                samples: 0,
            },
            z: None,
            pass,
            flagged: false,
        });
    }

    pub fn merge(&mut self, other: ComparisonReport) {
        self.all_pass &= other.all_pass;
        self.entries.extend(other.entries);
    }
}

/// Matches estimates to analytic values by name. Estimates without a
/// counterpart are flagged and fail the report rather than being dropped.
pub fn compare_to_analytic(
    estimates: &[(String, Estimate)],
    analytic: &[(String, f64)],
    sigma: f64,
) -> ComparisonReport {
    let mut report = ComparisonReport::new(sigma);
    for (name, estimate) in estimates {
        match analytic.iter().find(|(n, _)| n == name) {
            Some((_, value)) => report.check(name.clone(), *estimate, *value),
            None => {
                report.all_pass = false;
                report.entries.push(Comparison {
                    name: name.clone(),
                    analytic: None,
                    estimate: *estimate,
                    z: None,
                    pass: false,
                    flagged: true,
                });
            }
        }
    }
    report
}

/// Renders a comparison report as CSV.
pub fn comparison_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("name,analytic,estimate,stderr,z,pass\n");
    for e in &report.entries {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.name,
            e.analytic.map_or(String::from(""), |v| v.to_string()),
            e.estimate.mean,
            e.estimate.stderr,
            e.z.map_or(String::from(""), |v| v.to_string()),
            e.pass
        ));
    }
    out
}
