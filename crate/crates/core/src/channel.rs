//! Lossy transmission, measurement sampling and detector dark counts.
//!
//! Measurement outcomes are drawn from the exact ported distributions of
//! `statevec`: every pair gets one joint `(slot, port, slot, port)` sample,
//! and each side of it is delivered only if the corresponding photon survived
//! its arm. Sampling the joint outcome and discarding the lost side is
//! exactly the marginal distribution, so one code path serves full
//! coincidences, singles and adversarial splits.
//!
//! Detectors are non-number-resolving threshold detectors: at most one click
//! is recorded per (party, slot), a photon click takes precedence over a dark
//! click, and among simultaneous photon clicks the first sampled one wins.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevec::{
    apply_interferometer_pair, apply_interferometer_single, PairState, PhotonState, Port,
};

/// Per-arm transmission parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Transmittance per arm, including detector quantum efficiency.
    pub alpha: f64,
    /// Dark-click probability per slot per party (summed over that party's
    /// two detectors).
    pub dark: f64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha = {} must lie in (0, 1]",
                self.alpha
            )));
        }
        if !(self.dark >= 0.0 && self.dark < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dark = {} must lie in [0, 1)",
                self.dark
            )));
        }
        Ok(())
    }

    /// Transmittance from a dB figure: `alpha = 10^(db/10)`.
    pub fn alpha_from_db(db: f64) -> f64 {
        10f64.powf(db / 10.0)
    }

    pub fn alpha_db(&self) -> f64 {
        10.0 * self.alpha.log10()
    }
}

/// A key recipient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

/// What produced a click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickCause {
    Photon,
    Dark,
}

/// One detection event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub party: Party,
    pub slot: i64,
    pub port: Port,
    pub cause: ClickCause,
    /// Emission identity of the photon that caused the click, used to
    /// separate true coincidences from accidental multi-pair ones. `None`
    /// for dark clicks.
    pub pair_id: Option<u64>,
}

/// Samples per-photon survival: signal and idler survive independently with
/// probability `alpha` each.
pub fn transmit_pair<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> (bool, bool) {
    (rng.random_bool(alpha), rng.random_bool(alpha))
}

/// Pre-tabulated joint outcome distribution of one pair state after both
/// interferometers; cumulative weights admit O(log n) sampling.
#[derive(Debug, Clone)]
pub struct PairOutcomeSampler {
    outcomes: Vec<(i64, Port, i64, Port)>,
    cumulative: Vec<f64>,
}

impl PairOutcomeSampler {
    pub fn new(state: &PairState) -> Self {
        let joint = apply_interferometer_pair(state).joint_probabilities();
        let mut outcomes = Vec::with_capacity(joint.len());
        let mut cumulative = Vec::with_capacity(joint.len());
        let mut acc = 0.0;
        for (outcome, p) in joint {
            acc += p;
            outcomes.push(outcome);
            cumulative.push(acc);
        }
        debug_assert!((acc - 1.0).abs() < 1e-9, "pair state not normalized: {acc}");
        PairOutcomeSampler {
            outcomes,
            cumulative,
        }
    }

    /// One joint measurement outcome `(signal slot, signal port, idler slot,
    /// idler port)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (i64, Port, i64, Port) {
        let total = *self.cumulative.last().expect("non-empty distribution");
        let u: f64 = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.outcomes[idx.min(self.outcomes.len() - 1)]
    }
}

/// Pre-tabulated click distribution of a single ported photon state.
#[derive(Debug, Clone)]
pub struct PhotonOutcomeSampler {
    outcomes: Vec<(i64, Port)>,
    cumulative: Vec<f64>,
}

impl PhotonOutcomeSampler {
    pub fn new(state: &PhotonState) -> Self {
        let ported = apply_interferometer_single(state);
        let mut outcomes = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (outcome, a) in ported.iter() {
            acc += a.norm_sqr();
            outcomes.push(outcome);
            cumulative.push(acc);
        }
        debug_assert!((acc - 1.0).abs() < 1e-9);
        PhotonOutcomeSampler {
            outcomes,
            cumulative,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (i64, Port) {
        let total = *self.cumulative.last().expect("non-empty distribution");
        let u: f64 = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.outcomes[idx.min(self.outcomes.len() - 1)]
    }
}

/// Measures one emitted pair: draws the joint outcome and emits click records
/// for the surviving photons (signal to Alice, idler to Bob).
pub fn sample_measurement<R: Rng + ?Sized>(
    rng: &mut R,
    sampler: &PairOutcomeSampler,
    survivors: (bool, bool),
    pair_id: u64,
) -> Vec<ClickRecord> {
    if !survivors.0 && !survivors.1 {
        return Vec::new();
    }
    let (ks, ps, ki, pi) = sampler.sample(rng);
    let mut clicks = Vec::with_capacity(2);
    if survivors.0 {
        clicks.push(ClickRecord {
            party: Party::Alice,
            slot: ks,
            port: ps,
            cause: ClickCause::Photon,
            pair_id: Some(pair_id),
        });
    }
    if survivors.1 {
        clicks.push(ClickRecord {
            party: Party::Bob,
            slot: ki,
            port: pi,
            cause: ClickCause::Photon,
            pair_id: Some(pair_id),
        });
    }
    clicks
}

/// One party's click log: at most one click per slot.
pub type ClickLog = BTreeMap<i64, LogEntry>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub port: Port,
    pub cause: ClickCause,
    pub pair_id: Option<u64>,
}

/// Merges a photon click into a log; existing clicks win (threshold detector).
pub fn merge_click(log: &mut ClickLog, record: &ClickRecord) {
    log.entry(record.slot).or_insert(LogEntry {
        port: record.port,
        cause: record.cause,
        pair_id: record.pair_id,
    });
}

/// Adds dark counts over `slots` session slots (slot indices `1..=slots`):
/// each slot independently gains a dark click with probability `dark`, on a
/// uniformly random port. Slots that already saw a photon keep the photon
/// click.
pub fn apply_dark_counts<R: Rng + ?Sized>(
    rng: &mut R,
    log: &mut ClickLog,
    dark: f64,
    slots: u64,
) {
    if dark <= 0.0 || slots == 0 {
        return;
    }
    let count = Binomial::new(slots, dark)
        .expect("validated dark probability")
        .sample(rng);
    let mut chosen = std::collections::BTreeSet::new();
    while (chosen.len() as u64) < count {
        let slot = rng.random_range(1..=slots as i64);
        if !chosen.insert(slot) {
            continue;
        }
        let port = Port::from_bit(rng.random_bool(0.5));
        log.entry(slot).or_insert(LogEntry {
            port,
            cause: ClickCause::Dark,
            pair_id: None,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::{packet_state, Phase};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_transmittance_always_survives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(transmit_pair(&mut rng, 1.0), (true, true));
        }
    }

    #[test]
    fn joint_survival_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 400_000;
        let joint = (0..trials)
            .filter(|_| transmit_pair(&mut rng, 0.1) == (true, true))
            .count() as f64;
        let p = joint / trials as f64;
        let se = (0.01f64 * 0.99 / trials as f64).sqrt();
        assert!((p - 0.01).abs() < 3.0 * se);
    }

    #[test]
    fn pair_sampler_matches_exact_distribution() {
        // N = 2 packet: coincidence probabilities 1/8, 1/4, 1/8 over slots
        // 1, 2, 3 and residual 1/2
        let state = packet_state(&[Phase::Zero, Phase::Zero]).unwrap();
        let sampler = PairOutcomeSampler::new(&state);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 400_000u64;
        let mut coincidences: BTreeMap<i64, u64> = BTreeMap::new();
        for _ in 0..trials {
            let (ks, _, ki, _) = sampler.sample(&mut rng);
            if ks == ki {
                *coincidences.entry(ks).or_insert(0) += 1;
            }
        }
        for (slot, expect) in [(1i64, 0.125), (2, 0.25), (3, 0.125)] {
            let p = *coincidences.get(&slot).unwrap() as f64 / trials as f64;
            let se = (expect * (1.0 - expect) / trials as f64).sqrt();
            assert!((p - expect).abs() < 3.0 * se, "slot {slot}: {p} vs {expect}");
        }
    }

    #[test]
    fn lost_photons_produce_no_clicks() {
        let state = packet_state(&[Phase::Zero, Phase::Pi]).unwrap();
        let sampler = PairOutcomeSampler::new(&state);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(sample_measurement(&mut rng, &sampler, (false, false), 0).is_empty());
        let single = sample_measurement(&mut rng, &sampler, (true, false), 0);
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].party, Party::Alice);
    }

    #[test]
    fn single_photon_marginal_matches_qubit_readout() {
        // resent qubit readout: clicks at k-1, k, k+1 with 1/4, 1/2, 1/4
        let sampler = PhotonOutcomeSampler::new(&PhotonState::time_bin_qubit(5, Phase::Zero));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 300_000u64;
        let mut slots: BTreeMap<i64, u64> = BTreeMap::new();
        for _ in 0..trials {
            let (k, _) = sampler.sample(&mut rng);
            *slots.entry(k).or_insert(0) += 1;
        }
        for (slot, expect) in [(5i64, 0.25), (6, 0.5), (7, 0.25)] {
            let p = *slots.get(&slot).unwrap() as f64 / trials as f64;
            let se = (expect * (1.0 - expect) / trials as f64).sqrt();
            assert!((p - expect).abs() < 3.0 * se);
        }
    }

    #[test]
    fn zero_dark_rate_changes_nothing() {
        let mut log = ClickLog::new();
        log.insert(
            3,
            LogEntry {
                port: Port::A,
                cause: ClickCause::Photon,
                pair_id: Some(0),
            },
        );
        let before = log.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        apply_dark_counts(&mut rng, &mut log, 0.0, 1_000_000);
        assert_eq!(log, before);
    }

    #[test]
    fn dark_count_totals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let slots = 10_000_000u64;
        let mut log = ClickLog::new();
        apply_dark_counts(&mut rng, &mut log, 1e-5, slots);
        let n = log.len() as f64;
        // expected 100 dark clicks, 3 sigma ~ 30
        assert!((n - 100.0).abs() < 3.0 * 10.0, "dark clicks {n}");
        assert!(log.values().all(|e| e.cause == ClickCause::Dark));
    }

    #[test]
    fn dark_insertion_independent_of_photon_clicks() {
        // with F free slots out of T, recorded darks ~ Binomial(T, d)
        // restricted to free slots: mean d * F
        let slots = 200_000u64;
        let mut base = ClickLog::new();
        for s in (1..=slots as i64).step_by(2) {
            base.insert(
                s,
                LogEntry {
                    port: Port::A,
                    cause: ClickCause::Photon,
                    pair_id: Some(0),
                },
            );
        }
        let occupied = base.len() as u64;
        let free = slots - occupied;
        let d = 1e-3;
        let mut total_new = 0u64;
        let reps = 50;
        for seed in 0..reps {
            let mut log = base.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            apply_dark_counts(&mut rng, &mut log, d, slots);
            total_new += log.len() as u64 - occupied;
        }
        let mean = total_new as f64 / reps as f64;
        let expect = d * free as f64;
        let se = (expect / reps as f64).sqrt(); // Poisson-ish
        assert!((mean - expect).abs() < 4.0 * se, "{mean} vs {expect}");
    }
}
