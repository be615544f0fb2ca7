//! The six-step secret-sharing protocol: generation, transmission,
//! measurement, sifting, key derivation, disclosure, reconstruction, QBER
//! estimation and the two monitoring defenses (count rate and detection-slot
//! rate).
//!
//! Information flow follows the protocol order: interceptors see only photon
//! states (never slot roles), recipients disclose click instances without
//! ports, and roles are applied to the sift only when Charlie's key is
//! derived.
//!
//! Monitoring uses exact binomial quantiles at a configured significance
//! level: Alice aborts when her total count falls below the lower quantile of
//! the expected honest rate, or when her clicks in honestly-silent slots (the
//! detection slot and any extra vacant measurement slots) exceed the upper
//! quantile of the dark-count rate.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{self, AdversaryModel, MeasuredCoincidence};
use crate::channel::{
    self, ChannelConfig, ClickCause, ClickLog, LogEntry, PairOutcomeSampler, Party,
    PhotonOutcomeSampler,
};
use crate::error::{Error, Result};
use crate::source::{self, PacketSpec, SlotRole, SourceConfig};
use crate::statevec::Port;
use crate::stats;

/// Statistical configuration of the two abort monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    /// One-sided false-abort probability per monitor.
    pub significance: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig { significance: 1e-6 }
    }
}

/// Everything one session needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    pub source: SourceConfig,
    pub channel: ChannelConfig,
    pub adversary: Option<AdversaryModel>,
    pub session_slots: u64,
    /// Fraction of key bits sacrificed as test bits.
    pub test_fraction: f64,
    pub monitor: MonitorConfig,
}

impl SessionParams {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.channel.validate()?;
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test_fraction = {} must lie in (0, 1)",
                self.test_fraction
            )));
        }
        let min_span = (self.source.dims.min_dim() + 2) as u64;
        if self.session_slots < min_span {
            return Err(Error::InvalidConfig(format!(
                "session of {} slots cannot hold one packet (needs {min_span})",
                self.session_slots
            )));
        }
        if !(self.monitor.significance > 0.0 && self.monitor.significance < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "significance = {} must lie in (0, 0.5)",
                self.monitor.significance
            )));
        }
        if let Some(AdversaryModel::BobIrSequential { n, .. }) = self.adversary {
            if n < 1 {
                return Err(Error::InvalidConfig("sequence length n must be >= 1".into()));
            }
            if n as usize > self.source.dims.max_dim() {
                return Err(Error::AttackInfeasible { n: n as usize });
            }
        }
        Ok(())
    }
}

/// One recipient's record of the session.
#[derive(Debug, Clone)]
pub struct PartyLog {
    pub party: Party,
    pub clicks: ClickLog,
}

impl PartyLog {
    pub fn new(party: Party) -> Self {
        PartyLog {
            party,
            clicks: ClickLog::new(),
        }
    }

    /// The time instances announced over the classical channel. Ports are
    /// never part of the disclosure.
    pub fn disclosed_instances(&self) -> impl Iterator<Item = i64> + '_ {
        self.clicks.keys().copied()
    }

    pub fn port(&self, slot: i64) -> Option<Port> {
        self.clicks.get(&slot).map(|e| e.port)
    }
}

/// Slots both recipients reported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiftResult {
    pub slots: Vec<i64>,
}

/// Intersection of the two disclosed click-instance lists.
pub fn sift_coincidences(alice: &PartyLog, bob: &PartyLog) -> SiftResult {
    let slots = alice
        .disclosed_instances()
        .filter(|slot| bob.clicks.contains_key(slot))
        .collect();
    SiftResult { slots }
}

/// An ordered key: bit `bits[i]` belongs to sifted signal slot `slots[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeyBits {
    pub slots: Vec<i64>,
    pub bits: Vec<u8>,
}

impl KeyBits {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Locates the packet containing an absolute slot, with the 1-based relative
/// slot index.
pub fn locate_packet(packets: &[PacketSpec], slot: i64) -> Option<(&PacketSpec, usize)> {
    let idx = packets.partition_point(|p| p.start_slot() <= slot);
    if idx == 0 {
        return None;
    }
    let packet = &packets[idx - 1];
    let rel = slot - packet.start_slot() + 1;
    (rel >= 1 && rel <= packet.span() as i64).then_some((packet, rel as usize))
}

/// Charlie's key: one bit per sifted signal slot, 0 for differential phase 0
/// and 1 for pi. Error- and detection-slot coincidences never enter the key.
pub fn derive_charlie_key(packets: &[PacketSpec], sift: &SiftResult) -> Result<KeyBits> {
    let mut key = KeyBits::default();
    for &slot in &sift.slots {
        let (packet, rel) =
            locate_packet(packets, slot).ok_or(Error::SlotOutsidePackets { slot })?;
        if packet.role(rel) == SlotRole::Signal {
            key.slots.push(slot);
            key.bits.push(packet.delta_phase(rel).bit());
        }
    }
    Ok(key)
}

/// The recipients' joint reconstruction: bit = port_A XOR port_B at each
/// disclosed signal slot.
pub fn reconstruct_key(alice: &PartyLog, bob: &PartyLog, signal_slots: &[i64]) -> Result<KeyBits> {
    let mut key = KeyBits::default();
    for &slot in signal_slots {
        let pa = alice.port(slot).ok_or(Error::MissingPort {
            party: "Alice",
            slot,
        })?;
        let pb = bob.port(slot).ok_or(Error::MissingPort {
            party: "Bob",
            slot,
        })?;
        key.slots.push(slot);
        key.bits.push(pa.bit() ^ pb.bit());
    }
    Ok(key)
}

/// QBER estimate over a sacrificed test subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberEstimate {
    pub qber: f64,
    pub tested: u64,
    pub errors: u64,
}

/// Samples `ceil(test_fraction * len)` random key positions, compares them,
/// and returns the estimate together with the surviving key.
pub fn estimate_qber<R: Rng + ?Sized>(
    charlie: &KeyBits,
    reconstructed: &KeyBits,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(QberEstimate, KeyBits)> {
    assert_eq!(
        charlie.slots, reconstructed.slots,
        "keys must cover the same sifted signal slots"
    );
    let len = charlie.len();
    if len == 0 {
        return Err(Error::EmptyTestSet { key_len: 0 });
    }
    let tested = ((len as f64 * test_fraction).ceil() as usize).clamp(1, len);
    let mut chosen = index::sample(rng, len, tested).into_vec();
    chosen.sort_unstable();
    let mut errors = 0u64;
    for &i in &chosen {
        if charlie.bits[i] != reconstructed.bits[i] {
            errors += 1;
        }
    }
    let mut remaining = KeyBits::default();
    let mut next = chosen.iter().peekable();
    for i in 0..len {
        if next.peek() == Some(&&i) {
            next.next();
            continue;
        }
        remaining.slots.push(reconstructed.slots[i]);
        remaining.bits.push(reconstructed.bits[i]);
    }
    Ok((
        QberEstimate {
            qber: errors as f64 / tested as f64,
            tested: tested as u64,
            errors,
        },
        remaining,
    ))
}

/// Counts feeding the abort monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedCounts {
    pub covered_slots: u64,
    pub alice_clicks: u64,
    /// Honestly-silent measurement slots in the session.
    pub detection_slots: u64,
    /// Alice's clicks in those slots (photon or dark).
    pub detection_clicks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbortFlags {
    /// Alice's total count rate fell below the honest expectation.
    pub count_rate: bool,
    /// Detection-slot counts exceeded the dark-count expectation.
    pub detection_slot: bool,
}

impl AbortFlags {
    pub fn any(&self) -> bool {
        self.count_rate || self.detection_slot
    }
}

/// Applies both abort rules at the configured significance.
pub fn monitor_rates(
    observed: &ObservedCounts,
    expected_click_probability: f64,
    dark: f64,
    config: &MonitorConfig,
) -> AbortFlags {
    let lower = stats::binomial_quantile(
        observed.covered_slots,
        expected_click_probability,
        config.significance,
    );
    let upper = stats::binomial_quantile(observed.detection_slots, dark, 1.0 - config.significance);
    AbortFlags {
        count_rate: observed.alice_clicks < lower,
        detection_slot: observed.detection_clicks > upper,
    }
}

/// Exact per-slot click probability of an honest recipient, averaged over the
/// packet layout.
///
/// Per packet of dimension `N`, the photon arrival intensity at interior
/// measurement slots (`2..=N`) is `mu * alpha` and at the two edge slots
/// (1 and `N+1`) `mu * alpha / 2`; Poisson thinning makes the per-slot click
/// probability `1 - exp(-intensity)`, and dark counts fold in per slot.
pub fn expected_click_probability(source: &SourceConfig, channel: &ChannelConfig) -> Result<f64> {
    source.validate()?;
    channel.validate()?;
    let lam_interior = source.mu * channel.alpha;
    let lam_edge = 0.5 * source.mu * channel.alpha;
    let p_interior = 1.0 - (-lam_interior).exp();
    let p_edge = 1.0 - (-lam_edge).exp();
    let mut clicks = 0.0;
    let mut span = 0.0;
    for (n, w) in source.dims.support() {
        let nf = n as f64;
        clicks += w * ((nf - 1.0) * p_interior + 2.0 * p_edge);
        span += w * (nf + source.mean_gap());
    }
    let photon_rate = clicks / span;
    Ok(photon_rate + channel.dark * (1.0 - photon_rate))
}

/// Mark ratio of the configured source: occupied emission slots per slot.
pub fn mark_ratio(source: &SourceConfig) -> Result<f64> {
    source.validate()?;
    let mut occupied = 0.0;
    let mut span = 0.0;
    for (n, w) in source.dims.support() {
        occupied += w * n as f64;
        span += w * (n as f64 + source.mean_gap());
    }
    Ok(occupied / span)
}

/// Attack-side diagnostics of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AttackReport {
    pub kind: String,
    /// Coincidences the interceptor measured (and, for outside Eve, resent).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercepted_coincidences: Option<u64>,
    /// Resends dispatched to Alice by a dishonest recipient.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resends: Option<u64>,
    /// Resends whose source window touched an error slot.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_slot_resends: Option<u64>,
    /// Usable coincidence events (or windows) available for selection.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<u64>,
    /// Alice-facing resend rate the selection targeted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_rate: Option<f64>,
    /// Whether enough candidates existed to meet the target rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_match_feasible: Option<bool>,
    /// Disclosed signal-slot coincidences a beam-splitting Eve aimed at.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_disclosed_signal: Option<u64>,
    /// Those instances where Eve's stored photons also coincided.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_eve_hits: Option<u64>,
    /// Information bound `mu n_sif / 2` on fully known bits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_known_bits_bound: Option<f64>,
}

/// Aggregated outcome of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_slots: u64,
    pub covered_slots: u64,
    pub packets: u64,
    pub signal_slots: u64,
    pub error_slots: u64,
    /// Honestly-silent slots: the detection slot plus any extra vacant
    /// measurement slots of long gaps.
    pub detection_slots: u64,
    pub alice_clicks: u64,
    pub bob_clicks: u64,
    pub alice_detection_clicks: u64,
    pub alice_detection_photon_clicks: u64,
    pub sifted_slots: u64,
    pub sifted_signal: u64,
    pub sifted_error: u64,
    pub sifted_detection: u64,
    /// Sifted signal slots whose two clicks share one photon-pair origin.
    pub sifted_clean_signal: u64,
    /// Mismatches between Charlie's and the reconstructed key over the clean
    /// sifted signal slots.
    pub clean_key_mismatches: u64,
    /// Raw key mismatches over all sifted signal slots.
    pub key_mismatches: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qber: Option<QberEstimate>,
    /// Key bits left after removing test bits.
    pub key_bits: u64,
    /// Sifted signal coincidences per covered slot (the shared key rate).
    pub key_rate: f64,
    pub observed_click_rate: f64,
    pub expected_click_rate: f64,
    pub abort: AbortFlags,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackReport>,
}

/// Full session outcome, including the raw material the report was built
/// from (logs, packets, keys) for downstream analysis.
#[derive(Debug, Clone)]
pub struct SessionResult {
    pub report: SessionReport,
    pub alice: PartyLog,
    pub bob: PartyLog,
    pub packets: Vec<PacketSpec>,
    pub sift: SiftResult,
    pub charlie_key: KeyBits,
    pub reconstructed_key: KeyBits,
    pub remaining_key: KeyBits,
    /// Aligned with `charlie_key.slots`: true when the sifted coincidence is
    /// a genuine single-pair event.
    pub clean_flags: Vec<bool>,
}

struct BobState {
    coincidences: Vec<MeasuredCoincidence>,
}

struct BsState {
    /// Slot -> pair id of the first stored photon on each of Eve's lines.
    eve_signal: BTreeMap<i64, u64>,
    eve_idler: BTreeMap<i64, u64>,
}

/// Runs one full session.
pub fn run_session<R: Rng + ?Sized>(params: &SessionParams, rng: &mut R) -> Result<SessionResult> {
    params.validate()?;
    let alpha = params.channel.alpha;
    let mu = params.source.mu;

    let mut packets: Vec<PacketSpec> = Vec::new();
    let mut alice = ClickLog::new();
    let mut bob = ClickLog::new();
    let mut pair_seq: u64 = 0;
    let mut intercepted: u64 = 0;

    let mut bob_state = match params.adversary {
        Some(AdversaryModel::BobIrSingle { .. }) | Some(AdversaryModel::BobIrSequential { .. }) => {
            Some(BobState {
                coincidences: Vec::new(),
            })
        }
        _ => None,
    };
    let mut bs_state = match params.adversary {
        Some(AdversaryModel::EveBs) => Some(BsState {
            eve_signal: BTreeMap::new(),
            eve_idler: BTreeMap::new(),
        }),
        _ => None,
    };

    // generation, interception and measurement
    let mut cursor: i64 = 1;
    loop {
        let packet = source::draw_packet(rng, &params.source, cursor)?;
        if (cursor + packet.span() as i64 - 1) as u64 > params.session_slots {
            break;
        }
        let emission = source::sample_emissions(rng, &packet, mu);
        if emission.pair_count > 0 {
            match params.adversary {
                None => {
                    let sampler = PairOutcomeSampler::new(&emission.state);
                    for _ in 0..emission.pair_count {
                        let id = pair_seq;
                        pair_seq += 1;
                        let survivors = channel::transmit_pair(rng, alpha);
                        for click in channel::sample_measurement(rng, &sampler, survivors, id) {
                            let log = match click.party {
                                Party::Alice => &mut alice,
                                Party::Bob => &mut bob,
                            };
                            channel::merge_click(log, &click);
                        }
                    }
                }
                Some(AdversaryModel::EveBs) => {
                    let bs = bs_state.as_mut().expect("bs state present");
                    let sampler = PairOutcomeSampler::new(&emission.state);
                    for _ in 0..emission.pair_count {
                        let id = pair_seq;
                        pair_seq += 1;
                        let (ks, ps, ki, pi) = sampler.sample(rng);
                        if rng.random_bool(alpha) {
                            alice.entry(ks).or_insert(LogEntry {
                                port: ps,
                                cause: ClickCause::Photon,
                                pair_id: Some(id),
                            });
                        } else {
                            bs.eve_signal.entry(ks).or_insert(id);
                        }
                        if rng.random_bool(alpha) {
                            bob.entry(ki).or_insert(LogEntry {
                                port: pi,
                                cause: ClickCause::Photon,
                                pair_id: Some(id),
                            });
                        } else {
                            bs.eve_idler.entry(ki).or_insert(id);
                        }
                    }
                }
                Some(AdversaryModel::EveIrEntangled) | Some(AdversaryModel::EveIrClassical) => {
                    let outcome = if params.adversary == Some(AdversaryModel::EveIrEntangled) {
                        adversary::eve_ir_entangled_step(rng, &emission)
                    } else {
                        adversary::eve_ir_classical_step(rng, &emission)
                    };
                    intercepted += outcome.coincidences.len() as u64;
                    // resends built from the very first packet's leading
                    // error slot can click one slot before the session
                    // window; such clicks fall outside the observation range
                    for resend in outcome.resends {
                        let id = pair_seq;
                        pair_seq += 1;
                        match resend {
                            adversary::ResendState::EntangledPair(pair) => {
                                let sampler = PairOutcomeSampler::new(&pair);
                                for click in
                                    channel::sample_measurement(rng, &sampler, (true, true), id)
                                {
                                    if click.slot < 1 {
                                        continue;
                                    }
                                    let log = match click.party {
                                        Party::Alice => &mut alice,
                                        Party::Bob => &mut bob,
                                    };
                                    channel::merge_click(log, &click);
                                }
                            }
                            adversary::ResendState::ClassicalPair {
                                alice: state_a,
                                bob: state_b,
                            } => {
                                let (slot, port) = PhotonOutcomeSampler::new(&state_a).sample(rng);
                                if slot >= 1 {
                                    alice.entry(slot).or_insert(LogEntry {
                                        port,
                                        cause: ClickCause::Photon,
                                        pair_id: Some(id),
                                    });
                                }
                                let (slot, port) = PhotonOutcomeSampler::new(&state_b).sample(rng);
                                if slot >= 1 {
                                    bob.entry(slot).or_insert(LogEntry {
                                        port,
                                        cause: ClickCause::Photon,
                                        pair_id: Some(id),
                                    });
                                }
                            }
                        }
                    }
                }
                Some(AdversaryModel::BobIrSingle { .. })
                | Some(AdversaryModel::BobIrSequential { .. }) => {
                    let state = bob_state.as_mut().expect("bob state present");
                    let found = adversary::measure_coincidences(rng, &emission);
                    intercepted += found.len() as u64;
                    state.coincidences.extend(found);
                }
            }
        }
        cursor += packet.span() as i64;
        packets.push(packet);
    }
    let covered = (cursor - 1) as u64;

    // dishonest Bob: select a rate-matched subset of his usable coincidence
    // events and resend substitute photons to Alice
    let mut attack: Option<AttackReport> = None;
    if let Some(state) = bob_state {
        let model = params.adversary.expect("bob flow implies adversary");
        let n = model.sequence_len() as usize;
        let target_rate = match model {
            AdversaryModel::BobIrSingle { target_rate } => target_rate,
            AdversaryModel::BobIrSequential { target_rate, .. } => target_rate,
            _ => None,
        }
        .unwrap_or(mark_ratio(&params.source)? * mu * alpha);
        let candidates: Vec<Vec<MeasuredCoincidence>> = if n == 1 {
            state.coincidences.iter().map(|&c| vec![c]).collect()
        } else {
            adversary::sequential_windows(&state.coincidences, n)
        };
        let wanted = (target_rate * covered as f64).round() as usize;
        let taking = wanted.min(candidates.len());
        let mut chosen = index::sample(rng, candidates.len(), taking).into_vec();
        chosen.sort_unstable();
        let mut resends = 0u64;
        let mut error_resends = 0u64;
        for idx in chosen {
            let window = &candidates[idx];
            let resend = if n == 1 {
                adversary::bob_single_cheat_step(rng, &window[0])
            } else {
                adversary::bob_sequential_cheat_step(window)
            };
            let id = pair_seq;
            pair_seq += 1;
            let (slot, port) = PhotonOutcomeSampler::new(&resend.state).sample(rng);
            if slot >= 1 && slot <= covered as i64 {
                alice.entry(slot).or_insert(LogEntry {
                    port,
                    cause: ClickCause::Photon,
                    pair_id: Some(id),
                });
            }
            for (slot, port) in &resend.declared {
                bob.entry(*slot).or_insert(LogEntry {
                    port: *port,
                    cause: ClickCause::Photon,
                    pair_id: Some(id),
                });
            }
            resends += 1;
            let touches_error = resend.source_slots.iter().any(|&s| {
                locate_packet(&packets, s)
                    .map(|(p, rel)| p.role(rel) == SlotRole::Error)
                    .unwrap_or(false)
            });
            if touches_error {
                error_resends += 1;
            }
        }
        attack = Some(AttackReport {
            kind: model.label().to_string(),
            intercepted_coincidences: Some(intercepted),
            resends: Some(resends),
            error_slot_resends: Some(error_resends),
            candidates: Some(candidates.len() as u64),
            target_rate: Some(target_rate),
            rate_match_feasible: Some(candidates.len() >= wanted),
            ..AttackReport::default()
        });
    }

    // detector dark counts: Alice always; Bob when he is honest
    channel::apply_dark_counts(rng, &mut alice, params.channel.dark, covered);
    match params.adversary {
        Some(AdversaryModel::BobIrSingle { .. }) | Some(AdversaryModel::BobIrSequential { .. }) => {
        }
        _ => channel::apply_dark_counts(rng, &mut bob, params.channel.dark, covered),
    }

    let alice = PartyLog {
        party: Party::Alice,
        clicks: alice,
    };
    let bob = PartyLog {
        party: Party::Bob,
        clicks: bob,
    };

    // sifting, keys, QBER
    let sift = sift_coincidences(&alice, &bob);
    let charlie_key = derive_charlie_key(&packets, &sift)?;
    let reconstructed_key = reconstruct_key(&alice, &bob, &charlie_key.slots)?;

    let mut clean_flags = Vec::with_capacity(charlie_key.len());
    let mut sifted_clean_signal = 0u64;
    let mut clean_key_mismatches = 0u64;
    let mut key_mismatches = 0u64;
    for i in 0..charlie_key.len() {
        let slot = charlie_key.slots[i];
        let ea = alice.clicks.get(&slot).expect("sifted slot in Alice log");
        let eb = bob.clicks.get(&slot).expect("sifted slot in Bob log");
        let clean = ea.pair_id.is_some() && ea.pair_id == eb.pair_id;
        clean_flags.push(clean);
        let mismatch = charlie_key.bits[i] != reconstructed_key.bits[i];
        if mismatch {
            key_mismatches += 1;
        }
        if clean {
            sifted_clean_signal += 1;
            if mismatch {
                clean_key_mismatches += 1;
            }
        }
    }

    let (qber, remaining_key) = if charlie_key.is_empty() {
        (None, KeyBits::default())
    } else {
        let (estimate, remaining) =
            estimate_qber(&charlie_key, &reconstructed_key, params.test_fraction, rng)?;
        (Some(estimate), remaining)
    };

    // slot-role census and click classification
    let mut signal_slots = 0u64;
    let mut error_slots = 0u64;
    let mut detection_slots = 0u64;
    for p in &packets {
        signal_slots += (p.dim() - 1) as u64;
        error_slots += 2;
        detection_slots += (p.gap() - 1) as u64;
    }
    let silent = |slot: i64| -> bool {
        locate_packet(&packets, slot)
            .map(|(p, rel)| matches!(p.role(rel), SlotRole::Detection | SlotRole::Vacant))
            .unwrap_or(false)
    };
    let mut alice_detection_clicks = 0u64;
    let mut alice_detection_photon_clicks = 0u64;
    for (&slot, entry) in &alice.clicks {
        if silent(slot) {
            alice_detection_clicks += 1;
            if entry.cause == ClickCause::Photon {
                alice_detection_photon_clicks += 1;
            }
        }
    }
    let mut sifted_signal = 0u64;
    let mut sifted_error = 0u64;
    let mut sifted_detection = 0u64;
    for &slot in &sift.slots {
        match locate_packet(&packets, slot).map(|(p, rel)| p.role(rel)) {
            Some(SlotRole::Signal) => sifted_signal += 1,
            Some(SlotRole::Error) => sifted_error += 1,
            Some(SlotRole::Detection) | Some(SlotRole::Vacant) => sifted_detection += 1,
            None => {}
        }
    }

    // beam-splitting Eve evaluates her stored photons against the sift;
    // hits and the disclosure denominator both use genuine single-pair
    // coincidences, the convention for every analytic comparison
    if let Some(bs) = bs_state {
        let mut hits = 0u64;
        let mut disclosed_signal = 0u64;
        for (i, &slot) in charlie_key.slots.iter().enumerate() {
            if !clean_flags[i] {
                continue;
            }
            disclosed_signal += 1;
            if let (Some(a), Some(b)) = (bs.eve_signal.get(&slot), bs.eve_idler.get(&slot)) {
                if a == b {
                    hits += 1;
                }
            }
        }
        let bound = adversary::eve_bs_analysis(mu, alpha, sifted_signal as f64)?;
        attack = Some(AttackReport {
            kind: "eve_bs".to_string(),
            bs_disclosed_signal: Some(disclosed_signal),
            bs_eve_hits: Some(hits),
            bs_known_bits_bound: Some(bound.known_bits_bound),
            ..AttackReport::default()
        });
    } else if matches!(
        params.adversary,
        Some(AdversaryModel::EveIrEntangled) | Some(AdversaryModel::EveIrClassical)
    ) {
        attack = Some(AttackReport {
            kind: params.adversary.unwrap().label().to_string(),
            intercepted_coincidences: Some(intercepted),
            ..AttackReport::default()
        });
    }

    // monitors
    let expected_click_rate = expected_click_probability(&params.source, &params.channel)?;
    let observed = ObservedCounts {
        covered_slots: covered,
        alice_clicks: alice.clicks.len() as u64,
        detection_slots,
        detection_clicks: alice_detection_clicks,
    };
    let abort = monitor_rates(
        &observed,
        expected_click_rate,
        params.channel.dark,
        &params.monitor,
    );

    let report = SessionReport {
        session_slots: params.session_slots,
        covered_slots: covered,
        packets: packets.len() as u64,
        signal_slots,
        error_slots,
        detection_slots,
        alice_clicks: alice.clicks.len() as u64,
        bob_clicks: bob.clicks.len() as u64,
        alice_detection_clicks,
        alice_detection_photon_clicks,
        sifted_slots: sift.slots.len() as u64,
        sifted_signal,
        sifted_error,
        sifted_detection,
        sifted_clean_signal,
        clean_key_mismatches,
        key_mismatches,
        qber,
        key_bits: remaining_key.len() as u64,
        key_rate: sifted_signal as f64 / covered as f64,
        observed_click_rate: alice.clicks.len() as f64 / covered as f64,
        expected_click_rate,
        abort,
        attack,
    };

    Ok(SessionResult {
        report,
        alice,
        bob,
        packets,
        sift,
        charlie_key,
        reconstructed_key,
        remaining_key,
        clean_flags,
    })
}
