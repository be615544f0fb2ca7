//! Attack strategies as interceptors on the photon path.
//!
//! All interceptors share one measurement primitive: both photons of each
//! emitted pair are measured through interferometers identical to the
//! recipients' (transmittance 1 on the tap), clicks are merged per line with
//! threshold detectors, and a coincidence at slot `k` yields the inferred
//! differential phase — ports equal means 0, ports different means pi. At an
//! error slot that inference is a uniformly random bit, which is exactly what
//! the detection-slot defense exploits.
//!
//! Resend conventions:
//! * An outside eavesdropper resends either the two-slot entangled pair or a
//!   pair of classically-correlated time-bin qubits, and forwards vacuum
//!   where she saw no coincidence (no count-rate matching).
//! * A dishonest recipient resends single photons to the other recipient
//!   only, rate-matched to the expected count rate by selecting a random
//!   subset of his usable coincidence events (the selection itself lives in
//!   the session driver, which sees the whole session).

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{eve_bs_info, EveBsInfo};
use crate::channel::PairOutcomeSampler;
use crate::error::Result;
use crate::source::EmissionEvent;
use crate::statevec::{PairState, Phase, PhotonState, Port};

/// Strategy tag plus parameters, as configured in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryModel {
    /// Outside I-R with entangled resend pairs.
    EveIrEntangled,
    /// Outside I-R with classically correlated single photons.
    EveIrClassical,
    /// Beam-splitting attack with quantum storage until disclosure.
    EveBs,
    /// Dishonest Bob, one resend per selected coincidence.
    BobIrSingle {
        /// Alice-facing resend rate per slot; defaults to the expected
        /// honest rate `M mu alpha`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_rate: Option<f64>,
    },
    /// Dishonest Bob, resends built from `n` sequential coincidences.
    BobIrSequential {
        n: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_rate: Option<f64>,
    },
}

impl AdversaryModel {
    pub fn label(&self) -> &'static str {
        match self {
            AdversaryModel::EveIrEntangled => "eve_ir_entangled",
            AdversaryModel::EveIrClassical => "eve_ir_classical",
            AdversaryModel::EveBs => "eve_bs",
            AdversaryModel::BobIrSingle { .. } => "bob_ir_single",
            AdversaryModel::BobIrSequential { .. } => "bob_ir_sequential",
        }
    }

    /// Sequence length of the strategy (1 unless sequential).
    pub fn sequence_len(&self) -> u32 {
        match self {
            AdversaryModel::BobIrSequential { n, .. } => *n,
            _ => 1,
        }
    }
}

/// One coincidence observed by an interceptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasuredCoincidence {
    pub slot: i64,
    /// Inferred differential phase at `slot`.
    pub delta: Phase,
}

/// A substitute state dispatched after an interception.
#[derive(Debug, Clone)]
pub enum ResendState {
    /// Entangled pair sent to both recipients.
    EntangledPair(PairState),
    /// Independent time-bin qubits, one per recipient.
    ClassicalPair {
        alice: PhotonState,
        bob: PhotonState,
    },
}

/// Result of intercepting one packet's emission.
#[derive(Debug, Clone)]
pub struct InterceptOutcome {
    pub coincidences: Vec<MeasuredCoincidence>,
    pub resends: Vec<ResendState>,
    /// The interceptor's private key guess, one bit per coincidence slot.
    pub key_guess: Vec<(i64, u8)>,
}

/// Measures all pairs of one emission through an interferometer pair and
/// returns the coincidence slots with inferred phases, in slot order.
pub fn measure_coincidences<R: Rng + ?Sized>(
    rng: &mut R,
    emission: &EmissionEvent,
) -> Vec<MeasuredCoincidence> {
    if emission.pair_count == 0 {
        return Vec::new();
    }
    let sampler = PairOutcomeSampler::new(&emission.state);
    let mut signal_line: BTreeMap<i64, Port> = BTreeMap::new();
    let mut idler_line: BTreeMap<i64, Port> = BTreeMap::new();
    for _ in 0..emission.pair_count {
        let (ks, ps, ki, pi) = sampler.sample(rng);
        signal_line.entry(ks).or_insert(ps);
        idler_line.entry(ki).or_insert(pi);
    }
    signal_line
        .iter()
        .filter_map(|(&slot, &ps)| {
            idler_line.get(&slot).map(|&pi| MeasuredCoincidence {
                slot,
                delta: Phase::from_bit(ps.bit() != pi.bit()),
            })
        })
        .collect()
}

/// Outside I-R step with entangled resends: for every coincidence at slot
/// `k`, resend `(|k-1>|k-1> + e^{i delta}|k>|k>)/sqrt(2)` to the recipients
/// over lossless lines. Non-coincidence instances forward vacuum.
pub fn eve_ir_entangled_step<R: Rng + ?Sized>(
    rng: &mut R,
    emission: &EmissionEvent,
) -> InterceptOutcome {
    let coincidences = measure_coincidences(rng, emission);
    let resends = coincidences
        .iter()
        .map(|c| ResendState::EntangledPair(PairState::two_slot_entangled(c.slot - 1, c.delta)))
        .collect();
    let key_guess = coincidences.iter().map(|c| (c.slot, c.delta.bit())).collect();
    InterceptOutcome {
        coincidences,
        resends,
        key_guess,
    }
}

/// Outside I-R step with classical correlation: per coincidence, two
/// independent two-slot qubits with `phi_A` uniform and `phi_B = phi_A` when
/// `delta = 0`, `phi_B = phi_A + pi` when `delta = pi`.
pub fn eve_ir_classical_step<R: Rng + ?Sized>(
    rng: &mut R,
    emission: &EmissionEvent,
) -> InterceptOutcome {
    let coincidences = measure_coincidences(rng, emission);
    let resends = coincidences
        .iter()
        .map(|c| {
            let phi_a = Phase::from_bit(rng.random_bool(0.5));
            let phi_b = phi_a.xor(c.delta);
            ResendState::ClassicalPair {
                alice: PhotonState::time_bin_qubit(c.slot - 1, phi_a),
                bob: PhotonState::time_bin_qubit(c.slot - 1, phi_b),
            }
        })
        .collect();
    let key_guess = coincidences.iter().map(|c| (c.slot, c.delta.bit())).collect();
    InterceptOutcome {
        coincidences,
        resends,
        key_guess,
    }
}

/// Beam-splitting closed forms: success probability per disclosed instance
/// and the information bound over `n_sif` sifted bits. The Monte Carlo mode
/// lives in the session driver, which routes each photon to the recipients
/// with probability `alpha` and into Eve's storage otherwise.
pub fn eve_bs_analysis(mu: f64, alpha: f64, n_sif: f64) -> Result<EveBsInfo> {
    eve_bs_info(mu, alpha, n_sif)
}

/// A substitute photon prepared by dishonest Bob, with the slot/port pairs he
/// declares over the classical channel.
#[derive(Debug, Clone)]
pub struct BobResend {
    pub state: PhotonState,
    pub declared: Vec<(i64, Port)>,
    /// Coincidence slots the resend was built from.
    pub source_slots: Vec<i64>,
}

/// Single-coincidence resend: the qubit of the measured phase, blinded with a
/// random `phi_B` that becomes Bob's declared port.
///
/// Alice's slot-`k` port is then `delta XOR phi_B`, so the reconstruction
/// `port_A XOR port_B` recovers `delta` while each stream alone stays
/// uniform.
pub fn bob_single_cheat_step<R: Rng + ?Sized>(
    rng: &mut R,
    coincidence: &MeasuredCoincidence,
) -> BobResend {
    let phi_b = Phase::from_bit(rng.random_bool(0.5));
    let phi_a = coincidence.delta.xor(phi_b);
    BobResend {
        state: PhotonState::time_bin_qubit(coincidence.slot - 1, phi_a),
        declared: vec![(coincidence.slot, Port::from_bit(phi_b.bit() != 0))],
        source_slots: vec![coincidence.slot],
    }
}

/// Greedy left-to-right extraction of non-overlapping `n`-windows from runs
/// of consecutive coincidence slots.
pub fn sequential_windows(
    coincidences: &[MeasuredCoincidence],
    n: usize,
) -> Vec<Vec<MeasuredCoincidence>> {
    let mut windows = Vec::new();
    let mut run: Vec<MeasuredCoincidence> = Vec::new();
    let mut flush = |run: &mut Vec<MeasuredCoincidence>| {
        for chunk in run.chunks_exact(n) {
            windows.push(chunk.to_vec());
        }
        run.clear();
    };
    for &c in coincidences {
        if let Some(last) = run.last() {
            if c.slot != last.slot + 1 {
                flush(&mut run);
            }
        }
        run.push(c);
    }
    flush(&mut run);
    windows
}

/// Sequential resend: the `(n+1)`-slot state whose differential phases match
/// the measured ones, anchored with phase 0 on the leading slot. Bob declares
/// port `a` for every window slot, so `port_A XOR port_B` again recovers his
/// measured phase at each slot.
pub fn bob_sequential_cheat_step(window: &[MeasuredCoincidence]) -> BobResend {
    debug_assert!(!window.is_empty());
    debug_assert!(window.windows(2).all(|w| w[1].slot == w[0].slot + 1));
    let mut phases = Vec::with_capacity(window.len() + 1);
    phases.push(Phase::Zero);
    for (j, c) in window.iter().enumerate() {
        phases.push(phases[j].xor(c.delta));
    }
    let first_slot = window[0].slot - 1;
    BobResend {
        state: PhotonState::multi_slot(first_slot, &phases),
        declared: window.iter().map(|c| (c.slot, Port::A)).collect(),
        source_slots: window.iter().map(|c| c.slot).collect(),
    }
}
