//! Complex-amplitude states for time-bin photons and the one-bit-delay
//! interferometer.
//!
//! Everything here is an exact pure-state calculation on sparse amplitude
//! maps indexed by time slot (and detector port after the interferometer).
//! The same distributions drive Monte Carlo sampling in `channel` and act as
//! the verification oracle in the test suites.
//!
//! Conventions:
//! * Slots are integers; a fresh packet occupies slots `1..=N`. Adjacent
//!   indices outside that range (0, N+1, N+2) appear in interferometer
//!   images and in adversarial resends.
//! * The delay interferometer maps a single slot ket as
//!   `|k> -> (|k,a> - |k,b> + |k+1,a> + |k+1,b>) / 2`.
//!   The sign layout between ports `a` and `b` is a convention; only the
//!   relative sign between the direct and delayed arms is physical.
//! * Modulation phases live in {0, pi} and are represented exactly by
//!   [`Phase`], so amplitudes stay in {0, ±1, ±2} times a real norm factor
//!   and probability identities hold to rounding error.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dimensionless probability amplitude.
pub type Amplitude = Complex64;

/// Tolerance for normalization and orthogonality identities.
pub const NORM_TOL: f64 = 1e-12;

/// A binary modulation phase, 0 or pi.
///
/// Sums and differences of such phases stay in {0, pi} modulo 2*pi, so the
/// group operation is an XOR. Keeping the phase symbolic (instead of an `f64`
/// angle) makes `e^{i*phi}` exactly ±1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Zero,
    Pi,
}

impl Phase {
    /// The exact value of `e^{i*phi}`: +1 or -1.
    pub fn factor(self) -> f64 {
        match self {
            Phase::Zero => 1.0,
            Phase::Pi => -1.0,
        }
    }

    /// Key-bit encoding: 0 for phase 0, 1 for phase pi.
    pub fn bit(self) -> u8 {
        match self {
            Phase::Zero => 0,
            Phase::Pi => 1,
        }
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Phase::Pi
        } else {
            Phase::Zero
        }
    }

    /// Phase addition modulo 2*pi (equivalently subtraction).
    pub fn xor(self, other: Phase) -> Phase {
        Phase::from_bit((self.bit() ^ other.bit()) != 0)
    }
}

/// Pump-pulse modulation phase, 0 or pi/2 (half the signal/idler phase).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PumpPhase {
    Zero,
    HalfPi,
}

impl PumpPhase {
    pub fn radians(self) -> f64 {
        match self {
            PumpPhase::Zero => 0.0,
            PumpPhase::HalfPi => FRAC_PI_2,
        }
    }
}

/// Interferometer output port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Port {
    A,
    B,
}

impl Port {
    pub fn bit(self) -> u8 {
        match self {
            Port::A => 0,
            Port::B => 1,
        }
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Port::B
        } else {
            Port::A
        }
    }
}

fn norm_sq(values: impl Iterator<Item = Amplitude>) -> f64 {
    values.map(|a| a.norm_sqr()).sum()
}

/// Pre-interferometer single-photon state over time slots.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonState {
    amp: BTreeMap<i64, Amplitude>,
}

impl PhotonState {
    /// Builds a state from slot amplitudes; zero entries are dropped.
    pub fn new(entries: impl IntoIterator<Item = (i64, Amplitude)>) -> Self {
        let mut amp = BTreeMap::new();
        for (slot, a) in entries {
            if a != Amplitude::ZERO {
                *amp.entry(slot).or_insert(Amplitude::ZERO) += a;
            }
        }
        PhotonState { amp }
    }

    /// The two-slot qubit `(|first> + e^{i*phi} |first+1>) / sqrt(2)`.
    pub fn time_bin_qubit(first_slot: i64, phi: Phase) -> Self {
        let c = Amplitude::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        PhotonState::new([(first_slot, c), (first_slot + 1, c * phi.factor())])
    }

    /// The `(n+1)`-slot resend state used by a sequential cheat: slot
    /// `first_slot + j` carries phase `phases[j]`, all with weight
    /// `1/sqrt(n+1)`.
    pub fn multi_slot(first_slot: i64, phases: &[Phase]) -> Self {
        let w = 1.0 / (phases.len() as f64).sqrt();
        PhotonState::new(
            phases
                .iter()
                .enumerate()
                .map(|(j, p)| (first_slot + j as i64, Amplitude::new(w * p.factor(), 0.0))),
        )
    }

    pub fn amplitude(&self, slot: i64) -> Amplitude {
        self.amp.get(&slot).copied().unwrap_or(Amplitude::ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Amplitude)> + '_ {
        self.amp.iter().map(|(&k, &a)| (k, a))
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sq(self.amp.values().copied())
    }
}

/// Post-interferometer single-photon state over (slot, port).
#[derive(Debug, Clone, PartialEq)]
pub struct PortedPhotonState {
    amp: BTreeMap<(i64, Port), Amplitude>,
}

impl PortedPhotonState {
    pub fn amplitude(&self, slot: i64, port: Port) -> Amplitude {
        self.amp
            .get(&(slot, port))
            .copied()
            .unwrap_or(Amplitude::ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, Port), Amplitude)> + '_ {
        self.amp.iter().map(|(&k, &a)| (k, a))
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sq(self.amp.values().copied())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PortedPhotonState) -> Amplitude {
        self.amp
            .iter()
            .map(|(k, a)| a.conj() * other.amp.get(k).copied().unwrap_or(Amplitude::ZERO))
            .sum()
    }
}

/// Two-photon state over (signal slot, idler slot), before the interferometers.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    dim: usize,
    amp: BTreeMap<(i64, i64), Amplitude>,
}

impl PairState {
    /// Builds a state from joint slot amplitudes; zero entries are dropped.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = ((i64, i64), Amplitude)>) -> Self {
        let mut amp = BTreeMap::new();
        for (slots, a) in entries {
            if a != Amplitude::ZERO {
                *amp.entry(slots).or_insert(Amplitude::ZERO) += a;
            }
        }
        PairState { dim, amp }
    }

    /// The two-slot entangled resend
    /// `(|k-1>|k-1> + e^{i*delta} |k>|k>) / sqrt(2)` with `k = first_slot + 1`.
    pub fn two_slot_entangled(first_slot: i64, delta: Phase) -> Self {
        let c = Amplitude::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        PairState::new(
            2,
            [
                ((first_slot, first_slot), c),
                ((first_slot + 1, first_slot + 1), c * delta.factor()),
            ],
        )
    }

    /// Number of occupied slots the state was built over.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitude(&self, signal_slot: i64, idler_slot: i64) -> Amplitude {
        self.amp
            .get(&(signal_slot, idler_slot))
            .copied()
            .unwrap_or(Amplitude::ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), Amplitude)> + '_ {
        self.amp.iter().map(|(&k, &a)| (k, a))
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sq(self.amp.values().copied())
    }
}

/// Two-photon state over (signal slot, signal port, idler slot, idler port),
/// after both interferometers. Non-coincident terms are retained so the total
/// squared norm stays 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PortedPairState {
    amp: BTreeMap<(i64, Port, i64, Port), Amplitude>,
}

impl PortedPairState {
    pub fn amplitude(&self, ks: i64, ps: Port, ki: i64, pi: Port) -> Amplitude {
        self.amp
            .get(&(ks, ps, ki, pi))
            .copied()
            .unwrap_or(Amplitude::ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, Port, i64, Port), Amplitude)> + '_ {
        self.amp.iter().map(|(&k, &a)| (k, a))
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sq(self.amp.values().copied())
    }

    /// Joint outcome probabilities in deterministic (sorted) order.
    pub fn joint_probabilities(&self) -> Vec<((i64, Port, i64, Port), f64)> {
        self.amp
            .iter()
            .map(|(&k, a)| (k, a.norm_sqr()))
            .collect()
    }
}

/// Same-slot coincidence probabilities of a ported pair state.
///
/// `entries` maps (slot, signal port, idler port) to probability; `residual`
/// is the probability mass of all non-coincident joint outcomes, kept
/// explicit so `total + residual = 1` is checkable.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceDistribution {
    pub entries: BTreeMap<(i64, Port, Port), f64>,
    pub residual: f64,
}

impl CoincidenceDistribution {
    /// Total coincidence probability over all slots and port pairs.
    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Coincidence probability of one slot, summed over port pairs.
    pub fn slot_probability(&self, slot: i64) -> f64 {
        PORTS
            .iter()
            .flat_map(|&ps| PORTS.iter().map(move |&pi| (ps, pi)))
            .map(|(ps, pi)| self.entries.get(&(slot, ps, pi)).copied().unwrap_or(0.0))
            .sum()
    }
}

pub const PORTS: [Port; 2] = [Port::A, Port::B];

/// Interferometer transfer rule for one slot ket:
/// `|k> -> (|k,a> - |k,b> + |k+1,a> + |k+1,b>) / 2`.
const TRANSFER: [(i64, Port, f64); 4] = [
    (0, Port::A, 0.5),
    (0, Port::B, -0.5),
    (1, Port::A, 0.5),
    (1, Port::B, 0.5),
];

/// Builds the packet state `sum_k e^{i*phi_k} |k>_s |k>_i / sqrt(N)` over
/// slots `1..=N`.
///
/// The global phase convention is `phi_1 = 0`; only differential phases are
/// physical, and a leading `Phase::Pi` merely flips the overall sign.
pub fn packet_state(phases: &[Phase]) -> Result<PairState> {
    let n = phases.len();
    if n < 2 {
        return Err(Error::InvalidDimension { dim: n });
    }
    let w = 1.0 / (n as f64).sqrt();
    Ok(PairState::new(
        n,
        phases.iter().enumerate().map(|(idx, p)| {
            let k = idx as i64 + 1;
            ((k, k), Amplitude::new(w * p.factor(), 0.0))
        }),
    ))
}

/// Sends a single photon through the delay interferometer.
///
/// The map is an isometry onto the ported basis: norms are preserved and
/// images of distinct slot kets stay orthogonal.
pub fn apply_interferometer_single(state: &PhotonState) -> PortedPhotonState {
    let mut amp: BTreeMap<(i64, Port), Amplitude> = BTreeMap::new();
    for (k, a) in state.iter() {
        for &(dk, port, f) in &TRANSFER {
            *amp.entry((k + dk, port)).or_insert(Amplitude::ZERO) += a * f;
        }
    }
    amp.retain(|_, a| *a != Amplitude::ZERO);
    PortedPhotonState { amp }
}

/// Sends both photons of a pair through their interferometers independently.
pub fn apply_interferometer_pair(state: &PairState) -> PortedPairState {
    let mut amp: BTreeMap<(i64, Port, i64, Port), Amplitude> = BTreeMap::new();
    for ((ks, ki), a) in state.iter() {
        for &(ds, ps, fs) in &TRANSFER {
            for &(di, pi, fi) in &TRANSFER {
                *amp.entry((ks + ds, ps, ki + di, pi))
                    .or_insert(Amplitude::ZERO) += a * (fs * fi);
            }
        }
    }
    amp.retain(|_, a| *a != Amplitude::ZERO);
    PortedPairState { amp }
}

/// Extracts same-slot coincidence probabilities and the residual
/// (non-coincident) mass from a ported pair state.
pub fn coincidence_distribution(state: &PortedPairState) -> CoincidenceDistribution {
    let mut entries = BTreeMap::new();
    let mut coincident = 0.0;
    for ((ks, ps, ki, pi), a) in state.iter() {
        if ks == ki {
            let p = a.norm_sqr();
            *entries.entry((ks, ps, pi)).or_insert(0.0) += p;
            coincident += p;
        }
    }
    CoincidenceDistribution {
        entries,
        residual: state.norm_sqr() - coincident,
    }
}

/// Click probabilities of a ported single-photon state (squared moduli).
pub fn click_distribution(state: &PortedPhotonState) -> BTreeMap<(i64, Port), f64> {
    state.iter().map(|(k, a)| (k, a.norm_sqr())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const F12: f64 = 0.5 * std::f64::consts::FRAC_1_SQRT_2; // 1/(2*sqrt(2))

    fn assert_amp(actual: Amplitude, re: f64, im: f64) {
        assert!(
            (actual.re - re).abs() < NORM_TOL && (actual.im - im).abs() < NORM_TOL,
            "amplitude {actual} != {re}+{im}i"
        );
    }

    #[test]
    fn packet_state_two_slots_uniform() {
        let s = packet_state(&[Phase::Zero, Phase::Zero]).unwrap();
        assert_amp(s.amplitude(1, 1), std::f64::consts::FRAC_1_SQRT_2, 0.0);
        assert_amp(s.amplitude(2, 2), std::f64::consts::FRAC_1_SQRT_2, 0.0);
        assert!((s.norm_sqr() - 1.0).abs() < NORM_TOL);
    }

    #[test]
    fn packet_state_two_slots_sign_flip() {
        let s = packet_state(&[Phase::Zero, Phase::Pi]).unwrap();
        assert_amp(s.amplitude(2, 2), -std::f64::consts::FRAC_1_SQRT_2, 0.0);
    }

    #[test]
    fn packet_state_four_slots_signs() {
        let s = packet_state(&[Phase::Zero, Phase::Zero, Phase::Pi, Phase::Pi]).unwrap();
        for (k, sign) in [(1, 1.0), (2, 1.0), (3, -1.0), (4, -1.0)] {
            assert_amp(s.amplitude(k, k), 0.5 * sign, 0.0);
        }
        // off-diagonal entries are empty for fresh packets
        assert_eq!(s.iter().count(), 4);
    }

    #[test]
    fn packet_state_rejects_small_dimension() {
        assert!(matches!(
            packet_state(&[Phase::Zero]),
            Err(Error::InvalidDimension { dim: 1 })
        ));
    }

    /// Frozen coefficients of the single-photon image of a two-slot qubit:
    /// `(|k-1> + e^{i phi}|k>)/sqrt(2)` maps to
    /// `{|k-1,a> - |k-1,b> + (1+e)|k,a> + (1-e)|k,b> + e|k+1,a> + e|k+1,b>} / (2 sqrt 2)`.
    #[test]
    fn qubit_image_coefficients() {
        for phi in [Phase::Zero, Phase::Pi] {
            let e = phi.factor();
            let out = apply_interferometer_single(&PhotonState::time_bin_qubit(4, phi));
            let expect = [
                (4, Port::A, 1.0),
                (4, Port::B, -1.0),
                (5, Port::A, 1.0 + e),
                (5, Port::B, 1.0 - e),
                (6, Port::A, e),
                (6, Port::B, e),
            ];
            for (slot, port, c) in expect {
                assert_amp(out.amplitude(slot, port), F12 * c, 0.0);
            }
            assert!((out.norm_sqr() - 1.0).abs() < NORM_TOL);
        }
    }

    #[test]
    fn single_slot_image() {
        let one = PhotonState::new([(7, Amplitude::new(1.0, 0.0))]);
        let out = apply_interferometer_single(&one);
        assert_amp(out.amplitude(7, Port::A), 0.5, 0.0);
        assert_amp(out.amplitude(7, Port::B), -0.5, 0.0);
        assert_amp(out.amplitude(8, Port::A), 0.5, 0.0);
        assert_amp(out.amplitude(8, Port::B), 0.5, 0.0);
        for (_, p) in click_distribution(&out) {
            assert!((p - 0.25).abs() < NORM_TOL);
        }
    }

    /// Frozen coefficients of the entangled-resend image: every listed term of
    /// the ported expansion of `(|k-1>|k-1> + e^{i d}|k>|k>)/sqrt(2)`, with
    /// prefactor `1/(4 sqrt 2)`.
    #[test]
    fn entangled_resend_image_coefficients() {
        for delta in [Phase::Zero, Phase::Pi] {
            let e = delta.factor();
            let input = PairState::two_slot_entangled(9, delta); // slots 9, 10
            let out = apply_interferometer_pair(&input);
            let pref = 0.25 * std::f64::consts::FRAC_1_SQRT_2;
            let coincident = [
                (9, Port::A, Port::A, 1.0),
                (9, Port::A, Port::B, -1.0),
                (9, Port::B, Port::A, -1.0),
                (9, Port::B, Port::B, 1.0),
                (10, Port::A, Port::A, 1.0 + e),
                (10, Port::A, Port::B, 1.0 - e),
                (10, Port::B, Port::A, 1.0 - e),
                (10, Port::B, Port::B, 1.0 + e),
                (11, Port::A, Port::A, e),
                (11, Port::A, Port::B, e),
                (11, Port::B, Port::A, e),
                (11, Port::B, Port::B, e),
            ];
            for (k, ps, pi, c) in coincident {
                assert_amp(out.amplitude(k, ps, k, pi), pref * c, 0.0);
            }
            assert!((out.norm_sqr() - 1.0).abs() < NORM_TOL);
        }
    }

    /// Frozen coefficients of the classically-correlated resend image:
    /// product of two qubit images, prefactor 1/8.
    #[test]
    fn classical_resend_image_coefficients() {
        for (phi_a, phi_b) in [
            (Phase::Zero, Phase::Zero),
            (Phase::Zero, Phase::Pi),
            (Phase::Pi, Phase::Zero),
            (Phase::Pi, Phase::Pi),
        ] {
            let (ea, eb) = (phi_a.factor(), phi_b.factor());
            let a = apply_interferometer_single(&PhotonState::time_bin_qubit(3, phi_a));
            let b = apply_interferometer_single(&PhotonState::time_bin_qubit(3, phi_b));
            // joint amplitude = product of single-photon amplitudes
            let joint = |k: i64, pa: Port, pb: Port| a.amplitude(k, pa) * b.amplitude(k, pb);
            let cases = [
                (3, Port::A, Port::A, 1.0),
                (3, Port::A, Port::B, -1.0),
                (3, Port::B, Port::A, -1.0),
                (3, Port::B, Port::B, 1.0),
                (4, Port::A, Port::A, (1.0 + ea) * (1.0 + eb)),
                (4, Port::A, Port::B, (1.0 + ea) * (1.0 - eb)),
                (4, Port::B, Port::A, (1.0 - ea) * (1.0 + eb)),
                (4, Port::B, Port::B, (1.0 - ea) * (1.0 - eb)),
                (5, Port::A, Port::A, ea * eb),
                (5, Port::A, Port::B, ea * eb),
                (5, Port::B, Port::A, ea * eb),
                (5, Port::B, Port::B, ea * eb),
            ];
            for (k, pa, pb, c) in cases {
                assert_amp(joint(k, pa, pb), 0.125 * c, 0.0);
            }
        }
    }

    /// Frozen coefficients of the sequential-resend image for each n: first
    /// slot `±e^{i phi'_0}`, middle slots sums/differences of neighbours,
    /// last occupied slot pairs with the random error phase, and the slot past
    /// the end carries `e^{i phi_e}` on both ports; prefactor `1/(2 sqrt(n+1))`.
    #[test]
    fn sequential_resend_image_coefficients() {
        for n in 1..=6usize {
            // phases: phi'_0 .. phi'_{n-1} then phi_e, alternate 0/pi
            let phases: Vec<Phase> = (0..=n)
                .map(|j| if j % 2 == 0 { Phase::Zero } else { Phase::Pi })
                .collect();
            let first = 20i64;
            let state = PhotonState::multi_slot(first, &phases);
            let out = apply_interferometer_single(&state);
            let pref = 0.5 / ((n + 1) as f64).sqrt();
            let e = |j: usize| phases[j].factor();
            assert_amp(out.amplitude(first, Port::A), pref * e(0), 0.0);
            assert_amp(out.amplitude(first, Port::B), -pref * e(0), 0.0);
            for j in 1..=n {
                let k = first + j as i64;
                assert_amp(out.amplitude(k, Port::A), pref * (e(j - 1) + e(j)), 0.0);
                assert_amp(out.amplitude(k, Port::B), pref * (e(j - 1) - e(j)), 0.0);
            }
            let past = first + (n as i64) + 1;
            assert_amp(out.amplitude(past, Port::A), pref * e(n), 0.0);
            assert_amp(out.amplitude(past, Port::B), pref * e(n), 0.0);
            // click probability past the end: 1/(2(n+1))
            let p_past: f64 = PORTS
                .iter()
                .map(|&p| out.amplitude(past, p).norm_sqr())
                .sum();
            assert!((p_past - 0.5 / (n as f64 + 1.0)).abs() < NORM_TOL);
        }
    }

    #[test]
    fn footnote_rates_all_dimensions_and_patterns() {
        for n in 2..=8usize {
            for pattern in 0..(1u32 << (n - 1)) {
                let mut phases = vec![Phase::Zero];
                for k in 1..n {
                    phases.push(if pattern >> (k - 1) & 1 == 1 {
                        Phase::Pi
                    } else {
                        Phase::Zero
                    });
                }
                let ported = apply_interferometer_pair(&packet_state(&phases).unwrap());
                let dist = coincidence_distribution(&ported);
                let nf = n as f64;
                for k in 2..=n as i64 {
                    assert!(
                        (dist.slot_probability(k) - 0.5 / nf).abs() < NORM_TOL,
                        "signal slot {k} N={n} pattern={pattern:b}"
                    );
                }
                for k in [1, n as i64 + 1] {
                    assert!((dist.slot_probability(k) - 0.25 / nf).abs() < NORM_TOL);
                }
                assert_eq!(dist.slot_probability(n as i64 + 2), 0.0);
                assert!((dist.total() + dist.residual - 1.0).abs() < NORM_TOL);
            }
        }
    }

    /// In a signal slot the ports agree exactly when the differential phase is
    /// zero and disagree exactly when it is pi.
    #[test]
    fn correlation_law() {
        let phases = [Phase::Zero, Phase::Zero, Phase::Pi, Phase::Pi];
        let dist =
            coincidence_distribution(&apply_interferometer_pair(&packet_state(&phases).unwrap()));
        // slot k correlates per delta_k = phi_k xor phi_{k-1}
        for (k, delta) in [(2i64, Phase::Zero), (3, Phase::Pi), (4, Phase::Zero)] {
            let same: f64 = [Port::A, Port::B]
                .iter()
                .map(|&p| dist.entries.get(&(k, p, p)).copied().unwrap_or(0.0))
                .sum();
            let diff: f64 = [(Port::A, Port::B), (Port::B, Port::A)]
                .iter()
                .map(|&(ps, pi)| dist.entries.get(&(k, ps, pi)).copied().unwrap_or(0.0))
                .sum();
            match delta {
                Phase::Zero => {
                    assert!((same - 0.125).abs() < NORM_TOL && diff.abs() < NORM_TOL)
                }
                Phase::Pi => {
                    assert!((diff - 0.125).abs() < NORM_TOL && same.abs() < NORM_TOL)
                }
            }
        }
        // error slots: all four port pairs equally likely, 1/(16N) each
        for k in [1i64, 5] {
            for &ps in &PORTS {
                for &pi in &PORTS {
                    let p = dist.entries.get(&(k, ps, pi)).copied().unwrap_or(0.0);
                    assert!((p - 1.0 / 64.0).abs() < NORM_TOL);
                }
            }
        }
    }

    /// Conditional error probabilities of the two eavesdropper resend
    /// strategies, computed from the exact distributions.
    #[test]
    fn resend_error_probabilities() {
        // entangled resend: coincidences at 1/8, 1/4, 1/8; side slots are
        // uncorrelated so they err with probability 1/2
        for delta in [Phase::Zero, Phase::Pi] {
            let dist = coincidence_distribution(&apply_interferometer_pair(
                &PairState::two_slot_entangled(0, delta),
            ));
            assert!((dist.slot_probability(0) - 0.125).abs() < NORM_TOL);
            assert!((dist.slot_probability(1) - 0.25).abs() < NORM_TOL);
            assert!((dist.slot_probability(2) - 0.125).abs() < NORM_TOL);
            let err = error_mass(&dist, 1, delta);
            assert!((err / dist.total() - 0.25).abs() < NORM_TOL);
        }

        // classical resend: coincidences 1/16, 1/4, 1/16 -> conditional 1/6
        for delta in [Phase::Zero, Phase::Pi] {
            for phi_a in [Phase::Zero, Phase::Pi] {
                let phi_b = phi_a.xor(delta);
                let a = apply_interferometer_single(&PhotonState::time_bin_qubit(0, phi_a));
                let b = apply_interferometer_single(&PhotonState::time_bin_qubit(0, phi_b));
                let mut entries: BTreeMap<(i64, Port, Port), f64> = BTreeMap::new();
                let mut total_joint = 0.0;
                for ((ka, pa), aa) in a.iter() {
                    for ((kb, pb), ab) in b.iter() {
                        let p = (aa * ab).norm_sqr();
                        total_joint += p;
                        if ka == kb {
                            *entries.entry((ka, pa, pb)).or_insert(0.0) += p;
                        }
                    }
                }
                let dist = CoincidenceDistribution {
                    residual: total_joint - entries.values().sum::<f64>(),
                    entries,
                };
                assert!((dist.slot_probability(0) - 1.0 / 16.0).abs() < NORM_TOL);
                assert!((dist.slot_probability(1) - 0.25).abs() < NORM_TOL);
                assert!((dist.slot_probability(2) - 1.0 / 16.0).abs() < NORM_TOL);
                assert!((dist.total() - 0.375).abs() < NORM_TOL);
                let err = error_mass(&dist, 1, delta);
                assert!((err / dist.total() - 1.0 / 6.0).abs() < NORM_TOL);
            }
        }
    }

    /// Error mass of a resend distribution against the encoded phase: at the
    /// encoded slot an XOR mismatch is an error; at side slots the recovered
    /// bit is right half the time.
    fn error_mass(dist: &CoincidenceDistribution, encoded_slot: i64, delta: Phase) -> f64 {
        let mut err = 0.0;
        for (&(k, ps, pi), &p) in &dist.entries {
            let bit = ps.bit() ^ pi.bit();
            if k == encoded_slot {
                if bit != delta.bit() {
                    err += p;
                }
            } else {
                err += 0.5 * p;
            }
        }
        err
    }

    #[test]
    fn images_of_slot_kets_stay_orthogonal() {
        let images: Vec<PortedPhotonState> = (1..=16)
            .map(|k| {
                apply_interferometer_single(&PhotonState::new([(k, Amplitude::new(1.0, 0.0))]))
            })
            .collect();
        for (i, a) in images.iter().enumerate() {
            for (j, b) in images.iter().enumerate() {
                let ip = a.inner(b).norm();
                if i == j {
                    assert!((ip - 1.0).abs() < NORM_TOL);
                } else {
                    assert!(ip < NORM_TOL, "slots {i} {j} overlap {ip}");
                }
            }
        }
    }

    proptest! {
        /// Norm preservation of both interferometer maps over random packet
        /// phases and dimensions.
        #[test]
        fn interferometer_preserves_norm(n in 2usize..10, pattern in 0u32..256) {
            let phases: Vec<Phase> = (0..n)
                .map(|k| Phase::from_bit(pattern >> k & 1 == 1))
                .collect();
            let pair = packet_state(&phases).unwrap();
            let ported = apply_interferometer_pair(&pair);
            prop_assert!((ported.norm_sqr() - pair.norm_sqr()).abs() < NORM_TOL);

            let single = PhotonState::multi_slot(1, &phases);
            let out = apply_interferometer_single(&single);
            prop_assert!((out.norm_sqr() - single.norm_sqr()).abs() < NORM_TOL);
        }

        /// Click probabilities sum to one for normalized inputs.
        #[test]
        fn click_distribution_sums_to_one(n in 1usize..12, pattern in 0u32..4096) {
            let phases: Vec<Phase> = (0..n)
                .map(|k| Phase::from_bit(pattern >> k & 1 == 1))
                .collect();
            let out = apply_interferometer_single(&PhotonState::multi_slot(1, &phases));
            let total: f64 = click_distribution(&out).values().sum();
            prop_assert!((total - 1.0).abs() < NORM_TOL);
        }
    }
}
