//! Charlie's entanglement source: packet layout, phase patterns, pump-phase
//! bookkeeping and Poissonian pair emission.
//!
//! A packet is `N` occupied emission slots followed by a gap of vacant slots
//! (exactly two in the randomized-dimension scheme; two or more in the
//! fixed-dimension variant with random inter-packet gaps). Measurement slots
//! are indexed relative to the packet start, 1-based:
//!
//! * slot 1 and slot `N+1` are error slots,
//! * slots `2..=N` are signal slots,
//! * slot `N+2` is the detection slot (click-free for honest parties),
//! * anything past `N+2` within the gap is a plain vacant slot.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevec::{packet_state, PairState, Phase, PumpPhase};

/// Packet timing scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Random packet dimension, fixed two-slot gaps.
    RandomizedDimension,
    /// Fixed packet dimension, random gap of two or more vacant slots.
    FixedDimensionRandomGap,
}

/// Distribution of the packet dimension `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionDistribution {
    Fixed(usize),
    /// Uniform over `min..=max`.
    Uniform { min: usize, max: usize },
}

impl DimensionDistribution {
    pub fn min_dim(&self) -> usize {
        match *self {
            DimensionDistribution::Fixed(n) => n,
            DimensionDistribution::Uniform { min, .. } => min,
        }
    }

    pub fn max_dim(&self) -> usize {
        match *self {
            DimensionDistribution::Fixed(n) => n,
            DimensionDistribution::Uniform { max, .. } => max,
        }
    }

    /// Iterates `(N, weight)` support points.
    pub fn support(&self) -> Vec<(usize, f64)> {
        match *self {
            DimensionDistribution::Fixed(n) => vec![(n, 1.0)],
            DimensionDistribution::Uniform { min, max } => {
                let w = 1.0 / (max - min + 1) as f64;
                (min..=max).map(|n| (n, w)).collect()
            }
        }
    }
}

/// Source configuration: emission strength and packet layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Mean photon pairs per occupied pulse; must satisfy `0 < mu < 1`.
    pub mu: f64,
    pub scheme: Scheme,
    pub dims: DimensionDistribution,
    /// Success parameter of the geometric gap law in the
    /// fixed-dimension scheme: `gap = 2 + Geometric(gap_p)`.
    pub gap_p: f64,
}

impl SourceConfig {
    pub fn randomized(mu: f64, dims: DimensionDistribution) -> Self {
        SourceConfig {
            mu,
            scheme: Scheme::RandomizedDimension,
            dims,
            gap_p: 1.0,
        }
    }

    pub fn fixed_dim_random_gap(mu: f64, dim: usize, gap_p: f64) -> Self {
        SourceConfig {
            mu,
            scheme: Scheme::FixedDimensionRandomGap,
            dims: DimensionDistribution::Fixed(dim),
            gap_p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mu = {} must lie in (0, 1)",
                self.mu
            )));
        }
        match self.dims {
            DimensionDistribution::Fixed(n) if n < 2 => {
                return Err(Error::InvalidDimension { dim: n })
            }
            DimensionDistribution::Uniform { min, max } => {
                if min < 2 {
                    return Err(Error::InvalidDimension { dim: min });
                }
                if min > max {
                    return Err(Error::InvalidConfig(format!(
                        "empty dimension distribution: min {min} > max {max}"
                    )));
                }
            }
            _ => {}
        }
        if self.dims.max_dim() > 63 {
            return Err(Error::InvalidConfig(
                "packet dimension above 63 is not supported".into(),
            ));
        }
        if self.scheme == Scheme::FixedDimensionRandomGap && !(self.gap_p > 0.0 && self.gap_p <= 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "gap_p = {} must lie in (0, 1]",
                self.gap_p
            )));
        }
        Ok(())
    }

    /// Mean gap length (vacant emission slots per packet).
    pub fn mean_gap(&self) -> f64 {
        match self.scheme {
            Scheme::RandomizedDimension => 2.0,
            Scheme::FixedDimensionRandomGap => 2.0 + (1.0 - self.gap_p) / self.gap_p,
        }
    }

    /// Mean total slots per packet (occupied plus gap).
    pub fn mean_span(&self) -> f64 {
        let mean_dim: f64 = self
            .dims
            .support()
            .iter()
            .map(|&(n, w)| n as f64 * w)
            .sum();
        mean_dim + self.mean_gap()
    }
}

/// Role of a measurement slot within a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotRole {
    Signal,
    Error,
    Detection,
    Vacant,
}

/// One generated packet: dimension, absolute start slot, per-slot phases and
/// the vacant gap that follows it.
///
/// Phases are stored as a bit mask (`1 = pi`) so a ten-million-slot session
/// keeps its packet history small.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketSpec {
    dim: usize,
    phase_bits: u64,
    start_slot: i64,
    gap: usize,
}

impl PacketSpec {
    /// Builds a packet from explicit absolute phases (`phases[0]` is `phi_1`).
    pub fn new(start_slot: i64, phases: &[Phase], gap: usize) -> Result<Self> {
        if phases.len() < 2 {
            return Err(Error::InvalidDimension { dim: phases.len() });
        }
        if phases.len() > 63 {
            return Err(Error::InvalidConfig(
                "packet dimension above 63 is not supported".into(),
            ));
        }
        if gap < 2 {
            return Err(Error::InvalidConfig(format!(
                "gap = {gap} must be at least the two mandated vacant slots"
            )));
        }
        let mut bits = 0u64;
        for (i, p) in phases.iter().enumerate() {
            if *p == Phase::Pi {
                bits |= 1 << i;
            }
        }
        Ok(PacketSpec {
            dim: phases.len(),
            phase_bits: bits,
            start_slot,
            gap,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start_slot(&self) -> i64 {
        self.start_slot
    }

    pub fn gap(&self) -> usize {
        self.gap
    }

    /// Total emission slots claimed by the packet (occupied plus gap).
    pub fn span(&self) -> usize {
        self.dim + self.gap
    }

    /// Absolute modulation phase of occupied slot `k`, `k` in `1..=N`.
    pub fn phase(&self, k: usize) -> Phase {
        debug_assert!(k >= 1 && k <= self.dim);
        Phase::from_bit(self.phase_bits >> (k - 1) & 1 == 1)
    }

    /// Differential phase `phi_k - phi_{k-1}` for `k` in `2..=N`; the key bit
    /// of signal slot `k`.
    pub fn delta_phase(&self, k: usize) -> Phase {
        self.phase(k).xor(self.phase(k - 1))
    }

    /// Role of relative measurement slot `rel` in `1..=span`.
    pub fn role(&self, rel: usize) -> SlotRole {
        let n = self.dim;
        match rel {
            1 => SlotRole::Error,
            r if r >= 2 && r <= n => SlotRole::Signal,
            r if r == n + 1 => SlotRole::Error,
            r if r == n + 2 => SlotRole::Detection,
            _ => SlotRole::Vacant,
        }
    }

    /// Role of an absolute slot, or `None` if outside the packet span.
    pub fn role_at(&self, slot: i64) -> Option<SlotRole> {
        let rel = slot - self.start_slot + 1;
        if rel >= 1 && rel <= self.span() as i64 {
            Some(self.role(rel as usize))
        } else {
            None
        }
    }

    /// The packet's entangled pair state at absolute slots.
    pub fn pair_state(&self) -> PairState {
        let phases: Vec<Phase> = (1..=self.dim).map(|k| self.phase(k)).collect();
        packet_state(&phases)
            .expect("dim >= 2 by construction")
            .shifted(self.start_slot - 1)
    }
}

impl PairState {
    /// The same state with every slot index offset by `delta`.
    pub fn shifted(&self, delta: i64) -> PairState {
        PairState::new(
            self.dim(),
            self.iter().map(|((ks, ki), a)| ((ks + delta, ki + delta), a)),
        )
    }
}

/// Pump-pulse modulation for one packet: on/off marks plus {0, pi/2} phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpPattern {
    pub pulses: Vec<PumpPulse>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpPulse {
    pub on: bool,
    pub phase: PumpPhase,
}

/// Photon pairs emitted for one packet. All pairs of a packet share the same
/// pure state; multi-pair emissions are independent copies.
#[derive(Debug, Clone)]
pub struct EmissionEvent {
    pub pair_count: u64,
    pub state: PairState,
}

/// Draws the next packet: dimension and gap per the configured scheme, phase
/// pattern uniform over differential phases with `phi_1 = 0`.
pub fn draw_packet<R: Rng + ?Sized>(
    rng: &mut R,
    config: &SourceConfig,
    start_slot: i64,
) -> Result<PacketSpec> {
    config.validate()?;
    let dim = match config.dims {
        DimensionDistribution::Fixed(n) => n,
        DimensionDistribution::Uniform { min, max } => rng.random_range(min..=max),
    };
    let gap = match config.scheme {
        Scheme::RandomizedDimension => 2,
        Scheme::FixedDimensionRandomGap => {
            if config.gap_p >= 1.0 {
                2
            } else {
                let u: f64 = rng.random();
                2 + (u.ln() / (1.0 - config.gap_p).ln()).floor() as usize
            }
        }
    };
    let mut phases = Vec::with_capacity(dim);
    phases.push(Phase::Zero);
    for k in 1..dim {
        let delta = Phase::from_bit(rng.random_bool(0.5));
        phases.push(phases[k - 1].xor(delta));
    }
    PacketSpec::new(start_slot, &phases, gap)
}

/// Pump phases realizing the packet's modulation: `phi_pump = phi / 2`, with
/// off-marks on the trailing vacant slots.
pub fn pump_phase_pattern(packet: &PacketSpec) -> PumpPattern {
    let mut pulses = Vec::with_capacity(packet.span());
    for k in 1..=packet.dim() {
        let phase = match packet.phase(k) {
            Phase::Zero => PumpPhase::Zero,
            Phase::Pi => PumpPhase::HalfPi,
        };
        pulses.push(PumpPulse { on: true, phase });
    }
    for _ in 0..packet.gap() {
        pulses.push(PumpPulse {
            on: false,
            phase: PumpPhase::Zero,
        });
    }
    PumpPattern { pulses }
}

/// Samples the Poissonian pair count for one packet, mean `mu * N`.
pub fn sample_emissions<R: Rng + ?Sized>(
    rng: &mut R,
    packet: &PacketSpec,
    mu: f64,
) -> EmissionEvent {
    let lambda = mu * packet.dim() as f64;
    let poisson = Poisson::new(lambda).expect("validated mu and dim give lambda > 0");
    let pair_count = poisson.sample(rng) as u64;
    EmissionEvent {
        pair_count,
        state: packet.pair_state(),
    }
}

/// Slot-weighted probability that a measurement slot is a signal slot:
/// expected signal slots per packet over expected total slots per packet.
pub fn expected_signal_fraction(config: &SourceConfig) -> Result<f64> {
    config.validate()?;
    let mean_dim: f64 = config
        .dims
        .support()
        .iter()
        .map(|&(n, w)| n as f64 * w)
        .sum();
    Ok((mean_dim - 1.0) / (mean_dim + config.mean_gap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed4() -> SourceConfig {
        SourceConfig::randomized(0.1, DimensionDistribution::Fixed(4))
    }

    #[test]
    fn fixed_dim_roles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = draw_packet(&mut rng, &fixed4(), 1).unwrap();
        assert_eq!(p.role(1), SlotRole::Error);
        for r in 2..=4 {
            assert_eq!(p.role(r), SlotRole::Signal);
        }
        assert_eq!(p.role(5), SlotRole::Error);
        assert_eq!(p.role(6), SlotRole::Detection);
        assert_eq!(p.span(), 6);
        // signal fraction per packet
        assert!((expected_signal_fraction(&fixed4()).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn smallest_packet_roles() {
        let cfg = SourceConfig::randomized(0.1, DimensionDistribution::Fixed(2));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = draw_packet(&mut rng, &cfg, 10).unwrap();
        assert_eq!(p.role(1), SlotRole::Error);
        assert_eq!(p.role(2), SlotRole::Signal);
        assert_eq!(p.role(3), SlotRole::Error);
        assert_eq!(p.role(4), SlotRole::Detection);
        assert!((expected_signal_fraction(&cfg).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn draw_is_reproducible() {
        let a: Vec<PacketSpec> = {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            (0..50)
                .map(|i| draw_packet(&mut rng, &fixed4(), i * 6 + 1).unwrap())
                .collect()
        };
        let b: Vec<PacketSpec> = {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            (0..50)
                .map(|i| draw_packet(&mut rng, &fixed4(), i * 6 + 1).unwrap())
                .collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn first_phase_is_fixed_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = draw_packet(&mut rng, &fixed4(), 1).unwrap();
            assert_eq!(p.phase(1), Phase::Zero);
        }
    }

    #[test]
    fn pump_pattern_maps_phases_and_marks() {
        let packet = PacketSpec::new(1, &[Phase::Zero, Phase::Pi, Phase::Zero], 2).unwrap();
        let pattern = pump_phase_pattern(&packet);
        assert_eq!(pattern.pulses.len(), 5);
        assert_eq!(pattern.pulses[0].phase, PumpPhase::Zero);
        assert_eq!(pattern.pulses[1].phase, PumpPhase::HalfPi);
        assert_eq!(pattern.pulses[2].phase, PumpPhase::Zero);
        assert!(pattern.pulses[3..].iter().all(|p| !p.on));
        assert!(pattern.pulses[..3].iter().all(|p| p.on));
    }

    #[test]
    fn emission_mean_matches_poisson() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let packet = PacketSpec::new(1, &[Phase::Zero; 4], 2).unwrap();
        let trials = 200_000u64;
        let total: u64 = (0..trials)
            .map(|_| sample_emissions(&mut rng, &packet, 0.1).pair_count)
            .sum();
        let mean = total as f64 / trials as f64;
        // Poisson(0.4): se of the mean = sqrt(0.4/trials)
        let se = (0.4f64 / trials as f64).sqrt();
        assert!(
            (mean - 0.4).abs() < 3.0 * se,
            "mean {mean} vs 0.4 (se {se})"
        );
    }

    #[test]
    fn small_mu_occupancy_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let packet = PacketSpec::new(1, &[Phase::Zero; 4], 2).unwrap();
        let mu = 1e-3;
        let trials = 400_000u64;
        let nonzero = (0..trials)
            .filter(|_| sample_emissions(&mut rng, &packet, mu).pair_count >= 1)
            .count() as f64;
        let p = nonzero / trials as f64;
        let expect = mu * 4.0; // first order
        let se = (expect / trials as f64).sqrt();
        assert!((p - expect).abs() < 3.0 * se + expect * expect);
    }

    #[test]
    fn signal_fraction_by_enumeration() {
        // oracle: sum over the uniform support of signal slots / total slots
        let oracle = |min: usize, max: usize| -> f64 {
            let signal: usize = (min..=max).map(|n| n - 1).sum();
            let total: usize = (min..=max).map(|n| n + 2).sum();
            signal as f64 / total as f64
        };
        for (min, max) in [(2, 5), (2, 6), (3, 8)] {
            let cfg =
                SourceConfig::randomized(0.1, DimensionDistribution::Uniform { min, max });
            let s = expected_signal_fraction(&cfg).unwrap();
            assert!(
                (s - oracle(min, max)).abs() < 1e-12,
                "uniform {min}..={max}: {s} vs {}",
                oracle(min, max)
            );
        }
        // frozen values from the oracle
        let s25 = expected_signal_fraction(&SourceConfig::randomized(
            0.1,
            DimensionDistribution::Uniform { min: 2, max: 5 },
        ))
        .unwrap();
        assert!((s25 - 10.0 / 22.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_slot_roles_match_closed_forms() {
        // p_e -> 2/3 (1-S), p_d -> 1/3 (1-S), mark ratio -> (2S+1)/3,
        // for the two-vacant-slot scheme
        let cfg = SourceConfig::randomized(0.1, DimensionDistribution::Uniform { min: 2, max: 6 });
        let s = expected_signal_fraction(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (mut signal, mut error, mut det, mut occupied, mut total) = (0u64, 0u64, 0u64, 0u64, 0u64);
        let mut start = 1i64;
        for _ in 0..100_000 {
            let p = draw_packet(&mut rng, &cfg, start).unwrap();
            for rel in 1..=p.span() {
                match p.role(rel) {
                    SlotRole::Signal => signal += 1,
                    SlotRole::Error => error += 1,
                    SlotRole::Detection => det += 1,
                    SlotRole::Vacant => {}
                }
            }
            occupied += p.dim() as u64;
            total += p.span() as u64;
            start += p.span() as i64;
        }
        let tot = total as f64;
        let se = |p: f64| 3.0 * (p * (1.0 - p) / tot).sqrt();
        let p_e = error as f64 / tot;
        let p_d = det as f64 / tot;
        let m = occupied as f64 / tot;
        let s_emp = signal as f64 / tot;
        assert!((s_emp - s).abs() < se(s));
        assert!((p_e - 2.0 / 3.0 * (1.0 - s)).abs() < se(p_e));
        assert!((p_d - 1.0 / 3.0 * (1.0 - s)).abs() < se(p_d));
        assert!((m - (2.0 * s + 1.0) / 3.0).abs() < se(m));
    }

    #[test]
    fn modified_scheme_gap_distribution() {
        let cfg = SourceConfig::fixed_dim_random_gap(0.1, 4, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 100_000;
        let gaps: Vec<usize> = (0..n)
            .map(|_| draw_packet(&mut rng, &cfg, 1).unwrap().gap())
            .collect();
        assert!(gaps.iter().all(|&g| g >= 2));
        let mean = gaps.iter().sum::<usize>() as f64 / n as f64;
        // mean gap = 2 + (1-p)/p = 3; var of geometric = (1-p)/p^2 = 2
        let se = (2.0f64 / n as f64).sqrt();
        assert!((mean - cfg.mean_gap()).abs() < 3.0 * se);
        // mark ratio generalizes: M = S + p_e/2 with slot-weighted roles
        let s = expected_signal_fraction(&cfg).unwrap();
        assert!((s - 3.0 / 7.0).abs() < 1e-12); // (4-1)/(4+3)
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut bad = fixed4();
        bad.mu = 1.0;
        assert!(bad.validate().is_err());
        let empty = SourceConfig::randomized(0.1, DimensionDistribution::Uniform { min: 5, max: 4 });
        assert!(matches!(empty.validate(), Err(Error::InvalidConfig(_))));
        let tiny = SourceConfig::randomized(0.1, DimensionDistribution::Fixed(1));
        assert!(matches!(
            tiny.validate(),
            Err(Error::InvalidDimension { dim: 1 })
        ));
    }
}
