//! Closed-form slot statistics, attack rates, security thresholds and the
//! threshold-curve table.
//!
//! Everything here is pure arithmetic on session parameters:
//! * slot-role probabilities and the mark ratio,
//! * the honest shared-key (coincidence) rate,
//! * dishonest-recipient rates for single and sequential resend strategies,
//!   with their count-rate and dark-count detection thresholds,
//! * the beam-splitting eavesdropper's success probability and information
//!   bound,
//! * the overall security threshold (the worst case over sequence lengths).
//!
//! The sequential-coincidence rates are small-rate approximations and are
//! flagged as such in the reports that embed them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flag attached to quantities derived from the small-rate sequential
/// approximations.
pub const SEQUENTIAL_APPROXIMATION: &str = "approximate (small R_s)";

/// Transmittance in dB (power convention).
pub fn to_db(alpha: f64) -> f64 {
    10.0 * alpha.log10()
}

/// Slot-role probabilities for a given signal-slot probability `S`, assuming
/// the two-vacant-slot packet layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotParams {
    /// Probability that a slot is a signal slot.
    pub s: f64,
    /// Probability that a slot is an error slot: `2/3 (1 - S)`.
    pub p_e: f64,
    /// Probability that a slot is a detection slot: `1/3 (1 - S)`.
    pub p_d: f64,
    /// Mark ratio (occupied emission slots): `S + p_e/2 = (2S + 1)/3`.
    pub m: f64,
}

/// Evaluates the slot-role probabilities from `S`.
pub fn slot_probabilities(s: f64) -> Result<SlotParams> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("S = {s} must lie in (0, 1)")));
    }
    let p_e = 2.0 / 3.0 * (1.0 - s);
    let p_d = 1.0 / 3.0 * (1.0 - s);
    Ok(SlotParams {
        s,
        p_e,
        p_d,
        m: s + p_e / 2.0,
    })
}

/// Honest shared key rate per slot (= coincidence rate): `mu S alpha^2 / 2`.
pub fn honest_key_rate(mu: f64, s: f64, alpha: f64) -> f64 {
    0.5 * mu * s * alpha * alpha
}

/// Closed-form rates for a dishonest recipient resending states built from
/// `n`-sequential coincidence events (`n = 1` is the single-coincidence
/// strategy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    pub n: u32,
    pub mu: f64,
    /// Coincidence rate per signal slot, `mu/2`.
    pub r_s: f64,
    /// Coincidence rate per error slot, `mu/4`.
    pub r_e: f64,
    /// Rate of usable (sequential) coincidence events per slot.
    pub r_coin: f64,
    /// Fraction of resends built on an error-slot coincidence,
    /// `(1 - S)/(2S + 1)`.
    pub y: f64,
    /// Mark ratio of the source.
    pub m: f64,
    /// Transmittance below which the resend rate can match Alice's expected
    /// count rate: `mu^(n-1) / 2^n`.
    pub alpha_min: f64,
    /// Transmittance above which detection-slot counts beat the dark rate:
    /// `6 d (n+1) / (mu (1 - S))`.
    pub alpha_th: f64,
    /// Set when `alpha_th` exceeds 1, i.e. no physical transmittance makes
    /// the dark-count monitor effective.
    pub alpha_th_unreachable: bool,
    /// Total `n`-sequential signal-only coincidences for a given session
    /// length, when requested.
    pub n_s_total: Option<f64>,
    /// Total `n`-sequential coincidences containing an error slot, when
    /// requested.
    pub n_e_total: Option<f64>,
    /// Present on sequential quantities derived from the small-rate
    /// approximation.
    pub approximation: Option<&'static str>,
}

impl AttackMetrics {
    /// Detection-slot click rate induced at transmittance `alpha`:
    /// `M mu alpha y / (2 (n + 1))`.
    pub fn detection_rate(&self, alpha: f64) -> f64 {
        self.m * self.mu * alpha * self.y / (2.0 * (self.n as f64 + 1.0))
    }
}

/// Rates and thresholds for the single-coincidence resend strategy.
pub fn bob_single_metrics(mu: f64, s: f64, d: f64) -> Result<AttackMetrics> {
    bob_sequential_metrics(1, mu, s, d, None)
}

/// Rates and thresholds for the `n`-sequential resend strategy.
///
/// `n_all`, when given, scales the approximate totals of signal-only and
/// error-containing sequences for reporting.
pub fn bob_sequential_metrics(
    n: u32,
    mu: f64,
    s: f64,
    d: f64,
    n_all: Option<f64>,
) -> Result<AttackMetrics> {
    if n < 1 {
        return Err(Error::Domain("sequence length n must be >= 1".into()));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Domain(format!("mu = {mu} must lie in (0, 1)")));
    }
    if !(0.0..1.0).contains(&d) {
        return Err(Error::Domain(format!("d = {d} must lie in [0, 1)")));
    }
    let slots = slot_probabilities(s)?; // rejects S = 1, whose threshold divides by zero
    let r_s = mu / 2.0;
    let r_e = mu / 4.0;
    let nf = n as f64;
    let r_coin = r_s.powi(n as i32) * s + r_e * r_s.powi(n as i32 - 1) * slots.p_e;
    let y = (1.0 - s) / (2.0 * s + 1.0);
    let alpha_min = mu.powi(n as i32 - 1) / 2f64.powi(n as i32);
    let alpha_th = 6.0 * d * (nf + 1.0) / (mu * (1.0 - s));
    Ok(AttackMetrics {
        n,
        mu,
        r_s,
        r_e,
        r_coin,
        y,
        m: slots.m,
        alpha_min,
        alpha_th,
        alpha_th_unreachable: alpha_th > 1.0,
        n_s_total: n_all.map(|total| s * mu.powi(n as i32) / 2f64.powi(n as i32) * total),
        n_e_total: n_all
            .map(|total| slots.p_e * mu.powi(n as i32) / (2.0 * 2f64.powi(n as i32)) * total),
        approximation: (n > 1).then_some(SEQUENTIAL_APPROXIMATION),
    })
}

/// Beam-splitting eavesdropper figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveBsInfo {
    /// Probability of a stored coincidence at a disclosed instance:
    /// `mu (1 - alpha)^2 / 2`.
    pub success_prob: f64,
    /// Upper bound on fully known key bits: `mu n_sif / 2`.
    pub known_bits_bound: f64,
}

pub fn eve_bs_info(mu: f64, alpha: f64, n_sif: f64) -> Result<EveBsInfo> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Domain(format!("mu = {mu} must lie in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in [0, 1]")));
    }
    Ok(EveBsInfo {
        success_prob: 0.5 * mu * (1.0 - alpha) * (1.0 - alpha),
        known_bits_bound: 0.5 * mu * n_sif,
    })
}

/// One row of the threshold table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub n: u32,
    pub alpha_min: f64,
    pub alpha_min_db: f64,
    pub alpha_thn: f64,
    pub alpha_thn_db: f64,
    /// `min(alpha_min, alpha_thn)`: below this the n-sequential cheat works.
    pub cheat_ceiling: f64,
    pub alpha_thn_unreachable: bool,
}

/// Security threshold over sequence lengths `1..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub mu: f64,
    pub s: f64,
    pub dark: f64,
    pub rows: Vec<ThresholdRow>,
    /// `max_n min(alpha_min(n), alpha_thn(n))`: the transmittance the system
    /// must exceed to be safe against every strategy in the family.
    pub security_threshold: f64,
    pub security_threshold_db: f64,
    /// Sequence length attaining the threshold.
    pub argmax_n: u32,
    pub approximation: &'static str,
}

fn threshold_row(n: u32, mu: f64, s: f64, d: f64) -> Result<ThresholdRow> {
    let m = bob_sequential_metrics(n, mu, s, d, None)?;
    Ok(ThresholdRow {
        n,
        alpha_min: m.alpha_min,
        alpha_min_db: to_db(m.alpha_min),
        alpha_thn: m.alpha_th,
        alpha_thn_db: to_db(m.alpha_th),
        cheat_ceiling: m.alpha_min.min(m.alpha_th),
        alpha_thn_unreachable: m.alpha_th_unreachable,
    })
}

/// Evaluates the per-`n` cheat ceilings and reports the worst case.
pub fn security_threshold(mu: f64, s: f64, d: f64, n_max: u32) -> Result<ThresholdReport> {
    if n_max < 1 {
        return Err(Error::Domain("n_max must be >= 1".into()));
    }
    let rows: Vec<ThresholdRow> = (1..=n_max)
        .map(|n| threshold_row(n, mu, s, d))
        .collect::<Result<_>>()?;
    let worst = rows
        .iter()
        .max_by(|a, b| a.cheat_ceiling.total_cmp(&b.cheat_ceiling))
        .expect("n_max >= 1");
    Ok(ThresholdReport {
        mu,
        s,
        dark: d,
        security_threshold: worst.cheat_ceiling,
        security_threshold_db: to_db(worst.cheat_ceiling),
        argmax_n: worst.n,
        rows,
        approximation: SEQUENTIAL_APPROXIMATION,
    })
}

/// Threshold-curve rows for an inclusive range of sequence lengths.
pub fn fig3_table(
    mu: f64,
    s: f64,
    d: f64,
    n_range: std::ops::RangeInclusive<u32>,
) -> Result<Vec<ThresholdRow>> {
    if n_range.is_empty() {
        return Err(Error::Domain("empty n range".into()));
    }
    n_range.map(|n| threshold_row(n, mu, s, d)).collect()
}

/// Link-budget split of a threshold transmittance into detector efficiency,
/// source coupling loss and the remaining fiber allowance per arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub threshold_db: f64,
    pub detector_loss_db: f64,
    pub coupling_loss_db: f64,
    /// Fiber loss allowance per arm; zero when the fixed losses already
    /// exceed the threshold.
    pub fiber_budget_db: f64,
    pub fiber_km_per_arm: f64,
    /// Total span across both arms.
    pub total_km: f64,
}

/// Evaluates how much fiber a security threshold leaves room for, given the
/// fixed losses. `threshold_db` is the (negative) threshold transmittance in
/// dB; the loss arguments are positive magnitudes.
pub fn loss_budget(
    threshold_db: f64,
    detector_loss_db: f64,
    coupling_loss_db: f64,
    fiber_loss_db_per_km: f64,
) -> Result<LossBudget> {
    if fiber_loss_db_per_km <= 0.0 {
        return Err(Error::Domain(
            "fiber loss per km must be positive".into(),
        ));
    }
    let fiber_budget_db =
        (threshold_db.abs() - detector_loss_db - coupling_loss_db).max(0.0);
    let fiber_km_per_arm = fiber_budget_db / fiber_loss_db_per_km;
    Ok(LossBudget {
        threshold_db,
        detector_loss_db,
        coupling_loss_db,
        fiber_budget_db,
        fiber_km_per_arm,
        total_km: 2.0 * fiber_km_per_arm,
    })
}

/// Renders threshold rows as CSV with the stable column set.
pub fn fig3_csv(rows: &[ThresholdRow]) -> String {
    let mut out = String::from("n,alpha_min,alpha_min_db,alpha_thn,alpha_thn_db\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n, r.alpha_min, r.alpha_min_db, r.alpha_thn, r.alpha_thn_db
        ));
    }
    out
}
