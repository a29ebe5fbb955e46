//! Channel algebra, adversarial scenarios and Monte Carlo sessions.
//!
//! Honest model: with overall transmission eta, an n-photon pulse is
//! detected with yield `Yn = y0 + (1 - y0)(1 - (1 - eta)^n)`. Poisson
//! averaging over an intensity-m pulse train gives the per-class gain
//! `Q(m) = y0 + (1 - y0)(1 - e^-(eta m))` and the error gain
//! `E(m) Q(m) = e0 y0 + e_det (1 - e^-(eta m))`: dark counts err half the
//! time, detected photons with the misalignment probability.
//!
//! Attacks modify the yields, not individual pulses:
//! - photon-number splitting blocks a fraction of single photons and
//!   forwards multi-photon pulses losslessly (Yn>=2 -> 1), optionally
//!   renormalized so the signal gain is preserved;
//! - vacuum manipulation replaces y0 in every yield;
//! - sync spikes inflate the vacuum tally of a random subset of sessions
//!   (a counting artifact, not a channel change).
//!
//! Sampling is aggregate binomial per class, distributionally equivalent
//! to a per-pulse loop for independent pulses, and deterministic for a
//! given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};

use crate::model::{
    ChannelConfig, ClassTally, ObservedRates, SessionTally, SourceConfig,
};
use crate::{QkdError, Result};

/// Adversarial (or artifact) scenario applied to a session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackScenario {
    None,
    /// Block `block_fraction` of single-photon pulses and forward all
    /// multi-photon pulses losslessly. With `preserve_q_mu` the yields are
    /// rescaled so the signal gain matches the honest channel (the
    /// eavesdropper's best case).
    Pns {
        block_fraction: f64,
        preserve_q_mu: bool,
    },
    /// Replace the vacuum yield y0 with `y0_override` in all yields.
    VacuumManipulation { y0_override: f64 },
    /// With per-session probability `spike_prob`, multiply the session's
    /// vacuum detection count by `spike_magnitude`.
    SyncSpike {
        spike_prob: f64,
        spike_magnitude: f64,
    },
}

impl AttackScenario {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackScenario::None => Ok(()),
            AttackScenario::Pns { block_fraction, .. } => {
                if !(block_fraction.is_finite() && (0.0..=1.0).contains(&block_fraction)) {
                    return Err(QkdError::Validation {
                        field: "block_fraction",
                        message: format!("must be in [0, 1], got {block_fraction}"),
                    });
                }
                Ok(())
            }
            AttackScenario::VacuumManipulation { y0_override } => {
                if !(y0_override.is_finite() && (0.0..=1.0).contains(&y0_override)) {
                    return Err(QkdError::Validation {
                        field: "y0_override",
                        message: format!("must be in [0, 1], got {y0_override}"),
                    });
                }
                Ok(())
            }
            AttackScenario::SyncSpike {
                spike_prob,
                spike_magnitude,
            } => {
                if !(spike_prob.is_finite() && (0.0..=1.0).contains(&spike_prob)) {
                    return Err(QkdError::Validation {
                        field: "spike_prob",
                        message: format!("must be in [0, 1], got {spike_prob}"),
                    });
                }
                if !(spike_magnitude.is_finite() && spike_magnitude >= 1.0) {
                    return Err(QkdError::Validation {
                        field: "spike_magnitude",
                        message: format!("must be >= 1, got {spike_magnitude}"),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackScenario::None => "none",
            AttackScenario::Pns { .. } => "pns",
            AttackScenario::VacuumManipulation { .. } => "vacuum_manipulation",
            AttackScenario::SyncSpike { .. } => "sync_spike",
        }
    }
}

/// Photon-number yields of a (possibly attacked) channel, in a closed form
/// that supports exact Poisson sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelYields {
    /// Vacuum yield entering every Yn.
    y0: f64,
    /// Single-photon transmission probability.
    eta: f64,
    /// Misalignment error on detected photons.
    e_det: f64,
    /// Error probability of a vacuum-origin count.
    e0: f64,
    /// Single-photon blocking fraction (photon-number-splitting attack).
    block: f64,
    /// Multi-photon pulses forwarded losslessly when set.
    forward_multi: bool,
    /// Global yield rescaling (gain-preserving renormalization).
    scale: f64,
}

impl ChannelYields {
    /// Honest yields of a configured channel.
    pub fn honest(channel: &ChannelConfig) -> Self {
        Self {
            y0: channel.dark_count_prob,
            eta: channel.overall_transmission(),
            e_det: channel.misalignment_error,
            e0: channel.vacuum_error,
            block: 0.0,
            forward_multi: false,
            scale: 1.0,
        }
    }

    /// Yield of an n-photon pulse.
    pub fn yield_n(&self, n: u32) -> f64 {
        let base = match n {
            0 => self.y0,
            1 => {
                let honest = self.y0 + (1.0 - self.y0) * self.eta;
                honest * (1.0 - self.block)
            }
            _ if self.forward_multi => 1.0,
            n => self.y0 + (1.0 - self.y0) * (1.0 - (1.0 - self.eta).powi(n as i32)),
        };
        self.scale * base
    }

    /// Per-pulse gain at intensity m: the Poisson average of `yield_n`.
    pub fn gain(&self, m: f64) -> f64 {
        if !self.forward_multi {
            // honest closed form (vacuum manipulation only shifts y0)
            return self.scale * (self.y0 + (1.0 - self.y0) * (1.0 - (-self.eta * m).exp()));
        }
        // photon-number splitting: split out n = 0, 1 and the forwarded tail
        let p0 = (-m).exp();
        let p1 = m * p0;
        let tail = 1.0 - p0 - p1;
        let y1 = (self.y0 + (1.0 - self.y0) * self.eta) * (1.0 - self.block);
        self.scale * (self.y0 * p0 + y1 * p1 + tail)
    }

    /// Per-pulse error gain E(m) Q(m) at intensity m.
    pub fn error_gain(&self, m: f64) -> f64 {
        if !self.forward_multi {
            return self.scale * (self.e0 * self.y0 + self.e_det * (1.0 - (-self.eta * m).exp()));
        }
        let p0 = (-m).exp();
        let p1 = m * p0;
        let tail = 1.0 - p0 - p1;
        // dark-origin counts err at e0, photon-origin ones at e_det
        let e1_gain = (self.e0 * self.y0 + self.e_det * (1.0 - self.y0) * self.eta)
            * (1.0 - self.block)
            * p1;
        let multi_gain = (self.e0 * self.y0 + self.e_det * (1.0 - self.y0)) * tail;
        self.scale * (self.e0 * self.y0 * p0 + e1_gain + multi_gain)
    }

    /// QBER at intensity m (0.5 when the gain vanishes: any detections
    /// would be dark-count-like).
    pub fn qber(&self, m: f64) -> f64 {
        let q = self.gain(m);
        if q <= 0.0 {
            return self.e0;
        }
        (self.error_gain(m) / q).clamp(0.0, 1.0)
    }

    /// True single-photon gain Y1 mu e^-mu of this (realized) channel.
    pub fn true_q1(&self, mu: f64) -> f64 {
        self.yield_n(1) * mu * (-mu).exp()
    }

    /// True single-photon error rate of this channel.
    pub fn true_e1(&self) -> f64 {
        let y1 = self.yield_n(1);
        if y1 <= 0.0 {
            return self.e0;
        }
        let err = self.scale
            * (self.e0 * self.y0 * (1.0 - self.block)
                + self.e_det * (1.0 - self.y0) * self.eta * (1.0 - self.block));
        (err / y1).clamp(0.0, 1.0)
    }

    /// Apply an attack scenario to these yields. Sync spikes act on the
    /// session tally, not the yields, so they pass through unchanged.
    pub fn apply(&self, scenario: &AttackScenario, source: &SourceConfig) -> Result<Self> {
        scenario.validate()?;
        match *scenario {
            AttackScenario::None | AttackScenario::SyncSpike { .. } => Ok(*self),
            AttackScenario::VacuumManipulation { y0_override } => Ok(Self {
                y0: y0_override,
                ..*self
            }),
            AttackScenario::Pns {
                block_fraction,
                preserve_q_mu,
            } => {
                let mut attacked = Self {
                    block: block_fraction,
                    forward_multi: true,
                    scale: 1.0,
                    ..*self
                };
                if preserve_q_mu {
                    let honest_q_mu = self.gain(source.mu);
                    let attacked_q_mu = attacked.gain(source.mu);
                    if attacked_q_mu <= 0.0 {
                        return Err(QkdError::InfeasibleScenario(
                            "attacked signal gain vanished; cannot preserve Q_mu".into(),
                        ));
                    }
                    let scale = honest_q_mu / attacked_q_mu;
                    // forwarded multi-photon yields are already 1
                    if scale > 1.0 {
                        return Err(QkdError::InfeasibleScenario(format!(
                            "preserving Q_mu would need yields scaled by {scale:.4} > 1"
                        )));
                    }
                    attacked.scale = scale;
                }
                Ok(attacked)
            }
        }
    }
}

/// Analytic expected rates of the honest configured channel.
pub fn expected_rates(source: &SourceConfig, channel: &ChannelConfig) -> ObservedRates {
    expected_rates_for(&ChannelYields::honest(channel), source)
}

/// Analytic expected rates for explicit (possibly attacked) yields.
pub fn expected_rates_for(yields: &ChannelYields, source: &SourceConfig) -> ObservedRates {
    ObservedRates {
        q_mu: yields.gain(source.mu),
        q_nu: yields.gain(source.nu),
        y0: yields.gain(0.0),
        e_mu: yields.qber(source.mu),
        e_nu: yields.qber(source.nu),
        zero_detection: false,
    }
}

/// One simulated session: the sampled tally plus the analytic single-photon
/// truth of the realized channel, carried for bound-validity oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSession {
    pub tally: SessionTally,
    pub true_q1: f64,
    pub true_e1: f64,
    pub scenario: AttackScenario,
    pub seed: u64,
    /// Whether a sync spike fired in this session.
    pub spiked: bool,
}

fn sample_binomial(rng: &mut ChaCha12Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("checked probability")
        .sample(rng)
}

/// Draw one session. Identical (configs, scenario, seed) give an identical
/// tally. The spike decision uses a dedicated RNG stream so spiked and
/// honest runs of the same seed differ only in the vacuum counts.
pub fn simulate_session(
    source: &SourceConfig,
    channel: &ChannelConfig,
    scenario: &AttackScenario,
    duration_s: f64,
    seed: u64,
) -> Result<SimulatedSession> {
    scenario.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(QkdError::Validation {
            field: "duration_s",
            message: format!("must be positive, got {duration_s}"),
        });
    }
    let n_pulses = (source.clock_rate_hz * duration_s).round() as u64;
    if n_pulses == 0 {
        return Err(QkdError::Validation {
            field: "duration_s",
            message: "duration and clock rate give zero pulses".into(),
        });
    }

    let yields = ChannelYields::honest(channel).apply(scenario, source)?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(0);

    // exact multinomial class split via sequential binomials
    let n_signal = sample_binomial(&mut rng, n_pulses, source.p_signal);
    let rest = n_pulses - n_signal;
    let p_decoy_given_rest = if source.p_decoy + source.p_vacuum > 0.0 {
        source.p_decoy / (source.p_decoy + source.p_vacuum)
    } else {
        0.0
    };
    let n_decoy = sample_binomial(&mut rng, rest, p_decoy_given_rest);
    let n_vacuum = rest - n_decoy;

    let mut class = |n: u64, intensity: f64| -> Result<ClassTally> {
        let q = yields.gain(intensity).clamp(0.0, 1.0);
        let e = yields.qber(intensity);
        let detections = sample_binomial(&mut rng, n, q);
        let errors = sample_binomial(&mut rng, detections, e);
        ClassTally::new(n, detections, errors)
    };
    let signal = class(n_signal, source.mu)?;
    let decoy = class(n_decoy, source.nu)?;
    let mut vacuum = class(n_vacuum, 0.0)?;

    // sync spike: inflate the vacuum tally of an unlucky session
    let mut spiked = false;
    if let AttackScenario::SyncSpike {
        spike_prob,
        spike_magnitude,
    } = *scenario
    {
        let mut spike_rng = ChaCha12Rng::seed_from_u64(seed);
        spike_rng.set_stream(1);
        if spike_rng.random_bool(spike_prob) {
            spiked = true;
            let det = ((vacuum.detections as f64 * spike_magnitude).round() as u64)
                .min(vacuum.pulses_sent);
            let err = ((vacuum.errors as f64 * spike_magnitude).round() as u64).min(det);
            vacuum = ClassTally::new(vacuum.pulses_sent, det, err)?;
        }
    }

    Ok(SimulatedSession {
        tally: SessionTally::new(signal, decoy, vacuum, duration_s)?,
        true_q1: yields.true_q1(source.mu),
        true_e1: yields.true_e1(),
        scenario: *scenario,
        seed,
        spiked,
    })
}

/// Deterministic per-session seed derivation (splitmix64 of the master
/// seed and session index), so campaigns are order-independent.
pub fn session_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulate `n_sessions` independent sessions with per-session seeds
/// derived from `master_seed`.
pub fn run_campaign(
    source: &SourceConfig,
    channel: &ChannelConfig,
    scenario: &AttackScenario,
    n_sessions: usize,
    duration_s: f64,
    master_seed: u64,
) -> Result<Vec<SimulatedSession>> {
    if n_sessions == 0 {
        return Err(QkdError::Validation {
            field: "n_sessions",
            message: "must be at least 1".into(),
        });
    }
    (0..n_sessions)
        .map(|i| {
            simulate_session(
                source,
                channel,
                scenario,
                duration_s,
                session_seed(master_seed, i as u64),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tally_to_rates;
    use approx::assert_relative_eq;

    fn reference() -> (SourceConfig, ChannelConfig) {
        (SourceConfig::reference_defaults(), ChannelConfig::reference_defaults())
    }

    #[test]
    fn expected_rates_match_reference_transmittances() {
        let (source, channel) = reference();
        let r = expected_rates(&source, &channel);
        // quoted: Q_mu = 0.01270 +/- 0.00078, Q_nu = 0.00234 +/- 0.00014
        assert!((r.q_mu - 0.01270).abs() < 0.00078, "q_mu = {}", r.q_mu);
        assert!((r.q_nu - 0.00234).abs() < 0.00014, "q_nu = {}", r.q_nu);
        assert_relative_eq!(r.y0, 1.34e-4, max_relative = 1e-12);
        // the misalignment default keeps the signal QBER near 2%
        assert!((r.e_mu - 0.02).abs() < 0.002, "e_mu = {}", r.e_mu);
        // frozen desk values for the model rates
        assert_relative_eq!(r.q_mu, 1.23624508e-2, max_relative = 1e-6);
        assert_relative_eq!(r.q_nu, 2.32391954e-3, max_relative = 1e-6);
    }

    #[test]
    fn expected_rates_dark_only_channel() {
        let (source, _) = reference();
        let channel = ChannelConfig::new(20.0, 0.2, 0.0, 1.34e-4, 0.015, 0.5).unwrap();
        let r = expected_rates(&source, &channel);
        assert_relative_eq!(r.q_mu, 1.34e-4, max_relative = 1e-12);
        assert_relative_eq!(r.e_mu, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn vacuum_gain_is_dark_count_probability() {
        let (source, channel) = reference();
        let yields = ChannelYields::honest(&channel);
        assert_relative_eq!(yields.gain(0.0), channel.dark_count_prob, max_relative = 1e-15);
        let _ = source;
    }

    #[test]
    fn attack_none_is_identity() {
        let (source, channel) = reference();
        let honest = ChannelYields::honest(&channel);
        let same = honest.apply(&AttackScenario::None, &source).unwrap();
        assert_eq!(honest, same);
    }

    #[test]
    fn pns_drives_ratio_down() {
        let (source, channel) = reference();
        let honest = ChannelYields::honest(&channel);
        let honest_ratio = honest.gain(source.nu) / honest.gain(source.mu);
        let mut prev = honest_ratio;
        for block in [0.25, 0.5, 0.75, 1.0] {
            let attacked = honest
                .apply(
                    &AttackScenario::Pns {
                        block_fraction: block,
                        preserve_q_mu: true,
                    },
                    &source,
                )
                .unwrap();
            let ratio = attacked.gain(source.nu) / attacked.gain(source.mu);
            assert!(ratio < prev, "ratio should fall monotonically");
            prev = ratio;
            // Q_mu preserved by renormalization
            assert_relative_eq!(attacked.gain(source.mu), honest.gain(source.mu), max_relative = 1e-12);
        }
        assert!(prev < 0.13, "full blocking must trip the ratio threshold");
    }

    #[test]
    fn vacuum_manipulation_overrides_y0_everywhere() {
        let (source, channel) = reference();
        let attacked = ChannelYields::honest(&channel)
            .apply(
                &AttackScenario::VacuumManipulation { y0_override: 2e-3 },
                &source,
            )
            .unwrap();
        assert_relative_eq!(attacked.gain(0.0), 2e-3, max_relative = 1e-15);
        // all yields shift: gains gain the same dark floor
        let honest = ChannelYields::honest(&channel);
        assert!(attacked.gain(source.mu) > honest.gain(source.mu));
        assert!(attacked.yield_n(2) > honest.yield_n(2));
    }

    #[test]
    fn simulated_session_matches_expected_detections() {
        let (source, channel) = reference();
        let session =
            simulate_session(&source, &channel, &AttackScenario::None, 71.0, 7).unwrap();
        let r = expected_rates(&source, &channel);
        let n = source.clock_rate_hz * 71.0;
        let expected = n * (source.p_signal * r.q_mu + source.p_decoy * r.q_nu
            + source.p_vacuum * r.y0);
        let sigma = expected.sqrt(); // binomial variance ~ n p for small p
        let got = session.tally.total_detections() as f64;
        assert!(
            (got - expected).abs() < 5.0 * sigma,
            "detections {got} vs expected {expected}"
        );
        // ~6e6 events in a 71 s reference session
        assert!(got > 5.5e6 && got < 6.5e6);
    }

    #[test]
    fn simulated_rates_converge_to_analytic() {
        let (source, channel) = reference();
        let session =
            simulate_session(&source, &channel, &AttackScenario::None, 71.0, 99).unwrap();
        let rates = tally_to_rates(&session.tally).unwrap();
        let expect = expected_rates(&source, &channel);
        let tally = &session.tally;
        for (got, want, n) in [
            (rates.q_mu, expect.q_mu, tally.signal.pulses_sent as f64),
            (rates.q_nu, expect.q_nu, tally.decoy.pulses_sent as f64),
            (rates.y0, expect.y0, tally.vacuum.pulses_sent as f64),
        ] {
            let sigma = (want * (1.0 - want) / n).sqrt();
            assert!(
                (got - want).abs() < 5.0 * sigma,
                "rate {got} vs {want} (sigma {sigma:e})"
            );
        }
    }

    #[test]
    fn zero_duration_rejected() {
        let (source, channel) = reference();
        assert!(simulate_session(&source, &channel, &AttackScenario::None, 0.0, 1).is_err());
    }

    #[test]
    fn fixed_seed_reproduces_tally() {
        let (source, channel) = reference();
        let a = simulate_session(&source, &channel, &AttackScenario::None, 2.0, 1234).unwrap();
        let b = simulate_session(&source, &channel, &AttackScenario::None, 2.0, 1234).unwrap();
        assert_eq!(a.tally, b.tally);
    }

    #[test]
    fn campaign_is_deterministic_and_sized() {
        let (source, channel) = reference();
        let a = run_campaign(&source, &channel, &AttackScenario::None, 20, 0.2, 42).unwrap();
        let b = run_campaign(&source, &channel, &AttackScenario::None, 20, 0.2, 42).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a, b);
        let c = run_campaign(&source, &channel, &AttackScenario::None, 1, 0.2, 42).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(a[0], c[0]);
        assert!(run_campaign(&source, &channel, &AttackScenario::None, 0, 0.2, 42).is_err());
    }

    #[test]
    fn spike_only_touches_vacuum_counts() {
        let (source, channel) = reference();
        let spike = AttackScenario::SyncSpike {
            spike_prob: 1.0,
            spike_magnitude: 5.0,
        };
        let honest = simulate_session(&source, &channel, &AttackScenario::None, 1.0, 7).unwrap();
        let spiked = simulate_session(&source, &channel, &spike, 1.0, 7).unwrap();
        assert!(spiked.spiked);
        assert_eq!(honest.tally.signal, spiked.tally.signal);
        assert_eq!(honest.tally.decoy, spiked.tally.decoy);
        assert_eq!(
            honest.tally.vacuum.pulses_sent,
            spiked.tally.vacuum.pulses_sent
        );
        assert!(spiked.tally.vacuum.detections > honest.tally.vacuum.detections);
    }

    #[test]
    fn oracle_fields_match_honest_algebra() {
        let (source, channel) = reference();
        let session =
            simulate_session(&source, &channel, &AttackScenario::None, 1.0, 5).unwrap();
        let eta = channel.overall_transmission();
        let y0 = channel.dark_count_prob;
        let y1 = y0 + (1.0 - y0) * eta;
        assert_relative_eq!(
            session.true_q1,
            y1 * source.mu * (-source.mu).exp(),
            max_relative = 1e-12
        );
        let e1 = (0.5 * y0 + channel.misalignment_error * (1.0 - y0) * eta) / y1;
        assert_relative_eq!(session.true_e1, e1, max_relative = 1e-12);
    }
}
