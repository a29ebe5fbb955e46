//! Finite-sample widening of observed rates.
//!
//! The security formulas consume conservative bounds, not point estimates:
//! the decoy gain is lowered and the vacuum rate widened both ways by
//! k standard deviations of the per-class counting statistics. At the
//! default k = 10 the two-sided Gaussian confidence is 1 - 1.5e-23.

use crate::model::{BoundedRates, ObservedRates, PulseClass, SessionTally};
use crate::{QkdError, Result};

/// Standard-deviation estimator for a per-pulse rate over n pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    /// sigma = sqrt(p (1-p) / n). Detections are Bernoulli per pulse.
    #[default]
    Binomial,
    /// sigma = sqrt(p / n), the low-rate counting approximation.
    Poisson,
}

/// Widening policy: how many standard deviations, and which estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPolicy {
    pub n_std_devs: f64,
    pub estimator: Estimator,
}

impl Default for BoundPolicy {
    fn default() -> Self {
        Self {
            n_std_devs: 10.0,
            estimator: Estimator::Binomial,
        }
    }
}

impl BoundPolicy {
    /// k = 0 is allowed as an explicit zero-width override (bounds equal
    /// the central values), used for asymptotic-statistics analysis.
    pub fn new(n_std_devs: f64, estimator: Estimator) -> Result<Self> {
        if !(n_std_devs.is_finite() && n_std_devs >= 0.0) {
            return Err(QkdError::Validation {
                field: "n_std_devs",
                message: format!("must be finite and non-negative, got {n_std_devs}"),
            });
        }
        Ok(Self {
            n_std_devs,
            estimator,
        })
    }

    fn sigma(&self, rate: f64, n: f64) -> f64 {
        match self.estimator {
            Estimator::Binomial => (rate * (1.0 - rate) / n).max(0.0).sqrt(),
            Estimator::Poisson => (rate / n).max(0.0).sqrt(),
        }
    }
}

/// Widen observed rates using the pulse counts of `tally`.
///
/// Errors with a degenerate-class report when the decoy or vacuum class
/// has zero pulses sent.
pub fn widen_rates(
    rates: &ObservedRates,
    tally: &SessionTally,
    policy: &BoundPolicy,
) -> Result<BoundedRates> {
    if tally.decoy.pulses_sent == 0 {
        return Err(QkdError::DegenerateClass {
            class: PulseClass::Decoy,
        });
    }
    if tally.vacuum.pulses_sent == 0 {
        return Err(QkdError::DegenerateClass {
            class: PulseClass::Vacuum,
        });
    }
    Ok(widen_rates_with_counts(
        rates,
        tally.decoy.pulses_sent as f64,
        tally.vacuum.pulses_sent as f64,
        tally.signal.pulses_sent as f64,
        policy,
    ))
}

/// Widening against expected (possibly fractional) pulse counts; used by
/// the analytic optimizer pipeline where counts are duration x clock x
/// probability rather than sampled integers.
pub fn widen_rates_with_counts(
    rates: &ObservedRates,
    n_decoy: f64,
    n_vacuum: f64,
    n_signal: f64,
    policy: &BoundPolicy,
) -> BoundedRates {
    let k = policy.n_std_devs;
    let s_nu = policy.sigma(rates.q_nu, n_decoy);
    let s_y0 = policy.sigma(rates.y0, n_vacuum);
    let s_mu = policy.sigma(rates.q_mu, n_signal);
    BoundedRates {
        q_nu_lower: (rates.q_nu - k * s_nu).clamp(0.0, 1.0),
        y0_upper: (rates.y0 + k * s_y0).clamp(0.0, 1.0),
        y0_lower: (rates.y0 - k * s_y0).clamp(0.0, 1.0),
        q_mu_lower: (rates.q_mu - k * s_mu).clamp(0.0, 1.0),
        q_mu_upper: (rates.q_mu + k * s_mu).clamp(0.0, 1.0),
    }
}

/// Two-sided Gaussian confidence of a k-sigma interval: 1 - erfc(k / sqrt 2).
///
/// At k = 10 this rounds to exactly 1.0 in f64; use
/// [`confidence_complement`] when the tail probability itself is wanted.
pub fn confidence_of(policy: &BoundPolicy) -> f64 {
    1.0 - confidence_complement(policy)
}

/// Tail probability outside a k-sigma two-sided interval: erfc(k / sqrt 2).
pub fn confidence_complement(policy: &BoundPolicy) -> f64 {
    statrs::function::erf::erfc(policy.n_std_devs / std::f64::consts::SQRT_2)
}
