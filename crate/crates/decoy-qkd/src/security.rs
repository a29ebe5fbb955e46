//! Security bounds and the secure key rate.
//!
//! From widened observations the pipeline derives:
//!
//! 1. a lower bound Q1_L on the single-photon gain,
//! 2. an upper bound e1_U on the single-photon error rate,
//! 3. the key-rate lower bound
//!    `R_L = q N_mu { -Q_mu f(E_mu) H2(E_mu) + Q1_L (1 - H2(e1_U)) } / t`,
//!
//! plus an advisory attack monitor on the decoy/signal gain ratio and the
//! vacuum rate. Negative raw rates clamp to zero: the formulas, not the
//! monitor, are the security authority.
//!
//! Two transcriptions of the gain bound are kept. The corrected form is
//! the standard weak + vacuum bound
//! `Q1_L = mu^2 e^-mu / (mu nu - nu^2) {Q_nu^L e^nu - Q_mu e^mu nu^2/mu^2 - Y0^U (mu^2 - nu^2)/mu^2}`
//! and is the default; the as-printed form (prefactor
//! `(mu^2 - nu^2)/(mu^2 - mu nu)`, second term on `Q_nu`) is retained
//! verbatim for comparison. Only the corrected form is a valid bound
//! across the whole parameter space; see the bound-validity tests.

use crate::model::{h2, BoundedRates, EcEfficiency, ObservedRates, SessionTally, SourceConfig};
use crate::{QkdError, Result};

/// Basis-sift survival fraction for BB84.
pub const BB84_SIFTING_FACTOR: f64 = 0.5;

/// Which analysis the security formulas run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProtocolVariant {
    /// Gain bound exactly as transcribed, second term on Q_nu.
    WeakPlusVacuumAsPrinted,
    /// Standard weak + vacuum gain bound, second term on Q_mu.
    #[default]
    WeakPlusVacuumCorrected,
    /// Same gain bound as the corrected form, but the error bound keeps no
    /// vacuum subtraction: with a single (non-vacuum) decoy that term is
    /// zero.
    SingleDecoy,
    /// Infinite-decoy limit: Q1 = Y1 mu e^-mu with Y1 inferred from the
    /// central observed rates.
    AsymptoticInfiniteDecoy,
}

impl ProtocolVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::WeakPlusVacuumAsPrinted => "weak_plus_vacuum_as_printed",
            Self::WeakPlusVacuumCorrected => "weak_plus_vacuum_corrected",
            Self::SingleDecoy => "single_decoy",
            Self::AsymptoticInfiniteDecoy => "asymptotic_infinite_decoy",
        }
    }
}

/// Vacuum term of the single-photon error bound
/// `e1_U = (E_mu Q_mu - w Y0_L e^-mu) / Q1_L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VacuumErrorTerm {
    /// w = e0 = 1/2: only the erroring half of dark counts is subtracted.
    /// This is the provably safe weighting and the default; the full
    /// subtraction can undercut the true single-photon error rate.
    #[default]
    HalfWeighted,
    /// w = 1: the full vacuum rate is subtracted, as transcribed.
    AsPrinted,
}

impl VacuumErrorTerm {
    fn weight(&self) -> f64 {
        match self {
            Self::HalfWeighted => 0.5,
            Self::AsPrinted => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::HalfWeighted => "half_weighted",
            Self::AsPrinted => "as_printed",
        }
    }
}

/// Advisory alarm thresholds for the attack monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorThresholds {
    /// Alarm when q_nu / q_mu falls below this.
    pub ratio: f64,
    /// Alarm when y0 rises above this.
    pub y0: f64,
}

impl MonitorThresholds {
    /// Zero-rate thresholds of the reference system: ratio 0.13 for either
    /// protocol; vacuum rate 1e-3 for weak + vacuum, 4.8e-4 for the
    /// single-decoy analysis.
    pub fn defaults_for(variant: ProtocolVariant) -> Self {
        let y0 = match variant {
            ProtocolVariant::SingleDecoy => 4.8e-4,
            _ => 1e-3,
        };
        Self { ratio: 0.13, y0 }
    }
}

/// Attack-monitor outcome for one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorVerdict {
    Clean,
    RatioAlarm,
    VacuumAlarm,
    /// No alarm fired but the raw key rate was non-positive and clamped.
    InsecureZeroRate,
}

impl MonitorVerdict {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Clean => "clean",
            Self::RatioAlarm => "ratio_alarm",
            Self::VacuumAlarm => "vacuum_alarm",
            Self::InsecureZeroRate => "insecure_zero_rate",
        }
    }
}

/// Everything the per-session analysis needs besides the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub variant: ProtocolVariant,
    pub vacuum_term: VacuumErrorTerm,
    pub ec: EcEfficiency,
    pub thresholds: MonitorThresholds,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self::for_variant(ProtocolVariant::default())
    }
}

impl AnalysisOptions {
    pub fn for_variant(variant: ProtocolVariant) -> Self {
        Self {
            variant,
            vacuum_term: VacuumErrorTerm::default(),
            ec: EcEfficiency::default(),
            thresholds: MonitorThresholds::defaults_for(variant),
        }
    }
}

/// Security verdict for one session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityResult {
    /// Lower bound on the per-pulse single-photon gain.
    pub q1_lower: f64,
    /// Upper bound on the single-photon error rate.
    pub e1_upper: f64,
    /// Secure key rate in bits per second, clamped at zero.
    pub key_rate_bps: f64,
    /// floor(key_rate_bps x session duration).
    pub secure_key_bits: u64,
    pub monitor_verdict: MonitorVerdict,
    /// Sifting factor q (0.5 for BB84).
    pub q: f64,
    /// Set when q1_lower = 0 forced the pessimistic e1_upper = 1 convention.
    pub e1_degenerate: bool,
    /// Set when the raw rate was negative and clamped to zero.
    pub rate_clamped: bool,
}

fn check_mu_nu(mu: f64, nu: f64) -> Result<()> {
    if !(mu.is_finite() && nu.is_finite() && mu > 0.0 && nu > 0.0 && nu < mu) {
        return Err(QkdError::Parameter(format!(
            "gain bound needs 0 < nu < mu, got mu={mu}, nu={nu}"
        )));
    }
    // a denominator of nu (mu - nu) below ~1e-9 mu is pure cancellation
    // noise in f64 and can exceed the true gain
    if mu - nu < 1e-9 * mu {
        return Err(QkdError::Parameter(format!(
            "gain bound denominator vanishes: mu - nu = {:e} is below 1e-9 mu",
            mu - nu
        )));
    }
    Ok(())
}

/// Lower bound on the single-photon gain Q1.
///
/// Negative evaluations clamp to zero: no detections, no provable
/// single-photon gain.
pub fn compute_q1_lower(
    mu: f64,
    nu: f64,
    rates: &ObservedRates,
    bounds: &BoundedRates,
    variant: ProtocolVariant,
) -> Result<f64> {
    let raw = match variant {
        ProtocolVariant::WeakPlusVacuumAsPrinted => {
            check_mu_nu(mu, nu)?;
            let prefactor = (mu * mu - nu * nu) / (mu * mu - mu * nu);
            prefactor
                * (bounds.q_nu_lower * nu.exp()
                    - rates.q_nu * mu.exp() * nu * nu / (mu * mu)
                    - bounds.y0_upper * (mu * mu - nu * nu) / (mu * mu))
        }
        ProtocolVariant::WeakPlusVacuumCorrected | ProtocolVariant::SingleDecoy => {
            check_mu_nu(mu, nu)?;
            let prefactor = mu * mu * (-mu).exp() / (mu * nu - nu * nu);
            prefactor
                * (bounds.q_nu_lower * nu.exp()
                    - rates.q_mu * mu.exp() * nu * nu / (mu * mu)
                    - bounds.y0_upper * (mu * mu - nu * nu) / (mu * mu))
        }
        ProtocolVariant::AsymptoticInfiniteDecoy => {
            if mu <= 0.0 {
                return Err(QkdError::Parameter(format!(
                    "asymptotic bound needs mu > 0, got {mu}"
                )));
            }
            infer_y1(rates, mu) * mu * (-mu).exp()
        }
    };
    Ok(raw.max(0.0))
}

/// Invert the honest channel algebra Q_mu = y0 + (1 - y0)(1 - e^-(eta mu))
/// for eta and return Y1 = y0 + (1 - y0) eta.
fn infer_y1(rates: &ObservedRates, mu: f64) -> f64 {
    let y0 = rates.y0.clamp(0.0, 1.0);
    if y0 >= 1.0 {
        return 1.0;
    }
    let photon_part = ((rates.q_mu - y0) / (1.0 - y0)).clamp(0.0, 1.0);
    let eta = if photon_part >= 1.0 {
        f64::INFINITY
    } else {
        -(1.0 - photon_part).ln() / mu
    };
    (y0 + (1.0 - y0) * eta).clamp(0.0, 1.0)
}

/// Upper bound on the single-photon error rate.
///
/// `e1_U = (E_mu Q_mu - w Y0_L e^-mu) / Q1_L`, clamped to [0, 1]; the
/// vacuum term weight w comes from `term` and is dropped entirely for the
/// single-decoy variant. `q1_lower = 0` yields the maximally pessimistic
/// value 1 together with the degenerate flag.
pub fn compute_e1_upper(
    mu: f64,
    rates: &ObservedRates,
    bounds: &BoundedRates,
    q1_lower: f64,
    variant: ProtocolVariant,
    term: VacuumErrorTerm,
) -> (f64, bool) {
    if q1_lower <= 0.0 {
        return (1.0, true);
    }
    let subtraction = match variant {
        ProtocolVariant::SingleDecoy => 0.0,
        _ => term.weight() * bounds.y0_lower * (-mu).exp(),
    };
    let e1 = (rates.e_mu * rates.q_mu - subtraction) / q1_lower;
    (e1.clamp(0.0, 1.0), false)
}

/// Privacy-amplification factor 1 - H2(e1). An error bound above one half
/// certifies nothing, so the factor floors at zero there instead of
/// following the entropy back down; this keeps e1 = 1 maximally
/// pessimistic and the key rate monotone in the error bounds.
fn pa_factor(e1: f64) -> f64 {
    if e1 >= 0.5 {
        0.0
    } else {
        1.0 - h2(e1)
    }
}

/// Advisory threshold tests on the observed rates.
///
/// Errors when q_mu = 0 (the ratio is undefined). Alarms are advisory;
/// the key-rate formula is the security authority and an alarm is expected
/// to co-occur with a clamped rate.
pub fn monitor_attacks(
    rates: &ObservedRates,
    thresholds: &MonitorThresholds,
) -> Result<MonitorVerdict> {
    if rates.q_mu <= 0.0 {
        return Err(QkdError::Parameter(
            "monitor needs q_mu > 0 to form the decoy/signal ratio".into(),
        ));
    }
    if rates.q_nu / rates.q_mu < thresholds.ratio {
        Ok(MonitorVerdict::RatioAlarm)
    } else if rates.y0 > thresholds.y0 {
        Ok(MonitorVerdict::VacuumAlarm)
    } else {
        Ok(MonitorVerdict::Clean)
    }
}

/// Full key-rate evaluation from a session tally.
pub fn compute_key_rate(
    tally: &SessionTally,
    rates: &ObservedRates,
    bounds: &BoundedRates,
    source: &SourceConfig,
    options: &AnalysisOptions,
) -> Result<SecurityResult> {
    evaluate_security(
        rates,
        bounds,
        source,
        tally.signal.pulses_sent as f64,
        tally.session_duration_s,
        options,
    )
}

/// Key-rate evaluation with explicit signal-pulse count and duration; the
/// optimizer feeds expected counts through this entry point.
pub fn evaluate_security(
    rates: &ObservedRates,
    bounds: &BoundedRates,
    source: &SourceConfig,
    n_signal_pulses: f64,
    duration_s: f64,
    options: &AnalysisOptions,
) -> Result<SecurityResult> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(QkdError::Validation {
            field: "session_duration_s",
            message: format!("must be positive, got {duration_s}"),
        });
    }
    let q1_lower = compute_q1_lower(source.mu, source.nu, rates, bounds, options.variant)?;
    let (e1_upper, e1_degenerate) = compute_e1_upper(
        source.mu,
        rates,
        bounds,
        q1_lower,
        options.variant,
        options.vacuum_term,
    );
    let f_ec = options.ec.factor(rates.e_mu)?;
    let brace = -rates.q_mu * f_ec * h2(rates.e_mu) + q1_lower * pa_factor(e1_upper);
    let raw_rate = BB84_SIFTING_FACTOR * n_signal_pulses * brace / duration_s;
    let rate_clamped = raw_rate <= 0.0;
    let key_rate_bps = raw_rate.max(0.0);

    let mut verdict = monitor_attacks(rates, &options.thresholds)
        .unwrap_or(MonitorVerdict::InsecureZeroRate);
    if verdict == MonitorVerdict::Clean && rate_clamped {
        verdict = MonitorVerdict::InsecureZeroRate;
    }

    Ok(SecurityResult {
        q1_lower,
        e1_upper,
        key_rate_bps,
        secure_key_bits: (key_rate_bps * duration_s).floor() as u64,
        monitor_verdict: verdict,
        q: BB84_SIFTING_FACTOR,
        e1_degenerate,
        rate_clamped,
    })
}
