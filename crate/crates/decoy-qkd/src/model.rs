//! Domain types and shared pure math.
//!
//! Everything here is a validated immutable value object. Construction is
//! the only place invariants are checked; downstream code can rely on them.

use crate::{QkdError, Result};

/// Probability-vector closure tolerance for `SourceConfig`.
const PROB_SUM_TOL: f64 = 1e-12;

/// Pulse classes of the weak + vacuum protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseClass {
    Signal,
    Decoy,
    Vacuum,
}

/// Source-side configuration: pulse intensities, class probabilities and
/// clock rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    /// Mean photon number of signal pulses.
    pub mu: f64,
    /// Mean photon number of weak decoy pulses. Must satisfy 0 < nu < mu.
    pub nu: f64,
    /// Occurrence probability of signal pulses.
    pub p_signal: f64,
    /// Occurrence probability of weak decoy pulses.
    pub p_decoy: f64,
    /// Occurrence probability of vacuum pulses.
    pub p_vacuum: f64,
    /// Pulse repetition rate in Hz.
    pub clock_rate_hz: f64,
}

impl SourceConfig {
    pub fn new(
        mu: f64,
        nu: f64,
        p_signal: f64,
        p_decoy: f64,
        p_vacuum: f64,
        clock_rate_hz: f64,
    ) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(QkdError::Validation {
                field: "mu",
                message: format!("must be finite and positive, got {mu}"),
            });
        }
        if !(nu.is_finite() && nu > 0.0 && nu < mu) {
            return Err(QkdError::Validation {
                field: "nu",
                message: format!("must satisfy 0 < nu < mu, got nu={nu}, mu={mu}"),
            });
        }
        for (name, p) in [
            ("p_signal", p_signal),
            ("p_decoy", p_decoy),
            ("p_vacuum", p_vacuum),
        ] {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(QkdError::Validation {
                    field: name,
                    message: format!("must be a probability in [0, 1], got {p}"),
                });
            }
        }
        let sum = p_signal + p_decoy + p_vacuum;
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(QkdError::Validation {
                field: "p_signal + p_decoy + p_vacuum",
                message: format!("must sum to 1 within {PROB_SUM_TOL:e}, got {sum}"),
            });
        }
        if !(clock_rate_hz.is_finite() && clock_rate_hz > 0.0) {
            return Err(QkdError::Validation {
                field: "clock_rate_hz",
                message: format!("must be positive, got {clock_rate_hz}"),
            });
        }
        Ok(Self {
            mu,
            nu,
            p_signal,
            p_decoy,
            p_vacuum,
            clock_rate_hz,
        })
    }

    /// Operating point of the reference 20 km experiment: mu = 0.55,
    /// nu = 0.098, 7.143 MHz clock. The quoted relative occurrence
    /// probabilities 0.93 / 0.062 / 0.016 sum to 1.008, so they are
    /// normalized here to close the probability simplex.
    pub fn reference_defaults() -> Self {
        let sum = 0.93 + 0.062 + 0.016;
        Self::new(0.55, 0.098, 0.93 / sum, 0.062 / sum, 0.016 / sum, 7.143e6)
            .expect("defaults are valid")
    }

    pub fn probability_of(&self, class: PulseClass) -> f64 {
        match class {
            PulseClass::Signal => self.p_signal,
            PulseClass::Decoy => self.p_decoy,
            PulseClass::Vacuum => self.p_vacuum,
        }
    }

    pub fn intensity_of(&self, class: PulseClass) -> f64 {
        match class {
            PulseClass::Signal => self.mu,
            PulseClass::Decoy => self.nu,
            PulseClass::Vacuum => 0.0,
        }
    }
}

/// Receiver-side channel model: fiber loss, detector efficiency, dark
/// counts and intrinsic error parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub fiber_length_km: f64,
    pub attenuation_db_per_km: f64,
    /// Combined detector efficiency and receiver internal loss.
    pub receiver_efficiency: f64,
    /// Per-gate combined dark-count probability (the vacuum yield Y0).
    pub dark_count_prob: f64,
    /// Intrinsic detector/optical misalignment error probability e_det.
    /// No measured value exists for the reference system; the default is a
    /// modeling assumption chosen so the simulated signal QBER is ~2%, and
    /// is flagged as such in output metadata.
    pub misalignment_error: f64,
    /// Error probability of a dark count. Dark counts are random, so 0.5.
    pub vacuum_error: f64,
}

impl ChannelConfig {
    pub fn new(
        fiber_length_km: f64,
        attenuation_db_per_km: f64,
        receiver_efficiency: f64,
        dark_count_prob: f64,
        misalignment_error: f64,
        vacuum_error: f64,
    ) -> Result<Self> {
        if !(fiber_length_km.is_finite() && fiber_length_km >= 0.0) {
            return Err(QkdError::Validation {
                field: "fiber_length_km",
                message: format!("must be non-negative, got {fiber_length_km}"),
            });
        }
        if !(attenuation_db_per_km.is_finite() && attenuation_db_per_km >= 0.0) {
            return Err(QkdError::Validation {
                field: "attenuation_db_per_km",
                message: format!("must be non-negative, got {attenuation_db_per_km}"),
            });
        }
        for (name, p) in [
            ("receiver_efficiency", receiver_efficiency),
            ("dark_count_prob", dark_count_prob),
            ("misalignment_error", misalignment_error),
            ("vacuum_error", vacuum_error),
        ] {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(QkdError::Validation {
                    field: name,
                    message: format!("must be a probability in [0, 1], got {p}"),
                });
            }
        }
        let cfg = Self {
            fiber_length_km,
            attenuation_db_per_km,
            receiver_efficiency,
            dark_count_prob,
            misalignment_error,
            vacuum_error,
        };
        let eta = cfg.overall_transmission();
        if !(0.0..=1.0).contains(&eta) {
            return Err(QkdError::Validation {
                field: "overall transmission",
                message: format!("receiver_efficiency x fiber loss = {eta} outside [0, 1]"),
            });
        }
        Ok(cfg)
    }

    /// Reference 20 km channel: 0.20 dB/km at 1550 nm, receiver efficiency
    /// 5.62e-2, dark-count probability 1.34e-4. The misalignment default
    /// 0.0147 calibrates the modeled signal QBER to 2.0%.
    pub fn reference_defaults() -> Self {
        Self::new(20.0, 0.20, 5.62e-2, 1.34e-4, 0.0147, 0.5).expect("defaults are valid")
    }

    /// Overall single-photon transmission: receiver efficiency times fiber
    /// transmission 10^(-attenuation * length / 10).
    pub fn overall_transmission(&self) -> f64 {
        self.receiver_efficiency
            * 10f64.powf(-self.attenuation_db_per_km * self.fiber_length_km / 10.0)
    }
}

/// Raw counts for one pulse class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassTally {
    pub pulses_sent: u64,
    pub detections: u64,
    pub errors: u64,
}

impl ClassTally {
    pub fn new(pulses_sent: u64, detections: u64, errors: u64) -> Result<Self> {
        if detections > pulses_sent || errors > detections {
            return Err(QkdError::Validation {
                field: "class tally",
                message: format!(
                    "need errors <= detections <= pulses_sent, got {errors} / {detections} / {pulses_sent}"
                ),
            });
        }
        Ok(Self {
            pulses_sent,
            detections,
            errors,
        })
    }
}

/// Per-session counting record: one `ClassTally` per pulse class plus the
/// elapsed session time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionTally {
    pub signal: ClassTally,
    pub decoy: ClassTally,
    pub vacuum: ClassTally,
    pub session_duration_s: f64,
}

impl SessionTally {
    pub fn new(
        signal: ClassTally,
        decoy: ClassTally,
        vacuum: ClassTally,
        session_duration_s: f64,
    ) -> Result<Self> {
        if !(session_duration_s.is_finite() && session_duration_s > 0.0) {
            return Err(QkdError::Validation {
                field: "session_duration_s",
                message: format!("must be positive, got {session_duration_s}"),
            });
        }
        Ok(Self {
            signal,
            decoy,
            vacuum,
            session_duration_s,
        })
    }

    pub fn class(&self, class: PulseClass) -> &ClassTally {
        match class {
            PulseClass::Signal => &self.signal,
            PulseClass::Decoy => &self.decoy,
            PulseClass::Vacuum => &self.vacuum,
        }
    }

    pub fn total_detections(&self) -> u64 {
        self.signal.detections + self.decoy.detections + self.vacuum.detections
    }

    pub fn total_pulses(&self) -> u64 {
        self.signal.pulses_sent + self.decoy.pulses_sent + self.vacuum.pulses_sent
    }
}

/// Per-pulse transmittances and error rates observed in one session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedRates {
    /// Signal gain Q_mu.
    pub q_mu: f64,
    /// Decoy gain Q_nu.
    pub q_nu: f64,
    /// Vacuum per-pulse count probability Y0.
    pub y0: f64,
    /// Signal QBER.
    pub e_mu: f64,
    /// Decoy QBER.
    pub e_nu: f64,
    /// Set when a class had zero detections and its QBER was defined as 0
    /// so downstream bound math never sees non-finite values.
    pub zero_detection: bool,
}

/// Statistically widened bounds consumed by the security formulas.
///
/// Only the decoy and vacuum transmittances are widened; the formulas use
/// the central signal gain. Signal-gain bounds are carried for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedRates {
    pub q_nu_lower: f64,
    pub y0_upper: f64,
    pub y0_lower: f64,
    /// Diagnostic only; not consumed by the security formulas.
    pub q_mu_lower: f64,
    /// Diagnostic only; not consumed by the security formulas.
    pub q_mu_upper: f64,
}

/// Binary entropy in bits, with the continuous extension H2(0) = H2(1) = 0.
///
/// Errors if `x` is outside [0, 1].
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
        return Err(QkdError::Domain {
            name: "binary_entropy argument",
            value: x,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(h2(x))
}

/// Internal entropy helper for arguments already known to lie in [0, 1].
pub(crate) fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Bidirectional error-correction inefficiency above the Shannon limit.
///
/// The reference system models it as the constant 1.10; the enum is the
/// seam for substituting an error-dependent curve later.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EcEfficiency {
    Constant(f64),
}

impl Default for EcEfficiency {
    fn default() -> Self {
        EcEfficiency::Constant(1.10)
    }
}

impl EcEfficiency {
    /// f(e_mu). Errors if `e_mu` is outside [0, 1].
    pub fn factor(&self, e_mu: f64) -> Result<f64> {
        if !(e_mu.is_finite() && (0.0..=1.0).contains(&e_mu)) {
            return Err(QkdError::Domain {
                name: "ec_efficiency argument",
                value: e_mu,
                lo: 0.0,
                hi: 1.0,
            });
        }
        match self {
            EcEfficiency::Constant(f) => Ok(*f),
        }
    }
}

/// Ratio estimators behind the observed per-class rates.
///
/// Gains are detections / pulses_sent and QBERs are errors / detections;
/// a zero-detection class gets QBER 0 with the `zero_detection` flag set.
/// Errors with a degenerate-class report when any class has zero pulses.
pub fn tally_to_rates(tally: &SessionTally) -> Result<ObservedRates> {
    for class in [PulseClass::Signal, PulseClass::Decoy, PulseClass::Vacuum] {
        if tally.class(class).pulses_sent == 0 {
            return Err(QkdError::DegenerateClass { class });
        }
    }
    let gain = |c: &ClassTally| c.detections as f64 / c.pulses_sent as f64;
    let mut zero_detection = false;
    let mut qber = |c: &ClassTally| {
        if c.detections == 0 {
            zero_detection = true;
            0.0
        } else {
            c.errors as f64 / c.detections as f64
        }
    };
    let e_mu = qber(&tally.signal);
    let e_nu = qber(&tally.decoy);
    Ok(ObservedRates {
        q_mu: gain(&tally.signal),
        q_nu: gain(&tally.decoy),
        y0: gain(&tally.vacuum),
        e_mu,
        e_nu,
        zero_detection,
    })
}
