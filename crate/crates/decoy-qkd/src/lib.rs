//! Decoy-state BB84 key-rate analysis over lossy fiber.
//!
//! The crate models a weak + vacuum decoy protocol: an attenuated pulsed
//! laser emits signal (`mu`), weak decoy (`nu`) and vacuum pulses with
//! Poissonian photon statistics; a receiver behind a lossy channel reports
//! per-class gains and error rates. From those observations the security
//! pipeline derives a lower bound on the single-photon gain, an upper bound
//! on the single-photon error rate, and a provable secure key rate, with
//! finite-sample widening of the decoy and vacuum transmittances.
//!
//! Module map:
//! - [`model`] — domain types (source, channel, tallies, rates) and the
//!   shared pure math (binary entropy, error-correction efficiency).
//! - [`bounds`] — k-sigma statistical widening of observed rates.
//! - [`security`] — the gain/error bounds, key-rate formula, and the
//!   ratio / vacuum-rate attack monitor.
//! - [`channel`] — analytic channel algebra, adversarial scenarios
//!   (photon-number splitting, vacuum manipulation, sync spikes), and
//!   seeded Monte Carlo session simulation.
//! - [`optimizer`] — deterministic grid search for source parameters
//!   maximizing the analytic key rate.
//!
//! All types are immutable value objects and all operations are pure
//! functions; sessions can be analyzed from any number of threads without
//! coordination.

pub mod bounds;
pub mod channel;
pub mod model;
pub mod optimizer;
pub mod security;

pub use bounds::{confidence_complement, confidence_of, widen_rates, BoundPolicy, Estimator};
pub use channel::{
    expected_rates, run_campaign, simulate_session, AttackScenario, ChannelYields,
    SimulatedSession,
};
pub use model::{
    binary_entropy, tally_to_rates, BoundedRates, ChannelConfig, ClassTally, EcEfficiency,
    ObservedRates, PulseClass, SessionTally, SourceConfig,
};
pub use optimizer::{optimize, CandidateParams, OptimizationOutcome, OptimizationSpec, ParamRange};
pub use security::{
    compute_e1_upper, compute_key_rate, compute_q1_lower, monitor_attacks, AnalysisOptions,
    MonitorThresholds, MonitorVerdict, ProtocolVariant, SecurityResult, VacuumErrorTerm,
};

/// Errors shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum QkdError {
    /// A probability or rate fell outside its mathematical domain.
    #[error("domain error: {name} = {value} outside [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A configuration field failed validation.
    #[error("invalid {field}: {message}")]
    Validation {
        field: &'static str,
        message: String,
    },

    /// A pulse class required for a rate estimate has zero pulses sent.
    #[error("degenerate {class:?} class: zero pulses sent")]
    DegenerateClass { class: model::PulseClass },

    /// Formula parameters make a denominator vanish (e.g. nu = mu or nu = 0).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An attack scenario cannot be realized with physical yields.
    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    /// Search constraints exclude every grid point.
    #[error("empty feasible set: no grid point satisfies the constraints")]
    EmptyFeasibleSet,
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, QkdError>;
