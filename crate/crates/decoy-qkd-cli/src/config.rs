//! Run configuration: one strict TOML document.
//!
//! Every section is optional and defaults to the reference experiment's
//! operating point; unknown keys are rejected so a typo cannot silently
//! fall back to a default.

use serde::{Deserialize, Serialize};
use std::path::Path;

use decoy_qkd::bounds::{BoundPolicy, Estimator};
use decoy_qkd::model::{ChannelConfig, SourceConfig};
use decoy_qkd::optimizer::{OptimizationSpec, ParamRange};
use decoy_qkd::security::{
    AnalysisOptions, MonitorThresholds, ProtocolVariant, VacuumErrorTerm,
};
use decoy_qkd::AttackScenario;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub source: SourceSection,
    pub channel: ChannelSection,
    pub bounds: BoundsSection,
    pub analysis: AnalysisSection,
    pub attack: AttackSection,
    pub campaign: CampaignSection,
    pub sweep: SweepSection,
    pub optimize: OptimizeSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    pub mu: f64,
    pub nu: f64,
    pub p_signal: f64,
    pub p_decoy: f64,
    pub p_vacuum: f64,
    pub clock_rate_hz: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        let s = SourceConfig::reference_defaults();
        Self {
            mu: s.mu,
            nu: s.nu,
            p_signal: s.p_signal,
            p_decoy: s.p_decoy,
            p_vacuum: s.p_vacuum,
            clock_rate_hz: s.clock_rate_hz,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub fiber_length_km: f64,
    pub attenuation_db_per_km: f64,
    pub receiver_efficiency: f64,
    pub dark_count_prob: f64,
    pub misalignment_error: f64,
    pub vacuum_error: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let c = ChannelConfig::reference_defaults();
        Self {
            fiber_length_km: c.fiber_length_km,
            attenuation_db_per_km: c.attenuation_db_per_km,
            receiver_efficiency: c.receiver_efficiency,
            dark_count_prob: c.dark_count_prob,
            misalignment_error: c.misalignment_error,
            vacuum_error: c.vacuum_error,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    pub n_std_devs: f64,
    /// "binomial" or "poisson".
    pub estimator: String,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            n_std_devs: 10.0,
            estimator: "binomial".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// "corrected", "as-printed", "single-decoy" or "asymptotic".
    pub variant: String,
    /// "half" or "as-printed".
    pub vacuum_term: String,
    pub ec_efficiency: f64,
    /// Advisory monitor thresholds; y0 threshold defaults per variant.
    pub ratio_threshold: f64,
    pub y0_threshold: Option<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            variant: "corrected".into(),
            vacuum_term: "half".into(),
            ec_efficiency: 1.10,
            ratio_threshold: 0.13,
            y0_threshold: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    /// "none", "pns", "vacuum_manipulation" or "sync_spike".
    pub kind: String,
    pub block_fraction: f64,
    pub preserve_q_mu: bool,
    pub y0_override: f64,
    pub spike_prob: f64,
    pub spike_magnitude: f64,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            kind: "none".into(),
            block_fraction: 0.0,
            preserve_q_mu: true,
            y0_override: 0.0,
            spike_prob: 0.01,
            spike_magnitude: 5.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSection {
    pub sessions: usize,
    pub session_duration_s: f64,
    pub master_seed: u64,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            sessions: 3262,
            session_duration_s: 71.0,
            master_seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// "ratio", "y0" or "distance".
    pub variable: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            variable: "ratio".into(),
            start: 0.05,
            stop: 0.1879,
            points: 60,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub nu_lo: f64,
    pub nu_hi: f64,
    pub p_decoy_lo: f64,
    pub p_decoy_hi: f64,
    pub p_vacuum_lo: f64,
    pub p_vacuum_hi: f64,
    pub grid_points: usize,
    pub refine_levels: usize,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            mu_lo: 0.1,
            mu_hi: 0.9,
            nu_lo: 0.01,
            nu_hi: 0.3,
            p_decoy_lo: 0.01,
            p_decoy_hi: 0.3,
            p_vacuum_lo: 0.005,
            p_vacuum_hi: 0.2,
            grid_points: 9,
            refine_levels: 4,
        }
    }
}

/// Fully validated run configuration in library types.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: SourceConfig,
    pub channel: ChannelConfig,
    pub policy: BoundPolicy,
    pub options: AnalysisOptions,
    pub scenario: AttackScenario,
    pub sessions: usize,
    pub session_duration_s: f64,
    pub master_seed: u64,
    pub sweep: SweepSection,
    pub optimize: OptimizeSection,
    /// The raw document, re-serialized into output metadata.
    pub raw: ConfigFile,
}

pub fn parse_variant(name: &str) -> CliResult<ProtocolVariant> {
    match name {
        "corrected" | "weak_plus_vacuum_corrected" => Ok(ProtocolVariant::WeakPlusVacuumCorrected),
        "as-printed" | "as_printed" | "weak_plus_vacuum_as_printed" => {
            Ok(ProtocolVariant::WeakPlusVacuumAsPrinted)
        }
        "single-decoy" | "single_decoy" => Ok(ProtocolVariant::SingleDecoy),
        "asymptotic" | "asymptotic_infinite_decoy" => Ok(ProtocolVariant::AsymptoticInfiniteDecoy),
        other => Err(CliError::validation(format!(
            "invalid analysis.variant {other:?}: expected corrected | as-printed | single-decoy | asymptotic"
        ))),
    }
}

pub fn parse_vacuum_term(name: &str) -> CliResult<VacuumErrorTerm> {
    match name {
        "half" | "half_weighted" => Ok(VacuumErrorTerm::HalfWeighted),
        "as-printed" | "as_printed" => Ok(VacuumErrorTerm::AsPrinted),
        other => Err(CliError::validation(format!(
            "invalid analysis.vacuum_term {other:?}: expected half | as-printed"
        ))),
    }
}

fn parse_estimator(name: &str) -> CliResult<Estimator> {
    match name {
        "binomial" => Ok(Estimator::Binomial),
        "poisson" => Ok(Estimator::Poisson),
        other => Err(CliError::validation(format!(
            "invalid bounds.estimator {other:?}: expected binomial | poisson"
        ))),
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::from_io(&format!("reading config {}", path.display()), e))?;
        toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
    }

    /// Validate every section into library types.
    pub fn build(&self) -> CliResult<RunConfig> {
        let source = SourceConfig::new(
            self.source.mu,
            self.source.nu,
            self.source.p_signal,
            self.source.p_decoy,
            self.source.p_vacuum,
            self.source.clock_rate_hz,
        )
        .map_err(|e| CliError::validation(format!("source: {e}")))?;
        let channel = ChannelConfig::new(
            self.channel.fiber_length_km,
            self.channel.attenuation_db_per_km,
            self.channel.receiver_efficiency,
            self.channel.dark_count_prob,
            self.channel.misalignment_error,
            self.channel.vacuum_error,
        )
        .map_err(|e| CliError::validation(format!("channel: {e}")))?;
        let policy = BoundPolicy::new(
            self.bounds.n_std_devs,
            parse_estimator(&self.bounds.estimator)?,
        )
        .map_err(|e| CliError::validation(format!("bounds: {e}")))?;

        let variant = parse_variant(&self.analysis.variant)?;
        let vacuum_term = parse_vacuum_term(&self.analysis.vacuum_term)?;
        if !(self.analysis.ec_efficiency.is_finite() && self.analysis.ec_efficiency >= 1.0) {
            return Err(CliError::validation(format!(
                "invalid analysis.ec_efficiency {}: must be >= 1",
                self.analysis.ec_efficiency
            )));
        }
        let thresholds = MonitorThresholds {
            ratio: self.analysis.ratio_threshold,
            y0: self
                .analysis
                .y0_threshold
                .unwrap_or(MonitorThresholds::defaults_for(variant).y0),
        };
        let options = AnalysisOptions {
            variant,
            vacuum_term,
            ec: decoy_qkd::EcEfficiency::Constant(self.analysis.ec_efficiency),
            thresholds,
        };

        let scenario = match self.attack.kind.as_str() {
            "none" => AttackScenario::None,
            "pns" => AttackScenario::Pns {
                block_fraction: self.attack.block_fraction,
                preserve_q_mu: self.attack.preserve_q_mu,
            },
            "vacuum_manipulation" => AttackScenario::VacuumManipulation {
                y0_override: self.attack.y0_override,
            },
            "sync_spike" => AttackScenario::SyncSpike {
                spike_prob: self.attack.spike_prob,
                spike_magnitude: self.attack.spike_magnitude,
            },
            other => {
                return Err(CliError::validation(format!(
                    "invalid attack.kind {other:?}: expected none | pns | vacuum_manipulation | sync_spike"
                )))
            }
        };
        scenario
            .validate()
            .map_err(|e| CliError::validation(format!("attack: {e}")))?;

        if self.campaign.sessions == 0 {
            return Err(CliError::validation(
                "invalid campaign.sessions: must be at least 1",
            ));
        }
        if !(self.campaign.session_duration_s.is_finite() && self.campaign.session_duration_s > 0.0)
        {
            return Err(CliError::validation(format!(
                "invalid campaign.session_duration_s {}: must be positive",
                self.campaign.session_duration_s
            )));
        }

        Ok(RunConfig {
            source,
            channel,
            policy,
            options,
            scenario,
            sessions: self.campaign.sessions,
            session_duration_s: self.campaign.session_duration_s,
            master_seed: self.campaign.master_seed,
            sweep: self.sweep.clone(),
            optimize: self.optimize.clone(),
            raw: self.clone(),
        })
    }
}

impl RunConfig {
    pub fn optimization_spec(&self) -> CliResult<OptimizationSpec> {
        let o = &self.optimize;
        let range = |field: &'static str, lo: f64, hi: f64| {
            ParamRange::new(lo, hi)
                .map_err(|e| CliError::validation(format!("optimize.{field}: {e}")))
        };
        Ok(OptimizationSpec {
            channel: self.channel.clone(),
            options: self.options,
            policy: self.policy,
            mu: range("mu", o.mu_lo, o.mu_hi)?,
            nu: range("nu", o.nu_lo, o.nu_hi)?,
            p_decoy: range("p_decoy", o.p_decoy_lo, o.p_decoy_hi)?,
            p_vacuum: range("p_vacuum", o.p_vacuum_lo, o.p_vacuum_hi)?,
            grid_points: o.grid_points,
            refine_levels: o.refine_levels,
            session_duration_s: self.session_duration_s,
            clock_rate_hz: self.source.clock_rate_hz,
        })
    }
}
