//! Threshold-crossing curves: key rate versus decoy/signal ratio, vacuum
//! rate, or fiber distance.
//!
//! The ratio sweep degrades the observed decoy gain at fixed signal gain
//! (the signature of photon-number splitting). The vacuum sweep pushes the
//! manipulated vacuum yield through the full channel algebra, emitting one
//! curve for the configured weak + vacuum analysis and one for the
//! single-decoy analysis. The distance sweep re-optimizes the source at
//! every fiber length.

use serde::Serialize;

use decoy_qkd::bounds::{widen_rates_with_counts, BoundPolicy};
use decoy_qkd::channel::{expected_rates, expected_rates_for, ChannelYields};
use decoy_qkd::model::{ChannelConfig, ObservedRates, SourceConfig};
use decoy_qkd::optimizer::optimize;
use decoy_qkd::security::{evaluate_security, AnalysisOptions, ProtocolVariant};
use decoy_qkd::AttackScenario;

use crate::config::RunConfig;
use crate::{CliError, CliResult};

/// Swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    RatioQnuQmu,
    Y0,
    Distance,
}

impl SweepVariable {
    pub fn parse(name: &str) -> CliResult<Self> {
        match name {
            "ratio" | "ratio_qnu_qmu" => Ok(Self::RatioQnuQmu),
            "y0" => Ok(Self::Y0),
            "distance" => Ok(Self::Distance),
            other => Err(CliError::validation(format!(
                "invalid sweep.variable {other:?}: expected ratio | y0 | distance"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::RatioQnuQmu => "ratio_qnu_qmu",
            Self::Y0 => "y0",
            Self::Distance => "distance_km",
        }
    }
}

/// One emitted curve sample.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub variant: String,
    pub key_rate_bps: f64,
}

/// Analytic key rate for given observed rates and expected per-class pulse
/// counts; shared by every sweep flavor.
pub fn analytic_rate(
    rates: &ObservedRates,
    source: &SourceConfig,
    policy: &BoundPolicy,
    duration_s: f64,
    options: &AnalysisOptions,
) -> CliResult<f64> {
    let pulses = source.clock_rate_hz * duration_s;
    let bounds = widen_rates_with_counts(
        rates,
        pulses * source.p_decoy,
        pulses * source.p_vacuum,
        pulses * source.p_signal,
        policy,
    );
    let result = evaluate_security(
        rates,
        &bounds,
        source,
        pulses * source.p_signal,
        duration_s,
        options,
    )?;
    Ok(result.key_rate_bps)
}

/// Key rate with the observed decoy gain forced to `ratio` x q_mu, all
/// other observations held at their honest analytic values.
pub fn rate_at_ratio(cfg: &RunConfig, ratio: f64, options: &AnalysisOptions) -> CliResult<f64> {
    let mut rates = expected_rates(&cfg.source, &cfg.channel);
    rates.q_nu = ratio * rates.q_mu;
    analytic_rate(
        &rates,
        &cfg.source,
        &cfg.policy,
        cfg.session_duration_s,
        options,
    )
}

/// Key rate with the vacuum yield replaced by `y0` in every photon-number
/// yield (gains and error rates respond through the channel algebra).
pub fn rate_at_y0(cfg: &RunConfig, y0: f64, options: &AnalysisOptions) -> CliResult<f64> {
    let yields = ChannelYields::honest(&cfg.channel)
        .apply(&AttackScenario::VacuumManipulation { y0_override: y0 }, &cfg.source)?;
    let rates = expected_rates_for(&yields, &cfg.source);
    analytic_rate(
        &rates,
        &cfg.source,
        &cfg.policy,
        cfg.session_duration_s,
        options,
    )
}

/// Best achievable key rate at fiber length `km`, re-optimizing the source.
pub fn rate_at_distance(cfg: &RunConfig, km: f64) -> CliResult<f64> {
    let channel = ChannelConfig::new(
        km,
        cfg.channel.attenuation_db_per_km,
        cfg.channel.receiver_efficiency,
        cfg.channel.dark_count_prob,
        cfg.channel.misalignment_error,
        cfg.channel.vacuum_error,
    )?;
    let mut spec = cfg.optimization_spec()?;
    spec.channel = channel;
    // coarse per-distance search keeps the whole sweep in seconds
    spec.grid_points = 5;
    spec.refine_levels = 3;
    Ok(optimize(&spec)?.key_rate_bps)
}

/// Evaluate the full curve dataset for a sweep variable over [start, stop].
pub fn sweep_curve(
    cfg: &RunConfig,
    variable: SweepVariable,
    start: f64,
    stop: f64,
    points: usize,
) -> CliResult<Vec<CurvePoint>> {
    if points < 2 || !(start.is_finite() && stop.is_finite() && start < stop) {
        return Err(CliError::validation(format!(
            "invalid sweep range: need start < stop and points >= 2, got [{start}, {stop}] x {points}"
        )));
    }
    let xs: Vec<f64> = (0..points)
        .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
        .collect();
    let mut curve = Vec::new();
    match variable {
        SweepVariable::RatioQnuQmu => {
            for &x in &xs {
                curve.push(CurvePoint {
                    x,
                    variant: cfg.options.variant.name().to_string(),
                    key_rate_bps: rate_at_ratio(cfg, x, &cfg.options)?,
                });
            }
        }
        SweepVariable::Y0 => {
            // weak + vacuum and single-decoy curves side by side
            let single = AnalysisOptions {
                variant: ProtocolVariant::SingleDecoy,
                thresholds: decoy_qkd::security::MonitorThresholds::defaults_for(
                    ProtocolVariant::SingleDecoy,
                ),
                ..cfg.options
            };
            for &x in &xs {
                curve.push(CurvePoint {
                    x,
                    variant: cfg.options.variant.name().to_string(),
                    key_rate_bps: rate_at_y0(cfg, x, &cfg.options)?,
                });
                curve.push(CurvePoint {
                    x,
                    variant: single.variant.name().to_string(),
                    key_rate_bps: rate_at_y0(cfg, x, &single)?,
                });
            }
        }
        SweepVariable::Distance => {
            for &x in &xs {
                curve.push(CurvePoint {
                    x,
                    variant: cfg.options.variant.name().to_string(),
                    key_rate_bps: rate_at_distance(cfg, x)?,
                });
            }
        }
    }
    Ok(curve)
}

/// Bisect for the boundary where `rate(x)` stops being zero.
///
/// `rising` selects the orientation: with `rising = true` the rate is zero
/// below the crossing and positive above (ratio sweeps); with `false` it
/// is positive below and zero above (vacuum sweeps).
pub fn find_zero_crossing(
    mut rate: impl FnMut(f64) -> CliResult<f64>,
    lo: f64,
    hi: f64,
    rising: bool,
) -> CliResult<Option<f64>> {
    let positive = |r: f64| r > 0.0;
    let (r_lo, r_hi) = (rate(lo)?, rate(hi)?);
    if positive(r_lo) == positive(r_hi) {
        return Ok(None);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let zero_side = !positive(rate(mid)?);
        // keep the crossing bracketed
        if zero_side == rising {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a).abs() < 1e-12 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(Some(0.5 * (a + b)))
}
