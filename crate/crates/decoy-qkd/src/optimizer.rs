//! Deterministic source-parameter optimization.
//!
//! Coarse-to-fine grid search over (mu, nu, p_decoy, p_vacuum) maximizing
//! the analytic key rate of the configured channel, with finite-statistics
//! widening at the configured session length. Ties break toward smaller mu,
//! then smaller nu, then larger signal probability, so identical specs
//! always return the identical argmax and trace.

use crate::bounds::{widen_rates_with_counts, BoundPolicy};
use crate::channel::expected_rates;
use crate::model::{ChannelConfig, SourceConfig};
use crate::security::{evaluate_security, AnalysisOptions};
use crate::{QkdError, Result};

/// Closed search interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(QkdError::Validation {
                field: "parameter range",
                message: format!("need 0 < lo <= hi < 1, got [{lo}, {hi}]"),
            });
        }
        Ok(Self { lo, hi })
    }

    fn grid(&self, points: usize) -> Vec<f64> {
        if points == 1 || self.hi == self.lo {
            return vec![self.lo];
        }
        (0..points)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (points - 1) as f64)
            .collect()
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// What to optimize and how finely.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationSpec {
    pub channel: ChannelConfig,
    pub options: AnalysisOptions,
    pub policy: BoundPolicy,
    pub mu: ParamRange,
    pub nu: ParamRange,
    pub p_decoy: ParamRange,
    pub p_vacuum: ParamRange,
    /// Grid points per dimension and per refinement level (odd, >= 3, so
    /// each refinement re-evaluates the incumbent).
    pub grid_points: usize,
    pub refine_levels: usize,
    /// Session length fixing the finite-statistics widening.
    pub session_duration_s: f64,
    pub clock_rate_hz: f64,
}

impl OptimizationSpec {
    /// Desk-scale search around the reference channel.
    pub fn reference_defaults(channel: ChannelConfig) -> Self {
        Self {
            channel,
            options: AnalysisOptions::default(),
            policy: BoundPolicy::default(),
            mu: ParamRange::new(0.1, 0.9).unwrap(),
            nu: ParamRange::new(0.01, 0.3).unwrap(),
            p_decoy: ParamRange::new(0.01, 0.3).unwrap(),
            p_vacuum: ParamRange::new(0.005, 0.2).unwrap(),
            grid_points: 9,
            refine_levels: 4,
            session_duration_s: 71.0,
            clock_rate_hz: 7.143e6,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.grid_points < 3 || self.grid_points.is_multiple_of(2) {
            return Err(QkdError::Validation {
                field: "grid_points",
                message: format!("must be odd and >= 3, got {}", self.grid_points),
            });
        }
        if self.refine_levels == 0 {
            return Err(QkdError::Validation {
                field: "refine_levels",
                message: "must be at least 1".into(),
            });
        }
        if !(self.session_duration_s > 0.0 && self.clock_rate_hz > 0.0) {
            return Err(QkdError::Validation {
                field: "session_duration_s / clock_rate_hz",
                message: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// One candidate source parameterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateParams {
    pub mu: f64,
    pub nu: f64,
    pub p_decoy: f64,
    pub p_vacuum: f64,
}

impl CandidateParams {
    pub fn p_signal(&self) -> f64 {
        1.0 - self.p_decoy - self.p_vacuum
    }

    fn source(&self, clock_rate_hz: f64) -> Result<SourceConfig> {
        SourceConfig::new(
            self.mu,
            self.nu,
            self.p_signal(),
            self.p_decoy,
            self.p_vacuum,
            clock_rate_hz,
        )
    }
}

/// One audited objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub params: CandidateParams,
    pub key_rate_bps: f64,
    pub level: usize,
}

/// Search result: the argmax plus every evaluation made on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationOutcome {
    pub best: CandidateParams,
    pub key_rate_bps: f64,
    pub trace: Vec<TracePoint>,
    /// Best value after each refinement level (non-decreasing).
    pub level_best: Vec<f64>,
}

/// Analytic key rate of a candidate: expected rates -> widening with
/// expected pulse counts -> key-rate bound. Deterministic, no sampling.
///
/// Errors on infeasible parameters (nu >= mu, probabilities off the
/// simplex), which the grid search treats as excluded points.
pub fn objective(params: &CandidateParams, spec: &OptimizationSpec) -> Result<f64> {
    let source = params.source(spec.clock_rate_hz)?;
    let rates = expected_rates(&source, &spec.channel);
    let pulses = spec.clock_rate_hz * spec.session_duration_s;
    let bounds = widen_rates_with_counts(
        &rates,
        pulses * source.p_decoy,
        pulses * source.p_vacuum,
        pulses * source.p_signal,
        &spec.policy,
    );
    let result = evaluate_security(
        &rates,
        &bounds,
        &source,
        pulses * source.p_signal,
        spec.session_duration_s,
        &spec.options,
    )?;
    Ok(result.key_rate_bps)
}

/// Better-than test with the deterministic tie-break order: larger rate,
/// then smaller mu, then smaller nu, then larger p_signal.
fn improves(candidate: (f64, &CandidateParams), incumbent: (f64, &CandidateParams)) -> bool {
    let (rate_c, p_c) = candidate;
    let (rate_i, p_i) = incumbent;
    if rate_c != rate_i {
        return rate_c > rate_i;
    }
    if p_c.mu != p_i.mu {
        return p_c.mu < p_i.mu;
    }
    if p_c.nu != p_i.nu {
        return p_c.nu < p_i.nu;
    }
    p_c.p_signal() > p_i.p_signal()
}

/// Coarse-to-fine grid search. Each level lays `grid_points` per dimension
/// over the current bounds, evaluates every feasible point, then shrinks
/// the bounds to one grid step around the incumbent (clamped to the
/// original ranges).
pub fn optimize(spec: &OptimizationSpec) -> Result<OptimizationOutcome> {
    spec.validate()?;
    let g = spec.grid_points;
    let mut bounds = [spec.mu, spec.nu, spec.p_decoy, spec.p_vacuum];
    let originals = bounds;

    let mut best: Option<(f64, CandidateParams)> = None;
    let mut trace = Vec::new();
    let mut level_best = Vec::new();

    for level in 0..spec.refine_levels {
        let axes: Vec<Vec<f64>> = bounds.iter().map(|r| r.grid(g)).collect();
        for &mu in &axes[0] {
            for &nu in &axes[1] {
                if nu >= mu {
                    continue;
                }
                for &p_decoy in &axes[2] {
                    for &p_vacuum in &axes[3] {
                        let params = CandidateParams {
                            mu,
                            nu,
                            p_decoy,
                            p_vacuum,
                        };
                        let Ok(rate) = objective(&params, spec) else {
                            continue;
                        };
                        trace.push(TracePoint {
                            params,
                            key_rate_bps: rate,
                            level,
                        });
                        let better = match &best {
                            None => true,
                            Some((r, p)) => improves((rate, &params), (*r, p)),
                        };
                        if better {
                            best = Some((rate, params));
                        }
                    }
                }
            }
        }
        let Some((rate, center)) = best else {
            return Err(QkdError::EmptyFeasibleSet);
        };
        level_best.push(rate);
        let centers = [center.mu, center.nu, center.p_decoy, center.p_vacuum];
        for (i, range) in bounds.iter_mut().enumerate() {
            let step = if g > 1 {
                (range.hi - range.lo) / (g - 1) as f64
            } else {
                0.0
            };
            *range = ParamRange {
                lo: originals[i].clamp(centers[i] - step),
                hi: originals[i].clamp(centers[i] + step),
            };
        }
    }

    let (key_rate_bps, best) = best.expect("levels >= 1 guarantees a best point");
    Ok(OptimizationOutcome {
        best,
        key_rate_bps,
        trace,
        level_best,
    })
}
