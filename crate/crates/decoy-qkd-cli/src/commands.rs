//! The four commands: simulate, analyze, sweep, optimize.

use std::path::{Path, PathBuf};

use decoy_qkd::bounds::BoundPolicy;
use decoy_qkd::channel::run_campaign;
use decoy_qkd::optimizer::optimize;
use decoy_qkd::security::AnalysisOptions;

use crate::config::RunConfig;
use crate::records::{
    analyze_tally, build_record, read_metadata, read_records, write_metadata, write_records,
    RunMetadata, SessionRecord,
};
use crate::summary::CampaignSummary;
use crate::sweep::{find_zero_crossing, rate_at_ratio, rate_at_y0, sweep_curve, SweepVariable};
use crate::{CliError, CliResult};

fn ensure_out_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::from_io(&format!("creating {}", out.display()), e))
}

/// Run the configured campaign, analyze every session, and write the
/// session-record dataset plus summary. Returns the dataset path and the
/// summary.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> CliResult<(PathBuf, CampaignSummary)> {
    ensure_out_dir(out)?;
    let sessions = run_campaign(
        &cfg.source,
        &cfg.channel,
        &cfg.scenario,
        cfg.sessions,
        cfg.session_duration_s,
        cfg.master_seed,
    )?;
    let mut records = Vec::with_capacity(sessions.len());
    for (i, session) in sessions.iter().enumerate() {
        let analysis = analyze_tally(&session.tally, &cfg.source, &cfg.policy, &cfg.options)?;
        records.push(build_record(
            i as u64,
            session,
            &analysis,
            cfg.session_duration_s,
        ));
    }

    let dataset = out.join("records.csv");
    write_records(&dataset, &records)?;
    write_metadata(&dataset, &RunMetadata::for_run(cfg, "simulate"))?;

    let summary = CampaignSummary::from_records(&records);
    let summary_path = out.join("summary.toml");
    let text = toml::to_string_pretty(&summary)
        .map_err(|e| CliError::runtime(format!("serializing summary: {e}")))?;
    std::fs::write(&summary_path, text).map_err(|e| CliError::from_io("writing summary", e))?;
    write_metadata(&summary_path, &RunMetadata::for_run(cfg, "simulate"))?;
    Ok((dataset, summary))
}

/// Re-analysis overrides for `cmd_analyze`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyzeOverrides {
    pub policy: Option<BoundPolicy>,
    pub options: Option<AnalysisOptions>,
}

/// Recompute bounds and security results from the stored tallies of an
/// existing dataset, without re-simulation. Returns the re-analyzed
/// records and the output path.
pub fn cmd_analyze(
    dataset: &Path,
    cfg: &RunConfig,
    overrides: &AnalyzeOverrides,
    out: &Path,
) -> CliResult<(PathBuf, Vec<SessionRecord>)> {
    ensure_out_dir(out)?;
    let _meta = read_metadata(dataset)?;
    let input = read_records(dataset)?;
    let policy = overrides.policy.unwrap_or(cfg.policy);
    let options = overrides.options.unwrap_or(cfg.options);

    let mut records = Vec::with_capacity(input.len());
    for record in &input {
        let tally = record.tally()?;
        let analysis = analyze_tally(&tally, &cfg.source, &policy, &options)?;
        let mut updated = record.clone();
        updated.q_mu = analysis.rates.q_mu;
        updated.q_nu = analysis.rates.q_nu;
        updated.y0 = analysis.rates.y0;
        updated.e_mu = analysis.rates.e_mu;
        updated.e_nu = analysis.rates.e_nu;
        updated.q_nu_lower = analysis.bounds.q_nu_lower;
        updated.y0_upper = analysis.bounds.y0_upper;
        updated.y0_lower = analysis.bounds.y0_lower;
        updated.q1_lower = analysis.result.q1_lower;
        updated.e1_upper = analysis.result.e1_upper;
        updated.key_rate_bps = analysis.result.key_rate_bps;
        updated.secure_key_bits = analysis.result.secure_key_bits;
        updated.verdict = analysis.result.monitor_verdict.name().to_string();
        updated.q_sifting = analysis.result.q;
        records.push(updated);
    }

    let mut cfg_out = cfg.clone();
    cfg_out.policy = policy;
    cfg_out.options = options;
    let path = out.join("records_reanalyzed.csv");
    write_records(&path, &records)?;
    write_metadata(&path, &RunMetadata::for_run(&cfg_out, "analyze"))?;
    Ok((path, records))
}

/// Sweep outcome: emitted curve path plus any zero-rate crossings found,
/// keyed by variant name.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub curve_path: PathBuf,
    pub crossings: Vec<(String, f64)>,
}

pub fn cmd_sweep(
    cfg: &RunConfig,
    variable: SweepVariable,
    start: f64,
    stop: f64,
    points: usize,
    out: &Path,
) -> CliResult<SweepOutcome> {
    ensure_out_dir(out)?;
    let curve = sweep_curve(cfg, variable, start, stop, points)?;

    let path = out.join(format!("sweep_{}.csv", variable.name()));
    let mut writer = csv::Writer::from_path(&path)
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    for point in &curve {
        writer
            .serialize(point)
            .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::from_io("flushing curve", e))?;
    write_metadata(&path, &RunMetadata::for_run(cfg, "sweep"))?;

    // refine the zero-rate boundary of each emitted curve
    let mut crossings = Vec::new();
    match variable {
        SweepVariable::RatioQnuQmu => {
            if let Some(x) = find_zero_crossing(
                |x| rate_at_ratio(cfg, x, &cfg.options),
                start,
                stop,
                true,
            )? {
                crossings.push((cfg.options.variant.name().to_string(), x));
            }
        }
        SweepVariable::Y0 => {
            let single = AnalysisOptions {
                variant: decoy_qkd::security::ProtocolVariant::SingleDecoy,
                ..cfg.options
            };
            for options in [&cfg.options, &single] {
                if let Some(x) =
                    find_zero_crossing(|x| rate_at_y0(cfg, x, options), start, stop, false)?
                {
                    crossings.push((options.variant.name().to_string(), x));
                }
            }
        }
        SweepVariable::Distance => {}
    }
    Ok(SweepOutcome {
        curve_path: path,
        crossings,
    })
}

/// Optimization report: best parameters under the configured statistics
/// plus an asymptotic (zero-width bounds) section for comparison.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OptimizeReport {
    pub variant: String,
    pub finite_statistics: OptimizeSectionReport,
    pub asymptotic: OptimizeSectionReport,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct OptimizeSectionReport {
    pub mu: f64,
    pub nu: f64,
    pub p_signal: f64,
    pub p_decoy: f64,
    pub p_vacuum: f64,
    pub key_rate_bps: f64,
    pub evaluations: usize,
}

pub fn cmd_optimize(cfg: &RunConfig, out: &Path) -> CliResult<(PathBuf, OptimizeReport)> {
    ensure_out_dir(out)?;
    let spec = cfg.optimization_spec()?;
    let finite = optimize(&spec)?;

    let mut asym_spec = spec.clone();
    asym_spec.policy = BoundPolicy::new(0.0, cfg.policy.estimator)?;
    let asym = optimize(&asym_spec)?;

    let section = |out: &decoy_qkd::optimizer::OptimizationOutcome| OptimizeSectionReport {
        mu: out.best.mu,
        nu: out.best.nu,
        p_signal: out.best.p_signal(),
        p_decoy: out.best.p_decoy,
        p_vacuum: out.best.p_vacuum,
        key_rate_bps: out.key_rate_bps,
        evaluations: out.trace.len(),
    };
    let report = OptimizeReport {
        variant: cfg.options.variant.name().to_string(),
        finite_statistics: section(&finite),
        asymptotic: section(&asym),
    };

    let report_path = out.join("optimize_report.toml");
    let text = toml::to_string_pretty(&report)
        .map_err(|e| CliError::runtime(format!("serializing report: {e}")))?;
    std::fs::write(&report_path, text).map_err(|e| CliError::from_io("writing report", e))?;

    // full audit trace of the finite-statistics search
    let trace_path = out.join("optimize_trace.csv");
    let mut writer = csv::Writer::from_path(&trace_path)
        .map_err(|e| CliError::io(format!("writing {}: {e}", trace_path.display())))?;
    #[derive(serde::Serialize)]
    struct TraceRow {
        level: usize,
        mu: f64,
        nu: f64,
        p_decoy: f64,
        p_vacuum: f64,
        key_rate_bps: f64,
    }
    for tp in &finite.trace {
        writer
            .serialize(TraceRow {
                level: tp.level,
                mu: tp.params.mu,
                nu: tp.params.nu,
                p_decoy: tp.params.p_decoy,
                p_vacuum: tp.params.p_vacuum,
                key_rate_bps: tp.key_rate_bps,
            })
            .map_err(|e| CliError::io(format!("writing {}: {e}", trace_path.display())))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::from_io("flushing trace", e))?;
    write_metadata(&report_path, &RunMetadata::for_run(cfg, "optimize"))?;

    Ok((report_path, report))
}
