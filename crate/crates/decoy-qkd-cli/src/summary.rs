//! Campaign summary statistics, reported in the same style as the source
//! experiment: central values with two-standard-deviation session spreads.
//! The session spread is a descriptive statistic and is kept separate from
//! the k-sigma security widening.

use serde::Serialize;

use crate::records::SessionRecord;

#[derive(Debug, Clone, Serialize)]
pub struct SpreadStat {
    pub mean: f64,
    /// Two standard deviations of the session-to-session distribution.
    pub two_sigma: f64,
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> SpreadStat {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    SpreadStat {
        mean,
        two_sigma: 2.0 * var.sqrt(),
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignSummary {
    pub sessions: usize,
    pub key_rate_bps: SpreadStat,
    pub key_rate_p5: f64,
    pub key_rate_median: f64,
    pub key_rate_p95: f64,
    pub q_mu: SpreadStat,
    pub q_nu: SpreadStat,
    pub y0: SpreadStat,
    pub e_mu: SpreadStat,
    pub total_secure_bits: u64,
    pub clean: usize,
    pub ratio_alarms: usize,
    pub vacuum_alarms: usize,
    pub insecure_zero_rate: usize,
    pub spiked_sessions: usize,
}

impl CampaignSummary {
    pub fn from_records(records: &[SessionRecord]) -> Self {
        let mut rates: Vec<f64> = records.iter().map(|r| r.key_rate_bps).collect();
        rates.sort_by(|a, b| a.total_cmp(b));
        let count = |verdict: &str| records.iter().filter(|r| r.verdict == verdict).count();
        Self {
            sessions: records.len(),
            key_rate_bps: spread(records.iter().map(|r| r.key_rate_bps)),
            key_rate_p5: percentile(&rates, 0.05),
            key_rate_median: percentile(&rates, 0.5),
            key_rate_p95: percentile(&rates, 0.95),
            q_mu: spread(records.iter().map(|r| r.q_mu)),
            q_nu: spread(records.iter().map(|r| r.q_nu)),
            y0: spread(records.iter().map(|r| r.y0)),
            e_mu: spread(records.iter().map(|r| r.e_mu)),
            total_secure_bits: records.iter().map(|r| r.secure_key_bits).sum(),
            clean: count("clean"),
            ratio_alarms: count("ratio_alarm"),
            vacuum_alarms: count("vacuum_alarm"),
            insecure_zero_rate: count("insecure_zero_rate"),
            spiked_sessions: records.iter().filter(|r| r.spiked).count(),
        }
    }

    pub fn render(&self) -> String {
        format!(
            "sessions            {}\n\
             key rate            {:.1} bps (+/- {:.1} 2-sigma), p5 {:.1}, median {:.1}, p95 {:.1}\n\
             Q_mu                {:.5e} +/- {:.1e}\n\
             Q_nu                {:.5e} +/- {:.1e}\n\
             Y0                  {:.5e} +/- {:.1e}\n\
             E_mu                {:.4} +/- {:.1e}\n\
             secure bits total   {}\n\
             verdicts            clean {}, ratio alarms {}, vacuum alarms {}, zero-rate {}\n\
             spiked sessions     {}\n",
            self.sessions,
            self.key_rate_bps.mean,
            self.key_rate_bps.two_sigma,
            self.key_rate_p5,
            self.key_rate_median,
            self.key_rate_p95,
            self.q_mu.mean,
            self.q_mu.two_sigma,
            self.q_nu.mean,
            self.q_nu.two_sigma,
            self.y0.mean,
            self.y0.two_sigma,
            self.e_mu.mean,
            self.e_mu.two_sigma,
            self.total_secure_bits,
            self.clean,
            self.ratio_alarms,
            self.vacuum_alarms,
            self.insecure_zero_rate,
            self.spiked_sessions,
        )
    }
}
