//! Many seeded runs of one design on one substrate, aggregated into the
//! numbers a designer actually compares: how often the illegal states were
//! hit, how runs ended, and what durations the substrate produced.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::speclang::{validate, SwarmSpec};

use super::engine::run_prepared;
use super::log::{ObservedRow, Termination};
use super::sampler::Obs;
use super::{CampaignConfig, SimConfig, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub profile: String,
    pub runs: u32,
    pub seed0: u64,
    pub horizon_ms: f64,
    /// Runs in which at least one illegal-state predicate fired.
    pub incident_runs: u32,
    pub incident_rate: f64,
    pub total_incidents: u64,
    /// The first seed that produced an incident, for replaying a single
    /// faulty run in full detail.
    pub first_incident_seed: Option<u64>,
    pub deadlocked_runs: u32,
    pub horizon_runs: u32,
    pub completed_runs: u32,
    pub observed: Vec<ObservedRow>,
}

/// Runs `cfg.runs` simulations with consecutive seeds starting at
/// `cfg.seed0` and aggregates them.
pub fn run_campaign(spec: &SwarmSpec, cfg: &CampaignConfig) -> Result<CampaignReport, SimError> {
    validate(spec)?;
    let mut report = CampaignReport {
        profile: cfg.profile.clone(),
        runs: cfg.runs,
        seed0: cfg.seed0,
        horizon_ms: cfg.horizon_ms,
        incident_runs: 0,
        incident_rate: 0.0,
        total_incidents: 0,
        first_incident_seed: None,
        deadlocked_runs: 0,
        horizon_runs: 0,
        completed_runs: 0,
        observed: Vec::new(),
    };
    let mut observed: BTreeMap<(String, String), Obs> = BTreeMap::new();
    for i in 0..cfg.runs {
        let seed = cfg.seed0.wrapping_add(i as u64);
        let log = run_prepared(
            spec,
            &SimConfig { profile: cfg.profile.clone(), horizon_ms: cfg.horizon_ms, seed },
        )?;
        if !log.incidents.is_empty() {
            report.incident_runs += 1;
            report.total_incidents += log.incidents.len() as u64;
            report.first_incident_seed.get_or_insert(seed);
        }
        match log.terminated {
            Termination::Completed => report.completed_runs += 1,
            Termination::Deadlocked => report.deadlocked_runs += 1,
            Termination::HorizonReached => report.horizon_runs += 1,
        }
        for row in log.observed {
            observed.entry((row.from, row.to)).or_default().merge(&Obs {
                n: row.samples,
                mean: row.mean_ms,
                min: row.min_ms,
                max: row.max_ms,
            });
        }
    }
    if cfg.runs > 0 {
        report.incident_rate = f64::from(report.incident_runs) / f64::from(cfg.runs);
    }
    report.observed = observed
        .into_iter()
        .map(|((from, to), o)| ObservedRow {
            from,
            to,
            samples: o.n,
            mean_ms: o.mean,
            min_ms: o.min,
            max_ms: o.max,
        })
        .collect();
    Ok(report)
}
