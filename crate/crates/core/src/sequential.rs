//! Sequential monitoring of the effect inclusion Bayes factor.
//!
//! At each look the data are administratively censored at the look time and the whole
//! ensemble is refitted from scratch. Monitoring stops at the first look whose evidence
//! crosses a decision threshold.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::ensemble::{fit_ensemble, EnsembleResult};
use crate::error::{Error, Result};
use crate::families::{FamilyKind, SurvivalDataset, SurvivalRecord};
use crate::priors::ModelSpec;
use crate::sampler::SamplerSettings;
use crate::seeding::derive_seed;

/// Default spacing of looks in days.
pub const DEFAULT_INTERVAL: f64 = 30.0;

/// Design-analysis truncation bound: trajectories stop once BF10 leaves [1/15, 15].
pub const BFDA_TRUNCATION: f64 = 15.0;

const RETRY_TAG: u64 = 0x5E7_2E7;

/// Censors every record at `tau`: t' = min(t, tau), and the event survives only if t <= tau.
pub fn censor_at(data: &SurvivalDataset, tau: f64) -> Result<SurvivalDataset> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("censoring time must be positive, got {tau}")));
    }
    Ok(data
        .records()
        .iter()
        .map(|r| SurvivalRecord { time: r.time.min(tau), event: r.event && r.time <= tau, treated: r.treated })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LookSchedule {
    #[serde(default = "default_interval")]
    pub interval: f64,
    pub horizon: f64,
}

fn default_interval() -> f64 {
    DEFAULT_INTERVAL
}

impl LookSchedule {
    pub fn new(interval: f64, horizon: f64) -> Result<Self> {
        let s = Self { interval, horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.interval > 0.0 && self.interval.is_finite() && self.horizon.is_finite()) {
            return Err(Error::Config(format!("look interval must be positive and finite, got {}", self.interval)));
        }
        if !(self.interval <= self.horizon) {
            return Err(Error::Config(format!(
                "look interval {} exceeds horizon {}",
                self.interval, self.horizon
            )));
        }
        Ok(())
    }

    /// Multiples of the interval up to the horizon, ending exactly at the horizon.
    pub fn look_times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 1u32;
        loop {
            let t = self.interval * k as f64;
            if t >= self.horizon * (1.0 - 1e-12) {
                break;
            }
            out.push(t);
            k += 1;
        }
        out.push(self.horizon);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionThresholds {
    pub bf10_upper: f64,
    pub bf01_upper: f64,
}

impl DecisionThresholds {
    pub const NEVER: Self = Self { bf10_upper: f64::INFINITY, bf01_upper: f64::INFINITY };

    pub fn validate(&self) -> Result<()> {
        if !(self.bf10_upper > 1.0 && self.bf01_upper > 1.0) {
            return Err(Error::Config(format!(
                "decision thresholds must exceed 1, got ({}, {})",
                self.bf10_upper, self.bf01_upper
            )));
        }
        Ok(())
    }

    /// `Undecided` when neither threshold is reached.
    pub fn decide(&self, bf10: f64) -> Decision {
        if bf10 >= self.bf10_upper {
            Decision::AcceptH1
        } else if 1.0 / bf10 >= self.bf01_upper {
            Decision::AcceptH0
        } else {
            Decision::Undecided
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    AcceptH1,
    AcceptH0,
    Undecided,
}

impl Decision {
    pub fn flag(&self) -> &'static str {
        match self {
            Decision::AcceptH1 => "accept_h1",
            Decision::AcceptH0 => "accept_h0",
            Decision::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceTrajectory {
    pub look_times: Vec<f64>,
    pub bf10: Vec<f64>,
    /// One row per look, families in canonical order.
    pub posterior_family_probs: Vec<[f64; 5]>,
    pub decision: Decision,
    pub decision_time: Option<f64>,
    /// Looks whose fit failed twice; excluded from the vectors above.
    pub failed_looks: Vec<f64>,
    /// True when the trajectory was cut at the design-analysis truncation bound.
    pub truncated: bool,
}

impl EvidenceTrajectory {
    pub fn len(&self) -> usize {
        self.look_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.look_times.is_empty()
    }

    /// First look at which `thresholds` would have stopped this trajectory.
    pub fn first_crossing(&self, thresholds: &DecisionThresholds) -> Option<(Decision, f64)> {
        self.bf10.iter().zip(&self.look_times).find_map(|(&bf, &t)| match thresholds.decide(bf) {
            Decision::Undecided => None,
            d => Some((d, t)),
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "look_time_days,bf10")?;
        for f in FamilyKind::ALL {
            write!(out, ",prob_{}", f.name())?;
        }
        writeln!(out, ",decision_flag")?;
        let last = self.len().saturating_sub(1);
        for i in 0..self.len() {
            write!(out, "{},{}", self.look_times[i], self.bf10[i])?;
            for p in &self.posterior_family_probs[i] {
                write!(out, ",{p}")?;
            }
            let flag = if i == last { self.decision.flag() } else { "continue" };
            writeln!(out, ",{flag}")?;
        }
        Ok(())
    }
}

/// Seed used for the ensemble fit at look `k` (zero-based).
pub fn look_seed(master: u64, k: usize) -> u64 {
    derive_seed(master, &[k as u64])
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MonitorOptions {
    /// Stop once BF10 >= bound or <= 1/bound, independent of the decision thresholds.
    pub truncate: Option<f64>,
}

/// Sequential analysis with the master seed taken from `settings.seed`.
pub fn run_sequential(
    data: &SurvivalDataset,
    models: &[ModelSpec],
    schedule: &LookSchedule,
    thresholds: &DecisionThresholds,
    settings: &SamplerSettings,
) -> Result<EvidenceTrajectory> {
    run_sequential_with(data, models, schedule, thresholds, settings, MonitorOptions::default(), |_, _, _| {})
}

/// As [`run_sequential`] with truncation and a per-look callback `(look index, time, result)`.
pub fn run_sequential_with<F>(
    data: &SurvivalDataset,
    models: &[ModelSpec],
    schedule: &LookSchedule,
    thresholds: &DecisionThresholds,
    settings: &SamplerSettings,
    options: MonitorOptions,
    mut on_look: F,
) -> Result<EvidenceTrajectory>
where
    F: FnMut(usize, f64, &EnsembleResult),
{
    schedule.validate()?;
    thresholds.validate()?;
    settings.validate()?;
    crate::ensemble::validate_ensemble(models)?;
    if !models.iter().any(|m| m.is_null()) || models.iter().all(|m| m.is_null()) {
        return Err(Error::Config("sequential monitoring needs both null and effect models".into()));
    }
    let master = settings.seed;
    let mut traj = EvidenceTrajectory {
        look_times: Vec::new(),
        bf10: Vec::new(),
        posterior_family_probs: Vec::new(),
        decision: Decision::Undecided,
        decision_time: None,
        failed_looks: Vec::new(),
        truncated: false,
    };
    for (k, tau) in schedule.look_times().into_iter().enumerate() {
        let censored = censor_at(data, tau)?;
        let seed = look_seed(master, k);
        let result = match fit_ensemble(models, &censored, settings, seed) {
            Ok(r) => r,
            Err(e) if e.is_numerical() => {
                warn!("look at {tau} days failed ({e}); retrying");
                match fit_ensemble(models, &censored, settings, derive_seed(seed, &[RETRY_TAG])) {
                    Ok(r) => r,
                    Err(e) if e.is_numerical() => {
                        warn!("look at {tau} days skipped ({e})");
                        traj.failed_looks.push(tau);
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(e) => return Err(e),
        };
        on_look(k, tau, &result);
        let bf = result.inclusion_bf_effect.expect("ensemble has null and effect models").value;
        traj.look_times.push(tau);
        traj.bf10.push(bf);
        traj.posterior_family_probs.push(result.family_probs());
        let d = thresholds.decide(bf);
        if d != Decision::Undecided {
            traj.decision = d;
            traj.decision_time = Some(tau);
            break;
        }
        if let Some(b) = options.truncate {
            if bf >= b || bf <= 1.0 / b {
                traj.truncated = true;
                break;
            }
        }
    }
    Ok(traj)
}
