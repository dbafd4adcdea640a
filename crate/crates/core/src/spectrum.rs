//! Trust spectrum and NetTrustScore.
//!
//! Records are grouped into answer scenarios (by predicted label by default).
//! Each scenario's coefficient is the mean question-answer trust of its
//! members, and NetTrustScore is the expectation of those coefficients under
//! a scenario weighting.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{mean, stable_sum};
use crate::trust::{Grouping, ScoredRecord, Weighting};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("no scored records to group")]
    NoRecords,
    #[error("scenario `{0}` has no members")]
    EmptyScenario(String),
    #[error("trust spectrum is empty")]
    EmptySpectrum,
}

/// The scored records answered as one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGroup {
    pub scenario_label: String,
    pub members: Vec<ScoredRecord>,
}

/// One spectrum coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCoefficient {
    pub scenario: String,
    pub coefficient: f64,
    pub count: usize,
}

/// Per-scenario trust coefficients of one model, sorted by scenario label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustSpectrum {
    pub model_name: String,
    pub coefficients: Vec<ScenarioCoefficient>,
}

impl TrustSpectrum {
    pub fn get(&self, scenario: &str) -> Option<&ScenarioCoefficient> {
        self.coefficients
            .binary_search_by(|c| c.scenario.as_str().cmp(scenario))
            .ok()
            .map(|i| &self.coefficients[i])
    }

    pub fn total_count(&self) -> usize {
        self.coefficients.iter().map(|c| c.count).sum()
    }

    /// Writes `scenario,coefficient,count` rows.
    pub fn write_csv<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut writer = csv::Writer::from_writer(sink);
        for row in &self.coefficients {
            writer.serialize(row)?;
        }
        if self.coefficients.is_empty() {
            writer.write_record(["scenario", "coefficient", "count"])?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn scenario_key(record: &ScoredRecord, grouping: Grouping) -> &str {
    match grouping {
        Grouping::Predicted => &record.record.predicted_label,
        Grouping::Oracle => &record.record.oracle_label,
    }
}

/// Partitions scored records into scenarios, ordered lexicographically by label.
pub fn group_by_scenario(
    scored: &[ScoredRecord],
    grouping: Grouping,
) -> Result<Vec<ScenarioGroup>, SpectrumError> {
    if scored.is_empty() {
        return Err(SpectrumError::NoRecords);
    }
    let mut groups: BTreeMap<&str, Vec<ScoredRecord>> = BTreeMap::new();
    for s in scored {
        groups
            .entry(scenario_key(s, grouping))
            .or_default()
            .push(s.clone());
    }
    Ok(groups
        .into_iter()
        .map(|(label, members)| ScenarioGroup {
            scenario_label: label.to_string(),
            members,
        })
        .collect())
}

/// Mean question-answer trust of a scenario's members.
pub fn spectrum_coefficient(group: &ScenarioGroup) -> Result<f64, SpectrumError> {
    mean(group.members.iter().map(|m| m.qa_trust))
        .ok_or_else(|| SpectrumError::EmptyScenario(group.scenario_label.clone()))
}

/// Builds the trust spectrum of `model_name` from its scored records.
pub fn trust_spectrum(
    model_name: impl Into<String>,
    scored: &[ScoredRecord],
    grouping: Grouping,
) -> Result<TrustSpectrum, SpectrumError> {
    let coefficients = group_by_scenario(scored, grouping)?
        .iter()
        .map(|g| {
            Ok(ScenarioCoefficient {
                scenario: g.scenario_label.clone(),
                coefficient: spectrum_coefficient(g)?,
                count: g.members.len(),
            })
        })
        .collect::<Result<Vec<_>, SpectrumError>>()?;
    Ok(TrustSpectrum {
        model_name: model_name.into(),
        coefficients,
    })
}

/// Collapses a spectrum to its NetTrustScore.
pub fn net_trust_score(
    spectrum: &TrustSpectrum,
    weighting: Weighting,
) -> Result<f64, SpectrumError> {
    let coeffs = &spectrum.coefficients;
    if coeffs.is_empty() {
        return Err(SpectrumError::EmptySpectrum);
    }
    let score = match weighting {
        // sum(n_z * T(z)) / N rather than sum((n_z / N) * T(z)): exact at the bounds
        Weighting::Empirical => {
            let total = spectrum.total_count() as f64;
            stable_sum(coeffs.iter().map(|c| c.count as f64 * c.coefficient)) / total
        }
        Weighting::Uniform => {
            stable_sum(coeffs.iter().map(|c| c.coefficient)) / coeffs.len() as f64
        }
    };
    Ok(score.clamp(0.0, 1.0))
}
