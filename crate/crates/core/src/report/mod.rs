//! Per-model summaries, multi-model comparison tables and static plots.
//!
//! Numbers are kept at full precision in JSON and CSV. Only the text table and
//! plots round: 3 decimals for scores and confidences, 1 decimal for
//! percentages.

mod plot;

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::RecordSet;
use crate::spectrum::{net_trust_score, trust_spectrum, SpectrumError};
use crate::trust::{
    accuracy_fractions, expected_confidence_correct, expected_confidence_incorrect, score_all,
    TrustError, TrustParams, Weighting,
};

pub use plot::{render_density_plot, render_spectrum_plot, SpectrumOrdering};

/// Tolerance for the internal consistency checks run before a summary is emitted.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("nothing to compare: no summaries given")]
    NoSummaries,
    #[error("parameter `{param}` differs between `{first_model}` ({first}) and `{other_model}` ({other})")]
    ParamsMismatch {
        param: &'static str,
        first_model: String,
        first: String,
        other_model: String,
        other: String,
    },
    #[error("summary for `{model}` is inconsistent: {message}")]
    Inconsistent { model: String, message: String },
    #[error("nothing to plot")]
    EmptyPlot,
    #[error(
        "density for scenario `{found}` cannot be overlaid on scenario `{expected}` in strict mode"
    )]
    ScenarioMismatch { expected: String, found: String },
    #[error("serialization failed: {0}")]
    Serialize(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// One row of the model comparison: NetTrustScore plus the correctness
/// fractions and expected confidences it decomposes into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTrustSummary {
    pub model_name: String,
    pub net_trust_score: f64,
    pub n_correct_frac: f64,
    pub expected_confidence_correct: Option<f64>,
    pub n_incorrect_frac: f64,
    pub expected_confidence_incorrect: Option<f64>,
    pub record_count: usize,
    pub params: TrustParams,
}

impl ModelTrustSummary {
    /// Checks the fraction sum and, for linear exponents with empirical
    /// weighting, that the score equals its correct/incorrect decomposition.
    pub fn check_consistency(&self) -> Result<(), ReportError> {
        let fail = |message: String| ReportError::Inconsistent {
            model: self.model_name.clone(),
            message,
        };
        let frac_sum = self.n_correct_frac + self.n_incorrect_frac;
        if (frac_sum - 1.0).abs() > CONSISTENCY_TOLERANCE {
            return Err(fail(format!("answer fractions sum to {frac_sum}")));
        }
        if self.params.is_linear() && self.params.weighting == Weighting::Empirical {
            let decomposed = self.n_correct_frac * self.expected_confidence_correct.unwrap_or(0.0)
                + self.n_incorrect_frac
                    * self.expected_confidence_incorrect.map_or(0.0, |c| 1.0 - c);
            if (decomposed - self.net_trust_score).abs() > CONSISTENCY_TOLERANCE {
                return Err(fail(format!(
                    "NetTrustScore {} does not match its decomposition {decomposed}",
                    self.net_trust_score
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        serde_json::to_string_pretty(self).map_err(|e| ReportError::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        serde_json::from_str(text).map_err(|e| ReportError::Serialize(e.to_string()))
    }
}

/// Computes the summary row for one record set.
pub fn model_summary(
    rs: &RecordSet,
    params: &TrustParams,
) -> Result<ModelTrustSummary, ReportError> {
    let scored = score_all(rs, params)?;
    let spectrum = trust_spectrum(rs.model_name(), &scored, params.grouping)?;
    let (n_correct_frac, n_incorrect_frac) = accuracy_fractions(rs)?;
    let summary = ModelTrustSummary {
        model_name: rs.model_name().to_string(),
        net_trust_score: net_trust_score(&spectrum, params.weighting)?,
        n_correct_frac,
        expected_confidence_correct: expected_confidence_correct(rs),
        n_incorrect_frac,
        expected_confidence_incorrect: expected_confidence_incorrect(rs),
        record_count: rs.len(),
        params: *params,
    };
    summary.check_consistency()?;
    Ok(summary)
}

/// Short stable fingerprint of a parameter set.
pub fn params_hash(params: &TrustParams) -> String {
    let canonical = format!(
        "alpha={:e};beta={:e};gamma={:e};grouping={};weighting={}",
        params.alpha, params.beta, params.gamma, params.grouping, params.weighting
    );
    let digest = Sha256::digest(canonical.as_bytes());
    digest[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn first_param_difference(
    a: &TrustParams,
    b: &TrustParams,
) -> Option<(&'static str, String, String)> {
    if a.alpha != b.alpha {
        return Some(("alpha", a.alpha.to_string(), b.alpha.to_string()));
    }
    if a.beta != b.beta {
        return Some(("beta", a.beta.to_string(), b.beta.to_string()));
    }
    if a.gamma != b.gamma {
        return Some(("gamma", a.gamma.to_string(), b.gamma.to_string()));
    }
    if a.grouping != b.grouping {
        return Some(("grouping", a.grouping.to_string(), b.grouping.to_string()));
    }
    if a.weighting != b.weighting {
        return Some((
            "weighting",
            a.weighting.to_string(),
            b.weighting.to_string(),
        ));
    }
    None
}

/// Models ranked by NetTrustScore, all computed under the same parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub params: TrustParams,
    pub params_hash: String,
    pub rows: Vec<ModelTrustSummary>,
}

/// Ranks summaries by NetTrustScore, highest first. Ties keep name order.
pub fn compare_models(summaries: &[ModelTrustSummary]) -> Result<ComparisonTable, ReportError> {
    let first = summaries.first().ok_or(ReportError::NoSummaries)?;
    for s in &summaries[1..] {
        if let Some((param, a, b)) = first_param_difference(&first.params, &s.params) {
            return Err(ReportError::ParamsMismatch {
                param,
                first_model: first.model_name.clone(),
                first: a,
                other_model: s.model_name.clone(),
                other: b,
            });
        }
    }
    for s in summaries {
        s.check_consistency()?;
    }
    let mut rows = summaries.to_vec();
    rows.sort_by(|a, b| {
        b.net_trust_score
            .total_cmp(&a.net_trust_score)
            .then_with(|| a.model_name.cmp(&b.model_name))
    });
    Ok(ComparisonTable {
        params: first.params,
        params_hash: params_hash(&first.params),
        rows,
    })
}

fn fmt_score(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

fn fmt_percent(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

impl ComparisonTable {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), ReportError> {
        let mut w = csv::Writer::from_writer(sink);
        let io = |e: csv::Error| ReportError::Serialize(e.to_string());
        w.write_record([
            "model",
            "net_trust_score",
            "n_correct",
            "ec_correct",
            "n_incorrect",
            "ec_incorrect",
            "params_hash",
        ])
        .map_err(io)?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        for r in &self.rows {
            w.write_record([
                r.model_name.clone(),
                r.net_trust_score.to_string(),
                r.n_correct_frac.to_string(),
                opt(r.expected_confidence_correct),
                r.n_incorrect_frac.to_string(),
                opt(r.expected_confidence_incorrect),
                self.params_hash.clone(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        serde_json::to_string_pretty(self).map_err(|e| ReportError::Serialize(e.to_string()))
    }

    /// Aligned plain-text table at display precision.
    pub fn to_text(&self) -> String {
        let header = [
            "model",
            "NetTrustScore",
            "n(y=z)",
            "C(y=z)",
            "n(y!=z)",
            "C(y!=z)",
        ];
        let body: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.model_name.clone(),
                    fmt_score(Some(r.net_trust_score)),
                    fmt_percent(r.n_correct_frac),
                    fmt_score(r.expected_confidence_correct),
                    fmt_percent(r.n_incorrect_frac),
                    fmt_score(r.expected_confidence_incorrect),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[String]| {
            let mut text = String::new();
            for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
                if i == 0 {
                    let _ = write!(text, "{cell:<w$}");
                } else {
                    let _ = write!(text, "  {cell:>w$}");
                }
            }
            out.push_str(text.trim_end());
            out.push('\n');
        };
        line(&header.map(String::from));
        for row in &body {
            line(row);
        }
        let p = &self.params;
        let _ = writeln!(
            out,
            "\nalpha={} beta={} gamma={} grouping={} weighting={} ({})",
            p.alpha, p.beta, p.gamma, p.grouping, p.weighting, self.params_hash
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PredictionRecord;

    fn rec(id: &str, pred: &str, oracle: &str, c: f64) -> PredictionRecord {
        PredictionRecord::new(id, pred, oracle, c)
    }

    fn four_records() -> RecordSet {
        RecordSet::new(
            "m",
            vec![
                rec("a", "x", "x", 0.9),
                rec("b", "y", "y", 0.8),
                rec("c", "x", "x", 0.7),
                rec("d", "y", "x", 0.6),
            ],
        )
        .unwrap()
    }

    fn row(name: &str, tm: f64, nc: f64, cc: f64, ci: f64) -> ModelTrustSummary {
        ModelTrustSummary {
            model_name: name.into(),
            net_trust_score: tm,
            n_correct_frac: nc,
            expected_confidence_correct: Some(cc),
            n_incorrect_frac: 1.0 - nc,
            expected_confidence_incorrect: Some(ci),
            record_count: 1000,
            params: TrustParams::default(),
        }
    }

    #[test]
    fn four_record_summary() {
        let s = model_summary(&four_records(), &TrustParams::default()).unwrap();
        assert_eq!((s.n_correct_frac, s.n_incorrect_frac), (0.75, 0.25));
        assert!((s.expected_confidence_correct.unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(s.expected_confidence_incorrect, Some(0.6));
        let grand_mean = (0.9 + 0.8 + 0.7 + 0.4) / 4.0;
        assert!((s.net_trust_score - 0.7).abs() < 1e-15);
        assert!((s.net_trust_score - grand_mean).abs() < 1e-15);
        assert_eq!(s.record_count, 4);
    }

    #[test]
    fn all_correct_summary() {
        let rs =
            RecordSet::new("m", vec![rec("a", "x", "x", 1.0), rec("b", "y", "y", 1.0)]).unwrap();
        let s = model_summary(&rs, &TrustParams::default()).unwrap();
        assert_eq!(s.net_trust_score, 1.0);
        assert_eq!(s.expected_confidence_incorrect, None);
        assert!(s
            .to_json()
            .unwrap()
            .contains("\"expected_confidence_incorrect\": null"));
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mut s = model_summary(&four_records(), &TrustParams::default()).unwrap();
        s.net_trust_score = 0.1 + 0.2;
        s.params.gamma = 1.0 / 3.0;
        assert_eq!(
            ModelTrustSummary::from_json(&s.to_json().unwrap()).unwrap(),
            s
        );
    }

    #[test]
    fn inconsistent_summary_detected() {
        let mut s = row("m", 0.713, 0.645, 0.839, 0.515);
        s.net_trust_score = 0.9;
        assert!(matches!(
            s.check_consistency(),
            Err(ReportError::Inconsistent { .. })
        ));
        s.params.weighting = Weighting::Uniform;
        s.n_incorrect_frac = 0.5;
        assert!(s.check_consistency().is_err());
    }

    fn exact_row(name: &str, nc: f64, cc: f64, ci: f64) -> ModelTrustSummary {
        row(name, nc * cc + (1.0 - nc) * (1.0 - ci), nc, cc, ci)
    }

    #[test]
    fn comparison_sorts_descending() {
        let rows = vec![
            exact_row("MobileNet-V1", 0.645, 0.839, 0.515),
            exact_row("ShuffleNet-V2", 0.661, 0.839, 0.502),
            exact_row("MobileNet-V2", 0.687, 0.845, 0.493),
            exact_row("ResNet-50", 0.756, 0.887, 0.565),
        ];
        let table = compare_models(&rows).unwrap();
        let order: Vec<_> = table.rows.iter().map(|r| r.model_name.as_str()).collect();
        assert_eq!(
            order,
            ["ResNet-50", "MobileNet-V2", "ShuffleNet-V2", "MobileNet-V1"]
        );

        let text = table.to_text();
        assert!(text.contains("75.6%"), "{text}");
        assert!(text.contains("0.887"));
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with(
            "model,net_trust_score,n_correct,ec_correct,n_incorrect,ec_incorrect,params_hash\nResNet-50,"
        ));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn comparison_single_and_errors() {
        let one = compare_models(&[exact_row("a", 0.5, 0.5, 0.5)]).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert!(matches!(compare_models(&[]), Err(ReportError::NoSummaries)));

        let a = exact_row("a", 0.5, 0.5, 0.5);
        let mut b = exact_row("b", 0.5, 0.5, 0.5);
        b.params.alpha = 2.0;
        let err = compare_models(&[a, b]).unwrap_err();
        assert!(matches!(
            err,
            ReportError::ParamsMismatch { param: "alpha", .. }
        ));
        assert!(err.to_string().contains("alpha"));
    }

    #[test]
    fn params_hash_is_stable_and_discriminating() {
        let p = TrustParams::default();
        assert_eq!(params_hash(&p), params_hash(&p));
        assert_eq!(params_hash(&p).len(), 16);
        let q = TrustParams { beta: 2.0, ..p };
        assert_ne!(params_hash(&p), params_hash(&q));
    }
}
