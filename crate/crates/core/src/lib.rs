//! Trust quantification for classifiers, computed from exported prediction
//! records rather than live models.
//!
//! The pipeline is:
//!
//! 1. [`ingest`] parses CSV/JSONL prediction dumps into a [`RecordSet`].
//! 2. [`trust`] scores every record with its question-answer trust and
//!    computes correctness fractions and expected confidences.
//! 3. [`spectrum`] groups scored records by answer scenario into a trust
//!    spectrum and collapses it into the scalar NetTrustScore.
//! 4. [`density`] estimates per-scenario trust densities with a reflected
//!    Gaussian KDE.
//! 5. [`report`] assembles per-model summaries, comparison tables and SVG plots.

pub mod density;
pub mod ingest;
pub mod report;
pub mod spectrum;
pub mod trust;

mod numeric;

pub use density::{bandwidth, estimate_density, integrate_density, DensityError, TrustDensity};
pub use ingest::{
    derive_confidence, load_run_manifest, parse_records, write_records, IngestError, InputFormat,
    PredictionRecord, RecordSet, RunEntry,
};
pub use report::{compare_models, model_summary, ComparisonTable, ModelTrustSummary, ReportError};
pub use spectrum::{
    group_by_scenario, net_trust_score, spectrum_coefficient, trust_spectrum, ScenarioCoefficient,
    ScenarioGroup, SpectrumError, TrustSpectrum,
};
pub use trust::{
    accuracy_fractions, expected_confidence_correct, expected_confidence_incorrect, partition,
    question_answer_trust, score_all, Grouping, ScoredRecord, TrustError, TrustParams, Weighting,
};
