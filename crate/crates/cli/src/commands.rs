use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nettrust::density::DEFAULT_GRID_POINTS;
use nettrust::report::{render_density_plot, render_spectrum_plot, SpectrumOrdering};
use nettrust::{
    compare_models, estimate_density, group_by_scenario, integrate_density, load_run_manifest,
    model_summary, parse_records, score_all, trust_spectrum, ComparisonTable, Grouping,
    InputFormat, RecordSet, TrustDensity, TrustParams, Weighting,
};

/// Trust quantification for classifier prediction dumps.
#[derive(Debug, Parser)]
#[command(name = "nettrust", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// NetTrustScore, accuracy and expected confidences for one run.
    Score {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Per-scenario trust spectrum for one run.
    Spectrum {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Per-scenario trust densities for one run.
    Density {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Evaluation grid size on [0, 1].
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid_points: usize,
        /// Only estimate the density of this answer scenario.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Rank several runs listed in a manifest.
    Compare {
        /// JSON array of {"model_name", "path"} objects.
        #[arg(long)]
        manifest: PathBuf,
        /// Input format of every run; guessed from each file's extension when omitted.
        #[arg(long)]
        format: Option<FormatArg>,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Prediction dump (CSV or JSONL).
    #[arg(long)]
    input: PathBuf,
    /// Input format; guessed from the file extension when omitted.
    #[arg(long)]
    format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Reward exponent for correct answers.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Penalty exponent for incorrect answers.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Kernel constant; density bandwidth is gamma / sqrt(N).
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Label that defines a record's answer scenario.
    #[arg(long, value_enum, default_value_t = GroupingArg::Predicted)]
    grouping: GroupingArg,
    /// Scenario weighting for NetTrustScore.
    #[arg(long, value_enum, default_value_t = WeightingArg::Empirical)]
    weighting: WeightingArg,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Directory receiving all artifacts; created if missing.
    #[arg(long, default_value = "nettrust-out")]
    out_dir: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    emit_plots: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    report_format: ReportFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GroupingArg {
    Predicted,
    Oracle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Empirical,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

impl ReportFormat {
    fn extension(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Text => "txt",
        }
    }
}

impl MetricArgs {
    fn params(&self) -> Result<TrustParams> {
        let grouping = match self.grouping {
            GroupingArg::Predicted => Grouping::Predicted,
            GroupingArg::Oracle => Grouping::Oracle,
        };
        let weighting = match self.weighting {
            WeightingArg::Empirical => Weighting::Empirical,
            WeightingArg::Uniform => Weighting::Uniform,
        };
        Ok(TrustParams::new(
            self.alpha, self.beta, self.gamma, grouping, weighting,
        )?)
    }
}

fn resolve_format(path: &Path, explicit: Option<FormatArg>) -> Result<InputFormat> {
    match explicit {
        Some(FormatArg::Csv) => Ok(InputFormat::Csv),
        Some(FormatArg::Jsonl) => Ok(InputFormat::Jsonl),
        None => InputFormat::from_path(path).with_context(|| {
            format!(
                "cannot infer the format of {}; pass --format csv|jsonl",
                path.display()
            )
        }),
    }
}

fn load_records(path: &Path, format: Option<FormatArg>, model_name: &str) -> Result<RecordSet> {
    let format = resolve_format(path, format)?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_records(BufReader::new(file), format, model_name)
        .with_context(|| format!("ingest: {}", path.display()))
}

fn model_name_of(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string()
}

struct Outputs<'a> {
    args: &'a OutputArgs,
    written: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn new(args: &'a OutputArgs) -> Result<Self> {
        fs::create_dir_all(&args.out_dir)
            .with_context(|| format!("creating {}", args.out_dir.display()))?;
        Ok(Self {
            args,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.args.out_dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }
}

fn table_bytes(table: &ComparisonTable, format: ReportFormat) -> Result<Vec<u8>> {
    Ok(match format {
        ReportFormat::Json => {
            let mut s = table.to_json()?;
            s.push('\n');
            s.into_bytes()
        }
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            buf
        }
        ReportFormat::Text => table.to_text().into_bytes(),
    })
}

/// Executes one subcommand and returns the paths it wrote.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Score {
            input,
            metric,
            output,
        } => {
            let params = metric.params()?;
            let rs = load_records(&input.input, input.format, &model_name_of(&input.input))?;
            let summary = model_summary(&rs, &params).context("score")?;
            let mut out = Outputs::new(&output)?;
            let bytes = match output.report_format {
                ReportFormat::Json => {
                    let mut s = summary.to_json()?;
                    s.push('\n');
                    s.into_bytes()
                }
                other => table_bytes(&compare_models(&[summary])?, other)?,
            };
            out.write(
                &format!("summary.{}", output.report_format.extension()),
                bytes,
            )?;
            Ok(out.written)
        }
        Command::Spectrum {
            input,
            metric,
            output,
        } => {
            let params = metric.params()?;
            let rs = load_records(&input.input, input.format, &model_name_of(&input.input))?;
            let scored = score_all(&rs, &params).context("spectrum")?;
            let spectrum =
                trust_spectrum(rs.model_name(), &scored, params.grouping).context("spectrum")?;
            let mut out = Outputs::new(&output)?;
            let bytes = match output.report_format {
                ReportFormat::Json => {
                    let mut s = serde_json::to_string_pretty(&spectrum)?;
                    s.push('\n');
                    s.into_bytes()
                }
                ReportFormat::Csv => {
                    let mut buf = Vec::new();
                    spectrum.write_csv(&mut buf)?;
                    buf
                }
                ReportFormat::Text => {
                    let width = spectrum
                        .coefficients
                        .iter()
                        .map(|c| c.scenario.chars().count())
                        .max()
                        .unwrap_or(0)
                        .max("scenario".len());
                    let mut s = format!(
                        "{:<width$}  {:>11}  {:>7}\n",
                        "scenario", "coefficient", "count"
                    );
                    for c in &spectrum.coefficients {
                        s.push_str(&format!(
                            "{:<width$}  {:>11.3}  {:>7}\n",
                            c.scenario, c.coefficient, c.count
                        ));
                    }
                    s.into_bytes()
                }
            };
            out.write(
                &format!("spectrum.{}", output.report_format.extension()),
                bytes,
            )?;
            if output.emit_plots {
                let svg = render_spectrum_plot(&[spectrum], SpectrumOrdering::ByFirstModel)?;
                out.write("spectrum.svg", svg)?;
            }
            Ok(out.written)
        }
        Command::Density {
            input,
            metric,
            output,
            grid_points,
            scenario,
        } => {
            let params = metric.params()?;
            let rs = load_records(&input.input, input.format, &model_name_of(&input.input))?;
            let densities = densities(&rs, &params, grid_points, scenario.as_deref())?;
            let mut out = Outputs::new(&output)?;
            match output.report_format {
                ReportFormat::Json => {
                    let mut s = serde_json::to_string_pretty(&densities)?;
                    s.push('\n');
                    out.write("densities.json", s)?;
                }
                ReportFormat::Csv => {
                    for (i, d) in densities.iter().enumerate() {
                        let mut buf = Vec::new();
                        d.write_csv(&mut buf)?;
                        out.write(
                            &format!("density-{i:03}-{}.csv", slug(&d.scenario_label)),
                            buf,
                        )?;
                    }
                }
                ReportFormat::Text => {
                    let mut s = String::from("scenario\tsamples\tbandwidth\tintegral\n");
                    for d in &densities {
                        s.push_str(&format!(
                            "{}\t{}\t{:.6}\t{:.6}\n",
                            d.scenario_label,
                            d.sample_count,
                            d.bandwidth,
                            integrate_density(d)
                        ));
                    }
                    out.write("densities.txt", s)?;
                }
            }
            if output.emit_plots {
                out.write("density.svg", render_density_plot(&densities, false)?)?;
            }
            Ok(out.written)
        }
        Command::Compare {
            manifest,
            format,
            metric,
            output,
        } => {
            let params = metric.params()?;
            let runs = load_run_manifest(&manifest)?;
            let mut summaries = Vec::with_capacity(runs.len());
            let mut spectra = Vec::with_capacity(runs.len());
            for run in &runs {
                let rs = load_records(&run.path, format, &run.model_name)?;
                summaries.push(
                    model_summary(&rs, &params)
                        .with_context(|| format!("score `{}`", run.model_name))?,
                );
                let scored = score_all(&rs, &params)?;
                spectra.push(trust_spectrum(&run.model_name, &scored, params.grouping)?);
            }
            let table = compare_models(&summaries).context("compare")?;
            let mut out = Outputs::new(&output)?;
            out.write(
                &format!("comparison.{}", output.report_format.extension()),
                table_bytes(&table, output.report_format)?,
            )?;
            if output.emit_plots {
                let svg = render_spectrum_plot(&spectra, SpectrumOrdering::ByFirstModel)?;
                out.write("spectra.svg", svg)?;
            }
            Ok(out.written)
        }
    }
}

fn densities(
    rs: &RecordSet,
    params: &TrustParams,
    grid_points: usize,
    scenario: Option<&str>,
) -> Result<Vec<TrustDensity>> {
    let scored = score_all(rs, params).context("density")?;
    let groups = group_by_scenario(&scored, params.grouping).context("density")?;
    let selected: Vec<_> = match scenario {
        Some(label) => groups
            .into_iter()
            .filter(|g| g.scenario_label == label)
            .collect(),
        None => groups,
    };
    if selected.is_empty() {
        bail!(
            "density: scenario `{}` has no members",
            scenario.unwrap_or_default()
        );
    }
    selected
        .iter()
        .map(|g| {
            let samples: Vec<f64> = g.members.iter().map(|m| m.qa_trust).collect();
            let d = estimate_density(
                g.scenario_label.clone(),
                &samples,
                params.gamma,
                grid_points,
            )
            .with_context(|| format!("density for scenario `{}`", g.scenario_label))?;
            Ok(d.with_model_name(rs.model_name()))
        })
        .collect()
}

fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .take(48)
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}
