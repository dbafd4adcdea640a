//! Standalone SVG rendering of trust spectra and trust densities.
//!
//! Output is a pure function of the input: coordinates are printed with a
//! fixed number of decimals and element order follows input order.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use super::ReportError;
use crate::density::TrustDensity;
use crate::spectrum::TrustSpectrum;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 110.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Order of scenarios along the x axis of a spectrum plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumOrdering {
    /// Ascending by the first model's coefficient; scenarios that model lacks
    /// follow in lexicographic order.
    #[default]
    ByFirstModel,
    Lexicographic,
}

impl FromStr for SpectrumOrdering {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "by_first_model" => Ok(Self::ByFirstModel),
            "lexicographic" => Ok(Self::Lexicographic),
            other => Err(format!(
                "unknown ordering `{other}` (expected by_first_model or lexicographic)"
            )),
        }
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_max: f64,
}

impl Frame {
    fn plot_width() -> f64 {
        WIDTH - LEFT - RIGHT
    }

    fn plot_height() -> f64 {
        HEIGHT - TOP - BOTTOM
    }

    fn x(&self, v: f64) -> f64 {
        let span = self.x_max - self.x_min;
        let rel = if span > 0.0 {
            (v - self.x_min) / span
        } else {
            0.5
        };
        LEFT + rel * Self::plot_width()
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (1.0 - v / self.y_max) * Self::plot_height()
    }
}

fn open_document(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + Frame::plot_width() / 2.0,
        escape(title)
    );
}

fn draw_axes(out: &mut String, frame: &Frame, y_label: &str, y_ticks: &[f64]) {
    let (x0, x1) = (LEFT, LEFT + Frame::plot_width());
    let (y0, y1) = (TOP, TOP + Frame::plot_height());
    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="1"><line x1="{x0:.2}" y1="{y1:.2}" x2="{x1:.2}" y2="{y1:.2}"/><line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/></g>"#
    );
    for &tick in y_ticks {
        let y = frame.y(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{tick:.2}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + Frame::plot_height() / 2.0,
        escape(y_label)
    );
}

fn draw_legend(out: &mut String, labels: &[String]) {
    let x = WIDTH - RIGHT + 15.0;
    for (i, label) in labels.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<g class="legend"><line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            escape(label)
        );
    }
}

fn draw_series(out: &mut String, points: &[(f64, f64)], color: &str, label: &str) {
    match points {
        [] => {}
        [(x, y)] => {
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"><title>{}</title></circle>"#,
                escape(label)
            );
        }
        _ => {
            let coords = points
                .iter()
                .map(|(x, y)| format!("{x:.2},{y:.2}"))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"><title>{}</title></polyline>"#,
                escape(label)
            );
        }
    }
}

fn scenario_axis(spectra: &[TrustSpectrum], ordering: SpectrumOrdering) -> Vec<String> {
    let all: BTreeSet<&str> = spectra
        .iter()
        .flat_map(|s| s.coefficients.iter().map(|c| c.scenario.as_str()))
        .collect();
    match ordering {
        SpectrumOrdering::Lexicographic => all.into_iter().map(String::from).collect(),
        SpectrumOrdering::ByFirstModel => {
            let mut first: Vec<_> = spectra[0].coefficients.iter().collect();
            first.sort_by(|a, b| {
                a.coefficient
                    .total_cmp(&b.coefficient)
                    .then_with(|| a.scenario.cmp(&b.scenario))
            });
            let mut axis: Vec<String> = first.iter().map(|c| c.scenario.clone()).collect();
            let present: BTreeSet<&str> = first.iter().map(|c| c.scenario.as_str()).collect();
            axis.extend(all.difference(&present).map(|s| s.to_string()));
            axis
        }
    }
}

/// One line per model over the scenario axis, trust on `[0, 1]`.
pub fn render_spectrum_plot(
    spectra: &[TrustSpectrum],
    ordering: SpectrumOrdering,
) -> Result<String, ReportError> {
    if spectra.is_empty() || spectra.iter().all(|s| s.coefficients.is_empty()) {
        return Err(ReportError::EmptyPlot);
    }
    let axis = scenario_axis(spectra, ordering);
    let frame = Frame {
        x_min: 0.0,
        x_max: (axis.len().max(1) - 1) as f64,
        y_max: 1.0,
    };

    let mut out = String::new();
    open_document(&mut out, "Trust spectrum");
    draw_axes(
        &mut out,
        &frame,
        "trust spectrum coefficient",
        &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
    );
    let base = TOP + Frame::plot_height();
    for (i, scenario) in axis.iter().enumerate() {
        let x = frame.x(i as f64);
        let _ = writeln!(
            out,
            r#"<text transform="translate({x:.2} {:.2}) rotate(-60)" text-anchor="end" font-size="10">{}</text>"#,
            base + 12.0,
            escape(scenario)
        );
    }
    for (m, spectrum) in spectra.iter().enumerate() {
        let points: Vec<(f64, f64)> = axis
            .iter()
            .enumerate()
            .filter_map(|(i, scenario)| {
                spectrum
                    .get(scenario)
                    .map(|c| (frame.x(i as f64), frame.y(c.coefficient)))
            })
            .collect();
        draw_series(
            &mut out,
            &points,
            PALETTE[m % PALETTE.len()],
            &spectrum.model_name,
        );
    }
    let labels: Vec<String> = spectra.iter().map(|s| s.model_name.clone()).collect();
    draw_legend(&mut out, &labels);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Overlays trust densities on a shared `[0, 1]` axis, y scaled to the
/// largest value. With `strict`, every density must share one scenario label.
pub fn render_density_plot(
    densities: &[TrustDensity],
    strict: bool,
) -> Result<String, ReportError> {
    let first = densities.first().ok_or(ReportError::EmptyPlot)?;
    if strict {
        if let Some(d) = densities
            .iter()
            .find(|d| d.scenario_label != first.scenario_label)
        {
            return Err(ReportError::ScenarioMismatch {
                expected: first.scenario_label.clone(),
                found: d.scenario_label.clone(),
            });
        }
    }
    let peak = densities
        .iter()
        .flat_map(|d| d.values.iter().copied())
        .fold(0.0_f64, f64::max);
    let frame = Frame {
        x_min: 0.0,
        x_max: 1.0,
        y_max: if peak > 0.0 { peak } else { 1.0 },
    };
    let ticks: Vec<f64> = (0..=4).map(|i| frame.y_max * i as f64 / 4.0).collect();

    let mut out = String::new();
    let title = if densities
        .iter()
        .all(|d| d.scenario_label == first.scenario_label)
    {
        format!("Trust density: {}", first.scenario_label)
    } else {
        "Trust density".to_string()
    };
    open_document(&mut out, &title);
    draw_axes(&mut out, &frame, "density", &ticks);
    let base = TOP + Frame::plot_height();
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t:.1}</text>"#,
            frame.x(t),
            base + 18.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">question-answer trust</text>"#,
        LEFT + Frame::plot_width() / 2.0,
        base + 40.0
    );
    for (i, d) in densities.iter().enumerate() {
        let points: Vec<(f64, f64)> = d
            .grid
            .iter()
            .zip(&d.values)
            .map(|(&t, &f)| (frame.x(t), frame.y(f)))
            .collect();
        draw_series(&mut out, &points, PALETTE[i % PALETTE.len()], &d.label());
    }
    let labels: Vec<String> = densities.iter().map(TrustDensity::label).collect();
    draw_legend(&mut out, &labels);
    out.push_str("</svg>\n");
    Ok(out)
}
