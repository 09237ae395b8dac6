//! The five diagnostic figures.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::balance::{TermBalance, TermKind};
use crate::dataset::Dataset;
use crate::diagnostics::kde::kde;
use crate::diagnostics::svg::{escape, Panel, Svg, HEIGHT, WIDTH};
use crate::matcher::{Disposition, MatchResult};
use crate::propensity::PropensityModel;
use crate::rng::SplitMix64;

pub const FIG_PS_HIST: &str = "fig_ps_hist.svg";
pub const FIG_PS_DOT: &str = "fig_ps_dot.svg";
pub const FIG_SMD_HIST: &str = "fig_smd_hist.svg";
pub const FIG_SMD_DOT: &str = "fig_smd_dot.svg";
pub const FIG_SMD_LINE: &str = "fig_smd_line.svg";

const TREATED_COLOR: &str = "#c0392b";
const CONTROL_COLOR: &str = "#2e6da4";
const JITTER_SEED: u64 = 0x6a17_7e55;
const BASE_RADIUS: f64 = 3.0;

/// Kind of figure, used for titles and file names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    PsHistogram,
    PsDotplot,
    SmdHistogram,
    SmdDotplot,
    SmdLineplot,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        PlotKind::PsHistogram,
        PlotKind::PsDotplot,
        PlotKind::SmdHistogram,
        PlotKind::SmdDotplot,
        PlotKind::SmdLineplot,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            PlotKind::PsHistogram => FIG_PS_HIST,
            PlotKind::PsDotplot => FIG_PS_DOT,
            PlotKind::SmdHistogram => FIG_SMD_HIST,
            PlotKind::SmdDotplot => FIG_SMD_DOT,
            PlotKind::SmdLineplot => FIG_SMD_LINE,
        }
    }
}

/// Sturges' rule: `ceil(log2 n) + 1` bins.
pub fn sturges_bins(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        (n as f64).log2().ceil() as usize + 1
    }
}

/// Finite `(min, max)`, widened when the values are all equal.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        (-1.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Weighted density histogram over shared edges: each bar's height is its
/// share of the total weight divided by the bin width.
fn density_histogram(values: &[f64], weights: &[f64], range: (f64, f64), bins: usize) -> Vec<f64> {
    let width = (range.1 - range.0) / bins as f64;
    let mut mass = vec![0.0; bins];
    let mut total = 0.0;
    for (&v, &w) in values.iter().zip(weights) {
        if w <= 0.0 || !v.is_finite() {
            continue;
        }
        let k = (((v - range.0) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        mass[k] += w;
        total += w;
    }
    if total > 0.0 {
        mass.iter().map(|m| m / (total * width)).collect()
    } else {
        mass
    }
}

struct HistPanel {
    id: String,
    title: String,
    color: &'static str,
    bars: Vec<f64>,
    curve: Option<Vec<(f64, f64)>>,
}

fn hist_panel(
    id: &str,
    title: &str,
    color: &'static str,
    values: &[f64],
    weights: &[f64],
    range: (f64, f64),
    bins: usize,
) -> HistPanel {
    let curve = kde(values, Some(weights))
        .ok()
        .map(|c| c.xs.into_iter().zip(c.ys).collect());
    HistPanel {
        id: id.to_string(),
        title: title.to_string(),
        color,
        bars: density_histogram(values, weights, range, bins),
        curve,
    }
}

fn draw_hist_panel(svg: &mut Svg, panel: &Panel, hp: &HistPanel, bins: usize) {
    panel.begin(svg, &hp.id, &hp.title, true);
    let width = (panel.x_range.1 - panel.x_range.0) / bins as f64;
    for (k, &h) in hp.bars.iter().enumerate() {
        if h <= 0.0 {
            continue;
        }
        let x0 = panel.x(panel.x_range.0 + width * k as f64);
        let x1 = panel.x(panel.x_range.0 + width * (k + 1) as f64);
        let y = panel.y(h);
        svg.rect(
            x0,
            y,
            x1 - x0,
            panel.bottom() - y,
            &format!(
                r#"class="bar" fill="{}" fill-opacity="0.35" stroke="{}" stroke-width="0.5""#,
                hp.color, hp.color
            ),
        );
    }
    if let Some(curve) = &hp.curve {
        let pts: Vec<(f64, f64)> = curve
            .iter()
            .filter(|(x, _)| *x >= panel.x_range.0 && *x <= panel.x_range.1)
            .map(|&(x, y)| (panel.x(x), panel.y(y)))
            .collect();
        if pts.len() > 1 {
            svg.polyline(
                &pts,
                r#"class="kde" fill="none" stroke="black" stroke-width="1.5""#,
            );
        }
    }
    panel.end(svg);
}

fn shared_y_max(panels: &[HistPanel]) -> f64 {
    let m = panels
        .iter()
        .flat_map(|p| {
            p.bars
                .iter()
                .copied()
                .chain(p.curve.iter().flat_map(|c| c.iter().map(|&(_, y)| y)))
        })
        .fold(0.0, f64::max);
    if m > 0.0 {
        m * 1.05
    } else {
        1.0
    }
}

/// Propensity score histograms by group (rows) and phase (columns), with
/// density overlays. All four panels share both axes.
pub fn ps_histogram(model: &PropensityModel, ds: &Dataset, result: &MatchResult) -> String {
    let scores = &model.scores;
    let range = padded_range(scores.iter().copied());
    let bins = sturges_bins(scores.len());
    let z = ds.treatment();

    let split = |group: u8, weights: &dyn Fn(usize) -> f64| -> (Vec<f64>, Vec<f64>) {
        (0..ds.len())
            .filter(|&i| z[i] == group)
            .map(|i| (scores[i], weights(i)))
            .unzip()
    };
    let mut panels = Vec::new();
    for (phase_id, phase_title) in [("before", "Before matching"), ("after", "After matching")] {
        for (group, group_id, group_title, color) in [
            (1u8, "treated", "treated", TREATED_COLOR),
            (0u8, "control", "control", CONTROL_COLOR),
        ] {
            let (values, weights) = if phase_id == "before" {
                split(group, &|_| 1.0)
            } else {
                split(group, &|i| result.weights[i])
            };
            panels.push(hist_panel(
                &format!("{phase_id}-{group_id}"),
                &format!("{phase_title}: {group_title}"),
                color,
                &values,
                &weights,
                range,
                bins,
            ));
        }
    }
    let y_max = shared_y_max(&panels);

    let mut svg = Svg::new("Propensity score distributions");
    // panels are ordered before-treated, before-control, after-treated, after-control
    for (k, hp) in panels.iter().enumerate() {
        let col = k / 2;
        let row = k % 2;
        let panel = Panel {
            left: 80.0 + col as f64 * 370.0,
            top: 70.0 + row as f64 * 260.0,
            width: 320.0,
            height: 200.0,
            x_range: range,
            y_range: (0.0, y_max),
        };
        draw_hist_panel(&mut svg, &panel, hp, bins);
    }
    svg.text(
        WIDTH / 2.0,
        HEIGHT - 10.0,
        "Propensity score",
        "middle",
        12.0,
        "axis-label",
    );
    svg.finish()
}

/// Individual scores in four strips: unmatched treated, matched treated,
/// matched control, unmatched control. When any weight differs from 1, dot
/// area is proportional to the unit's weight.
pub fn ps_dotplot(model: &PropensityModel, ds: &Dataset, result: &MatchResult) -> String {
    let range = padded_range(model.scores.iter().copied());
    let pad = (range.1 - range.0) * 0.03;
    let panel = Panel {
        left: 190.0,
        top: 70.0,
        width: 570.0,
        height: 460.0,
        x_range: (range.0 - pad, range.1 + pad),
        y_range: (0.0, 4.0),
    };
    let weighted = result.weights.iter().any(|&w| w > 0.0 && w != 1.0);
    let strips = [
        ("Unmatched treated", 1u8, false),
        ("Matched treated", 1u8, true),
        ("Matched control", 0u8, true),
        ("Unmatched control", 0u8, false),
    ];

    let mut svg = Svg::new("Distribution of propensity scores");
    panel.begin(&mut svg, "units", "", false);
    for (k, (label, _, _)) in strips.iter().enumerate() {
        let centre = 3.5 - k as f64;
        svg.text(
            panel.left - 10.0,
            panel.y(centre) + 4.0,
            label,
            "end",
            12.0,
            "strip-label",
        );
    }
    let mut jitter = SplitMix64::new(JITTER_SEED);
    for i in 0..ds.len() {
        let j = jitter.next_f64() - 0.5;
        let treated = ds.is_treated(i);
        let matched = result.disposition[i] == Disposition::Matched;
        let strip = strips
            .iter()
            .position(|&(_, g, m)| (g == 1) == treated && m == matched)
            .expect("every unit falls in one strip");
        let centre = 3.5 - strip as f64;
        let w = result.weights[i];
        let r = if matched && weighted {
            BASE_RADIUS * w.sqrt()
        } else {
            BASE_RADIUS
        };
        let color = if treated {
            TREATED_COLOR
        } else {
            CONTROL_COLOR
        };
        svg.circle(
            panel.x(model.scores[i]),
            panel.y(centre + 0.7 * j),
            r,
            &format!(
                r#"class="unit" data-row="{i}" data-weight="{w}" fill="{color}" fill-opacity="0.5" stroke="none""#
            ),
        );
    }
    panel.end(&mut svg);
    svg.text(
        WIDTH / 2.0,
        HEIGHT - 20.0,
        "Propensity score",
        "middle",
        12.0,
        "axis-label",
    );
    svg.finish()
}

fn finite_smds(terms: &[TermBalance]) -> Vec<f64> {
    terms
        .iter()
        .map(|t| t.smd)
        .filter(|v| v.is_finite())
        .collect()
}

/// Standardized differences of all terms before and after matching, on shared axes.
pub fn smd_histogram(terms_before: &[TermBalance], terms_after: &[TermBalance]) -> String {
    let mut svg = Svg::new("Standardized differences of all terms");
    let before = finite_smds(terms_before);
    let after = finite_smds(terms_after);
    if before.is_empty() && after.is_empty() {
        svg.message("No terms with defined standardized differences");
        return svg.finish();
    }
    let range = padded_range(before.iter().chain(&after).copied());
    let bins = sturges_bins(before.len() + after.len());
    let panels = vec![
        hist_panel(
            "before",
            "Before matching",
            CONTROL_COLOR,
            &before,
            &vec![1.0; before.len()],
            range,
            bins,
        ),
        hist_panel(
            "after",
            "After matching",
            TREATED_COLOR,
            &after,
            &vec![1.0; after.len()],
            range,
            bins,
        ),
    ];
    let y_max = shared_y_max(&panels);
    for (k, hp) in panels.iter().enumerate() {
        let panel = Panel {
            left: 80.0 + k as f64 * 370.0,
            top: 80.0,
            width: 320.0,
            height: 440.0,
            x_range: range,
            y_range: (0.0, y_max),
        };
        draw_hist_panel(&mut svg, &panel, hp, bins);
    }
    svg.text(
        WIDTH / 2.0,
        HEIGHT - 20.0,
        "Standardized mean difference",
        "middle",
        12.0,
        "axis-label",
    );
    svg.finish()
}

/// Before (open) and after (filled) standardized differences per covariate,
/// listed in dataset order.
pub fn smd_dotplot(terms_before: &[TermBalance], terms_after: &[TermBalance]) -> String {
    let mut svg = Svg::new("Standardized mean differences by covariate");
    let rows: Vec<(&TermBalance, Option<&TermBalance>)> = terms_before
        .iter()
        .filter(|t| t.kind == TermKind::Main)
        .map(|b| (b, terms_after.iter().find(|a| a.term == b.term)))
        .collect();
    if rows.is_empty() {
        svg.message("No covariates to display");
        return svg.finish();
    }
    let range = padded_range(
        rows.iter()
            .flat_map(|(b, a)| [Some(b.smd), a.map(|a| a.smd)])
            .flatten()
            .chain([0.0]),
    );
    let pad = (range.1 - range.0) * 0.05;
    let panel = Panel {
        left: 220.0,
        top: 70.0,
        width: 540.0,
        height: 460.0,
        x_range: (range.0 - pad, range.1 + pad),
        y_range: (0.0, rows.len() as f64),
    };
    panel.begin(&mut svg, "covariates", "", false);
    let x0 = panel.x(0.0);
    svg.line(
        x0,
        panel.top,
        x0,
        panel.bottom(),
        r##"class="zero" stroke="#888" stroke-dasharray="4,3""##,
    );
    for (k, (before, after)) in rows.iter().enumerate() {
        let y = panel.y(rows.len() as f64 - k as f64 - 0.5);
        svg.text(
            panel.left - 10.0,
            y + 4.0,
            &before.term,
            "end",
            11.0,
            "term-label",
        );
        if before.smd.is_finite() {
            svg.circle(
                panel.x(before.smd),
                y,
                4.0,
                &format!(
                    r#"class="smd-before" data-term="{}" fill="white" stroke="black" stroke-width="1.2""#,
                    escape(&before.term)
                ),
            );
        }
        if let Some(a) = after.filter(|a| a.smd.is_finite()) {
            svg.circle(
                panel.x(a.smd),
                y,
                4.0,
                &format!(
                    r#"class="smd-after" data-term="{}" fill="black" stroke="none""#,
                    escape(&a.term)
                ),
            );
        }
    }
    panel.end(&mut svg);
    svg.text(
        WIDTH / 2.0 + 110.0,
        HEIGHT - 20.0,
        "Standardized mean difference (open: before, filled: after)",
        "middle",
        12.0,
        "axis-label",
    );
    svg.finish()
}

/// Absolute standardized differences as parallel lines from before to after.
/// Terms whose imbalance grows are drawn with a heavier stroke.
pub fn smd_lineplot(terms_before: &[TermBalance], terms_after: &[TermBalance]) -> String {
    let mut svg = Svg::new("Absolute standardized differences before and after matching");
    let lines: Vec<(&str, f64, f64)> = terms_before
        .iter()
        .filter_map(|b| {
            let a = terms_after.iter().find(|a| a.term == b.term)?;
            (b.smd.is_finite() && a.smd.is_finite()).then_some((
                b.term.as_str(),
                b.smd.abs(),
                a.smd.abs(),
            ))
        })
        .collect();
    if lines.is_empty() {
        svg.message("No terms with defined standardized differences");
        return svg.finish();
    }
    let top = lines
        .iter()
        .flat_map(|&(_, b, a)| [b, a])
        .fold(0.0, f64::max);
    let panel = Panel {
        left: 200.0,
        top: 70.0,
        width: 400.0,
        height: 460.0,
        x_range: (0.0, 1.0),
        y_range: (0.0, if top > 0.0 { top * 1.05 } else { 1.0 }),
    };
    panel.begin(&mut svg, "lines", "", true);
    for &(term, before, after) in &lines {
        let worsened = after > before;
        let attrs = if worsened {
            format!(
                r#"class="smd-line worsened" data-term="{}" stroke="black" stroke-width="3""#,
                escape(term)
            )
        } else {
            format!(
                r##"class="smd-line" data-term="{}" stroke="#777" stroke-width="1""##,
                escape(term)
            )
        };
        svg.line(
            panel.x(0.1),
            panel.y(before),
            panel.x(0.9),
            panel.y(after),
            &attrs,
        );
    }
    panel.end(&mut svg);
    svg.text(
        panel.x(0.1),
        panel.bottom() + 34.0,
        "Before",
        "middle",
        12.0,
        "axis-label",
    );
    svg.text(
        panel.x(0.9),
        panel.bottom() + 34.0,
        "After",
        "middle",
        12.0,
        "axis-label",
    );
    svg.finish()
}

/// Renders all five figures into `outdir`, returning the written paths.
pub fn render_plots(
    model: &PropensityModel,
    ds: &Dataset,
    result: &MatchResult,
    terms_before: &[TermBalance],
    terms_after: &[TermBalance],
    outdir: &Path,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(outdir)?;
    let mut written = Vec::with_capacity(5);
    for kind in PlotKind::ALL {
        let body = match kind {
            PlotKind::PsHistogram => ps_histogram(model, ds, result),
            PlotKind::PsDotplot => ps_dotplot(model, ds, result),
            PlotKind::SmdHistogram => smd_histogram(terms_before, terms_after),
            PlotKind::SmdDotplot => smd_dotplot(terms_before, terms_after),
            PlotKind::SmdLineplot => smd_lineplot(terms_before, terms_after),
        };
        let path = outdir.join(kind.file_name());
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::Phase;

    fn term(name: &str, smd: f64, phase: Phase) -> TermBalance {
        TermBalance {
            term: name.into(),
            kind: TermKind::Main,
            mean_t: 0.0,
            mean_c: 0.0,
            sd_c: 1.0,
            smd,
            phase,
        }
    }

    #[test]
    fn sturges() {
        assert_eq!(sturges_bins(1), 1);
        assert_eq!(sturges_bins(8), 4);
        assert_eq!(sturges_bins(9), 5);
        assert_eq!(sturges_bins(4148), 14);
    }

    #[test]
    fn histogram_integrates_to_one() {
        let values = [0.1, 0.2, 0.25, 0.7, 0.9];
        let h = density_histogram(&values, &[1.0, 2.0, 1.0, 1.0, 0.0], (0.0, 1.0), 4);
        let area: f64 = h.iter().map(|v| v * 0.25).sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lineplot_marks_worsened_term() {
        let before = vec![term("a", 0.5, Phase::Before), term("b", 0.1, Phase::Before)];
        let after = vec![term("a", 0.05, Phase::After), term("b", -0.3, Phase::After)];
        let svg = smd_lineplot(&before, &after);
        assert_eq!(svg.matches("worsened").count(), 1);
        assert!(svg.contains(r#"class="smd-line worsened" data-term="b""#));
    }

    #[test]
    fn empty_terms_render_a_message() {
        for svg in [
            smd_lineplot(&[], &[]),
            smd_histogram(&[], &[]),
            smd_dotplot(&[], &[]),
        ] {
            assert!(svg.contains(r#"class="message""#));
            assert!(svg.ends_with("</svg>\n"));
        }
    }
}
