//! Parallel-coordinate SVG panels: observed compositions, their sample mean
//! and the fitted expected value with its credible band.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dirreg_core::model::Column;
use dirreg_core::posterior::{credible_interval, expected_value, expected_values_per_draw};

use crate::error::{CliError, Result};
use crate::run::prepare;
use crate::summarize::restore;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotOptions {
    /// One panel per level of this column; a single panel when absent.
    pub group_by: Option<String>,
    /// Credible level of the band; the run's level when absent.
    pub level: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub file_name: String,
    pub components: Vec<String>,
    pub observations: Vec<Vec<f64>>,
    pub sample_mean: Vec<f64>,
    /// Label of the covariate setting the estimate is evaluated at.
    pub setting: String,
    /// `"bayes"`, `"ml"` or `"none"`.
    pub method: &'static str,
    pub estimate: Option<Vec<f64>>,
    pub interval: Option<(Vec<f64>, Vec<f64>)>,
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn groups(column: Option<(&str, &Column)>, n: usize) -> Vec<(String, Vec<usize>)> {
    let Some((_, column)) = column else {
        return vec![("all".to_string(), (0..n).collect())];
    };
    let keys: Vec<String> = match column {
        Column::Categorical(_) => column.levels(),
        Column::Numeric(v) => {
            let mut xs: Vec<f64> = v.iter().flatten().copied().collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            xs.iter().map(|x| x.to_string()).collect()
        }
    };
    keys.into_iter()
        .map(|k| {
            let rows = (0..n)
                .filter(|&i| column.value(i).is_some_and(|v| v.to_string() == k))
                .collect();
            (k, rows)
        })
        .collect()
}

/// Panels for the run in `dir`, re-reading its input data.
pub fn build_panels(dir: &Path, opts: &PlotOptions) -> Result<Vec<Panel>> {
    let restored = restore(dir)?;
    let config = &restored.report.config;
    let level = opts.level.unwrap_or(config.level);
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Config(format!("level {level} outside (0, 1)")));
    }
    let prep = prepare(config)?;
    if prep.ctx.parameter_names() != restored.data.parameter_names || prep.settings != restored.data.settings {
        return Err(CliError::Config(format!(
            "{} no longer matches the fitted run",
            config.input.display()
        )));
    }
    let column = match &opts.group_by {
        Some(name) => Some((name.as_str(), prep.ingested.covariates.require(name)?)),
        None => None,
    };
    let ml = restored.ml_coefficients()?;
    let y = prep.ctx.y();
    let c_n = y.n_components();

    let mut panels = Vec::new();
    for (key, rows) in groups(column, y.n_obs()) {
        if rows.is_empty() {
            continue;
        }
        let observations: Vec<Vec<f64>> = rows.iter().map(|&i| y.row(i)).collect();
        let sample_mean: Vec<f64> = (0..c_n)
            .map(|c| observations.iter().map(|o| o[c]).sum::<f64>() / observations.len() as f64)
            .collect();
        let mut counts = vec![0usize; prep.settings.len()];
        for &i in &rows {
            counts[prep.setting_of_row[i]] += 1;
        }
        // Most frequent design row in the group; first on ties.
        let best = (0..counts.len()).fold(0, |b, k| if counts[k] > counts[b] { k } else { b });
        let setting = &prep.settings[best];
        let (method, estimate, interval) = if let Some(draws) = &restored.draws {
            let ev = expected_values_per_draw(draws, &setting.x, restored.dims, setting.label.clone())?;
            let mut mean = Vec::with_capacity(c_n);
            let mut lower = Vec::with_capacity(c_n);
            let mut upper = Vec::with_capacity(c_n);
            for c in 0..c_n {
                let col: Vec<f64> = ev.values.column(c).iter().copied().collect();
                mean.push(col.iter().sum::<f64>() / col.len() as f64);
                let (lo, hi) = credible_interval(&col, level)?;
                lower.push(lo);
                upper.push(hi);
            }
            ("bayes", Some(mean), Some((lower, upper)))
        } else if let Some(coeffs) = &ml {
            ("ml", Some(expected_value(coeffs, &setting.x)?), None)
        } else {
            ("none", None, None)
        };
        let (title, file_name) = match column {
            Some((name, _)) => (
                format!("{name} = {key} (n = {})", rows.len()),
                format!("plot_{}_{}.svg", file_safe(name), file_safe(&key)),
            ),
            None => (format!("all observations (n = {})", rows.len()), "plot.svg".to_string()),
        };
        panels.push(Panel {
            title,
            file_name,
            components: y.component_names().to_vec(),
            observations,
            sample_mean,
            setting: setting.label.clone(),
            method,
            estimate,
            interval,
        });
    }
    Ok(panels)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const FIT_COLOUR: &str = "#c0392b";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(panel: &Panel) -> String {
    let c_n = panel.components.len();
    let mut y_max = panel
        .observations
        .iter()
        .flatten()
        .chain(panel.interval.iter().flat_map(|(_, hi)| hi))
        .chain(panel.estimate.iter().flatten())
        .fold(0.0f64, |m, &v| m.max(v));
    y_max = ((y_max * 1.05 * 10.0).ceil() / 10.0).clamp(0.1, 1.0);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |c: usize| {
        if c_n == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * c as f64 / (c_n - 1) as f64
        }
    };
    let py = |v: f64| TOP + plot_h * (1.0 - v / y_max);
    let points = |v: &[f64]| {
        v.iter()
            .enumerate()
            .map(|(c, &y)| format!("{:.2},{:.2}", px(c), py(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&panel.title)
    );

    let ticks = (y_max * 10.0).round() as usize;
    for t in 0..=ticks {
        let v = t as f64 / 10.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}" stroke="black"/>"#,
        TOP + plot_h
    );
    for (c, name) in panel.components.iter().enumerate() {
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#d0d0d0"/>"##,
            TOP + plot_h,
            x = px(c)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(c),
            TOP + plot_h + 20.0,
            escape(name)
        );
    }

    let _ = writeln!(s, r##"<g class="observations" stroke="#b0b0b0" fill="#b0b0b0">"##);
    for obs in &panel.observations {
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke-width="1"/>"#, points(obs));
        for (c, &v) in obs.iter().enumerate() {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#, px(c), py(v));
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<polyline class="sample-mean" points="{}" fill="none" stroke="black" stroke-width="2"/>"#,
        points(&panel.sample_mean)
    );
    if let Some(est) = &panel.estimate {
        let _ = writeln!(
            s,
            r#"<polyline class="estimate" points="{}" fill="none" stroke="{FIT_COLOUR}" stroke-width="2"/>"#,
            points(est)
        );
    }
    if let Some((lo, hi)) = &panel.interval {
        for (class, v) in [("interval-lower", lo), ("interval-upper", hi)] {
            let _ = writeln!(
                s,
                r#"<polyline class="{class}" points="{}" fill="none" stroke="{FIT_COLOUR}" stroke-width="1.5" stroke-dasharray="6 4"/>"#,
                points(v)
            );
        }
    }

    let lx = WIDTH - RIGHT + 15.0;
    let mut legend = vec![
        (r##"stroke="#b0b0b0""##.to_string(), "observed".to_string()),
        (r#"stroke="black" stroke-width="2""#.to_string(), "sample mean".to_string()),
    ];
    if panel.estimate.is_some() {
        legend.push((
            format!(r#"stroke="{FIT_COLOUR}" stroke-width="2""#),
            format!("{} estimate", panel.method),
        ));
    }
    if panel.interval.is_some() {
        legend.push((
            format!(r#"stroke="{FIT_COLOUR}" stroke-dasharray="6 4""#),
            "credible interval".to_string(),
        ));
    }
    for (k, (style, label)) in legend.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" {style}/>"#,
            lx + 24.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{label}</text>"#, lx + 30.0, y + 4.0);
    }
    if panel.estimate.is_some() {
        let _ = writeln!(
            s,
            r#"<text x="{lx:.2}" y="{:.2}" font-size="10">at {}</text>"#,
            TOP + 10.0 + 20.0 * legend.len() as f64,
            escape(&panel.setting)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Write one SVG per panel into `out_dir`; returns the paths written.
pub fn plot(dir: &Path, out_dir: &Path, opts: &PlotOptions) -> Result<Vec<PathBuf>> {
    let panels = build_panels(dir, opts)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::with_capacity(panels.len());
    for panel in &panels {
        let path = out_dir.join(&panel.file_name);
        fs::write(&path, render_svg(panel)).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel() -> Panel {
        Panel {
            title: "Disease = A & B (n = 2)".into(),
            file_name: "plot.svg".into(),
            components: vec!["a".into(), "b".into(), "c".into()],
            observations: vec![vec![0.2, 0.3, 0.5], vec![0.4, 0.4, 0.2]],
            sample_mean: vec![0.3, 0.35, 0.35],
            setting: "(Intercept)".into(),
            method: "bayes",
            estimate: Some(vec![0.31, 0.34, 0.35]),
            interval: Some((vec![0.25, 0.3, 0.3], vec![0.37, 0.39, 0.41])),
        }
    }

    #[test]
    fn svg_has_every_layer() {
        let svg = render_svg(&panel());
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 6);
        assert_eq!(svg.matches(r#"class="sample-mean""#).count(), 1);
        assert_eq!(svg.matches(r#"class="estimate""#).count(), 1);
        assert_eq!(svg.matches("interval-").count(), 2);
        assert!(svg.contains("A &amp; B"));
        for name in ["a", "b", "c"] {
            assert!(svg.contains(&format!(">{name}</text>")));
        }
    }

    #[test]
    fn svg_without_fit_omits_fit_layers() {
        let mut p = panel();
        p.estimate = None;
        p.interval = None;
        p.method = "none";
        let svg = render_svg(&p);
        assert!(!svg.contains("estimate\""));
        assert!(!svg.contains("interval-"));
    }

    #[test]
    fn rendering_is_deterministic() {
        assert_eq!(render_svg(&panel()), render_svg(&panel()));
    }

    #[test]
    fn numeric_groups_are_sorted() {
        let col = Column::Numeric(vec![Some(2.0), Some(1.0), None, Some(2.0)]);
        let g = groups(Some(("x", &col)), 4);
        assert_eq!(g, vec![("1".to_string(), vec![1]), ("2".to_string(), vec![0, 3])]);
    }

    #[test]
    fn file_names_are_sanitized() {
        assert_eq!(file_safe("Disease B/1"), "Disease_B_1");
    }
}
