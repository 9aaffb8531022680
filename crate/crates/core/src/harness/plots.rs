use std::collections::BTreeMap;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};

use super::eval::EvalRow;
use super::scale::ScalePoint;
use super::single_path::ProfileRow;

/// Evaluation history of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCurve {
    pub label: String,
    pub seed: u64,
    pub rows: Vec<EvalRow>,
}

/// Cross-seed statistics of a metric at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveStat {
    pub label: String,
    pub updates: u64,
    pub mean: f64,
    /// Sample standard deviation across seeds; 0 for a single seed.
    pub std: f64,
    pub n: usize,
}

pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Groups runs by label and checkpoint.
pub fn aggregate(curves: &[RunCurve], metric: impl Fn(&EvalRow) -> f64) -> Vec<CurveStat> {
    let mut groups: BTreeMap<(&str, u64), Vec<f64>> = BTreeMap::new();
    for c in curves {
        for r in &c.rows {
            groups.entry((c.label.as_str(), r.updates)).or_default().push(metric(r));
        }
    }
    groups
        .into_iter()
        .map(|((label, updates), xs)| CurveStat {
            label: label.to_string(),
            updates,
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            std: sample_std(&xs),
            n: xs.len(),
        })
        .collect()
}

fn write_stats_csv(path: &FsPath, stats: &[CurveStat]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "updates", "mean", "std", "n"])?;
    for s in stats {
        w.write_record([
            s.label.clone(),
            s.updates.to_string(),
            format!("{:.6}", s.mean),
            format!("{:.6}", s.std),
            s.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    spread: Option<Vec<f64>>,
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(format!("plot: {e}")))
}

fn line_chart(path: &FsPath, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let all = || series.iter().flat_map(|s| {
        let spread = s.spread.clone().unwrap_or_else(|| vec![0.0; s.points.len()]);
        s.points.iter().zip(spread).map(|(&(x, y), d)| (x, y - d, y + d)).collect::<Vec<_>>()
    });
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, lo, hi) in all() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(lo);
        y1 = y1.max(hi);
    }
    if !x0.is_finite() {
        return Ok(());
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-3);
    let (y0, y1) = (y0 - pad, y1 + pad);

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;
    for (i, s) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        if let Some(spread) = &s.spread {
            chart
                .draw_series(
                    s.points
                        .iter()
                        .zip(spread)
                        .map(|(&(x, y), &d)| ErrorBar::new_vertical(x, y - d, y, y + d, color.filled(), 6)),
                )
                .map_err(plot_err)?;
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn stat_series(stats: &[CurveStat]) -> Vec<Series> {
    let mut by_label: BTreeMap<&str, Series> = BTreeMap::new();
    for s in stats {
        let e = by_label.entry(s.label.as_str()).or_insert_with(|| Series {
            label: s.label.clone(),
            points: Vec::new(),
            spread: Some(Vec::new()),
        });
        e.points.push((s.updates as f64, s.mean));
        e.spread.as_mut().unwrap().push(s.std);
    }
    by_label.into_values().collect()
}

/// Normalized-velocity and failure-rate curves with cross-seed spread, as
/// SVG and CSV. Writes nothing for an empty input.
pub fn emit_plots(curves: &[RunCurve], out_dir: &FsPath) -> Result<Vec<PathBuf>> {
    if curves.iter().all(|c| c.rows.is_empty()) {
        return Ok(Vec::new());
    }
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let metrics: [(&str, &str, fn(&EvalRow) -> f64); 2] = [
        ("normalized_velocity", "normalized velocity", |r| r.normalized),
        ("failure_rate", "failure rate", |r| r.failure_rate),
    ];
    for (name, label, metric) in metrics {
        let stats = aggregate(curves, metric);
        let csv = out_dir.join(format!("{name}.csv"));
        write_stats_csv(&csv, &stats)?;
        let svg = out_dir.join(format!("{name}.svg"));
        line_chart(&svg, label, "updates", label, &stat_series(&stats))?;
        files.push(csv);
        files.push(svg);
    }
    Ok(files)
}

/// Failure rate of the scaled planner against the scale factor.
pub fn plot_scale(points: &[ScalePoint], out_dir: &FsPath) -> Result<Vec<PathBuf>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    fs::create_dir_all(out_dir)?;
    let svg = out_dir.join("scale_failure.svg");
    let series = [Series {
        label: "vod".into(),
        points: points.iter().map(|p| (p.factor, p.failure_rate)).collect(),
        spread: None,
    }];
    line_chart(&svg, "planner failure rate vs velocity scale", "scale factor", "failure rate", &series)?;
    Ok(vec![svg])
}

/// Velocity against arc length for every (mode, episode, source) group.
pub fn plot_profiles(rows: &[ProfileRow], out_dir: &FsPath) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    fs::create_dir_all(out_dir)?;
    let mut groups: BTreeMap<(String, u64, String), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.mode.clone(), r.episode, r.source.clone()))
            .or_default()
            .push((r.s, r.v));
    }
    let mut seen_vod = false;
    let mut series = Vec::new();
    for ((mode, episode, source), points) in groups {
        if source == "vod" {
            if seen_vod {
                continue;
            }
            seen_vod = true;
            series.push(Series { label: "vod".into(), points, spread: None });
        } else {
            series.push(Series {
                label: format!("{mode} episode {episode}"),
                points,
                spread: None,
            });
        }
    }
    let svg = out_dir.join("profiles.svg");
    line_chart(&svg, "velocity profiles", "arc length (m)", "velocity (m/s)", &series)?;
    Ok(vec![svg])
}
