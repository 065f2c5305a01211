use std::path::Path;

use anyhow::{anyhow, Result};
use plotters::prelude::*;
use qprune::eval::{ReportRow, RocPoint};

const SIZE: (u32, u32) = (800, 520);

fn plot_err<E: std::fmt::Display>(e: E) -> anyhow::Error {
    anyhow!("drawing chart: {e}")
}

/// Metric against fraction pruned, one line per estimator. Filled markers
/// are fractions found equivalent to the unpruned index, hollow ones are not.
pub fn tradeoff_chart(path: &Path, rows: &[ReportRow], baseline: Option<f64>) -> Result<()> {
    let mut estimators: Vec<&str> = Vec::new();
    for r in rows {
        if !estimators.contains(&r.estimator.as_str()) {
            estimators.push(&r.estimator);
        }
    }
    let metric = rows.first().map_or("metric", |r| r.metric.as_str());
    let finite = rows.iter().filter(|r| r.mean.is_finite());
    let x_max = finite.clone().map(|r| r.fraction).fold(0.0, f64::max).max(0.05);
    let y_max = finite.map(|r| r.mean).chain(baseline).fold(0.0, f64::max).max(1e-3) * 1.1;

    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{metric} by fraction pruned"), ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(55)
        .build_cartesian_2d(0.0..x_max, 0.0..y_max)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("fraction pruned")
        .y_desc(metric)
        .x_label_formatter(&|x| format!("{:.0}%", x * 100.0))
        .draw()
        .map_err(plot_err)?;

    if let Some(b) = baseline {
        chart
            .draw_series(LineSeries::new([(0.0, b), (x_max, b)], BLACK.mix(0.3)))
            .map_err(plot_err)?
            .label("unpruned")
            .legend(|(x, y)| PathElement::new([(x, y), (x + 20, y)], BLACK.mix(0.3)));
    }
    for (i, est) in estimators.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let mut pts: Vec<&ReportRow> = rows
            .iter()
            .filter(|r| r.estimator == *est && r.mean.is_finite())
            .collect();
        pts.sort_by(|a, b| a.fraction.total_cmp(&b.fraction));
        chart
            .draw_series(LineSeries::new(
                pts.iter().map(|r| (r.fraction, r.mean)),
                color.stroke_width(2),
            ))
            .map_err(plot_err)?
            .label(*est)
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 20, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|r| {
                let style = if r.equivalent == Some(true) {
                    color.filled()
                } else {
                    color.stroke_width(1)
                };
                Circle::new((r.fraction, r.mean), 4, style)
            }))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::LowerLeft)
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

pub fn roc_chart(path: &Path, estimator: &str, points: &[RocPoint], auc: f64) -> Result<()> {
    let root = SVGBackend::new(path, (560, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("ROC: {estimator} (AUC {auc:.3})"), ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..1.0, 0.0..1.0)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("false positive rate")
        .y_desc("true positive rate")
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new([(0.0, 0.0), (1.0, 1.0)], BLACK.mix(0.3)))
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(
            points.iter().map(|p| (p.fpr, p.tpr)),
            BLUE.stroke_width(2),
        ))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}
