//! Static SVG plots of the series artifacts. Purely presentational: nothing
//! here transforms data beyond axis scaling.

use anyhow::{anyhow, bail, Context, Result};
use efriction_core::run::RunReport;
use efriction_core::series::SeriesFile;
use plotters::prelude::*;
use std::path::{Path, PathBuf};

/// Plot every recognized series artifact of a run.
pub fn emit_all(report: &RunReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for artifact in &report.artifacts {
        let Some(name) = artifact.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        match name {
            "observables.txt" => {
                let series = SeriesFile::read(artifact)?;
                for col in ["energy", "x", "norm_sq"] {
                    let path = out_dir.join(format!("plot_{col}.svg"));
                    line_plot(&series, "t", col, &path)?;
                    written.push(path);
                }
            }
            "density_map.txt" => {
                let series = SeriesFile::read(artifact)?;
                let path = out_dir.join("plot_density.svg");
                heatmap(&series, "t", "x", "rho", &path)?;
                written.push(path);
            }
            "geometry_field.txt" => {
                let series = SeriesFile::read(artifact)?;
                // 2-D maps: curvature-carrying component when present, plus
                // a quiver of the connection (A_x, A_y)
                if series.column_index("x1").is_some() && series.column_index("x2").is_none() {
                    let path = out_dir.join("plot_field.svg");
                    let col = if series.column_index("im_q01").is_some() {
                        "im_q01"
                    } else {
                        "phi"
                    };
                    heatmap(&series, "x0", "x1", col, &path)?;
                    written.push(path);
                    let qpath = out_dir.join("plot_connection.svg");
                    quiver(&series, "x0", "x1", "a0", "a1", &qpath)?;
                    written.push(qpath);
                } else if series.column_index("x1").is_none() {
                    let path = out_dir.join("plot_field.svg");
                    line_plot(&series, "x0", "phi", &path)?;
                    written.push(path);
                }
            }
            "lite.txt" => {
                let series = SeriesFile::read(artifact)?;
                let path = out_dir.join("plot_lite.svg");
                line_plot(&series, "delta_t", "probability", &path)?;
                written.push(path);
            }
            _ => {}
        }
    }
    Ok(written)
}

fn columns(series: &SeriesFile, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    names
        .iter()
        .map(|n| {
            series
                .column_values(n)
                .ok_or_else(|| anyhow!("series lacks required column `{n}` (schema mismatch)"))
        })
        .collect()
}

fn line_plot(series: &SeriesFile, x: &str, y: &str, path: &Path) -> Result<()> {
    let cols = columns(series, &[x, y])?;
    let (xs, ys) = (&cols[0], &cols[1]);
    if xs.is_empty() {
        bail!("empty series");
    }
    let (x0, x1) = bounds(xs);
    let (mut y0, mut y1) = bounds(ys);
    if (y1 - y0).abs() < 1e-300 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .caption(format!("{y} vs {x}"), ("sans-serif", 20))
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart
        .configure_mesh()
        .x_desc(x)
        .y_desc(y)
        .draw()
        .context("mesh")?;
    chart.draw_series(LineSeries::new(
        xs.iter().zip(ys).map(|(a, b)| (*a, *b)),
        &BLUE,
    ))?;
    root.present()?;
    Ok(())
}

fn heatmap(series: &SeriesFile, x: &str, y: &str, z: &str, path: &Path) -> Result<()> {
    let cols = columns(series, &[x, y, z])?;
    let (xs, ys, zs) = (&cols[0], &cols[1], &cols[2]);
    if xs.is_empty() {
        bail!("empty series");
    }
    let mut xu = xs.clone();
    let mut yu = ys.clone();
    xu.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xu.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    yu.sort_by(|a, b| a.partial_cmp(b).unwrap());
    yu.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let (zmin, zmax) = bounds(zs);
    let span = (zmax - zmin).max(1e-300);

    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let root = SVGBackend::new(path, (820, 620)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .caption(format!("{z} over ({x}, {y})"), ("sans-serif", 20))
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart.configure_mesh().x_desc(x).y_desc(y).draw()?;

    let dx = cell(&xu);
    let dy = cell(&yu);
    chart.draw_series(xs.iter().zip(ys).zip(zs).map(|((&px, &py), &pz)| {
        let t = ((pz - zmin) / span).clamp(0.0, 1.0);
        let color = RGBColor(
            (255.0 * t) as u8,
            (64.0 + 64.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8,
            (255.0 * (1.0 - t)) as u8,
        );
        Rectangle::new(
            [
                (px - dx / 2.0, py - dy / 2.0),
                (px + dx / 2.0, py + dy / 2.0),
            ],
            color.filled(),
        )
    }))?;
    root.present()?;
    Ok(())
}

/// Arrow map of a 2-D vector field sampled on a grid, arrows normalized to
/// the cell size.
fn quiver(series: &SeriesFile, x: &str, y: &str, vx: &str, vy: &str, path: &Path) -> Result<()> {
    let cols = columns(series, &[x, y, vx, vy])?;
    let (xs, ys, vxs, vys) = (&cols[0], &cols[1], &cols[2], &cols[3]);
    if xs.is_empty() {
        bail!("empty series");
    }
    let mut xu = xs.clone();
    xu.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xu.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let mut yu = ys.clone();
    yu.sort_by(|a, b| a.partial_cmp(b).unwrap());
    yu.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let arrow = 0.45 * cell(&xu).min(cell(&yu));
    let vmax = vxs
        .iter()
        .zip(vys)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .fold(0.0, f64::max)
        .max(1e-300);

    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let root = SVGBackend::new(path, (820, 620)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .caption(format!("({vx}, {vy}) over ({x}, {y})"), ("sans-serif", 20))
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart.configure_mesh().x_desc(x).y_desc(y).draw()?;
    chart.draw_series(xs.iter().zip(ys).zip(vxs.iter().zip(vys)).flat_map(
        |((&px, &py), (&ux, &uy))| {
            let scale = arrow / vmax;
            let (tx, ty) = (px + ux * scale, py + uy * scale);
            // shaft plus a short head rotated ±150° from the direction
            let angle = uy.atan2(ux);
            let head = 0.3 * arrow * ((ux * ux + uy * uy).sqrt() / vmax).min(1.0);
            let mk = move |da: f64| {
                (
                    tx + head * (angle + da).cos(),
                    ty + head * (angle + da).sin(),
                )
            };
            [
                PathElement::new(vec![(px, py), (tx, ty)], BLUE.stroke_width(1)),
                PathElement::new(vec![(tx, ty), mk(2.62)], BLUE.stroke_width(1)),
                PathElement::new(vec![(tx, ty), mk(-2.62)], BLUE.stroke_width(1)),
            ]
        },
    ))?;
    root.present()?;
    Ok(())
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn cell(sorted_unique: &[f64]) -> f64 {
    if sorted_unique.len() < 2 {
        1.0
    } else {
        sorted_unique
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}
