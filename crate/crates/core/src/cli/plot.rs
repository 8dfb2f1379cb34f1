//! SVG line plots and heatmaps.

use plotters::prelude::*;

pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Line {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points: points.into_iter().filter(|(x, y)| x.is_finite() && y.is_finite()).collect(),
        }
    }
}

pub struct Axes<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_y: bool,
}

type PlotResult<T> = Result<T, Box<dyn std::error::Error>>;

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn extent(lines: &[Line], pick: impl Fn(&(f64, f64)) -> f64) -> (f64, f64) {
    lines
        .iter()
        .flat_map(|l| l.points.iter().map(&pick))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn palette(k: usize, n: usize) -> RGBColor {
    if n <= 1 {
        return RGBColor(31, 119, 180);
    }
    let t = k as f64 / (n - 1) as f64;
    heat(t)
}

/// Dark blue through teal to yellow.
fn heat(t: f64) -> RGBColor {
    let t = t.clamp(0.0, 1.0);
    let stops = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let s = t * (stops.len() - 1) as f64;
    let i = (s.floor() as usize).min(stops.len() - 2);
    let f = s - i as f64;
    let (a, b) = (stops[i], stops[i + 1]);
    let mix = |u: f64, v: f64| (u + f * (v - u)).round() as u8;
    RGBColor(mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

pub fn line_plot(axes: &Axes<'_>, lines: &[Line]) -> PlotResult<String> {
    let lines: Vec<Line> = if axes.log_y {
        lines
            .iter()
            .map(|l| Line::new(l.label.clone(), l.points.iter().map(|(x, y)| (*x, y.abs())).filter(|p| p.1 > 0.0).collect()))
            .collect()
    } else {
        lines.iter().map(|l| Line::new(l.label.clone(), l.points.clone())).collect()
    };
    let (x0, x1) = padded(extent(&lines, |p| p.0).0, extent(&lines, |p| p.0).1);
    let (ylo, yhi) = extent(&lines, |p| p.1);
    let mut buf = String::new();
    {
        let root = SVGBackend::with_string(&mut buf, (720, 450)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut builder = ChartBuilder::on(&root);
        builder
            .caption(axes.title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70);
        let n = lines.len();
        let legend = n > 1 && n <= 12;
        macro_rules! draw {
            ($chart:expr) => {{
                let mut chart = $chart;
                chart
                    .configure_mesh()
                    .x_desc(axes.x_label)
                    .y_desc(axes.y_label)
                    .draw()?;
                for (k, l) in lines.iter().enumerate() {
                    let c = palette(k, n);
                    let s = chart.draw_series(LineSeries::new(l.points.iter().copied(), c.stroke_width(2)))?;
                    if legend {
                        s.label(l.label.as_str())
                            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], c.stroke_width(2)));
                    }
                }
                if legend {
                    chart
                        .configure_series_labels()
                        .background_style(WHITE.mix(0.8))
                        .border_style(BLACK)
                        .draw()?;
                }
            }};
        }
        if axes.log_y {
            let lo = if ylo.is_finite() && ylo > 0.0 { ylo * 0.5 } else { 1e-30 };
            let hi = if yhi.is_finite() && yhi > lo { yhi * 2.0 } else { lo * 10.0 };
            draw!(builder.build_cartesian_2d(x0..x1, (lo..hi).log_scale())?);
        } else {
            let (y0, y1) = padded(ylo, yhi);
            draw!(builder.build_cartesian_2d(x0..x1, y0..y1)?);
        }
        root.present()?;
    }
    Ok(buf)
}

/// Heatmap of `values[iy][ix]`; NaN cells are left blank.
pub fn heatmap(title: &str, x: &[f64], y: &[f64], values: &[Vec<f64>]) -> PlotResult<String> {
    let finite = values.iter().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let half = |a: &[f64]| if a.len() > 1 { 0.5 * (a[1] - a[0]) } else { 0.5 };
    let (hx, hy) = (half(x), half(y));
    let mut buf = String::new();
    {
        let root = SVGBackend::with_string(&mut buf, (640, 560)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("{title}  [{lo:.3e}, {hi:.3e}]"), ("sans-serif", 16))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(
                (x[0] - hx)..(x[x.len() - 1] + hx),
                (y[0] - hy)..(y[y.len() - 1] + hy),
            )?;
        chart.configure_mesh().x_desc("x [µm]").y_desc("y [µm]").disable_mesh().draw()?;
        let cells = values.iter().enumerate().flat_map(|(iy, row)| {
            row.iter().enumerate().filter(|(_, v)| v.is_finite()).map(move |(ix, v)| {
                Rectangle::new(
                    [(x[ix] - hx, y[iy] - hy), (x[ix] + hx, y[iy] + hy)],
                    heat((v - lo) / span).filled(),
                )
            })
        });
        chart.draw_series(cells)?;
        root.present()?;
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_svg() {
        let l = Line::new("a", vec![(0.0, 1.0), (1.0, 2.0)]);
        let axes = Axes { title: "t", x_label: "x", y_label: "y", log_y: true };
        assert!(line_plot(&axes, &[l]).unwrap().starts_with("<svg"));
        let m = heatmap("m", &[0.0, 1.0], &[0.0, 1.0], &[vec![0.0, f64::NAN], vec![1.0, 2.0]]).unwrap();
        assert!(m.contains("<rect"));
    }

    #[test]
    fn colormap_ends() {
        assert_eq!(heat(0.0), RGBColor(68, 1, 84));
        assert_eq!(heat(1.0), RGBColor(253, 231, 37));
    }
}
