use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use attractor_lab::cantor::{to_f64, Rational};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Style {
    Line,
    Scatter,
    Boxes,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Parses a numeric cell: a float or an exact `p/q`.
fn cell(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.contains('/') {
        Rational::from_str(s).ok().map(|r| to_f64(&r))
    } else {
        s.parse().ok()
    }
}

fn read(input: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::Reader::from_path(input).map_err(|e| CliError::Plot(format!("{}: {e}", input.display())))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Plot(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(|e| CliError::Plot(e.to_string()))?;
    Ok((header, rows))
}

fn column(header: &[String], name: Option<&str>, default: usize) -> Result<usize, CliError> {
    match name {
        Some(n) => header
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| CliError::Plot(format!("no column {n:?}"))),
        None if default < header.len() => Ok(default),
        None => Err(CliError::Plot(format!("need at least {} columns", default + 1))),
    }
}

pub fn render_file(input: &Path, style: Style, log: bool, x: Option<&str>, y: Option<&str>) -> Result<String, CliError> {
    let (header, rows) = read(input)?;
    if rows.is_empty() {
        return Err(CliError::Plot("empty series".into()));
    }
    match style {
        Style::Boxes => {
            let idx = ["x_lo", "x_hi", "y_lo", "y_hi"]
                .map(|n| column(&header, Some(n), 0))
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            let boxes = rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let v: Option<Vec<f64>> = idx.iter().map(|&j| r.get(j).and_then(|c| cell(c))).collect();
                    v.map(|v| [v[0], v[1], v[2], v[3]]).ok_or_else(|| CliError::Plot(format!("row {} is not numeric", i + 1)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(boxes_svg(&boxes))
        }
        _ => {
            let xi = column(&header, x, 0)?;
            let yi = column(&header, y, 1)?;
            let points = rows
                .iter()
                .enumerate()
                .map(|(i, r)| match (r.get(xi).and_then(|c| cell(c)), r.get(yi).and_then(|c| cell(c))) {
                    (Some(a), Some(b)) => Ok((a, b)),
                    _ => Err(CliError::Plot(format!("row {} is not numeric", i + 1))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            series_svg(&points, style, log, &header[xi], &header[yi])
        }
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Frame { x: widen(x), y: widen(y) }
    }

    fn px(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

fn header_svg(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str, log: bool) {
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="1"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#
    );
    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="11" fill="black">"#);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let ylab = if log { format!("1e{yv:.2}") } else { format!("{yv:.4}") };
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{xv:.4}</text>"#,
            f.px(xv),
            y0 + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{ylab}</text>"#,
            x0 - 6.0,
            f.py(yv) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );
    let ylabel = if log { format!("log10 {ylabel}") } else { ylabel.to_string() };
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.3}" text-anchor="middle" transform="rotate(-90 16 {:.3})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(&ylabel)
    );
    let _ = writeln!(out, "</g>");
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Series plot; with `log` the vertical coordinate is `log10 y` and
/// non-positive values are dropped.
pub fn series_svg(points: &[(f64, f64)], style: Style, log: bool, xlabel: &str, ylabel: &str) -> Result<String, CliError> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !log || p.1 > 0.0)
        .map(|&(x, y)| (x, if log { y.log10() } else { y }))
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    if pts.is_empty() {
        return Err(CliError::Plot("no plottable points".into()));
    }
    let f = Frame::new(range(pts.iter().map(|p| p.0)), range(pts.iter().map(|p| p.1)));
    let mut out = String::new();
    header_svg(&mut out);
    axes(&mut out, &f, xlabel, ylabel, log);
    match style {
        Style::Line => {
            let coords: Vec<String> = pts.iter().map(|p| format!("{:.3},{:.3}", f.px(p.0), f.py(p.1))).collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
        }
        _ => {
            for p in &pts {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="steelblue"/>"#,
                    f.px(p.0),
                    f.py(p.1)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One `<rect>` per box `[x_lo, x_hi, y_lo, y_hi]`.
pub fn boxes_svg(boxes: &[[f64; 4]]) -> String {
    let f = Frame::new(
        range(boxes.iter().flat_map(|b| [b[0], b[1]])),
        range(boxes.iter().flat_map(|b| [b[2], b[3]])),
    );
    let mut out = String::new();
    header_svg(&mut out);
    axes(&mut out, &f, "x", "y", false);
    let _ = writeln!(out, r#"<g fill="steelblue" stroke="none">"#);
    for b in boxes {
        let (x, y) = (f.px(b[0]), f.py(b[3]));
        let _ = writeln!(
            out,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}"/>"#,
            f.px(b[1]) - x,
            f.py(b[2]) - y
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_geometric_series_is_evenly_spaced() {
        let svg = series_svg(&[(0.0, 1.0), (1.0, 0.5), (2.0, 0.25)], Style::Line, true, "k", "m").unwrap();
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        let ys: Vec<f64> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert!(((ys[1] - ys[0]) - (ys[2] - ys[1])).abs() < 1e-3);
    }

    #[test]
    fn rational_cells() {
        assert_eq!(cell("4/9"), Some(4.0 / 9.0));
        assert_eq!(cell("0.25"), Some(0.25));
        assert_eq!(cell("x"), None);
    }
}
