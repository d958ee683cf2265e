//! Dependency-free SVG line charts and trajectory overlays.

use std::fmt::Write;

use crate::hierarchy::LogRow;
use crate::simworld::{Point2, Shape, World};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points }
    }
}

/// Trailing moving average; the first `window - 1` values average what is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Maps data coordinates to the plot area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Frame {
    fn fit(series: &[Series]) -> Option<Self> {
        let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
        let mut f = Frame { x_min: f64::INFINITY, x_max: f64::NEG_INFINITY, y_min: f64::INFINITY, y_max: f64::NEG_INFINITY };
        let mut any = false;
        for &(x, y) in pts {
            any = true;
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
        if !any {
            return None;
        }
        // Degenerate ranges get a unit span centred on the value.
        if f.x_max - f.x_min < 1e-12 {
            f.x_min -= 0.5;
            f.x_max += 0.5;
        }
        if f.y_max - f.y_min < 1e-12 {
            f.y_min -= 0.5;
            f.y_max += 0.5;
        }
        Some(f)
    }

    pub fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    pub fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart with one `<polyline>` per non-empty series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Option<String> {
    let frame = Frame::fit(series)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="25" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, WIDTH / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (v, y) in [(frame.y_min, y1), (frame.y_max, y0)] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"#, x0 - 4.0, y + 3.0, fmt_tick(v));
    }
    for (v, x) in [(frame.x_min, x0), (frame.x_max, x1)] {
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, y1 + 14.0, fmt_tick(v));
    }
    let mut legend_y = y0 + 10.0;
    for (i, series) in series.iter().enumerate() {
        let pts: Vec<String> = series
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.3},{:.3}", frame.px(x), frame.py(y)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<polyline data-series="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(&series.name),
            pts.join(" ")
        );
        let _ = writeln!(s, r#"<text x="{}" y="{legend_y}" font-size="11" fill="{color}">{}</text>"#, x1 - 150.0, escape(&series.name));
        legend_y += 14.0;
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn column(rows: &[LogRow], f: impl Fn(&LogRow) -> Option<f64>) -> Vec<(f64, f64)> {
    rows.iter().filter_map(|r| f(r).map(|v| (r.episode as f64, v))).collect()
}

fn with_average(name: &str, points: Vec<(f64, f64)>, window: usize) -> Vec<Series> {
    if points.is_empty() {
        return Vec::new();
    }
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let avg = moving_average(&ys, window);
    let avg_pts = points.iter().zip(avg).map(|(p, a)| (p.0, a)).collect();
    vec![Series::new(name, points), Series::new(format!("{name} (avg {window})"), avg_pts)]
}

/// Episode rewards with moving averages.
pub fn reward_chart(rows: &[LogRow], window: usize) -> Option<String> {
    let mut series = with_average("ep_reward_low", column(rows, |r| Some(r.reward_low)), window);
    series.extend(with_average("ep_reward_high", column(rows, |r| r.reward_high), window));
    line_chart("Reward curve", "episode", "episode reward", &series)
}

/// Moving averages of the per-episode mean losses.
pub fn loss_chart(rows: &[LogRow], window: usize) -> Option<String> {
    let avg = |name: &str, pts: Vec<(f64, f64)>| {
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let m = moving_average(&ys, window);
        Series::new(name, pts.iter().zip(m).map(|(p, a)| (p.0, a)).collect())
    };
    let series: Vec<Series> = [
        avg("loss_q", column(rows, |r| r.loss_q)),
        avg("loss_c1", column(rows, |r| r.loss_c1)),
        avg("loss_c2", column(rows, |r| r.loss_c2)),
        avg("loss_actor", column(rows, |r| r.loss_actor)),
    ]
    .into_iter()
    .filter(|s| !s.points.is_empty())
    .collect();
    line_chart("Loss curve", "episode", "loss", &series)
}

/// Draws the world (walls, obstacles, goal) with trajectories on top.
pub fn trajectory_overlay(world: &World, trajectories: &[(String, Vec<Point2>)]) -> String {
    let b = world.bounds;
    let scale = ((WIDTH - 2.0 * MARGIN) / b.width()).min((HEIGHT - 2.0 * MARGIN) / b.height());
    let px = |p: Point2| (MARGIN + (p.x - b.min.x) * scale, HEIGHT - MARGIN - (p.y - b.min.y) * scale);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, y1) = px(b.min);
    let (x1, y0) = px(b.max);
    let _ = writeln!(s, r#"<rect x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    for o in &world.obstacles {
        match o {
            Shape::Circle { center, radius } => {
                let (cx, cy) = px(*center);
                let _ = writeln!(s, r##"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="#999"/>"##, radius * scale);
            }
            Shape::Rect(r) => {
                let (rx0, ry1) = px(r.min);
                let (rx1, ry0) = px(r.max);
                let _ = writeln!(s, r##"<rect x="{rx0:.3}" y="{ry0:.3}" width="{:.3}" height="{:.3}" fill="#999"/>"##, rx1 - rx0, ry1 - ry0);
            }
        }
    }
    let (gx, gy) = px(world.goal);
    let _ = writeln!(s, r#"<circle cx="{gx:.3}" cy="{gy:.3}" r="{:.3}" fill="none" stroke="green"/>"#, world.goal_radius * scale);
    for (i, (name, pts)) in trajectories.iter().enumerate() {
        let coords: Vec<String> = pts.iter().map(|p| {
            let (x, y) = px(*p);
            format!("{x:.3},{y:.3}")
        }).collect();
        let _ = writeln!(
            s,
            r#"<polyline data-series="{}" fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            escape(name),
            COLORS[i % COLORS.len()],
            coords.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}
