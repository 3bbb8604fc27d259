use std::fmt::Write as _;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One plotted series.
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Half-width of the shaded band around `y`.
    pub band: Option<Vec<f64>>,
    pub color: &'static str,
}

pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

pub struct Scatter {
    pub title: String,
    /// `(x, y, group)`.
    pub points: Vec<(f64, f64, usize)>,
    pub groups: Vec<(String, &'static str)>,
}

const W: f64 = 420.0;
const H: f64 = 300.0;
const PAD_L: f64 = 56.0;
const PAD_R: f64 = 16.0;
const PAD_T: f64 = 30.0;
const PAD_B: f64 = 44.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Frame {
    x0: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    log_x: bool,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let x = if self.log_x { x.log10() } else { x };
        self.x0 + PAD_L + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * (W - PAD_L - PAD_R)
    }

    fn py(&self, y: f64) -> f64 {
        PAD_T + (1.0 - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0)) * (H - PAD_T - PAD_B)
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (l, r) = (self.x0 + PAD_L, self.x0 + W - PAD_R);
        let (t, b) = (PAD_T, H - PAD_B);
        let _ = writeln!(out, r##"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##, r - l, b - t);
        let _ = writeln!(out, r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="13">{}</text>"#, (l + r) / 2.0, esc(title));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#, (l + r) / 2.0, H - 8.0, esc(x_label));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            self.x0 + 14.0,
            (t + b) / 2.0,
            self.x0 + 14.0,
            (t + b) / 2.0,
            esc(y_label)
        );
        for i in 0..=4 {
            let fy = self.y_range.0 + (self.y_range.1 - self.y_range.0) * i as f64 / 4.0;
            let y = self.py(fy);
            let _ = writeln!(out, r##"<line x1="{:.1}" y1="{y:.1}" x2="{l:.1}" y2="{y:.1}" stroke="#333"/>"##, l - 4.0);
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{fy:.3}</text>"#, l - 6.0, y + 3.0);
            let fx = self.x_range.0 + (self.x_range.1 - self.x_range.0) * i as f64 / 4.0;
            let x = l + (r - l) * i as f64 / 4.0;
            let shown = if self.log_x { 10f64.powf(fx) } else { fx };
            let _ = writeln!(out, r##"<line x1="{x:.1}" y1="{b:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/>"##, b + 4.0);
            let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#, b + 15.0, fmt_tick(shown));
        }
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn render_panel(out: &mut String, panel: &Panel, x0: f64) {
    let tx = |x: f64| if panel.log_x { x.log10() } else { x };
    let x_range = range(panel.series.iter().flat_map(|s| s.x.iter().map(|&x| tx(x))));
    let y_range = range(panel.series.iter().flat_map(|s| {
        let band = s.band.clone().unwrap_or_else(|| vec![0.0; s.y.len()]);
        s.y.iter().zip(band).flat_map(|(y, b)| [y - b, y + b]).collect::<Vec<_>>()
    }));
    let frame = Frame {
        x0,
        x_range,
        y_range,
        log_x: panel.log_x,
    };
    frame.axes(out, &panel.title, &panel.x_label, &panel.y_label);
    for s in &panel.series {
        if let Some(band) = &s.band {
            let mut pts: Vec<String> = s.x.iter().zip(&s.y).zip(band).map(|((x, y), b)| format!("{:.2},{:.2}", frame.px(*x), frame.py(y + b))).collect();
            pts.extend(s.x.iter().zip(&s.y).zip(band).rev().map(|((x, y), b)| format!("{:.2},{:.2}", frame.px(*x), frame.py(y - b))));
            let _ = writeln!(out, r#"<polygon class="band" points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#, pts.join(" "), s.color);
        }
        let pts: Vec<String> = s.x.iter().zip(&s.y).map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-series="{}" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            esc(&s.label),
            pts.join(" "),
            s.color
        );
    }
    for (i, s) in panel.series.iter().enumerate() {
        let y = PAD_T + 12.0 + 14.0 * i as f64;
        let x = x0 + W - PAD_R - 110.0;
        let _ = writeln!(out, r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="2"/>"#, x + 16.0, s.color);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#, x + 20.0, y + 3.0, esc(&s.label));
    }
}

fn data_comment(out: &mut String, panels: &[Panel]) {
    let _ = writeln!(out, "<!-- data");
    for p in panels {
        for s in &p.series {
            let _ = write!(out, "{} / {}:", p.title.replace("--", "-"), s.label.replace("--", "-"));
            for (i, (x, y)) in s.x.iter().zip(&s.y).enumerate() {
                let b = s.band.as_ref().map_or(0.0, |b| b[i]);
                let _ = write!(out, " ({x}, {y}, {b})");
            }
            let _ = writeln!(out);
        }
    }
    let _ = writeln!(out, "-->");
}

/// Side-by-side line panels with optional bands.
pub fn line_panels(panels: &[Panel]) -> String {
    let mut out = String::new();
    let width = W * panels.len() as f64;
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{H}" viewBox="0 0 {width} {H}" font-family="sans-serif">"#);
    data_comment(&mut out, panels);
    let _ = writeln!(out, r#"<rect width="{width}" height="{H}" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, W * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter plot with one colour per group.
pub fn scatter(plot: &Scatter) -> String {
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">"#);
    let _ = writeln!(out, "<!-- data");
    for (x, y, g) in &plot.points {
        let _ = writeln!(out, "{x},{y},{g}");
    }
    let _ = writeln!(out, "-->");
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let frame = Frame {
        x0: 0.0,
        x_range: range(plot.points.iter().map(|p| p.0)),
        y_range: range(plot.points.iter().map(|p| p.1)),
        log_x: false,
    };
    frame.axes(&mut out, &plot.title, "embedding 1", "embedding 2");
    for (x, y, g) in &plot.points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
            frame.px(*x),
            frame.py(*y),
            plot.groups[*g].1
        );
    }
    for (i, (label, color)) in plot.groups.iter().enumerate() {
        let y = PAD_T + 12.0 + 14.0 * i as f64;
        let x = W - PAD_R - 110.0;
        let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{y:.1}" r="4" fill="{color}"/>"#, x + 8.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#, x + 20.0, y + 3.0, esc(label));
    }
    out.push_str("</svg>\n");
    out
}
