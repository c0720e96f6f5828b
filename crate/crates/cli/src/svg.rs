//! Minimal SVG line and scatter charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers only, without connecting lines.
    pub scatter: bool,
    /// Palette slot; defaults to the series index. Unnamed series stay out
    /// of the legend.
    pub color: Option<usize>,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    pub fn render(&self) -> String {
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let pts = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter().copied())
                .filter(|(x, y)| tx(*x).is_finite() && y.is_finite())
        };
        let (x0, x1) = bounds(pts().map(|(x, _)| tx(x)));
        let (y0, y1) = bounds(pts().map(|(_, y)| y));
        let sx = |x: f64| PAD + (tx(x) - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<path d="M{PAD},{PAD} V{b} H{r}" fill="none" stroke="black"/>"#,
            b = H - PAD,
            r = W - PAD
        );
        for (v, anchor_y) in [(y0, H - PAD), (y1, PAD)] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{anchor_y}" text-anchor="end">{v:.3e}</text>"#,
                PAD - 4.0
            );
        }
        for (v, anchor_x) in [(x0, PAD), (x1, W - PAD)] {
            let shown = if self.log_x { 10f64.powf(v) } else { v };
            let _ = writeln!(
                s,
                r#"<text x="{anchor_x}" y="{}" text-anchor="middle">{shown:.3e}</text>"#,
                H - PAD + 16.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(&self.y_label)
        );
        let mut legend = 0usize;
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[series.color.unwrap_or(i) % PALETTE.len()];
            let visible: Vec<(f64, f64)> = series
                .points
                .iter()
                .copied()
                .filter(|(x, y)| tx(*x).is_finite() && y.is_finite())
                .collect();
            if series.scatter {
                for (x, y) in &visible {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                        sx(*x),
                        sy(*y)
                    );
                }
            } else if !visible.is_empty() {
                let path: Vec<String> = visible
                    .iter()
                    .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
                    path.join(" ")
                );
            }
            if !series.name.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                    W - PAD - 120.0,
                    PAD + 14.0 * legend as f64,
                    escape(&series.name)
                );
                legend += 1;
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_series() {
        let chart = Chart {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: true,
            series: vec![
                Series {
                    name: "line".into(),
                    points: vec![(1.0, 2.0), (10.0, 3.0), (0.0, 1.0)],
                    scatter: false,
                    color: None,
                },
                Series {
                    name: "dots".into(),
                    points: vec![(1.0, 1.0)],
                    scatter: true,
                    color: None,
                },
            ],
        };
        let svg = chart.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("a &lt; b"));
    }
}
