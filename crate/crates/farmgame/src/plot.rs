//! Minimal SVG charts. The CSV files are the contract; these are for eyes.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 10] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

pub struct Bar {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub marked: bool,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = (hi - lo) * 0.05;
        Axis {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.max(f64::MIN_POSITIVE).log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        (0..=4)
            .map(|i| {
                let t = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                let v = if self.log { 10f64.powf(t) } else { t };
                (v, format!("{v:.3}"))
            })
            .collect()
    }
}

fn px(x: &Axis, v: f64) -> f64 {
    LEFT + x.frac(v) * (W - LEFT - RIGHT)
}

fn py(y: &Axis, v: f64) -> f64 {
    H - BOTTOM - y.frac(v) * (H - TOP - BOTTOM)
}

fn frame(svg: &mut String, title: &str, xlabel: &str, ylabel: &str, x: &Axis, y: &Axis) {
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>
<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>
"#,
        (LEFT + W - RIGHT) / 2.0,
        escape(title),
        (LEFT + W - RIGHT) / 2.0,
        H - 10.0,
        escape(xlabel),
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        escape(ylabel),
        W - LEFT - RIGHT,
        H - TOP - BOTTOM,
    );
    for (v, label) in x.ticks() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
            px(x, v),
            H - BOTTOM + 14.0
        );
    }
    for (v, label) in y.ticks() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#,
            LEFT - 4.0,
            py(y, v) + 4.0
        );
    }
}

fn legend(svg: &mut String, names: &[String]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - RIGHT + 12.0,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            W - RIGHT + 26.0,
            y,
            escape(name)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn scatter(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64, usize)], names: &[String]) -> String {
    let x = Axis::fit(points.iter().map(|p| p.0), false);
    let y = Axis::fit(points.iter().map(|p| p.1), false);
    let mut svg = String::new();
    frame(&mut svg, title, xlabel, ylabel, &x, &y);
    for &(a, b, g) in points {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
            px(&x, a),
            py(&y, b),
            PALETTE[g % PALETTE.len()]
        );
    }
    legend(&mut svg, names);
    svg.push_str("</svg>\n");
    svg
}

/// Line chart; `log` puts both axes on a log scale. A dashed series reuses
/// the colour of the solid series before it.
pub fn lines(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log: bool) -> String {
    let x = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), log);
    let y = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), log);
    let mut svg = String::new();
    frame(&mut svg, title, xlabel, ylabel, &x, &y);
    let mut names = Vec::new();
    let mut colour = 0;
    for s in series {
        if !s.dashed {
            colour = names.len();
            names.push(s.name.clone());
        }
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|p| !log || (p.0 > 0.0 && p.1 > 0.0))
            .map(|&(a, b)| format!("{:.2},{:.2}", px(&x, a), py(&y, b)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{}/>"#,
            path.join(" "),
            PALETTE[colour % PALETTE.len()],
            if s.dashed { r#" stroke-dasharray="4 3""# } else { "" }
        );
    }
    legend(&mut svg, &names);
    svg.push_str("</svg>\n");
    svg
}

/// Paired bars per category (low level, high level); marked pairs get a star.
pub fn bars(title: &str, ylabel: &str, bars: &[Bar]) -> String {
    let x = Axis {
        lo: 0.0,
        hi: bars.len().max(1) as f64,
        log: false,
    };
    let top = bars.iter().map(|b| b.low.max(b.high)).fold(0.0, f64::max).max(1e-9);
    let y = Axis {
        lo: 0.0,
        hi: top * 1.15,
        log: false,
    };
    let mut svg = String::new();
    frame(&mut svg, title, "", ylabel, &Axis { lo: 0.0, hi: 1.0, log: false }, &y);
    let base = py(&y, 0.0);
    for (i, b) in bars.iter().enumerate() {
        for (j, v) in [b.low, b.high].into_iter().enumerate() {
            let left = px(&x, i as f64 + 0.15 + 0.35 * j as f64);
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                left,
                py(&y, v),
                px(&x, 0.33) - px(&x, 0.0),
                base - py(&y, v),
                PALETTE[j]
            );
        }
        let mid = px(&x, i as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<text x="{mid:.2}" y="{:.1}" text-anchor="middle" font-size="9">{}</text>"#,
            H - BOTTOM + 14.0,
            escape(&b.name)
        );
        if b.marked {
            let _ = writeln!(
                svg,
                r#"<text x="{mid:.2}" y="{:.2}" text-anchor="middle" font-size="14">*</text>"#,
                py(&y, b.low.max(b.high)) - 4.0
            );
        }
    }
    legend(&mut svg, &["low level".to_string(), "high level".to_string()]);
    svg.push_str("</svg>\n");
    svg
}
