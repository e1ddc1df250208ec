//! SVG 1.1 scatter plots, line charts and image grids.
//!
//! Output depends only on the input values, so identical inputs give
//! byte-identical documents.

use std::collections::BTreeMap;
use std::fmt::Write;

use htsne_core::Embedding;

/// Categorical palette, ten saturated colours followed by their light tints.
pub const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
    "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
];

const NOISE_COLOUR: &str = "#b0b0b0";

#[derive(Debug, Clone, PartialEq)]
pub struct SvgStyle {
    /// Width and height of the square canvas in pixels.
    pub size: f64,
    pub margin: f64,
    pub radius: f64,
    pub opacity: f64,
    /// Above this many points each class is drawn as a single path.
    pub batch_threshold: usize,
    pub scale_bar: bool,
    pub title: Option<String>,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self {
            size: 800.0,
            margin: 40.0,
            radius: 2.0,
            opacity: 0.5,
            batch_threshold: 20_000,
            scale_bar: true,
            title: None,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Compact fixed-point number with trailing zeros removed.
fn num(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Largest 1, 2 or 5 × 10^k not exceeding `target`.
pub fn nice_length(target: f64) -> f64 {
    if !(target.is_finite() && target > 0.0) {
        return 1.0;
    }
    let base = 10f64.powf(target.log10().floor());
    [5.0, 2.0, 1.0]
        .into_iter()
        .map(|m| m * base)
        .find(|&l| l <= target)
        .unwrap_or(base)
}

fn open(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = num(width, 2),
        h = num(height, 2)
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

/// Colour per label: sorted distinct labels take palette entries in order,
/// negative labels (noise) are grey.
fn colours(labels: &[i64]) -> BTreeMap<i64, &'static str> {
    let mut map = BTreeMap::new();
    let mut next = 0;
    let distinct: std::collections::BTreeSet<i64> = labels.iter().copied().collect();
    for l in distinct {
        if l < 0 {
            map.insert(l, NOISE_COLOUR);
        } else {
            map.insert(l, PALETTE[next % PALETTE.len()]);
            next += 1;
        }
    }
    map
}

/// Scatter plot of an embedding with one colour per label.
pub fn emit_svg(emb: &Embedding, labels: Option<&[i64]>, style: &SvgStyle) -> String {
    if let Some(l) = labels {
        assert_eq!(l.len(), emb.len(), "one label per point");
    }
    let mut out = String::new();
    open(&mut out, style.size, style.size);
    if let Some(t) = &style.title {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            num(style.size / 2.0, 2),
            num(style.margin * 0.6, 2),
            escape(t)
        );
    }
    if emb.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }

    let (lo, hi) = emb.bounds();
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let inner = style.size - 2.0 * style.margin;
    let scale = if span > 0.0 { inner / span } else { 1.0 };
    // centre the data in the square
    let off_x = style.margin + (inner - (hi[0] - lo[0]) * scale) / 2.0;
    let off_y = style.margin + (inner - (hi[1] - lo[1]) * scale) / 2.0;
    let px = |c: [f64; 2]| {
        (
            off_x + (c[0] - lo[0]) * scale,
            style.size - off_y - (c[1] - lo[1]) * scale,
        )
    };

    let zeros = vec![0i64; emb.len()];
    let labels = labels.unwrap_or(&zeros);
    let palette = colours(labels);
    let r = num(style.radius, 2);

    let _ = writeln!(
        out,
        r#"<g fill-opacity="{}" stroke="none">"#,
        num(style.opacity, 3)
    );
    if emb.len() > style.batch_threshold {
        let mut paths: BTreeMap<i64, String> = BTreeMap::new();
        let d = num(2.0 * style.radius, 2);
        for (c, l) in emb.coords.iter().zip(labels) {
            let (x, y) = px(*c);
            let p = paths.entry(*l).or_default();
            // two arcs draw a full circle
            let _ = write!(
                p,
                "M{} {}m-{r} 0a{r} {r} 0 1 0 {d} 0a{r} {r} 0 1 0-{d} 0",
                num(x, 1),
                num(y, 1)
            );
        }
        for (l, d) in &paths {
            let _ = writeln!(out, r#"<path fill="{}" d="{d}"/>"#, palette[l]);
        }
    } else {
        for (c, l) in emb.coords.iter().zip(labels) {
            let (x, y) = px(*c);
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="{r}" fill="{}"/>"#,
                num(x, 2),
                num(y, 2),
                palette[l]
            );
        }
    }
    out.push_str("</g>\n");

    if style.scale_bar && span > 0.0 {
        let len = nice_length(span / 5.0);
        let x0 = style.margin;
        let y0 = style.size - style.margin / 2.0;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-width="2"/>"#,
            num(x0, 2),
            num(x0 + len * scale, 2),
            y = num(y0, 2)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            num(x0 + len * scale + 6.0, 2),
            num(y0 + 4.0, 2),
            num(len, 10)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Line chart with markers, linear axes and a legend.
pub fn emit_curve_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 440.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let mut out = String::new();
    open(&mut out, w, h);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        num(w / 2.0, 2),
        escape(title)
    );

    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let range = |vals: &mut dyn Iterator<Item = f64>| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in vals {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = range(&mut all.iter().map(|p| p.0));
    let (y0, y1) = range(&mut all.iter().map(|p| p.1));
    let (pw, ph) = (w - left - right, h - top - bottom);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let _ = writeln!(
        out,
        r#"<g stroke="black" fill="none"><line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}"/></g>"#,
        l = num(left, 2),
        r = num(left + pw, 2),
        t = num(top, 2),
        b = num(top + ph, 2)
    );
    let ticks = |lo: f64, hi: f64| {
        let step = nice_length((hi - lo) / 5.0);
        let first = (lo / step).ceil() as i64;
        let last = (hi / step).floor() as i64;
        (first..=last)
            .map(move |k| k as f64 * step)
            .collect::<Vec<_>>()
    };
    for t in ticks(x0, x1) {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            num(sx(t), 2),
            num(top + ph + 16.0, 2),
            num(t, 6)
        );
    }
    for t in ticks(y0, y1) {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            num(left - 6.0, 2),
            num(sy(t) + 4.0, 2),
            num(t, 6)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        num(left + pw / 2.0, 2),
        num(h - 10.0, 2),
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{y}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(y_label),
        y = num(top + ph / 2.0, 2)
    );

    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{},{}", num(sx(x), 2), num(sy(y), 2)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap_or_default();
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{colour}"/>"#);
        }
        let ly = top + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{colour}" text-anchor="end">{}</text>"#,
            num(left + pw - 4.0, 2),
            num(ly, 2),
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grey-scale tiles of square images (e.g. 28×28 cluster means), one row
/// of tiles per call, darkest value drawn black.
pub fn emit_image_grid(images: &[(String, Vec<f64>)], side: usize, pixel: f64) -> String {
    let gap = 8.0;
    let tile = side as f64 * pixel;
    let w = images.len().max(1) as f64 * (tile + gap) + gap;
    let h = tile + 2.0 * gap + 16.0;
    let mut out = String::new();
    open(&mut out, w, h);
    for (k, (caption, values)) in images.iter().enumerate() {
        assert_eq!(values.len(), side * side, "image must be {side}×{side}");
        let hi = values.iter().copied().fold(0.0f64, f64::max);
        let x0 = gap + k as f64 * (tile + gap);
        for (idx, &v) in values.iter().enumerate() {
            let level = if hi > 0.0 {
                255.0 * (1.0 - v / hi)
            } else {
                255.0
            };
            let level = level.round().clamp(0.0, 255.0) as u8;
            if level == 255 {
                continue;
            }
            let _ = writeln!(
                out,
                r##"<rect x="{}" y="{}" width="{p}" height="{p}" fill="#{level:02x}{level:02x}{level:02x}"/>"##,
                num(x0 + (idx % side) as f64 * pixel, 2),
                num(gap + (idx / side) as f64 * pixel, 2),
                p = num(pixel, 2)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            num(x0 + tile / 2.0, 2),
            num(tile + gap + 14.0, 2),
            escape(caption)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> (Embedding, Vec<i64>) {
        let coords = (0..n)
            .map(|i| {
                let t = i as f64 * 0.37;
                [t.cos() * (1.0 + (i % 10) as f64), t.sin() * 3.0]
            })
            .collect();
        (
            Embedding::new(coords).unwrap(),
            (0..n as i64).map(|i| i % 10).collect(),
        )
    }

    #[test]
    fn single_point_single_circle() {
        let emb = Embedding::new(vec![[1.0, 2.0]]).unwrap();
        let svg = emit_svg(&emb, None, &SvgStyle::default());
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn one_circle_per_point_with_opacity() {
        let (emb, labels) = toy(57);
        let svg = emit_svg(&emb, Some(&labels), &SvgStyle::default());
        assert_eq!(svg.matches("<circle").count(), 57);
        assert!(svg.contains(r#"fill-opacity="0.5""#));
        for c in &PALETTE[..10] {
            assert!(svg.contains(c));
        }
        // scale bar line plus its label
        assert_eq!(svg.matches("<line").count(), 1);
    }

    #[test]
    fn deterministic() {
        let (emb, labels) = toy(300);
        let a = emit_svg(&emb, Some(&labels), &SvgStyle::default());
        let b = emit_svg(&emb.clone(), Some(&labels.clone()), &SvgStyle::default());
        assert_eq!(a, b);
    }

    #[test]
    fn batched_large_plot_is_small() {
        let (emb, labels) = toy(70_000);
        let svg = emit_svg(&emb, Some(&labels), &SvgStyle::default());
        assert_eq!(svg.matches("<path").count(), 10);
        assert_eq!(svg.matches("<circle").count(), 0);
        assert!(svg.len() < 20 * 1024 * 1024, "{} bytes", svg.len());
        // every point contributes one move command
        assert_eq!(svg.matches('M').count(), 70_000);
    }

    #[test]
    fn points_stay_inside_canvas() {
        let (emb, _) = toy(100);
        let style = SvgStyle::default();
        let svg = emit_svg(&emb, None, &style);
        for part in svg.split("cx=\"").skip(1) {
            let x: f64 = part.split('"').next().unwrap().parse().unwrap();
            assert!(x >= style.margin - 1e-9 && x <= style.size - style.margin + 1e-9);
        }
    }

    #[test]
    fn noise_is_grey() {
        let emb = Embedding::new(vec![[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let svg = emit_svg(&emb, Some(&[-1, 3]), &SvgStyle::default());
        assert!(svg.contains(NOISE_COLOUR));
        assert!(svg.contains(PALETTE[0]));
    }

    #[test]
    fn nice_lengths() {
        assert_eq!(nice_length(7.3), 5.0);
        assert_eq!(nice_length(0.25), 0.2);
        assert_eq!(nice_length(100.0), 100.0);
        assert_eq!(nice_length(0.0), 1.0);
    }

    #[test]
    fn curve_has_one_marker_per_point() {
        let s = Series {
            name: "ratio".into(),
            points: vec![(0.2, 5.0), (1.0, 3.0), (3.0, 2.0)],
        };
        let svg = emit_curve_svg("sep", "alpha", "ratio", &[s]);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn image_grid() {
        let img = (0..9).map(|v| v as f64).collect::<Vec<_>>();
        let svg = emit_image_grid(&[("a".into(), img)], 3, 4.0);
        // the zero pixel is white and skipped
        assert_eq!(svg.matches("<rect").count(), 1 + 8);
    }
}
