//! Minimal SVG output: a histogram and a scatter plot.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn finite_range(values: &[f64]) -> Option<(f64, f64)> {
    let mut it = values.iter().copied().filter(|v| v.is_finite());
    let first = it.next()?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        Some((lo, hi))
    } else {
        Some((lo - 0.5, hi + 0.5))
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-size="16" text-anchor="middle" font-family="sans-serif">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle" font-family="sans-serif">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    let _ = writeln!(
        out,
        r#"<path d="M{m} {top} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        top = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
}

fn axis_ticks(out: &mut String, lo: f64, hi: f64, horizontal: bool) {
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let value = lo + frac * (hi - lo);
        if horizontal {
            let x = MARGIN + frac * (WIDTH - 2.0 * MARGIN);
            let _ = writeln!(
                out,
                r#"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle" font-family="sans-serif">{value:.3}</text>"#,
                HEIGHT - MARGIN + 14.0
            );
        } else {
            let y = HEIGHT - MARGIN - frac * (HEIGHT - 2.0 * MARGIN);
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{y:.1}" font-size="10" text-anchor="end" font-family="sans-serif">{value:.3}</text>"#,
                MARGIN - 4.0
            );
        }
    }
}

/// Histogram with `bins` equal-width bins over the finite values.
pub fn histogram_svg(values: &[f64], bins: usize, title: &str, x_label: &str) -> String {
    let bins = bins.max(1);
    let mut out = String::new();
    header(&mut out, title, x_label, "count");
    if let Some((lo, hi)) = finite_range(values) {
        let mut counts = vec![0usize; bins];
        for v in values.iter().filter(|v| v.is_finite()) {
            let b = (((v - lo) / (hi - lo)) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let max = *counts.iter().max().unwrap_or(&1) as f64;
        let plot_w = WIDTH - 2.0 * MARGIN;
        let plot_h = HEIGHT - 2.0 * MARGIN;
        let bar_w = plot_w / bins as f64;
        for (b, &c) in counts.iter().enumerate() {
            let h = plot_h * c as f64 / max;
            let _ = writeln!(
                out,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a7ab5" stroke="white"/>"##,
                MARGIN + b as f64 * bar_w,
                HEIGHT - MARGIN - h,
                bar_w,
                h
            );
        }
        axis_ticks(&mut out, lo, hi, true);
        axis_ticks(&mut out, 0.0, max, false);
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter of paired points; non-finite pairs are skipped.
pub fn scatter_svg(xs: &[f64], ys: &[f64], title: &str, x_label: &str, y_label: &str) -> String {
    let mut out = String::new();
    header(&mut out, title, x_label, y_label);
    let pairs: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x, y))
        .collect();
    let xr = finite_range(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let yr = finite_range(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    if let (Some((x0, x1)), Some((y0, y1))) = (xr, yr) {
        for (x, y) in &pairs {
            let px = MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
            let py = HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
            let _ = writeln!(
                out,
                r##"<circle cx="{px:.2}" cy="{py:.2}" r="2" fill="#b5504a" fill-opacity="0.5"/>"##
            );
        }
        axis_ticks(&mut out, x0, x1, true);
        axis_ticks(&mut out, y0, y1, false);
    }
    out.push_str("</svg>\n");
    out
}
