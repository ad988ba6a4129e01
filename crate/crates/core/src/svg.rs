//! Minimal SVG bar charts of harmonic spectra, normalised to the fundamental.

use std::fmt::Write as _;

use crate::analyzer::HarmonicSpectrum;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Magnitudes as a percentage of the fundamental.
fn percent_of_fundamental(s: &HarmonicSpectrum) -> Vec<f64> {
    let f = s.magnitudes.first().copied().unwrap_or(0.0);
    if f > 0.0 {
        s.magnitudes.iter().map(|m| 100.0 * m / f).collect()
    } else {
        vec![0.0; s.magnitudes.len()]
    }
}

/// Bar chart of a single spectrum.
pub fn spectrum_chart(spectrum: &HarmonicSpectrum, title: &str) -> String {
    spectra_chart(&[(title, spectrum)], title)
}

/// Grouped bar chart of several spectra sharing one order axis.
pub fn spectra_chart(series: &[(&str, &HarmonicSpectrum)], title: &str) -> String {
    let orders = series.iter().map(|(_, s)| s.max_order()).max().unwrap_or(1).max(1);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let slot = plot_w / orders as f64;
    let bar_w = 0.8 * slot / series.len().max(1) as f64;
    let y = |pct: f64| TOP + plot_h * (1.0 - pct.clamp(0.0, 100.0) / 100.0);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    // y grid and labels
    for pct in (0..=100).step_by(20) {
        let yy = y(f64::from(pct));
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/>"##,
            WIDTH - RIGHT
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{pct}%</text>"#,
            LEFT - 6.0,
            yy + 4.0
        );
    }

    for (k, (_, s)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        for (i, pct) in percent_of_fundamental(s).into_iter().enumerate() {
            let x = LEFT + slot * i as f64 + 0.1 * slot + bar_w * k as f64;
            let top = y(pct);
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{top:.2}" width="{bar_w:.2}" height="{:.2}" fill="{colour}"/>"#,
                TOP + plot_h - top
            );
        }
    }

    // axes
    let _ = writeln!(
        out,
        r#"<polyline points="{LEFT},{TOP} {LEFT},{:.2} {:.2},{:.2}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        WIDTH - RIGHT,
        TOP + plot_h
    );
    let tick_every = if orders > 20 { 5 } else { 1 };
    for h in 1..=orders {
        if h != 1 && h % tick_every != 0 {
            continue;
        }
        let x = LEFT + slot * (h as f64 - 0.5);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{h}</text>"#,
            TOP + plot_h + 16.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">harmonic order</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );

    if series.len() > 1 {
        for (k, (label, s)) in series.iter().enumerate() {
            let yy = TOP + 8.0 + 16.0 * k as f64;
            let x = WIDTH - RIGHT - 220.0;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/>"#,
                yy - 9.0,
                PALETTE[k % PALETTE.len()]
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{yy:.1}">{} (THD {:.2}%)</text>"#,
                x + 16.0,
                escape(label),
                100.0 * s.thd
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
