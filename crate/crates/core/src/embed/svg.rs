//! Standalone SVG scatter plots of provisions on a pair of pattern axes.

use std::fmt::Write as _;
use std::path::Path;

use super::ColorCode;
use crate::corpus::{Axis, Corpus, Pole, MAX_SCORE};
use crate::error::{Error, Result};

const SIZE: f64 = 520.0;
const MARGIN: f64 = 70.0;
const RADIUS: f64 = 4.5;
/// Largest jitter offset, in score units, that spreads provisions sharing
/// the same integer coordinates.
const JITTER: f64 = 0.3;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Low-discrepancy offset in `[-JITTER, JITTER)` for point `i` on one of two
/// coordinates.
fn jitter(i: usize, coord: usize) -> f64 {
    const STEPS: [f64; 2] = [0.618_033_988_749_895, 0.754_877_666_246_693];
    let t = ((i + 1) as f64 * STEPS[coord]).fract();
    (2.0 * t - 1.0) * JITTER
}

fn to_px(score: f64) -> f64 {
    let span = 2.0 * (MAX_SCORE as f64 + 0.5);
    MARGIN + (score + MAX_SCORE as f64 + 0.5) / span * (SIZE - 2.0 * MARGIN)
}

pub fn render_scatter_svg(corpus: &Corpus, x_axis: Axis, y_axis: Axis, colors: &[ColorCode]) -> Result<String> {
    if x_axis == y_axis {
        return Err(Error::SameAxis(x_axis));
    }
    if colors.len() != corpus.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} colors for {} provisions",
            colors.len(),
            corpus.len()
        )));
    }
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(w, r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#);

    let lo = to_px(-(MAX_SCORE as f64) - 0.5);
    let hi = to_px(MAX_SCORE as f64 + 0.5);
    let _ = writeln!(w, r##"<g stroke="#dddddd" stroke-width="1">"##);
    for v in -MAX_SCORE..=MAX_SCORE {
        let p = to_px(v as f64);
        let q = SIZE - p;
        let _ = writeln!(w, r#"<line x1="{p:.2}" y1="{lo:.2}" x2="{p:.2}" y2="{hi:.2}"/>"#);
        let _ = writeln!(w, r#"<line x1="{lo:.2}" y1="{q:.2}" x2="{hi:.2}" y2="{q:.2}"/>"#);
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(
        w,
        r##"<rect x="{lo:.2}" y="{lo:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444444"/>"##,
        hi - lo,
        hi - lo
    );

    let _ = writeln!(w, r#"<g font-family="sans-serif" font-size="12" fill="black">"#);
    for v in -MAX_SCORE..=MAX_SCORE {
        let p = to_px(v as f64);
        let _ = writeln!(
            w,
            r#"<text x="{p:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#,
            hi + 16.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v}</text>"#,
            lo - 6.0,
            SIZE - p + 4.0
        );
    }
    let mid = SIZE / 2.0;
    let _ = writeln!(
        w,
        r#"<text x="{mid:.2}" y="{:.2}" text-anchor="middle" font-size="14">{} ← {} → {}</text>"#,
        SIZE - 20.0,
        x_axis.pole_name(Pole::First),
        x_axis.name(),
        x_axis.pole_name(Pole::Second)
    );
    let _ = writeln!(
        w,
        r#"<text x="20" y="{mid:.2}" text-anchor="middle" font-size="14" transform="rotate(-90 20 {mid:.2})">{} ← {} → {}</text>"#,
        y_axis.pole_name(Pole::First),
        y_axis.name(),
        y_axis.pole_name(Pole::Second)
    );
    let _ = writeln!(w, "</g>");

    let _ = writeln!(w, r#"<g stroke="black" stroke-width="0.5" fill-opacity="0.9">"#);
    for (i, (p, c)) in corpus.provisions().iter().zip(colors).enumerate() {
        let x = to_px(p.scores.get(x_axis) as f64 + jitter(i, 0));
        let y = SIZE - to_px(p.scores.get(y_axis) as f64 + jitter(i, 1));
        let _ = writeln!(
            w,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{RADIUS}" fill="{}"><title>{}</title></circle>"#,
            c.hex(),
            escape(&p.id)
        );
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, "</svg>");
    Ok(s)
}

pub fn emit_scatter_svg(
    corpus: &Corpus,
    x_axis: Axis,
    y_axis: Axis,
    colors: &[ColorCode],
    out_path: &Path,
) -> Result<()> {
    let svg = render_scatter_svg(corpus, x_axis, y_axis, colors)?;
    std::fs::write(out_path, svg).map_err(|e| Error::io(out_path, e))
}
