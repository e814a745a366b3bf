//! Minimal SVG line chart of a posterior-mean trajectory.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
/// Longer trajectories are decimated to about this many vertices.
const MAX_POINTS: usize = 4000;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Stage on the x axis, posterior mean in [0, 1] on the y axis, with dashed
/// lines at the verdict thresholds.
pub fn trajectory_svg(title: &str, means: &[f64], upper: f64, lower: f64) -> String {
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let n = means.len().max(1);
    let x = |k: usize| {
        MARGIN
            + plot_w
                * if n > 1 {
                    k as f64 / (n - 1) as f64
                } else {
                    0.5
                }
    };
    let y = |v: f64| MARGIN + plot_h * (1.0 - v.clamp(0.0, 1.0));

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for (v, label) in [(upper, "upper"), (lower, "lower")] {
        let _ = writeln!(
            out,
            r##"<line class="{label}" x1="{MARGIN}" x2="{0}" y1="{1:.2}" y2="{1:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
            MARGIN + plot_w,
            y(v)
        );
    }
    for (v, text) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{text}</text>"#,
            MARGIN - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">stage (1..{})</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        means.len()
    );

    let stride = means.len().div_ceil(MAX_POINTS).max(1);
    let mut points = String::new();
    for (k, &m) in means.iter().enumerate() {
        if k % stride == 0 || k + 1 == means.len() {
            let _ = write!(points, "{:.2},{:.2} ", x(k), y(m));
        }
    }
    let _ = writeln!(
        out,
        r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.2" points="{}"/>"##,
        points.trim_end()
    );
    out.push_str("</svg>\n");
    out
}
