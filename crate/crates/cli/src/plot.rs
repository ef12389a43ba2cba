use std::fmt::Write;

use muscle_core::Segmentation;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;
const LEVEL_COLORS: [&str; 4] = ["#1a1a1a", "#1f3a93", "#7b241c", "#196f3d"];

struct Frame {
    n: f64,
    lo: f64,
    hi: f64,
}

impl Frame {
    /// Left edge of sample `i` (1-based); `i = n + 1` is the right border.
    fn x(&self, i: usize) -> f64 {
        MARGIN + (i as f64 - 1.0) / self.n * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.lo) / (self.hi - self.lo) * (HEIGHT - 2.0 * MARGIN)
    }
}

/// Self-contained SVG of the data, the fitted step functions and the change points.
pub(crate) fn render(data: &[f64], seg: &Segmentation) -> String {
    let fits: Vec<f64> = seg.values.iter().flatten().copied().collect();
    let (mut lo, mut hi) = data
        .iter()
        .chain(&fits)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let f = Frame {
        n: data.len() as f64,
        lo: lo - pad,
        hi: hi + pad,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{:.2}" height="{:.2}" fill="none" stroke="#999999"/>"##,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(s, r##"<g fill="#b0b0b0">"##);
    for (i, &v) in data.iter().enumerate() {
        let cx = 0.5 * (f.x(i + 1) + f.x(i + 2));
        let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{:.2}" r="1.5"/>"#, f.y(v));
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r##"<g stroke="#c0392b" stroke-dasharray="4 3">"##);
    for &b in seg.change_points() {
        let x = f.x(b);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{:.2}"/>"#,
            HEIGHT - MARGIN
        );
    }
    let _ = writeln!(s, "</g>");

    for level in 0..seg.betas.len() {
        let mut pts = String::new();
        for ((a, e), v) in seg.segments().into_iter().zip(&seg.values) {
            let y = f.y(v[level]);
            let _ = write!(pts, "{:.2},{y:.2} {:.2},{y:.2} ", f.x(a), f.x(e + 1));
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.trim_end(),
            LEVEL_COLORS[level % LEVEL_COLORS.len()]
        );
    }

    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.4}</text>"#,
        MARGIN - 4.0,
        f.y(hi),
        hi
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.4}</text>"#,
        MARGIN - 4.0,
        f.y(lo),
        lo
    );
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{:.2}">1</text>"#, HEIGHT - MARGIN + 14.0);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 14.0,
        data.len()
    );
    s.push_str("</svg>\n");
    s
}
