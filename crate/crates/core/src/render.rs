//! Standalone SVG figures drawn from computed numbers only. Coordinates are
//! written with fixed precision so identical inputs give identical bytes.

use std::fmt::Write as _;

use crate::metrics::{ConfusionMatrix, RocCurve};
use crate::stats::{CorrelationMatrix, FiveNumberSummary};

fn header(out: &mut String, w: u32, h: u32) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal box-and-whisker plot.
pub fn box_plot_svg(name: &str, s: &FiveNumberSummary) -> String {
    let (w, h) = (480u32, 160u32);
    let (left, right) = (40.0, 440.0);
    let span = (s.max - s.min).max(f64::MIN_POSITIVE);
    let x = |v: f64| {
        if s.max == s.min {
            (left + right) / 2.0
        } else {
            left + (v - s.min) / span * (right - left)
        }
    };
    let mid = 80.0;
    let mut out = String::new();
    header(&mut out, w, h);
    let _ = writeln!(out, r#"<text x="240" y="20" text-anchor="middle">{}</text>"#, escape(name));
    let _ = writeln!(
        out,
        r#"<line x1="{:.2}" y1="{mid}" x2="{:.2}" y2="{mid}" stroke="black"/>"#,
        x(s.whisker_low),
        x(s.q1)
    );
    let _ = writeln!(
        out,
        r#"<line x1="{:.2}" y1="{mid}" x2="{:.2}" y2="{mid}" stroke="black"/>"#,
        x(s.q3),
        x(s.whisker_high)
    );
    for v in [s.whisker_low, s.whisker_high] {
        let _ = writeln!(
            out,
            r#"<line x1="{0:.2}" y1="65" x2="{0:.2}" y2="95" stroke="black"/>"#,
            x(v)
        );
    }
    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="55" width="{:.2}" height="50" fill="#9ecae1" stroke="black"/>"##,
        x(s.q1),
        (x(s.q3) - x(s.q1)).max(0.5)
    );
    let _ = writeln!(
        out,
        r#"<line x1="{0:.2}" y1="55" x2="{0:.2}" y2="105" stroke="black" stroke-width="2"/>"#,
        x(s.median)
    );
    if s.min < s.whisker_low {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{mid}" r="3" fill="none" stroke="black"/>"#, x(s.min));
    }
    if s.max > s.whisker_high {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{mid}" r="3" fill="none" stroke="black"/>"#, x(s.max));
    }
    let _ = writeln!(
        out,
        r#"<text x="{left}" y="135">min {}</text><text x="{right}" y="135" text-anchor="end">max {}</text>"#,
        s.min, s.max
    );
    let _ = writeln!(
        out,
        r#"<text x="240" y="150" text-anchor="middle">q1 {} | median {} | q3 {} | outliers {}</text>"#,
        s.q1, s.median, s.q3, s.outlier_count
    );
    out.push_str("</svg>\n");
    out
}

/// Diverging blue-white-red color for r in [-1, 1].
fn diverging(r: f64) -> String {
    let t = r.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

pub fn heatmap_svg(c: &CorrelationMatrix) -> String {
    let k = c.names.len() as u32;
    let cell = 44u32;
    let margin = 130u32;
    let size = margin + k * cell + 10;
    let mut out = String::new();
    header(&mut out, size, size);
    for (i, name) in c.names.iter().enumerate() {
        let pos = margin + i as u32 * cell + cell / 2;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{pos}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            margin - 6,
            escape(name)
        );
        let _ = writeln!(
            out,
            r#"<text transform="translate({pos},{}) rotate(-60)">{}</text>"#,
            margin - 6,
            escape(name)
        );
    }
    for (i, row) in c.values.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            let (x, y) = (margin + j as u32 * cell, margin + i as u32 * cell);
            let _ = writeln!(
                out,
                r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}"/><text x="{}" y="{}" text-anchor="middle" dominant-baseline="middle" font-size="10">{:.2}</text>"#,
                diverging(r),
                x + cell / 2,
                y + cell / 2,
                r
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// 2x2 matrix with row-normalized shading; rows are actual classes.
pub fn confusion_svg(cm: &ConfusionMatrix) -> String {
    let n = cm.normalized();
    let counts = [[cm.tp, cm.fn_], [cm.fp, cm.tn]];
    let labels = [">50K", "<=50K"];
    let mut out = String::new();
    header(&mut out, 360, 320);
    let _ = writeln!(out, r#"<text x="210" y="30" text-anchor="middle">predicted</text>"#);
    let _ = writeln!(out, r#"<text transform="translate(30,190) rotate(-90)" text-anchor="middle">actual</text>"#);
    for (i, label) in labels.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="60" text-anchor="middle">{}</text><text x="100" y="{}" text-anchor="end">{}</text>"#,
            160 + i * 110,
            escape(label),
            125 + i * 110,
            escape(label)
        );
    }
    for i in 0..2 {
        for j in 0..2 {
            let v = n[i][j];
            let shade = (255.0 * (1.0 - 0.8 * v)).round() as u8;
            let (x, y) = (105 + j * 110, 70 + i * 110);
            let _ = writeln!(
                out,
                r#"<rect x="{x}" y="{y}" width="110" height="110" fill="rgb({shade},{shade},255)" stroke="black"/><text x="{}" y="{}" text-anchor="middle">{:.3}</text><text x="{}" y="{}" text-anchor="middle" font-size="10">n={}</text>"#,
                x + 55,
                y + 55,
                v,
                x + 55,
                y + 75,
                counts[i][j]
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn roc_svg(curve: &RocCurve) -> String {
    let (w, h) = (420u32, 420u32);
    let (x0, y0, size) = (50.0, 370.0, 340.0);
    let mut out = String::new();
    header(&mut out, w, h);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{}" width="{size}" height="{size}" fill="none" stroke="black"/>"#,
        y0 - size
    );
    let _ = writeln!(
        out,
        r##"<line x1="{x0}" y1="{y0}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
        x0 + size,
        y0 - size
    );
    let mut path = String::new();
    for (i, p) in curve.points.iter().enumerate() {
        let _ = write!(
            path,
            "{}{:.2},{:.2} ",
            if i == 0 { "M" } else { "L" },
            x0 + p.fpr * size,
            y0 - p.tpr * size
        );
    }
    let _ = writeln!(
        out,
        r##"<path d="{}" fill="none" stroke="#d62728" stroke-width="2"/>"##,
        path.trim_end()
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="400" text-anchor="middle">false positive rate</text>"#,
        x0 + size / 2.0
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(20,{}) rotate(-90)" text-anchor="middle">true positive rate</text>"#,
        y0 - size / 2.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">AUC = {:.4}</text>"#,
        x0 + size - 10.0,
        y0 - 15.0,
        curve.auc
    );
    out.push_str("</svg>\n");
    out
}
