//! Static SVG rendering of sweep tables.
//!
//! Panels are stacked over a shared ROP axis. The QBER and BER panels carry
//! their threshold lines.

use std::fmt::Write as _;

use qkdlink_core::experiments::SweepRow;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 220.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const GAP: f64 = 50.0;
/// Plotted BER values are clamped here so underflowed points stay on the axis.
const BER_FLOOR: f64 = 1e-30;

struct Panel<'a> {
    title: &'a str,
    ylabel: &'a str,
    /// One (values, color) pair per sweep.
    series: Vec<(Vec<f64>, &'a str)>,
    reference: Option<(f64, &'a str)>,
}

fn nice_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, dash: bool) {
    let _ = write!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{} points=""#,
        if dash { r#" stroke-dasharray="6 4""# } else { "" }
    );
    for (x, y) in pts {
        let _ = write!(out, "{x:.2},{y:.2} ");
    }
    out.push_str("\"/>\n");
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, s: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{s}</text>"#
    );
}

fn draw_panel(out: &mut String, top: f64, xs: &[f64], panel: &Panel) {
    let (x0, x1) = nice_range(xs.iter().copied());
    let refs = panel.reference.iter().map(|r| r.0);
    let all = panel.series.iter().flat_map(|(v, _)| v.iter().copied());
    let (y0, y1) = nice_range(all.chain(refs));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| top + PANEL_HEIGHT - (y - y0) / (y1 - y0) * PANEL_HEIGHT;

    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="#444"/>"##
    );
    text(out, MARGIN_LEFT, top - 8.0, "start", panel.title);
    for k in 0..=4 {
        let yv = y0 + (y1 - y0) * k as f64 / 4.0;
        let xv = x0 + (x1 - x0) * k as f64 / 4.0;
        text(out, MARGIN_LEFT - 6.0, sy(yv) + 4.0, "end", &format!("{yv:.3}"));
        text(out, sx(xv), top + PANEL_HEIGHT + 14.0, "middle", &format!("{xv:.1}"));
    }
    let _ = writeln!(
        out,
        r#"<text transform="translate(14,{:.1}) rotate(-90)" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
        top + PANEL_HEIGHT / 2.0,
        panel.ylabel
    );
    for (values, color) in &panel.series {
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .zip(values)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| (sx(x), sy(y)))
            .collect();
        polyline(out, &pts, color, false);
    }
    if let Some((level, label)) = panel.reference {
        polyline(out, &[(sx(x0), sy(level)), (sx(x1), sy(level))], "#c00", true);
        text(out, sx(x1) - 4.0, sy(level) - 4.0, "end", label);
    }
}

/// SVG document for one or more sweeps over the same grid, each in its own
/// color. The first sweep's rows define the x axis.
pub fn sweep_svg(sweeps: &[&[SweepRow]], qber_threshold: f64, ber_target: f64) -> String {
    const COLORS: [&str; 4] = ["#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"];
    let height = MARGIN_TOP + 3.0 * PANEL_HEIGHT + 2.0 * GAP + 40.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let xs: Vec<f64> = sweeps
        .first()
        .map(|rows| rows.iter().map(|r| r.rop_dbm).collect())
        .unwrap_or_default();
    let series = |f: &dyn Fn(&SweepRow) -> f64| -> Vec<(Vec<f64>, &'static str)> {
        sweeps
            .iter()
            .enumerate()
            .map(|(i, rows)| (rows.iter().map(f).collect(), COLORS[i % COLORS.len()]))
            .collect()
    };
    let panels = [
        Panel {
            title: "QBER vs classical ROP (dBm)",
            ylabel: "QBER",
            series: series(&|r| r.qber),
            reference: Some((qber_threshold, "QBER threshold")),
        },
        Panel {
            title: "raw-key rate vs classical ROP (dBm)",
            ylabel: "raw rate (counts/s)",
            series: series(&|r| r.raw_rate),
            reference: None,
        },
        Panel {
            title: "classical BER vs ROP (dBm)",
            ylabel: "log10 BER (floor 1e-30)",
            series: series(&|r| r.classical_ber.max(BER_FLOOR).log10()),
            reference: Some((ber_target.log10(), "BER target")),
        },
    ];
    for (k, p) in panels.iter().enumerate() {
        draw_panel(&mut out, MARGIN_TOP + k as f64 * (PANEL_HEIGHT + GAP), &xs, p);
    }
    for (i, rows) in sweeps.iter().enumerate() {
        let name = rows.first().map(|r| r.config.name()).unwrap_or("");
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11" fill="{}">{name}</text>"#,
            WIDTH - MARGIN_RIGHT,
            14.0 + 12.0 * i as f64,
            COLORS[i % COLORS.len()]
        );
    }
    out.push_str("</svg>\n");
    out
}
