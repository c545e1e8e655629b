//! Minimal SVG charts: line charts, error-bar bar charts, heatmaps.
//!
//! Output is plain text with coordinates printed at fixed precision, so a
//! chart is a deterministic function of its data.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub label: String,
    pub value: f64,
    /// Half-height of the error bar.
    pub err: Option<f64>,
    /// Index into the palette.
    pub group: usize,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w:.0}" height="{h:.0}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Five evenly spaced ticks spanning [lo, hi].
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..5).map(|k| lo + (hi - lo) * k as f64 / 4.0).collect()
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn axes(out: &mut String, x_label: &str, y_label: &str, xr: (f64, f64), yr: (f64, f64), x_ticks: bool) {
    let (x0, x1, y0, y1) = (MARGIN_L, W - MARGIN_R, H - MARGIN_B, MARGIN_T);
    let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y0:.1}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{y1:.1}" stroke="black"/>"#);
    for t in ticks(yr.0, yr.1) {
        let y = y0 - (t - yr.0) / (yr.1 - yr.0) * (y0 - y1);
        let _ = writeln!(out, r##"<line x1="{:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#ddd"/>"##, x0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, fmt_tick(t));
    }
    if x_ticks {
        for t in ticks(xr.0, xr.1) {
            let x = x0 + (t - xr.0) / (xr.1 - xr.0) * (x1 - x0);
            let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, y0 + 18.0, fmt_tick(t));
        }
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        xlo = xlo.min(x);
        xhi = xhi.max(x);
        ylo = ylo.min(y);
        yhi = yhi.max(y);
    }
    let xr = padded_range(xlo, xhi);
    let yr = padded_range(ylo.min(0.0), yhi);
    let mut out = String::new();
    open(&mut out, W, H, title);
    axes(&mut out, x_label, y_label, xr, yr, true);
    let px = |x: f64| MARGIN_L + (x - xr.0) / (xr.1 - xr.0) * (W - MARGIN_R - MARGIN_L);
    let py = |y: f64| H - MARGIN_B - (y - yr.0) / (yr.1 - yr.0) * (H - MARGIN_B - MARGIN_T);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        for &(x, y) in &s.points {
            let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = MARGIN_T + 16.0 * k as f64 + 8.0;
        let lx = W - MARGIN_R + 12.0;
        let _ = writeln!(out, r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="4" fill="{color}"/>"#, ly - 4.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 18.0, ly + 2.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

pub fn bar_chart(title: &str, y_label: &str, bars: &[Bar]) -> String {
    let top = bars.iter().map(|b| b.value + b.err.unwrap_or(0.0)).fold(0.0_f64, f64::max);
    let yr = padded_range(0.0, top);
    let mut out = String::new();
    open(&mut out, W, H, title);
    axes(&mut out, "", y_label, (0.0, 1.0), yr, false);
    let plot_w = W - MARGIN_R - MARGIN_L;
    let slot = plot_w / bars.len().max(1) as f64;
    let py = |y: f64| H - MARGIN_B - (y - yr.0) / (yr.1 - yr.0) * (H - MARGIN_B - MARGIN_T);
    for (k, b) in bars.iter().enumerate() {
        let x = MARGIN_L + slot * k as f64 + slot * 0.15;
        let bw = slot * 0.7;
        let color = PALETTE[b.group % PALETTE.len()];
        let y = py(b.value.max(0.0));
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{bw:.1}" height="{:.1}" fill="{color}"/>"#,
            (H - MARGIN_B - y).max(0.0)
        );
        if let Some(e) = b.err {
            let cx = x + bw / 2.0;
            let (ya, yb) = (py((b.value - e).max(yr.0)), py(b.value + e));
            let _ = writeln!(out, r#"<line x1="{cx:.1}" y1="{ya:.1}" x2="{cx:.1}" y2="{yb:.1}" stroke="black"/>"#);
            for yy in [ya, yb] {
                let _ = writeln!(out, r#"<line x1="{:.1}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="black"/>"#, cx - 4.0, cx + 4.0);
            }
        }
        let lx = x + bw / 2.0;
        let ly = H - MARGIN_B + 12.0;
        let _ = writeln!(
            out,
            r#"<text x="{lx:.1}" y="{ly:.1}" font-size="9" text-anchor="end" transform="rotate(-40 {lx:.1} {ly:.1})">{}</text>"#,
            escape(&b.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Interpolates red (t = 0) through yellow to green (t = 1).
fn ramp_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g) = if t < 0.5 { (215.0, 48.0 + (t / 0.5) * (200.0 - 48.0)) } else { (215.0 - (t - 0.5) / 0.5 * (215.0 - 26.0), 200.0 - (t - 0.5) / 0.5 * 50.0) };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, 60)
}

/// Grid of `rows × cols` cells; `values` is row-major and `None` cells are
/// drawn grey. Rows are drawn top to bottom. With `high_is_good` false the
/// colour ramp is reversed.
pub fn heatmap(
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[Option<f64>],
    high_is_good: bool,
) -> String {
    let (rows, cols) = (row_labels.len(), col_labels.len());
    assert_eq!(values.len(), rows * cols, "heatmap needs one value per cell");
    let cell = 36.0;
    let (x0, y0) = (60.0, 40.0);
    let w = x0 + cell * cols as f64 + 90.0;
    let h = y0 + cell * rows as f64 + 40.0;
    let present = values.iter().flatten().copied();
    let (lo, hi) = present.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = padded_range(lo, hi);
    let mut out = String::new();
    open(&mut out, w, h, title);
    for r in 0..rows {
        for c in 0..cols {
            let (x, y) = (x0 + cell * c as f64, y0 + cell * r as f64);
            let fill = match values[r * cols + c] {
                Some(v) => {
                    let t = (v - lo) / (hi - lo);
                    ramp_color(if high_is_good { t } else { 1.0 - t })
                }
                None => "#bbbbbb".into(),
            };
            let _ = writeln!(out, r#"<rect x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="{fill}" stroke="white"/>"#);
            if let Some(v) = values[r * cols + c] {
                let _ = writeln!(
                    out,
                    r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="middle">{}</text>"#,
                    x + cell / 2.0,
                    y + cell / 2.0 + 3.0,
                    fmt_tick(v)
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y0 + cell * r as f64 + cell / 2.0 + 4.0,
            escape(&row_labels[r])
        );
    }
    for (c, label) in col_labels.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + cell * c as f64 + cell / 2.0,
            y0 + cell * rows as f64 + 16.0,
            escape(label)
        );
    }
    let lx = x0 + cell * cols as f64 + 14.0;
    for (k, (v, t)) in [(hi, 1.0), (lo, 0.0)].into_iter().enumerate() {
        let y = y0 + k as f64 * 24.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.1}" y="{y:.1}" width="14" height="14" fill="{}"/>"#,
            ramp_color(if high_is_good { t } else { 1.0 - t })
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 20.0, y + 11.0, fmt_tick(v));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let rows: Vec<String> = (1..=10).map(|s| format!("s{s}")).collect();
        let cols: Vec<String> = (1..=12).map(|j| j.to_string()).collect();
        let values: Vec<Option<f64>> = (0..120).map(|k| if k == 5 { None } else { Some(k as f64) }).collect();
        let svg = heatmap("speed", &rows, &cols, &values, true);
        let cells = svg.matches(r#"stroke="white""#).count();
        assert_eq!(cells, 120);
        assert!(svg.contains("#bbbbbb"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn line_chart_is_deterministic_and_escaped() {
        let s = vec![Series { label: "N<200>".into(), points: vec![(0.1, 0.3), (0.2, 0.1)] }];
        let a = line_chart("rmse", "M/N", "rmse", &s);
        assert_eq!(a, line_chart("rmse", "M/N", "rmse", &s));
        assert!(a.contains("N&lt;200&gt;"));
        assert_eq!(a.matches("<circle").count(), 2);
    }

    #[test]
    fn constant_series_does_not_divide_by_zero() {
        let s = vec![Series { label: "flat".into(), points: vec![(1.0, 0.0), (1.0, 0.0)] }];
        let svg = line_chart("t", "x", "y", &s);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        let b = bar_chart("b", "y", &[Bar { label: "a".into(), value: 0.0, err: None, group: 0 }]);
        assert!(!b.contains("NaN"));
    }
}
