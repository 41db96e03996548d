//! CSV and SVG rendering and atomic file output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::observables::Observable;

/// Significant digits written to CSV.
pub const CSV_DIGITS: usize = 12;

/// Format like C's `%.{digits}g`. Undefined samples print as `nan`.
pub fn format_g(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Observable values on a time grid; `None` marks undefined samples.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub observables: Vec<Observable>,
    pub t: Vec<f64>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl TimeSeries {
    pub fn column(&self, obs: Observable) -> Option<Vec<Option<f64>>> {
        let j = self.observables.iter().position(|&o| o == obs)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Column with undefined samples as NaN.
    pub fn values(&self, obs: Observable) -> Option<Vec<f64>> {
        self.column(obs)
            .map(|c| c.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for o in &self.observables {
            out.push(',');
            out.push_str(o.name());
        }
        out.push('\n');
        for (t, row) in self.t.iter().zip(&self.rows) {
            out.push_str(&format_g(*t, CSV_DIGITS));
            for v in row {
                out.push(',');
                out.push_str(&format_g(v.unwrap_or(f64::NAN), CSV_DIGITS));
            }
            out.push('\n');
        }
        out
    }
}

/// Write `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

const PALETTE: [&str; 4] = ["steelblue", "firebrick", "seagreen", "darkorange"];

/// Minimal line plot: axes, extreme tick labels and one polyline per series.
pub fn render_svg(title: &str, t: &[f64], series: &[(String, Vec<f64>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let finite: Vec<f64> = series
        .iter()
        .flat_map(|(_, y)| y.iter().copied())
        .filter(|v| v.is_finite())
        .collect();
    let (mut lo, mut hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let t0 = t.first().copied().unwrap_or(0.0);
    let t1 = t.last().copied().unwrap_or(1.0).max(t0 + 1e-12);
    let sx = |v: f64| M + (v - t0) / (t1 - t0) * (W - 2.0 * M);
    let sy = |v: f64| H - M - (v - lo) / (hi - lo) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{M} {M} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    let label = |s: &mut String, x: f64, y: f64, anchor: &str, text: &str| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{text}</text>"#
        );
    };
    label(&mut s, W / 2.0, M / 2.0, "middle", title);
    label(&mut s, M, H - M + 18.0, "middle", &format_g(t0, 4));
    label(&mut s, W - M, H - M + 18.0, "middle", &format_g(t1, 4));
    label(&mut s, W / 2.0, H - 8.0, "middle", "gt");
    label(&mut s, M - 6.0, sy(lo) + 4.0, "end", &format_g(lo, 4));
    label(&mut s, M - 6.0, sy(hi) + 4.0, "end", &format_g(hi, 4));

    for (k, (name, y)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        // Break the line at undefined samples.
        let mut d = String::new();
        let mut pen_down = false;
        for (&ti, &yi) in t.iter().zip(y) {
            if yi.is_finite() {
                let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { 'L' } else { 'M' }, sx(ti), sy(yi));
                pen_down = true;
            } else {
                pen_down = false;
            }
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.2"/>"#,
            d.trim_end()
        );
        if series.len() > 1 {
            let _ = writeln!(
                s,
                r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="11" fill="{colour}">{name}</text>"#,
                x = W - M + 4.0,
                y = M + 14.0 * k as f64
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
