//! Deterministic SVG figures: per-category IID-vs-OOD Ψ scatters and
//! per-target sign-error panels.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use genmeter_core::measures::{Category, CATALOG};
use genmeter_core::stats::{PsiRow, SignErrorRow};

pub const IID_TARGET: &str = "gen_gap_iid";

/// Affine map from data coordinates to SVG user units (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Frame {
    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let sx = self.left + (x - x0) / (x1 - x0) * self.width;
        let sy = self.top + (y1 - y) / (y1 - y0) * self.height;
        (sx, sy)
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }
}

/// Frame of every scatter: Ψ ∈ [−1, 1] on both axes.
pub const SCATTER_FRAME: Frame =
    Frame { left: 60.0, top: 40.0, width: 320.0, height: 320.0, x_range: (-1.0, 1.0), y_range: (-1.0, 1.0) };

const SCATTER_SIZE: (f64, f64) = (560.0, 420.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub measure: String,
    pub target: String,
    pub x: f64,
    pub y: f64,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One point per (measure, OOD target) of `category` that has both an IID
/// and an OOD Ψ, in catalog order.
pub fn scatter_points(psi: &[PsiRow], category: Category) -> Vec<ScatterPoint> {
    let mut by: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in psi.iter().filter(|r| r.category == category) {
        by.entry((r.measure.as_str(), r.target.as_str())).or_insert(r.psi);
    }
    let mut out = Vec::new();
    for (name, _) in CATALOG.iter().filter(|(_, c)| *c == category) {
        let Some(&x) = by.get(&(*name, IID_TARGET)) else { continue };
        for ((m, t), &y) in by.range((*name, "")..) {
            if m != name {
                break;
            }
            if *t != IID_TARGET {
                out.push(ScatterPoint { measure: name.to_string(), target: t.to_string(), x, y });
            }
        }
    }
    out
}

fn glyph(svg: &mut String, kind: usize, x: f64, y: f64, title: &str) {
    let r = 4.5;
    let t = format!("<title>{}</title>", esc(title));
    let _ = match kind % 5 {
        0 => writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="none" stroke="black">{t}</circle>"#),
        1 => writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black">{t}</rect>"#,
            x - r,
            y - r,
            2.0 * r,
            2.0 * r
        ),
        2 => writeln!(
            svg,
            r#"<path d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} Z" fill="none" stroke="black">{t}</path>"#,
            x,
            y - r,
            x + r,
            y + r,
            x - r,
            y + r
        ),
        3 => writeln!(
            svg,
            r#"<path d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} Z" fill="none" stroke="black">{t}</path>"#,
            x,
            y - r,
            x + r,
            y,
            x,
            y + r,
            x - r,
            y
        ),
        _ => writeln!(
            svg,
            r#"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="black">{t}</path>"#,
            x - r,
            y - r,
            x + r,
            y + r,
            x - r,
            y + r,
            x + r,
            y - r
        ),
    };
}

fn header(svg: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ =
        writeln!(svg, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="13">{}</text>"#, w / 2.0, esc(title));
}

/// Scatter of IID Ψ (x) against OOD Ψ (y) with quadrant gridlines. One
/// glyph shape per OOD target; "no data" when `points` is empty.
pub fn scatter_svg(category: Category, points: &[ScatterPoint]) -> String {
    let f = SCATTER_FRAME;
    let (w, h) = SCATTER_SIZE;
    let mut svg = String::new();
    header(&mut svg, w, h, &format!("{category}: IID vs OOD granulated correlation"));
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        f.left, f.top, f.width, f.height
    );
    let (cx, cy) = f.map(0.0, 0.0);
    let _ = writeln!(
        svg,
        r##"<path d="M{cx:.2},{:.2} L{cx:.2},{:.2} M{:.2},{cy:.2} L{:.2},{cy:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        f.top,
        f.bottom(),
        f.left,
        f.right()
    );
    for v in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let (x, _) = f.map(v, 0.0);
        let (_, y) = f.map(0.0, v);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#, f.bottom() + 14.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v}</text>"#, f.left - 5.0, y + 4.0);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">IID Ψ</text>"#,
        f.left + f.width / 2.0,
        f.bottom() + 32.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">OOD Ψ</text>"#,
        f.top + f.height / 2.0,
        f.top + f.height / 2.0
    );
    if points.is_empty() {
        let _ = writeln!(
            svg,
            r##"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" fill="#555">no data</text>"##,
            cy - 10.0
        );
    } else {
        let mut targets: Vec<&str> = points.iter().map(|p| p.target.as_str()).collect();
        targets.sort();
        targets.dedup();
        for p in points {
            let k = targets.iter().position(|t| *t == p.target).unwrap_or(0);
            let (x, y) = f.map(p.x.clamp(-1.0, 1.0), p.y.clamp(-1.0, 1.0));
            glyph(&mut svg, k, x, y, &format!("{} {} ({:.3}, {:.3})", p.measure, p.target, p.x, p.y));
        }
        for (k, t) in targets.iter().enumerate() {
            let y = f.top + 10.0 + 18.0 * k as f64;
            glyph(&mut svg, k, f.right() + 20.0, y, t);
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, f.right() + 32.0, y + 4.0, esc(t));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// One row per measure with mean (circle), p90 (bar) and max (cross)
/// markers on a [0, 1] sign-error axis.
pub fn sign_error_svg(target: &str, rows: &[&SignErrorRow]) -> String {
    let row_h = 14.0;
    let label_w = 190.0;
    let f = Frame {
        left: label_w,
        top: 40.0,
        width: 300.0,
        height: row_h * rows.len().max(1) as f64,
        x_range: (0.0, 1.0),
        y_range: (0.0, rows.len().max(1) as f64),
    };
    let (w, h) = (f.right() + 30.0, f.bottom() + 60.0);
    let mut svg = String::new();
    header(&mut svg, w, h, &format!("Sign-error distribution: {target}"));
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        f.left, f.top, f.width, f.height
    );
    for v in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let (x, _) = f.map(v, 0.0);
        let _ = writeln!(svg, r##"<path d="M{x:.2},{:.2} L{x:.2},{:.2}" stroke="#ccc"/>"##, f.top, f.bottom());
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#, f.bottom() + 14.0);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">sign error (mean ○, p90 |, max ×)</text>"#,
        f.left + f.width / 2.0,
        f.bottom() + 32.0
    );
    if rows.is_empty() {
        let (x, y) = f.map(0.5, 0.5);
        let _ =
            writeln!(svg, r##"<text x="{x:.2}" y="{:.2}" text-anchor="middle" fill="#555">no data</text>"##, y + 4.0);
    }
    for (i, r) in rows.iter().enumerate() {
        let yc = f.top + row_h * (i as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            f.left - 6.0,
            yc + 4.0,
            esc(&r.measure)
        );
        let (Some(mean), Some(p90), Some(max)) = (r.mean, r.p90, r.max) else {
            let _ = writeln!(svg, r##"<text x="{:.2}" y="{:.2}" fill="#555">no data</text>"##, f.left + 6.0, yc + 4.0);
            continue;
        };
        let (x0, _) = f.map(0.0, 0.0);
        let (xm, _) = f.map(mean, 0.0);
        let (xp, _) = f.map(p90, 0.0);
        let (xx, _) = f.map(max, 0.0);
        let _ = writeln!(svg, r##"<path d="M{x0:.2},{yc:.2} L{xx:.2},{yc:.2}" stroke="#999"/>"##);
        let _ = writeln!(svg, r#"<circle cx="{xm:.2}" cy="{yc:.2}" r="3.5" fill="none" stroke="black"/>"#);
        let _ = writeln!(svg, r#"<path d="M{xp:.2},{:.2} L{xp:.2},{:.2}" stroke="black"/>"#, yc - 5.0, yc + 5.0);
        let _ = writeln!(
            svg,
            r#"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="black"/>"#,
            xx - 3.5,
            yc - 3.5,
            xx + 3.5,
            yc + 3.5,
            xx - 3.5,
            yc + 3.5,
            xx + 3.5,
            yc - 3.5
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// `scatter_<category>.svg` for every category and `sign_error_<target>.svg`
/// for every target in `se`. Returns the written paths.
pub fn write_all(dir: &Path, psi: &[PsiRow], se: &[SignErrorRow]) -> anyhow::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> anyhow::Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body).with_context(|| format!("cannot write {}", p.display()))?;
        written.push(p);
        Ok(())
    };
    for c in Category::ALL {
        put(format!("scatter_{c}.svg"), scatter_svg(c, &scatter_points(psi, c)))?;
    }
    let mut targets: Vec<&str> = se.iter().map(|r| r.target.as_str()).collect();
    targets.sort();
    targets.dedup();
    for t in targets {
        let rows: Vec<&SignErrorRow> = se.iter().filter(|r| r.target == t).collect();
        put(format!("sign_error_{t}.svg"), sign_error_svg(t, &rows))?;
    }
    Ok(written)
}
