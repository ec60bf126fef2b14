//! Top-down SVG of one surface: boundary, region grid, asset footprints and
//! facing arrows. One user unit is one centimetre; y points up in the scene
//! and is flipped for display.

use std::fmt::Write as _;

use crate::geometry::Rect;
use crate::scene::{footprint, DecorScene};

use super::PipelineError;

const PAD_CM: f64 = 5.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn export_svg(scene: &DecorScene, surface_index: usize) -> Result<String, PipelineError> {
    let s = scene.surface(surface_index).ok_or(PipelineError::UnknownSurface(surface_index))?;
    let b = s.bbox;
    let tx = |x: f64| x - b.min_x + PAD_CM;
    let ty = |y: f64| b.max_y - y + PAD_CM;
    let (w, h) = (b.width() + 2.0 * PAD_CM, b.depth() + 2.0 * PAD_CM);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w:.2} {h:.2}" width="{w:.2}" height="{h:.2}">"#
    );
    let _ = writeln!(out, "<title>surface {} at {:.2} cm</title>", s.index, s.height_cm);
    let pts: Vec<String> = s.boundary.iter().map(|p| format!("{:.2},{:.2}", tx(p[0]), ty(p[1]))).collect();
    let _ = writeln!(out, r##"<polygon class="surface" points="{}" fill="#f4efe6" stroke="#555555" stroke-width="0.5"/>"##, pts.join(" "));

    for i in 1..3 {
        let f = f64::from(i) / 3.0;
        let x = tx(b.min_x + f * b.width());
        let y = ty(b.min_y + f * b.depth());
        let _ = writeln!(
            out,
            r##"<line class="region-grid" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#999999" stroke-width="0.3" stroke-dasharray="2,2"/>"##,
            ty(b.max_y),
            ty(b.min_y)
        );
        let _ = writeln!(
            out,
            r##"<line class="region-grid" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#999999" stroke-width="0.3" stroke-dasharray="2,2"/>"##,
            tx(b.min_x),
            tx(b.max_x)
        );
    }

    // Bases first so stacked assets are drawn above them.
    let mut assets: Vec<_> = scene
        .assets_on(surface_index)
        .filter_map(|a| scene.layout.get(&a.id).map(|p| (a, p)))
        .collect();
    assets.sort_by(|(a, p), (b, q)| (p.z_cm.total_cmp(&q.z_cm)).then(a.id.cmp(&b.id)));
    for (a, p) in assets {
        let r: Rect = footprint(a, p.x_cm, p.y_cm, p.orientation);
        let fill = if p.stack_base.is_some() { "#e53935" } else { "#90caf9" };
        let _ = writeln!(out, r#"<g class="asset" data-id="{}">"#, esc(&a.id));
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="0.6" stroke="#1a1a1a" stroke-width="0.4"/>"##,
            tx(r.min_x),
            ty(r.max_y),
            r.width(),
            r.depth()
        );
        let yaw = f64::from(p.orientation.yaw_deg()).to_radians();
        let len = 0.4 * r.width().min(r.depth());
        let (dx, dy) = (yaw.sin() * len, -yaw.cos() * len);
        let _ = writeln!(
            out,
            r##"<line class="facing" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#1a1a1a" stroke-width="0.5"/>"##,
            tx(p.x_cm),
            ty(p.y_cm),
            tx(p.x_cm + dx),
            ty(p.y_cm + dy)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="3" text-anchor="middle">{}</text>"#,
            tx(p.x_cm),
            ty(p.y_cm) - 1.0,
            esc(&a.name)
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}
