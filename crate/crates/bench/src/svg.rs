//! Static SVG rendering of an environment and a planner snapshot, projected
//! onto two coordinate axes.
//!
//! Element classes: `obstacle` (gray), `valid` (black dots), `invalid` (red
//! dots), `tree` (thin lines), `path` (highlighted incumbent), `start` and
//! `goal` markers.

use std::fmt::Write;

use fdit::{Environment, Snapshot};

use crate::error::{BenchError, Result};

const CANVAS: f64 = 600.0;
const MARGIN: f64 = 10.0;

struct Projection {
    axes: (usize, usize),
    lower: (f64, f64),
    scale: (f64, f64),
}

impl Projection {
    fn point(&self, p: &[f64]) -> (f64, f64) {
        let (i, j) = self.axes;
        let x = MARGIN + (p[i] - self.lower.0) * self.scale.0;
        // SVG y grows downwards
        let y = MARGIN + CANVAS - (p[j] - self.lower.1) * self.scale.1;
        (x, y)
    }
}

pub fn check_axes(axes: (usize, usize), dimension: usize) -> Result<()> {
    let (i, j) = axes;
    if i == j || i >= dimension || j >= dimension {
        return Err(BenchError::BadAxes(i, j, dimension));
    }
    Ok(())
}

/// Renders `snapshot` over `env`. For dimensions above two, obstacles and
/// samples are projected onto `axes`.
pub fn render_svg(env: &Environment, snapshot: &Snapshot, axes: (usize, usize)) -> Result<String> {
    let n = env.dimension();
    check_axes(axes, n)?;
    if snapshot.dimension != n {
        return Err(fdit::FditError::DimensionMismatch {
            expected: n,
            got: snapshot.dimension,
        }
        .into());
    }
    let b = env.bounds();
    let (i, j) = axes;
    let proj = Projection {
        axes,
        lower: (b.lower[i], b.lower[j]),
        scale: (
            CANVAS / (b.upper[i] - b.lower[i]),
            CANVAS / (b.upper[j] - b.lower[j]),
        ),
    };
    let size = CANVAS + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect class="bounds" x="{MARGIN}" y="{MARGIN}" width="{CANVAS}" height="{CANVAS}" fill="white" stroke="black"/>"#
    );

    let _ = writeln!(s, r#"<g id="obstacles" fill="gray">"#);
    for o in env.obstacles() {
        let (x0, y1) = proj.point(&o.min);
        let (x1, y0) = proj.point(&o.max);
        let _ = writeln!(
            s,
            r#"<rect class="obstacle" x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}"/>"#,
            x1 - x0,
            y1 - y0
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="tree" stroke="steelblue" stroke-width="0.6">"#);
    for &[p, c] in &snapshot.tree_edges {
        let (x0, y0) = proj.point(&snapshot.valid_samples[p]);
        let (x1, y1) = proj.point(&snapshot.valid_samples[c]);
        let _ = writeln!(
            s,
            r#"<line class="tree" x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y1:.3}"/>"#
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="valid-samples" fill="black">"#);
    for p in &snapshot.valid_samples {
        let (x, y) = proj.point(p);
        let _ = writeln!(
            s,
            r#"<circle class="valid" cx="{x:.3}" cy="{y:.3}" r="1.5"/>"#
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="invalid-samples" fill="red">"#);
    for p in &snapshot.invalid_samples {
        let (x, y) = proj.point(p);
        let _ = writeln!(
            s,
            r#"<circle class="invalid" cx="{x:.3}" cy="{y:.3}" r="1.5"/>"#
        );
    }
    let _ = writeln!(s, "</g>");

    if let Some(best) = snapshot.incumbents.last() {
        let points: Vec<String> = best
            .path
            .iter()
            .map(|q| {
                let (x, y) = proj.point(q.coords());
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="path" points="{}" fill="none" stroke="orange" stroke-width="3"/>"#,
            points.join(" ")
        );
    }

    for (class, p, color) in [
        ("start", &snapshot.start, "green"),
        ("goal", &snapshot.goal, "blue"),
    ] {
        let (x, y) = proj.point(p);
        let _ = writeln!(
            s,
            r#"<circle class="{class}" cx="{x:.3}" cy="{y:.3}" r="6" fill="{color}" stroke="black"/>"#
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
