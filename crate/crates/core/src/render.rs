//! SVG arc diagrams of matchings on the line.
//!
//! Points are vertical ticks on a horizontal axis. An edge whose red end is
//! on the left is an upward arc, otherwise a downward arc. One-colour edges
//! are all drawn upward. Boundary points get a short dashed stub toward the
//! side where their partner lies.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::finite_match::Matching;
use crate::line::{BoundaryPoint, Side, WindowMatching};
use crate::points::{Colour, Mode, PointConfig, PointRef};

pub const WIDTH: f64 = 1000.0;
pub const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 20.0;
const TICK: f64 = 8.0;
const STUB: f64 = 15.0;

fn colour(mode: Mode, c: Colour) -> &'static str {
    match (mode, c) {
        (Mode::OneColour, _) => "#222222",
        (Mode::TwoColour, Colour::Red) => "#c0392b",
        (Mode::TwoColour, Colour::Blue) => "#2c6fbb",
    }
}

pub fn render_matching(config: &PointConfig, m: &Matching) -> Result<String> {
    let edges: Vec<(PointRef, PointRef)> = m.edge_refs().collect();
    render(config, &edges, &[])
}

pub fn render_window(config: &PointConfig, m: &WindowMatching) -> Result<String> {
    render(config, m.edge_refs(), m.boundary())
}

/// The arc diagram of `edges` over the points of `config`, scaled to the
/// window.
pub fn render(
    config: &PointConfig,
    edges: &[(PointRef, PointRef)],
    boundary: &[BoundaryPoint],
) -> Result<String> {
    if config.dim() != 1 {
        return Err(Error::InvalidInput(
            "arc diagrams need points on the line".into(),
        ));
    }
    let (lo, hi) = config.window().span();
    let scale = (WIDTH - 2.0 * MARGIN) / (hi - lo);
    let px = |x: f64| MARGIN + (x - lo) * scale;
    let mid = HEIGHT / 2.0;
    let reach = mid - MARGIN;
    let mode = config.mode();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.3}" y1="{mid:.3}" x2="{:.3}" y2="{mid:.3}" stroke="#888888" stroke-width="1"/>"##,
        px(lo),
        px(hi)
    );
    let _ = writeln!(s, r#"<g fill="none" stroke-width="1.2">"#);
    for &(a, b) in edges {
        let (xa, xb) = (config.x(a), config.x(b));
        let (l, r) = (px(xa.min(xb)), px(xa.max(xb)));
        let left = if xa <= xb { a } else { b };
        let up = mode == Mode::OneColour || left.colour == Colour::Red;
        let rx = (r - l) / 2.0;
        let ry = rx.min(reach);
        let sweep = if up { 1 } else { 0 };
        let c = colour(mode, Colour::Red);
        let _ = writeln!(
            s,
            r#"<path d="M {l:.3} {mid:.3} A {rx:.3} {ry:.3} 0 0 {sweep} {r:.3} {mid:.3}" stroke="{}"/>"#,
            if mode == Mode::OneColour {
                c
            } else {
                "#555555"
            }
        );
    }
    let _ = writeln!(s, "</g>");
    for b in boundary {
        let x = px(config.x(b.point));
        let end = match b.side {
            Side::Left => x - STUB,
            Side::Right => x + STUB,
        };
        let _ = writeln!(
            s,
            r##"<line x1="{x:.3}" y1="{mid:.3}" x2="{end:.3}" y2="{:.3}" stroke="#555555" stroke-dasharray="3,2"/>"##,
            mid - STUB
        );
    }
    for p in config.refs() {
        let x = px(config.x(p));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.3}" y1="{:.3}" x2="{x:.3}" y2="{:.3}" stroke="{}" stroke-width="2"/>"#,
            mid - TICK,
            mid + TICK,
            colour(mode, p.colour)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::line::meshalkin;

    #[test]
    fn arcs_follow_orientation() {
        // red 0 with blue 1 (upward), blue 2 with red 3 (downward)
        let cfg = PointConfig::line((-1.0, 4.0), Mode::TwoColour, vec![0.0, 3.0], vec![1.0, 2.0])
            .unwrap();
        let m = Matching::two_colour(vec![(0, 0), (1, 1)], vec![], vec![]);
        let svg = render_matching(&cfg, &m).unwrap();
        let sweeps: Vec<&str> = svg
            .lines()
            .filter(|l| l.starts_with("<path"))
            .map(|l| &l[l.find(" 0 0 ").unwrap() + 5..][..1])
            .collect();
        assert_eq!(sweeps, vec!["1", "0"]);
        assert_eq!(svg.matches(r#"stroke-width="2""#).count(), 4);
        assert_eq!(svg, render_matching(&cfg, &m).unwrap());
    }

    #[test]
    fn empty_matching_is_axis_and_ticks() {
        let cfg = PointConfig::line((0.0, 1.0), Mode::OneColour, vec![], vec![]).unwrap();
        let svg = render_matching(&cfg, &Matching::empty(&cfg)).unwrap();
        assert!(!svg.contains("<path"));
        assert_eq!(svg.matches("<line").count(), 1);
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn boundary_stubs() {
        let cfg =
            PointConfig::line((-5.0, 5.0), Mode::TwoColour, vec![-1.0, 2.0], vec![1.0]).unwrap();
        let m = meshalkin(&cfg).unwrap();
        let svg = render_window(&cfg, &m).unwrap();
        assert_eq!(svg.matches("stroke-dasharray").count(), m.boundary().len());
        let plane = PointConfig::new(
            crate::points::Window::cube(2, 0.0, 1.0).unwrap(),
            Mode::OneColour,
            vec![],
            vec![],
        )
        .unwrap();
        assert!(render_matching(&plane, &Matching::empty(&plane)).is_err());
    }
}
