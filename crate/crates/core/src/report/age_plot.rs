use std::fmt::Write;

use super::svg::{escape, open};
use crate::analysis::{AgeBucket, AgeCurve};
use crate::error::{Error, Result};

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

const W: f64 = 760.0;
const H: f64 = 380.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 44.0;

/// Line plot of mean probability against age, one line per label, with
/// observed prevalence drawn dotted where available.
pub fn emit_age_plot_svg(curves: &[AgeCurve]) -> Result<String> {
    let first = curves
        .first()
        .ok_or_else(|| Error::validation("age plot needs at least one curve"))?;
    let axis: Vec<AgeBucket> = first.points.iter().map(|p| p.0).collect();
    if axis.len() < 2 {
        return Err(Error::validation("age plot needs at least two ages"));
    }
    for c in curves {
        let same_axis = c.points.len() == axis.len() && c.points.iter().zip(&axis).all(|(p, a)| p.0 == *a);
        let overlay_ok = c.overlay.as_ref().is_none_or(|o| o.len() == axis.len());
        if !same_axis || !overlay_ok {
            return Err(Error::validation(format!(
                "curve {:?} does not share the age axis",
                c.label
            )));
        }
    }

    let ymax = curves
        .iter()
        .flat_map(|c| {
            c.points
                .iter()
                .map(|p| p.1)
                .chain(c.overlay.iter().flatten().flatten().copied())
        })
        .fold(0.0_f64, f64::max);
    let ymax = if ymax > 0.0 { (ymax * 1.1).min(1.0).max(ymax) } else { 1.0 };
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let x = |i: usize| LEFT + plot_w * i as f64 / (axis.len() - 1) as f64;
    let y = |v: f64| TOP + plot_h * (1.0 - v / ymax);

    let mut s = open(W, H);
    let _ = writeln!(
        s,
        "<path d=\"M{LEFT:.1},{TOP:.1} V{:.1} H{:.1}\" fill=\"none\" stroke=\"#000000\"/>",
        TOP + plot_h,
        LEFT + plot_w
    );
    for (i, b) in axis.iter().enumerate() {
        let tick = match b {
            AgeBucket::Years(n) => n % 10 == 0,
            AgeBucket::Over90 => true,
        } || i == 0;
        if tick {
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                x(i),
                TOP + plot_h + 16.0,
                match b {
                    AgeBucket::Over90 => escape(">90"),
                    b => b.to_string(),
                }
            );
        }
    }
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.3}</text>",
            LEFT - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">age</text>",
        LEFT + plot_w / 2.0,
        H - 8.0
    );

    for (n, c) in curves.iter().enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{:.2},{:.2}", x(i), y(p.1)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"><title>{}</title></polyline>",
            pts.join(" "),
            escape(&c.label)
        );
        if let Some(overlay) = &c.overlay {
            // break the dotted line wherever no note has that age
            let mut run: Vec<String> = Vec::new();
            for (i, v) in overlay.iter().enumerate().chain([(overlay.len(), &None)]) {
                match v {
                    Some(v) => run.push(format!("{:.2},{:.2}", x(i), y(*v))),
                    None if !run.is_empty() => {
                        let _ = writeln!(
                            s,
                            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-dasharray=\"2,3\"/>",
                            run.join(" ")
                        );
                        run.clear();
                    }
                    None => {}
                }
            }
        }
        let ly = TOP + 16.0 * n as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            W - RIGHT + 12.0,
            W - RIGHT + 32.0,
            W - RIGHT + 38.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
